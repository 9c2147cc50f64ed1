//! Rating model math: per-batch return normalization, class boundaries,
//! class probabilities, the loss variants and batch sampling schemes.
//!
//! Everything here is a pure function of its inputs (plus an explicit RNG for
//! sampling) and generic over [`Scalar`].

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Floor applied to probabilities inside `ln` so cross-entropy stays finite.
pub const PROB_FLOOR: f64 = 1e-12;

/// A discrete rating class index in `0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RatingLabel(usize);

impl RatingLabel {
    pub fn new(value: usize, n: usize) -> Result<Self> {
        if value >= n {
            return Err(Error::LabelOutOfRange { label: value, n });
        }
        Ok(Self(value))
    }

    /// Construct without a class-count check. Callers validate against `n`
    /// wherever the label enters a dataset.
    pub const fn new_unchecked(value: usize) -> Self {
        Self(value)
    }

    pub const fn index(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for RatingLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Multi-class cross-entropy against the one-hot rating.
    Ce,
    /// Sum of absolute differences between one-hot rating and class probabilities.
    Mae,
    /// Cross-entropy against `(1 - r) * onehot + r / n`.
    CeLabelSmooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    Uniform,
    Stratified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub kind: LossKind,
    /// Soft-label rate, only read by [`LossKind::CeLabelSmooth`].
    pub smoothing_rate: f64,
    pub class_weighting: bool,
    pub sampling: Sampling,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            kind: LossKind::Mae,
            smoothing_rate: 0.1,
            class_weighting: true,
            sampling: Sampling::Stratified,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.smoothing_rate) {
            return Err(Error::Config(format!(
                "smoothing rate {} outside [0, 1)",
                self.smoothing_rate
            )));
        }
        Ok(())
    }

    /// Per-class loss weights for the given class counts; all ones when
    /// class weighting is switched off.
    pub fn weights_for<T: Scalar>(&self, counts: &[usize]) -> Result<Vec<T>> {
        if self.class_weighting {
            class_weights(counts)
        } else if counts.iter().all(|&c| c == 0) {
            Err(Error::EmptyDataset)
        } else {
            Ok(vec![T::one(); counts.len()])
        }
    }

    /// Loss of one sample under this configuration.
    pub fn loss<T: Scalar>(&self, probs: &[T], label: RatingLabel, weight: T) -> T {
        match self.kind {
            LossKind::Ce => ce_loss(probs, label, weight),
            LossKind::Mae => mae_loss(probs, label, weight),
            LossKind::CeLabelSmooth => {
                smoothed_ce_loss(probs, label, T::of(self.smoothing_rate), weight)
            }
        }
    }

    /// Writes `d loss / d probs` into `out`.
    pub fn loss_grad<T: Scalar>(&self, probs: &[T], label: RatingLabel, weight: T, out: &mut [T]) {
        debug_assert_eq!(probs.len(), out.len());
        let floor = T::of(PROB_FLOOR);
        match self.kind {
            LossKind::Ce => {
                out.iter_mut().for_each(|g| *g = T::zero());
                let p = probs[label.index()];
                if p >= floor {
                    out[label.index()] = -weight / p;
                }
            }
            LossKind::Mae => {
                // Subgradient of sum |onehot - p| on the open simplex.
                for (i, g) in out.iter_mut().enumerate() {
                    *g = if i == label.index() { -weight } else { weight };
                }
            }
            LossKind::CeLabelSmooth => {
                let targets = smoothed_targets(probs.len(), label, T::of(self.smoothing_rate));
                for ((g, &p), t) in out.iter_mut().zip(probs).zip(targets) {
                    *g = if p >= floor {
                        -weight * t / p
                    } else {
                        T::zero()
                    };
                }
            }
        }
    }
}

/// Min-max normalized batch returns plus what the backward pass needs.
#[derive(Debug, Clone)]
pub struct Normalized<T> {
    pub values: Vec<T>,
    argmin: usize,
    argmax: usize,
    range: T,
}

impl<T: Scalar> Normalized<T> {
    pub fn compute(raw: &[T]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let (mut argmin, mut argmax) = (0, 0);
        for (j, &r) in raw.iter().enumerate() {
            if r < raw[argmin] {
                argmin = j;
            }
            if r > raw[argmax] {
                argmax = j;
            }
        }
        let (lo, hi) = (raw[argmin], raw[argmax]);
        let range = hi - lo;
        let values = if range > T::zero() {
            raw.iter().map(|&r| (r - lo) / range).collect()
        } else {
            vec![T::of(0.5); raw.len()]
        };
        Ok(Self {
            values,
            argmin,
            argmax,
            range,
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.range <= T::zero()
    }

    /// Chain rule through the normalization: maps `d loss / d normalized` to
    /// `d loss / d raw`. Min and max take their gradient at the first achieving index.
    pub fn backward(&self, grad_normalized: &[T]) -> Vec<T> {
        let b = self.values.len();
        let mut grad_raw = vec![T::zero(); b];
        if self.is_degenerate() {
            return grad_raw;
        }
        let inv = T::one() / self.range;
        let mut to_min = T::zero();
        let mut to_max = T::zero();
        for j in 0..b {
            let g = grad_normalized[j];
            grad_raw[j] += g * inv;
            // d x_j / d min = (x_j - 1) / range, d x_j / d max = -x_j / range
            to_min += g * (self.values[j] - T::one()) * inv;
            to_max -= g * self.values[j] * inv;
        }
        grad_raw[self.argmin] += to_min;
        grad_raw[self.argmax] += to_max;
        grad_raw
    }
}

/// Min-max normalization within a batch; a batch of equal returns maps to 0.5.
pub fn normalize_returns<T: Scalar>(raw: &[T]) -> Result<Vec<T>> {
    Normalized::compute(raw).map(|n| n.values)
}

/// Class boundaries `0 = b_0 <= b_1 <= ... <= b_n = 1` on the normalized-return axis.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingBoundaries<T> {
    bounds: Vec<T>,
}

impl<T: Scalar> RatingBoundaries<T> {
    /// Validates the endpoint and monotonicity invariants.
    pub fn new(bounds: Vec<T>) -> Result<Self> {
        if bounds.len() < 2 {
            return Err(Error::Config("boundaries need at least two entries".into()));
        }
        if bounds[0] != T::zero() || bounds[bounds.len() - 1] != T::one() {
            return Err(Error::Config(
                "boundaries must start at 0 and end at 1".into(),
            ));
        }
        if bounds
            .windows(2)
            .any(|w| w[0].partial_cmp(&w[1]).is_none_or(|o| o.is_gt()))
        {
            return Err(Error::Config("boundaries must be non-decreasing".into()));
        }
        Ok(Self { bounds })
    }

    /// Evenly spaced boundaries for `n` classes.
    pub fn uniform(n: usize) -> Self {
        let mut bounds: Vec<T> = (0..=n).map(|i| T::of(i as f64 / n as f64)).collect();
        bounds[n] = T::one();
        Self { bounds }
    }

    pub fn n_classes(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn as_slice(&self) -> &[T] {
        &self.bounds
    }

    /// Class whose half-open interval `[b_i, b_{i+1})` contains `x`. Values at
    /// or above 1 belong to the last non-degenerate interval.
    pub fn interval_of(&self, x: T) -> usize {
        let n = self.n_classes();
        if x < T::zero() {
            return 0;
        }
        for i in 0..n {
            if self.bounds[i] <= x && x < self.bounds[i + 1] {
                return i;
            }
        }
        (0..n)
            .rev()
            .find(|&i| self.bounds[i] < self.bounds[i + 1])
            .unwrap_or(n - 1)
    }
}

/// Places boundaries so the batch's class counts are reproduced: after sorting
/// the normalized returns, the cut after the first `k_i` samples (cumulative
/// count up to class `i`) sits at the midpoint of the straddling pair.
pub fn compute_boundaries<T: Scalar>(
    normalized: &[T],
    labels: &[RatingLabel],
    n: usize,
) -> Result<RatingBoundaries<T>> {
    if normalized.len() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "returns vs labels",
            left: normalized.len(),
            right: labels.len(),
        });
    }
    if n == 0 {
        return Err(Error::Config("need at least one rating class".into()));
    }
    let mut counts = vec![0usize; n];
    for l in labels {
        if l.index() >= n {
            return Err(Error::LabelOutOfRange {
                label: l.index(),
                n,
            });
        }
        counts[l.index()] += 1;
    }
    let total = normalized.len();
    let mut sorted = normalized.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));

    let mut bounds = vec![T::zero(); n + 1];
    bounds[n] = T::one();
    let mut cumulative = 0;
    for i in 0..n - 1 {
        cumulative += counts[i];
        let cut = if cumulative == 0 {
            T::zero()
        } else if cumulative >= total {
            T::one()
        } else {
            (sorted[cumulative - 1] + sorted[cumulative]) * T::of(0.5)
        };
        bounds[i + 1] = if cut < bounds[i] { bounds[i] } else { cut };
    }
    Ok(RatingBoundaries { bounds })
}

fn exponents<T: Scalar>(x: T, bounds: &RatingBoundaries<T>) -> Vec<T> {
    bounds
        .as_slice()
        .windows(2)
        .map(|w| -(x - w[0]) * (x - w[1]))
        .collect()
}

fn softmax_in_place<T: Scalar>(z: &mut [T]) {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in z.iter_mut() {
        *v /= total;
    }
}

/// Class probabilities `P(i) ∝ exp(-(x - b_i)(x - b_{i+1}))`.
pub fn rating_probabilities<T: Scalar>(x: T, bounds: &RatingBoundaries<T>) -> Vec<T> {
    let mut p = exponents(x, bounds);
    softmax_in_place(&mut p);
    p
}

/// Probabilities together with `dP_i / dx`.
pub fn rating_probabilities_with_derivative<T: Scalar>(
    x: T,
    bounds: &RatingBoundaries<T>,
) -> (Vec<T>, Vec<T>) {
    let p = rating_probabilities(x, bounds);
    let two = T::of(2.0);
    let dz: Vec<T> = bounds
        .as_slice()
        .windows(2)
        .map(|w| w[0] + w[1] - two * x)
        .collect();
    let mean_dz: T = p.iter().zip(&dz).map(|(&pi, &d)| pi * d).sum();
    let dp = p
        .iter()
        .zip(&dz)
        .map(|(&pi, &d)| pi * (d - mean_dz))
        .collect();
    (p, dp)
}

/// `weight * -ln P[label]`, with the probability floored at [`PROB_FLOOR`].
pub fn ce_loss<T: Scalar>(probs: &[T], label: RatingLabel, weight: T) -> T {
    let p = probs[label.index()].max(T::of(PROB_FLOOR));
    weight * -p.ln()
}

/// `weight * sum_i |onehot_i - P_i|`, evaluated through the simplex identity
/// `2 * (1 - P[label])`.
pub fn mae_loss<T: Scalar>(probs: &[T], label: RatingLabel, weight: T) -> T {
    weight * T::of(2.0) * (T::one() - probs[label.index()])
}

fn smoothed_targets<T: Scalar>(n: usize, label: RatingLabel, rate: T) -> impl Iterator<Item = T> {
    let share = rate / T::of(n as f64);
    let keep = T::one() - rate;
    (0..n).map(move |i| {
        if i == label.index() {
            keep + share
        } else {
            share
        }
    })
}

/// Cross-entropy against the soft target `(1 - rate) * onehot + rate / n`.
pub fn smoothed_ce_loss<T: Scalar>(probs: &[T], label: RatingLabel, rate: T, weight: T) -> T {
    let floor = T::of(PROB_FLOOR);
    let mut acc = T::zero();
    for (t, &p) in smoothed_targets(probs.len(), label, rate).zip(probs) {
        acc += t * p.max(floor).ln();
    }
    weight * -acc
}

/// Inverse-frequency class weights `B / (n_nonempty * c_i)`; empty classes get 0.
/// Satisfies `sum_i w_i * c_i = B`.
pub fn class_weights<T: Scalar>(counts: &[usize]) -> Result<Vec<T>> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyDataset);
    }
    let nonempty = counts.iter().filter(|&&c| c > 0).count();
    Ok(counts
        .iter()
        .map(|&c| {
            if c == 0 {
                T::zero()
            } else {
                T::of(total as f64 / (nonempty * c) as f64)
            }
        })
        .collect())
}

/// Draws a batch that represents every nonempty class.
///
/// Each nonempty class gets `batch_size / n_nonempty` slots; the remainder goes
/// one slot at a time to the largest classes (lower class index on ties). A class
/// smaller than its quota is sampled with replacement, otherwise without.
pub fn stratified_indices<R: Rng + ?Sized>(
    class_index_lists: &[Vec<usize>],
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let mut nonempty: Vec<usize> = (0..class_index_lists.len())
        .filter(|&c| !class_index_lists[c].is_empty())
        .collect();
    if nonempty.is_empty() {
        return Err(Error::NoNonemptyClass);
    }
    let quota = batch_size / nonempty.len();
    let remainder = batch_size % nonempty.len();
    nonempty.sort_by(|&a, &b| {
        class_index_lists[b]
            .len()
            .cmp(&class_index_lists[a].len())
            .then(a.cmp(&b))
    });
    let mut quotas = vec![0usize; class_index_lists.len()];
    for (rank, &c) in nonempty.iter().enumerate() {
        quotas[c] = quota + usize::from(rank < remainder);
    }

    let mut out = Vec::with_capacity(batch_size);
    for (members, &k) in class_index_lists.iter().zip(&quotas) {
        if k == 0 {
            continue;
        }
        if members.len() < k {
            out.extend((0..k).map(|_| members[rng.gen_range(0..members.len())]));
        } else {
            out.extend(
                index::sample(rng, members.len(), k)
                    .into_iter()
                    .map(|i| members[i]),
            );
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn labels(v: &[usize]) -> Vec<RatingLabel> {
        v.iter().map(|&i| RatingLabel::new_unchecked(i)).collect()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize_returns(&[2.0, 4.0, 6.0]).unwrap(),
            vec![0.0, 0.5, 1.0]
        );
        assert_eq!(normalize_returns(&[3.0, 3.0, 3.0]).unwrap(), vec![0.5; 3]);
        assert_eq!(
            normalize_returns(&[-1.0, 0.0, 3.0]).unwrap(),
            vec![0.0, 0.25, 1.0]
        );
        assert!(matches!(
            normalize_returns::<f64>(&[]),
            Err(Error::EmptyBatch)
        ));
    }

    #[test]
    fn normalize_single_element_is_degenerate() {
        let n = Normalized::compute(&[7.0f32]).unwrap();
        assert!(n.is_degenerate());
        assert_eq!(n.values, vec![0.5]);
        assert_eq!(n.backward(&[3.0]), vec![0.0]);
    }

    #[test]
    fn boundary_examples() {
        let b = compute_boundaries(&[0.0, 0.2, 0.8, 1.0], &labels(&[0, 0, 1, 1]), 2).unwrap();
        assert_eq!(b.as_slice(), &[0.0, 0.5, 1.0]);

        let b = compute_boundaries(&[0.3, 0.9], &labels(&[0, 0]), 1).unwrap();
        assert_eq!(b.as_slice(), &[0.0, 1.0]);

        let b = compute_boundaries(&[0.1, 0.5, 0.9], &labels(&[0, 0, 0]), 3).unwrap();
        assert_eq!(b.as_slice(), &[0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn boundary_errors() {
        assert!(matches!(
            compute_boundaries(&[0.0, 1.0], &labels(&[0]), 2),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            compute_boundaries(&[0.0, 1.0], &labels(&[0, 2]), 2),
            Err(Error::LabelOutOfRange { label: 2, n: 2 })
        ));
    }

    #[test]
    fn empty_low_classes_collapse_to_zero() {
        let b = compute_boundaries(&[0.0, 0.4, 1.0], &labels(&[2, 2, 2]), 3).unwrap();
        assert_eq!(b.as_slice(), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(b.interval_of(0.0), 2);
        assert_eq!(b.interval_of(1.0), 2);
    }

    #[test]
    fn top_value_goes_to_last_nonempty_interval() {
        let b = RatingBoundaries::new(vec![0.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(b.interval_of(1.0), 0);
        let b = RatingBoundaries::new(vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(b.interval_of(0.5), 1);
        assert_eq!(b.interval_of(1.0), 1);
        assert_eq!(b.interval_of(0.49), 0);
    }

    #[test]
    fn boundaries_reject_bad_shapes() {
        assert!(RatingBoundaries::new(vec![0.1, 1.0]).is_err());
        assert!(RatingBoundaries::new(vec![0.0, 0.6, 0.4, 1.0]).is_err());
        assert!(RatingBoundaries::<f64>::new(vec![0.0]).is_err());
    }

    #[test]
    fn probability_examples() {
        let b = RatingBoundaries::new(vec![0.0, 0.5, 1.0]).unwrap();
        let p = rating_probabilities(0.5, &b);
        assert_eq!(p, vec![0.5, 0.5]);

        let p = rating_probabilities(0.0, &b);
        let e = (-0.5f64).exp();
        assert_relative_eq!(p[0], 1.0 / (1.0 + e), epsilon = 1e-15);
        assert_relative_eq!(p[1], e / (1.0 + e), epsilon = 1e-15);
        assert_relative_eq!(p[0], 0.6225, epsilon = 1e-4);

        let b3 = RatingBoundaries::new(vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]).unwrap();
        let p: Vec<f64> = rating_probabilities(0.9, &b3);
        let argmax = (0..3).max_by(|&i, &j| p[i].total_cmp(&p[j])).unwrap();
        assert_eq!(argmax, 2);
    }

    #[test]
    fn probability_derivative_matches_central_difference() {
        let b = RatingBoundaries::new(vec![0.0, 0.2, 0.7, 1.0]).unwrap();
        for &x in &[0.05, 0.3, 0.69, 0.95] {
            let (_, dp) = rating_probabilities_with_derivative(x, &b);
            let h = 1e-6;
            let up = rating_probabilities(x + h, &b);
            let down = rating_probabilities(x - h, &b);
            for i in 0..3 {
                assert_relative_eq!(dp[i], (up[i] - down[i]) / (2.0 * h), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn ce_examples() {
        let l0 = RatingLabel::new_unchecked(0);
        let l1 = RatingLabel::new_unchecked(1);
        assert_eq!(ce_loss(&[1.0, 0.0], l0, 1.0), 0.0);
        assert_relative_eq!(ce_loss(&[0.5, 0.5], l1, 1.0), 2f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(ce_loss(&[0.25, 0.75], l1, 2.0), 0.5754, epsilon = 1e-4);
        // Zero probability is floored, never infinite.
        let v: f64 = ce_loss(&[1.0, 0.0], l1, 1.0);
        assert!(v.is_finite());
        assert_relative_eq!(v, -(PROB_FLOOR.ln()), epsilon = 1e-9);
    }

    #[test]
    fn mae_examples() {
        let l0 = RatingLabel::new_unchecked(0);
        let l1 = RatingLabel::new_unchecked(1);
        assert_eq!(mae_loss(&[1.0, 0.0], l0, 1.0), 0.0);
        assert_relative_eq!(mae_loss(&[0.7, 0.3], l0, 1.0), 0.6, epsilon = 1e-15);
        assert_relative_eq!(mae_loss(&[0.2, 0.5, 0.3], l1, 1.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn smoothed_ce_examples() {
        let l0 = RatingLabel::new_unchecked(0);
        assert_relative_eq!(
            smoothed_ce_loss(&[0.5, 0.5], l0, 0.1, 1.0),
            2f64.ln(),
            epsilon = 1e-15
        );
        let expected = -((0.9 + 0.1 / 3.0) * 0.8f64.ln() + 2.0 * (0.1 / 3.0) * 0.1f64.ln());
        let got = smoothed_ce_loss(&[0.8, 0.1, 0.1], l0, 0.1, 1.0);
        assert_relative_eq!(got, expected, epsilon = 1e-15);
        assert_relative_eq!(got, 0.3617, epsilon = 1e-4);
    }

    #[test]
    fn class_weight_examples() {
        let w: Vec<f64> = class_weights(&[90, 10]).unwrap();
        assert_relative_eq!(w[0], 100.0 / 180.0, epsilon = 1e-15);
        assert_relative_eq!(w[1], 5.0, epsilon = 1e-15);
        assert_eq!(class_weights::<f64>(&[5, 5]).unwrap(), vec![1.0, 1.0]);
        assert_eq!(
            class_weights::<f64>(&[10, 0, 10]).unwrap(),
            vec![1.0, 0.0, 1.0]
        );
        assert!(matches!(
            class_weights::<f64>(&[0, 0]),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn disabled_weighting_is_all_ones() {
        let cfg = LossConfig {
            class_weighting: false,
            ..LossConfig::default()
        };
        assert_eq!(cfg.weights_for::<f64>(&[90, 10, 0]).unwrap(), vec![1.0; 3]);
        assert!(cfg.weights_for::<f64>(&[0, 0]).is_err());
    }

    #[test]
    fn smoothing_rate_validation() {
        let mut cfg = LossConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.smoothing_rate = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn stratified_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let classes = vec![(0..100).collect(), (100..105).collect(), vec![105]];
        let idx = stratified_indices(&classes, 32, &mut rng).unwrap();
        assert_eq!(idx.len(), 32);
        assert!(idx.iter().any(|&i| i < 100));
        assert!(idx.iter().any(|&i| (100..105).contains(&i)));
        assert!(idx.contains(&105));

        let idx = stratified_indices(&[vec![0, 1, 2, 3]], 8, &mut rng).unwrap();
        assert_eq!(idx.len(), 8);
        assert!(idx.iter().all(|&i| i < 4));

        let classes = vec![(0..10).collect(), (10..20).collect::<Vec<_>>()];
        let idx = stratified_indices(&classes, 10, &mut rng).unwrap();
        assert_eq!(idx.iter().filter(|&&i| i < 10).count(), 5);
        assert_eq!(idx.iter().filter(|&&i| i >= 10).count(), 5);
        // Quota equals class size: drawn without replacement, so all distinct.
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 10);
    }

    #[test]
    fn stratified_remainder_goes_to_largest() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let classes = vec![vec![0, 1], (2..12).collect(), vec![12, 13, 14]];
        let idx = stratified_indices(&classes, 5, &mut rng).unwrap();
        assert_eq!(idx.iter().filter(|&&i| (2..12).contains(&i)).count(), 2);
        assert_eq!(idx.iter().filter(|&&i| i >= 12).count(), 2);
        assert_eq!(idx.iter().filter(|&&i| i < 2).count(), 1);
    }

    #[test]
    fn stratified_requires_a_nonempty_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            stratified_indices(&[vec![], vec![]], 4, &mut rng),
            Err(Error::NoNonemptyClass)
        ));
    }

    #[test]
    fn loss_grad_matches_difference_quotients() {
        let probs = [0.2, 0.5, 0.3];
        let label = RatingLabel::new_unchecked(1);
        for kind in [LossKind::Ce, LossKind::CeLabelSmooth] {
            let cfg = LossConfig {
                kind,
                ..LossConfig::default()
            };
            let mut g = [0.0; 3];
            cfg.loss_grad(&probs, label, 1.5, &mut g);
            for i in 0..3 {
                let h = 1e-7;
                let mut up = probs;
                up[i] += h;
                let mut down = probs;
                down[i] -= h;
                let fd = (cfg.loss(&up, label, 1.5) - cfg.loss(&down, label, 1.5)) / (2.0 * h);
                assert_relative_eq!(g[i], fd, epsilon = 1e-6);
            }
        }
    }
}
