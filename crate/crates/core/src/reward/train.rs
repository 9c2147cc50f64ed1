use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::dataset::RatingDataset;
use super::ensemble::RewardEnsemble;
use super::net::{RewardNet, StepCache};
use super::{encode_segment, Featurizer};
use crate::error::{Error, Result};
use crate::rating::{
    compute_boundaries, rating_probabilities_with_derivative, stratified_indices, LossConfig,
    Normalized, RatingBoundaries, RatingLabel, Sampling,
};
use crate::scalar::Scalar;
use crate::seed::mix_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs_per_session: usize,
    /// Adam decay coefficients.
    pub betas: (f64, f64),
    pub loss: LossConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            learning_rate: 3e-4,
            epochs_per_session: 50,
            betas: (0.9, 0.999),
            loss: LossConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n_classes: usize) -> Result<()> {
        self.loss.validate()?;
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.loss.sampling == Sampling::Stratified && self.batch_size < n_classes {
            return Err(Error::Config(format!(
                "stratified batches of {} cannot cover {} classes",
                self.batch_size, n_classes
            )));
        }
        Ok(())
    }
}

/// Loss of one batch and the boundaries it was evaluated under.
#[derive(Debug, Clone)]
pub struct BatchEval<T> {
    pub loss: T,
    pub boundaries: RatingBoundaries<T>,
}

/// Rating loss of a batch of segments for one network, optionally accumulating
/// `d loss / d params` into `grads`.
///
/// The pipeline is: segment returns, min-max normalization within the batch,
/// boundaries fitted to the batch labels, class probabilities, then the
/// class-weighted loss averaged over the batch. Gradients flow through the
/// normalization but treat the boundaries as constants. `frozen` replaces the
/// fitted boundaries, which is what a finite-difference check must hold fixed.
#[allow(clippy::too_many_arguments)]
pub fn rating_batch_loss<T: Scalar>(
    net: &RewardNet<T>,
    segments: &[&[Vec<T>]],
    labels: &[RatingLabel],
    n_classes: usize,
    loss: &LossConfig,
    class_weights: &[T],
    frozen: Option<&RatingBoundaries<T>>,
    grads: Option<&mut [T]>,
) -> Result<BatchEval<T>> {
    if segments.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if segments.len() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "segments vs labels",
            left: segments.len(),
            right: labels.len(),
        });
    }
    let want_grad = grads.is_some();
    let mut caches: Vec<Vec<StepCache<T>>> = Vec::with_capacity(segments.len());
    let mut returns = Vec::with_capacity(segments.len());
    for seg in segments {
        if seg.is_empty() {
            return Err(Error::Config(
                "segment must contain at least one step".into(),
            ));
        }
        let mut total = T::zero();
        let mut seg_caches = Vec::with_capacity(if want_grad { seg.len() } else { 0 });
        let mut scratch = StepCache::default();
        for x in seg.iter() {
            if x.len() != net.input_dim() {
                return Err(Error::DimensionMismatch {
                    expected: net.input_dim(),
                    got: x.len(),
                });
            }
            if want_grad {
                let mut c = StepCache::default();
                total += net.forward(x, &mut c);
                seg_caches.push(c);
            } else {
                total += net.forward(x, &mut scratch);
            }
        }
        returns.push(total);
        caches.push(seg_caches);
    }

    let norm = Normalized::compute(&returns)?;
    let boundaries = match frozen {
        Some(b) => b.clone(),
        None => compute_boundaries(&norm.values, labels, n_classes)?,
    };
    let b = T::of(segments.len() as f64);
    let mut total_loss = T::zero();
    let mut grad_x = vec![T::zero(); segments.len()];
    let mut grad_p = vec![T::zero(); n_classes];
    for (j, (&x, &label)) in norm.values.iter().zip(labels).enumerate() {
        let weight = class_weights[label.index()];
        let (p, dp) = rating_probabilities_with_derivative(x, &boundaries);
        total_loss += loss.loss(&p, label, weight);
        if want_grad {
            loss.loss_grad(&p, label, weight, &mut grad_p);
            let g: T = grad_p.iter().zip(&dp).map(|(&a, &b)| a * b).sum();
            grad_x[j] = g / b;
        }
    }

    if let Some(grads) = grads {
        let grad_returns = norm.backward(&grad_x);
        for ((seg, seg_caches), &g) in segments.iter().zip(&caches).zip(&grad_returns) {
            if g == T::zero() {
                continue;
            }
            for (x, c) in seg.iter().zip(seg_caches) {
                net.backward(x, c, g, grads);
            }
        }
    }
    Ok(BatchEval {
        loss: total_loss / b,
        boundaries,
    })
}

/// One optimizer update on a batch; returns the loss before the update.
pub fn train_step<T: Scalar>(
    net: &mut RewardNet<T>,
    optimizer: &mut Adam<T>,
    segments: &[&[Vec<T>]],
    labels: &[RatingLabel],
    n_classes: usize,
    loss: &LossConfig,
    class_weights: &[T],
) -> Result<T> {
    train_step_eval(
        net,
        optimizer,
        segments,
        labels,
        n_classes,
        loss,
        class_weights,
    )
    .map(|e| e.loss)
}

fn train_step_eval<T: Scalar>(
    net: &mut RewardNet<T>,
    optimizer: &mut Adam<T>,
    segments: &[&[Vec<T>]],
    labels: &[RatingLabel],
    n_classes: usize,
    loss: &LossConfig,
    class_weights: &[T],
) -> Result<BatchEval<T>> {
    let mut grads = vec![T::zero(); net.params().len()];
    let eval = rating_batch_loss(
        net,
        segments,
        labels,
        n_classes,
        loss,
        class_weights,
        None,
        Some(&mut grads),
    )?;
    optimizer.step(net.params_mut(), &grads);
    Ok(eval)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean batch loss per epoch, averaged over members.
    pub loss_curve: Vec<f64>,
    /// Recall per class (None for classes absent from the dataset). The
    /// predicted class is the interval of the member-mean normalized return
    /// under the boundaries of each member's last training batch, averaged
    /// across members.
    pub per_class_recall: Vec<Option<f64>>,
    pub final_boundaries: Vec<f64>,
    /// Recall with boundaries refit to the whole dataset's class counts, which
    /// depends only on how the learned returns rank the samples.
    pub refit_recall: Vec<Option<f64>>,
    pub stratified_batches: usize,
    /// Stratified batches that missed a nonempty class; always 0 when
    /// `batch_size >= n_classes`.
    pub stratified_batches_missing_class: usize,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.loss_curve.last().copied()
    }
}

struct MemberOutcome {
    epoch_losses: Vec<f64>,
    last_boundaries: Option<Vec<f64>>,
    stratified: usize,
    missing: usize,
}

/// Indices of each training batch for one epoch.
pub(crate) fn epoch_batches(
    len: usize,
    batch_size: usize,
    sampling: Sampling,
    class_index: &[Vec<usize>],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<usize>>> {
    match sampling {
        Sampling::Uniform => {
            let mut order: Vec<usize> = (0..len).collect();
            order.shuffle(rng);
            Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
        }
        Sampling::Stratified => {
            let steps = len.div_ceil(batch_size);
            (0..steps)
                .map(|_| stratified_indices(class_index, batch_size, rng))
                .collect()
        }
    }
}

/// Fits every ensemble member to the rating dataset for
/// `epochs_per_session` epochs. Members train in parallel on independent
/// batch streams.
pub fn train_session<T: Scalar>(
    ensemble: &mut RewardEnsemble<T>,
    dataset: &RatingDataset,
    featurizer: &dyn Featurizer,
    config: &TrainConfig,
) -> Result<TrainReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = dataset.n_classes();
    config.validate(n)?;
    let features: Vec<Vec<Vec<T>>> = dataset
        .samples()
        .iter()
        .map(|s| encode_segment(featurizer, &s.segment))
        .collect::<Result<_>>()?;
    let labels = dataset.labels();
    let weights: Vec<T> = config.loss.weights_for(&dataset.class_counts())?;
    let class_index = dataset.class_index();
    let nonempty = class_index.iter().filter(|c| !c.is_empty()).count();
    let session = ensemble.sessions();

    let outcomes: Vec<Result<MemberOutcome>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ensemble
            .training_parts(config.learning_rate, config.betas)
            .enumerate()
            .map(|(m, (net, opt))| {
                let (features, labels, weights) = (&features, &labels, &weights);
                scope.spawn(move || -> Result<MemberOutcome> {
                    let mut rng =
                        ChaCha8Rng::seed_from_u64(mix_seed(config.seed, &[session, m as u64]));
                    let mut out = MemberOutcome {
                        epoch_losses: Vec::with_capacity(config.epochs_per_session),
                        stratified: 0,
                        missing: 0,
                        last_boundaries: None,
                    };
                    for _ in 0..config.epochs_per_session {
                        let batches = epoch_batches(
                            features.len(),
                            config.batch_size,
                            config.loss.sampling,
                            class_index,
                            &mut rng,
                        )?;
                        let mut epoch_loss = 0.0;
                        for idx in &batches {
                            if config.loss.sampling == Sampling::Stratified {
                                out.stratified += 1;
                                let present = (0..n)
                                    .filter(|&c| idx.iter().any(|&i| labels[i].index() == c))
                                    .count();
                                if present < nonempty {
                                    out.missing += 1;
                                }
                            }
                            let segs: Vec<&[Vec<T>]> =
                                idx.iter().map(|&i| features[i].as_slice()).collect();
                            let labs: Vec<RatingLabel> = idx.iter().map(|&i| labels[i]).collect();
                            let e =
                                train_step_eval(net, opt, &segs, &labs, n, &config.loss, weights)?;
                            epoch_loss += e.loss.to_f64_lossy();
                            out.last_boundaries = Some(
                                e.boundaries
                                    .as_slice()
                                    .iter()
                                    .map(|v| v.to_f64_lossy())
                                    .collect(),
                            );
                        }
                        out.epoch_losses
                            .push(epoch_loss / batches.len().max(1) as f64);
                    }
                    Ok(out)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("member training thread panicked"))
            .collect()
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    ensemble.finish_session();

    let members = outcomes.len() as f64;
    let loss_curve = (0..config.epochs_per_session)
        .map(|e| outcomes.iter().map(|o| o.epoch_losses[e]).sum::<f64>() / members)
        .collect();
    let x = mean_normalized_returns(ensemble, &features)?;
    let refit = compute_boundaries(&x, &labels, n)?;
    let last: Vec<&Vec<f64>> = outcomes
        .iter()
        .filter_map(|o| o.last_boundaries.as_ref())
        .collect();
    let bounds = if last.is_empty() {
        refit.clone()
    } else {
        let mean = (0..=n)
            .map(|k| T::of(last.iter().map(|b| b[k]).sum::<f64>() / last.len() as f64))
            .collect();
        RatingBoundaries::new(mean)?
    };
    Ok(TrainReport {
        loss_curve,
        per_class_recall: recall_under(&x, &labels, &bounds, n),
        refit_recall: recall_under(&x, &labels, &refit, n),
        final_boundaries: bounds.as_slice().iter().map(|v| v.to_f64_lossy()).collect(),
        stratified_batches: outcomes.iter().map(|o| o.stratified).sum(),
        stratified_batches_missing_class: outcomes.iter().map(|o| o.missing).sum(),
    })
}

/// Member-mean normalized return of every sample: each member's returns are
/// min-max normalized over the whole set, then averaged across members.
pub fn mean_normalized_returns<T: Scalar>(
    ensemble: &RewardEnsemble<T>,
    features: &[Vec<Vec<T>>],
) -> Result<Vec<T>> {
    let mut acc = vec![T::zero(); features.len()];
    for net in ensemble.members() {
        let returns = features
            .iter()
            .map(|f| net.segment_return(f))
            .collect::<Result<Vec<T>>>()?;
        let norm = Normalized::compute(&returns)?;
        for (a, v) in acc.iter_mut().zip(norm.values) {
            *a += v;
        }
    }
    let m = T::of(ensemble.len() as f64);
    Ok(acc.into_iter().map(|v| v / m).collect())
}

/// Per-class recall where the predicted class is the boundary interval of the
/// member-mean normalized return, with boundaries refit on the whole set.
pub fn class_recall<T: Scalar>(
    ensemble: &RewardEnsemble<T>,
    features: &[Vec<Vec<T>>],
    labels: &[RatingLabel],
    n_classes: usize,
) -> Result<(Vec<Option<f64>>, RatingBoundaries<T>)> {
    let x = mean_normalized_returns(ensemble, features)?;
    let bounds = compute_boundaries(&x, labels, n_classes)?;
    Ok((recall_under(&x, labels, &bounds, n_classes), bounds))
}

/// Per-class fraction of samples whose value falls in their label's interval.
pub fn recall_under<T: Scalar>(
    x: &[T],
    labels: &[RatingLabel],
    bounds: &RatingBoundaries<T>,
    n_classes: usize,
) -> Vec<Option<f64>> {
    let mut hits = vec![0usize; n_classes];
    let mut totals = vec![0usize; n_classes];
    for (&xi, &l) in x.iter().zip(labels) {
        totals[l.index()] += 1;
        if bounds.interval_of(xi) == l.index() {
            hits[l.index()] += 1;
        }
    }
    hits.iter()
        .zip(&totals)
        .map(|(&h, &t)| (t > 0).then(|| h as f64 / t as f64))
        .collect()
}

/// Recall of the current ensemble on a dataset, without training.
pub fn evaluate_recall<T: Scalar>(
    ensemble: &RewardEnsemble<T>,
    dataset: &RatingDataset,
    featurizer: &dyn Featurizer,
) -> Result<Vec<Option<f64>>> {
    let features: Vec<Vec<Vec<T>>> = dataset
        .samples()
        .iter()
        .map(|s| encode_segment(featurizer, &s.segment))
        .collect::<Result<_>>()?;
    Ok(class_recall(ensemble, &features, &dataset.labels(), dataset.n_classes())?.0)
}
