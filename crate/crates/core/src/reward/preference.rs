//! Bradley-Terry baseline: reward learning from pairwise preferences, with
//! "unsure" answers kept in the dataset but excluded from the loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ensemble::RewardEnsemble;
use super::net::{RewardNet, StepCache};
use super::train::TrainConfig;
use super::{encode_segment, Featurizer};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::mix_seed;
use crate::teacher::Segment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preference {
    First,
    Second,
    Unsure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub first: Segment,
    pub second: Segment,
    pub label: Preference,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PreferenceDataset {
    pairs: Vec<PreferencePair>,
}

impl PreferenceDataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, pair: PreferencePair) {
        self.pairs.push(pair);
    }

    pub fn pairs(&self) -> &[PreferencePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn trainable(&self) -> impl Iterator<Item = &PreferencePair> {
        self.pairs.iter().filter(|p| p.label != Preference::Unsure)
    }

    pub fn unsure_count(&self) -> usize {
        self.pairs
            .iter()
            .filter(|p| p.label == Preference::Unsure)
            .count()
    }
}

/// One encoded pair, ordered as (preferred, other).
pub struct EncodedPair<'a, T> {
    pub preferred: &'a [Vec<T>],
    pub other: &'a [Vec<T>],
}

fn forward_return<T: Scalar>(
    net: &RewardNet<T>,
    seg: &[Vec<T>],
    caches: Option<&mut Vec<StepCache<T>>>,
) -> Result<T> {
    if seg.is_empty() {
        return Err(Error::Config(
            "segment must contain at least one step".into(),
        ));
    }
    let mut total = T::zero();
    match caches {
        Some(caches) => {
            caches.clear();
            for x in seg {
                if x.len() != net.input_dim() {
                    return Err(Error::DimensionMismatch {
                        expected: net.input_dim(),
                        got: x.len(),
                    });
                }
                let mut c = StepCache::default();
                total += net.forward(x, &mut c);
                caches.push(c);
            }
        }
        None => total = net.segment_return(seg)?,
    }
    Ok(total)
}

/// Mean of `-ln softmax(R_preferred, R_other)[preferred]` over the pairs,
/// accumulating the gradient into `grads` when given.
pub fn bt_batch_loss<T: Scalar>(
    net: &RewardNet<T>,
    pairs: &[EncodedPair<'_, T>],
    mut grads: Option<&mut [T]>,
) -> Result<T> {
    if pairs.is_empty() {
        return Err(Error::NoTrainablePairs);
    }
    let b = T::of(pairs.len() as f64);
    let mut total = T::zero();
    let mut ca = Vec::new();
    let mut cb = Vec::new();
    for pair in pairs {
        let want = grads.is_some();
        let r_pref = forward_return(net, pair.preferred, want.then_some(&mut ca))?;
        let r_other = forward_return(net, pair.other, want.then_some(&mut cb))?;
        let d = r_other - r_pref;
        // softplus(d), stable for either sign
        let loss = if d > T::zero() {
            d + (-d).exp().ln_1p()
        } else {
            d.exp().ln_1p()
        };
        total += loss;
        if let Some(g) = grads.as_deref_mut() {
            let sig = T::one() / (T::one() + (-d).exp());
            let scale = sig / b;
            for (x, c) in pair.other.iter().zip(&cb) {
                net.backward(x, c, scale, g);
            }
            for (x, c) in pair.preferred.iter().zip(&ca) {
                net.backward(x, c, -scale, g);
            }
        }
    }
    Ok(total / b)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BtReport {
    pub loss_curve: Vec<f64>,
    pub trainable_pairs: usize,
    pub unsure_pairs: usize,
    /// Fraction of trainable pairs the ensemble mean orders correctly.
    pub pair_accuracy: f64,
}

/// Fits each member to the non-unsure preference pairs with the same optimizer
/// settings as rating training (uniform batches, `epochs_per_session` epochs).
pub fn bt_train_session<T: Scalar>(
    ensemble: &mut RewardEnsemble<T>,
    dataset: &PreferenceDataset,
    featurizer: &dyn Featurizer,
    config: &TrainConfig,
) -> Result<BtReport> {
    // Each entry is (preferred, other), one feature row per step.
    type Encoded<T> = (Vec<Vec<T>>, Vec<Vec<T>>);
    let encoded: Vec<Encoded<T>> = dataset
        .trainable()
        .map(|p| {
            let a = encode_segment(featurizer, &p.first)?;
            let b = encode_segment(featurizer, &p.second)?;
            Ok(match p.label {
                Preference::First => (a, b),
                _ => (b, a),
            })
        })
        .collect::<Result<_>>()?;
    if encoded.is_empty() {
        return Err(Error::NoTrainablePairs);
    }
    if config.batch_size == 0 || config.learning_rate <= 0.0 {
        return Err(Error::Config("invalid batch size or learning rate".into()));
    }
    let session = ensemble.sessions();
    let losses: Vec<Result<Vec<f64>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ensemble
            .training_parts(config.learning_rate, config.betas)
            .enumerate()
            .map(|(m, (net, opt))| {
                let encoded = &encoded;
                scope.spawn(move || -> Result<Vec<f64>> {
                    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(
                        config.seed,
                        &[0xb7, session, m as u64],
                    ));
                    let mut curve = Vec::with_capacity(config.epochs_per_session);
                    let mut order: Vec<usize> = (0..encoded.len()).collect();
                    for _ in 0..config.epochs_per_session {
                        order.shuffle(&mut rng);
                        let mut acc = 0.0;
                        let mut steps = 0;
                        for chunk in order.chunks(config.batch_size) {
                            let pairs: Vec<EncodedPair<'_, T>> = chunk
                                .iter()
                                .map(|&i| EncodedPair {
                                    preferred: &encoded[i].0,
                                    other: &encoded[i].1,
                                })
                                .collect();
                            let mut grads = vec![T::zero(); net.params().len()];
                            let l = bt_batch_loss(net, &pairs, Some(&mut grads))?;
                            opt.step(net.params_mut(), &grads);
                            acc += l.to_f64_lossy();
                            steps += 1;
                        }
                        curve.push(acc / steps as f64);
                    }
                    Ok(curve)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("member training thread panicked"))
            .collect()
    });
    let losses = losses.into_iter().collect::<Result<Vec<_>>>()?;
    ensemble.finish_session();

    let members = losses.len() as f64;
    let loss_curve = (0..config.epochs_per_session)
        .map(|e| losses.iter().map(|c| c[e]).sum::<f64>() / members)
        .collect();
    let mut correct = 0usize;
    for (pref, other) in &encoded {
        if ensemble.predict_return(pref)? > ensemble.predict_return(other)? {
            correct += 1;
        }
    }
    Ok(BtReport {
        loss_curve,
        trainable_pairs: encoded.len(),
        unsure_pairs: dataset.unsure_count(),
        pair_accuracy: correct as f64 / encoded.len() as f64,
    })
}
