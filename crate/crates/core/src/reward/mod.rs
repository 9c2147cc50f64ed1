//! Learned reward functions: the network, ensembles, rating and preference
//! training, and checkpoints.

mod adam;
pub mod checkpoint;
mod dataset;
mod ensemble;
mod net;
pub mod preference;
mod train;

pub use adam::Adam;
pub use dataset::{RatingDataset, RatingSample, TeacherMeta};
pub use ensemble::RewardEnsemble;
pub use net::RewardNet;
pub use preference::{bt_train_session, BtReport, Preference, PreferenceDataset, PreferencePair};
pub use train::{
    class_recall, evaluate_recall, mean_normalized_returns, rating_batch_loss, train_session,
    train_step, BatchEval, TrainConfig, TrainReport,
};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::teacher::Segment;

/// Maps a (state, action) pair to the reward network's input vector.
pub trait Featurizer: Sync {
    fn feature_dim(&self) -> usize;
    fn features(&self, state: usize, action: usize) -> Vec<f64>;
}

/// Per-step feature vectors of a segment.
pub fn encode_segment<T: Scalar>(f: &dyn Featurizer, segment: &Segment) -> Result<Vec<Vec<T>>> {
    segment
        .steps
        .iter()
        .map(|s| {
            let v = f.features(s.state, s.action);
            if v.len() != f.feature_dim() {
                return Err(Error::DimensionMismatch {
                    expected: f.feature_dim(),
                    got: v.len(),
                });
            }
            Ok(v.into_iter().map(T::of).collect())
        })
        .collect()
}
