//! Reward learning from discrete ratings.
//!
//! A teacher sorts short trajectory segments into `n` ordered classes. A
//! reward ensemble is fit so that batch-normalized segment returns fall into
//! class intervals whose widths follow the label counts, using a
//! mean-absolute-error objective over class probabilities with stratified,
//! class-weighted batches. The learned reward then drives a policy inside a
//! query, train, relabel loop.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common choices.

pub mod agent;
pub mod env;
pub mod error;
pub mod metrics;
pub mod preset;
pub mod rating;
pub mod reward;
pub mod scalar;
pub mod seed;
pub mod teacher;

pub use error::{Error, Result};
pub use preset::Preset;
pub use scalar::Scalar;

pub type RewardNet64 = reward::RewardNet<f64>;
pub type RewardNet32 = reward::RewardNet<f32>;
pub type RewardEnsemble64 = reward::RewardEnsemble<f64>;
pub type RewardEnsemble32 = reward::RewardEnsemble<f32>;
pub type RatingBoundaries64 = rating::RatingBoundaries<f64>;
pub type RatingBoundaries32 = rating::RatingBoundaries<f32>;
