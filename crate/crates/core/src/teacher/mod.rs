//! Feedback sources: scripted rating and preference teachers, and a
//! vision-language-model teacher speaking a two-stage analyze-then-rate protocol.

mod cache;
pub mod mock;
mod parse;
mod prompt;
mod segment;
mod synthetic;
mod vlm;

pub use cache::{CacheRecord, ResponseCache};
pub use parse::parse_rating_response;
pub use prompt::{build_rating_prompt, RatingPrompt};
pub use segment::{Observation, Segment, SegmentStep};
pub use synthetic::{
    clean_rating, normalized_ground_truth, synthetic_prefer, synthetic_rate,
    SyntheticPreferenceTeacher, SyntheticRatingTeacher,
};
pub use vlm::{VlmConfig, VlmRating, VlmTeacher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rating::RatingLabel;
use crate::reward::Preference;

/// Settings shared by every rating teacher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherConfig {
    pub n_classes: usize,
    /// `n_classes - 1` strictly ascending cut points inside (0, 1) on the
    /// normalized ground-truth return.
    pub thresholds: Vec<f64>,
    /// Probability of replacing a label with a uniform draw over all classes.
    pub noise_rate: f64,
    pub seed: u64,
    pub class_names: Vec<String>,
}

impl TeacherConfig {
    /// Evenly spaced thresholds, default class names, 20% label noise.
    pub fn new(n_classes: usize) -> Self {
        Self {
            n_classes,
            thresholds: (1..n_classes)
                .map(|i| i as f64 / n_classes as f64)
                .collect(),
            noise_rate: 0.2,
            seed: 0,
            class_names: default_class_names(n_classes),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::Config(
                "a teacher needs at least two rating classes".into(),
            ));
        }
        if self.thresholds.len() != self.n_classes - 1 {
            return Err(Error::Config(format!(
                "{} classes need {} thresholds, got {}",
                self.n_classes,
                self.n_classes - 1,
                self.thresholds.len()
            )));
        }
        if self.thresholds.iter().any(|&t| !(t > 0.0 && t < 1.0))
            || self.thresholds.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Config(
                "thresholds must be strictly ascending inside (0, 1)".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return Err(Error::Config("noise rate must lie in [0, 1)".into()));
        }
        if self.class_names.len() != self.n_classes {
            return Err(Error::Config("one class name per rating class".into()));
        }
        Ok(())
    }
}

pub fn default_class_names(n: usize) -> Vec<String> {
    let names: &[&str] = match n {
        2 => &["Bad", "Good"],
        3 => &["Bad", "Average", "Good"],
        4 => &["Bad", "Poor", "Average", "Good"],
        _ => &[],
    };
    if names.is_empty() {
        (0..n).map(|i| format!("Level{i}")).collect()
    } else {
        names.iter().map(|s| s.to_string()).collect()
    }
}

/// Result of asking a teacher about one segment.
#[derive(Debug)]
pub struct RatingOutcome {
    /// One label per rated transition (a single label for scripted teachers).
    pub labels: Result<Vec<RatingLabel>>,
    /// Whether the query counted against the budget.
    pub charged: bool,
    pub cached: bool,
}

pub trait RatingTeacher {
    fn n_classes(&self) -> usize;

    /// Rates each segment. Multi-label outcomes refer to the segment's transitions.
    fn rate(&mut self, segments: &[Segment]) -> Vec<RatingOutcome>;
}

pub trait PreferenceTeacher {
    fn prefer(&mut self, first: &Segment, second: &Segment) -> Result<Preference>;
}
