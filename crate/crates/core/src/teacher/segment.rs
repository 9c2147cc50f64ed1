use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SegmentStep {
    pub state: usize,
    pub action: usize,
}

/// What the teacher gets to look at for one time step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observation {
    Text(String),
    Image(Vec<u8>),
}

/// A window of consecutive state-action steps taken from one episode: the unit
/// a teacher rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub steps: Vec<SegmentStep>,
    /// Human-readable name of each step's action, for prompts.
    pub action_names: Vec<String>,
    /// One per step, plus an optional trailing observation of the final state.
    pub observations: Vec<Observation>,
    pub trailing_observation: bool,
    /// Per-step environment rewards when known (synthetic teachers, evaluation).
    pub step_rewards: Vec<f64>,
    pub ground_truth_return: Option<f64>,
    pub task_description: String,
    pub episode_id: Option<u64>,
    pub start_step: usize,
}

impl Segment {
    /// A bare segment with only steps and a ground-truth return.
    pub fn from_steps(steps: Vec<SegmentStep>, ground_truth_return: Option<f64>) -> Self {
        let h = steps.len();
        Self {
            steps,
            action_names: vec![String::new(); h],
            observations: Vec::new(),
            trailing_observation: false,
            step_rewards: Vec::new(),
            ground_truth_return,
            task_description: String::new(),
            episode_id: None,
            start_step: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.steps.len();
        if h == 0 {
            return Err(Error::Config("segment has no steps".into()));
        }
        let expected_obs = h + usize::from(self.trailing_observation);
        if !self.observations.is_empty() && self.observations.len() != expected_obs {
            return Err(Error::LengthMismatch {
                what: "segment observations",
                left: self.observations.len(),
                right: expected_obs,
            });
        }
        if !self.step_rewards.is_empty() && self.step_rewards.len() != h {
            return Err(Error::LengthMismatch {
                what: "segment step rewards",
                left: self.step_rewards.len(),
                right: h,
            });
        }
        Ok(())
    }

    /// Number of ratings a per-transition teacher returns for this segment:
    /// one for single-step segments, otherwise one per consecutive observation pair.
    pub fn rated_transitions(&self) -> usize {
        if self.steps.len() <= 1 {
            1
        } else {
            self.observations
                .len()
                .max(self.steps.len())
                .saturating_sub(1)
                .max(1)
        }
    }

    /// Length-1 segment for step `k`, carrying that step's reward as its return.
    pub fn sub_segment(&self, k: usize) -> Segment {
        let observations = if self.observations.is_empty() {
            Vec::new()
        } else {
            let mut obs = vec![self.observations[k].clone()];
            if let Some(next) = self.observations.get(k + 1) {
                obs.push(next.clone());
            }
            obs
        };
        let trailing = observations.len() == 2;
        let reward = self.step_rewards.get(k).copied();
        Segment {
            steps: vec![self.steps[k]],
            action_names: vec![self.action_names.get(k).cloned().unwrap_or_default()],
            observations,
            trailing_observation: trailing,
            step_rewards: reward.into_iter().collect(),
            ground_truth_return: reward,
            task_description: self.task_description.clone(),
            episode_id: self.episode_id,
            start_step: self.start_step + k,
        }
    }

    /// Stable digest of everything a teacher sees.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.task_description.as_bytes());
        hasher.update([0u8]);
        for (step, name) in self.steps.iter().zip(&self.action_names) {
            hasher.update((step.state as u64).to_le_bytes());
            hasher.update((step.action as u64).to_le_bytes());
            hasher.update(name.as_bytes());
            hasher.update([0u8]);
        }
        for obs in &self.observations {
            match obs {
                Observation::Text(t) => {
                    hasher.update([1u8]);
                    hasher.update(t.as_bytes());
                }
                Observation::Image(bytes) => {
                    hasher.update([2u8]);
                    hasher.update(bytes);
                }
            }
            hasher.update([0u8]);
        }
        hex(&hasher.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
