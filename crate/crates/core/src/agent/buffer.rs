use std::collections::{HashMap, VecDeque};

use rand::Rng;

use crate::env::{GridNavTask, Transition, ACTION_NAMES};
use crate::error::{Error, Result};
use crate::reward::{Featurizer, RewardEnsemble};
use crate::scalar::Scalar;
use crate::teacher::{Segment, SegmentStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct EpisodeSpan {
    id: u64,
    /// Absolute position of the first step since the buffer was created.
    start: u64,
    len: usize,
}

/// FIFO store of transitions that evicts whole episodes once over capacity.
/// Transitions of one episode must be pushed contiguously.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    transitions: VecDeque<Transition>,
    episodes: VecDeque<EpisodeSpan>,
    capacity: usize,
    /// Absolute position of `transitions[0]`.
    base: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            transitions: VecDeque::new(),
            episodes: VecDeque::new(),
            capacity: capacity.max(1),
            base: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn n_episodes(&self) -> usize {
        self.episodes.len()
    }

    pub fn push(&mut self, t: Transition) {
        let abs = self.base + self.transitions.len() as u64;
        match self.episodes.back_mut() {
            Some(ep) if ep.id == t.episode_id => ep.len += 1,
            _ => self.episodes.push_back(EpisodeSpan {
                id: t.episode_id,
                start: abs,
                len: 1,
            }),
        }
        self.transitions.push_back(t);
        // The episode being written is never evicted.
        while self.transitions.len() > self.capacity && self.episodes.len() > 1 {
            let old = self.episodes.pop_front().expect("nonempty");
            self.transitions.drain(..old.len);
            self.base += old.len as u64;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.transitions.iter()
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.transitions.get(i)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<&Transition> {
        if self.transitions.is_empty() {
            return None;
        }
        self.transitions
            .get(rng.gen_range(0..self.transitions.len()))
    }

    /// Transitions of each stored episode, oldest first.
    pub fn episodes(&self) -> impl Iterator<Item = Vec<&Transition>> + '_ {
        self.episodes.iter().map(move |ep| {
            let from = (ep.start - self.base) as usize;
            self.transitions.range(from..from + ep.len).collect()
        })
    }

    fn episode_window(&self, ep: &EpisodeSpan, offset: usize, h: usize) -> Vec<Transition> {
        let from = (ep.start - self.base) as usize + offset;
        self.transitions.range(from..from + h).copied().collect()
    }

    /// Sets every `learned_reward` from `reward(state, action)`.
    pub fn relabel_with<F: FnMut(usize, usize) -> f64>(&mut self, mut reward: F) -> usize {
        for t in self.transitions.iter_mut() {
            t.learned_reward = reward(t.state, t.action);
        }
        self.transitions.len()
    }
}

/// Overwrites every stored `learned_reward` with the ensemble-mean reward of
/// its state-action pair; returns the number of transitions relabeled.
pub fn relabel_buffer<T: Scalar>(
    buffer: &mut ReplayBuffer,
    ensemble: &RewardEnsemble<T>,
    featurizer: &dyn Featurizer,
) -> Result<usize> {
    let mut memo: HashMap<(usize, usize), f64> = HashMap::new();
    for t in buffer.iter() {
        if let std::collections::hash_map::Entry::Vacant(e) = memo.entry((t.state, t.action)) {
            let x: Vec<T> = featurizer
                .features(t.state, t.action)
                .into_iter()
                .map(T::of)
                .collect();
            e.insert(ensemble.predict_reward(&x)?.to_f64_lossy());
        }
    }
    Ok(buffer.relabel_with(|s, a| memo[&(s, a)]))
}

/// Draws a window of `h` consecutive steps: an episode uniformly among those
/// with at least `h` steps, then a start offset uniformly inside it.
///
/// The segment carries one rendered observation per step plus the state
/// reached after the last step, and the summed environment reward as its
/// ground-truth return.
pub fn extract_segment<R: Rng + ?Sized>(
    buffer: &ReplayBuffer,
    task: &GridNavTask,
    rng: &mut R,
    h: usize,
) -> Result<Segment> {
    if h == 0 {
        return Err(Error::Config("segment length must be at least 1".into()));
    }
    let eligible: Vec<&EpisodeSpan> = buffer.episodes.iter().filter(|e| e.len >= h).collect();
    if eligible.is_empty() {
        return Err(Error::BufferTooSmall(format!(
            "no stored episode has {h} steps"
        )));
    }
    let ep = eligible[rng.gen_range(0..eligible.len())];
    let offset = rng.gen_range(0..=ep.len - h);
    Ok(segment_from_window(
        &buffer.episode_window(ep, offset, h),
        task,
    ))
}

/// Builds a teacher-facing segment from consecutive transitions of one episode.
pub fn segment_from_window(window: &[Transition], task: &GridNavTask) -> Segment {
    let steps = window
        .iter()
        .map(|t| SegmentStep {
            state: t.state,
            action: t.action,
        })
        .collect();
    let step_rewards: Vec<f64> = window.iter().map(|t| t.env_reward).collect();
    let mut observations: Vec<_> = window.iter().map(|t| task.observation(t.state)).collect();
    if let Some(last) = window.last() {
        observations.push(task.observation(last.next_state));
    }
    let mut seg = Segment::from_steps(steps, Some(step_rewards.iter().sum()));
    seg.action_names = window
        .iter()
        .map(|t| ACTION_NAMES[t.action % ACTION_NAMES.len()].to_string())
        .collect();
    seg.observations = observations;
    seg.trailing_observation = true;
    seg.step_rewards = step_rewards;
    seg.task_description = task.description().to_string();
    seg.episode_id = window.first().map(|t| t.episode_id);
    seg.start_step = window.first().map_or(0, |t| t.step_index);
    seg
}
