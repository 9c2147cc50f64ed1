use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{GridNavTask, Transition};

/// Tabular action values with a one-step temporal-difference update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QPolicy {
    n_states: usize,
    n_actions: usize,
    q: Vec<f64>,
    pub alpha: f64,
    pub gamma: f64,
}

impl QPolicy {
    pub fn new(n_states: usize, n_actions: usize, alpha: f64, gamma: f64) -> Self {
        Self {
            n_states,
            n_actions,
            q: vec![0.0; n_states * n_actions],
            alpha,
            gamma,
        }
    }

    pub fn for_task(task: &GridNavTask, alpha: f64, gamma: f64) -> Self {
        Self::new(task.n_states(), task.n_actions(), alpha, gamma)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn q(&self, state: usize, action: usize) -> f64 {
        self.q[state * self.n_actions + action]
    }

    pub fn set_q(&mut self, state: usize, action: usize, value: f64) {
        self.q[state * self.n_actions + action] = value;
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.q[state * self.n_actions..(state + 1) * self.n_actions]
    }

    /// Highest-valued action; the lowest index wins ties.
    pub fn greedy(&self, state: usize) -> usize {
        let row = self.row(state);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn max_q(&self, state: usize) -> f64 {
        self.row(state)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn epsilon_greedy<R: Rng + ?Sized>(
        &self,
        state: usize,
        epsilon: f64,
        rng: &mut R,
    ) -> usize {
        if rng.gen::<f64>() < epsilon {
            rng.gen_range(0..self.n_actions)
        } else {
            self.greedy(state)
        }
    }

    /// `q(s,a) += alpha * (r + gamma * max q(s',.) * (1 - terminal) - q(s,a))` on
    /// the learned reward. Episodes cut by the step limit still bootstrap.
    pub fn update(&mut self, t: &Transition) {
        let bootstrap = if t.terminal {
            0.0
        } else {
            self.gamma * self.max_q(t.next_state)
        };
        let i = t.state * self.n_actions + t.action;
        self.q[i] += self.alpha * (t.learned_reward + bootstrap - self.q[i]);
    }
}

pub fn q_update(policy: &mut QPolicy, transition: &Transition) {
    policy.update(transition);
}

/// Exploration rate decaying linearly from `start` to `end` over the first
/// `decay_steps` steps.
pub fn linear_epsilon(step: usize, decay_steps: usize, start: f64, end: f64) -> f64 {
    if decay_steps == 0 || step >= decay_steps {
        return end;
    }
    start + (end - start) * step as f64 / decay_steps as f64
}

/// Fraction of greedy episodes from the start cell that reach the goal
/// within the step limit.
pub fn evaluate(policy: &QPolicy, task: &GridNavTask, episodes: usize) -> f64 {
    if episodes == 0 {
        return 0.0;
    }
    let successes = (0..episodes)
        .filter(|_| task.rollout_success(|s| policy.greedy(s)))
        .count();
    successes as f64 / episodes as f64
}
