//! The feedback loop: replay buffer, tabular Q-learning on learned rewards,
//! and the query, train, relabel cycle.

mod buffer;
mod policy;
mod run;

pub use buffer::{extract_segment, relabel_buffer, segment_from_window, ReplayBuffer};
pub use policy::{evaluate, linear_epsilon, q_update, QPolicy};
pub use run::{run_training, EvalRow, Feedback, LoopConfig, RunLog, SessionRecord};
