use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::buffer::{extract_segment, ReplayBuffer};
use super::policy::{evaluate, linear_epsilon, QPolicy};
use crate::env::{GridNavTask, OneHotFeatures, Transition};
use crate::error::{Error, Result};
use crate::rating::RatingLabel;
use crate::reward::{
    bt_train_session, train_session, Featurizer, PreferenceDataset, PreferencePair, RatingDataset,
    RewardEnsemble, TeacherMeta, TrainConfig,
};
use crate::scalar::Scalar;
use crate::seed::mix_seed;
use crate::teacher::{
    clean_rating, normalized_ground_truth, synthetic_prefer, PreferenceTeacher, RatingTeacher,
    Segment,
};

/// Where the learner's reward signal comes from.
pub enum Feedback<'a> {
    /// Ratings of sampled segments fit a reward ensemble.
    Ratings(&'a mut dyn RatingTeacher),
    /// Pairwise preferences fit a Bradley-Terry reward ensemble; one query is
    /// one pair.
    Preferences(&'a mut dyn PreferenceTeacher),
    /// The policy learns from the environment reward directly.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    /// Environment steps of policy learning after warmup.
    pub total_steps: usize,
    /// Steps between feedback sessions (K).
    pub feedback_period: usize,
    /// Queries per feedback session (N).
    pub queries_per_session: usize,
    pub budget: usize,
    pub warmup_queries: usize,
    /// Random-policy steps collected before the warmup session.
    pub warmup_steps: usize,
    pub warmup_epochs: usize,
    pub segment_len: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Temporal-difference updates from replayed transitions per environment step.
    pub updates_per_step: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub buffer_capacity: usize,
    /// Once reached, the goal holds the agent until the step limit instead of
    /// ending the episode.
    pub absorbing_goal: bool,
    /// Rating classes in the log; must equal the teacher's in rating mode.
    pub n_classes: usize,
    /// Cut points defining the clean label when measuring teacher accuracy;
    /// the task's defaults when absent.
    pub accuracy_thresholds: Option<Vec<f64>>,
    /// Return gap below which a clean preference is "unsure".
    pub preference_margin: f64,
    pub seed: u64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            total_steps: 30_000,
            feedback_period: 2_000,
            queries_per_session: 50,
            budget: 600,
            warmup_queries: 100,
            warmup_steps: 1_000,
            warmup_epochs: 100,
            segment_len: 1,
            eval_every: 2_000,
            eval_episodes: 10,
            updates_per_step: 1,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            buffer_capacity: 100_000,
            absorbing_goal: true,
            n_classes: 3,
            accuracy_thresholds: None,
            preference_margin: 0.1,
            seed: 0,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        if self.queries_per_session == 0 {
            return Err(Error::Config(
                "queries per session must be at least 1".into(),
            ));
        }
        if self.feedback_period == 0 || self.eval_every == 0 || self.eval_episodes == 0 {
            return Err(Error::Config(
                "feedback period, eval interval and eval episodes must be positive".into(),
            ));
        }
        if self.segment_len == 0 {
            return Err(Error::Config("segment length must be at least 1".into()));
        }
        if self.n_classes < 2 {
            return Err(Error::Config("at least two rating classes".into()));
        }
        Ok(())
    }
}

/// One CSV row: the state of the run at an evaluation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub step: usize,
    pub episode: usize,
    pub success_rate: f64,
    /// Final-epoch loss of the most recent reward training session.
    pub reward_loss: Option<f64>,
    /// Labels per class gathered since the previous row.
    pub class_counts: Vec<usize>,
    /// Cumulative agreement of teacher labels with clean labels.
    pub teacher_acc: Option<f64>,
    pub budget_used: usize,
    pub dropped_queries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    /// 0 for warmup.
    pub index: usize,
    pub step: usize,
    pub queries: usize,
    pub labeled: usize,
    pub dropped: usize,
    pub class_counts: Vec<usize>,
    pub final_loss: Option<f64>,
    pub per_class_recall: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub n_classes: usize,
    pub rows: Vec<EvalRow>,
    pub sessions: Vec<SessionRecord>,
    pub budget_used: usize,
    pub dropped_queries: usize,
}

impl RunLog {
    pub fn final_success(&self) -> Option<f64> {
        self.rows.last().map(|r| r.success_rate)
    }

    pub fn csv_header(n_classes: usize) -> String {
        let mut cols = vec![
            "step".to_string(),
            "episode".into(),
            "success_rate".into(),
            "reward_loss".into(),
        ];
        cols.extend((0..n_classes).map(|i| format!("n_class_{i}")));
        cols.extend([
            "teacher_acc".into(),
            "budget_used".into(),
            "dropped_queries".into(),
        ]);
        cols.join(",")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::csv_header(self.n_classes))?;
        let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |x| x.to_string());
        for r in &self.rows {
            let mut fields = vec![
                r.step.to_string(),
                r.episode.to_string(),
                r.success_rate.to_string(),
                opt(r.reward_loss),
            ];
            fields.extend(r.class_counts.iter().map(usize::to_string));
            fields.push(opt(r.teacher_acc));
            fields.push(r.budget_used.to_string());
            fields.push(r.dropped_queries.to_string());
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// Maps the table affinely onto [-1, 0]. Rating training only pins rewards
/// down up to a positive affine map, so the raw scale drifts between sessions.
/// With fixed-length episodes this leaves the optimal policy unchanged, and
/// non-positive rewards keep a zero-initialized Q table optimistic.
fn rescale_unit_below_zero(table: &mut [f64]) {
    let lo = table.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = table.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    for r in table.iter_mut() {
        *r = if span > 0.0 { (*r - hi) / span } else { 0.0 };
    }
}

struct Loop<'a, T: Scalar> {
    task: &'a GridNavTask,
    featurizer: OneHotFeatures,
    ensemble: &'a mut RewardEnsemble<T>,
    policy: &'a mut QPolicy,
    config: &'a LoopConfig,
    train: &'a TrainConfig,
    buffer: ReplayBuffer,
    oracle: bool,
    reward_table: Vec<f64>,
    env_rng: ChaCha8Rng,
    segment_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    ratings: RatingDataset,
    preferences: PreferenceDataset,
    thresholds: Vec<f64>,
    log: RunLog,
    pending_counts: Vec<usize>,
    labels_seen: usize,
    labels_correct: usize,
    last_loss: Option<f64>,
    episode: usize,
    state: usize,
    episode_step: usize,
}

impl<T: Scalar> Loop<'_, T> {
    fn remaining_budget(&self) -> usize {
        self.config.budget.saturating_sub(self.log.budget_used)
    }

    fn refresh_reward_table(&mut self) -> Result<()> {
        let n_actions = self.task.n_actions();
        for s in 0..self.task.n_states() {
            for a in 0..n_actions {
                let x: Vec<T> = self
                    .featurizer
                    .features(s, a)
                    .into_iter()
                    .map(T::of)
                    .collect();
                self.reward_table[s * n_actions + a] =
                    self.ensemble.predict_reward(&x)?.to_f64_lossy();
            }
        }
        if self.ensemble.sessions() == 0 {
            // No feedback yet: the reward stays at zero everywhere.
            self.reward_table.iter_mut().for_each(|r| *r = 0.0);
        } else {
            rescale_unit_below_zero(&mut self.reward_table);
        }
        let table = &self.reward_table;
        self.buffer.relabel_with(|s, a| table[s * n_actions + a]);
        Ok(())
    }

    fn reward_of(&self, t: &Transition) -> f64 {
        if self.oracle {
            t.env_reward
        } else {
            self.reward_table[t.state * self.task.n_actions() + t.action]
        }
    }

    /// One environment step with exploration rate `epsilon`; returns the stored
    /// transition.
    fn act(&mut self, epsilon: f64) -> Result<Transition> {
        let action = self
            .policy
            .epsilon_greedy(self.state, epsilon, &mut self.env_rng);
        let at_goal = self.state == self.task.goal();
        let (next_state, env_reward) = if at_goal && self.config.absorbing_goal {
            (self.state, self.task.env_reward(self.state))
        } else {
            let out = self.task.step(self.state, action)?;
            (out.next_state, out.env_reward)
        };
        let last_step = self.episode_step + 1 >= self.task.max_episode_steps();
        let reached = next_state == self.task.goal();
        let terminal = reached && !self.config.absorbing_goal;
        let done = last_step || terminal;
        let mut t = Transition {
            state: self.state,
            action,
            next_state,
            env_reward,
            learned_reward: 0.0,
            done,
            terminal,
            episode_id: self.episode as u64,
            step_index: self.episode_step,
        };
        t.learned_reward = self.reward_of(&t);
        self.buffer.push(t);
        if done {
            self.episode += 1;
            self.episode_step = 0;
            self.state = self.task.start();
        } else {
            self.episode_step += 1;
            self.state = next_state;
        }
        Ok(t)
    }

    fn clean_label(&self, seg: &Segment) -> Option<RatingLabel> {
        normalized_ground_truth(seg, self.task.reward_range())
            .ok()
            .map(|x| clean_rating(x, &self.thresholds))
    }

    fn draw_segments(&mut self, count: usize) -> Result<Vec<Segment>> {
        (0..count)
            .map(|_| {
                extract_segment(
                    &self.buffer,
                    self.task,
                    &mut self.segment_rng,
                    self.config.segment_len,
                )
            })
            .collect()
    }

    fn rating_session(
        &mut self,
        teacher: &mut dyn RatingTeacher,
        index: usize,
        step: usize,
        queries: usize,
        epochs: usize,
    ) -> Result<()> {
        let n = self.log.n_classes;
        let segments = self.draw_segments(queries)?;
        let outcomes = teacher.rate(&segments);
        let mut record = SessionRecord {
            index,
            step,
            queries: 0,
            labeled: 0,
            dropped: 0,
            class_counts: vec![0; n],
            final_loss: None,
            per_class_recall: Vec::new(),
        };
        for (seg, outcome) in segments.iter().zip(outcomes) {
            if outcome.charged {
                self.log.budget_used += 1;
                record.queries += 1;
            }
            let labels = match outcome.labels {
                Ok(l) => l,
                Err(Error::BudgetExhausted) => continue,
                Err(_) => {
                    record.dropped += 1;
                    continue;
                }
            };
            let samples: Vec<(Segment, RatingLabel)> = if labels.len() == 1 {
                vec![(seg.clone(), labels[0])]
            } else if labels.len() == seg.len() {
                labels
                    .iter()
                    .enumerate()
                    .map(|(k, &l)| (seg.sub_segment(k), l))
                    .collect()
            } else {
                record.dropped += 1;
                continue;
            };
            if samples.iter().any(|(_, l)| l.index() >= n) {
                record.dropped += 1;
                continue;
            }
            for (sample, label) in samples {
                let clean = self.clean_label(&sample);
                if let Some(c) = clean {
                    self.labels_seen += 1;
                    if c == label {
                        self.labels_correct += 1;
                    }
                }
                record.class_counts[label.index()] += 1;
                record.labeled += 1;
                self.ratings.push(
                    sample,
                    label,
                    TeacherMeta {
                        clean_label: clean,
                        session: index,
                        cached: outcome.cached,
                    },
                )?;
            }
        }
        self.log.dropped_queries += record.dropped;
        for (p, c) in self.pending_counts.iter_mut().zip(&record.class_counts) {
            *p += c;
        }
        if !self.ratings.is_empty() {
            let cfg = TrainConfig {
                epochs_per_session: epochs,
                ..self.train.clone()
            };
            let report = train_session(self.ensemble, &self.ratings, &self.featurizer, &cfg)?;
            record.final_loss = report.final_loss();
            record.per_class_recall = report.per_class_recall;
            self.last_loss = record.final_loss;
            self.refresh_reward_table()?;
        }
        self.log.sessions.push(record);
        Ok(())
    }

    fn preference_session(
        &mut self,
        teacher: &mut dyn PreferenceTeacher,
        index: usize,
        step: usize,
        queries: usize,
        epochs: usize,
    ) -> Result<()> {
        let mut record = SessionRecord {
            index,
            step,
            queries: 0,
            labeled: 0,
            dropped: 0,
            class_counts: vec![0; self.log.n_classes],
            final_loss: None,
            per_class_recall: Vec::new(),
        };
        for _ in 0..queries {
            let pair = self.draw_segments(2)?;
            let (first, second) = (pair[0].clone(), pair[1].clone());
            self.log.budget_used += 1;
            record.queries += 1;
            match teacher.prefer(&first, &second) {
                Ok(label) => {
                    if let Ok(clean) = synthetic_prefer(
                        &first,
                        &second,
                        self.config.preference_margin,
                        0.0,
                        &mut self.noise_rng,
                    ) {
                        self.labels_seen += 1;
                        if clean == label {
                            self.labels_correct += 1;
                        }
                    }
                    record.labeled += 1;
                    self.preferences.push(PreferencePair {
                        first,
                        second,
                        label,
                    });
                }
                Err(_) => record.dropped += 1,
            }
        }
        self.log.dropped_queries += record.dropped;
        let cfg = TrainConfig {
            epochs_per_session: epochs,
            ..self.train.clone()
        };
        match bt_train_session(self.ensemble, &self.preferences, &self.featurizer, &cfg) {
            Ok(report) => {
                record.final_loss = report.loss_curve.last().copied();
                self.last_loss = record.final_loss;
                self.refresh_reward_table()?;
            }
            Err(Error::NoTrainablePairs) => {}
            Err(e) => return Err(e),
        }
        self.log.sessions.push(record);
        Ok(())
    }

    fn feedback(
        &mut self,
        feedback: &mut Feedback<'_>,
        index: usize,
        step: usize,
        wanted: usize,
        epochs: usize,
    ) -> Result<()> {
        let queries = wanted.min(self.remaining_budget());
        if queries == 0 {
            return Ok(());
        }
        match feedback {
            Feedback::Ratings(t) => self.rating_session(&mut **t, index, step, queries, epochs),
            Feedback::Preferences(t) => {
                self.preference_session(&mut **t, index, step, queries, epochs)
            }
            Feedback::Oracle => Ok(()),
        }
    }

    fn push_row(&mut self, step: usize) {
        let success_rate = evaluate(self.policy, self.task, self.config.eval_episodes);
        let counts = std::mem::replace(&mut self.pending_counts, vec![0; self.log.n_classes]);
        let teacher_acc =
            (self.labels_seen > 0).then(|| self.labels_correct as f64 / self.labels_seen as f64);
        self.log.rows.push(EvalRow {
            step,
            episode: self.episode,
            success_rate,
            reward_loss: self.last_loss,
            class_counts: counts,
            teacher_acc,
            budget_used: self.log.budget_used,
            dropped_queries: self.log.dropped_queries,
        });
    }
}

/// The full feedback loop on a gridworld.
///
/// Random-policy steps seed the buffer, a warmup feedback session fits the
/// reward ensemble, then policy learning runs for `total_steps` with a
/// feedback session every `feedback_period` steps while budget remains. Each
/// session samples segments, queries the teacher, retrains the ensemble on
/// the whole dataset and relabels the buffer. Every step the policy takes
/// `updates_per_step` TD updates on uniformly replayed transitions.
pub fn run_training<T: Scalar>(
    task: &GridNavTask,
    mut feedback: Feedback<'_>,
    ensemble: &mut RewardEnsemble<T>,
    policy: &mut QPolicy,
    config: &LoopConfig,
    train: &TrainConfig,
) -> Result<RunLog> {
    config.validate()?;
    if let Feedback::Ratings(t) = &feedback {
        if t.n_classes() != config.n_classes {
            return Err(Error::Config(format!(
                "teacher has {} classes, loop logs {}",
                t.n_classes(),
                config.n_classes
            )));
        }
    }
    let featurizer = OneHotFeatures::for_task(task);
    if ensemble.input_dim() != featurizer.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: featurizer.feature_dim(),
            got: ensemble.input_dim(),
        });
    }
    if policy.n_states() != task.n_states() || policy.n_actions() != task.n_actions() {
        return Err(Error::Config("policy table does not match the task".into()));
    }
    let thresholds = match &config.accuracy_thresholds {
        Some(t) => t.clone(),
        None => task.default_thresholds(config.n_classes)?,
    };
    let rng = |k: u64| ChaCha8Rng::seed_from_u64(mix_seed(config.seed, &[k]));
    let mut lp = Loop {
        task,
        featurizer,
        ensemble,
        policy,
        config,
        train,
        buffer: ReplayBuffer::new(config.buffer_capacity),
        oracle: matches!(feedback, Feedback::Oracle),
        reward_table: vec![0.0; task.n_states() * task.n_actions()],
        env_rng: rng(1),
        segment_rng: rng(2),
        noise_rng: rng(3),
        ratings: RatingDataset::new(config.n_classes),
        preferences: PreferenceDataset::new(),
        thresholds,
        log: RunLog {
            n_classes: config.n_classes,
            rows: Vec::new(),
            sessions: Vec::new(),
            budget_used: 0,
            dropped_queries: 0,
        },
        pending_counts: vec![0; config.n_classes],
        labels_seen: 0,
        labels_correct: 0,
        last_loss: None,
        episode: 0,
        state: task.start(),
        episode_step: 0,
    };
    lp.refresh_reward_table()?;

    for _ in 0..config.warmup_steps {
        lp.act(1.0)?;
    }
    let mut session = 0;
    if !lp.oracle && config.warmup_queries > 0 && !lp.buffer.is_empty() {
        lp.feedback(
            &mut feedback,
            session,
            0,
            config.warmup_queries,
            config.warmup_epochs,
        )?;
        session += 1;
    }
    lp.push_row(0);

    let decay = config.total_steps / 2;
    let mut replay_rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, &[4]));
    for step in 1..=config.total_steps {
        let epsilon = linear_epsilon(step - 1, decay, config.epsilon_start, config.epsilon_end);
        lp.act(epsilon)?;
        for _ in 0..config.updates_per_step {
            if let Some(t) = lp.buffer.sample(&mut replay_rng) {
                let t = *t;
                lp.policy.update(&t);
            }
        }
        if !lp.oracle && step % config.feedback_period == 0 && lp.remaining_budget() > 0 {
            lp.feedback(
                &mut feedback,
                session,
                step,
                config.queries_per_session,
                train.epochs_per_session,
            )?;
            session += 1;
        }
        if step % config.eval_every == 0 || step == config.total_steps {
            lp.push_row(step);
        }
    }
    Ok(lp.log)
}
