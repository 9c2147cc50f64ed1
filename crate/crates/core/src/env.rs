//! Gridworld navigation tasks with a dense shortest-path ground truth.

use std::collections::{BTreeSet, VecDeque};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::Featurizer;
use crate::teacher::Observation;

pub const N_ACTIONS: usize = 4;
pub const ACTION_NAMES: [&str; N_ACTIONS] = ["up", "down", "left", "right"];

/// Names accepted by [`GridNavTask::builtin`].
pub const BUILTIN_TASKS: [&str; 3] = ["default", "open8", "open16"];

const UNREACHABLE: u32 = u32::MAX;

/// On-disk task description (TOML). Cells are `[x, y]` with `y = 0` the top row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFile {
    pub width: usize,
    pub height: usize,
    pub start: [usize; 2],
    pub goal: [usize; 2],
    #[serde(default)]
    pub walls: Vec<[usize; 2]>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default)]
    pub description: Option<String>,
}

fn default_max_steps() -> usize {
    50
}

/// Result of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: usize,
    pub env_reward: f64,
    /// Whether `next_state` is the goal.
    pub done: bool,
}

/// One stored environment step. `learned_reward` is overwritten by relabeling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
    pub env_reward: f64,
    pub learned_reward: f64,
    /// The episode ends after this step, at the goal or at the step limit.
    pub done: bool,
    /// The episode ends because of the task itself rather than the step limit,
    /// so value estimates must not bootstrap past it.
    pub terminal: bool,
    pub episode_id: u64,
    pub step_index: usize,
}

/// A rectangular grid with walls, a start and a goal. States are cell ids
/// `y * width + x`; actions are up, down, left, right.
#[derive(Debug, Clone, PartialEq)]
pub struct GridNavTask {
    name: String,
    width: usize,
    height: usize,
    start: usize,
    goal: usize,
    walls: BTreeSet<usize>,
    max_episode_steps: usize,
    description: String,
    dist: Vec<u32>,
    dist_max: u32,
}

impl GridNavTask {
    pub fn new(
        width: usize,
        height: usize,
        start: (usize, usize),
        goal: (usize, usize),
        walls: &[(usize, usize)],
        max_episode_steps: usize,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Task("grid must be at least 1x1".into()));
        }
        if max_episode_steps == 0 {
            return Err(Error::Task("max_steps must be at least 1".into()));
        }
        let cell = |(x, y): (usize, usize)| -> Result<usize> {
            if x >= width || y >= height {
                return Err(Error::Task(format!("cell ({x}, {y}) is outside the grid")));
            }
            Ok(y * width + x)
        };
        let start = cell(start)?;
        let goal = cell(goal)?;
        let walls = walls
            .iter()
            .map(|&c| cell(c))
            .collect::<Result<BTreeSet<_>>>()?;
        if start == goal {
            return Err(Error::Task("start and goal coincide".into()));
        }
        if walls.contains(&start) || walls.contains(&goal) {
            return Err(Error::Task("start or goal is a wall".into()));
        }
        let mut task = Self {
            name: "custom".into(),
            width,
            height,
            start,
            goal,
            walls,
            max_episode_steps,
            description: "navigate the agent A to the goal cell G".into(),
            dist: Vec::new(),
            dist_max: 0,
        };
        task.dist = task.bfs_from_goal();
        if task.dist[start] == UNREACHABLE {
            return Err(Error::Task("no path from start to goal".into()));
        }
        task.dist_max = task
            .dist
            .iter()
            .copied()
            .filter(|&d| d != UNREACHABLE)
            .max()
            .unwrap_or(0);
        Ok(task)
    }

    pub fn from_task_file(file: &TaskFile) -> Result<Self> {
        let walls: Vec<(usize, usize)> = file.walls.iter().map(|w| (w[0], w[1])).collect();
        let mut task = Self::new(
            file.width,
            file.height,
            (file.start[0], file.start[1]),
            (file.goal[0], file.goal[1]),
            &walls,
            file.max_steps,
        )?;
        if let Some(d) = &file.description {
            task.description = d.clone();
        }
        Ok(task)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: TaskFile = toml::from_str(text).map_err(|e| Error::Task(e.to_string()))?;
        Self::from_task_file(&file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut task = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            task.name = stem.to_string();
        }
        Ok(task)
    }

    /// `default`: 8x8 with 10% walls from a fixed seed; `open8`, `open16`:
    /// empty grids. Start is the top-left corner, goal the bottom-right.
    pub fn builtin(name: &str) -> Result<Self> {
        let mut task = match name {
            "default" => Self::random_walls(8, 8, 0.1, 50, 7)?,
            "open8" => Self::new(8, 8, (0, 0), (7, 7), &[], 50)?,
            "open16" => Self::new(16, 16, (0, 0), (15, 15), &[], 100)?,
            other => {
                return Err(Error::Task(format!(
                    "unknown builtin task {other:?} (available: {})",
                    BUILTIN_TASKS.join(", ")
                )))
            }
        };
        task.name = name.to_string();
        Ok(task)
    }

    /// Places `round(density * cells)` walls uniformly, redrawing until every
    /// open cell is reachable from the goal.
    pub fn random_walls(
        width: usize,
        height: usize,
        density: f64,
        max_episode_steps: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = (0, 0);
        let goal = (width - 1, height - 1);
        let n_walls = (density * (width * height) as f64).round() as usize;
        let candidates: Vec<(usize, usize)> = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .filter(|&c| c != start && c != goal)
            .collect();
        for _ in 0..1000 {
            let walls: Vec<(usize, usize)> = candidates
                .choose_multiple(&mut rng, n_walls.min(candidates.len()))
                .copied()
                .collect();
            if let Ok(task) = Self::new(width, height, start, goal, &walls, max_episode_steps) {
                if task.open_cells().all(|s| task.dist[s] != UNREACHABLE) {
                    return Ok(task);
                }
            }
        }
        Err(Error::Task(
            "could not place walls with every cell reachable".into(),
        ))
    }

    fn bfs_from_goal(&self) -> Vec<u32> {
        let mut dist = vec![UNREACHABLE; self.n_states()];
        let mut queue = VecDeque::from([self.goal]);
        dist[self.goal] = 0;
        while let Some(s) = queue.pop_front() {
            for a in 0..N_ACTIONS {
                // Moves are reversible, so neighbours under any action are
                // predecessors too.
                let t = self.move_from(s, a);
                if t != s && dist[t] == UNREACHABLE {
                    dist[t] = dist[s] + 1;
                    queue.push_back(t);
                }
            }
        }
        dist
    }

    fn move_from(&self, state: usize, action: usize) -> usize {
        let (x, y) = self.coords(state);
        let (nx, ny) = match action {
            0 if y > 0 => (x, y - 1),
            1 if y + 1 < self.height => (x, y + 1),
            2 if x > 0 => (x - 1, y),
            3 if x + 1 < self.width => (x + 1, y),
            _ => (x, y),
        };
        let next = ny * self.width + nx;
        if self.walls.contains(&next) {
            state
        } else {
            next
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_states(&self) -> usize {
        self.width * self.height
    }

    pub fn n_actions(&self) -> usize {
        N_ACTIONS
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn goal(&self) -> usize {
        self.goal
    }

    pub fn max_episode_steps(&self) -> usize {
        self.max_episode_steps
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn is_wall(&self, state: usize) -> bool {
        self.walls.contains(&state)
    }

    pub fn coords(&self, state: usize) -> (usize, usize) {
        (state % self.width, state / self.width)
    }

    pub fn open_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_states()).filter(|s| !self.walls.contains(s))
    }

    /// Shortest-path length to the goal, `None` when unreachable.
    pub fn distance(&self, state: usize) -> Option<u32> {
        self.dist.get(state).copied().filter(|&d| d != UNREACHABLE)
    }

    /// Largest finite shortest-path distance on the grid.
    pub fn dist_max(&self) -> u32 {
        self.dist_max
    }

    /// Per-step range of [`env_reward`](Self::env_reward).
    pub fn reward_range(&self) -> (f64, f64) {
        (-1.0, 0.0)
    }

    /// `-dist(state) / dist_max`; unreachable cells score -1.
    pub fn env_reward(&self, state: usize) -> f64 {
        match self.distance(state) {
            Some(d) => -(d as f64) / self.dist_max.max(1) as f64,
            None => -1.0,
        }
    }

    fn check_state(&self, state: usize) -> Result<()> {
        if state >= self.n_states() || self.walls.contains(&state) {
            return Err(Error::InvalidState(state));
        }
        Ok(())
    }

    pub fn step(&self, state: usize, action: usize) -> Result<StepOutcome> {
        self.check_state(state)?;
        if action >= N_ACTIONS {
            return Err(Error::InvalidAction(action));
        }
        let next_state = self.move_from(state, action);
        Ok(StepOutcome {
            next_state,
            env_reward: self.env_reward(next_state),
            done: next_state == self.goal,
        })
    }

    /// Thresholds on the normalized ground-truth return whose top class holds
    /// exactly the steps that end on the goal; the remaining classes split
    /// [0, 1] evenly.
    pub fn default_thresholds(&self, n_classes: usize) -> Result<Vec<f64>> {
        if n_classes < 2 {
            return Err(Error::Config("need at least two rating classes".into()));
        }
        let top = 1.0 - 0.5 / self.dist_max.max(1) as f64;
        let mut t: Vec<f64> = (1..n_classes - 1)
            .map(|i| i as f64 / (n_classes - 1) as f64)
            .collect();
        if t.last().is_some_and(|&last| last >= top) {
            return Err(Error::Config(format!(
                "grid too small for {n_classes} rating classes"
            )));
        }
        t.push(top);
        Ok(t)
    }

    /// ASCII picture: `A` agent, `G` goal, `#` wall, `.` free; one line per row.
    pub fn render_text(&self, agent: usize) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for y in 0..self.height {
            if y > 0 {
                out.push('\n');
            }
            for x in 0..self.width {
                let s = y * self.width + x;
                out.push(if s == agent {
                    'A'
                } else if s == self.goal {
                    'G'
                } else if self.walls.contains(&s) {
                    '#'
                } else {
                    '.'
                });
            }
        }
        out
    }

    pub fn observation(&self, state: usize) -> Observation {
        Observation::Text(self.render_text(state))
    }

    /// Whether following `policy` from the start reaches the goal within the
    /// step limit.
    pub fn rollout_success<F: FnMut(usize) -> usize>(&self, mut policy: F) -> bool {
        let mut s = self.start;
        for _ in 0..self.max_episode_steps {
            s = self.move_from(s, policy(s) % N_ACTIONS);
            if s == self.goal {
                return true;
            }
        }
        false
    }

    /// Action along a shortest path (lowest index among ties).
    pub fn shortest_path_action(&self, state: usize) -> usize {
        (0..N_ACTIONS)
            .min_by_key(|&a| self.dist[self.move_from(state, a)])
            .unwrap_or(0)
    }

    /// A uniformly random open cell.
    pub fn random_open_cell<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let cells: Vec<usize> = self.open_cells().collect();
        cells[rng.gen_range(0..cells.len())]
    }
}

/// One-hot cell followed by one-hot action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OneHotFeatures {
    pub n_states: usize,
}

impl OneHotFeatures {
    pub fn for_task(task: &GridNavTask) -> Self {
        Self {
            n_states: task.n_states(),
        }
    }
}

impl Featurizer for OneHotFeatures {
    fn feature_dim(&self) -> usize {
        self.n_states + N_ACTIONS
    }

    fn features(&self, state: usize, action: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.feature_dim()];
        if state < self.n_states {
            v[state] = 1.0;
        }
        if action < N_ACTIONS {
            v[self.n_states + action] = 1.0;
        }
        v
    }
}
