//! Experiment runner: one training run per seed, a metrics CSV per seed and a
//! summary of final success across seeds.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{CommandFactory, Parser, ValueEnum};
use ratingrl::agent::{run_training, Feedback, LoopConfig, QPolicy, RunLog};
use ratingrl::env::{GridNavTask, OneHotFeatures, BUILTIN_TASKS};
use ratingrl::metrics::mean_std;
use ratingrl::reward::{Featurizer, RewardEnsemble, TrainConfig};
use ratingrl::teacher::{
    default_class_names, SyntheticPreferenceTeacher, SyntheticRatingTeacher, TeacherConfig,
    VlmConfig, VlmTeacher,
};
use ratingrl::Preset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TeacherKind {
    Synthetic,
    Vlm,
    PreferenceSynthetic,
}

#[derive(Debug, Parser)]
#[command(
    name = "ratingrl",
    about = "Train gridworld agents from rating or preference feedback"
)]
struct Cli {
    /// Builtin task name or path to a task TOML file.
    #[arg(long)]
    task: Option<String>,
    /// Feedback source; defaults to the one the preset learns from.
    #[arg(long, value_enum)]
    teacher: Option<TeacherKind>,
    #[arg(long, default_value = "erlvlm", value_parser = parse_preset)]
    preset: Preset,
    #[arg(long, default_value_t = 3)]
    n_classes: usize,
    /// Probability that a synthetic label is replaced (ratings) or flipped (preferences).
    #[arg(long, default_value_t = 0.2)]
    noise: f64,
    #[arg(long, default_value_t = 600)]
    budget: usize,
    /// Environment steps between feedback sessions.
    #[arg(long = "K", default_value_t = 2000)]
    k: usize,
    /// Queries per feedback session.
    #[arg(long = "N", default_value_t = 50)]
    n: usize,
    /// Comma-separated seeds.
    #[arg(long, default_value = "0", value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    segment_len: usize,
    /// Environment steps of policy learning after warmup.
    #[arg(long, default_value_t = 30_000)]
    steps: usize,
    #[arg(long, default_value_t = 2000)]
    eval_every: usize,
}

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    s.parse().map_err(|e: ratingrl::Error| e.to_string())
}

fn load_task(arg: &str) -> Result<GridNavTask> {
    if BUILTIN_TASKS.contains(&arg) {
        return Ok(GridNavTask::builtin(arg)?);
    }
    let path = Path::new(arg);
    if path.exists() {
        return GridNavTask::load(path).with_context(|| format!("loading task file {arg}"));
    }
    bail!(
        "unknown task {arg:?}: not a file and not a builtin ({})",
        BUILTIN_TASKS.join(", ")
    )
}

struct Run<'a> {
    cli: &'a Cli,
    task: &'a GridNavTask,
    teacher: TeacherKind,
}

impl Run<'_> {
    fn loop_config(&self, seed: u64) -> LoopConfig {
        LoopConfig {
            total_steps: self.cli.steps,
            feedback_period: self.cli.k,
            queries_per_session: self.cli.n,
            budget: self.cli.budget,
            warmup_queries: LoopConfig::default().warmup_queries.min(self.cli.budget),
            segment_len: self.cli.segment_len,
            eval_every: self.cli.eval_every,
            n_classes: self.cli.n_classes,
            seed,
            ..LoopConfig::default()
        }
    }

    fn seed(&self, seed: u64) -> Result<RunLog> {
        let task = self.task;
        let featurizer = OneHotFeatures::for_task(task);
        let mut ensemble = RewardEnsemble::<f64>::new(3, featurizer.feature_dim(), 64, seed);
        let mut policy = QPolicy::for_task(task, 0.5, 0.97);
        let config = self.loop_config(seed);
        let train = TrainConfig {
            loss: self.cli.preset.loss_config(),
            seed,
            ..TrainConfig::default()
        };
        let mut rating_config = TeacherConfig::new(self.cli.n_classes);
        rating_config.thresholds = task.default_thresholds(self.cli.n_classes)?;
        rating_config.noise_rate = self.cli.noise;
        rating_config.seed = seed;
        let log = match self.teacher {
            TeacherKind::Synthetic => {
                let mut t = SyntheticRatingTeacher::new(rating_config, task.reward_range())?;
                run_training(
                    task,
                    Feedback::Ratings(&mut t),
                    &mut ensemble,
                    &mut policy,
                    &config,
                    &train,
                )?
            }
            TeacherKind::Vlm => {
                let vlm = VlmConfig::from_env(self.cli.budget)?;
                let mut t = VlmTeacher::new(vlm, default_class_names(self.cli.n_classes))?;
                run_training(
                    task,
                    Feedback::Ratings(&mut t),
                    &mut ensemble,
                    &mut policy,
                    &config,
                    &train,
                )?
            }
            TeacherKind::PreferenceSynthetic => {
                let mut t =
                    SyntheticPreferenceTeacher::new(config.preference_margin, self.cli.noise, seed);
                run_training(
                    task,
                    Feedback::Preferences(&mut t),
                    &mut ensemble,
                    &mut policy,
                    &config,
                    &train,
                )?
            }
        };
        Ok(log)
    }
}

fn validate(cli: &Cli, teacher: TeacherKind) -> Result<()> {
    if cli.seeds.is_empty() {
        bail!("at least one seed is required");
    }
    if cli.preset.uses_preferences() != (teacher == TeacherKind::PreferenceSynthetic) {
        bail!(
            "preset {} cannot learn from the {:?} teacher",
            cli.preset,
            teacher
        );
    }
    if !(0.0..1.0).contains(&cli.noise) {
        bail!("noise must lie in [0, 1)");
    }
    if teacher == TeacherKind::Vlm {
        // Fail before any training starts.
        VlmConfig::from_env(cli.budget)?;
    }
    Ok(())
}

fn seed_csv_name(seed: u64) -> String {
    format!("seed_{seed}.csv")
}

fn run(cli: &Cli) -> Result<()> {
    let Some(task_arg) = cli.task.as_deref() else {
        Cli::command()
            .error(
                clap::error::ErrorKind::MissingRequiredArgument,
                format!(
                    "--task is required (builtins: {})",
                    BUILTIN_TASKS.join(", ")
                ),
            )
            .exit();
    };
    let task = load_task(task_arg)?;
    let teacher = cli.teacher.unwrap_or(if cli.preset.uses_preferences() {
        TeacherKind::PreferenceSynthetic
    } else {
        TeacherKind::Synthetic
    });
    validate(cli, teacher)?;
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;

    let runner = Run {
        cli,
        task: &task,
        teacher,
    };
    let logs: Vec<(u64, Result<RunLog>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = cli
            .seeds
            .iter()
            .map(|&seed| {
                (
                    seed,
                    scope.spawn({
                        let runner = &runner;
                        move || runner.seed(seed)
                    }),
                )
            })
            .collect();
        handles
            .into_iter()
            .map(|(seed, h)| (seed, h.join().expect("seed thread panicked")))
            .collect()
    });

    let mut finals = Vec::with_capacity(logs.len());
    for (seed, log) in logs {
        let log = log.with_context(|| format!("seed {seed}"))?;
        let path = cli.out.join(seed_csv_name(seed));
        fs::write(&path, log.to_csv_string())
            .with_context(|| format!("writing {}", path.display()))?;
        finals.push(log.final_success().unwrap_or(0.0));
    }
    let (mean, std) = mean_std(&finals).expect("at least one seed");
    let seeds: Vec<String> = cli.seeds.iter().map(u64::to_string).collect();
    let summary = format!(
        "preset,seeds,n_seeds,mean_final_success,std_final_success\n{},{},{},{},{}\n",
        cli.preset,
        seeds.join(" "),
        finals.len(),
        mean,
        std
    );
    fs::write(cli.out.join("summary.csv"), &summary)?;
    println!(
        "{} on {}: final success {mean:.3} +- {std:.3} over {} seeds -> {}",
        cli.preset,
        task.name(),
        finals.len(),
        cli.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
