use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{PreferenceTeacher, RatingOutcome, RatingTeacher, Segment, TeacherConfig};
use crate::error::{Error, Result};
use crate::rating::RatingLabel;
use crate::reward::Preference;

/// Ground-truth return of a segment rescaled to [0, 1], given the per-step
/// reward range `(lo, hi)` of the environment.
pub fn normalized_ground_truth(segment: &Segment, reward_range: (f64, f64)) -> Result<f64> {
    let ret = segment
        .ground_truth_return
        .ok_or(Error::MissingGroundTruth)?;
    let h = segment.len().max(1) as f64;
    let (lo, hi) = reward_range;
    let span = h * (hi - lo);
    if span <= 0.0 {
        return Err(Error::Config("empty reward range".into()));
    }
    Ok(((ret - h * lo) / span).clamp(0.0, 1.0))
}

/// Number of thresholds strictly below `normalized`.
pub fn clean_rating(normalized: f64, thresholds: &[f64]) -> RatingLabel {
    RatingLabel::new_unchecked(thresholds.iter().filter(|&&t| t < normalized).count())
}

pub fn synthetic_rate<R: Rng + ?Sized>(
    segment: &Segment,
    config: &TeacherConfig,
    reward_range: (f64, f64),
    rng: &mut R,
) -> Result<RatingLabel> {
    let x = normalized_ground_truth(segment, reward_range)?;
    let clean = clean_rating(x, &config.thresholds);
    if config.noise_rate > 0.0 && rng.gen::<f64>() < config.noise_rate {
        return Ok(RatingLabel::new_unchecked(
            rng.gen_range(0..config.n_classes),
        ));
    }
    Ok(clean)
}

/// Index of the higher-return segment, `Unsure` when the gap is below `margin`,
/// flipped with probability `noise`.
pub fn synthetic_prefer<R: Rng + ?Sized>(
    first: &Segment,
    second: &Segment,
    margin: f64,
    noise: f64,
    rng: &mut R,
) -> Result<Preference> {
    let a = first.ground_truth_return.ok_or(Error::MissingGroundTruth)?;
    let b = second
        .ground_truth_return
        .ok_or(Error::MissingGroundTruth)?;
    if (a - b).abs() < margin {
        return Ok(Preference::Unsure);
    }
    let mut pref = if a > b {
        Preference::First
    } else {
        Preference::Second
    };
    if noise > 0.0 && rng.gen::<f64>() < noise {
        pref = match pref {
            Preference::First => Preference::Second,
            _ => Preference::First,
        };
    }
    Ok(pref)
}

#[derive(Debug, Clone)]
pub struct SyntheticRatingTeacher {
    config: TeacherConfig,
    reward_range: (f64, f64),
    rng: ChaCha8Rng,
}

impl SyntheticRatingTeacher {
    pub fn new(config: TeacherConfig, reward_range: (f64, f64)) -> Result<Self> {
        config.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Self {
            config,
            reward_range,
            rng,
        })
    }

    pub fn config(&self) -> &TeacherConfig {
        &self.config
    }

    pub fn rate_one(&mut self, segment: &Segment) -> Result<RatingLabel> {
        synthetic_rate(segment, &self.config, self.reward_range, &mut self.rng)
    }
}

impl RatingTeacher for SyntheticRatingTeacher {
    fn n_classes(&self) -> usize {
        self.config.n_classes
    }

    fn rate(&mut self, segments: &[Segment]) -> Vec<RatingOutcome> {
        segments
            .iter()
            .map(|s| RatingOutcome {
                labels: self.rate_one(s).map(|l| vec![l]),
                charged: true,
                cached: false,
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPreferenceTeacher {
    pub margin: f64,
    pub noise: f64,
    rng: ChaCha8Rng,
}

impl SyntheticPreferenceTeacher {
    pub fn new(margin: f64, noise: f64, seed: u64) -> Self {
        Self {
            margin,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl PreferenceTeacher for SyntheticPreferenceTeacher {
    fn prefer(&mut self, first: &Segment, second: &Segment) -> Result<Preference> {
        synthetic_prefer(first, second, self.margin, self.noise, &mut self.rng)
    }
}
