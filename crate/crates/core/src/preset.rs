//! Named method variants. Each rating preset fixes the whole [`LossConfig`],
//! so ablations differ by exactly one name.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rating::{LossConfig, LossKind, Sampling};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// MAE, stratified batches, class weights.
    Erlvlm,
    /// Cross-entropy, uniform batches, no weights.
    VanillaRbrl,
    /// Cross-entropy with stratified batches and class weights.
    NoMae,
    /// MAE alone, with uniform batches and no weights.
    NoStratified,
    /// Label-smoothed cross-entropy (rate 0.1) with stratified batches and weights.
    LabelSmooth,
    /// Bradley-Terry reward from pairwise preferences.
    BtPreference,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Erlvlm,
        Preset::VanillaRbrl,
        Preset::NoMae,
        Preset::NoStratified,
        Preset::LabelSmooth,
        Preset::BtPreference,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Erlvlm => "erlvlm",
            Preset::VanillaRbrl => "vanilla-rbrl",
            Preset::NoMae => "no-mae",
            Preset::NoStratified => "no-stratified",
            Preset::LabelSmooth => "label-smooth",
            Preset::BtPreference => "bt-preference",
        }
    }

    /// Whether the preset learns from pairwise preferences instead of ratings.
    pub fn uses_preferences(self) -> bool {
        self == Preset::BtPreference
    }

    /// Rating loss of the preset. The preference preset trains on uniform
    /// batches; its loss kind is never read.
    pub fn loss_config(self) -> LossConfig {
        let (kind, sampling, class_weighting) = match self {
            Preset::Erlvlm => (LossKind::Mae, Sampling::Stratified, true),
            Preset::VanillaRbrl => (LossKind::Ce, Sampling::Uniform, false),
            Preset::NoMae => (LossKind::Ce, Sampling::Stratified, true),
            Preset::NoStratified => (LossKind::Mae, Sampling::Uniform, false),
            Preset::LabelSmooth => (LossKind::CeLabelSmooth, Sampling::Stratified, true),
            Preset::BtPreference => (LossKind::Ce, Sampling::Uniform, false),
        };
        LossConfig {
            kind,
            smoothing_rate: 0.1,
            class_weighting,
            sampling,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
                Error::Config(format!(
                    "unknown preset {s:?}; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}
