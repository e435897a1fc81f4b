//! Experiment configuration: one TOML document per run. Command-line flags
//! override fields of the document, and the resolved document is echoed at
//! the top of every output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tagspot::analysis::ModelFading;
use tagspot::channel::ChannelSpec;
use tagspot::detector::Denominator;
use tagspot::{CarrierLayout, Codebook};

use crate::error::CliError;

pub const CONFIG_VERSION: u32 = 1;

/// Seeds must fit a TOML integer.
pub const MAX_SEED: u64 = i64::MAX as u64;

pub const DEFAULT_TRIALS: u64 = 10_000;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub version: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub codebook: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layout: Option<CarrierLayout>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detector: Option<DetectorSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modulate: Option<ModulateSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curves: Option<CurvesSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leakage: Option<LeakageSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<RangeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overhead: Option<OverheadSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulateSection {
    /// Word to send; a seeded random word when absent.
    pub index: Option<usize>,
    /// Total spectral power; 112 gives unit power per energised thin carrier.
    pub power: f64,
    pub papr_cap_db: Option<f64>,
    pub max_attempts: usize,
}

impl Default for ModulateSection {
    fn default() -> Self {
        Self {
            index: None,
            power: 112.0,
            papr_cap_db: None,
            max_attempts: 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub carrier_sense: bool,
    pub carrier_sense_db: f64,
    pub denominator: Denominator,
    pub noise_smoothing: f64,
    pub com_limit: Option<f64>,
    pub initial_noise: Option<f64>,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            carrier_sense: true,
            carrier_sense_db: -1.0,
            denominator: Denominator::AllCarriers,
            noise_smoothing: 0.05,
            com_limit: None,
            initial_noise: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// One word, closed form.
    Single,
    /// The loaded codebook, by Monte Carlo.
    Code,
    /// Every word of the layout, by Monte Carlo.
    Unencoded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvesSection {
    pub gammas: Vec<f64>,
    pub snr_grid: Vec<f64>,
    pub fading: Vec<ModelFading>,
    pub families: Vec<FamilyKind>,
    pub denominator: Denominator,
}

impl Default for CurvesSection {
    fn default() -> Self {
        Self {
            gammas: (0..16).map(|i| round6(0.5 + 0.02 * i as f64)).collect(),
            snr_grid: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            fading: vec![ModelFading::Narrowband, ModelFading::Wideband],
            families: vec![FamilyKind::Single, FamilyKind::Code, FamilyKind::Unencoded],
            denominator: Denominator::ExcludeNulls,
        }
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeakageSection {
    /// Largest frequency offset, in thin carriers.
    pub max_offset: f64,
    /// Offsets tabulated between 0 and `max_offset`.
    pub points: usize,
    /// Block bounds tabulated for distances 1..=blocks.
    pub blocks: u32,
}

impl Default for LeakageSection {
    fn default() -> Self {
        Self {
            max_offset: 2.0,
            points: 21,
            blocks: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub carriers: usize,
    pub alpha: usize,
    /// Adds a Monte Carlo check of the detection probability at each point.
    pub verify: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            carriers: 56,
            alpha: 8,
            verify: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RangeSection {
    pub gap_db: Vec<f64>,
    pub exponents: Vec<f64>,
}

impl Default for RangeSection {
    fn default() -> Self {
        Self {
            gap_db: vec![20.0],
            exponents: vec![3.0, 6.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverheadSection {
    pub bytes: Vec<usize>,
    pub bytes_per_frame: usize,
    pub sync_frames: usize,
    pub tag_frames: usize,
}

impl Default for OverheadSection {
    fn default() -> Self {
        Self {
            bytes: vec![1500],
            bytes_per_frame: 12,
            sync_frames: 6,
            tag_frames: 8,
        }
    }
}

impl ExperimentConfig {
    /// Reads a document; it must carry the current version stamp.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let config: Self = toml::from_str(&text)?;
        match config.version {
            Some(CONFIG_VERSION) => Ok(config),
            Some(v) => Err(CliError::invalid(format!(
                "config version {v} is not supported (expected {CONFIG_VERSION})"
            ))),
            None => Err(CliError::invalid(format!(
                "config is missing `version = {CONFIG_VERSION}`"
            ))),
        }
    }

    pub fn layout(&self) -> Result<CarrierLayout, CliError> {
        let layout = self.layout.clone().unwrap_or_else(CarrierLayout::reference);
        layout.validate()?;
        Ok(layout)
    }

    pub fn codebook(&self) -> Result<Codebook, CliError> {
        match &self.codebook {
            Some(path) => Codebook::load(path).map_err(CliError::at(path)),
            None => Ok(Codebook::sloane_seidel()),
        }
    }

    /// The seed of a stochastic run, which must be given explicitly.
    pub fn require_seed(&self, what: &str) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::invalid(format!("{what} is random and needs --seed")))
    }

    pub fn trials(&self) -> u64 {
        self.trials.unwrap_or(DEFAULT_TRIALS)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(seed) = self.seed {
            if seed > MAX_SEED {
                return Err(CliError::invalid(format!("seed must be at most {MAX_SEED}")));
            }
        }
        if self.trials == Some(0) {
            return Err(CliError::invalid("trials must be positive"));
        }
        Ok(())
    }

    /// Document form for output headers.
    pub fn to_toml(&self) -> Result<String, CliError> {
        Ok(toml::to_string(self)?)
    }
}
