//! TOML configuration files for `run` and `sweep`.

use std::fs;
use std::path::{Path, PathBuf};

use fragrd_core::landscape::{generate, Landscape, DEFAULT_PROTECTED_FRACTION, DEFAULT_SIDE};
use fragrd_core::sweep::{default_grid, EnsembleSpec};
use fragrd_core::{GeneratorConfig, HarvestStrategy, ModelParams, NumericsConfig, StrategyKind, SweepConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Where a run's landscape comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LandscapeSource {
    /// A landscape file, relative to the config file.
    File(PathBuf),
    Generate(GeneratorConfig),
    /// Lattice side; every cell harvested.
    FullyHarvested(usize),
}

impl LandscapeSource {
    pub fn load(&self, base: &Path) -> Result<Landscape, CliError> {
        match self {
            LandscapeSource::File(path) => read_landscape(&base.join(path)),
            LandscapeSource::Generate(g) => Ok(generate(g)?),
            LandscapeSource::FullyHarvested(n) => Ok(Landscape::fully_harvested(*n)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySection {
    pub kind: StrategyKind,
    /// Quota (individuals/km²/year) or effort (1/year).
    pub intensity: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// CSV destination, relative to the config file; standard output if absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub landscape: LandscapeSource,
    pub strategy: StrategySection,
    #[serde(default)]
    pub params: ModelParams,
    #[serde(default)]
    pub numerics: NumericsConfig,
    /// Emit only these times instead of every record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation_times: Option<Vec<f64>>,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfigFile {
    pub fn strategy(&self) -> HarvestStrategy {
        self.strategy.kind.strategy(self.strategy.intensity, self.params.epsilon)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.params.validate()?;
        self.numerics.validate()?;
        self.strategy().validate()?;
        if let Some(times) = &self.observation_times {
            if times.iter().any(|&t| !(0.0..=self.numerics.t_end).contains(&t)) {
                return Err(CliError::Config(format!(
                    "observation times must lie in [0, t_end = {}]",
                    self.numerics.t_end
                )));
            }
        }
        Ok(())
    }
}

/// Ensemble selection in a sweep file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnsembleSection {
    /// Eight landscapes spanning `s = 94..=460`.
    DeskScale {
        #[serde(default = "default_seed")]
        master_seed: u64,
    },
    /// `s = 94, 100, ..., 460`.
    Full {
        #[serde(default = "default_seed")]
        master_seed: u64,
    },
    Arithmetic {
        #[serde(default = "default_side")]
        n: usize,
        #[serde(default = "default_fraction")]
        fraction: f64,
        s_start: u64,
        s_step: u64,
        count: usize,
        #[serde(default = "default_seed")]
        master_seed: u64,
    },
    Targets {
        #[serde(default = "default_side")]
        n: usize,
        #[serde(default = "default_fraction")]
        fraction: f64,
        targets: Vec<u64>,
        #[serde(default = "default_seed")]
        master_seed: u64,
    },
    /// Landscape files, relative to the config file.
    Files { paths: Vec<PathBuf> },
}

fn default_seed() -> u64 {
    1
}

fn default_side() -> usize {
    DEFAULT_SIDE
}

fn default_fraction() -> f64 {
    DEFAULT_PROTECTED_FRACTION
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection::DeskScale {
            master_seed: default_seed(),
        }
    }
}

impl EnsembleSection {
    pub fn master_seed(&self) -> Option<u64> {
        match *self {
            EnsembleSection::DeskScale { master_seed }
            | EnsembleSection::Full { master_seed }
            | EnsembleSection::Arithmetic { master_seed, .. }
            | EnsembleSection::Targets { master_seed, .. } => Some(master_seed),
            EnsembleSection::Files { .. } => None,
        }
    }

    pub fn load(&self, base: &Path) -> Result<Vec<Landscape>, CliError> {
        let spec = match self.clone() {
            EnsembleSection::DeskScale { master_seed } => EnsembleSpec::desk_scale(master_seed),
            EnsembleSection::Full { master_seed } => EnsembleSpec::full(master_seed),
            EnsembleSection::Arithmetic {
                n,
                fraction,
                s_start,
                s_step,
                count,
                master_seed,
            } => EnsembleSpec::Arithmetic {
                n,
                fraction,
                s_start,
                s_step,
                count,
                master_seed,
            },
            EnsembleSection::Targets {
                n,
                fraction,
                targets,
                master_seed,
            } => EnsembleSpec::Targets {
                n,
                fraction,
                targets,
                master_seed,
            },
            EnsembleSection::Files { paths } => {
                if paths.is_empty() {
                    return Err(CliError::Config("ensemble file list is empty".into()));
                }
                return paths.iter().map(|p| read_landscape(&base.join(p))).collect();
            }
        };
        Ok(spec.build()?)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOutputSection {
    /// Output directory, relative to the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// One CSV per observation time in addition to the combined table.
    pub per_time: bool,
    pub plot: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfigFile {
    pub strategy: StrategyKind,
    /// Defaults to the strategy's 25-point grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensities: Option<Vec<f64>>,
    #[serde(default = "default_observation_times")]
    pub observation_times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub params: ModelParams,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub output: SweepOutputSection,
}

fn default_observation_times() -> Vec<f64> {
    vec![5.0]
}

impl SweepConfigFile {
    pub fn sweep_config(&self) -> Result<SweepConfig, CliError> {
        let intensities = self
            .intensities
            .clone()
            .unwrap_or_else(|| default_grid(self.strategy, &self.params));
        let config = SweepConfig {
            strategy: self.strategy,
            intensities,
            params: self.params,
            numerics: self.numerics,
            observation_times: self.observation_times.clone(),
            threads: self.threads,
        };
        config.validate()?;
        Ok(config)
    }
}

pub fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn read_landscape(path: &Path) -> Result<Landscape, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Landscape::from_text(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Directory that relative paths in a config file are resolved against.
pub fn base_dir(config_path: &Path) -> PathBuf {
    config_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// `#`-ready lines echoing a config as TOML.
pub fn echo<T: Serialize>(value: &T) -> Vec<String> {
    match toml::to_string(value) {
        Ok(text) => text.lines().filter(|l| !l.is_empty()).map(str::to_owned).collect(),
        Err(e) => vec![format!("config echo unavailable: {e}")],
    }
}
