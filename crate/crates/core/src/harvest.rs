//! Removal terms `Y(x, u)` for the two harvesting strategies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::{Landscape, HARVESTED};

/// Default density below which quasi-constant-yield harvesting is withdrawn
/// (individuals/km²).
pub const DEFAULT_EPSILON: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    QuasiConstantYield,
    Proportional,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::QuasiConstantYield => "quasi_constant_yield",
            StrategyKind::Proportional => "proportional",
        }
    }

    pub fn strategy(self, intensity: f64, epsilon: f64) -> HarvestStrategy {
        match self {
            StrategyKind::QuasiConstantYield => HarvestStrategy::QuasiConstantYield {
                quota: intensity,
                epsilon,
            },
            StrategyKind::Proportional => HarvestStrategy::Proportional { effort: intensity },
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quasi_constant_yield" | "constant" | "qcy" => Ok(StrategyKind::QuasiConstantYield),
            "proportional" | "prop" => Ok(StrategyKind::Proportional),
            other => Err(Error::Config(format!("unknown harvesting strategy `{other}`"))),
        }
    }
}

/// Harvesting rule applied on harvested cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HarvestStrategy {
    /// `Y = quota * chi * rho_eps(u)`; quota in individuals/km²/year.
    QuasiConstantYield { quota: f64, epsilon: f64 },
    /// `Y = effort * chi * u`; effort in 1/year.
    Proportional { effort: f64 },
}

impl HarvestStrategy {
    pub fn kind(&self) -> StrategyKind {
        match self {
            HarvestStrategy::QuasiConstantYield { .. } => StrategyKind::QuasiConstantYield,
            HarvestStrategy::Proportional { .. } => StrategyKind::Proportional,
        }
    }

    pub fn intensity(&self) -> f64 {
        match *self {
            HarvestStrategy::QuasiConstantYield { quota, .. } => quota,
            HarvestStrategy::Proportional { effort } => effort,
        }
    }

    pub fn with_intensity(&self, intensity: f64) -> Self {
        match *self {
            HarvestStrategy::QuasiConstantYield { epsilon, .. } => {
                HarvestStrategy::QuasiConstantYield {
                    quota: intensity,
                    epsilon,
                }
            }
            HarvestStrategy::Proportional { .. } => HarvestStrategy::Proportional { effort: intensity },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let intensity = self.intensity();
        if !(intensity.is_finite() && intensity >= 0.0) {
            return Err(Error::Config(format!(
                "harvesting intensity must be finite and nonnegative, got {intensity}"
            )));
        }
        if let HarvestStrategy::QuasiConstantYield { epsilon, .. } = *self {
            if !(epsilon.is_finite() && epsilon > 0.0) {
                return Err(Error::Config(format!(
                    "harvesting threshold must be positive, got {epsilon}"
                )));
            }
        }
        Ok(())
    }

    /// Removal rate at a harvested node with density `u`.
    ///
    /// Below the threshold the quasi-constant rate is evaluated as
    /// `(quota / epsilon) * u`, the same expression as proportional harvesting
    /// with effort `quota / epsilon`, so the two agree bit for bit there.
    #[inline]
    pub fn harvested_rate(&self, u: f64) -> f64 {
        match *self {
            HarvestStrategy::QuasiConstantYield { quota, epsilon } => {
                if u >= epsilon {
                    quota
                } else if u > 0.0 {
                    (quota / epsilon) * u
                } else {
                    0.0
                }
            }
            HarvestStrategy::Proportional { effort } => effort * u,
        }
    }
}

/// Threshold function: 0 for `s <= 0`, `s / epsilon` on `(0, epsilon)`, 1 above.
pub fn rho_eps(s: f64, epsilon: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s < epsilon {
        s / epsilon
    } else {
        1.0
    }
}

/// Harvesting indicator on the PDE grid: each lattice cell becomes a
/// `refine x refine` block of nodes carrying the cell's value (1 = harvested).
pub fn indicator_on_grid(landscape: &Landscape, refine: usize) -> Vec<f64> {
    let n = landscape.n();
    let m = n * refine;
    let cells = landscape.cells();
    let mut chi = vec![0.0; m * m];
    for i in 0..m {
        let lattice_row = &cells[(i / refine) * n..(i / refine + 1) * n];
        for (j, x) in chi[i * m..(i + 1) * m].iter_mut().enumerate() {
            *x = f64::from(u8::from(lattice_row[j / refine] == HARVESTED));
        }
    }
    chi
}

/// A strategy bound to a harvesting indicator on the PDE grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RemovalTerm {
    strategy: HarvestStrategy,
    chi: Vec<f64>,
}

impl RemovalTerm {
    pub fn new(strategy: HarvestStrategy, chi: Vec<f64>) -> Self {
        RemovalTerm { strategy, chi }
    }

    pub fn from_landscape(strategy: HarvestStrategy, landscape: &Landscape, refine: usize) -> Self {
        RemovalTerm::new(strategy, indicator_on_grid(landscape, refine))
    }

    pub fn strategy(&self) -> &HarvestStrategy {
        &self.strategy
    }

    pub fn indicator(&self) -> &[f64] {
        &self.chi
    }

    pub fn rate(&self, u: &[f64]) -> Vec<f64> {
        removal_rate(&self.strategy, &self.chi, u)
    }

    pub(crate) fn rate_into(&self, u: &[f64], out: &mut [f64]) {
        removal_rate_into(&self.strategy, &self.chi, u, out)
    }
}

/// Nodewise removal rate `Y(x, u)` (individuals/km²/year).
pub fn removal_rate(strategy: &HarvestStrategy, chi: &[f64], u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    removal_rate_into(strategy, chi, u, &mut out);
    out
}

pub(crate) fn removal_rate_into(strategy: &HarvestStrategy, chi: &[f64], u: &[f64], out: &mut [f64]) {
    assert_eq!(chi.len(), u.len(), "indicator and field sizes differ");
    assert_eq!(out.len(), u.len());
    for ((y, &c), &v) in out.iter_mut().zip(chi).zip(u) {
        *y = if c == 0.0 { 0.0 } else { c * strategy.harvested_rate(v) };
    }
}
