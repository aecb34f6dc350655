//! Ensemble-by-intensity experiments.
//!
//! A sweep runs one solve per (landscape, intensity) pair, reads `P(t)`,
//! `R(t)` and the boundary flux at each observation time, and tabulates them
//! with the per-intensity relative losses across the ensemble. Jobs run on a
//! rayon pool and are reduced in (landscape, intensity) order, so results do
//! not depend on the number of workers.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harvest::StrategyKind;
use crate::landscape::{self, Landscape, DEFAULT_PROTECTED_FRACTION, DEFAULT_SIDE};
use crate::observables::{annual_yield, rank_correlation, relative_loss};
use crate::solver::{solve, ModelParams, NumericsConfig};

/// Aggregation indices of the default eight-member ensemble, evenly spread
/// over 94..=460.
pub const DESK_SCALE_TARGETS: [u64; 8] = [94, 146, 199, 251, 303, 356, 408, 460];

/// Points in the default intensity grids.
pub const DEFAULT_GRID_POINTS: usize = 25;

/// How the landscapes of a sweep are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnsembleSpec {
    /// `s_k = s_start + s_step * (k - 1)`, `k = 1..=count`.
    Arithmetic {
        n: usize,
        fraction: f64,
        s_start: u64,
        s_step: u64,
        count: usize,
        master_seed: u64,
    },
    /// Explicit ascending list of target indices.
    Targets {
        n: usize,
        fraction: f64,
        targets: Vec<u64>,
        master_seed: u64,
    },
}

impl EnsembleSpec {
    /// Eight landscapes spanning the reference range.
    pub fn desk_scale(master_seed: u64) -> Self {
        EnsembleSpec::Targets {
            n: DEFAULT_SIDE,
            fraction: DEFAULT_PROTECTED_FRACTION,
            targets: DESK_SCALE_TARGETS.to_vec(),
            master_seed,
        }
    }

    /// The 62-member ensemble `s = 94, 100, ..., 460`.
    pub fn full(master_seed: u64) -> Self {
        EnsembleSpec::Arithmetic {
            n: DEFAULT_SIDE,
            fraction: DEFAULT_PROTECTED_FRACTION,
            s_start: 94,
            s_step: 6,
            count: 62,
            master_seed,
        }
    }

    pub fn build(&self) -> Result<Vec<Landscape>> {
        match self {
            EnsembleSpec::Arithmetic {
                n,
                fraction,
                s_start,
                s_step,
                count,
                master_seed,
            } => landscape::build_ensemble(*n, *fraction, *s_start, *s_step, *count, *master_seed),
            EnsembleSpec::Targets {
                n,
                fraction,
                targets,
                master_seed,
            } => landscape::build_ensemble_for_targets(*n, *fraction, targets, *master_seed),
        }
    }
}

/// `points` evenly spaced values from 0 to `max` inclusive.
pub fn linear_grid(max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points)
            .map(|i| max * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Upper end of the default quota grid: three times the largest quota a
/// bare harvested cell can sustain (`r K / 4`). The ensemble-wide collapse of
/// fragmented reserves, and with it the reversal of the yield ordering, lies
/// well above `2 * r K / 4` at `t = 5`.
pub fn default_quota_max(params: &ModelParams) -> f64 {
    0.75 * params.growth_rate * params.carrying_capacity
}

/// Upper end of the default effort grid: `2 r`.
pub fn default_effort_max(params: &ModelParams) -> f64 {
    2.0 * params.growth_rate
}

pub fn default_grid(kind: StrategyKind, params: &ModelParams) -> Vec<f64> {
    let max = match kind {
        StrategyKind::QuasiConstantYield => default_quota_max(params),
        StrategyKind::Proportional => default_effort_max(params),
    };
    linear_grid(max, DEFAULT_GRID_POINTS)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub strategy: StrategyKind,
    /// Nonempty, nonnegative, ascending.
    pub intensities: Vec<f64>,
    #[serde(default)]
    pub params: ModelParams,
    /// `t_end` is overridden by the last observation time.
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default = "SweepConfig::default_observation_times")]
    pub observation_times: Vec<f64>,
    /// Worker threads; `None` uses rayon's default. Does not affect results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl SweepConfig {
    pub fn new(strategy: StrategyKind, intensities: Vec<f64>) -> Self {
        SweepConfig {
            strategy,
            intensities,
            params: ModelParams::default(),
            numerics: NumericsConfig::default(),
            observation_times: Self::default_observation_times(),
            threads: None,
        }
    }

    /// Default grid for the strategy with default parameters.
    pub fn with_default_grid(strategy: StrategyKind) -> Self {
        Self::new(strategy, default_grid(strategy, &ModelParams::default()))
    }

    fn default_observation_times() -> Vec<f64> {
        vec![5.0]
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.intensities.is_empty() {
            return Err(Error::Config("intensity grid is empty".into()));
        }
        if self.intensities.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("intensities must be finite and nonnegative".into()));
        }
        if self.intensities.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("intensity grid must be ascending".into()));
        }
        if self.observation_times.is_empty()
            || self.observation_times.windows(2).any(|w| w[1] <= w[0])
            || self.observation_times[0] <= 0.0
        {
            return Err(Error::Config(
                "observation times must be positive and strictly ascending".into(),
            ));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        self.run_numerics().map(|_| ())
    }

    /// Numerics used for each solve: integrates to the last observation time
    /// and records every observation time and the year before it.
    pub fn run_numerics(&self) -> Result<NumericsConfig> {
        let mut numerics = self.numerics;
        numerics.t_end = *self.observation_times.last().expect("validated nonempty");
        numerics.validate()?;
        let mut record = 0usize;
        for &t in &self.observation_times {
            let mut marks = vec![t];
            if t >= 1.0 {
                marks.push(t - 1.0);
            }
            for mark in marks {
                let step = numerics.step_of(mark).ok_or_else(|| {
                    Error::Config(format!(
                        "observation time {mark} is not a whole number of steps of dt = {}",
                        numerics.dt
                    ))
                })?;
                record = gcd(record, step);
            }
        }
        numerics.record_every = record.max(1);
        Ok(numerics)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// One table row: a landscape, an intensity and an observation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    /// 1-based ensemble position.
    pub k: usize,
    pub s: u64,
    pub intensity: f64,
    pub t: f64,
    /// `P(t)`, individuals.
    pub population: f64,
    /// `R(t)`, individuals/year; absent for `t < 1`.
    pub annual_yield: Option<f64>,
    /// Protected-to-harvested flux at `t`, individuals/year.
    pub flux: f64,
}

/// Per-run numerical diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSummary {
    pub k: usize,
    pub s: u64,
    pub intensity: f64,
    pub max_balance_residual: f64,
    pub min_density: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LandscapeInfo {
    pub s: u64,
    pub protected_count: usize,
    pub digest: u64,
}

/// Ensemble spread at one intensity and time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossRow {
    pub intensity: f64,
    pub t: f64,
    /// Percentage; `None` when every population is zero.
    pub population_loss: Option<f64>,
    pub yield_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub landscapes: Vec<LandscapeInfo>,
    /// Ordered by landscape, then intensity, then time.
    pub rows: Vec<SweepRow>,
    /// Ordered by landscape, then intensity.
    pub runs: Vec<RunSummary>,
}

/// Which observable a table or correlation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Population,
    AnnualYield,
    Flux,
}

impl SweepRow {
    pub fn get(&self, q: Quantity) -> Option<f64> {
        match q {
            Quantity::Population => Some(self.population),
            Quantity::AnnualYield => self.annual_yield,
            Quantity::Flux => Some(self.flux),
        }
    }
}

pub fn run_sweep(config: &SweepConfig, landscapes: &[Landscape]) -> Result<SweepResult> {
    config.validate()?;
    if landscapes.is_empty() {
        return Err(Error::Config("sweep needs at least one landscape".into()));
    }
    if landscapes
        .windows(2)
        .any(|w| w[0].protected_count() != w[1].protected_count() || w[0].n() != w[1].n())
    {
        return Err(Error::Config(
            "all landscapes of a sweep must share lattice size and protected count".into(),
        ));
    }
    let numerics = config.run_numerics()?;
    let jobs: Vec<(usize, usize)> = (0..landscapes.len())
        .flat_map(|l| (0..config.intensities.len()).map(move |i| (l, i)))
        .collect();

    let run_job = |&(l, i): &(usize, usize)| -> Result<(Vec<SweepRow>, RunSummary)> {
        let landscape = &landscapes[l];
        let intensity = config.intensities[i];
        let k = l + 1;
        let strategy = config.strategy.strategy(intensity, config.params.epsilon);
        let wrap = |e: Error| Error::SweepJob {
            k,
            intensity,
            source: Box::new(e),
        };
        let traj = solve(landscape, strategy, &config.params, &numerics).map_err(wrap)?;
        let rows = config
            .observation_times
            .iter()
            .map(|&t| {
                Ok(SweepRow {
                    k,
                    s: landscape.s(),
                    intensity,
                    t,
                    population: traj.population_at(t)?,
                    annual_yield: if t >= 1.0 { Some(annual_yield(&traj, t)?) } else { None },
                    flux: traj.flux_at(t)?,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map_err(wrap)?;
        let summary = RunSummary {
            k,
            s: landscape.s(),
            intensity,
            max_balance_residual: traj.max_balance_residual(),
            min_density: traj.min_density(),
        };
        Ok((rows, summary))
    };

    let outputs: Vec<(Vec<SweepRow>, RunSummary)> = match config.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?
            .install(|| jobs.par_iter().map(run_job).collect::<Result<_>>())?,
        None => jobs.par_iter().map(run_job).collect::<Result<_>>()?,
    };

    let mut rows = Vec::with_capacity(outputs.len() * config.observation_times.len());
    let mut runs = Vec::with_capacity(outputs.len());
    for (r, summary) in outputs {
        rows.extend(r);
        runs.push(summary);
    }
    Ok(SweepResult {
        config: SweepConfig {
            numerics,
            ..config.clone()
        },
        landscapes: landscapes
            .iter()
            .map(|l| LandscapeInfo {
                s: l.s(),
                protected_count: l.protected_count(),
                digest: l.digest(),
            })
            .collect(),
        rows,
        runs,
    })
}

impl SweepResult {
    pub fn intensities(&self) -> &[f64] {
        &self.config.intensities
    }

    pub fn observation_times(&self) -> &[f64] {
        &self.config.observation_times
    }

    pub fn s_values(&self) -> Vec<f64> {
        self.landscapes.iter().map(|l| l.s as f64).collect()
    }

    fn time_index(&self, t: f64) -> Result<usize> {
        self.config
            .observation_times
            .iter()
            .position(|&x| (x - t).abs() <= 1e-9 * t.abs().max(1.0))
            .ok_or_else(|| Error::Domain(format!("t = {t} is not an observation time of this sweep")))
    }

    /// Values indexed `[landscape][intensity]` at observation time `t`.
    pub fn table(&self, q: Quantity, t: f64) -> Result<Vec<Vec<f64>>> {
        let ti = self.time_index(t)?;
        let (nt, ni) = (self.config.observation_times.len(), self.config.intensities.len());
        (0..self.landscapes.len())
            .map(|l| {
                (0..ni)
                    .map(|i| {
                        let row = &self.rows[(l * ni + i) * nt + ti];
                        row.get(q).ok_or_else(|| {
                            Error::Domain(format!("annual yield is undefined at t = {t}"))
                        })
                    })
                    .collect()
            })
            .collect()
    }

    /// Rank correlation between `s` and the quantity, one value per intensity.
    pub fn correlation_with_s(&self, q: Quantity, t: f64) -> Result<Vec<f64>> {
        let table = self.table(q, t)?;
        let s = self.s_values();
        (0..self.config.intensities.len())
            .map(|i| {
                let column: Vec<f64> = table.iter().map(|row| row[i]).collect();
                rank_correlation(&s, &column)
            })
            .collect()
    }

    /// Relative population and yield losses across the ensemble for every
    /// intensity and observation time.
    pub fn losses(&self) -> Result<Vec<LossRow>> {
        let mut out = Vec::new();
        for &t in &self.config.observation_times {
            let pop = self.table(Quantity::Population, t)?;
            let yld = if t >= 1.0 {
                Some(self.table(Quantity::AnnualYield, t)?)
            } else {
                None
            };
            for (i, &intensity) in self.config.intensities.iter().enumerate() {
                let column = |tab: &Vec<Vec<f64>>| tab.iter().map(|r| r[i]).collect::<Vec<_>>();
                out.push(LossRow {
                    intensity,
                    t,
                    population_loss: relative_loss(&column(&pop)).ok(),
                    yield_loss: yld.as_ref().and_then(|y| relative_loss(&column(y)).ok()),
                });
            }
        }
        Ok(out)
    }

    /// Writes `s,intensity,t,P,R,flux` with `#` metadata lines first.
    pub fn write_csv<W: Write>(&self, mut w: W, metadata: &[String]) -> io::Result<()> {
        self.write_csv_filtered(&mut w, metadata, None)
    }

    /// As [`SweepResult::write_csv`], restricted to one observation time.
    pub fn write_csv_at<W: Write>(&self, mut w: W, metadata: &[String], t: f64) -> io::Result<()> {
        self.write_csv_filtered(&mut w, metadata, Some(t))
    }

    fn write_csv_filtered<W: Write>(&self, w: &mut W, metadata: &[String], only: Option<f64>) -> io::Result<()> {
        for line in metadata {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "s,intensity,t,P,R,flux")?;
        for row in &self.rows {
            if only.is_some_and(|t| (row.t - t).abs() > 1e-9 * t.abs().max(1.0)) {
                continue;
            }
            writeln!(
                w,
                "{},{},{},{},{},{}",
                row.s,
                format_number(row.intensity),
                format_number(row.t),
                format_number(row.population),
                row.annual_yield.map(format_number).unwrap_or_default(),
                format_number(row.flux),
            )?;
        }
        Ok(())
    }

    /// Provenance lines describing the sweep.
    pub fn provenance(&self) -> Vec<String> {
        let c = &self.config;
        let p = &c.params;
        let n = &c.numerics;
        let mut lines = vec![
            format!("fragrd {}", env!("CARGO_PKG_VERSION")),
            format!("strategy = {}", c.strategy.name()),
            format!(
                "params: diffusion = {}, growth_rate = {}, carrying_capacity = {}, domain_side = {}, epsilon = {}",
                p.diffusion, p.growth_rate, p.carrying_capacity, p.domain_side, p.epsilon
            ),
            format!(
                "numerics: refine = {}, dt = {}, t_end = {}, record_every = {}, linear_tol = {:e}, linear_solver = {:?}",
                n.refine, n.dt, n.t_end, n.record_every, n.linear_tol, n.linear_solver
            ),
            format!(
                "intensities = [{}]",
                c.intensities.iter().map(|v| format_number(*v)).collect::<Vec<_>>().join(", ")
            ),
            format!(
                "observation_times = [{}]",
                c.observation_times.iter().map(|v| format_number(*v)).collect::<Vec<_>>().join(", ")
            ),
        ];
        for (k, l) in self.landscapes.iter().enumerate() {
            lines.push(format!(
                "landscape k = {}: s = {}, protected = {}, digest = {:016x}",
                k + 1,
                l.s,
                l.protected_count,
                l.digest
            ));
        }
        lines
    }
}

/// Decimal rendering with 12 significant digits and trailing zeros trimmed.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exponent = x.abs().log10().floor() as i32;
    if !(-6..=15).contains(&exponent) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - exponent).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// A landscape's points in the population-yield plane, ordered by intensity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrCurve {
    pub k: usize,
    pub s: u64,
    pub points: Vec<PrPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub intensity: f64,
    pub population: f64,
    pub annual_yield: f64,
}

impl PrCurve {
    /// Index of the yield-maximising intensity.
    pub fn peak_index(&self) -> usize {
        self.points
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.annual_yield.total_cmp(&b.1.annual_yield))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// Yield-increasing branch (up to and including the peak) and decreasing
    /// branch (from the peak on).
    pub fn branches(&self) -> (&[PrPoint], &[PrPoint]) {
        let p = self.peak_index();
        (&self.points[..=p], &self.points[p..])
    }
}

/// `(R(t), P(t))` curves, one per landscape.
pub fn pr_diagram(result: &SweepResult, t: f64) -> Result<Vec<PrCurve>> {
    let pop = result.table(Quantity::Population, t)?;
    let yld = result.table(Quantity::AnnualYield, t)?;
    Ok(result
        .landscapes
        .iter()
        .enumerate()
        .map(|(l, info)| PrCurve {
            k: l + 1,
            s: info.s,
            points: result
                .config
                .intensities
                .iter()
                .enumerate()
                .map(|(i, &intensity)| PrPoint {
                    intensity,
                    population: pop[l][i],
                    annual_yield: yld[l][i],
                })
                .collect(),
        })
        .collect())
}

/// Number of direction reversals of a sequence, ignoring steps smaller than
/// `tolerance` in absolute value.
pub fn direction_changes(values: &[f64], tolerance: f64) -> usize {
    let mut changes = 0;
    let mut last: Option<bool> = None;
    for w in values.windows(2) {
        let d = w[1] - w[0];
        if d.abs() <= tolerance {
            continue;
        }
        let up = d > 0.0;
        if last.is_some_and(|l| l != up) {
            changes += 1;
        }
        last = Some(up);
    }
    changes
}
