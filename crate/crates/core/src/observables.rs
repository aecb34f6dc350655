//! Diagnostics: total population, annual yield, relative losses and the
//! protected-to-harvested boundary flux.

use crate::error::{Error, Result};
use crate::harvest::HarvestStrategy;
use crate::landscape::Landscape;
use crate::solver::{Field, ModelParams, NumericsConfig};

/// Time series recorded during one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    population: Vec<f64>,
    harvested_population: Vec<f64>,
    /// Running `int_0^t int Y`, trapezoidal in time over every solver step.
    yield_integral: Vec<f64>,
    flux: Vec<f64>,
    snapshots: Vec<Field>,
    final_field: Option<Field>,
    min_density: f64,
    max_balance_residual: f64,
    pub landscape_s: u64,
    pub landscape_digest: u64,
    pub strategy: HarvestStrategy,
    pub params: ModelParams,
    pub numerics: NumericsConfig,
}

impl Trajectory {
    pub fn new(
        landscape: &Landscape,
        strategy: HarvestStrategy,
        params: ModelParams,
        numerics: NumericsConfig,
    ) -> Self {
        Trajectory {
            times: Vec::new(),
            population: Vec::new(),
            harvested_population: Vec::new(),
            yield_integral: Vec::new(),
            flux: Vec::new(),
            snapshots: Vec::new(),
            final_field: None,
            min_density: f64::INFINITY,
            max_balance_residual: 0.0,
            landscape_s: landscape.s(),
            landscape_digest: landscape.digest(),
            strategy,
            params,
            numerics,
        }
    }

    pub(crate) fn push_record(
        &mut self,
        t: f64,
        population: f64,
        harvested_population: f64,
        yield_integral: f64,
        flux: f64,
        snapshot: Option<Field>,
    ) {
        debug_assert!(self.times.last().is_none_or(|&last| t > last));
        self.times.push(t);
        self.population.push(population);
        self.harvested_population.push(harvested_population);
        self.yield_integral.push(yield_integral);
        self.flux.push(flux);
        self.snapshots.extend(snapshot);
    }

    pub(crate) fn note_min_density(&mut self, v: f64) {
        self.min_density = self.min_density.min(v);
    }

    pub(crate) fn note_balance_residual(&mut self, v: f64) {
        self.max_balance_residual = self.max_balance_residual.max(v);
    }

    pub(crate) fn set_final_field(&mut self, f: Field) {
        self.final_field = Some(f);
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `P(t)` at each record, individuals.
    pub fn population(&self) -> &[f64] {
        &self.population
    }

    /// `int chi u` at each record, individuals.
    pub fn harvested_population(&self) -> &[f64] {
        &self.harvested_population
    }

    pub fn yield_integral(&self) -> &[f64] {
        &self.yield_integral
    }

    /// Protected-to-harvested flux at each record, individuals/year.
    pub fn flux(&self) -> &[f64] {
        &self.flux
    }

    /// Fields at each record; empty unless snapshots were requested.
    pub fn snapshots(&self) -> &[Field] {
        &self.snapshots
    }

    pub fn final_field(&self) -> Option<&Field> {
        self.final_field.as_ref()
    }

    /// Smallest nodal density seen at any step, including the start.
    pub fn min_density(&self) -> f64 {
        self.min_density
    }

    /// Largest per-step `|dP/dt - int growth + int Y|`, individuals/year.
    pub fn max_balance_residual(&self) -> f64 {
        self.max_balance_residual
    }

    pub fn end_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    fn interpolate(&self, series: &[f64], t: f64) -> Result<f64> {
        let last = self.end_time();
        let slack = 1e-9 * last.max(1.0);
        if self.times.is_empty() || t < -slack || t > last + slack {
            return Err(Error::Domain(format!(
                "t = {t} lies outside the recorded range [0, {last}]"
            )));
        }
        let t = t.clamp(0.0, last);
        let hi = self.times.partition_point(|&x| x < t - slack).min(self.times.len() - 1);
        if (self.times[hi] - t).abs() <= slack || hi == 0 {
            return Ok(series[hi]);
        }
        let (t0, t1) = (self.times[hi - 1], self.times[hi]);
        let w = (t - t0) / (t1 - t0);
        Ok(series[hi - 1] * (1.0 - w) + series[hi] * w)
    }

    /// `P(t)`, linearly interpolated between records.
    pub fn population_at(&self, t: f64) -> Result<f64> {
        self.interpolate(&self.population, t)
    }

    pub fn flux_at(&self, t: f64) -> Result<f64> {
        self.interpolate(&self.flux, t)
    }

    /// `int_{t0}^{t1} int Y`, individuals.
    pub fn yield_between(&self, t0: f64, t1: f64) -> Result<f64> {
        Ok(self.interpolate(&self.yield_integral, t1)? - self.interpolate(&self.yield_integral, t0)?)
    }
}

/// `R(t)`: removal integrated over the year preceding `t`, individuals/year.
pub fn annual_yield(trajectory: &Trajectory, t: f64) -> Result<f64> {
    if t < 1.0 - 1e-12 {
        return Err(Error::Domain(format!("annual yield needs t >= 1, got {t}")));
    }
    trajectory.yield_between(t - 1.0, t)
}

/// `P = h^2 * sum(u)`, individuals.
pub fn total_population(u: &Field) -> f64 {
    u.integral()
}

/// `100 * (max - min) / max`.
pub fn relative_loss(values: &[f64]) -> Result<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if values.is_empty() || !(max > 0.0) {
        return Err(Error::Domain(
            "relative loss needs a nonempty set with a positive maximum".into(),
        ));
    }
    Ok(100.0 * (max - min) / max)
}

/// Grid edges separating a protected node from a harvested one.
#[derive(Debug, Clone)]
pub struct InterfaceEdges {
    /// (protected node, harvested node)
    pairs: Vec<(usize, usize)>,
    grid_side: usize,
}

impl InterfaceEdges {
    /// Mixed edges of the grid obtained by refining each lattice cell `refine` times.
    pub fn new(landscape: &Landscape, refine: usize) -> Self {
        let n = landscape.n();
        let m = n * refine;
        let protected = |i: usize, j: usize| landscape.is_protected(i / refine, j / refine);
        let mut pairs = Vec::new();
        // Only lattice-cell boundaries can separate differing nodes.
        for i in 0..m {
            for j in 0..m {
                if j + 1 < m && (j + 1) % refine == 0 {
                    let (a, b) = (protected(i, j), protected(i, j + 1));
                    if a != b {
                        let (p, q) = (i * m + j, i * m + j + 1);
                        pairs.push(if a { (p, q) } else { (q, p) });
                    }
                }
                if i + 1 < m && (i + 1) % refine == 0 {
                    let (a, b) = (protected(i, j), protected(i + 1, j));
                    if a != b {
                        let (p, q) = (i * m + j, (i + 1) * m + j);
                        pairs.push(if a { (p, q) } else { (q, p) });
                    }
                }
            }
        }
        InterfaceEdges {
            pairs,
            grid_side: m,
        }
    }

    pub fn count(&self) -> usize {
        self.pairs.len()
    }

    /// Length of the reserve boundary for node spacing `h`, km.
    pub fn length(&self, h: f64) -> f64 {
        h * self.pairs.len() as f64
    }

    /// `sum over edges of D (u_protected - u_harvested) / h * h`, individuals/year.
    pub fn flux(&self, u: &[f64], diffusion: f64) -> f64 {
        debug_assert_eq!(u.len(), self.grid_side * self.grid_side);
        diffusion * self.pairs.iter().map(|&(p, q)| u[p] - u[q]).sum::<f64>()
    }
}

/// Net diffusive flux from protected into harvested regions, individuals/year.
pub fn boundary_flux(u: &Field, landscape: &Landscape, diffusion: f64) -> Result<f64> {
    let (m, n) = (u.side(), landscape.n());
    if n == 0 || m % n != 0 {
        return Err(Error::Domain(format!(
            "field side {m} is not a multiple of lattice side {n}"
        )));
    }
    Ok(InterfaceEdges::new(landscape, m / n).flux(u.values(), diffusion))
}

/// Spearman rank correlation with average ranks for ties.
///
/// A constant sequence has no rank variation; its correlation with anything
/// is reported as 0.
pub fn rank_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Domain(format!(
            "rank correlation needs two equal-length sequences of at least 2 values, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::Domain("rank correlation of NaN values".into()));
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let mean = (x.len() as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mean) * (b - mean);
        sxx += (a - mean) * (a - mean);
        syy += (b - mean) * (b - mean);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}
