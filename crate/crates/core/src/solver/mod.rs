//! Semi-implicit integration of
//! `du/dt = D Lap u + r u (1 - u/K) - Y(x, u)` on a square domain with
//! reflecting boundaries.
//!
//! The grid is cell-centred: an `m x m` array of nodes with spacing
//! `h = L / m`, node `(i, j)` sitting at `((j + 1/2) h, (i + 1/2) h)`.
//! Mirror ghost values make the discrete normal derivative vanish on the
//! boundary, and with this placement each lattice cell of the landscape maps
//! onto an exact `refine x refine` block of nodes.
//!
//! Each step treats diffusion implicitly and growth/removal explicitly:
//! `(I - dt D Lap_h) u_{n+1} = u_n + dt (f(u_n) - Y(u_n))`.

mod diffusion;

use serde::{Deserialize, Serialize};

pub use diffusion::{neumann_laplacian_into, relative_residual, DiffusionSolver, LinearSolverKind};

use crate::error::{Error, Result};
use crate::harvest::{HarvestStrategy, RemovalTerm, DEFAULT_EPSILON};
use crate::landscape::Landscape;
use crate::observables::{InterfaceEdges, Trajectory};

/// Physical and biological constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Diffusion coefficient D, km²/year.
    pub diffusion: f64,
    /// Intrinsic growth rate r, 1/year.
    pub growth_rate: f64,
    /// Carrying capacity K, individuals/km².
    pub carrying_capacity: f64,
    /// Side L of the square domain, km.
    pub domain_side: f64,
    /// Harvesting threshold epsilon, individuals/km².
    pub epsilon: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            diffusion: 50.0,
            growth_rate: 1.0,
            carrying_capacity: 1000.0,
            domain_side: 300.0,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl ModelParams {
    /// `r = 0` is accepted so pure-diffusion runs can be expressed.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("diffusion", self.diffusion),
            ("carrying_capacity", self.carrying_capacity),
            ("domain_side", self.domain_side),
            ("epsilon", self.epsilon),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.growth_rate.is_finite() && self.growth_rate >= 0.0) {
            return Err(Error::Config(format!(
                "growth_rate must be nonnegative, got {}",
                self.growth_rate
            )));
        }
        Ok(())
    }

    /// `K * L^2`, the total population at carrying capacity.
    pub fn capacity_population(&self) -> f64 {
        self.carrying_capacity * self.domain_side * self.domain_side
    }
}

/// Discretisation controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsConfig {
    /// PDE nodes per lattice cell along each axis.
    pub refine: usize,
    /// Time step, years.
    pub dt: f64,
    /// Final time, years.
    pub t_end: f64,
    /// Record observables every this many steps.
    pub record_every: usize,
    /// Relative residual tolerance of the implicit diffusion solve.
    pub linear_tol: f64,
    pub linear_solver: LinearSolverKind,
    /// Keep a copy of the field at every record.
    pub keep_snapshots: bool,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            refine: 4,
            dt: 0.01,
            t_end: 5.0,
            record_every: 10,
            linear_tol: 1e-10,
            linear_solver: LinearSolverKind::Direct,
            keep_snapshots: false,
        }
    }
}

impl NumericsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.refine == 0 {
            return Err(Error::Config("refine must be at least 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        for (name, value) in [("dt", self.dt), ("t_end", self.t_end), ("linear_tol", self.linear_tol)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {value}")));
            }
        }
        self.step_count().map(|_| ())
    }

    /// Number of steps to reach `t_end`; `t_end` must be a whole number of steps.
    pub fn step_count(&self) -> Result<usize> {
        let steps = (self.t_end / self.dt).round();
        if steps < 1.0 || (steps * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(1.0) {
            return Err(Error::Config(format!(
                "t_end = {} is not a whole number of steps of dt = {}",
                self.t_end, self.dt
            )));
        }
        Ok(steps as usize)
    }

    /// Step index of time `t`, if `t` falls on a step.
    pub fn step_of(&self, t: f64) -> Option<usize> {
        let k = (t / self.dt).round();
        ((k * self.dt - t).abs() <= 1e-9 * t.abs().max(1.0) && k >= 0.0).then_some(k as usize)
    }
}

/// Population density on the PDE grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    m: usize,
    h: f64,
    values: Vec<f64>,
}

impl Field {
    pub fn new(m: usize, h: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != m * m {
            return Err(Error::Domain(format!(
                "field of side {m} needs {} values, got {}",
                m * m,
                values.len()
            )));
        }
        Ok(Field { m, h, values })
    }

    pub fn uniform(m: usize, h: f64, value: f64) -> Self {
        Field {
            m,
            h,
            values: vec![value; m * m],
        }
    }

    /// Samples `f(x1, x2)` at the node centres.
    pub fn from_fn(m: usize, h: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                values.push(f((j as f64 + 0.5) * h, (i as f64 + 0.5) * h));
            }
        }
        Field { m, h, values }
    }

    pub fn side(&self) -> usize {
        self.m
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.m + j]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Midpoint-rule integral `h^2 * sum(u)`.
    pub fn integral(&self) -> f64 {
        self.h * self.h * self.values.iter().sum::<f64>()
    }
}

/// The carrying-capacity initial condition on the grid for an `n x n` lattice.
pub fn initial_field(params: &ModelParams, numerics: &NumericsConfig, lattice_side: usize) -> Field {
    let m = lattice_side * numerics.refine;
    Field::uniform(m, params.domain_side / m as f64, params.carrying_capacity)
}

/// Discrete Laplacian with reflecting boundaries (individuals/km⁴).
pub fn laplacian(field: &Field) -> Vec<f64> {
    let mut out = vec![0.0; field.values.len()];
    neumann_laplacian_into(field.m, field.h, &field.values, &mut out);
    out
}

/// Quantities integrated over one step, all evaluated at the pre-step state
/// except `population_after`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub population_before: f64,
    pub population_after: f64,
    /// `int r u (1 - u/K)`, individuals/year.
    pub growth: f64,
    /// `int Y`, individuals/year.
    pub removal: f64,
    pub dt: f64,
}

impl StepReport {
    /// `|dP/dt - growth + removal|`, individuals/year.
    pub fn balance_residual(&self) -> f64 {
        ((self.population_after - self.population_before) / self.dt - self.growth + self.removal).abs()
    }
}

/// Advances fields by one IMEX step for a fixed grid, parameter set and time step.
pub struct Stepper {
    params: ModelParams,
    dt: f64,
    m: usize,
    h: f64,
    diffusion: DiffusionSolver,
}

/// Densities more negative than this fraction of K are treated as a scheme failure.
const UNDERSHOOT_TOLERANCE: f64 = 1e-12;

impl Stepper {
    pub fn new(params: &ModelParams, numerics: &NumericsConfig, m: usize) -> Result<Self> {
        params.validate()?;
        numerics.validate()?;
        let h = params.domain_side / m as f64;
        let diffusion = DiffusionSolver::new(
            numerics.linear_solver,
            m,
            h,
            params.diffusion * numerics.dt,
            numerics.linear_tol,
        );
        Ok(Stepper {
            params: *params,
            dt: numerics.dt,
            m,
            h,
            diffusion,
        })
    }

    pub fn side(&self) -> usize {
        self.m
    }

    /// One step from time `t`.
    pub fn step(&self, field: &Field, removal: &RemovalTerm, t: f64) -> Result<(Field, StepReport)> {
        if field.m != self.m || removal.indicator().len() != field.values.len() {
            return Err(Error::Domain(format!(
                "grid mismatch: stepper side {}, field side {}, indicator length {}",
                self.m,
                field.m,
                removal.indicator().len()
            )));
        }
        let (r, k) = (self.params.growth_rate, self.params.carrying_capacity);
        let area = self.h * self.h;
        let mut next = vec![0.0; field.values.len()];
        removal.rate_into(&field.values, &mut next);
        let (mut growth, mut removed, mut population) = (0.0, 0.0, 0.0);
        for (x, &u) in next.iter_mut().zip(&field.values) {
            let g = r * u * (1.0 - u / k);
            let y = *x;
            growth += g;
            removed += y;
            population += u;
            *x = u + self.dt * (g - y);
        }
        self.diffusion.solve(&mut next)?;

        let floor = -UNDERSHOOT_TOLERANCE * k;
        let mut population_after = 0.0;
        for (node, v) in next.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { node, t: t + self.dt });
            }
            if *v < 0.0 {
                if *v < floor {
                    return Err(Error::Undershoot {
                        node,
                        value: *v,
                        t: t + self.dt,
                    });
                }
                *v = 0.0;
            }
            population_after += *v;
        }
        let report = StepReport {
            population_before: population * area,
            population_after: population_after * area,
            growth: growth * area,
            removal: removed * area,
            dt: self.dt,
        };
        Ok((
            Field {
                m: self.m,
                h: self.h,
                values: next,
            },
            report,
        ))
    }
}

/// Convenience single step; builds the linear solver on every call.
pub fn step(
    field: &Field,
    params: &ModelParams,
    numerics: &NumericsConfig,
    removal: &RemovalTerm,
    t: f64,
) -> Result<Field> {
    Stepper::new(params, numerics, field.m)?
        .step(field, removal, t)
        .map(|(f, _)| f)
}

/// A full run on one landscape under one strategy.
pub struct Simulation<'a> {
    landscape: &'a Landscape,
    strategy: HarvestStrategy,
    params: ModelParams,
    numerics: NumericsConfig,
    initial: Option<Field>,
}

impl<'a> Simulation<'a> {
    pub fn new(
        landscape: &'a Landscape,
        strategy: HarvestStrategy,
        params: ModelParams,
        numerics: NumericsConfig,
    ) -> Self {
        Simulation {
            landscape,
            strategy,
            params,
            numerics,
            initial: None,
        }
    }

    /// Replaces the carrying-capacity start.
    pub fn with_initial_field(mut self, field: Field) -> Self {
        self.initial = Some(field);
        self
    }

    pub fn run(self) -> Result<Trajectory> {
        self.run_with(|_, _| {})
    }

    /// Runs to `t_end`, calling `observe(step_index, report)` after every step.
    pub fn run_with(self, mut observe: impl FnMut(usize, &StepReport)) -> Result<Trajectory> {
        self.params.validate()?;
        self.numerics.validate()?;
        self.strategy.validate()?;
        let numerics = &self.numerics;
        let n = self.landscape.n();
        let m = n * numerics.refine;
        let field = match self.initial {
            Some(f) => {
                if f.m != m {
                    return Err(Error::Domain(format!(
                        "initial field side {} does not match grid side {m}",
                        f.m
                    )));
                }
                f
            }
            None => initial_field(&self.params, numerics, n),
        };
        let stepper = Stepper::new(&self.params, numerics, m)?;
        let removal = RemovalTerm::from_landscape(self.strategy, self.landscape, numerics.refine);
        let edges = InterfaceEdges::new(self.landscape, numerics.refine);
        let steps = numerics.step_count()?;

        let mut trajectory = Trajectory::new(self.landscape, self.strategy, self.params, *numerics);
        let area = field.h * field.h;
        let removal_integral = |f: &Field| removal.rate(&f.values).iter().sum::<f64>() * area;
        let record = |traj: &mut Trajectory, t: f64, f: &Field, yield_so_far: f64| {
            let harvested: f64 = f
                .values
                .iter()
                .zip(removal.indicator())
                .map(|(u, c)| u * c)
                .sum::<f64>()
                * area;
            traj.push_record(
                t,
                f.integral(),
                harvested,
                yield_so_far,
                edges.flux(f.values(), self.params.diffusion),
                numerics.keep_snapshots.then(|| f.clone()),
            );
        };

        let mut field = field;
        let mut rate_now = removal_integral(&field);
        let mut yield_so_far = 0.0;
        trajectory.note_min_density(field.min());
        record(&mut trajectory, 0.0, &field, 0.0);
        for k in 0..steps {
            let t = k as f64 * numerics.dt;
            let (next, report) = stepper
                .step(&field, &removal, t)
                .map_err(|e| Error::AtTime { t, source: Box::new(e) })?;
            let rate_next = removal_integral(&next);
            yield_so_far += 0.5 * numerics.dt * (rate_now + rate_next);
            rate_now = rate_next;
            field = next;
            trajectory.note_balance_residual(report.balance_residual());
            trajectory.note_min_density(field.min());
            observe(k, &report);
            if (k + 1) % numerics.record_every == 0 || k + 1 == steps {
                record(&mut trajectory, (k + 1) as f64 * numerics.dt, &field, yield_so_far);
            }
        }
        trajectory.set_final_field(field);
        Ok(trajectory)
    }
}

/// Runs from the carrying-capacity state to `numerics.t_end`.
pub fn solve(
    landscape: &Landscape,
    strategy: HarvestStrategy,
    params: &ModelParams,
    numerics: &NumericsConfig,
) -> Result<Trajectory> {
    Simulation::new(landscape, strategy, *params, *numerics).run()
}
