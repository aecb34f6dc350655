//! Built-in analytic checks for `fragrd verify`.

use fragrd_core::landscape::{aggregation_index_with, Adjacency, Landscape, PROTECTED};
use fragrd_core::observables::annual_yield;
use fragrd_core::solver::{solve, Field, Simulation};
use fragrd_core::{ModelParams, NumericsConfig, Result, StrategyKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct Options {
    /// Time step of every time-dependent check.
    pub dt: f64,
    /// Adjacency handed to the aggregation index (the oracle is always bounded).
    pub adjacency: Adjacency,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            dt: NumericsConfig::default().dt,
            adjacency: Adjacency::Bounded,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn from(name: &'static str, outcome: Result<(bool, String)>) -> Self {
        match outcome {
            Ok((passed, detail)) => Check { name, passed, detail },
            Err(e) => Check {
                name,
                passed: false,
                detail: format!("error: {e}"),
            },
        }
    }
}

pub fn run_all(opts: &Options) -> Vec<Check> {
    vec![
        Check::from("uniform equilibrium", uniform_equilibrium(opts)),
        Check::from("pure-diffusion conservation", pure_diffusion(opts)),
        Check::from("uniform proportional steady state", proportional_steady_state(opts)),
        Check::from("constant-harvest yield identity", constant_harvest_identity(opts)),
        Check::from("aggregation index oracle", aggregation_oracle(opts)),
        Check::from("temporal accuracy", temporal_accuracy(opts)),
    ]
}

fn numerics(opts: &Options, refine: usize, t_end: f64) -> NumericsConfig {
    NumericsConfig {
        refine,
        dt: opts.dt,
        t_end,
        record_every: 1,
        ..NumericsConfig::default()
    }
}

/// A 10x25 reserve inside the default 50x50 lattice.
fn block_reserve() -> Result<Landscape> {
    Landscape::with_rectangle(50, 20, 12, 10, 25)
}

fn uniform_equilibrium(opts: &Options) -> Result<(bool, String)> {
    let params = ModelParams::default();
    let landscape = Landscape::with_rectangle(10, 3, 3, 2, 3)?;
    let capacity = params.capacity_population();
    let mut worst: f64 = 0.0;
    for kind in [StrategyKind::QuasiConstantYield, StrategyKind::Proportional] {
        let traj = solve(&landscape, kind.strategy(0.0, params.epsilon), &params, &numerics(opts, 2, 5.0))?;
        for p in traj.population() {
            worst = worst.max((p - capacity).abs() / capacity);
        }
    }
    Ok((worst < 1e-10, format!("max |P - KL^2| / KL^2 = {worst:.3e} (limit 1e-10)")))
}

fn pure_diffusion(opts: &Options) -> Result<(bool, String)> {
    let params = ModelParams {
        growth_rate: 0.0,
        ..ModelParams::default()
    };
    let landscape = Landscape::with_rectangle(10, 2, 2, 4, 3)?;
    let num = numerics(opts, 4, 500.0 * opts.dt);
    let m = landscape.n() * num.refine;
    let h = params.domain_side / m as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let values: Vec<f64> = (0..m * m).map(|_| rng.gen_range(100.0..1500.0)).collect();
    let initial = Field::new(m, h, values)?;
    let p0 = initial.integral();
    let traj = Simulation::new(&landscape, StrategyKind::Proportional.strategy(0.0, params.epsilon), params, num)
        .with_initial_field(initial)
        .run()?;
    let worst = traj
        .population()
        .iter()
        .map(|p| (p - p0).abs() / p0)
        .fold(0.0, f64::max);
    Ok((worst < 1e-8, format!("max |P(t) - P(0)| / P(0) = {worst:.3e} over 500 steps (limit 1e-8)")))
}

fn proportional_steady_state(opts: &Options) -> Result<(bool, String)> {
    let params = ModelParams::default();
    let effort = 0.5;
    let expected = params.carrying_capacity * (1.0 - effort / params.growth_rate);
    let landscape = Landscape::fully_harvested(5);
    let traj = solve(
        &landscape,
        StrategyKind::Proportional.strategy(effort, params.epsilon),
        &params,
        &numerics(opts, 2, 20.0),
    )?;
    let density = traj.population().last().copied().unwrap_or(f64::NAN) / params.domain_side.powi(2);
    let rel = (density - expected).abs() / expected;
    Ok((rel < 1e-3, format!("P(20)/L^2 = {density:.6} vs {expected} (relative error {rel:.2e}, limit 1e-3)")))
}

fn constant_harvest_identity(opts: &Options) -> Result<(bool, String)> {
    let params = ModelParams::default();
    let quota = 100.0;
    let landscape = block_reserve()?;
    let traj = solve(
        &landscape,
        StrategyKind::QuasiConstantYield.strategy(quota, params.epsilon),
        &params,
        &numerics(opts, 2, 5.0),
    )?;
    if traj.min_density() <= params.epsilon {
        return Ok((
            false,
            format!("density fell to {:.3} <= epsilon; identity does not apply", traj.min_density()),
        ));
    }
    let harvested_area = landscape.harvested_fraction() * params.domain_side.powi(2);
    let expected = quota * harvested_area;
    let r5 = annual_yield(&traj, 5.0)?;
    let rel = (r5 - expected).abs() / expected;
    Ok((rel < 1e-8, format!("R(5) = {r5:.6} vs {expected} (relative error {rel:.2e}, limit 1e-8)")))
}

/// Protected pairs at Manhattan distance one, by enumerating all pairs.
fn pair_oracle(n: usize, cells: &[u8]) -> u64 {
    let protected: Vec<(i64, i64)> = (0..n * n)
        .filter(|&i| cells[i] == PROTECTED)
        .map(|i| ((i / n) as i64, (i % n) as i64))
        .collect();
    let mut count = 0;
    for a in 0..protected.len() {
        for b in a + 1..protected.len() {
            let (p, q) = (protected[a], protected[b]);
            if (p.0 - q.0).abs() + (p.1 - q.1).abs() == 1 {
                count += 1;
            }
        }
    }
    count
}

fn aggregation_oracle(opts: &Options) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases = 200;
    let mut mismatches = 0;
    for _ in 0..cases {
        let n = rng.gen_range(5..=30);
        let fraction = rng.gen_range(0.05..0.5);
        let cells: Vec<u8> = (0..n * n).map(|_| u8::from(!rng.gen_bool(fraction))).collect();
        if aggregation_index_with(n, n, &cells, opts.adjacency)? != pair_oracle(n, &cells) {
            mismatches += 1;
        }
    }
    Ok((mismatches == 0, format!("{mismatches} of {cases} random masks disagree")))
}

fn temporal_accuracy(opts: &Options) -> Result<(bool, String)> {
    let params = ModelParams::default();
    let landscape = block_reserve()?;
    let strategy = StrategyKind::QuasiConstantYield.strategy(300.0, params.epsilon);
    let coarse = numerics(opts, 4, 5.0);
    let fine = NumericsConfig {
        dt: opts.dt / 2.0,
        ..coarse
    };
    let p = solve(&landscape, strategy, &params, &coarse)?.population_at(5.0)?;
    let p_half = solve(&landscape, strategy, &params, &fine)?.population_at(5.0)?;
    let rel = (p - p_half).abs() / p_half;
    Ok((
        rel < 1e-3,
        format!("P(5) changes by {rel:.2e} when dt = {} is halved (limit 1e-3)", opts.dt),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_counts_pairs() {
        #[rustfmt::skip]
        let cells = [
            0, 0, 1,
            0, 1, 1,
            1, 1, 0,
        ];
        assert_eq!(pair_oracle(3, &cells), 2);
    }

    #[test]
    fn toroidal_adjacency_is_caught() {
        let opts = Options {
            adjacency: Adjacency::Toroidal,
            ..Options::default()
        };
        let (passed, _) = aggregation_oracle(&opts).unwrap();
        assert!(!passed);
        assert!(aggregation_oracle(&Options::default()).unwrap().0);
    }
}
