use fragrd_core::landscape::{build_ensemble_for_targets, Landscape};
use fragrd_core::observables::relative_loss;
use fragrd_core::sweep::{
    direction_changes, format_number, linear_grid, pr_diagram, run_sweep, EnsembleSpec, Quantity,
};
use fragrd_core::{Error, NumericsConfig, StrategyKind, SweepConfig};

fn ensemble() -> Vec<Landscape> {
    build_ensemble_for_targets(10, 0.2, &[2, 12, 26], 5).unwrap()
}

fn config(kind: StrategyKind, intensities: Vec<f64>) -> SweepConfig {
    let mut c = SweepConfig::new(kind, intensities);
    c.numerics = NumericsConfig {
        refine: 2,
        ..NumericsConfig::default()
    };
    c.observation_times = vec![0.5, 2.0, 3.0];
    c
}

fn csv_of(result: &fragrd_core::SweepResult) -> Vec<u8> {
    let mut out = Vec::new();
    result.write_csv(&mut out, &result.provenance()).unwrap();
    out
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let landscapes = ensemble();
    let mut c = config(StrategyKind::QuasiConstantYield, linear_grid(600.0, 5));
    c.threads = Some(1);
    let one = run_sweep(&c, &landscapes).unwrap();
    c.threads = Some(3);
    let three = run_sweep(&c, &landscapes).unwrap();
    assert_eq!(one.rows, three.rows);
    assert_eq!(one.runs, three.runs);
    c.threads = None;
    let default = run_sweep(&c, &landscapes).unwrap();
    assert_eq!(csv_of(&default), csv_of(&one));
}

#[test]
fn zero_intensity_leaves_capacity() {
    let landscapes = ensemble();
    for kind in [StrategyKind::QuasiConstantYield, StrategyKind::Proportional] {
        let result = run_sweep(&config(kind, vec![0.0]), &landscapes).unwrap();
        let capacity = result.config.params.capacity_population();
        assert_eq!(result.rows.len(), landscapes.len() * 3);
        for row in &result.rows {
            assert!((row.population - capacity).abs() <= 1e-10 * capacity);
            assert_eq!(row.annual_yield, if row.t >= 1.0 { Some(0.0) } else { None });
        }
        for loss in result.losses().unwrap() {
            assert!(loss.population_loss.unwrap() < 1e-8);
            assert_eq!(loss.yield_loss, None);
        }
        for curve in pr_diagram(&result, 2.0).unwrap() {
            assert_eq!(curve.points[0].annual_yield, 0.0);
        }
    }
}

#[test]
fn table_layout_and_losses_are_consistent() {
    let landscapes = ensemble();
    let result = run_sweep(&config(StrategyKind::Proportional, linear_grid(1.5, 4)), &landscapes).unwrap();
    assert_eq!(result.rows.len(), 3 * 4 * 3);
    let pop = result.table(Quantity::Population, 3.0).unwrap();
    let losses = result.losses().unwrap();
    for (i, &e) in result.intensities().iter().enumerate() {
        let column: Vec<f64> = pop.iter().map(|r| r[i]).collect();
        let row = losses.iter().find(|l| l.intensity == e && l.t == 3.0).unwrap();
        assert_eq!(row.population_loss, relative_loss(&column).ok());
        for (l, values) in pop.iter().enumerate() {
            let direct = result
                .rows
                .iter()
                .find(|r| r.k == l + 1 && r.intensity == e && r.t == 3.0)
                .unwrap();
            assert_eq!(values[i], direct.population);
        }
    }
    assert!(result.table(Quantity::AnnualYield, 0.5).is_err());
    assert!(result.table(Quantity::Population, 4.0).is_err());
    for run in &result.runs {
        assert!(run.min_density >= 0.0);
    }
}

#[test]
fn population_falls_along_the_grid() {
    let landscapes = ensemble();
    let result = run_sweep(&config(StrategyKind::QuasiConstantYield, linear_grid(700.0, 8)), &landscapes).unwrap();
    for curve in pr_diagram(&result, 3.0).unwrap() {
        let p: Vec<f64> = curve.points.iter().map(|x| x.population).collect();
        assert!(p.windows(2).all(|w| w[1] <= w[0]), "{p:?}");
        let (rising, falling) = curve.branches();
        assert_eq!(rising.last(), falling.first());
    }
}

#[test]
fn csv_layout() {
    let landscapes = ensemble();
    let result = run_sweep(&config(StrategyKind::Proportional, vec![0.0, 0.5]), &landscapes).unwrap();
    let text = String::from_utf8(csv_of(&result)).unwrap();
    let mut lines = text.lines().skip_while(|l| l.starts_with('#'));
    assert_eq!(lines.next(), Some("s,intensity,t,P,R,flux"));
    let data: Vec<&str> = lines.collect();
    assert_eq!(data.len(), result.rows.len());
    assert!(data[0].starts_with(&format!("{},0,0.5,90000000,,", landscapes[0].s())));
    let mut at = Vec::new();
    result.write_csv_at(&mut at, &[], 2.0).unwrap();
    assert_eq!(String::from_utf8(at).unwrap().lines().count(), 1 + 3 * 2);
    assert_eq!(csv_of(&result), csv_of(&result));
}

#[test]
fn failing_job_is_identified() {
    let landscapes = vec![Landscape::with_rectangle(10, 2, 2, 2, 2).unwrap()];
    let mut c = config(StrategyKind::QuasiConstantYield, vec![0.0, 5000.0]);
    c.numerics.dt = 0.5;
    c.observation_times = vec![1.0];
    match run_sweep(&c, &landscapes).unwrap_err() {
        Error::SweepJob { k, intensity, source } => {
            assert_eq!((k, intensity), (1, 5000.0));
            assert!(source.is_numerical());
        }
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn invalid_sweeps_rejected() {
    let landscapes = ensemble();
    for intensities in [vec![], vec![1.0, 0.5], vec![-1.0]] {
        let c = config(StrategyKind::Proportional, intensities);
        assert!(matches!(run_sweep(&c, &landscapes), Err(Error::Config(_))));
    }
    let mixed = vec![landscapes[0].clone(), Landscape::fully_harvested(10)];
    assert!(run_sweep(&config(StrategyKind::Proportional, vec![0.0]), &mixed).is_err());
    let mut c = config(StrategyKind::Proportional, vec![0.0]);
    c.observation_times = vec![2.0, 1.0];
    assert!(c.validate().is_err());
}

#[test]
fn ensemble_specs() {
    let spec = EnsembleSpec::Arithmetic {
        n: 10,
        fraction: 0.2,
        s_start: 4,
        s_step: 4,
        count: 3,
        master_seed: 7,
    };
    let built = spec.build().unwrap();
    assert_eq!(built.iter().map(|l| l.s()).collect::<Vec<_>>(), vec![4, 8, 12]);
    assert!(matches!(EnsembleSpec::desk_scale(1), EnsembleSpec::Targets { ref targets, .. } if targets.len() == 8));
}

#[test]
fn number_format() {
    assert_eq!(format_number(90_000_000.0), "90000000");
    assert_eq!(format_number(0.1 + 0.2), "0.3");
    assert_eq!(format_number(-2.5), "-2.5");
    assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
    assert_eq!(format_number(1e-9), "1.00000000000e-9");
    assert_eq!(direction_changes(&[0.0, 1.0, 2.0, 1.0, 0.0], 0.0), 1);
    assert_eq!(direction_changes(&[0.0, 1.0, 0.5, 2.0], 0.0), 2);
}
