use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use fragrd_core::harvest::RemovalTerm;
use fragrd_core::landscape::{aggregation_index, generate};
use fragrd_core::solver::{initial_field, DiffusionSolver, Stepper};
use fragrd_core::{GeneratorConfig, LinearSolverKind, ModelParams, NumericsConfig, StrategyKind};

fn solver(c: &mut Criterion) {
    let params = ModelParams::default();
    let numerics = NumericsConfig::default();
    let landscape = generate(&GeneratorConfig::new(50, 0.1, 94, 1)).unwrap();
    let m = 50 * numerics.refine;
    let stepper = Stepper::new(&params, &numerics, m).unwrap();
    let removal = RemovalTerm::from_landscape(
        StrategyKind::QuasiConstantYield.strategy(300.0, params.epsilon),
        &landscape,
        numerics.refine,
    );
    let field = initial_field(&params, &numerics, 50);
    c.bench_function("imex_step_200x200", |b| {
        b.iter(|| stepper.step(black_box(&field), &removal, 0.0).unwrap())
    });

    let h = params.domain_side / m as f64;
    let cdt = params.diffusion * numerics.dt;
    let rhs: Vec<f64> = (0..m * m).map(|i| 1000.0 + (i % 37) as f64).collect();
    for (name, kind) in [
        ("diffusion_direct_200x200", LinearSolverKind::Direct),
        ("diffusion_cg_200x200", LinearSolverKind::ConjugateGradient),
    ] {
        let solver = DiffusionSolver::new(kind, m, h, cdt, 1e-10);
        c.bench_function(name, |b| {
            b.iter_batched_ref(|| rhs.clone(), |x| solver.solve(x).unwrap(), BatchSize::SmallInput)
        });
    }
}

fn landscapes(c: &mut Criterion) {
    let cells = generate(&GeneratorConfig::new(50, 0.1, 250, 1)).unwrap().cells().to_vec();
    c.bench_function("aggregation_index_50x50", |b| {
        b.iter(|| aggregation_index(50, 50, black_box(&cells)).unwrap())
    });
    let mut group = c.benchmark_group("generate");
    group.sample_size(10);
    for target in [94, 277, 460] {
        group.bench_function(format!("s{target}"), |b| {
            b.iter(|| generate(&GeneratorConfig::new(50, 0.1, target, 1)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, solver, landscapes);
criterion_main!(benches);
