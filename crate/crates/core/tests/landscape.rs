use fragrd_core::landscape::{
    aggregation_index, build_ensemble, feasibility_bounds, generate, member_seed, Landscape, PROTECTED,
};
use fragrd_core::{Error, GeneratorConfig};
use proptest::prelude::*;

/// Pairs of protected cells at Manhattan distance one, by enumerating all pairs.
fn pair_oracle(rows: usize, cols: usize, cells: &[u8]) -> u64 {
    let pos: Vec<(i64, i64)> = (0..rows * cols)
        .filter(|&i| cells[i] == PROTECTED)
        .map(|i| ((i / cols) as i64, (i % cols) as i64))
        .collect();
    let mut count = 0;
    for (a, p) in pos.iter().enumerate() {
        for q in &pos[a + 1..] {
            if (p.0 - q.0).abs() + (p.1 - q.1).abs() == 1 {
                count += 1;
            }
        }
    }
    count
}

fn square_mask(max_side: usize) -> impl Strategy<Value = (usize, Vec<u8>)> {
    (1..=max_side, 0.0..1.0f64).prop_flat_map(|(n, p)| {
        (
            Just(n),
            prop::collection::vec(prop::bool::weighted(p).prop_map(|b| u8::from(!b)), n * n),
        )
    })
}

/// The eight symmetries of the square, applied to a row-major mask.
fn transform(n: usize, cells: &[u8], sym: usize) -> Vec<u8> {
    let mut out = vec![0; n * n];
    for r in 0..n {
        for c in 0..n {
            let (mut i, mut j) = (r, c);
            if sym & 1 != 0 {
                j = n - 1 - j;
            }
            if sym & 2 != 0 {
                i = n - 1 - i;
            }
            if sym & 4 != 0 {
                std::mem::swap(&mut i, &mut j);
            }
            out[i * n + j] = cells[r * n + c];
        }
    }
    out
}

proptest! {
    #[test]
    fn index_matches_pair_enumeration((n, cells) in square_mask(50)) {
        prop_assert_eq!(aggregation_index(n, n, &cells).unwrap(), pair_oracle(n, n, &cells));
    }

    #[test]
    fn index_matches_on_rectangles(rows in 1usize..20, cols in 1usize..20, seed in any::<u64>()) {
        let cells: Vec<u8> = (0..rows * cols)
            .map(|i| u8::from(!member_seed(seed, i).is_multiple_of(3)))
            .collect();
        prop_assert_eq!(aggregation_index(rows, cols, &cells).unwrap(), pair_oracle(rows, cols, &cells));
    }

    #[test]
    fn index_invariant_under_square_symmetries((n, cells) in square_mask(30)) {
        let s = aggregation_index(n, n, &cells).unwrap();
        for sym in 0..8 {
            prop_assert_eq!(aggregation_index(n, n, &transform(n, &cells, sym)).unwrap(), s);
        }
    }

    #[test]
    fn text_round_trip((n, cells) in square_mask(20)) {
        let l = Landscape::from_cells(n, cells).unwrap();
        let back: Landscape = l.to_text().parse().unwrap();
        prop_assert_eq!(&back, &l);
        prop_assert_eq!(back.digest(), l.digest());
    }
}

#[test]
fn default_ensemble_bounds() {
    assert_eq!(feasibility_bounds(50, 250).unwrap(), (0, 468));
}

#[test]
fn targets_past_the_bound_are_infeasible() {
    let err = generate(&GeneratorConfig::new(50, 0.1, 472, 1)).unwrap_err();
    assert_eq!(err, Error::Infeasible { target: 472, min: 0, max: 468 });
    let err = build_ensemble(50, 0.1, 466, 6, 2, 1).unwrap_err();
    match err {
        Error::Ensemble { k, source } => {
            assert_eq!(k, 2);
            assert!(matches!(*source, Error::Infeasible { target: 472, .. }));
        }
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn members_regenerate_individually() {
    let ensemble = build_ensemble(20, 0.1, 4, 5, 4, 99).unwrap();
    for (i, l) in ensemble.iter().enumerate() {
        let k = i + 1;
        let again = generate(&GeneratorConfig::new(20, 0.1, 4 + 5 * i as u64, member_seed(99, k))).unwrap();
        assert_eq!(&again, l);
        assert_eq!(l.protected_count(), 40);
        assert_eq!(l.s(), 4 + 5 * i as u64);
    }
}

#[test]
fn generation_is_reproducible_and_seed_sensitive() {
    let a = generate(&GeneratorConfig::new(50, 0.1, 200, 5)).unwrap();
    let b = generate(&GeneratorConfig::new(50, 0.1, 200, 5)).unwrap();
    let c = generate(&GeneratorConfig::new(50, 0.1, 200, 6)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.cells(), c.cells());
    assert_eq!(c.s(), 200);
}

#[test]
fn extreme_targets_are_reached() {
    for target in [0, 466, 468] {
        let l = generate(&GeneratorConfig::new(50, 0.1, target, 3)).unwrap();
        assert_eq!(l.s(), target);
        assert_eq!(l.protected_count(), 250);
    }
}
