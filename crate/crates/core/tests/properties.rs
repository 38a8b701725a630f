use consep_core::measures::{convex_order_tol, MeasureSpec};
use consep_core::noarb::check_ay;
use consep_core::{convex_order, Barrier, GridMeasure, GridSpec, StartingLaw, StoppingSpec};
use proptest::prelude::*;

fn grid() -> GridSpec {
    GridSpec::new(-4.0, 4.0, 161, 4.0, 401).unwrap()
}

/// A centred law on grid nodes: up to four atoms balanced by a fifth.
fn centred_atoms() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-30i32..=30, 1u32..=10), 1..4).prop_filter_map("balanced", |raw| {
        let g = grid();
        let dx = g.dx();
        let w: f64 = raw.iter().map(|r| r.1 as f64).sum();
        let mut atoms: Vec<(f64, f64)> = raw.iter().map(|&(k, m)| (k as f64 * dx, m as f64 / (2.0 * w))).collect();
        let first: f64 = atoms.iter().map(|a| a.0 * a.1).sum();
        // the remaining half of the mass sits where it restores a zero mean
        let y = -first / 0.5;
        if y.abs() > 1.5 {
            return None;
        }
        atoms.push((y, 0.5));
        Some(atoms)
    })
}

/// Splits every atom symmetrically by `d` node spacings.
fn spread(atoms: &[(f64, f64)], d: f64) -> Vec<(f64, f64)> {
    atoms
        .iter()
        .flat_map(|&(x, m)| [(x - d, m / 2.0), (x + d, m / 2.0)])
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn potential_is_concave_and_below_minus_abs(atoms in centred_atoms()) {
        let g = grid();
        let mu = GridMeasure::from_atoms(&g, atoms).unwrap();
        let u = mu.potential();
        let m = mu.mean();
        for j in 1..g.nx - 1 {
            prop_assert!(u[j - 1] + u[j + 1] - 2.0 * u[j] <= 1e-12);
        }
        for (j, x) in g.xs().into_iter().enumerate() {
            prop_assert!(u[j] <= -(x - m).abs() + 1e-12);
        }
        // far from the support the potential meets its asymptote
        prop_assert!((u[0] + (g.x_min - m).abs()).abs() < 1e-9);
        prop_assert!((u[g.nx - 1] + (g.x_max - m).abs()).abs() < 1e-9);
    }

    #[test]
    fn mean_preserving_spreads_are_ordered_and_transitive(atoms in centred_atoms(), a in 1u32..6, b in 1u32..6) {
        let g = grid();
        let dx = g.dx();
        let nu = GridMeasure::from_atoms(&g, atoms.clone()).unwrap();
        let once = spread(&atoms, a as f64 * dx);
        let mid = GridMeasure::from_atoms(&g, once.clone()).unwrap();
        let top = GridMeasure::from_atoms(&g, spread(&once, b as f64 * dx)).unwrap();
        prop_assert!(convex_order(&nu, &mid).unwrap().holds());
        prop_assert!(convex_order(&mid, &top).unwrap().holds());
        prop_assert!(convex_order(&nu, &top).unwrap().holds());
        // the reverse order fails once the spread beats the grid tolerance
        let (un, ut) = (nu.potential(), top.potential());
        let excess = un.iter().zip(&ut).map(|(a, b)| a - b).fold(f64::MIN, f64::max);
        if excess > convex_order_tol(dx) {
            prop_assert!(!convex_order(&top, &nu).unwrap().holds());
        }
    }

    #[test]
    fn azema_yor_check_is_monotone_in_the_constraint(c1 in 0.0f64..4.0, c2 in 0.0f64..4.0) {
        let g = GridSpec::default();
        let mu = MeasureSpec::TwoPoint { lo: -1.0, hi: 1.0 }.build(&g).unwrap();
        let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
        // x - hi <= x - lo pointwise
        if check_ay(|x| x - lo, &mu).feasible {
            prop_assert!(check_ay(|x| x - hi, &mu).feasible);
        }
    }

    #[test]
    fn barrier_csv_round_trips(values in prop::collection::vec(prop::option::of(0.0f64..4.0), 161)) {
        let g = grid();
        let r: Vec<f64> = values.iter().map(|v| v.unwrap_or(f64::INFINITY)).collect();
        let b = Barrier { grid: g, r };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("barrier.csv");
        b.write_csv(&path).unwrap();
        let back = Barrier::read_csv(&g, &path).unwrap();
        prop_assert_eq!(b.r, back.r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn starting_law_conserves_mass(a in 1usize..30, b in 1usize..30, rho in 0.0f64..3.0) {
        let g = grid();
        let dx = g.dx();
        let spec = StoppingSpec::interval_exit(-(a as f64) * dx, b as f64 * dx, rho);
        let zeta = StartingLaw::evolve(&spec, &g).unwrap();
        let total: f64 = zeta.points().iter().map(|p| p.2).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        // optional stopping: the stopped law keeps the start as its mean
        let mean = zeta.marginal_law().mean();
        prop_assert!(mean.abs() < 1e-8, "mean {}", mean);
    }

    #[test]
    fn later_vertical_barriers_stay_feasible(t1 in 0.2f64..2.0, extra in 0.0f64..1.0) {
        let g = GridSpec::new(-4.0, 4.0, 161, 4.0, 401).unwrap();
        let root = Barrier::vertical(&g, t1);
        let early = consep_core::noarb::root_inclusion_verdict(&Barrier::vertical(&g, t1 + extra), &root);
        prop_assert!(early.feasible);
    }
}
