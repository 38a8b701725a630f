use consep_core::mc::{primal_estimate, simulate, simulate_ay, verify_embedding, PathConfig};
use consep_core::measures::MeasureSpec;
use consep_core::{Barrier, Execution, GridSpec, StoppingSpec};
use consep_core::hedge::PayoffSpec;

fn grid() -> GridSpec {
    GridSpec::new(-4.0, 4.0, 401, 8.0, 801).unwrap()
}

#[test]
fn two_point_barrier_splits_evenly() {
    let g = grid();
    let b = Barrier::two_sided(&g, -1.0, 1.0);
    let n = 40_000;
    let res = simulate(&StoppingSpec::Zero, &b, &PathConfig::new(n, 1), Execution::default()).unwrap();
    let up = res.samples.iter().filter(|s| s.b_tau == 1.0).count();
    let down = res.samples.iter().filter(|s| s.b_tau == -1.0).count();
    // a handful of paths may outlast the horizon
    assert_eq!(up + down, n - res.unstopped);
    let sigma = (0.25 / n as f64).sqrt();
    assert!((up as f64 / n as f64 - 0.5).abs() <= 3.0 * sigma, "{up}");
    let mu = MeasureSpec::TwoPoint { lo: -1.0, hi: 1.0 }.build(&g).unwrap();
    assert!(verify_embedding(&res, &mu).passes());
}

#[test]
fn bridge_correction_removes_the_exit_time_bias() {
    let g = grid();
    // information time is the plain exit of (-1, 1); the barrier stops at once
    let spec = StoppingSpec::interval_exit(-1.0, 1.0, 0.0);
    let b = Barrier::vertical(&g, 0.0);
    let cfg = PathConfig {
        dt_sim: Some(1e-3),
        ..PathConfig::new(40_000, 2)
    };
    let res = simulate(&spec, &b, &cfg, Execution::default()).unwrap();
    assert!(res.tau_lower.covers(1.0, 3.0), "{:?}", res.tau_lower);
    assert!(res.samples.iter().all(|s| s.tau == s.tau_lower));
}

#[test]
fn vertical_barrier_primal_is_exact() {
    let g = grid();
    let res = simulate(&StoppingSpec::Zero, &Barrier::vertical(&g, 0.7), &PathConfig::new(1000, 3), Execution::default())
        .unwrap();
    let p = primal_estimate(&res, &PayoffSpec::default());
    assert!((p.mean - 0.7f64.powi(3) / 3.0).abs() < 1e-12);
    assert!(p.std_err < 1e-12);
}

#[test]
fn azema_yor_two_point_is_the_interval_exit() {
    let g = grid();
    let mu = MeasureSpec::TwoPoint { lo: -1.0, hi: 1.0 }.build(&g).unwrap();
    let res = simulate_ay(&mu, &PathConfig::new(40_000, 4), Execution::default()).unwrap();
    assert!(res.tau.covers(1.0, 3.0), "{:?}", res.tau);
    assert!(res.samples.iter().filter(|s| s.stopped).all(|s| (s.b_tau.abs() - 1.0).abs() < 1e-9));
}

#[test]
fn azema_yor_embeds_a_gaussian() {
    let g = GridSpec::new(-5.0, 5.0, 501, 30.0, 3001).unwrap();
    let mu = MeasureSpec::Gaussian { mean: 0.0, variance: 1.0 }.build(&g).unwrap();
    let cfg = PathConfig {
        dt_sim: Some(2.5e-3),
        ..PathConfig::new(40_000, 5)
    };
    let res = simulate_ay(&mu, &cfg, Execution::default()).unwrap();
    let rep = verify_embedding(&res, &mu);
    assert!(rep.ks_pass, "{rep:?}");
}

#[test]
fn feasibility_holds_path_by_path() {
    let g = grid();
    let b = Barrier::from_fn(&g, |x| 0.5 + 0.2 * x * x);
    let res = simulate(&StoppingSpec::interval_exit(-0.5, 0.5, 2.0), &b, &PathConfig::new(5000, 6), Execution::default())
        .unwrap();
    assert_eq!(res.feasibility_violations, 0);
    assert!(res.samples.iter().all(|s| s.tau >= s.tau_lower));
}
