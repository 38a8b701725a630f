//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p consep-core --test acceptance`.

use std::time::Instant;

use consep_core::hedge::{HedgePackage, PayoffSpec};
use consep_core::mc::{
    barrier_support_check, pathwise_subhedge_check, primal_estimate, simulate, subhedge_with_shift,
    verify_embedding, PathConfig,
};
use consep_core::measures::MeasureSpec;
use consep_core::noarb::{check_ay, check_lambda2, check_lambda3, check_root_inclusion, root_inclusion_verdict};
use consep_core::optstop::forward_gap_tol;
use consep_core::pipeline::{price_only, solve, sweep, Priced, Problem};
use consep_core::{Barrier, Execution, GridMeasure, GridSpec, SimResult, SolverParams, StoppingSpec};

const N_PATHS: usize = 100_000;
const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gaussian_zero(grid: GridSpec, variance: f64) -> Problem {
    Problem {
        grid,
        measure: MeasureSpec::Gaussian { mean: 0.0, variance },
        stopping: StoppingSpec::Zero,
        ..Problem::default()
    }
}

/// The default instance priced once and simulated once, shared by the
/// embedding, duality, sub-hedge and support criteria.
struct Reference {
    problem: Problem,
    priced: Priced,
    sim: SimResult,
}

impl Reference {
    fn new() -> Self {
        let problem = Problem::default();
        let priced = price_only(&problem).expect("default instance prices");
        let sim = simulate(
            &problem.stopping,
            priced.solution.barrier(),
            &PathConfig::new(N_PATHS, SEED),
            Execution::default(),
        )
        .expect("default instance simulates");
        Reference { problem, priced, sim }
    }
}

fn vertical_barrier() -> Outcome {
    let grid = GridSpec::new(-4.0, 4.0, 401, 2.0, 801).unwrap();
    let start = Instant::now();
    let sol = solve(&gaussian_zero(grid, 1.0)).expect("vertical instance solves");
    let elapsed = start.elapsed().as_secs_f64();
    let worst = (0..grid.nx)
        .filter(|&j| grid.x(j).abs() <= 2.0)
        .map(|j| (sol.barrier().r[j] - 1.0).abs())
        .fold(0.0, f64::max);
    let tol = 3.0 * grid.dt();
    outcome(
        worst <= tol && elapsed < 60.0,
        format!("max |R - 1| = {worst:.4} (tol {tol:.4}), {elapsed:.2} s"),
    )
}

fn closed_form_price() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for t0 in [0.5, 1.0] {
        let p = price_only(&gaussian_zero(GridSpec::default(), t0)).expect("prices");
        let want = t0 * t0 * t0 / 3.0;
        let rel = (p.hedge.parts.total - want).abs() / want;
        pass &= rel <= 0.01;
        detail.push(format!("t0 = {t0}: {:.6} vs {want:.6} ({:.3}%)", p.hedge.parts.total, 100.0 * rel));
    }
    outcome(pass, detail.join("; "))
}

fn embedding_fidelity(r: &Reference) -> Outcome {
    let res = r.priced.solution.residual;
    let gap_ok = res.potential_gap <= 5e-3;
    let rep = verify_embedding(&r.sim, &r.priced.solution.mu);
    let time_ok = rep.tau_rel_gap <= 0.02;
    outcome(
        gap_ok && rep.ks_pass && time_ok,
        format!(
            "PDE gap {:.2e} (tol 5e-3, grid tol {:.2e}); KS {:.4} (tol {:.4}); MC E[tau] {:.4} +- {:.4} vs V {:.4} ({:.2}%)",
            res.potential_gap,
            forward_gap_tol(&r.problem.grid),
            rep.ks,
            rep.ks_threshold,
            rep.mean_tau,
            rep.std_err_tau,
            rep.v,
            100.0 * rep.tau_rel_gap
        ),
    )
}

fn duality_gap(r: &Reference) -> Outcome {
    let primal = primal_estimate(&r.sim, &r.problem.payoff);
    let dual = r.priced.hedge.parts.total;
    let rel = (primal.mean - dual).abs() / dual;
    outcome(
        rel <= 0.02,
        format!(
            "MC E[F(tau)] = {:.5} (99% CI [{:.5}, {:.5}]) vs dual {dual:.5} ({:.2}%)",
            primal.mean,
            primal.ci_low,
            primal.ci_high,
            100.0 * rel
        ),
    )
}

fn pathwise_subhedge(r: &Reference) -> Outcome {
    let pkg: &HedgePackage = &r.priced.hedge;
    let plain = pathwise_subhedge_check(&r.sim, pkg);
    let control = subhedge_with_shift(&r.sim, pkg, 0.1);
    let flagged = control.violation_rate > 0.01;
    outcome(
        plain.pass && flagged,
        format!(
            "violations {:.4}% (eps {:.3e}); +0.1 control {:.2}%",
            100.0 * plain.violation_rate,
            plain.eps_num,
            100.0 * control.violation_rate
        ),
    )
}

fn information_monotonicity() -> Outcome {
    let problem = Problem::default();
    let rhos = [0.5, 1.0, 1.5, 2.0];
    let rows = sweep(&problem, &rhos, Execution::default()).expect("sweep runs");
    let (informed, baseline) = rows.split_at(rhos.len());
    let base = baseline[0].total;
    let totals: Vec<f64> = informed.iter().map(|r| r.total).collect();
    let monotone = totals.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    let above = totals.iter().all(|&t| t >= base - 1e-9);

    let uninformed = problem.uninformed();
    let sol = solve(&uninformed).expect("baseline solves");
    let sim = simulate(
        &StoppingSpec::Zero,
        sol.barrier(),
        &PathConfig::new(N_PATHS, SEED + 1),
        Execution::default(),
    )
    .expect("baseline simulates");
    let root = primal_estimate(&sim, &problem.payoff).mean;
    let rel = (root - base).abs() / root;
    outcome(
        monotone && above && rel <= 0.02,
        format!(
            "totals {:?} baseline {base:.5}; unconstrained Root MC {root:.5} ({:.2}%)",
            totals.iter().map(|t| format!("{t:.5}")).collect::<Vec<_>>(),
            100.0 * rel
        ),
    )
}

fn no_arbitrage_suite() -> Outcome {
    // wide enough to hold N(0, 2) without folding tails
    let g = GridSpec::new(-6.0, 6.0, 601, 4.0, 801).unwrap();
    let params = SolverParams::default();
    let m = |s: MeasureSpec| s.build(&g).unwrap();
    let gauss = |v: f64| m(MeasureSpec::Gaussian { mean: 0.0, variance: v });
    let eq2 = m(MeasureSpec::truncated_two_gaussian());
    let two_point = m(MeasureSpec::TwoPoint { lo: -1.0, hi: 1.0 });
    let dirac = m(MeasureSpec::Dirac { at: 0.0 });
    let mut checks: Vec<(&str, bool)> = Vec::new();

    // the two-point law spreads further than the truncated mixture
    checks.push(("two-point vs eq2 infeasible", !check_lambda2(&two_point, &eq2).unwrap().feasible));
    checks.push(("N(0,2) vs N(0,1) infeasible", {
        let v = check_lambda2(&gauss(2.0), &gauss(1.0)).unwrap();
        !v.feasible && v.witness.is_some()
    }));
    checks.push(("dirac vs eq2 feasible", check_lambda2(&dirac, &eq2).unwrap().feasible));

    let bary = two_point.barycenter();
    checks.push(("h = beta - 0.1", check_ay(|x| bary.beta(x) - 0.1, &two_point).feasible));
    checks.push(("drawdown c = 2", check_ay(|x| x - 2.0, &two_point).feasible));
    checks.push(("drawdown c = 1.9", !check_ay(|x| x - 1.9, &two_point).feasible));
    checks.push(("vacuous h", check_ay(|_| -1e6, &two_point).feasible));

    let g1 = GridSpec::new(-4.0, 4.0, 401, 2.0, 801).unwrap();
    let n1 = MeasureSpec::Gaussian { mean: 0.0, variance: 1.0 }.build(&g1).unwrap();
    let zeta = consep_core::StartingLaw::evolve(&StoppingSpec::Zero, &g1).unwrap();
    let root = consep_core::optstop::solve_root(&n1, &zeta, &params).unwrap().barrier;
    checks.push(("vertical t1 = 1.2 feasible", root_inclusion_verdict(&Barrier::vertical(&g1, 1.2), &root).feasible));
    checks.push(("vertical t1 = 0.8 infeasible", !root_inclusion_verdict(&Barrier::vertical(&g1, 0.8), &root).feasible));
    checks.push(("reflexive", root_inclusion_verdict(&root, &root).feasible));
    checks.push(("immediate stop infeasible", {
        let v = root_inclusion_verdict(&Barrier::vertical(&g1, 0.0), &root);
        let near_zero = matches!(v.witness, Some(consep_core::noarb::Witness::SpaceTime { x, .. }) if x.abs() < 0.1);
        !v.feasible && near_zero
    }));

    // convex order holds, yet the Root barrier of the three-atom law is not
    // contained in the vertical line t = 1
    let eps = 0.05;
    let three = GridMeasure::from_atoms(&g1, vec![(-1.0, eps / 2.0), (0.0, 1.0 - eps), (1.0, eps / 2.0)]).unwrap();
    checks.push(("caveat: three-atom law below N(0,1)", check_lambda2(&three, &n1).unwrap().feasible));
    checks.push(("caveat: inclusion fails", {
        !check_root_inclusion(&Barrier::vertical(&g1, 1.0), &three, &params).unwrap().feasible
    }));

    checks.push(("chain passes", check_lambda3(&dirac, &gauss(1.0), &gauss(2.0)).unwrap().feasible));
    checks.push(("chain first fails", !check_lambda3(&gauss(1.0), &dirac, &gauss(2.0)).unwrap().feasible));
    checks.push(("chain second fails", !check_lambda3(&dirac, &gauss(2.0), &gauss(1.0)).unwrap().feasible));

    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    outcome(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} verdicts reproduced", checks.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
    )
}

fn support_witness(r: &Reference) -> Outcome {
    let cfg = PathConfig::new(20_000, SEED + 2);
    let g = GridSpec::new(-4.0, 4.0, 401, 8.0, 801).unwrap();
    let vertical = Barrier::vertical(&g, 1.0);
    let two_point = Barrier::two_sided(&g, -1.0, 1.0);
    let mut detail = Vec::new();
    let mut pass = true;
    for (name, b) in [("vertical", &vertical), ("two-point", &two_point)] {
        let sim = simulate(&StoppingSpec::Zero, b, &cfg, Execution::default()).expect("simulates");
        let rep = barrier_support_check(&sim, b);
        pass &= rep.pass;
        detail.push(format!(
            "{name}: moved inside {}, stopped outside {}",
            rep.moved_inside, rep.stopped_outside
        ));
    }
    let rep = barrier_support_check(&r.sim, r.priced.solution.barrier());
    pass &= rep.pass;
    detail.push(format!(
        "eq2/rho=1: moved inside {}, stopped outside {}",
        rep.moved_inside, rep.stopped_outside
    ));
    outcome(pass, detail.join("; "))
}

fn refinement_stability(r: &Reference) -> Outcome {
    let coarse = &r.priced;
    let fine_problem = r.problem.refined();
    let fine = price_only(&fine_problem).expect("refined instance prices");
    let (g, fg) = (r.problem.grid, fine_problem.grid);
    let mut moved: f64 = 0.0;
    for j in 0..g.nx {
        let x = g.x(j);
        if x.abs() > 2.0 {
            continue;
        }
        let a = coarse.solution.barrier().r[j];
        let b = fine.solution.barrier().r[fg.nearest_node(x)];
        if a.is_finite() || b.is_finite() {
            moved = moved.max((a - b).abs());
        }
    }
    let (pc, pf) = (coarse.hedge.parts.total, fine.hedge.parts.total);
    let rel = (pc - pf).abs() / pc;
    let tol = 4.0 * g.dt();
    outcome(
        moved <= tol && rel <= 0.01,
        format!(
            "max R move {moved:.4} (tol {tol:.4}); total {pc:.5} -> {pf:.5} ({:.2}%)",
            100.0 * rel
        ),
    )
}

fn main() {
    let _ = PayoffSpec::default();
    let reference = Reference::new();
    let results = [
        ("1 vertical-barrier identity", vertical_barrier()),
        ("2 closed-form price", closed_form_price()),
        ("3 embedding fidelity", embedding_fidelity(&reference)),
        ("4 duality gap", duality_gap(&reference)),
        ("5 pathwise sub-hedge", pathwise_subhedge(&reference)),
        ("6 information monotonicity", information_monotonicity()),
        ("7 no-arbitrage verdicts", no_arbitrage_suite()),
        ("8 barrier-support witness", support_witness(&reference)),
        ("9 refinement stability", refinement_stability(&reference)),
    ];
    let mut failures = 0;
    for (name, o) in &results {
        println!("criterion {name}: {} — {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failures += usize::from(!o.pass);
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
