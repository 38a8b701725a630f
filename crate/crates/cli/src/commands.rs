use std::fs;
use std::path::{Path, PathBuf};

use consep_core::mc::{
    barrier_support_check, pathwise_subhedge_check, primal_estimate, simulate, subhedge_with_shift,
    verify_embedding, EmbeddingReport, PrimalEstimate, SimResult, SubhedgeReport, SupportReport,
};
use consep_core::noarb::{check_ay, check_lambda2, check_lambda3, check_root_inclusion};
use consep_core::optstop::{forward_gap_tol, ResidualReport};
use consep_core::pipeline::{self, parse_range, Priced, Solution};
use consep_core::{Barrier, Execution, FeasibilityVerdict, StartingLaw, StoppingSpec};
use serde::Serialize;

use crate::config::RunConfig;
use crate::{CliError, Common};

/// Relative tolerance on `E[tau]` against `V` in the forward residual.
const TIME_REL_TOL: f64 = 0.02;
/// Relative tolerance between the simulated primal value and the dual price.
const DUALITY_REL_TOL: f64 = 0.02;
/// Violation rate the `+0.1` control must exceed.
const CONTROL_MIN_RATE: f64 = 0.01;

/// Output directory, resolved config and the files written so far.
struct Run {
    command: &'static str,
    cfg: RunConfig,
    out: PathBuf,
    files: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a RunConfig,
    files: &'a [String],
    status: String,
    exit_code: u8,
}

impl Run {
    fn open(command: &'static str, common: &Common) -> Result<Self, CliError> {
        let mut cfg = match &common.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &common.out {
            cfg.output = out.clone();
        }
        if let Some(seed) = common.seed {
            cfg.mc.seed = seed;
        }
        let out = cfg.output.clone();
        fs::create_dir_all(&out).map_err(|e| CliError::Config(format!("{}: {e}", out.display())))?;
        Ok(Run {
            command,
            cfg,
            out,
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.out.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.path(name);
        write_json(&path, value)
    }

    fn finish(mut self, result: Result<(), CliError>) -> Result<(), CliError> {
        let (status, code) = match &result {
            Ok(()) => ("ok".to_string(), 0),
            Err(e) => (e.to_string(), e.code()),
        };
        if let Err(CliError::Infeasible(v)) = &result {
            self.json("verdict.json", v.as_ref())?;
        }
        let manifest = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            config: &self.cfg,
            files: &self.files,
            status,
            exit_code: code,
        };
        write_json(&self.out.join("manifest.json"), &manifest)?;
        result
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn run_with(command: &'static str, common: &Common, body: impl FnOnce(&mut Run) -> Result<(), CliError>) -> Result<(), CliError> {
    let mut run = Run::open(command, common)?;
    let result = body(&mut run);
    run.finish(result)
}

fn residual_ok(sol: &Solution) -> bool {
    sol.residual.passes(forward_gap_tol(&sol.mu.grid), TIME_REL_TOL)
}

fn write_solution(run: &mut Run, sol: &Solution) -> Result<(), CliError> {
    sol.barrier().write_csv(&run.path("barrier.csv"))?;
    sol.zeta.write_csv(&run.path("starting_law.csv"))?;
    sol.root.vtau.write_csv(&run.path("vtau.csv"), "value")?;
    sol.root.value.write_csv(&run.path("value.csv"), "v")?;
    run.json("residual.json", &sol.residual)?;
    for w in &sol.root.warnings {
        log::warn!("{w}");
    }
    Ok(())
}

fn residual_failure(r: &ResidualReport) -> CliError {
    CliError::Numerical(format!(
        "forward residuals out of tolerance: gap {:.3e}, rel_gap {:.3e}, unabsorbed {:.3e}",
        r.potential_gap, r.rel_gap, r.mass_unabsorbed
    ))
}

pub fn solve(common: &Common) -> Result<(), CliError> {
    run_with("solve", common, |run| {
        let sol = pipeline::solve(&run.cfg.problem())?;
        write_solution(run, &sol)?;
        if !residual_ok(&sol) {
            return Err(residual_failure(&sol.residual));
        }
        Ok(())
    })
}

fn write_hedge(run: &mut Run, priced: &Priced) -> Result<(), CliError> {
    let h = &priced.hedge;
    h.lambda.write_csv(&run.path("lambda.csv"))?;
    h.h.write_csv(&run.path("h.csv"), "h")?;
    h.ratios.delta.write_csv(&run.path("delta.csv"), "delta")?;
    h.ratios.alpha.write_csv(&run.path("alpha.csv"), "alpha")?;
    let flat = h.lambda.extrapolated.iter().filter(|&&e| e).count();
    if flat > 0 {
        log::warn!("lambda extrapolated flat on {flat} nodes where R is infinite");
    }
    Ok(())
}

pub fn price(common: &Common) -> Result<(), CliError> {
    run_with("price", common, |run| {
        let (informed, _baseline, report) = pipeline::price(&run.cfg.problem(), Execution::default())?;
        write_solution(run, &informed.solution)?;
        write_hedge(run, &informed)?;
        run.json("price.json", &report)?;
        println!(
            "M0 = {:.6}  static_leg = {:.6}  total = {:.6}  uninformed = {:.6}",
            report.m0, report.static_leg, report.total, report.uninformed_total
        );
        if !residual_ok(&informed.solution) {
            return Err(residual_failure(&informed.solution.residual));
        }
        Ok(())
    })
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    seed: u64,
    n_paths: usize,
    simulation: &'a SimResult,
    embedding: EmbeddingReport,
    embedding_pass: bool,
    primal: PrimalEstimate,
    dual_total: f64,
    duality_rel_gap: f64,
    duality_pass: bool,
    subhedge: SubhedgeReport,
    control: SubhedgeReport,
    control_flagged: bool,
    support: SupportReport,
    pass: bool,
}

pub fn verify(common: &Common, dump_samples: bool) -> Result<(), CliError> {
    run_with("verify", common, |run| {
        let problem = run.cfg.problem();
        let priced = pipeline::price_only(&problem)?;
        let sim = simulate(&problem.stopping, priced.solution.barrier(), &run.cfg.mc, Execution::default())?;
        let embedding = verify_embedding(&sim, &priced.solution.mu);
        let primal = primal_estimate(&sim, &problem.payoff);
        let dual_total = priced.hedge.parts.total;
        let duality_rel_gap = (primal.mean - dual_total).abs() / dual_total.abs().max(1e-300);
        let subhedge = pathwise_subhedge_check(&sim, &priced.hedge);
        let control = subhedge_with_shift(&sim, &priced.hedge, 0.1);
        let support = barrier_support_check(&sim, priced.solution.barrier());
        let embedding_pass = embedding.passes() && embedding.time_matches(3.0, TIME_REL_TOL);
        let duality_pass = duality_rel_gap <= DUALITY_REL_TOL;
        let control_flagged = control.violation_rate > CONTROL_MIN_RATE;
        let pass = embedding_pass && duality_pass && subhedge.pass && control_flagged && support.pass;
        let report = VerifyReport {
            seed: run.cfg.mc.seed,
            n_paths: sim.samples.len(),
            simulation: &sim,
            embedding,
            embedding_pass,
            primal,
            dual_total,
            duality_rel_gap,
            duality_pass,
            subhedge,
            control,
            control_flagged,
            support,
            pass,
        };
        run.json("report.json", &report)?;
        if dump_samples {
            sim.write_csv(&problem.payoff, &run.path("samples.csv"))?;
        }
        println!(
            "seed {}  KS {:.4}  E[F(tau)] {:.6} vs dual {:.6}  sub-hedge violations {:.4}%  {}",
            run.cfg.mc.seed,
            embedding.ks,
            primal.mean,
            dual_total,
            100.0 * subhedge.violation_rate,
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            let mut failed = Vec::new();
            for (ok, name) in [
                (embedding_pass, "embedding"),
                (duality_pass, "duality"),
                (subhedge.pass, "sub-hedge"),
                (control_flagged, "control"),
                (support.pass, "barrier support"),
            ] {
                if !ok {
                    failed.push(name);
                }
            }
            return Err(CliError::Numerical(format!("verification failed: {}", failed.join(", "))));
        }
        Ok(())
    })
}

pub fn noarb(common: &Common) -> Result<(), CliError> {
    run_with("noarb", common, |run| {
        let cfg = &run.cfg;
        let mu = cfg.measure.build(&cfg.grid)?;
        let zeta = StartingLaw::evolve(&cfg.stopping, &cfg.grid)?;
        let nu = zeta.marginal_law();
        let mut verdicts: Vec<FeasibilityVerdict> = vec![check_lambda2(&nu, &mu)?];
        let info = match &cfg.stopping {
            StoppingSpec::BarrierFile { path } => Some(Barrier::read_csv(&cfg.grid, path)?),
            StoppingSpec::Barrier(b) => Some(b.clone()),
            _ => None,
        };
        if let Some(b) = info {
            verdicts.push(check_root_inclusion(&b, &mu, &cfg.solver)?);
        }
        if let Some(upper) = &cfg.noarb.upper_law {
            let upper = upper.build(&cfg.grid)?;
            verdicts.push(check_lambda3(&nu, &mu, &upper)?);
        }
        if let Some(c) = cfg.noarb.drawdown {
            verdicts.push(check_ay(|x| x - c, &mu));
        }
        for v in &verdicts {
            println!("{}", v.describe());
        }
        run.json("verdicts.json", &verdicts)?;
        match verdicts.into_iter().find(|v| !v.feasible) {
            Some(v) => Err(CliError::Infeasible(Box::new(v))),
            None => Ok(()),
        }
    })
}

pub fn sweep(common: &Common, rho: &str) -> Result<(), CliError> {
    run_with("sweep", common, |run| {
        let rhos = parse_range(rho)?;
        let rows = pipeline::sweep(&run.cfg.problem(), &rhos, Execution::default())?;
        let baseline = rows
            .iter()
            .find(|r| r.rho.is_none())
            .map(|r| r.total)
            .ok_or_else(|| CliError::Numerical("sweep returned no baseline".into()))?;
        let mut csv = String::from("rho,barrier_file,lambda_file,M0,static_leg,total,uninformed_total\n");
        for row in &rows {
            let tag = match row.rho {
                Some(r) => format!("rho_{r}"),
                None => "baseline".to_string(),
            };
            let (bf, lf) = (format!("barrier_{tag}.csv"), format!("lambda_{tag}.csv"));
            row.barrier.write_csv(&run.path(&bf))?;
            row.lambda.write_csv(&run.path(&lf))?;
            let rho_col = row.rho.map_or("baseline".to_string(), |r| r.to_string());
            csv.push_str(&format!(
                "{rho_col},{bf},{lf},{},{},{},{baseline}\n",
                row.m0, row.static_leg, row.total
            ));
            println!("{rho_col:>8}  total = {:.6}", row.total);
        }
        let path = run.path("sweep.csv");
        fs::write(&path, csv).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(())
    })
}
