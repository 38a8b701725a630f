//! End-to-end runs: information time -> barrier -> verification -> hedge
//! and price, plus the kill-rate sweep.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::GridSpec;
use crate::hedge::{HedgePackage, PayoffSpec, StaticLeg};
use crate::measures::{GridMeasure, MeasureSpec};
use crate::optstop::{solve_root, verify_embedding_forward, ResidualReport, RootSolution, SolverParams};
use crate::stopping::{StartingLaw, StoppingSpec};
use crate::surface::Barrier;

/// A fully specified instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub grid: GridSpec,
    pub measure: MeasureSpec,
    pub stopping: StoppingSpec,
    pub payoff: PayoffSpec,
    pub solver: SolverParams,
}

impl Default for Problem {
    /// `[-4, 4] x [0, 4]`, truncated two-Gaussian target, exit of `(-1, 1)`
    /// with a unit-rate clock, `F(v) = v^3 / 3`.
    fn default() -> Self {
        Problem {
            grid: GridSpec::default(),
            measure: MeasureSpec::truncated_two_gaussian(),
            stopping: StoppingSpec::interval_exit(-1.0, 1.0, 1.0),
            payoff: PayoffSpec::default(),
            solver: SolverParams::default(),
        }
    }
}

impl Problem {
    /// The same instance without information.
    pub fn uninformed(&self) -> Problem {
        Problem {
            stopping: StoppingSpec::Zero,
            ..self.clone()
        }
    }

    /// The same instance on a grid with `dx` and `dt` halved.
    pub fn refined(&self) -> Problem {
        Problem {
            grid: self.grid.refined(),
            ..self.clone()
        }
    }

    /// The same instance with a different clock rate.
    pub fn with_rho(&self, rho: f64) -> Result<Problem> {
        match self.stopping {
            StoppingSpec::IntervalExit { a, b, .. } => Ok(Problem {
                stopping: StoppingSpec::interval_exit(a, b, rho),
                ..self.clone()
            }),
            _ => Err(Error::InvalidStopping(
                "a kill-rate sweep needs an interval_exit information time".into(),
            )),
        }
    }
}

/// Output of the solve stage.
#[derive(Debug, Clone)]
pub struct Solution {
    pub mu: GridMeasure,
    pub zeta: StartingLaw,
    pub root: RootSolution,
    pub embedded: GridMeasure,
    pub residual: ResidualReport,
}

impl Solution {
    pub fn barrier(&self) -> &Barrier {
        &self.root.barrier
    }
}

pub fn solve(problem: &Problem) -> Result<Solution> {
    problem.payoff.validate()?;
    let mu = problem.measure.build(&problem.grid)?;
    let zeta = StartingLaw::evolve(&problem.stopping, &problem.grid)?;
    let root = solve_root(&mu, &zeta, &problem.solver)?;
    let (embedded, residual) = verify_embedding_forward(&zeta, &root.barrier, &mu)?;
    Ok(Solution {
        mu,
        zeta,
        root,
        embedded,
        residual,
    })
}

/// Price report, including the uninformed benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceReport {
    #[serde(rename = "M0")]
    pub m0: f64,
    pub static_leg: f64,
    pub total: f64,
    pub uninformed_total: f64,
    pub info_value: f64,
}

/// Solution plus hedge for one instance.
#[derive(Debug, Clone)]
pub struct Priced {
    pub solution: Solution,
    pub hedge: HedgePackage,
}

pub fn price_only(problem: &Problem) -> Result<Priced> {
    let solution = solve(problem)?;
    let hedge = HedgePackage::build(
        solution.barrier(),
        &problem.payoff,
        &solution.mu,
        &solution.zeta,
        &problem.stopping,
    )?;
    Ok(Priced { solution, hedge })
}

/// Prices the instance and its uninformed benchmark.
pub fn price(problem: &Problem, exec: Execution) -> Result<(Priced, Priced, PriceReport)> {
    let problems = [problem.clone(), problem.uninformed()];
    let mut runs = exec.map_slice(&problems, price_only).into_iter();
    let informed = runs.next().expect("two runs")?;
    let baseline = runs.next().expect("two runs")?;
    let report = report(&informed, &baseline);
    Ok((informed, baseline, report))
}

fn report(informed: &Priced, baseline: &Priced) -> PriceReport {
    let p = informed.hedge.parts;
    let u = baseline.hedge.parts.total;
    PriceReport {
        m0: p.m0,
        static_leg: p.static_leg,
        total: p.total,
        uninformed_total: u,
        info_value: p.total - u,
    }
}

/// One row of a kill-rate sweep; `rho = None` is the uninformed baseline.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub rho: Option<f64>,
    pub m0: f64,
    pub static_leg: f64,
    pub total: f64,
    pub barrier: Barrier,
    pub lambda: StaticLeg,
    pub residual: ResidualReport,
}

/// Solves and prices every `rho` plus the baseline as independent tasks.
pub fn sweep(problem: &Problem, rhos: &[f64], exec: Execution) -> Result<Vec<SweepRow>> {
    let mut jobs: Vec<(Option<f64>, Problem)> = Vec::with_capacity(rhos.len() + 1);
    for &rho in rhos {
        jobs.push((Some(rho), problem.with_rho(rho)?));
    }
    jobs.push((None, problem.uninformed()));
    exec.map_slice(&jobs, |(rho, p)| {
        let priced = price_only(p)?;
        let parts = priced.hedge.parts;
        Ok(SweepRow {
            rho: *rho,
            m0: parts.m0,
            static_leg: parts.static_leg,
            total: parts.total,
            residual: priced.solution.residual,
            barrier: priced.solution.root.barrier,
            lambda: priced.hedge.lambda,
        })
    })
    .into_iter()
    .collect()
}

/// Parses `a:b:step` into an inclusive list.
pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::InvalidParameter(format!("expected a:b:step, got '{s}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (a, b, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || b < a {
        return Err(bad());
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| a + k as f64 * step).collect())
}
