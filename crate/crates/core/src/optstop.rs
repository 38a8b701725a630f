//! Optimal stopping above the stopped potential, extraction of the Root-type
//! barrier and deterministic verification of the embedding.
//!
//! With `w = u_mu - u_nu <= 0` the obstacle is `v_lo(t, x) + w(x)`, where
//! `v_lo` is the stopped potential of the information time. The value
//! surface obeys `v(0) = v_lo(0)` and
//! `v(t + dt) = max(heat step of v(t), obstacle(t + dt))`, solved as a
//! linear complementarity problem per step. Its contact set is the barrier.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::heat::{run_walk, LcpSolver, Psor, StepLcp};
use crate::measures::{convex_order_tol, point_potential, GridMeasure};
use crate::stopping::StartingLaw;
use crate::surface::{Barrier, Surface};

/// Unabsorbed mass above which forward verification fails.
pub const MAX_UNABSORBED: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    pub omega: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Contact threshold on `v - obstacle`.
    pub eps_stop: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            omega: 1.5,
            tol: 1e-10,
            max_iter: 10_000,
            eps_stop: 1e-8,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(Error::InvalidParameter(format!(
                "relaxation factor {} must lie in (0, 2)",
                self.omega
            )));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 || !(self.eps_stop >= 0.0) {
            return Err(Error::InvalidParameter(
                "solver tolerance, iteration cap and contact threshold must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Everything produced by the optimal stopping stage.
#[derive(Debug, Clone)]
pub struct RootSolution {
    pub vtau: Surface,
    /// `u_mu - u_nu`, clipped at 0 after the feasibility check.
    pub w: Vec<f64>,
    pub obstacle: Surface,
    pub value: Surface,
    pub barrier: Barrier,
    pub warnings: Vec<String>,
}

/// `u_mu - u_nu`; fails with the convex-order verdict when `nu` does not
/// precede `mu`.
pub fn obstacle_shift(nu: &GridMeasure, mu: &GridMeasure) -> Result<Vec<f64>> {
    let verdict = crate::noarb::check_lambda2(nu, mu)?;
    if !verdict.feasible {
        return Err(Error::Infeasible {
            verdict: Box::new(verdict),
        });
    }
    let (um, un) = (mu.potential(), nu.potential());
    Ok(um.iter().zip(&un).map(|(a, b)| (a - b).min(0.0)).collect())
}

pub fn build_obstacle(vtau: &Surface, w: &[f64]) -> Surface {
    let mut obs = vtau.clone();
    for mut row in obs.values.rows_mut() {
        for (o, wj) in row.iter_mut().zip(w) {
            *o += wj;
        }
    }
    obs
}

/// Dynamic programme for the value surface.
pub fn solve_value(vtau: &Surface, obstacle: &Surface, params: &SolverParams) -> Result<Surface> {
    params.validate()?;
    let g = vtau.grid;
    let r = g.dt() / (2.0 * g.dx() * g.dx());
    let psor = Psor {
        omega: params.omega,
        tol: params.tol,
        max_iter: params.max_iter,
    };
    let mut value = Surface::zeros(&g);
    value.values.row_mut(0).assign(&vtau.values.row(0));
    let mut prev: Vec<f64> = vtau.values.row(0).to_vec();
    let mut next = prev.clone();
    let mut total_iter = 0usize;
    for n in 1..g.nt {
        let obs = obstacle.values.row(n);
        let obs = obs.as_slice().expect("contiguous rows");
        next.copy_from_slice(&prev);
        let lcp = StepLcp {
            r,
            rhs: &prev,
            obstacle: obs,
        };
        match psor.solve(&lcp, &mut next) {
            Ok(it) => total_iter += it,
            Err((iterations, change)) => {
                return Err(Error::PsorNotConverged {
                    step: n,
                    iterations,
                    change,
                })
            }
        }
        value.values.row_mut(n).assign(&ndarray::ArrayView1::from(&next[..]));
        std::mem::swap(&mut prev, &mut next);
    }
    debug!("projected SOR: {} sweeps over {} steps", total_iter, g.nt - 1);
    Ok(value)
}

/// First contact time per column, closed upward.
pub fn extract_barrier(value: &Surface, obstacle: &Surface, eps_stop: f64) -> Result<(Barrier, Vec<String>)> {
    let g = value.grid;
    let mut r = vec![f64::INFINITY; g.nx];
    let mut gaps = 0usize;
    let mut worst_gap = 0usize;
    for j in 0..g.nx {
        let mut first = None;
        let mut run = 0usize;
        for n in 0..g.nt {
            let contact = value.get(n, j) - obstacle.get(n, j) <= eps_stop;
            match (first, contact) {
                (None, true) => first = Some(n),
                (Some(_), false) => run += 1,
                (Some(_), true) => {
                    if run > 0 {
                        gaps += 1;
                        worst_gap = worst_gap.max(run);
                    }
                    run = 0;
                }
                (None, false) => {}
            }
        }
        if run > 0 {
            gaps += 1;
            worst_gap = worst_gap.max(run);
        }
        if let Some(n) = first {
            r[j] = g.t(n);
        }
    }
    let mut warnings = Vec::new();
    if worst_gap > 1 {
        let w = format!(
            "contact set is not a barrier: {gaps} columns leave contact, longest excursion {worst_gap} cells (closed upward)"
        );
        warn!("{w}");
        warnings.push(w);
    }
    let barrier = Barrier { grid: g, r };
    if !(1..g.nx - 1).any(|j| barrier.r[j].is_finite()) {
        return Err(Error::HorizonTooShort(format!(
            "no interior contact before t_max = {}",
            g.t_max
        )));
    }
    if !barrier.is_regular() {
        let w = "barrier is not regular: {x : R(x) > 0} is not an interval around the start".to_string();
        warn!("{w}");
        warnings.push(w);
    }
    Ok((barrier, warnings))
}

/// Full optimal stopping stage for target `mu` and starting law `zeta`.
pub fn solve_root(mu: &GridMeasure, zeta: &StartingLaw, params: &SolverParams) -> Result<RootSolution> {
    if mu.grid != zeta.grid {
        return Err(Error::InvalidParameter("target and starting law use different grids".into()));
    }
    let nu = zeta.marginal_law();
    let w = obstacle_shift(&nu, mu)?;
    let vtau = zeta.stopped_potential();
    let obstacle = build_obstacle(&vtau, &w);
    let value = solve_value(&vtau, &obstacle, params)?;
    let (barrier, mut warnings) = extract_barrier(&value, &obstacle, params.eps_stop)?;
    warnings.extend(zeta.warnings.iter().cloned());
    Ok(RootSolution {
        vtau,
        w,
        obstacle,
        value,
        barrier,
        warnings,
    })
}

/// Residuals of the forward verification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub potential_gap: f64,
    pub mass_unabsorbed: f64,
    pub e_tau: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub rel_gap: f64,
}

impl ResidualReport {
    pub fn passes(&self, gap_tol: f64, rel_tol: f64) -> bool {
        self.potential_gap <= gap_tol && self.rel_gap <= rel_tol && self.mass_unabsorbed <= MAX_UNABSORBED
    }
}

/// Restarts the walk from `zeta`, absorbs on the barrier and compares the
/// embedded law with `mu`.
pub fn verify_embedding_forward(
    zeta: &StartingLaw,
    barrier: &Barrier,
    mu: &GridMeasure,
) -> Result<(GridMeasure, ResidualReport)> {
    let g: GridSpec = zeta.grid;
    if barrier.grid != g || mu.grid != g {
        return Err(Error::InvalidParameter("inputs use different grids".into()));
    }
    let rec = run_walk(&g, 0.0, |n, j| barrier.contains(n, j), |n, buf| {
        let s = zeta.stopped_at(n);
        buf.copy_from_slice(&s);
    });
    let last = g.nt - 1;
    let mut cell = vec![0.0; g.nx];
    let mut e_tau = 0.0;
    for n in 0..g.nt {
        let t = g.t(n);
        let t_step = if n == 0 { 0.0 } else { g.t(n - 1) };
        for j in 0..g.nx {
            let (m, f) = (rec.absorbed[[n, j]], rec.flux[[n, j]]);
            cell[j] += m + f;
            e_tau += t * m + t_step * f;
        }
    }
    let unabsorbed: f64 = rec.free.row(last).sum();
    for j in 0..g.nx {
        let m = rec.free[[last, j]];
        cell[j] += m;
        e_tau += g.t_max * m;
    }
    if unabsorbed > MAX_UNABSORBED {
        return Err(Error::HorizonTooShort(format!(
            "{unabsorbed:.3e} of the mass is not absorbed by t_max = {}",
            g.t_max
        )));
    }
    let embedded = GridMeasure {
        grid: g,
        cell_mass: cell,
        atoms: Vec::new(),
    };
    let xs = g.xs();
    let ue = point_potential(&embedded.points(), &xs);
    let um = mu.potential();
    let potential_gap = ue.iter().zip(&um).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let v = mu.second_moment();
    let rel_gap = if v > 0.0 { (e_tau - v).abs() / v } else { e_tau.abs() };
    Ok((
        embedded,
        ResidualReport {
            potential_gap,
            mass_unabsorbed: unabsorbed,
            e_tau,
            v,
            rel_gap,
        },
    ))
}

/// Default potential-gap tolerance for the forward verification.
pub fn forward_gap_tol(grid: &GridSpec) -> f64 {
    convex_order_tol(grid.dx())
}
