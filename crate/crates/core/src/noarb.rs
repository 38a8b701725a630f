//! Feasibility diagnostics: does a calibrated model exist that respects the
//! insider's information? Each verdict names its rule, its logical strength
//! and, when it fails, a witness location.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{convex_order, ConvexOrder, GridMeasure};
use crate::optstop::{solve_root, SolverParams};
use crate::stopping::{StartingLaw, StoppingSpec};
use crate::surface::Barrier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strength {
    /// Necessary and sufficient.
    Iff,
    /// Necessary only.
    Necessary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Witness {
    Space { x: f64 },
    SpaceTime { t: f64, x: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityVerdict {
    pub feasible: bool,
    pub rule: String,
    pub strength: Strength,
    pub witness: Option<Witness>,
    #[serde(default)]
    pub detail: String,
}

impl FeasibilityVerdict {
    fn pass(rule: &str, strength: Strength) -> Self {
        FeasibilityVerdict {
            feasible: true,
            rule: rule.into(),
            strength,
            witness: None,
            detail: String::new(),
        }
    }

    fn fail(rule: &str, strength: Strength, witness: Option<Witness>, detail: String) -> Self {
        FeasibilityVerdict {
            feasible: false,
            rule: rule.into(),
            strength,
            witness,
            detail,
        }
    }

    pub fn describe(&self) -> String {
        let status = if self.feasible { "feasible" } else { "infeasible" };
        let at = match self.witness {
            Some(Witness::Space { x }) => format!(" at x = {x:.4}"),
            Some(Witness::SpaceTime { t, x }) => format!(" at (t, x) = ({t:.4}, {x:.4})"),
            None => String::new(),
        };
        let strength = match self.strength {
            Strength::Iff => "iff",
            Strength::Necessary => "necessary",
        };
        let mut s = format!("{} ({strength}): {status}{at}", self.rule);
        if !self.detail.is_empty() {
            s.push_str(&format!("; {}", self.detail));
        }
        s
    }
}

fn order_verdict(rule: &str, strength: Strength, order: ConvexOrder, what: &str) -> FeasibilityVerdict {
    match order {
        ConvexOrder::Ordered => FeasibilityVerdict::pass(rule, strength),
        ConvexOrder::MeanMismatch { mean_nu, mean_mu } => FeasibilityVerdict::fail(
            rule,
            strength,
            None,
            format!("{what}: means differ ({mean_nu:.6} vs {mean_mu:.6})"),
        ),
        ConvexOrder::PotentialViolation { x, excess } => FeasibilityVerdict::fail(
            rule,
            strength,
            Some(Witness::Space { x }),
            format!("{what}: potential excess {excess:.3e}"),
        ),
    }
}

/// Information given by the law of `B` at the information time: a model
/// exists iff `nu` precedes `mu` in convex order.
pub fn check_lambda2(nu: &GridMeasure, mu: &GridMeasure) -> Result<FeasibilityVerdict> {
    let order = convex_order(nu, mu)?;
    let mut v = order_verdict("convex_order", Strength::Iff, order, "nu vs mu");
    if v.witness.is_none() && !v.feasible {
        // mean mismatch has no spatial witness; keep the verdict explicit
        v.detail.push_str(" (no martingale coupling)");
    }
    Ok(v)
}

/// Azema-Yor constraint `B_t >= h(max B)`: feasible iff `h <= beta` above
/// the start, `beta` the inverse barycenter of `mu`.
pub fn check_ay(h: impl Fn(f64) -> f64, mu: &GridMeasure) -> FeasibilityVerdict {
    let g = &mu.grid;
    let tol = 2.0 * g.dx();
    let bary = mu.barycenter();
    for j in g.s0_node()..g.nx {
        let x = g.x(j);
        let (hx, bx) = (h(x), bary.beta(x));
        if hx > bx + tol {
            return FeasibilityVerdict::fail(
                "azema_yor",
                Strength::Iff,
                Some(Witness::Space { x }),
                format!("h({x:.4}) = {hx:.4} exceeds beta = {bx:.4}"),
            );
        }
    }
    FeasibilityVerdict::pass("azema_yor", Strength::Iff)
}

/// Information barrier `B`: feasible iff `B` lies inside the Root barrier
/// of `mu`, i.e. `B(x) >= R_mu(x) - 3 dt` on every node.
pub fn check_root_inclusion(
    info: &Barrier,
    mu: &GridMeasure,
    params: &SolverParams,
) -> Result<FeasibilityVerdict> {
    let g = mu.grid;
    if info.grid != g {
        return Err(Error::InvalidParameter("barrier and measure use different grids".into()));
    }
    let zeta = StartingLaw::evolve(&StoppingSpec::Zero, &g)?;
    let root = solve_root(mu, &zeta, params)?.barrier;
    Ok(root_inclusion_verdict(info, &root))
}

/// Inclusion test against a precomputed Root barrier.
pub fn root_inclusion_verdict(info: &Barrier, root: &Barrier) -> FeasibilityVerdict {
    let g = info.grid;
    let tol_t = 3.0 * g.dt();
    let s0 = g.s0_node() as i64;
    let mut worst: Option<usize> = None;
    for j in 0..g.nx {
        let (b, r) = (info.r[j], root.r[j]);
        let ok = if r.is_infinite() {
            b.is_infinite()
        } else {
            b >= r - tol_t
        };
        if !ok {
            let closer = worst.is_none_or(|k| (j as i64 - s0).abs() < (k as i64 - s0).abs());
            if closer {
                worst = Some(j);
            }
        }
    }
    match worst {
        None => FeasibilityVerdict::pass("root_inclusion", Strength::Iff),
        Some(j) => FeasibilityVerdict::fail(
            "root_inclusion",
            Strength::Iff,
            Some(Witness::SpaceTime {
                t: info.r[j].min(g.t_max),
                x: g.x(j),
            }),
            format!(
                "information barrier {:.4} precedes the Root barrier {:.4}",
                info.r[j], root.r[j]
            ),
        ),
    }
}

/// Information sandwiched between two stopping laws: necessary condition
/// `nu <= mu <= mubar` in convex order.
pub fn check_lambda3(nu: &GridMeasure, mu: &GridMeasure, mubar: &GridMeasure) -> Result<FeasibilityVerdict> {
    let first = convex_order(nu, mu)?;
    if !first.holds() {
        return Ok(order_verdict("convex_order_chain", Strength::Necessary, first, "lower law vs mu"));
    }
    let second = convex_order(mu, mubar)?;
    Ok(order_verdict("convex_order_chain", Strength::Necessary, second, "mu vs upper law"))
}
