//! Sub-hedging portfolio for the variance option `F(tau)`.
//!
//! `phi(t, x) = E f(sigma)` with `sigma` the first barrier time after `t`;
//! `h(t, x) = int_0^t phi(s, x) ds - 2 int_{s0}^x int_{s0}^y phi(0, z) dz dy`;
//! `lambda(x) = F(R(x)) - h(R(x), x)`. Then `F(t) >= lambda(x) + h(t, x)`
//! with equality on the barrier, and the price is
//! `int lambda dmu + E h(tau_lo, B_{tau_lo})`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::heat::heat_matrix;
use crate::measures::GridMeasure;
use crate::stopping::{StartingLaw, StoppingSpec};
use crate::surface::{Barrier, Surface};

/// μ-mass allowed on columns the barrier never reaches.
pub const MAX_UNREACHED_MASS: f64 = 1e-3;

/// Payoff `F` with derivative `f`, `F(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PayoffSpec {
    /// `F(v) = v^p / p`.
    Power { p: f64 },
}

impl Default for PayoffSpec {
    fn default() -> Self {
        PayoffSpec::Power { p: 3.0 }
    }
}

impl PayoffSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PayoffSpec::Power { p } if *p >= 1.0 && p.is_finite() => Ok(()),
            PayoffSpec::Power { p } => Err(Error::InvalidPayoff(format!(
                "power payoff needs p >= 1 for a convex increasing F, got {p}"
            ))),
        }
    }

    #[inline]
    pub fn big_f(&self, t: f64) -> f64 {
        match self {
            PayoffSpec::Power { p } => t.max(0.0).powf(*p) / p,
        }
    }

    #[inline]
    pub fn f(&self, t: f64) -> f64 {
        match self {
            PayoffSpec::Power { p } => {
                if *p == 1.0 {
                    1.0
                } else {
                    t.max(0.0).powf(p - 1.0)
                }
            }
        }
    }
}

/// Tolerance for pathwise checks of the sub-hedge.
pub fn eps_num(grid: &GridSpec, payoff: &PayoffSpec) -> f64 {
    let (dx, dt) = (grid.dx(), grid.dt());
    10.0 * (dx * dx + dt * dt) * (1.0 + payoff.f(grid.t_max))
}

/// Backward solve for `phi` with `phi = f(t)` on the barrier and
/// `phi(t_max) = f(t_max)`. Free edge columns reflect.
pub fn solve_phi(barrier: &Barrier, payoff: &PayoffSpec) -> Result<Surface> {
    payoff.validate()?;
    let g = barrier.grid;
    if !barrier.r.iter().any(|r| r.is_finite()) {
        return Err(Error::HorizonTooShort("barrier is empty inside the window".into()));
    }
    let r = g.dt() / (2.0 * g.dx() * g.dx());
    let mut phi = Surface::zeros(&g);
    let last = g.nt - 1;
    phi.values.row_mut(last).fill(payoff.f(g.t(last)));
    let mut rhs = vec![0.0; g.nx];
    let mut out = vec![0.0; g.nx];
    let mut prev: Vec<f64> = phi.values.row(last).to_vec();
    for n in (0..last).rev() {
        let fixed = |j: usize| barrier.contains(n, j);
        let ft = payoff.f(g.t(n));
        crate::heat::dirichlet_rhs(&prev, fixed, |_| ft, r, &mut rhs);
        let mut m = heat_matrix(g.nx, r, fixed, |_| 0.0);
        m.solve(&rhs, &mut out);
        phi.values.row_mut(n).assign(&ndarray::ArrayView1::from(&out[..]));
        std::mem::swap(&mut prev, &mut out);
    }
    Ok(phi)
}

/// `h` from `phi` by trapezoidal quadrature in both directions.
pub fn assemble_h(phi: &Surface) -> Surface {
    let g = phi.grid;
    let (dx, dt) = (g.dx(), g.dt());
    let s0 = g.s0_node();
    // inner integral Phi(y) = int_{s0}^y phi(0, z) dz, then H(x) = int_{s0}^x Phi
    let p0 = phi.values.row(0);
    let mut big_phi = vec![0.0; g.nx];
    for j in s0 + 1..g.nx {
        big_phi[j] = big_phi[j - 1] + 0.5 * dx * (p0[j - 1] + p0[j]);
    }
    for j in (0..s0).rev() {
        big_phi[j] = big_phi[j + 1] - 0.5 * dx * (p0[j + 1] + p0[j]);
    }
    let mut big_h = vec![0.0; g.nx];
    for j in s0 + 1..g.nx {
        big_h[j] = big_h[j - 1] + 0.5 * dx * (big_phi[j - 1] + big_phi[j]);
    }
    for j in (0..s0).rev() {
        big_h[j] = big_h[j + 1] - 0.5 * dx * (big_phi[j + 1] + big_phi[j]);
    }
    let mut h = Surface::zeros(&g);
    for j in 0..g.nx {
        let mut acc = 0.0;
        h.values[[0, j]] = -2.0 * big_h[j];
        for n in 1..g.nt {
            acc += 0.5 * dt * (phi.values[[n - 1, j]] + phi.values[[n, j]]);
            h.values[[n, j]] = acc - 2.0 * big_h[j];
        }
    }
    h
}

/// Static leg `lambda(x) = F(R(x)) - h(R(x), x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticLeg {
    pub grid: GridSpec,
    pub lambda: Vec<f64>,
    /// Columns the barrier never reaches; their value is copied from the
    /// nearest reached column.
    pub extrapolated: Vec<bool>,
}

impl StaticLeg {
    /// Linear interpolation between nodes.
    pub fn at(&self, x: f64) -> f64 {
        let (j, f) = self.grid.locate(x);
        self.lambda[j] * (1.0 - f) + self.lambda[j + 1] * f
    }

    pub fn integrate(&self, mu: &GridMeasure) -> f64 {
        let cells: f64 = mu.cell_mass.iter().zip(&self.lambda).map(|(m, l)| m * l).sum();
        let atoms: f64 = mu.atoms.iter().map(|&(x, m)| m * self.at(x)).sum();
        cells + atoms
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut s = String::from("x,lambda\n");
        for (j, l) in self.lambda.iter().enumerate() {
            s.push_str(&format!("{},{}\n", self.grid.x(j), l));
        }
        crate::measures::write_text(path, &s)
    }
}

pub fn compute_lambda(h: &Surface, barrier: &Barrier, payoff: &PayoffSpec, mu: &GridMeasure) -> Result<StaticLeg> {
    let g = h.grid;
    let mut lambda = vec![f64::NAN; g.nx];
    let mut extrapolated = vec![false; g.nx];
    for j in 0..g.nx {
        let r = barrier.r[j];
        if r.is_finite() {
            lambda[j] = payoff.big_f(r) - h.at(r, g.x(j));
        } else {
            extrapolated[j] = true;
        }
    }
    let unreached: f64 = mu
        .cell_mass
        .iter()
        .zip(&extrapolated)
        .filter(|(_, &e)| e)
        .map(|(m, _)| m)
        .sum::<f64>()
        + mu.atoms
            .iter()
            .filter(|&&(x, _)| barrier.at(x).is_infinite())
            .map(|a| a.1)
            .sum::<f64>();
    if unreached > MAX_UNREACHED_MASS {
        return Err(Error::HorizonTooShort(format!(
            "the barrier misses {unreached:.3e} of the target mass within t_max = {}",
            g.t_max
        )));
    }
    // flat extrapolation from the nearest reached column
    let reached: Vec<usize> = (0..g.nx).filter(|&j| !extrapolated[j]).collect();
    if reached.is_empty() {
        return Err(Error::HorizonTooShort("barrier is empty inside the window".into()));
    }
    for j in 0..g.nx {
        if extrapolated[j] {
            let k = reached.partition_point(|&k| k < j);
            let near = match (k.checked_sub(1).map(|i| reached[i]), reached.get(k)) {
                (Some(a), Some(&b)) => {
                    if j - a <= b - j {
                        a
                    } else {
                        b
                    }
                }
                (Some(a), None) => a,
                (None, Some(&b)) => b,
                (None, None) => unreachable!(),
            };
            lambda[j] = lambda[near];
        }
    }
    Ok(StaticLeg {
        grid: g,
        lambda,
        extrapolated,
    })
}

/// Price components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceParts {
    #[serde(rename = "M0")]
    pub m0: f64,
    pub static_leg: f64,
    pub total: f64,
}

/// `static_leg = int lambda dmu`, `M0 = int h dzeta`.
pub fn price(lambda: &StaticLeg, h: &Surface, mu: &GridMeasure, zeta: &StartingLaw) -> PriceParts {
    let static_leg = lambda.integrate(mu);
    let m0: f64 = zeta.points().iter().map(|&(n, j, m)| m * h.get(n, j)).sum();
    PriceParts {
        m0,
        static_leg,
        total: static_leg + m0,
    }
}

/// Trading ratios: `delta = dh/dx` after the information time, and
/// `alpha = dg/dx` before it, `g(t, x) = E[h(tau_lo, B_{tau_lo}) | B_t = x]`.
#[derive(Debug, Clone)]
pub struct HedgeRatios {
    pub delta: Surface,
    pub g: Surface,
    pub alpha: Surface,
}

/// Builds `g` as the exact adjoint of the forward walk that produced the
/// starting law, so that `g(0, s0)` reproduces `M0` to rounding.
pub fn hedge_ratios(h: &Surface, spec: &StoppingSpec) -> Result<HedgeRatios> {
    let g = h.grid;
    spec.validate(&g)?;
    let delta = h.x_derivative();
    let mask: Box<dyn Fn(usize, usize) -> bool> = match spec {
        StoppingSpec::Zero => Box::new(|_, _| true),
        StoppingSpec::FixedTime { t0 } => {
            let n0 = g.time_index(*t0);
            Box::new(move |n, _| n >= n0)
        }
        StoppingSpec::IntervalExit { a, b, .. } => {
            let (lo, hi) = (g.node_of(*a).unwrap(), g.node_of(*b).unwrap());
            Box::new(move |_, j| j <= lo || j >= hi)
        }
        StoppingSpec::BarrierFile { path } => {
            let b = Barrier::read_csv(&g, path)?;
            Box::new(move |n, j| b.contains(n, j))
        }
        StoppingSpec::Barrier(b) => {
            let b = b.clone();
            Box::new(move |n, j| b.contains(n, j))
        }
    };
    let kill_dt = spec.kill_rate() * g.dt();
    let r = g.dt() / (2.0 * g.dx() * g.dx());
    let (nt, nx) = (g.nt, g.nx);
    let mut gs = Surface::zeros(&g);
    gs.values.row_mut(nt - 1).assign(&h.values.row(nt - 1));
    let mut y = vec![0.0; nx];
    let mut out = vec![0.0; nx];
    for n in (0..nt - 1).rev() {
        let fixed: Vec<bool> = (0..nx).map(|j| mask(n, j)).collect();
        for j in 0..nx {
            if fixed[j] {
                y[j] = h.get(n, j);
                continue;
            }
            // value of a unit of free mass at j after the next step
            let after = if mask(n + 1, j) { h.get(n + 1, j) } else { gs.get(n + 1, j) };
            // killing and flux during the step are dated at its start
            let mut v = after + kill_dt * h.get(n, j);
            if j > 0 && fixed[j - 1] {
                v += r * h.get(n, j - 1);
            }
            if j + 1 < nx && fixed[j + 1] {
                v += r * h.get(n, j + 1);
            }
            y[j] = v;
        }
        let mut m = heat_matrix(nx, r, |j| fixed[j], |_| kill_dt);
        m.solve(&y, &mut out);
        gs.values.row_mut(n).assign(&ndarray::ArrayView1::from(&out[..]));
    }
    let alpha = gs.x_derivative();
    Ok(HedgeRatios { delta, g: gs, alpha })
}

/// Everything needed to trade and price the sub-hedge.
#[derive(Debug, Clone)]
pub struct HedgePackage {
    pub payoff: PayoffSpec,
    pub phi: Surface,
    pub h: Surface,
    pub lambda: StaticLeg,
    pub ratios: HedgeRatios,
    pub parts: PriceParts,
    pub eps_num: f64,
}

impl HedgePackage {
    pub fn build(
        barrier: &Barrier,
        payoff: &PayoffSpec,
        mu: &GridMeasure,
        zeta: &StartingLaw,
        spec: &StoppingSpec,
    ) -> Result<Self> {
        let phi = solve_phi(barrier, payoff)?;
        let h = assemble_h(&phi);
        let lambda = compute_lambda(&h, barrier, payoff, mu)?;
        let parts = price(&lambda, &h, mu, zeta);
        let ratios = hedge_ratios(&h, spec)?;
        Ok(HedgePackage {
            payoff: *payoff,
            phi,
            eps_num: eps_num(&barrier.grid, payoff),
            h,
            lambda,
            ratios,
            parts,
        })
    }

    /// `F(t) - lambda(x) - h(t, x)`, nonnegative for a valid sub-hedge.
    pub fn slack(&self, t: f64, x: f64) -> f64 {
        self.payoff.big_f(t) - self.lambda.at(x) - self.h.at(t, x)
    }
}
