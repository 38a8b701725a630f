//! Monte Carlo paths through the information clock and a barrier, plus the
//! checks built on them: embedding distance, primal value, pathwise
//! sub-hedge, barrier support and the Azéma–Yor embedding.
//!
//! Every path draws from its own ChaCha stream keyed by `(seed, path)`,
//! so results do not depend on the scheduler or the thread count.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::GridSpec;
use crate::hedge::{HedgePackage, PayoffSpec};
use crate::measures::{write_text, GridMeasure};
use crate::stopping::StoppingSpec;
use crate::surface::Barrier;

/// Fraction of unstopped paths above which a simulation fails.
pub const MAX_UNSTOPPED: f64 = 1e-3;
/// Fraction of pathwise sub-hedge violations tolerated.
pub const MAX_VIOLATION_RATE: f64 = 1e-3;
/// Width of the crossing search around a path, in bridge standard deviations.
const BRIDGE_REACH: f64 = 7.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathConfig {
    pub n_paths: usize,
    /// Simulation step; `None` means a quarter of the grid step.
    pub dt_sim: Option<f64>,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            n_paths: 100_000,
            dt_sim: None,
            seed: 20_240_601,
            antithetic: false,
        }
    }
}

impl PathConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        PathConfig {
            n_paths,
            seed,
            ..Default::default()
        }
    }

    /// The simulation step on `grid`, validated.
    pub fn step(&self, grid: &GridSpec) -> Result<f64> {
        if self.n_paths == 0 {
            return Err(Error::InvalidParameter("n_paths must be positive".into()));
        }
        let dt = self.dt_sim.unwrap_or(grid.dt() / 4.0);
        if !(dt > 0.0) || dt > grid.dt() * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "dt_sim = {dt} must lie in (0, grid dt = {}]",
                grid.dt()
            )));
        }
        Ok(dt)
    }

    fn rngs(&self, path: usize) -> (ChaCha8Rng, ChaCha8Rng, f64) {
        let (key, sign) = if self.antithetic {
            (path / 2, if path.is_multiple_of(2) { 1.0 } else { -1.0 })
        } else {
            (path, 1.0)
        };
        let mut moves = ChaCha8Rng::seed_from_u64(self.seed);
        moves.set_stream(2 * key as u64);
        let mut clock = ChaCha8Rng::seed_from_u64(self.seed);
        clock.set_stream(2 * key as u64 + 1);
        (moves, clock, sign)
    }
}

/// Per-path driver: Gaussian increments with a companion uniform drawn
/// every step, so antithetic partners stay in lockstep.
struct Walker {
    rng: ChaCha8Rng,
    sign: f64,
}

impl Walker {
    fn step(&mut self, h: f64) -> (f64, f64) {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        let u: f64 = self.rng.random();
        (self.sign * z * h.sqrt(), u)
    }
}

/// Probability that a Brownian bridge from `x0` to `x1` over time `h`
/// touches `level`, both ends being on the same side of it.
fn bridge_hit(x0: f64, x1: f64, level: f64, h: f64) -> f64 {
    (-2.0 * (x0 - level) * (x1 - level) / h).exp()
}

/// One simulated path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub tau_lower: f64,
    pub b_lower: f64,
    pub tau: f64,
    pub b_tau: f64,
    pub stopped: bool,
    /// Largest `t - R(B_t)` at a continuation step after `tau_lower`.
    pub max_intrusion: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    pub fn from_values(values: impl Iterator<Item = f64>) -> Self {
        let (mut n, mut s, mut s2) = (0usize, 0.0, 0.0);
        for v in values {
            n += 1;
            s += v;
            s2 += v * v;
        }
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                std_err: f64::NAN,
            };
        }
        let nf = n as f64;
        let mean = s / nf;
        let var = if n > 1 {
            ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            std_err: (var / nf).sqrt(),
        }
    }

    /// Whether `value` lies within `k` standard errors.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.std_err + 1e-12
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimResult {
    pub config: PathConfig,
    pub dt_sim: f64,
    pub horizon: f64,
    #[serde(skip)]
    pub samples: Vec<PathSample>,
    pub tau: Estimate,
    pub tau_lower: Estimate,
    pub unstopped: usize,
    /// Paths with `tau < tau_lower`; zero by construction.
    pub feasibility_violations: usize,
}

impl SimResult {
    fn collect(config: PathConfig, dt_sim: f64, horizon: f64, samples: Vec<PathSample>) -> Result<Self> {
        let unstopped = samples.iter().filter(|s| !s.stopped).count();
        let feasibility_violations = samples.iter().filter(|s| s.tau < s.tau_lower).count();
        let res = SimResult {
            config,
            dt_sim,
            horizon,
            tau: Estimate::from_values(samples.iter().map(|s| s.tau)),
            tau_lower: Estimate::from_values(samples.iter().map(|s| s.tau_lower)),
            samples,
            unstopped,
            feasibility_violations,
        };
        let frac = unstopped as f64 / res.samples.len() as f64;
        if frac > MAX_UNSTOPPED {
            return Err(Error::Simulation(format!(
                "{unstopped} of {} paths are unstopped at t = {horizon}",
                res.samples.len()
            )));
        }
        Ok(res)
    }

    /// Dumps `path_id,tau_lower,b_lower,tau,b_tau,payoff`.
    pub fn write_csv(&self, payoff: &PayoffSpec, path: &Path) -> Result<()> {
        let mut s = String::from("path_id,tau_lower,b_lower,tau,b_tau,payoff\n");
        for (i, p) in self.samples.iter().enumerate() {
            s.push_str(&format!(
                "{i},{},{},{},{},{}\n",
                p.tau_lower,
                p.b_lower,
                p.tau,
                p.b_tau,
                payoff.big_f(p.tau)
            ));
        }
        write_text(path, &s)
    }
}

/// Where, if anywhere, a path entering the barrier stopped.
enum Move {
    Continue,
    Stop(f64, f64),
}

/// Barrier lookup used inside the path loop.
struct Contact<'a> {
    barrier: &'a Barrier,
    grid: GridSpec,
}

impl<'a> Contact<'a> {
    fn new(barrier: &'a Barrier) -> Self {
        Contact {
            barrier,
            grid: barrier.grid,
        }
    }

    /// `R` at a node, or the larger of the two node values inside a cell:
    /// where `R` jumps, contact stays on the node instead of smearing an
    /// atom across the cell.
    fn r(&self, x: f64) -> f64 {
        let (j, f) = self.grid.locate(x.clamp(self.grid.x_min, self.grid.x_max));
        let r = &self.barrier.r;
        if f <= 1e-12 {
            r[j]
        } else if f >= 1.0 - 1e-12 {
            r[j + 1]
        } else {
            r[j].max(r[j + 1])
        }
    }

    /// Nearest point of `{x : R(x) <= t}` below (`dir = -1`) or above
    /// (`dir = +1`) `x0`, searched up to `reach`. Beyond the grid `R` keeps
    /// its edge value, so the grid ends are not contact points.
    fn edge(&self, x0: f64, t: f64, dir: i32, reach: f64) -> Option<f64> {
        let g = &self.grid;
        let dx = g.dx();
        let r = &self.barrier.r;
        let x0 = x0.clamp(g.x_min, g.x_max);
        let (j0, f) = g.locate(x0);
        if dir < 0 {
            // segment [x_j, x_{j+1}] clipped to <= x0, walking down
            let mut j = j0;
            let mut top = x0;
            loop {
                let xa = g.x(j);
                if x0 - top > reach {
                    return None;
                }
                if let Some(e) = segment_max(xa, top, dx, r[j], r[j + 1], t) {
                    return Some(e);
                }
                if j == 0 {
                    return None;
                }
                top = xa;
                j -= 1;
            }
        } else {
            let mut j = if f >= 1.0 - 1e-12 { j0 + 1 } else { j0 };
            let mut bottom = x0;
            loop {
                if j + 1 >= g.nx {
                    return None;
                }
                let xb = g.x(j + 1);
                if bottom - x0 > reach {
                    return None;
                }
                if let Some(e) = segment_min(g.x(j), bottom, xb, r[j], r[j + 1], t) {
                    return Some(e);
                }
                bottom = xb;
                j += 1;
            }
        }
    }

    /// One step from `(t0, x0)` (in continuation) to `t0 + h`.
    fn advance(&self, t0: f64, x0: f64, dx_move: f64, u: f64, h: f64) -> (f64, Move) {
        let t1 = t0 + h;
        let x1 = x0 + dx_move;
        // the barrier may reach the current level before the path moves
        let r0 = self.r(x0);
        if r0 <= t1 {
            return (x1, Move::Stop(r0.max(t0), x0));
        }
        let reach = BRIDGE_REACH * h.sqrt() + dx_move.abs();
        let lo = self.edge(x0, t1, -1, reach);
        let hi = self.edge(x0, t1, 1, reach);
        if let Some(e) = lo {
            if x1 <= e {
                return (x1, Move::Stop(t1, e));
            }
        }
        if let Some(e) = hi {
            if x1 >= e {
                return (x1, Move::Stop(t1, e));
            }
        }
        let p_lo = lo.map_or(0.0, |e| bridge_hit(x0, x1, e, h));
        let p_hi = hi.map_or(0.0, |e| bridge_hit(x0, x1, e, h));
        if u < p_lo {
            return (x1, Move::Stop(t1, lo.unwrap()));
        }
        if u < p_lo + (1.0 - p_lo) * p_hi {
            return (x1, Move::Stop(t1, hi.unwrap()));
        }
        (x1, Move::Continue)
    }

    /// Runs from `(t, x)` until the barrier is reached or `horizon` passes.
    /// Returns `(tau, B_tau, stopped, max_intrusion)`.
    fn run(&self, walker: &mut Walker, mut t: f64, mut x: f64, dt: f64, horizon: f64) -> (f64, f64, bool, f64) {
        let r0 = self.r(x);
        if r0 <= t {
            return (t, x, true, f64::NEG_INFINITY);
        }
        let mut intrusion = t - r0;
        while t < horizon - 1e-12 {
            let h = dt.min(horizon - t);
            let (dw, u) = walker.step(h);
            match self.advance(t, x, dw, u, h) {
                (_, Move::Stop(ts, xs)) => return (ts, xs, true, intrusion),
                (x1, Move::Continue) => {
                    t += h;
                    x = x1;
                    intrusion = intrusion.max(t - self.r(x));
                }
            }
        }
        (t, x, false, intrusion)
    }
}

/// Largest `x` in `[xa, top]` in the contact set; inside a cell `R` is the
/// larger of its two node values.
fn segment_max(xa: f64, top: f64, dx: f64, ra: f64, rb: f64, t: f64) -> Option<f64> {
    let xb = xa + dx;
    if ra <= t && rb <= t {
        Some(top)
    } else if rb <= t && top >= xb - 1e-12 {
        Some(xb)
    } else if ra <= t {
        Some(xa)
    } else {
        None
    }
}

/// Smallest `x` in `[bottom, xb]` in the contact set.
fn segment_min(xa: f64, bottom: f64, xb: f64, ra: f64, rb: f64, t: f64) -> Option<f64> {
    if ra <= t && rb <= t {
        Some(bottom)
    } else if ra <= t && bottom <= xa + 1e-12 {
        Some(xa)
    } else if rb <= t {
        Some(xb)
    } else {
        None
    }
}

/// Simulates `tau_lower` from `spec`, then the first time after it at which
/// the path is in the barrier region `{t >= R(x)}`.
pub fn simulate(spec: &StoppingSpec, barrier: &Barrier, cfg: &PathConfig, exec: Execution) -> Result<SimResult> {
    let g = barrier.grid;
    spec.validate(&g)?;
    let dt = cfg.step(&g)?;
    let horizon = g.t_max;
    let info_barrier = match spec {
        StoppingSpec::Barrier(b) => Some(b.clone()),
        StoppingSpec::BarrierFile { path } => Some(Barrier::read_csv(&g, path)?),
        _ => None,
    };
    let contact = Contact::new(barrier);
    let info_contact = info_barrier.as_ref().map(Contact::new);
    let clock = match spec {
        StoppingSpec::IntervalExit { rho, .. } if *rho > 0.0 => Some(
            Exp::new(*rho).map_err(|e| Error::InvalidParameter(format!("kill rate: {e}")))?,
        ),
        _ => None,
    };

    let samples = exec.map_indexed(cfg.n_paths, |i| {
        let (moves, mut clock_rng, sign) = cfg.rngs(i);
        let mut walker = Walker { rng: moves, sign };
        let s0 = g.s0;
        let (tl, bl) = match spec {
            StoppingSpec::Zero => (0.0, s0),
            StoppingSpec::FixedTime { t0 } => {
                let (dw, _) = walker.step(*t0);
                (*t0, s0 + dw)
            }
            StoppingSpec::IntervalExit { a, b, .. } => {
                let kill = clock.map_or(f64::INFINITY, |c| c.sample(&mut clock_rng));
                interval_exit(&mut walker, s0, *a, *b, kill, dt, horizon)
            }
            StoppingSpec::Barrier(_) | StoppingSpec::BarrierFile { .. } => {
                let c = info_contact.as_ref().expect("information barrier");
                let (t, x, _, _) = c.run(&mut walker, 0.0, s0, dt, horizon);
                (t, x)
            }
        };
        let (tau, b_tau, stopped, max_intrusion) = contact.run(&mut walker, tl, bl, dt, horizon);
        PathSample {
            tau_lower: tl,
            b_lower: bl,
            tau,
            b_tau,
            stopped,
            max_intrusion,
        }
    });
    SimResult::collect(*cfg, dt, horizon, samples)
}

/// First exit of `(a, b)` with bridge correction, or the clock ring at
/// `kill`, whichever comes first; `horizon` if neither happens.
fn interval_exit(walker: &mut Walker, s0: f64, a: f64, b: f64, kill: f64, dt: f64, horizon: f64) -> (f64, f64) {
    let (mut t, mut x) = (0.0, s0);
    if x <= a {
        return (0.0, a);
    }
    if x >= b {
        return (0.0, b);
    }
    let end = kill.min(horizon);
    while t < end - 1e-15 {
        let h = dt.min(end - t);
        let (dw, u) = walker.step(h);
        let x1 = x + dw;
        t += h;
        if x1 <= a {
            return (t, a);
        }
        if x1 >= b {
            return (t, b);
        }
        let p_lo = bridge_hit(x, x1, a, h);
        let p_hi = bridge_hit(x, x1, b, h);
        if u < p_lo {
            return (t, a);
        }
        if u < p_lo + (1.0 - p_lo) * p_hi {
            return (t, b);
        }
        x = x1;
    }
    (end, x)
}

/// Distance of the simulated law of `B_tau` from `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub ks: f64,
    pub ks_threshold: f64,
    /// Largest `|u_emp - u_mu|` over grid nodes.
    pub potential_gap: f64,
    /// Largest gap in units of the pointwise standard error, after removing
    /// the grid tolerance.
    pub potential_z: f64,
    pub mean_tau: f64,
    pub std_err_tau: f64,
    /// `int (x - s0)^2 dmu`.
    #[serde(rename = "V")]
    pub v: f64,
    pub tau_rel_gap: f64,
    pub ks_pass: bool,
    pub potential_pass: bool,
}

impl EmbeddingReport {
    pub fn passes(&self) -> bool {
        self.ks_pass && self.potential_pass
    }

    /// `E[tau]` within `k` standard errors of `V`, or within `rel`.
    pub fn time_matches(&self, k: f64, rel: f64) -> bool {
        (self.mean_tau - self.v).abs() <= k * self.std_err_tau || self.tau_rel_gap <= rel
    }
}

/// Kolmogorov–Smirnov distance and potential gap of the stopped positions.
pub fn verify_embedding(res: &SimResult, mu: &GridMeasure) -> EmbeddingReport {
    let g = mu.grid;
    let mut xs: Vec<f64> = res.samples.iter().map(|s| s.b_tau).collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let nf = n as f64;

    let mut ks: f64 = 0.0;
    let mut i = 0;
    while i < n {
        let x = xs[i];
        let mut k = i;
        while k < n && xs[k] == x {
            k += 1;
        }
        ks = ks
            .max((i as f64 / nf - mu.cdf_left(x)).abs())
            .max((k as f64 / nf - mu.cdf(x)).abs());
        i = k;
    }

    // empirical potential via prefix sums over the sorted sample
    let mut prefix = vec![0.0; n + 1];
    for (k, x) in xs.iter().enumerate() {
        prefix[k + 1] = prefix[k] + x;
    }
    let m1 = prefix[n] / nf;
    let m2 = xs.iter().map(|x| x * x).sum::<f64>() / nf;
    let u_mu = mu.potential();
    let tol = 2.0 * g.dx();
    let (mut gap, mut z) = (0.0f64, 0.0f64);
    for (j, &y) in g.xs().iter().enumerate() {
        let below = xs.partition_point(|&x| x < y);
        let sum_below = prefix[below];
        let sum_above = prefix[n] - sum_below;
        let abs_mean = (y * below as f64 - sum_below + sum_above - y * (n - below) as f64) / nf;
        let d = (-abs_mean - u_mu[j]).abs();
        let var = (m2 - 2.0 * y * m1 + y * y - abs_mean * abs_mean).max(0.0);
        let se = (var / nf).sqrt().max(1e-12);
        gap = gap.max(d);
        z = z.max((d - tol).max(0.0) / se);
    }

    let ks_threshold = 3.0 / nf.sqrt() + 2.0 * g.dx();
    let v = mu.second_moment();
    EmbeddingReport {
        ks,
        ks_threshold,
        potential_gap: gap,
        potential_z: z,
        mean_tau: res.tau.mean,
        std_err_tau: res.tau.std_err,
        v,
        tau_rel_gap: (res.tau.mean - v).abs() / v.max(1e-300),
        ks_pass: ks <= ks_threshold,
        potential_pass: z <= 4.0,
    }
}

/// Sample mean of `F(tau)` with a 99% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimalEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub fn primal_estimate(res: &SimResult, payoff: &PayoffSpec) -> PrimalEstimate {
    let e = Estimate::from_values(res.samples.iter().map(|s| payoff.big_f(s.tau)));
    let z = Normal::standard().inverse_cdf(0.995);
    PrimalEstimate {
        mean: e.mean,
        std_err: e.std_err,
        ci_low: e.mean - z * e.std_err,
        ci_high: e.mean + z * e.std_err,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubhedgeReport {
    pub n_paths: usize,
    pub violations: usize,
    pub violation_rate: f64,
    pub eps_num: f64,
    /// Largest `lambda(B) + h(tau, B) - F(tau)` over all paths.
    pub worst_shortfall: f64,
    pub lambda_shift: f64,
    pub pass: bool,
}

/// Counts paths with `F(tau) < lambda(B_tau) + h(tau, B_tau) - eps_num`.
pub fn pathwise_subhedge_check(res: &SimResult, pkg: &HedgePackage) -> SubhedgeReport {
    subhedge_with_shift(res, pkg, 0.0)
}

/// The same check with `lambda` raised by `shift`; a positive shift is a
/// control that must produce violations.
pub fn subhedge_with_shift(res: &SimResult, pkg: &HedgePackage, shift: f64) -> SubhedgeReport {
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for s in &res.samples {
        let short = pkg.lambda.at(s.b_tau) + shift + pkg.h.at(s.tau, s.b_tau) - pkg.payoff.big_f(s.tau);
        worst = worst.max(short);
        if short > pkg.eps_num {
            violations += 1;
        }
    }
    let n = res.samples.len();
    let rate = violations as f64 / n as f64;
    SubhedgeReport {
        n_paths: n,
        violations,
        violation_rate: rate,
        eps_num: pkg.eps_num,
        worst_shortfall: worst,
        lambda_shift: shift,
        pass: rate <= MAX_VIOLATION_RATE,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    /// Paths that moved on inside the barrier region for more than one
    /// time cell after `tau_lower`.
    pub moved_inside: usize,
    /// Paths stopped strictly before the barrier and after `tau_lower`.
    pub stopped_outside: usize,
    pub worst_intrusion: f64,
    pub pass: bool,
}

/// Stopped points lie in the barrier region and moving points outside it,
/// up to one time cell.
pub fn barrier_support_check(res: &SimResult, barrier: &Barrier) -> SupportReport {
    let dt = barrier.grid.dt();
    let c = Contact::new(barrier);
    let mut moved_inside = 0;
    let mut stopped_outside = 0;
    let mut worst = f64::NEG_INFINITY;
    for s in res.samples.iter().filter(|s| s.stopped) {
        worst = worst.max(s.max_intrusion);
        if s.max_intrusion > dt {
            moved_inside += 1;
        }
        if s.tau > s.tau_lower && s.tau < c.r(s.b_tau) - dt {
            stopped_outside += 1;
        }
    }
    SupportReport {
        moved_inside,
        stopped_outside,
        worst_intrusion: worst,
        pass: moved_inside == 0 && stopped_outside == 0 && res.feasibility_violations == 0,
    }
}

/// Tabulated right-continuous inverse barycenter.
struct BetaTable {
    lo: f64,
    step: f64,
    values: Vec<f64>,
    ess_sup: f64,
}

impl BetaTable {
    fn new(mu: &GridMeasure) -> Self {
        let bary = mu.barycenter();
        let (lo, hi) = (bary.mean(), bary.ess_sup());
        let n = 4 * mu.grid.nx;
        let step = ((hi - lo) / n as f64).max(1e-300);
        let values = (0..=n)
            .map(|k| {
                let y = (lo + k as f64 * step).min(hi - 1e-9 * step);
                bary.beta(y)
            })
            .collect();
        BetaTable {
            lo,
            step,
            values,
            ess_sup: hi,
        }
    }

    fn at(&self, y: f64) -> f64 {
        if y < self.lo - 1e-12 {
            return f64::NEG_INFINITY;
        }
        if y >= self.ess_sup - 1e-12 {
            return f64::INFINITY;
        }
        let s = ((y - self.lo) / self.step).max(0.0);
        let k = (s.floor() as usize).min(self.values.len() - 2);
        let f = s - k as f64;
        let (a, b) = (self.values[k], self.values[k + 1]);
        if a.is_infinite() || b.is_infinite() {
            return a;
        }
        a + (b - a) * f
    }
}

/// Azéma–Yor embedding: stop when `B <= beta(max B)`. Paths start at `s0`
/// and run until `mu.grid.t_max` at most.
pub fn simulate_ay(mu: &GridMeasure, cfg: &PathConfig, exec: Execution) -> Result<SimResult> {
    let g = mu.grid;
    let dt = cfg.step(&g)?;
    let horizon = g.t_max;
    let beta = BetaTable::new(mu);
    let samples = exec.map_indexed(cfg.n_paths, |i| {
        let (moves, _, sign) = cfg.rngs(i);
        let mut walker = Walker { rng: moves, sign };
        let (mut t, mut x) = (0.0, g.s0);
        let mut top = x;
        let done = |t: f64, x: f64| PathSample {
            tau_lower: 0.0,
            b_lower: g.s0,
            tau: t,
            b_tau: x,
            stopped: true,
            max_intrusion: f64::NEG_INFINITY,
        };
        if beta.at(top) >= x {
            return done(0.0, x.min(beta.ess_sup));
        }
        while t < horizon - 1e-12 {
            let h = dt.min(horizon - t);
            let (dw, u) = walker.step(h);
            let x1 = x + dw;
            // exact maximum of the bridge between x and x1
            let bridge_top = 0.5 * (x + x1 + (dw * dw - 2.0 * h * (1.0 - u).ln()).sqrt());
            t += h;
            if bridge_top >= beta.ess_sup {
                return done(t, beta.ess_sup);
            }
            top = top.max(bridge_top);
            let level = beta.at(top);
            // drawn every step to keep antithetic partners aligned
            let v: f64 = walker.rng.random();
            if x1 <= level || (level.is_finite() && v < bridge_hit(x, x1, level, h)) {
                return done(t, level);
            }
            x = x1;
        }
        PathSample {
            tau_lower: 0.0,
            b_lower: g.s0,
            tau: t,
            b_tau: x,
            stopped: false,
            max_intrusion: f64::NEG_INFINITY,
        }
    });
    SimResult::collect(*cfg, dt, horizon, samples)
}
