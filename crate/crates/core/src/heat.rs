//! Implicit heat steps on the spatial grid.
//!
//! Every evolution in the crate uses the same backward-Euler operator
//! `A = I - (dt/2) D2` (central second difference). Read forward it moves
//! probability mass like a symmetric random walk (rate `1/(2 dx^2)` each
//! way); read backward it takes conditional expectations. Nodes marked as
//! fixed are absorbing for mass and Dirichlet for functions. Free nodes at
//! the grid edges reflect.

use ndarray::Array2;

use crate::grid::GridSpec;

/// Tridiagonal matrix solved with the Thomas algorithm.
#[derive(Debug, Clone)]
pub(crate) struct Tridiag {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    work: Vec<f64>,
}

impl Tridiag {
    pub(crate) fn solve(&mut self, rhs: &[f64], out: &mut [f64]) {
        let n = self.diag.len();
        debug_assert_eq!(rhs.len(), n);
        debug_assert_eq!(out.len(), n);
        let c = &mut self.work;
        c.resize(n, 0.0);
        let mut m = self.diag[0];
        c[0] = self.upper[0] / m;
        out[0] = rhs[0] / m;
        for i in 1..n {
            m = self.diag[i] - self.lower[i] * c[i - 1];
            c[i] = self.upper[i] / m;
            out[i] = (rhs[i] - self.lower[i] * out[i - 1]) / m;
        }
        for i in (0..n - 1).rev() {
            out[i] -= c[i] * out[i + 1];
        }
    }
}

/// Builds `A = I - (dt/2) D2 + kill` restricted to the free nodes.
///
/// `r = dt / (2 dx^2)`. Fixed nodes get identity rows. A free node keeps the
/// full outflow on its diagonal even when a neighbour is fixed; that outflow
/// is the flux absorbed by the neighbour.
pub(crate) fn heat_matrix(
    nx: usize,
    r: f64,
    fixed: impl Fn(usize) -> bool,
    kill_dt: impl Fn(usize) -> f64,
) -> Tridiag {
    let mut lower = vec![0.0; nx];
    let mut diag = vec![1.0; nx];
    let mut upper = vec![0.0; nx];
    for j in 0..nx {
        if fixed(j) {
            continue;
        }
        let mut d = 1.0 + kill_dt(j);
        if j > 0 {
            d += r;
            if !fixed(j - 1) {
                lower[j] = -r;
            }
        }
        if j + 1 < nx {
            d += r;
            if !fixed(j + 1) {
                upper[j] = -r;
            }
        }
        diag[j] = d;
    }
    Tridiag {
        lower,
        diag,
        upper,
        work: Vec::with_capacity(nx),
    }
}

/// Right-hand side for a backward (function) step with Dirichlet values on
/// the fixed nodes.
pub(crate) fn dirichlet_rhs(
    prev: &[f64],
    fixed: impl Fn(usize) -> bool,
    boundary: impl Fn(usize) -> f64,
    r: f64,
    rhs: &mut [f64],
) {
    let nx = prev.len();
    for j in 0..nx {
        if fixed(j) {
            rhs[j] = boundary(j);
            continue;
        }
        let mut v = prev[j];
        if j > 0 && fixed(j - 1) {
            v += r * boundary(j - 1);
        }
        if j + 1 < nx && fixed(j + 1) {
            v += r * boundary(j + 1);
        }
        rhs[j] = v;
    }
}

/// Mass bookkeeping of a forward walk, indexed `[time slice, node]`.
#[derive(Debug, Clone)]
pub(crate) struct WalkRecord {
    /// Mass stopped on arrival at slice `n`: free mass on newly absorbing
    /// nodes and releases onto absorbing nodes.
    pub absorbed: Array2<f64>,
    /// Mass that flowed into absorbing nodes during step `n`.
    pub flux: Array2<f64>,
    /// Mass removed by the killing rate.
    pub killed: Array2<f64>,
    /// Free mass after the slice's updates.
    pub free: Array2<f64>,
    /// Mass injected per slice.
    pub injected: Vec<f64>,
}

/// Forward random walk with absorption and killing.
///
/// Mass stopped during step `n` (flux and killing) is consistent with the
/// discrete identities `E tau = E B_tau^2` and `P(killed) = rho E tau` when
/// it is dated `t_{n-1}`; callers use that date for time integrals.
///
/// Slice `n >= 1` proceeds as: diffuse over `(t_{n-1}, t_n]` with absorbing
/// set `absorbing(n - 1, .)` and killing rate `kill_rate` on the free nodes;
/// stop free mass sitting on `absorbing(n, .)`; then add the mass released
/// by `inject(n, .)`, stopping it at once where `absorbing(n, .)` holds.
pub(crate) fn run_walk(
    grid: &GridSpec,
    kill_rate: f64,
    absorbing: impl Fn(usize, usize) -> bool,
    mut inject: impl FnMut(usize, &mut [f64]),
) -> WalkRecord {
    let (nt, nx) = (grid.nt, grid.nx);
    let dt = grid.dt();
    let r = dt / (2.0 * grid.dx() * grid.dx());
    let mut absorbed = Array2::<f64>::zeros((nt, nx));
    let mut flux_rec = Array2::<f64>::zeros((nt, nx));
    let mut killed = Array2::<f64>::zeros((nt, nx));
    let mut free_rec = Array2::<f64>::zeros((nt, nx));
    let mut injected = vec![0.0; nt];

    let mut free = vec![0.0; nx];
    let mut next = vec![0.0; nx];
    let mut release = vec![0.0; nx];

    let mut deposit = |n: usize,
                       free: &mut [f64],
                       release: &mut [f64],
                       absorbed: &mut Array2<f64>,
                       injected: &mut [f64]| {
        release.iter_mut().for_each(|m| *m = 0.0);
        inject(n, release);
        let mut total = 0.0;
        for j in 0..nx {
            let m = release[j];
            if m == 0.0 {
                continue;
            }
            total += m;
            if absorbing(n, j) {
                absorbed[[n, j]] += m;
            } else {
                free[j] += m;
            }
        }
        injected[n] = total;
    };

    deposit(0, &mut free, &mut release, &mut absorbed, &mut injected);
    free_rec.row_mut(0).assign(&ndarray::ArrayView1::from(&free[..]));

    let mut mask_prev: Vec<bool> = (0..nx).map(|j| absorbing(0, j)).collect();
    let kill_dt = kill_rate * dt;
    let mut mat = heat_matrix(nx, r, |j| mask_prev[j], |_| kill_dt);

    for n in 1..nt {
        let mask_now: Vec<bool> = (0..nx).map(|j| absorbing(n - 1, j)).collect();
        if mask_now != mask_prev {
            mat = heat_matrix(nx, r, |j| mask_now[j], |_| kill_dt);
            mask_prev = mask_now;
        }
        if free.iter().any(|&m| m != 0.0) {
            mat.solve(&free, &mut next);
            for j in 0..nx {
                if mask_prev[j] {
                    // flux from free neighbours
                    let mut flux = 0.0;
                    if j > 0 && !mask_prev[j - 1] {
                        flux += next[j - 1];
                    }
                    if j + 1 < nx && !mask_prev[j + 1] {
                        flux += next[j + 1];
                    }
                    flux_rec[[n, j]] += r * flux;
                    next[j] = 0.0;
                } else if kill_dt > 0.0 {
                    killed[[n, j]] = kill_dt * next[j];
                }
            }
            std::mem::swap(&mut free, &mut next);
        }
        for j in 0..nx {
            if free[j] != 0.0 && absorbing(n, j) {
                absorbed[[n, j]] += free[j];
                free[j] = 0.0;
            }
        }
        deposit(n, &mut free, &mut release, &mut absorbed, &mut injected);
        free_rec.row_mut(n).assign(&ndarray::ArrayView1::from(&free[..]));
    }

    WalkRecord {
        absorbed,
        flux: flux_rec,
        killed,
        free: free_rec,
        injected,
    }
}

/// One linear complementarity problem per time step:
/// find `v` with `A v >= rhs`, `v >= obstacle`, `(A v - rhs) . (v - obstacle) = 0`,
/// where `A = I - (dt/2) D2` on the interior and `v = obstacle` on both edges.
pub struct StepLcp<'a> {
    pub r: f64,
    pub rhs: &'a [f64],
    pub obstacle: &'a [f64],
}

/// Solver for [`StepLcp`]. The projected SOR iteration is the default; a
/// pivoting method can be plugged in through this trait.
pub trait LcpSolver {
    /// Solves in place starting from the guess in `v`; returns the number of
    /// iterations, or the last update size on failure.
    fn solve(&self, lcp: &StepLcp<'_>, v: &mut [f64]) -> std::result::Result<usize, (usize, f64)>;
}

/// Projected successive over-relaxation.
#[derive(Debug, Clone, Copy)]
pub struct Psor {
    pub omega: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl LcpSolver for Psor {
    fn solve(&self, lcp: &StepLcp<'_>, v: &mut [f64]) -> std::result::Result<usize, (usize, f64)> {
        let n = v.len();
        let (r, rhs, obs) = (lcp.r, lcp.rhs, lcp.obstacle);
        let inv_d = 1.0 / (1.0 + 2.0 * r);
        v[0] = obs[0];
        v[n - 1] = obs[n - 1];
        for j in 1..n - 1 {
            v[j] = v[j].max(obs[j]);
        }
        let mut change = f64::INFINITY;
        for it in 1..=self.max_iter {
            change = 0.0;
            for j in 1..n - 1 {
                let gs = (rhs[j] + r * (v[j - 1] + v[j + 1])) * inv_d;
                let updated = (v[j] + self.omega * (gs - v[j])).max(obs[j]);
                change = f64::max(change, (updated - v[j]).abs());
                v[j] = updated;
            }
            if change < self.tol {
                return Ok(it);
            }
        }
        Err((self.max_iter, change))
    }
}
