//! Probability measures on the spatial grid: construction, potentials,
//! barycenters and convex order.
//!
//! A [`GridMeasure`] is a set of node masses plus free-standing atoms. Node
//! masses come from a piecewise-smooth density by hat-function assignment:
//! the mass and first moment of the density on every cell `[x_j, x_{j+1}]`
//! are split between the two end nodes so that both are preserved exactly.
//! Because `|y - x_i|` is linear on each cell, the potential at grid nodes
//! is then exact for the underlying density.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Tail mass that may fall outside the grid before a density is rejected.
pub const MAX_TAIL_OUTSIDE_GRID: f64 = 1e-3;
/// Tolerance on equality of means.
pub const MEAN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    pub grid: GridSpec,
    /// Mass carried by each grid node.
    pub cell_mass: Vec<f64>,
    /// Point masses `(location, mass)` sorted by location.
    pub atoms: Vec<(f64, f64)>,
}

/// Mixture component of a truncated Gaussian mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    #[serde(default)]
    pub mean: f64,
    pub variance: f64,
}

/// Declarative description of a target law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MeasureSpec {
    Dirac {
        at: f64,
    },
    Gaussian {
        mean: f64,
        variance: f64,
    },
    /// Gaussian mixture restricted to `(lo, hi)`; the mass of each tail sits
    /// as an atom on the corresponding end point.
    TruncatedGaussianMixture {
        components: Vec<GaussianComponent>,
        lo: f64,
        hi: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Two atoms weighted so that the mean is the Brownian start.
    TwoPoint {
        lo: f64,
        hi: f64,
    },
    Atoms {
        atoms: Vec<(f64, f64)>,
    },
    /// CSV measure file (`#atoms` / `#density` sections).
    File {
        path: PathBuf,
    },
}

impl MeasureSpec {
    /// Equal-weight mixture of centred Gaussians with standard deviations 2
    /// and 3, truncated to `(-1, 1)` with atoms at `+-1`.
    pub fn truncated_two_gaussian() -> Self {
        MeasureSpec::TruncatedGaussianMixture {
            components: vec![
                GaussianComponent {
                    weight: 0.5,
                    mean: 0.0,
                    variance: 4.0,
                },
                GaussianComponent {
                    weight: 0.5,
                    mean: 0.0,
                    variance: 9.0,
                },
            ],
            lo: -1.0,
            hi: 1.0,
        }
    }

    /// Resolves a relative file reference against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let MeasureSpec::File { path } = self {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }

    pub fn build(&self, grid: &GridSpec) -> Result<GridMeasure> {
        grid.validate()?;
        let m = match self {
            MeasureSpec::Dirac { at } => GridMeasure::from_atoms(grid, vec![(*at, 1.0)])?,
            MeasureSpec::Gaussian { mean, variance } => {
                check_variance(*variance)?;
                let sd = variance.sqrt();
                let (below, above) = (
                    norm_cdf((grid.x_min - mean) / sd),
                    1.0 - norm_cdf((grid.x_max - mean) / sd),
                );
                if below + above > MAX_TAIL_OUTSIDE_GRID {
                    return Err(Error::InvalidMeasure(format!(
                        "grid [{}, {}] misses {:.2e} of the Gaussian mass",
                        grid.x_min,
                        grid.x_max,
                        below + above
                    )));
                }
                let mut m = GridMeasure::from_density(grid, grid.x_min, grid.x_max, |a, b| {
                    gaussian_segment(*mean, sd, a, b)
                });
                // tails stay on the edge nodes
                m.cell_mass[0] += below;
                m.cell_mass[grid.nx - 1] += above;
                m
            }
            MeasureSpec::TruncatedGaussianMixture { components, lo, hi } => {
                if components.is_empty() {
                    return Err(Error::InvalidMeasure("mixture has no components".into()));
                }
                if !(lo < hi) {
                    return Err(Error::InvalidMeasure(format!(
                        "truncation interval ({lo}, {hi}) is empty"
                    )));
                }
                if !(grid.contains(*lo) && grid.contains(*hi)) {
                    return Err(Error::InvalidMeasure(format!(
                        "truncation interval ({lo}, {hi}) is not covered by the grid"
                    )));
                }
                for c in components {
                    if c.weight < 0.0 || !c.weight.is_finite() {
                        return Err(Error::InvalidMeasure(format!(
                            "negative mixture weight {}",
                            c.weight
                        )));
                    }
                    check_variance(c.variance)?;
                }
                let wsum: f64 = components.iter().map(|c| c.weight).sum();
                if wsum <= 0.0 {
                    return Err(Error::InvalidMeasure("mixture weights sum to zero".into()));
                }
                let (mut lo_atom, mut hi_atom) = (0.0, 0.0);
                for c in components {
                    let sd = c.variance.sqrt();
                    lo_atom += c.weight / wsum * norm_cdf((lo - c.mean) / sd);
                    hi_atom += c.weight / wsum * (1.0 - norm_cdf((hi - c.mean) / sd));
                }
                let mut m = GridMeasure::from_density(grid, *lo, *hi, |a, b| {
                    components.iter().fold((0.0, 0.0), |(m0, m1), c| {
                        let (p0, p1) = gaussian_segment(c.mean, c.variance.sqrt(), a, b);
                        (m0 + c.weight / wsum * p0, m1 + c.weight / wsum * p1)
                    })
                });
                m.atoms = vec![(*lo, lo_atom), (*hi, hi_atom)];
                m
            }
            MeasureSpec::Uniform { lo, hi } => {
                if !(lo < hi) || !grid.contains(*lo) || !grid.contains(*hi) {
                    return Err(Error::InvalidMeasure(format!(
                        "uniform support ({lo}, {hi}) must be a nonempty interval inside the grid"
                    )));
                }
                let d = 1.0 / (hi - lo);
                GridMeasure::from_density(grid, *lo, *hi, |a, b| {
                    (d * (b - a), d * (b * b - a * a) / 2.0)
                })
            }
            MeasureSpec::TwoPoint { lo, hi } => {
                if !(*lo < grid.s0 && grid.s0 < *hi) {
                    return Err(Error::InvalidMeasure(format!(
                        "two-point law needs lo < {} < hi, got ({lo}, {hi})",
                        grid.s0
                    )));
                }
                let p_hi = (grid.s0 - lo) / (hi - lo);
                GridMeasure::from_atoms(grid, vec![(*lo, 1.0 - p_hi), (*hi, p_hi)])?
            }
            MeasureSpec::Atoms { atoms } => GridMeasure::from_atoms(grid, atoms.clone())?,
            MeasureSpec::File { path } => GridMeasure::read_csv(grid, path)?,
        };
        m.validate()?;
        Ok(m)
    }
}

fn check_variance(v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidMeasure(format!("variance must be positive and finite, got {v}")))
    }
}

/// Standard normal distribution function.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Mass and first moment of `N(mean, sd^2)` on `[a, b]`.
fn gaussian_segment(mean: f64, sd: f64, a: f64, b: f64) -> (f64, f64) {
    let (za, zb) = ((a - mean) / sd, (b - mean) / sd);
    let mass = norm_cdf(zb) - norm_cdf(za);
    (mass, mean * mass - sd * (norm_pdf(zb) - norm_pdf(za)))
}

/// Potential `-sum m |y - x|` of point masses, evaluated at ascending `xs`.
///
/// `points` need not be sorted. Runs in `O((n + k) log k)`.
pub fn point_potential(points: &[(f64, f64)], xs: &[f64]) -> Vec<f64> {
    let mut pts: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.1 != 0.0).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total_m: f64 = pts.iter().map(|p| p.1).sum();
    let total_m1: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let mut out = Vec::with_capacity(xs.len());
    let (mut k, mut m_below, mut m1_below) = (0usize, 0.0, 0.0);
    for &x in xs {
        while k < pts.len() && pts[k].0 <= x {
            m_below += pts[k].1;
            m1_below += pts[k].0 * pts[k].1;
            k += 1;
        }
        let below = x * m_below - m1_below;
        let above = (total_m1 - m1_below) - x * (total_m - m_below);
        out.push(-(below + above));
    }
    out
}

impl GridMeasure {
    pub fn from_atoms(grid: &GridSpec, mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        for &(x, m) in &atoms {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::InvalidMeasure(format!("negative or non-finite mass {m} at {x}")));
            }
            if !grid.contains(x) {
                return Err(Error::InvalidMeasure(format!(
                    "atom at {x} lies outside the grid [{}, {}]",
                    grid.x_min, grid.x_max
                )));
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut m = GridMeasure {
            grid: *grid,
            cell_mass: vec![0.0; grid.nx],
            atoms,
        };
        m.normalize()?;
        Ok(m)
    }

    /// Node masses for a density supported on `[lo, hi]`; `segment(a, b)`
    /// returns its mass and first moment on `[a, b]`.
    pub fn from_density(
        grid: &GridSpec,
        lo: f64,
        hi: f64,
        segment: impl Fn(f64, f64) -> (f64, f64),
    ) -> Self {
        let mut cell_mass = vec![0.0; grid.nx];
        let dx = grid.dx();
        for j in 0..grid.nx - 1 {
            let (xa, xb) = (grid.x(j), grid.x(j + 1));
            let (a, b) = (xa.max(lo), xb.min(hi));
            if b <= a {
                continue;
            }
            let (m0, m1) = segment(a, b);
            if m0 <= 0.0 {
                continue;
            }
            let c = (m1 / m0).clamp(xa, xb);
            cell_mass[j] += m0 * (xb - c) / dx;
            cell_mass[j + 1] += m0 * (c - xa) / dx;
        }
        GridMeasure {
            grid: *grid,
            cell_mass,
            atoms: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cell_mass.len() != self.grid.nx {
            return Err(Error::InvalidMeasure("node mass array does not match the grid".into()));
        }
        if self.cell_mass.iter().any(|&m| !(m >= -1e-15 && m.is_finite())) {
            return Err(Error::InvalidMeasure("negative node mass".into()));
        }
        let total = self.total_mass();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidMeasure(format!("total mass {total} differs from 1")));
        }
        Ok(())
    }

    pub fn normalize(&mut self) -> Result<()> {
        let total = self.total_mass();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidMeasure(format!("cannot normalize total mass {total}")));
        }
        self.cell_mass.iter_mut().for_each(|m| *m /= total);
        self.atoms.iter_mut().for_each(|a| a.1 /= total);
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.cell_mass.iter().sum::<f64>() + self.atoms.iter().map(|a| a.1).sum::<f64>()
    }

    /// All mass as `(location, mass)` pairs.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = self
            .cell_mass
            .iter()
            .enumerate()
            .filter(|(_, &m)| m != 0.0)
            .map(|(j, &m)| (self.grid.x(j), m))
            .collect();
        pts.extend(self.atoms.iter().copied());
        pts
    }

    pub fn mean(&self) -> f64 {
        self.points().iter().map(|(x, m)| x * m).sum()
    }

    /// Second moment about the Brownian start.
    pub fn second_moment(&self) -> f64 {
        let s0 = self.grid.s0;
        self.points().iter().map(|(x, m)| (x - s0).powi(2) * m).sum()
    }

    /// `E f(X)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points().iter().map(|&(x, m)| m * f(x)).sum()
    }

    /// Potential `u(x) = -E|X - x|` at every grid node.
    pub fn potential(&self) -> Vec<f64> {
        point_potential(&self.points(), &self.grid.xs())
    }

    /// `P(X <= x)`, node masses spread uniformly over `x_j +- dx/2`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.cdf_impl(x, true)
    }

    /// `P(X < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        self.cdf_impl(x, false)
    }

    fn cdf_impl(&self, x: f64, closed: bool) -> f64 {
        let h = 0.5 * self.grid.dx();
        let mut p = 0.0;
        for (j, &m) in self.cell_mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let c = self.grid.x(j);
            p += m * ((x - (c - h)) / (2.0 * h)).clamp(0.0, 1.0);
        }
        for &(y, m) in &self.atoms {
            if y < x || (closed && y == x) {
                p += m;
            }
        }
        p
    }

    /// Barycenter function and its right-continuous inverse.
    pub fn barycenter(&self) -> Barycenter {
        Barycenter::new(self)
    }

    /// Largest point of the support.
    pub fn ess_sup(&self) -> f64 {
        let h = 0.5 * self.grid.dx();
        let cell_top = self
            .cell_mass
            .iter()
            .rposition(|&m| m > 0.0)
            .map(|j| self.grid.x(j) + h);
        let atom_top = self.atoms.iter().filter(|a| a.1 > 0.0).map(|a| a.0).reduce(f64::max);
        match (cell_top, atom_top) {
            (Some(a), Some(b)) => a.max(b),
            (a, b) => a.or(b).unwrap_or(self.grid.s0),
        }
    }

    /// Writes the `#atoms` / `#density` CSV layout.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut s = String::from("#atoms\nx,mass\n");
        for (x, m) in &self.atoms {
            s.push_str(&format!("{x},{m}\n"));
        }
        s.push_str("#density\nx,density\n");
        let dx = self.grid.dx();
        for (j, m) in self.cell_mass.iter().enumerate() {
            s.push_str(&format!("{},{}\n", self.grid.x(j), m / dx));
        }
        write_text(path, &s)
    }

    /// Reads the `#atoms` / `#density` CSV layout. Density rows are read as
    /// samples of a piecewise-linear density.
    pub fn read_csv(grid: &GridSpec, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        #[derive(PartialEq)]
        enum Section {
            None,
            Atoms,
            Density,
        }
        let mut section = Section::None;
        let mut atoms = Vec::new();
        let mut dens: Vec<(f64, f64)> = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            match line {
                "#atoms" => {
                    section = Section::Atoms;
                    continue;
                }
                "#density" => {
                    section = Section::Density;
                    continue;
                }
                _ => {}
            }
            if line.starts_with('x') {
                continue; // column header
            }
            let mut parts = line.split(',').map(str::trim);
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| Error::parse(path, no + 1, "expected two columns"))?
                    .parse::<f64>()
                    .map_err(|e| Error::parse(path, no + 1, e.to_string()))
            };
            let (x, v) = (parse(parts.next())?, parse(parts.next())?);
            match section {
                Section::Atoms => atoms.push((x, v)),
                Section::Density => dens.push((x, v)),
                Section::None => {
                    return Err(Error::parse(path, no + 1, "data before a #atoms or #density header"))
                }
            }
        }
        if dens.iter().any(|d| d.1 < 0.0) || atoms.iter().any(|a: &(f64, f64)| a.1 < 0.0) {
            return Err(Error::InvalidMeasure(format!("negative mass in {}", path.display())));
        }
        dens.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut m = if dens.len() >= 2 {
            let (lo, hi) = (dens[0].0, dens[dens.len() - 1].0);
            if !(grid.contains(lo) && grid.contains(hi)) {
                return Err(Error::InvalidMeasure(format!(
                    "density in {} extends beyond the grid",
                    path.display()
                )));
            }
            GridMeasure::from_density(grid, lo, hi, |a, b| linear_segment(&dens, a, b))
        } else {
            GridMeasure {
                grid: *grid,
                cell_mass: vec![0.0; grid.nx],
                atoms: Vec::new(),
            }
        };
        for &(x, _) in &atoms {
            if !grid.contains(x) {
                return Err(Error::InvalidMeasure(format!("atom at {x} lies outside the grid")));
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        m.atoms = atoms;
        m.normalize()?;
        Ok(m)
    }
}

/// Mass and first moment on `[a, b]` of the piecewise-linear interpolant of
/// sorted samples `pts`.
fn linear_segment(pts: &[(f64, f64)], a: f64, b: f64) -> (f64, f64) {
    let (mut m0, mut m1) = (0.0, 0.0);
    for w in pts.windows(2) {
        let ((x0, d0), (x1, d1)) = (w[0], w[1]);
        let (lo, hi) = (x0.max(a), x1.min(b));
        if hi <= lo || x1 <= x0 {
            continue;
        }
        let slope = (d1 - d0) / (x1 - x0);
        let (p, q) = (d0 + slope * (lo - x0), d0 + slope * (hi - x0));
        let len = hi - lo;
        m0 += 0.5 * (p + q) * len;
        // exact first moment of a linear function on [lo, hi]
        m1 += len * (p * (2.0 * lo + hi) + q * (lo + 2.0 * hi)) / 6.0;
    }
    (m0, m1)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Barycenter `b(x) = E[X | X >= x]` and its right-continuous inverse
/// `beta(y) = sup{x : b(x) <= y}`.
///
/// Node masses are spread uniformly over their cells, which makes `b`
/// continuous between atoms; `beta` is found by bisection on the exact
/// piecewise formula, so jumps of `b` at atoms are resolved exactly.
#[derive(Debug, Clone)]
pub struct Barycenter {
    grid: GridSpec,
    /// `suffix_m[j] = sum_{k >= j} m_k`, `suffix_m1` likewise for `m_k x_k`.
    suffix_m: Vec<f64>,
    suffix_m1: Vec<f64>,
    cell_mass: Vec<f64>,
    atoms: Vec<(f64, f64)>,
    mean: f64,
    ess_sup: f64,
    /// `b` at the grid nodes.
    pub b_values: Vec<f64>,
    /// `beta` at the grid nodes (may be infinite).
    pub beta_values: Vec<f64>,
}

impl Barycenter {
    fn new(mu: &GridMeasure) -> Self {
        let nx = mu.grid.nx;
        let mut suffix_m = vec![0.0; nx + 1];
        let mut suffix_m1 = vec![0.0; nx + 1];
        for j in (0..nx).rev() {
            suffix_m[j] = suffix_m[j + 1] + mu.cell_mass[j];
            suffix_m1[j] = suffix_m1[j + 1] + mu.cell_mass[j] * mu.grid.x(j);
        }
        let mut b = Barycenter {
            grid: mu.grid,
            suffix_m,
            suffix_m1,
            cell_mass: mu.cell_mass.clone(),
            atoms: mu.atoms.clone(),
            mean: mu.mean(),
            ess_sup: mu.ess_sup(),
            b_values: Vec::new(),
            beta_values: Vec::new(),
        };
        let xs = mu.grid.xs();
        b.b_values = xs.iter().map(|&x| b.b(x)).collect();
        b.beta_values = xs.iter().map(|&y| b.beta(y)).collect();
        b
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn ess_sup(&self) -> f64 {
        self.ess_sup
    }

    /// Mass and first moment of `[x, inf)`.
    fn tail(&self, x: f64) -> (f64, f64) {
        let dx = self.grid.dx();
        let h = 0.5 * dx;
        let pos = (x - self.grid.x_min + h) / dx;
        let (mut m0, mut m1);
        if pos < 0.0 {
            m0 = self.suffix_m[0];
            m1 = self.suffix_m1[0];
        } else if pos >= self.grid.nx as f64 {
            m0 = 0.0;
            m1 = 0.0;
        } else {
            let k = pos.floor() as usize;
            m0 = self.suffix_m[k + 1];
            m1 = self.suffix_m1[k + 1];
            let top = self.grid.x(k) + h;
            let frac = ((top - x) / dx).clamp(0.0, 1.0);
            let part = self.cell_mass[k] * frac;
            m0 += part;
            m1 += part * 0.5 * (top + x.max(top - dx));
        }
        for &(y, w) in self.atoms.iter().rev() {
            if y < x - 1e-12 {
                break;
            }
            m0 += w;
            m1 += w * y;
        }
        (m0, m1)
    }

    /// `E[X | X >= x]`, capped at the essential supremum where the tail is empty.
    pub fn b(&self, x: f64) -> f64 {
        let (m0, m1) = self.tail(x);
        if m0 < 1e-15 {
            self.ess_sup
        } else {
            (m1 / m0).min(self.ess_sup)
        }
    }

    /// `sup{x : b(x) <= y}`; `-inf` below the mean, `+inf` from the
    /// essential supremum on.
    pub fn beta(&self, y: f64) -> f64 {
        if y < self.mean - 1e-12 {
            return f64::NEG_INFINITY;
        }
        if y >= self.ess_sup - 1e-12 {
            return f64::INFINITY;
        }
        let mut lo = self.grid.x_min - self.grid.dx();
        let mut hi = self.ess_sup;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.b(mid) <= y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

/// Result of a convex-order comparison `nu <= mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvexOrder {
    Ordered,
    MeanMismatch { mean_nu: f64, mean_mu: f64 },
    /// `u_mu(x) > u_nu(x) + tol`; `x` maximises the excess.
    PotentialViolation { x: f64, excess: f64 },
}

impl ConvexOrder {
    pub fn holds(&self) -> bool {
        matches!(self, ConvexOrder::Ordered)
    }
}

/// Tolerance for potential comparisons on a grid with spacing `dx`.
pub fn convex_order_tol(dx: f64) -> f64 {
    10.0 * dx * dx + 1e-12
}

/// Tests `nu <= mu` in convex order: equal means and `u_mu <= u_nu`.
pub fn convex_order(nu: &GridMeasure, mu: &GridMeasure) -> Result<ConvexOrder> {
    if nu.grid != mu.grid {
        return Err(Error::InvalidMeasure("measures live on different grids".into()));
    }
    let (mean_nu, mean_mu) = (nu.mean(), mu.mean());
    if (mean_nu - mean_mu).abs() > MEAN_TOL {
        return Ok(ConvexOrder::MeanMismatch { mean_nu, mean_mu });
    }
    let tol = convex_order_tol(nu.grid.dx());
    let (un, um) = (nu.potential(), mu.potential());
    let (mut worst, mut at) = (f64::NEG_INFINITY, 0);
    for j in 0..un.len() {
        let e = um[j] - un[j];
        if e > worst {
            worst = e;
            at = j;
        }
    }
    Ok(if worst > tol {
        ConvexOrder::PotentialViolation {
            x: nu.grid.x(at),
            excess: worst,
        }
    } else {
        ConvexOrder::Ordered
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::default()
    }

    #[test]
    fn dirac_potential_is_minus_abs() {
        let g = grid();
        let m = MeasureSpec::Dirac { at: 0.0 }.build(&g).unwrap();
        for (x, u) in g.xs().iter().zip(m.potential()) {
            assert!((u + x.abs()).abs() < 1e-14);
        }
    }

    #[test]
    fn two_point_potential() {
        let g = grid();
        let m = MeasureSpec::TwoPoint { lo: -1.0, hi: 1.0 }.build(&g).unwrap();
        for (x, u) in g.xs().iter().zip(m.potential()) {
            assert!((u + x.abs().max(1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn two_point_barycenter_and_inverse() {
        let g = grid();
        let m = MeasureSpec::TwoPoint { lo: -1.0, hi: 1.0 }.build(&g).unwrap();
        let b = m.barycenter();
        assert!(b.b(-2.0).abs() < 1e-12);
        assert!(b.b(-1.0).abs() < 1e-12);
        assert!((b.b(-0.99) - 1.0).abs() < 1e-12);
        assert!((b.b(1.0) - 1.0).abs() < 1e-12);
        assert!((b.beta(0.5) + 1.0).abs() < 1e-9);
        assert!(b.beta(1.0).is_infinite());
        assert_eq!(b.beta(-0.5), f64::NEG_INFINITY);
    }

    #[test]
    fn truncated_mixture_mass_and_mean() {
        let g = grid();
        let m = MeasureSpec::truncated_two_gaussian().build(&g).unwrap();
        assert!((m.total_mass() - 1.0).abs() < 1e-10);
        assert!(m.mean().abs() < 1e-10);
        assert!(m.cell_mass.iter().enumerate().all(|(j, &w)| w == 0.0 || g.x(j).abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn uniform_has_exact_moments() {
        let g = grid();
        let m = MeasureSpec::Uniform { lo: -1.0, hi: 1.0 }.build(&g).unwrap();
        assert!(m.mean().abs() < 1e-13);
        // hat assignment keeps E|X| exact at the nodes
        let u = m.potential();
        assert!((u[g.s0_node()] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = GridSpec::new(-2.0, 2.0, 81, 1.0, 11).unwrap();
        assert!(MeasureSpec::Gaussian { mean: 0.0, variance: 4.0 }.build(&g).is_err());
        let neg = MeasureSpec::TruncatedGaussianMixture {
            components: vec![GaussianComponent { weight: -0.5, mean: 0.0, variance: 1.0 }],
            lo: -1.0,
            hi: 1.0,
        };
        assert!(neg.build(&g).is_err());
        assert!(MeasureSpec::Dirac { at: 3.0 }.build(&g).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let g = grid();
        let m = MeasureSpec::truncated_two_gaussian().build(&g).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("mu.csv");
        m.write_csv(&p).unwrap();
        let back = MeasureSpec::File { path: p }.build(&g).unwrap();
        assert_eq!(back.atoms.len(), 2);
        let (u0, u1) = (m.potential(), back.potential());
        let gap = u0.iter().zip(&u1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap < convex_order_tol(g.dx()), "gap {gap}");
    }

    #[test]
    fn convex_order_verdicts() {
        let g = GridSpec::new(-6.0, 6.0, 601, 1.0, 11).unwrap();
        let d0 = MeasureSpec::Dirac { at: 0.0 }.build(&g).unwrap();
        let n1 = MeasureSpec::Gaussian { mean: 0.0, variance: 1.0 }.build(&g).unwrap();
        let n2 = MeasureSpec::Gaussian { mean: 0.0, variance: 2.0 }.build(&g).unwrap();
        let shifted = MeasureSpec::Dirac { at: 0.5 }.build(&g).unwrap();
        assert!(convex_order(&d0, &n1).unwrap().holds());
        match convex_order(&n2, &n1).unwrap() {
            ConvexOrder::PotentialViolation { x, .. } => assert!(x.abs() < 1e-9),
            v => panic!("unexpected {v:?}"),
        }
        assert!(matches!(
            convex_order(&shifted, &n1).unwrap(),
            ConvexOrder::MeanMismatch { .. }
        ));
    }
}
