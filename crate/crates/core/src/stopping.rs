//! The lower information time `tau_lo` and its starting law: the joint law
//! of `(tau_lo, B_{tau_lo})` on the grid and the stopped potential
//! `-E|B_{t ^ tau_lo} - x|`.

use std::path::{Path, PathBuf};

use log::warn;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::heat::run_walk;
use crate::measures::{write_text, GridMeasure};
use crate::surface::{Barrier, Surface};

/// Mass left unstopped at the horizon before a warning is raised.
pub const HORIZON_WARN_MASS: f64 = 1e-3;
/// Largest tolerated conservation defect per slice.
pub const LEAK_TOL: f64 = 1e-6;

/// How the information time is generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StoppingSpec {
    /// No information: `tau_lo = 0`.
    Zero,
    /// Deterministic time `t0`.
    FixedTime { t0: f64 },
    /// First exit of `(a, b)` or an independent exponential clock of rate
    /// `rho`, whichever comes first.
    IntervalExit { a: f64, b: f64, rho: f64 },
    /// Hitting time of a barrier read from an `x,R` CSV file.
    BarrierFile { path: PathBuf },
    /// Hitting time of an in-memory barrier.
    #[serde(skip)]
    Barrier(Barrier),
}

impl StoppingSpec {
    pub fn interval_exit(a: f64, b: f64, rho: f64) -> Self {
        StoppingSpec::IntervalExit { a, b, rho }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        match self {
            StoppingSpec::Zero => Ok(()),
            StoppingSpec::FixedTime { t0 } => {
                if *t0 >= 0.0 && *t0 <= grid.t_max + 1e-12 {
                    Ok(())
                } else {
                    Err(Error::InvalidStopping(format!(
                        "fixed time {t0} must lie in [0, {}]",
                        grid.t_max
                    )))
                }
            }
            StoppingSpec::IntervalExit { a, b, rho } => {
                if !(*a < grid.s0 && grid.s0 < *b) {
                    return Err(Error::InvalidStopping(format!(
                        "interval ({a}, {b}) must contain the start {}",
                        grid.s0
                    )));
                }
                if !(*rho >= 0.0 && rho.is_finite()) {
                    return Err(Error::InvalidStopping(format!("kill rate must be >= 0, got {rho}")));
                }
                if grid.node_of(*a).is_none() || grid.node_of(*b).is_none() {
                    return Err(Error::InvalidStopping(format!(
                        "interval end points {a}, {b} must be grid nodes"
                    )));
                }
                Ok(())
            }
            StoppingSpec::BarrierFile { path } => {
                if path.as_os_str().is_empty() {
                    Err(Error::InvalidStopping("empty barrier path".into()))
                } else {
                    Ok(())
                }
            }
            StoppingSpec::Barrier(b) => {
                if b.grid == *grid {
                    Ok(())
                } else {
                    Err(Error::InvalidStopping("barrier lives on a different grid".into()))
                }
            }
        }
    }

    /// Kill rate of the exponential clock (0 if none).
    pub fn kill_rate(&self) -> f64 {
        match self {
            StoppingSpec::IntervalExit { rho, .. } => *rho,
            _ => 0.0,
        }
    }

    /// Resolves file references relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let StoppingSpec::BarrierFile { path } = self {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }
}

/// Mass absorbed at the two interval end points, per time slice.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitMass {
    pub lo_node: usize,
    pub hi_node: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Discretised joint law of `(tau_lo, B_{tau_lo})`.
#[derive(Debug, Clone)]
pub struct StartingLaw {
    pub grid: GridSpec,
    /// Mass stopped at `(t_n, x_j)` other than interval exits: killed by
    /// the clock, reached by a fixed time or absorbed by a barrier. Mass
    /// stopped during a step is dated at the start of that step.
    pub kill_mass: Array2<f64>,
    pub exit: Option<ExitMass>,
    /// Unstopped mass per node after each slice.
    pub survive_mass: Array2<f64>,
    /// Stopped mass per node by the slice at which the walk had settled it.
    settled: Array2<f64>,
    /// Mass still unstopped at `t_max`; it is counted as stopped there.
    pub terminal_mass: Vec<f64>,
    pub warnings: Vec<String>,
}

impl StartingLaw {
    /// Evolves the information time forward on `grid`.
    pub fn evolve(spec: &StoppingSpec, grid: &GridSpec) -> Result<Self> {
        grid.validate()?;
        spec.validate(grid)?;
        let s0 = grid.s0_node();
        let start = |n: usize, buf: &mut [f64]| {
            if n == 0 {
                buf[s0] = 1.0;
            }
        };
        let (rec, exit_nodes) = match spec {
            StoppingSpec::Zero => (run_walk(grid, 0.0, |_, _| true, start), None),
            StoppingSpec::FixedTime { t0 } => {
                let n0 = grid.time_index(*t0);
                (run_walk(grid, 0.0, |n, _| n >= n0, start), None)
            }
            StoppingSpec::IntervalExit { a, b, rho } => {
                let (lo, hi) = (grid.node_of(*a).unwrap(), grid.node_of(*b).unwrap());
                (
                    run_walk(grid, *rho, |_, j| j <= lo || j >= hi, start),
                    Some((lo, hi)),
                )
            }
            StoppingSpec::BarrierFile { path } => {
                let b = Barrier::read_csv(grid, path)?;
                (run_walk(grid, 0.0, |n, j| b.contains(n, j), start), None)
            }
            StoppingSpec::Barrier(b) => (run_walk(grid, 0.0, |n, j| b.contains(n, j), start), None),
        };

        let nt = grid.nt;
        let settled = &rec.absorbed + &rec.flux + &rec.killed;
        let terminal_mass = rec.free.row(nt - 1).to_vec();

        // conservation per slice
        let mut stopped = 0.0;
        let mut injected = 0.0;
        for n in 0..nt {
            injected += rec.injected[n];
            stopped += settled.row(n).sum();
            let free: f64 = rec.free.row(n).sum();
            let leak = (injected - stopped - free).abs();
            if leak > LEAK_TOL {
                return Err(Error::MassLeakage { slice: n, leak });
            }
        }

        // in-step stops move to the start of their step
        let mut dated = rec.absorbed.clone();
        let in_step = &rec.flux + &rec.killed;
        for n in 1..nt {
            let mut row = dated.row_mut(n - 1);
            row += &in_step.row(n);
        }
        let (kill_mass, exit) = match exit_nodes {
            None => (dated, None),
            Some((lo, hi)) => {
                let e = ExitMass {
                    lo_node: lo,
                    hi_node: hi,
                    lo: dated.column(lo).to_vec(),
                    hi: dated.column(hi).to_vec(),
                };
                dated.column_mut(lo).fill(0.0);
                dated.column_mut(hi).fill(0.0);
                (dated, Some(e))
            }
        };

        let mut warnings = Vec::new();
        let term: f64 = terminal_mass.iter().sum();
        if term > HORIZON_WARN_MASS {
            let w = format!(
                "horizon too short for the information time: {term:.3e} of the mass is unstopped at t_max = {}",
                grid.t_max
            );
            warn!("{w}");
            warnings.push(w);
        }
        Ok(StartingLaw {
            grid: *grid,
            kill_mass,
            exit,
            survive_mass: rec.free,
            settled,
            terminal_mass,
            warnings,
        })
    }

    /// Every stopped mass as `(time slice, node, mass)`, including exits and
    /// the terminal mass at the last slice.
    pub fn points(&self) -> Vec<(usize, usize, f64)> {
        let (nt, nx) = (self.grid.nt, self.grid.nx);
        let mut out = Vec::new();
        for n in 0..nt {
            for j in 0..nx {
                let mut m = self.kill_mass[[n, j]];
                if let Some(e) = &self.exit {
                    if j == e.lo_node {
                        m += e.lo[n];
                    }
                    if j == e.hi_node {
                        m += e.hi[n];
                    }
                }
                if n == nt - 1 {
                    m += self.terminal_mass[j];
                }
                if m != 0.0 {
                    out.push((n, j, m));
                }
            }
        }
        out
    }

    /// Stopped mass per node at slice `n` (terminal mass included at the
    /// last slice).
    pub fn stopped_at(&self, n: usize) -> Vec<f64> {
        let mut row = self.kill_mass.row(n).to_vec();
        if let Some(e) = &self.exit {
            row[e.lo_node] += e.lo[n];
            row[e.hi_node] += e.hi[n];
        }
        if n == self.grid.nt - 1 {
            for (r, t) in row.iter_mut().zip(&self.terminal_mass) {
                *r += t;
            }
        }
        row
    }

    pub fn total_exit(&self) -> (f64, f64) {
        self.exit
            .as_ref()
            .map(|e| (e.lo.iter().sum(), e.hi.iter().sum()))
            .unwrap_or((0.0, 0.0))
    }

    pub fn total_terminal(&self) -> f64 {
        self.terminal_mass.iter().sum()
    }

    /// `E[tau_lo]`, with the terminal mass counted at `t_max`.
    pub fn expected_time(&self) -> f64 {
        self.points()
            .iter()
            .map(|&(n, _, m)| self.grid.t(n) * m)
            .sum()
    }

    /// Spatial marginal: exits become atoms, everything else node mass.
    pub fn marginal_law(&self) -> GridMeasure {
        let nx = self.grid.nx;
        let mut cell = vec![0.0; nx];
        for n in 0..self.grid.nt {
            for j in 0..nx {
                cell[j] += self.kill_mass[[n, j]];
            }
        }
        for (c, t) in cell.iter_mut().zip(&self.terminal_mass) {
            *c += t;
        }
        let mut atoms = Vec::new();
        if let Some(e) = &self.exit {
            atoms.push((self.grid.x(e.lo_node), e.lo.iter().sum()));
            atoms.push((self.grid.x(e.hi_node), e.hi.iter().sum()));
        }
        GridMeasure {
            grid: self.grid,
            cell_mass: cell,
            atoms,
        }
    }

    /// `-E|B_{t ^ tau_lo} - x|` on every node: the potential of the
    /// surviving mass plus all mass stopped so far.
    pub fn stopped_potential(&self) -> Surface {
        let g = &self.grid;
        let mut out = Surface::zeros(g);
        let mut cum = vec![0.0; g.nx];
        let mut law = vec![0.0; g.nx];
        for n in 0..g.nt {
            for j in 0..g.nx {
                cum[j] += self.settled[[n, j]];
                law[j] = cum[j] + self.survive_mass[[n, j]];
            }
            let u = node_potential(g, &law);
            out.values.row_mut(n).assign(&ndarray::ArrayView1::from(&u[..]));
        }
        out
    }

    /// Writes the three-section CSV dump.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let g = &self.grid;
        let mut s = String::from("t,x,kill_mass\n");
        for n in 0..g.nt {
            for j in 0..g.nx {
                let m = self.kill_mass[[n, j]];
                if m != 0.0 {
                    s.push_str(&format!("{},{},{}\n", g.t(n), g.x(j), m));
                }
            }
        }
        s.push_str("\nt,exit_side,mass\n");
        if let Some(e) = &self.exit {
            for n in 0..g.nt {
                if e.lo[n] != 0.0 {
                    s.push_str(&format!("{},lo,{}\n", g.t(n), e.lo[n]));
                }
                if e.hi[n] != 0.0 {
                    s.push_str(&format!("{},hi,{}\n", g.t(n), e.hi[n]));
                }
            }
        }
        s.push_str("\nx,terminal_mass\n");
        for j in 0..g.nx {
            s.push_str(&format!("{},{}\n", g.x(j), self.terminal_mass[j]));
        }
        write_text(path, &s)
    }
}

/// Potential of node masses at every node, `O(nx)`.
pub(crate) fn node_potential(grid: &GridSpec, mass: &[f64]) -> Vec<f64> {
    let nx = mass.len();
    let dx = grid.dx();
    let total: f64 = mass.iter().sum();
    let total1: f64 = mass.iter().enumerate().map(|(j, m)| m * grid.x(j)).sum();
    let mut out = vec![0.0; nx];
    let (mut below, mut below1) = (0.0, 0.0);
    for j in 0..nx {
        let x = grid.x_min + j as f64 * dx;
        below += mass[j];
        below1 += mass[j] * x;
        out[j] = -((x * below - below1) + (total1 - below1) - x * (total - below));
    }
    out
}
