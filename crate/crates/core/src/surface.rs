//! Scalar fields on the space-time grid and Root-type barriers.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::measures::write_text;

/// Scalar field sampled at every `(t_n, x_j)` node, indexed `[n, j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub grid: GridSpec,
    pub values: Array2<f64>,
}

impl Surface {
    pub fn zeros(grid: &GridSpec) -> Self {
        Surface {
            grid: *grid,
            values: Array2::zeros((grid.nt, grid.nx)),
        }
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((grid.nt, grid.nx), |(n, j)| f(grid.t(n), grid.x(j)));
        Surface { grid: *grid, values }
    }

    #[inline]
    pub fn get(&self, n: usize, j: usize) -> f64 {
        self.values[[n, j]]
    }

    /// Bilinear interpolation; arguments outside the grid are clamped.
    pub fn at(&self, t: f64, x: f64) -> f64 {
        let g = &self.grid;
        let (j, fx) = g.locate(x);
        let pos = (t / g.dt()).clamp(0.0, (g.nt - 1) as f64);
        let n = (pos.floor() as usize).min(g.nt - 2);
        let ft = pos - n as f64;
        let v = &self.values;
        let lo = v[[n, j]] * (1.0 - fx) + v[[n, j + 1]] * fx;
        let hi = v[[n + 1, j]] * (1.0 - fx) + v[[n + 1, j + 1]] * fx;
        lo * (1.0 - ft) + hi * ft
    }

    /// Central difference in `x` (one-sided at the edges).
    pub fn x_derivative(&self) -> Surface {
        let g = &self.grid;
        let (nt, nx) = (g.nt, g.nx);
        let dx = g.dx();
        let v = &self.values;
        let values = Array2::from_shape_fn((nt, nx), |(n, j)| {
            if j == 0 {
                (v[[n, 1]] - v[[n, 0]]) / dx
            } else if j == nx - 1 {
                (v[[n, nx - 1]] - v[[n, nx - 2]]) / dx
            } else {
                (v[[n, j + 1]] - v[[n, j - 1]]) / (2.0 * dx)
            }
        });
        Surface { grid: *g, values }
    }

    /// CSV with header `t,x,<name>`.
    pub fn write_csv(&self, path: &Path, name: &str) -> Result<()> {
        let g = &self.grid;
        let mut s = String::with_capacity(g.nt * g.nx * 24);
        s.push_str(&format!("t,x,{name}\n"));
        for n in 0..g.nt {
            for j in 0..g.nx {
                s.push_str(&format!("{},{},{}\n", g.t(n), g.x(j), self.values[[n, j]]));
            }
        }
        write_text(path, &s)
    }
}

/// Barrier function `R(x)`; the region `{t >= R(x)}` is the barrier.
/// `f64::INFINITY` marks columns without contact.
#[derive(Debug, Clone, PartialEq)]
pub struct Barrier {
    pub grid: GridSpec,
    pub r: Vec<f64>,
}

impl Barrier {
    pub fn from_fn(grid: &GridSpec, f: impl Fn(f64) -> f64) -> Self {
        Barrier {
            grid: *grid,
            r: grid.xs().into_iter().map(f).collect(),
        }
    }

    /// The vertical line `t = t0`.
    pub fn vertical(grid: &GridSpec, t0: f64) -> Self {
        Barrier::from_fn(grid, |_| t0)
    }

    /// Immediate stopping outside `(lo, hi)`, never inside.
    pub fn two_sided(grid: &GridSpec, lo: f64, hi: f64) -> Self {
        let tol = 1e-9 * grid.dx();
        Barrier::from_fn(grid, |x| {
            if x <= lo + tol || x >= hi - tol {
                0.0
            } else {
                f64::INFINITY
            }
        })
    }

    /// Whether node `(n, j)` lies in the barrier region.
    #[inline]
    pub fn contains(&self, n: usize, j: usize) -> bool {
        self.r[j] <= self.grid.t(n) + 1e-9 * self.grid.dt()
    }

    /// Linear interpolation of `R`; infinite if either neighbour is.
    pub fn at(&self, x: f64) -> f64 {
        let (j, f) = self.grid.locate(x);
        let (a, b) = (self.r[j], self.r[j + 1]);
        if f <= 1e-12 {
            a
        } else if f >= 1.0 - 1e-12 {
            b
        } else if a.is_infinite() || b.is_infinite() {
            f64::INFINITY
        } else {
            a + (b - a) * f
        }
    }

    /// `{x : R(x) > 0}`, the continuation set at time 0, as node indices.
    pub fn open_nodes(&self) -> Vec<usize> {
        (0..self.r.len()).filter(|&j| self.r[j] > 0.0).collect()
    }

    /// Whether `{x : R(x) > 0}` is a discrete interval containing the start.
    pub fn is_regular(&self) -> bool {
        let open = self.open_nodes();
        let s0 = self.grid.s0_node();
        match (open.first(), open.last()) {
            (Some(&a), Some(&b)) => open.len() == b - a + 1 && a <= s0 && s0 <= b,
            _ => false,
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut s = String::from("x,R\n");
        for (j, r) in self.r.iter().enumerate() {
            if r.is_finite() {
                s.push_str(&format!("{},{}\n", self.grid.x(j), r));
            } else {
                s.push_str(&format!("{},inf\n", self.grid.x(j)));
            }
        }
        write_text(path, &s)
    }

    /// Reads `x,R` rows (`inf` for no contact) and samples them on `grid`.
    pub fn read_csv(grid: &GridSpec, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut rows: Vec<(f64, f64)> = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('x') || line.starts_with('#') {
                continue;
            }
            let mut it = line.split(',').map(str::trim);
            let (xs, rs) = match (it.next(), it.next()) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::parse(path, no + 1, "expected columns x,R")),
            };
            let x: f64 = xs.parse().map_err(|_| Error::parse(path, no + 1, format!("bad x '{xs}'")))?;
            let r: f64 = match rs {
                "inf" | "Inf" | "+inf" => f64::INFINITY,
                _ => rs.parse().map_err(|_| Error::parse(path, no + 1, format!("bad R '{rs}'")))?,
            };
            if r < 0.0 {
                return Err(Error::parse(path, no + 1, "negative barrier time"));
            }
            rows.push((x, r));
        }
        if rows.len() < 2 {
            return Err(Error::parse(path, 0, "barrier file needs at least two rows"));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let sample = |x: f64| -> f64 {
            let k = rows.partition_point(|r| r.0 < x - 1e-12);
            if k < rows.len() && (rows[k].0 - x).abs() <= 1e-9 {
                return rows[k].1;
            }
            if k == 0 {
                return rows[0].1;
            }
            if k == rows.len() {
                return rows[rows.len() - 1].1;
            }
            let ((x0, r0), (x1, r1)) = (rows[k - 1], rows[k]);
            if r0.is_infinite() || r1.is_infinite() {
                f64::INFINITY
            } else {
                r0 + (r1 - r0) * (x - x0) / (x1 - x0)
            }
        };
        Ok(Barrier::from_fn(grid, sample))
    }
}
