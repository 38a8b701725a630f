//! Uniform space-time grid shared by every surface in the pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform discretisation of `[0, t_max] x [x_min, x_max]`.
///
/// The Brownian start `s0` must sit on a spatial node; it defaults to 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub t_max: f64,
    pub nt: usize,
    #[serde(default)]
    pub s0: f64,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, nx: usize, t_max: f64, nt: usize) -> Result<Self> {
        let grid = GridSpec {
            x_min,
            x_max,
            nx,
            t_max,
            nt,
            s0: 0.0,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn with_start(mut self, s0: f64) -> Result<Self> {
        self.s0 = s0;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.t_max.is_finite()) {
            return Err(Error::InvalidGrid("bounds must be finite".into()));
        }
        if self.nx < 3 || self.nt < 2 {
            return Err(Error::InvalidGrid(format!(
                "need nx >= 3 and nt >= 2, got nx = {}, nt = {}",
                self.nx, self.nt
            )));
        }
        if !(self.x_min < self.s0 && self.s0 < self.x_max) {
            return Err(Error::InvalidGrid(format!(
                "start {} must lie strictly inside [{}, {}]",
                self.s0, self.x_min, self.x_max
            )));
        }
        if self.t_max <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "t_max must be positive, got {}",
                self.t_max
            )));
        }
        if self.node_of(self.s0).is_none() {
            return Err(Error::InvalidGrid(format!(
                "start {} is not a grid node (dx = {})",
                self.s0,
                self.dx()
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.t_max / (self.nt - 1) as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    #[inline]
    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ts(&self) -> Vec<f64> {
        (0..self.nt).map(|n| self.t(n)).collect()
    }

    /// Node index of `x` if it coincides with a node up to rounding.
    pub fn node_of(&self, x: f64) -> Option<usize> {
        let pos = (x - self.x_min) / self.dx();
        let i = pos.round();
        if i < 0.0 || i > (self.nx - 1) as f64 {
            return None;
        }
        ((pos - i).abs() <= 1e-7).then_some(i as usize)
    }

    pub fn nearest_node(&self, x: f64) -> usize {
        let pos = ((x - self.x_min) / self.dx()).round();
        pos.clamp(0.0, (self.nx - 1) as f64) as usize
    }

    pub fn s0_node(&self) -> usize {
        self.nearest_node(self.s0)
    }

    /// Cell containing `x` and the fractional position inside it.
    /// Points outside the grid are clamped onto the end cells.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let pos = ((x - self.x_min) / self.dx()).clamp(0.0, (self.nx - 1) as f64);
        let i = (pos.floor() as usize).min(self.nx - 2);
        (i, pos - i as f64)
    }

    /// Time slice index closest to `t`.
    pub fn time_index(&self, t: f64) -> usize {
        let n = (t / self.dt()).round();
        n.clamp(0.0, (self.nt - 1) as f64) as usize
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min - 1e-12 && x <= self.x_max + 1e-12
    }

    /// The grid with `dx` and `dt` halved over the same domain.
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            nx: 2 * self.nx - 1,
            nt: 2 * self.nt - 1,
            ..*self
        }
    }

    /// The grid with a different time horizon and the same `dt`.
    pub fn with_horizon(&self, t_max: f64) -> GridSpec {
        let nt = (t_max / self.dt()).round() as usize + 1;
        GridSpec {
            t_max: (nt - 1) as f64 * self.dt(),
            nt,
            ..*self
        }
    }
}

/// Defaults mirror the worked instance: `[-4, 4] x [0, 4]`, 401 x 801 nodes.
impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            x_min: -4.0,
            x_max: 4.0,
            nx: 401,
            t_max: 4.0,
            nt: 801,
            s0: 0.0,
        }
    }
}
