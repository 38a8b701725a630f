//! Constrained Skorokhod embedding for robust pricing of variance options
//! when the buyer holds information modelled by a lower stopping time.
//!
//! Pipeline: [`stopping`] evolves the information time, [`optstop`] solves
//! the obstacle problem and extracts the Root-type barrier, [`hedge`] builds
//! the sub-hedging portfolio and price, [`mc`] verifies everything by
//! simulation and [`noarb`] reports feasibility.

// `!(x > 0.0)` rejects NaN on purpose; stencil loops index several arrays at once.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod exec;
pub mod grid;
pub mod hedge;
pub(crate) mod heat;
pub mod mc;
pub mod measures;
pub mod noarb;
pub mod optstop;
pub mod pipeline;
pub mod stopping;
pub mod surface;

pub use error::{Error, Result};
pub use exec::Execution;
pub use grid::GridSpec;
pub use heat::{LcpSolver, Psor, StepLcp};
pub use mc::{PathConfig, SimResult};
pub use measures::{convex_order, ConvexOrder, GridMeasure, MeasureSpec};
pub use noarb::FeasibilityVerdict;
pub use optstop::{RootSolution, SolverParams};
pub use stopping::{StartingLaw, StoppingSpec};
pub use surface::{Barrier, Surface};
