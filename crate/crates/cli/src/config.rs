//! Run configuration: one JSON document, every field optional.

use std::fs;
use std::path::{Path, PathBuf};

use consep_core::hedge::PayoffSpec;
use consep_core::mc::PathConfig;
use consep_core::pipeline::Problem;
use consep_core::{GridSpec, MeasureSpec, SolverParams, StoppingSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Optional inputs of the `noarb` command.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoArbConfig {
    /// Upper law for the sandwich check `nu <= mu <= upper`.
    pub upper_law: Option<MeasureSpec>,
    /// Drawdown level `c` of the constraint `B_t >= max B - c`.
    pub drawdown: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub measure: MeasureSpec,
    pub stopping: StoppingSpec,
    pub payoff: PayoffSpec,
    pub solver: SolverParams,
    pub mc: PathConfig,
    pub noarb: NoArbConfig,
    /// Output directory; relative to the working directory.
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = Problem::default();
        RunConfig {
            grid: p.grid,
            measure: p.measure,
            stopping: p.stopping,
            payoff: p.payoff,
            solver: p.solver,
            mc: PathConfig::default(),
            noarb: NoArbConfig::default(),
            output: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Reads `path`; input files named inside it are resolved against the
    /// directory that holds the config.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.measure.resolve_paths(base);
        cfg.stopping.resolve_paths(base);
        if let Some(m) = cfg.noarb.upper_law.as_mut() {
            m.resolve_paths(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.grid.validate()?;
        self.stopping.validate(&self.grid)?;
        self.payoff.validate()?;
        self.solver.validate()?;
        self.mc.step(&self.grid)?;
        Ok(())
    }

    pub fn problem(&self) -> Problem {
        Problem {
            grid: self.grid,
            measure: self.measure.clone(),
            stopping: self.stopping.clone(),
            payoff: self.payoff,
            solver: self.solver,
        }
    }
}
