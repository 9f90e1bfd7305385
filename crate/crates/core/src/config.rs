//! Run configuration, read from TOML.
//!
//! Every section has defaults; unknown keys are rejected so typos fail
//! loudly. See `docs/config.md` for the key reference.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Grid;
use crate::physics::PhysParams;
use crate::sav_ch::SolverOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub dim: usize,
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            dim: 1,
            nx: 128,
            ny: 1,
            lx: 1.0,
            ly: 1.0,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        match self.dim {
            1 => Grid::new_1d(self.nx, self.lx),
            2 => Grid::new_2d(self.nx, self.ny, self.lx, self.ly),
            d => Err(Error::config("grid.dim", format!("{d} is not 1 or 2"))),
        }
    }
}

/// Initial data. `kind` selects the family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Initial {
    /// Constant state.
    Uniform {
        rho: f64,
        c: f64,
        #[serde(default)]
        ux: f64,
        #[serde(default)]
        uy: f64,
    },
    /// `c = c_mean - amplitude * U(0,1)` per cell, seeded.
    Noise {
        rho: f64,
        c_mean: f64,
        amplitude: f64,
        #[serde(default)]
        ux: f64,
        #[serde(default)]
        uy: f64,
    },
    /// `c = mean + amplitude cos(2 pi waves x)`.
    Cosine {
        rho: f64,
        mean: f64,
        amplitude: f64,
        waves: f64,
        #[serde(default)]
        ux: f64,
        #[serde(default)]
        uy: f64,
    },
    /// `c = base + amplitude exp(-width |x - center|^2)`, `rho = c + rho_ratio (1-c)`, at rest.
    Gaussian {
        base: f64,
        amplitude: f64,
        width: f64,
        #[serde(default = "half")]
        center_x: f64,
        #[serde(default = "half")]
        center_y: f64,
        #[serde(default = "half")]
        rho_ratio: f64,
    },
}

fn half() -> f64 {
    0.5
}

impl Default for Initial {
    fn default() -> Self {
        Initial::Uniform {
            rho: 1.0,
            c: 0.5,
            ux: 0.0,
            uy: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSpec {
    pub t_final: f64,
    /// Cap on the first step.
    pub dt_init: f64,
    pub dt_max: f64,
    pub cfl_safety: f64,
    /// Use `dt_max` for every step instead of adapting to the CFL bound.
    pub fixed_dt: bool,
}

impl Default for TimeSpec {
    fn default() -> Self {
        Self {
            t_final: 0.1,
            dt_init: 1e-6,
            dt_max: 1e-5,
            cfl_safety: 0.9,
            fixed_dt: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Simulated time between snapshots; 0 writes only the first and last.
    pub snapshot_interval: f64,
    /// Keep a diagnostics record every this many steps.
    pub diag_stride: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            snapshot_interval: 0.0,
            diag_stride: 1,
        }
    }
}

/// Resolution ladders for the convergence harness.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSpec {
    pub nx: Vec<usize>,
    pub dt: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub name: String,
    pub seed: u64,
    pub grid: GridSpec,
    pub physics: PhysParams,
    pub initial: Initial,
    pub time: TimeSpec,
    pub solver: SolverOptions,
    pub output: OutputSpec,
    pub convergence: ConvergenceSpec,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let key = e.span().map(|s| text[s].trim().to_string()).unwrap_or_default();
            Error::config(key, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.build()?;
        self.physics.validate()?;
        self.solver.validate()?;
        let t = &self.time;
        if !(t.t_final >= 0.0 && t.t_final.is_finite()) {
            return Err(Error::config("time.t_final", "must be finite and >= 0"));
        }
        if !(t.dt_init > 0.0) {
            return Err(Error::config("time.dt_init", "must be > 0"));
        }
        if !(t.dt_max > 0.0) {
            return Err(Error::config("time.dt_max", "must be > 0"));
        }
        if !(t.cfl_safety > 0.0 && t.cfl_safety <= 1.0) {
            return Err(Error::config("time.cfl_safety", "must lie in (0,1]"));
        }
        if self.output.diag_stride == 0 {
            return Err(Error::config("output.diag_stride", "must be >= 1"));
        }
        if !(self.output.snapshot_interval >= 0.0) {
            return Err(Error::config("output.snapshot_interval", "must be >= 0"));
        }
        if self.convergence.dt.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::config("convergence.dt", "entries must be > 0"));
        }
        if self.convergence.nx.iter().any(|n| *n < 3) {
            return Err(Error::config("convergence.nx", "entries must be >= 3"));
        }
        self.validate_initial()
    }

    fn validate_initial(&self) -> Result<()> {
        let open = |key: &str, c: f64| {
            if c > 0.0 && c < 1.0 {
                Ok(())
            } else {
                Err(Error::config(
                    format!("initial.{key}"),
                    format!("{c} must lie in (0,1)"),
                ))
            }
        };
        let positive = |key: &str, v: f64| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("initial.{key}"), "must be > 0"))
            }
        };
        match self.initial {
            Initial::Uniform { rho, c, .. } => {
                positive("rho", rho)?;
                open("c", c)
            }
            Initial::Noise {
                rho, c_mean, amplitude, ..
            } => {
                positive("rho", rho)?;
                open("c_mean", c_mean)?;
                open("c_mean - amplitude", c_mean - amplitude.max(0.0))?;
                open("c_mean - amplitude", c_mean - amplitude.min(0.0))
            }
            Initial::Cosine {
                rho, mean, amplitude, ..
            } => {
                positive("rho", rho)?;
                open("mean + amplitude", mean + amplitude.abs())?;
                open("mean - amplitude", mean - amplitude.abs())
            }
            Initial::Gaussian {
                base,
                amplitude,
                rho_ratio,
                ..
            } => {
                open("base", base)?;
                open("base + amplitude", base + amplitude)?;
                positive("rho_ratio", rho_ratio)
            }
        }
    }
}
