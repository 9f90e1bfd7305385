use std::path::PathBuf;

use thiserror::Error;

/// Every failure the solver can report. Variants map onto distinct exit
/// conditions: configuration problems, invariant violations found while
/// stepping, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("axis {axis} out of range for a {dim}D grid")]
    Axis { axis: usize, dim: usize },

    #[error("field/grid mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("negative diffusion coefficient {value} in cell {cell}")]
    NegativeCoefficient { cell: usize, value: f64 },

    #[error("density lost positivity: rho = {value} in cell {cell}")]
    Positivity { cell: usize, value: f64 },

    #[error("mass fraction left (0,1): c = {value} in cell {cell}")]
    Bounds { cell: usize, value: f64 },

    #[error("CFL condition violated: CFL number {number} > 1")]
    Cfl { number: f64 },

    #[error("SAV ratio xi = {xi} outside (0,2)")]
    Xi { xi: f64 },

    #[error("SAV guard failed: numerator factor {factor} < 0 (dt too large)")]
    SavGuard { factor: f64 },

    #[error("time step halved {halvings} times without satisfying the SAV guard")]
    StepRetries { halvings: usize },

    #[error("linear solver did not converge: {iterations} iterations, relative residual {residual:e}")]
    Solver { iterations: usize, residual: f64 },

    #[error("matrix is singular to working precision (pivot {pivot} at column {column})")]
    Singular { column: usize, pivot: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("convergence study needs at least two runs, got {0}")]
    TooFewRuns(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
}

impl Error {
    /// True for failures that mean the discrete invariants broke during a run
    /// (as opposed to bad input or a broken environment).
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            Error::Positivity { .. }
                | Error::Bounds { .. }
                | Error::Cfl { .. }
                | Error::Xi { .. }
                | Error::SavGuard { .. }
                | Error::StepRetries { .. }
                | Error::Solver { .. }
                | Error::Domain { .. }
                | Error::NegativeCoefficient { .. }
        )
    }

    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
