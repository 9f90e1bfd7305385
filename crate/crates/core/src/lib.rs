#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linsolve;
pub mod mesh;
pub mod ns_relax;
pub mod physics;

pub use error::{Error, Result};
pub mod cli;
pub mod config;
pub mod driver;
pub mod io;
pub mod sav_ch;
