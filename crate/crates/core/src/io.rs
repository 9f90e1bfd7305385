//! CSV output: snapshots, diagnostics and convergence tables.
//!
//! Comma separated, one header row, floats written with 17 significant
//! digits so every value reads back bit-exactly.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::driver::{ConvergenceTable, DiagRecord, SimState};
use crate::error::{Error, Result};
use crate::mesh::Axis;
use crate::physics::PhysParams;

pub const DIAG_HEADER: [&str; 16] = [
    "step",
    "t",
    "dt",
    "total_mass",
    "energy",
    "dissipation",
    "dissipation_sq",
    "r",
    "xi",
    "lambda",
    "c_min",
    "c_max",
    "cbar_max",
    "solver_iterations",
    "solver_residual",
    "halvings",
];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |e| {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: e.to_string(),
        }
    }
}

/// `{:.16e}`: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
    }
    let f = File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.flush().map_err(io_err(path))
}

/// One row per cell in lexicographic order:
/// `x[,y],rho,c,vx[,vy],p,mu`.
pub fn write_snapshot(state: &SimState, params: &PhysParams, path: &Path) -> Result<()> {
    let grid = *state.grid();
    let two_d = grid.dim() == 2;
    let mut header = vec!["x"];
    if two_d {
        header.push("y");
    }
    header.extend(["rho", "c", "vx"]);
    if two_d {
        header.push("vy");
    }
    header.extend(["p", "mu"]);
    let vx = state.velocity(Axis::X);
    let vy = if two_d { Some(state.velocity(Axis::Y)) } else { None };
    let p = state.pressure(params)?;

    let mut w = create(path)?;
    w.write_record(&header).map_err(csv_err(path))?;
    let mut row = Vec::with_capacity(header.len());
    for k in 0..grid.len() {
        row.clear();
        let (x, y) = grid.center(k);
        row.push(fmt_f64(x));
        if two_d {
            row.push(fmt_f64(y));
        }
        row.push(fmt_f64(state.rho()[k]));
        row.push(fmt_f64(state.c[k]));
        row.push(fmt_f64(vx[k]));
        if let Some(vy) = &vy {
            row.push(fmt_f64(vy[k]));
        }
        row.push(fmt_f64(p[k]));
        row.push(fmt_f64(state.mu[k]));
        w.write_record(&row).map_err(csv_err(path))?;
    }
    finish(w, path)
}

fn diag_row(d: &DiagRecord) -> Vec<String> {
    vec![
        d.step.to_string(),
        fmt_f64(d.t),
        fmt_f64(d.dt),
        fmt_f64(d.total_mass),
        fmt_f64(d.energy),
        fmt_f64(d.dissipation),
        fmt_f64(d.dissipation_sq),
        fmt_f64(d.r),
        fmt_f64(d.xi),
        fmt_f64(d.lambda),
        fmt_f64(d.c_min),
        fmt_f64(d.c_max),
        fmt_f64(d.cbar_max),
        d.solver_iterations.to_string(),
        fmt_f64(d.solver_residual),
        d.halvings.to_string(),
    ]
}

pub fn write_diagnostics(records: &[DiagRecord], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(DIAG_HEADER).map_err(csv_err(path))?;
    for d in records {
        w.write_record(diag_row(d)).map_err(csv_err(path))?;
    }
    finish(w, path)
}

/// `resolution,error,order` rows; `order` is NaN on the first row.
pub fn write_convergence(table: &ConvergenceTable, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["resolution", "error", "order"])
        .map_err(csv_err(path))?;
    for r in &table.rows {
        w.write_record([fmt_f64(r.resolution), fmt_f64(r.error), fmt_f64(r.order)])
            .map_err(csv_err(path))?;
    }
    finish(w, path)
}

/// Header and numeric columns of any file written by this module.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub path: PathBuf,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::Reader::from_reader(f);
    let header: Vec<String> = rdr
        .headers()
        .map_err(csv_err(path))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(i + 2);
        let row = rec
            .iter()
            .map(|s| {
                s.trim().parse::<f64>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("{s:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Table {
        path: path.to_path_buf(),
        header,
        rows,
    })
}

pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagRecord>> {
    let t = read_table(path)?;
    if t.header.iter().map(String::as_str).ne(DIAG_HEADER.iter().copied()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "unexpected diagnostics header".into(),
        });
    }
    Ok(t.rows
        .iter()
        .map(|r| DiagRecord {
            step: r[0] as usize,
            t: r[1],
            dt: r[2],
            total_mass: r[3],
            energy: r[4],
            dissipation: r[5],
            dissipation_sq: r[6],
            r: r[7],
            xi: r[8],
            lambda: r[9],
            c_min: r[10],
            c_max: r[11],
            cbar_max: r[12],
            solver_iterations: r[13] as usize,
            solver_residual: r[14],
            halvings: r[15] as usize,
        })
        .collect())
}
