//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::driver::{self, ConvergenceReport, Simulation};
use crate::error::{Error, Result};
use crate::io;
use crate::ns_relax;

#[derive(Debug, Parser)]
#[command(
    name = "gnsch",
    version,
    about = "Finite-volume compressible Navier-Stokes-Cahn-Hilliard solver"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output directory (overrides output.dir)
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// RNG seed for noisy initial data (overrides seed)
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Only print errors
    #[arg(short, long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a configuration to t_final, writing snapshots and diagnostics
    Run { config: PathBuf },
    /// Grid refinement study over convergence.nx
    ConvergeSpace { config: PathBuf },
    /// Time-step refinement study over convergence.dt
    ConvergeTime { config: PathBuf },
    /// Take a single step with dt_init and report the invariants
    Check { config: PathBuf },
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_OTHER: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        e if e.is_invariant_violation() => EXIT_INVARIANT,
        Error::Config { .. } | Error::TooFewRuns(_) => EXIT_USAGE,
        _ => EXIT_OTHER,
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load(cli: &Cli, path: &Path) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(dir) = &cli.output {
        cfg.output.dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run { config } => run(cli, &load(cli, config)?),
        Command::ConvergeSpace { config } => {
            let cfg = load(cli, config)?;
            let report = driver::convergence_space(&cfg)?;
            write_report(cli, &cfg, &report, "dx")
        }
        Command::ConvergeTime { config } => {
            let cfg = load(cli, config)?;
            let report = driver::convergence_time(&cfg)?;
            write_report(cli, &cfg, &report, "dt")
        }
        Command::Check { config } => check(cli, &load(cli, config)?),
    }
}

fn run(cli: &Cli, cfg: &RunConfig) -> Result<()> {
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.clone(),
        source,
    })?;
    let cfg_path = dir.join("config.toml");
    std::fs::write(&cfg_path, cfg.to_toml_string()).map_err(|source| Error::Io { path: cfg_path, source })?;

    let mut index = String::from("index,t,step\n");
    let mut n = 0usize;
    let mut diagnostics = Vec::new();
    let result = driver::run_with(
        cfg,
        |st| {
            io::write_snapshot(st, &cfg.physics, &dir.join(format!("snap_{n:04}.csv")))?;
            index.push_str(&format!("{n},{},{}\n", io::fmt_f64(st.t), st.step_index));
            n += 1;
            Ok(())
        },
        |d| diagnostics.push(*d),
    );
    let index_path = dir.join("snapshots.csv");
    std::fs::write(&index_path, index).map_err(|source| Error::Io {
        path: index_path,
        source,
    })?;
    io::write_diagnostics(&diagnostics, &dir.join("diagnostics.csv"))?;
    let out = result?;

    if !cli.quiet {
        let st = &out.final_state;
        let drift = (st.total_mass() - out.initial_mass).abs() / out.initial_mass;
        println!("{}: t = {:.6} after {} steps", cfg.name, st.t, st.step_index);
        println!("  relative mass drift  {drift:.3e}");
        println!("  energy               {:.10} -> {:.10}", out.initial_energy, st.energy);
        println!("  c range              [{:.6e}, {:.6e}]", st.c.min(), st.c.max());
        println!("  xi                   {:.12}", st.sav.xi);
        println!("  wrote {n} snapshots to {}", dir.display());
    }
    Ok(())
}

fn write_report(cli: &Cli, cfg: &RunConfig, report: &ConvergenceReport, unit: &str) -> Result<()> {
    let dir = &cfg.output.dir;
    io::write_convergence(&report.total, &dir.join("convergence.csv"))?;
    io::write_convergence(&report.rho, &dir.join("convergence_rho.csv"))?;
    io::write_convergence(&report.c, &dir.join("convergence_c.csv"))?;
    io::write_convergence(&report.v, &dir.join("convergence_v.csv"))?;
    if !cli.quiet {
        println!("{:>12} {:>14} {:>14} {:>14} {:>14}", unit, "error", "rho", "c", "v");
        for i in 0..report.total.rows.len() {
            println!(
                "{:>12.4e} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}",
                report.total.rows[i].resolution,
                report.total.rows[i].error,
                report.rho.rows[i].error,
                report.c.rows[i].error,
                report.v.rows[i].error
            );
        }
        println!(
            "fitted order: total {:.3}, rho {:.3}, c {:.3}, v {:.3}",
            report.total.fitted_order, report.rho.fitted_order, report.c.fitted_order, report.v.fitted_order
        );
    }
    Ok(())
}

fn check(cli: &Cli, cfg: &RunConfig) -> Result<()> {
    let mut sim = Simulation::new(cfg)?;
    let consts = ns_relax::subchar_constants(&sim.state.hyp.u, &sim.state.c, &sim.stepper.params)?;
    let dt = if cfg.time.fixed_dt {
        cfg.time.dt_max
    } else {
        cfg.time.dt_init
    };
    let cfl = consts.cfl_number(dt, sim.state.grid());
    let mass0 = sim.state.total_mass();
    let rec = sim.advance_by(dt)?;
    if !cli.quiet {
        println!("{}: one step, dt = {dt:e}", cfg.name);
        println!("  CFL number           {cfl:.6}");
        println!("  relative mass drift  {:.3e}", (rec.total_mass - mass0).abs() / mass0);
        println!("  c range              [{:.6e}, {:.6e}]", rec.c_min, rec.c_max);
        println!("  xi                   {:.12}", rec.xi);
        println!("  dissipation          {:.3e}", rec.dissipation);
        println!(
            "  solver               {} iterations, residual {:.2e}",
            rec.solver_iterations, rec.solver_residual
        );
        println!("ok");
    }
    Ok(())
}
