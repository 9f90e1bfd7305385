//! Time stepping, whole runs and the convergence harness.
//!
//! A step advances the Navier-Stokes part first (relaxation + upwind
//! transport + friction), then solves the Cahn-Hilliard system with the new
//! density and velocity, corrects mass with `lambda`, updates `r` and
//! rescales. If the SAV guard trips, `dt` is halved and the whole step is
//! redone from the relaxation stage.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Initial, RunConfig, TimeSpec};
use crate::error::{Error, Result};
use crate::mesh::{self, Axis, Field, Grid};
use crate::ns_relax::{self, HyperbolicState, SubcharConstants};
use crate::physics::PhysParams;
use crate::sav_ch::{self, ChInputs, SavState, SolverOptions, VUpdate};

/// Maximum number of times one step may halve `dt` on a guard failure.
pub const MAX_HALVINGS: usize = 20;

/// Everything that evolves.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub hyp: HyperbolicState,
    pub c: Field,
    /// Transformed variable `v`, evolved on its own (not recomputed from `c`).
    pub vtrans: Field,
    pub mu: Field,
    pub sav: SavState,
    /// `E(rho, c)` of the current state.
    pub energy: f64,
    pub t: f64,
    pub step_index: usize,
}

impl SimState {
    pub fn grid(&self) -> &Grid {
        self.hyp.grid()
    }

    pub fn rho(&self) -> &Field {
        self.hyp.rho()
    }

    pub fn velocity(&self, axis: Axis) -> Field {
        self.hyp.velocity(axis)
    }

    pub fn velocities(&self) -> Vec<Field> {
        self.grid().axes().iter().map(|&a| self.velocity(a)).collect()
    }

    pub fn pressure(&self, params: &PhysParams) -> Result<Field> {
        let rho = self.rho();
        let vals = (0..rho.len())
            .map(|k| params.pressure(rho[k], self.c[k]))
            .collect::<Result<Vec<_>>>()?;
        Field::new(*self.grid(), vals)
    }

    pub fn total_mass(&self) -> f64 {
        mesh::integrate(self.rho())
    }
}

/// Per-step measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagRecord {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub total_mass: f64,
    pub energy: f64,
    /// `sqrt(a)|U^{n+1}| + |V^{n+1}| + r^{n+1} - (sqrt(a)|U^n| + |V*| + C r^n)`
    /// (plus the `W` terms in 2D).
    pub dissipation: f64,
    /// Same with squared norms, `a|U|^2 + |V|^2`.
    pub dissipation_sq: f64,
    pub r: f64,
    pub xi: f64,
    pub lambda: f64,
    pub c_min: f64,
    pub c_max: f64,
    /// Largest `lambda T(vbar)` before the rescale.
    pub cbar_max: f64,
    pub solver_iterations: usize,
    pub solver_residual: f64,
    pub halvings: usize,
}

fn open_unit_check(c: &Field) -> Result<()> {
    match c.values().iter().enumerate().find(|(_, v)| !(**v > 0.0 && **v < 1.0)) {
        Some((cell, &value)) => Err(Error::Bounds { cell, value }),
        None => Ok(()),
    }
}

/// Builds the initial state of a configuration.
pub fn init_state(cfg: &RunConfig) -> Result<SimState> {
    let grid = cfg.grid.build()?;
    let params = &cfg.physics;
    let (rho, c, vel) = initial_fields(&grid, &cfg.initial, cfg.seed);
    open_unit_check(&c)?;
    let momentum: Vec<Field> = vel.iter().take(grid.dim()).map(|&u| rho.scale(u)).collect();
    let hyp = HyperbolicState::at_equilibrium(rho.clone(), momentum, &c, params)?;
    let vtrans = c.try_map(|v| params.transform.inverse(v))?;
    let mu = sav_ch::chemical_potential(&rho, &c, params)?;
    let energy = params.energy(&rho, &c)?;
    Ok(SimState {
        hyp,
        c,
        vtrans,
        mu,
        sav: SavState::new(energy, params.c_under),
        energy,
        t: 0.0,
        step_index: 0,
    })
}

fn initial_fields(grid: &Grid, init: &Initial, seed: u64) -> (Field, Field, [f64; 2]) {
    match *init {
        Initial::Uniform { rho, c, ux, uy } => (Field::constant(*grid, rho), Field::constant(*grid, c), [ux, uy]),
        Initial::Noise {
            rho,
            c_mean,
            amplitude,
            ux,
            uy,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vals = (0..grid.len())
                .map(|_| c_mean - amplitude * rng.random::<f64>())
                .collect();
            (
                Field::constant(*grid, rho),
                Field::new(*grid, vals).expect("length matches grid"),
                [ux, uy],
            )
        }
        Initial::Cosine {
            rho,
            mean,
            amplitude,
            waves,
            ux,
            uy,
        } => {
            let c = Field::from_fn(*grid, |x, _| {
                mean + amplitude * (2.0 * std::f64::consts::PI * waves * x).cos()
            });
            (Field::constant(*grid, rho), c, [ux, uy])
        }
        Initial::Gaussian {
            base,
            amplitude,
            width,
            center_x,
            center_y,
            rho_ratio,
        } => {
            let two_d = grid.dim() == 2;
            let c = Field::from_fn(*grid, |x, y| {
                let dy2 = if two_d { (y - center_y).powi(2) } else { 0.0 };
                base + amplitude * (-width * (x - center_x).powi(2) - width * dy2).exp()
            });
            let rho = c.map(|c| c + rho_ratio * (1.0 - c));
            (rho, c, [0.0, 0.0])
        }
    }
}

/// `min(dt_max, safety * CFL bound)`, and additionally `<= dt_init` on the
/// first step. With `fixed_dt` the result is `dt_max`.
pub fn compute_dt(consts: &SubcharConstants, grid: &Grid, time: &TimeSpec, first: bool) -> Result<f64> {
    if !(consts.a > 0.0) {
        return Err(Error::Domain {
            what: "a1",
            value: consts.a,
            domain: "(0,inf)",
        });
    }
    if time.fixed_dt {
        return Ok(time.dt_max);
    }
    let mut dt = time.dt_max.min(time.cfl_safety * consts.max_dt(grid));
    if first {
        dt = dt.min(time.dt_init);
    }
    Ok(dt)
}

/// Stateless stepping rules of one configuration.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub params: PhysParams,
    pub solver: SolverOptions,
}

struct Attempt {
    state: SimState,
    record: DiagRecord,
}

impl Stepper {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            params: cfg.physics.clone(),
            solver: cfg.solver,
        }
    }

    /// Advances by `dt`, halving on SAV guard failures.
    pub fn step(&self, state: &SimState, dt: f64) -> Result<(SimState, DiagRecord)> {
        let consts = ns_relax::subchar_constants(&state.hyp.u, &state.c, &self.params)?;
        let mut dt = dt;
        for halvings in 0..=MAX_HALVINGS {
            match self.attempt(state, &consts, dt) {
                Ok(mut a) => {
                    a.record.halvings = halvings;
                    return Ok((a.state, a.record));
                }
                Err(Error::SavGuard { .. }) => dt *= 0.5,
                Err(e) => return Err(e),
            }
        }
        Err(Error::StepRetries { halvings: MAX_HALVINGS })
    }

    fn attempt(&self, st: &SimState, consts: &SubcharConstants, dt: f64) -> Result<Attempt> {
        let p = &self.params;
        let u = &st.hyp.u;
        let flux_x = ns_relax::flux_f(u, &st.c, p)?;
        let vstar: Vec<Field> = st
            .hyp
            .v
            .iter()
            .zip(&flux_x)
            .map(|(v, f)| ns_relax::relax_star(v, f, dt, p.eta))
            .collect();
        let wstar = match &st.hyp.w {
            Some(w) => {
                let flux_y = ns_relax::flux_k(u, &st.c, p)?;
                Some(
                    w.iter()
                        .zip(&flux_y)
                        .map(|(w, f)| ns_relax::relax_star(w, f, dt, p.eta))
                        .collect::<Vec<_>>(),
                )
            }
            None => None,
        };
        let hyp = ns_relax::fv_update(&st.hyp, &vstar, wstar.as_deref(), *consts, dt, &st.c, p)?;

        let rho_next = hyp.rho().clone();
        let vel = sav_ch::velocities(&rho_next, &hyp.u[1..]);
        let sys = sav_ch::assemble_system(
            ChInputs {
                vn: &st.vtrans,
                cn: &st.c,
                rho_n: st.rho(),
                rho_next: &rho_next,
                vel_next: &vel,
            },
            dt,
            p,
            self.solver.advection,
        )?;
        let (vbar, mu, report) = sav_ch::solve_ch(&sys, &self.solver, Some((&st.vtrans, &st.mu)))?;
        let (lambda, cbar) = sav_ch::lambda_correct(&vbar, &st.c, st.rho(), dt, p)?;
        let cbar_max = cbar.max();
        open_unit_check(&cbar)?;
        let e_bar = p.energy(&rho_next, &cbar)?;
        let (r_next, factors) = sav_ch::update_r(&st.sav, &cbar, &mu, &rho_next, e_bar, dt, p)?;
        let out = sav_ch::rescale(r_next, st.sav.c0, e_bar, &cbar, &vbar)?;
        open_unit_check(&out.c)?;
        let energy = p.energy(&rho_next, &out.c)?;
        let vtrans = match self.solver.v_update {
            VUpdate::Evolve => out.v,
            VUpdate::Reinit => out.c.try_map(|c| p.transform.inverse(c))?,
        };

        let (dissipation, dissipation_sq) = dissipation(
            &st.hyp,
            &hyp,
            &vstar,
            wstar.as_deref(),
            consts,
            st.sav.r,
            r_next,
            factors.ratio(),
        );
        let next = SimState {
            hyp,
            c: out.c,
            vtrans,
            mu,
            sav: SavState {
                r: r_next,
                c0: st.sav.c0,
                xi: out.xi,
                sigma: out.sigma,
            },
            energy,
            t: st.t + dt,
            step_index: st.step_index + 1,
        };
        let record = DiagRecord {
            step: next.step_index,
            t: next.t,
            dt,
            total_mass: next.total_mass(),
            energy,
            dissipation,
            dissipation_sq,
            r: r_next,
            xi: out.xi,
            lambda,
            c_min: next.c.min(),
            c_max: next.c.max(),
            cbar_max,
            solver_iterations: report.iterations,
            solver_residual: report.residual,
            halvings: 0,
        };
        Ok(Attempt { state: next, record })
    }
}

#[allow(clippy::too_many_arguments)]
fn dissipation(
    old: &HyperbolicState,
    new: &HyperbolicState,
    vstar: &[Field],
    wstar: Option<&[Field]>,
    consts: &SubcharConstants,
    r_old: f64,
    r_new: f64,
    c_factor: f64,
) -> (f64, f64) {
    let un0 = ns_relax::vector_norm(&old.u);
    let un1 = ns_relax::vector_norm(&new.u);
    let sa = consts.a.sqrt();
    let mut lin = sa * un1 + ns_relax::vector_norm(&new.v) - sa * un0 - ns_relax::vector_norm(vstar);
    let mut sq = consts.a * un1 * un1 + ns_relax::vector_norm(&new.v).powi(2)
        - consts.a * un0 * un0
        - ns_relax::vector_norm(vstar).powi(2);
    if let (Some(ws), Some(wn), Some(b)) = (wstar, new.w.as_ref(), consts.b) {
        let sb = b.sqrt();
        lin += sb * un1 + ns_relax::vector_norm(wn) - sb * un0 - ns_relax::vector_norm(ws);
        sq += b * un1 * un1 + ns_relax::vector_norm(wn).powi(2) - b * un0 * un0 - ns_relax::vector_norm(ws).powi(2);
    }
    let r_term = r_new - c_factor * r_old;
    (lin + r_term, sq + r_term)
}

/// A configuration being integrated step by step.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub stepper: Stepper,
    pub time: TimeSpec,
    pub state: SimState,
}

impl Simulation {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            stepper: Stepper::from_config(cfg),
            time: cfg.time.clone(),
            state: init_state(cfg)?,
        })
    }

    /// Step size the next step would use, before the end-time clamp.
    pub fn next_dt(&self) -> Result<f64> {
        let consts = ns_relax::subchar_constants(&self.state.hyp.u, &self.state.c, &self.stepper.params)?;
        compute_dt(&consts, self.state.grid(), &self.time, self.state.step_index == 0)
    }

    pub fn finished(&self) -> bool {
        self.state.t >= self.time.t_final * (1.0 - 1e-12)
    }

    /// One step with the adaptive (or fixed) rule, clamped to land on `t_final`.
    pub fn advance(&mut self) -> Result<DiagRecord> {
        let mut dt = self.next_dt()?;
        let remaining = self.time.t_final - self.state.t;
        if !self.time.fixed_dt && remaining > 0.0 {
            dt = dt.min(remaining);
        }
        self.advance_by(dt)
    }

    pub fn advance_by(&mut self, dt: f64) -> Result<DiagRecord> {
        let (next, rec) = self.stepper.step(&self.state, dt)?;
        self.state = next;
        Ok(rec)
    }
}

/// Outcome of [`run`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub final_state: SimState,
    pub diagnostics: Vec<DiagRecord>,
    pub initial_mass: f64,
    pub initial_energy: f64,
}

/// Integrates to `t_final`. `on_snapshot` sees the initial state, the state
/// after each `snapshot_interval` of simulated time, and the final state.
pub fn run(cfg: &RunConfig, on_snapshot: impl FnMut(&SimState) -> Result<()>) -> Result<RunOutput> {
    let mut diagnostics = Vec::new();
    let mut out = run_with(cfg, on_snapshot, |d| diagnostics.push(*d))?;
    out.diagnostics = diagnostics;
    Ok(out)
}

/// Like [`run`], but hands every kept diagnostics record to `on_record` as it
/// is produced, so a caller still has them when a later step fails. The
/// returned `diagnostics` is empty.
pub fn run_with(
    cfg: &RunConfig,
    mut on_snapshot: impl FnMut(&SimState) -> Result<()>,
    mut on_record: impl FnMut(&DiagRecord),
) -> Result<RunOutput> {
    let mut sim = Simulation::new(cfg)?;
    let initial_mass = sim.state.total_mass();
    let initial_energy = sim.state.energy;
    on_snapshot(&sim.state)?;
    let interval = cfg.output.snapshot_interval;
    let mut next_snap = if interval > 0.0 { interval } else { f64::INFINITY };
    let mut last_snap_step = 0;

    let fixed_steps = if cfg.time.fixed_dt {
        Some((cfg.time.t_final / cfg.time.dt_max).round() as usize)
    } else {
        None
    };
    loop {
        let done = match fixed_steps {
            Some(n) => sim.state.step_index >= n,
            None => sim.finished(),
        };
        if done {
            break;
        }
        let rec = sim.advance()?;
        if rec.step % cfg.output.diag_stride == 0 {
            on_record(&rec);
        }
        if sim.state.t >= next_snap * (1.0 - 1e-12) {
            on_snapshot(&sim.state)?;
            last_snap_step = sim.state.step_index;
            while next_snap <= sim.state.t * (1.0 + 1e-12) {
                next_snap += interval;
            }
        }
    }
    if last_snap_step != sim.state.step_index {
        on_snapshot(&sim.state)?;
    }
    Ok(RunOutput {
        final_state: sim.state,
        diagnostics: Vec::new(),
        initial_mass,
        initial_energy,
    })
}

/// One row of a convergence table: the error between a run and the next
/// finer one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvRow {
    /// `dx` or `dt` of the coarser run of the pair.
    pub resolution: f64,
    pub error: f64,
    /// Observed order against the previous row (NaN on the first).
    pub order: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvRow>,
    /// Least-squares slope of `log(error)` against `log(resolution)`.
    pub fitted_order: f64,
}

impl ConvergenceTable {
    pub fn from_points(resolution: &[f64], error: &[f64]) -> Result<Self> {
        if resolution.len() != error.len() {
            return Err(Error::Dimension("resolution/error length mismatch".into()));
        }
        let mut rows = Vec::with_capacity(error.len());
        for i in 0..error.len() {
            let order = if i == 0 {
                f64::NAN
            } else {
                (error[i - 1] / error[i]).ln() / (resolution[i - 1] / resolution[i]).ln()
            };
            rows.push(ConvRow {
                resolution: resolution[i],
                error: error[i],
                order,
            });
        }
        Ok(Self {
            rows,
            fitted_order: fit_order(resolution, error)?,
        })
    }
}

/// Slope of the least-squares line through `(ln h, ln e)`.
pub fn fit_order(resolution: &[f64], error: &[f64]) -> Result<f64> {
    if resolution.len() < 2 || resolution.len() != error.len() {
        return Err(Error::TooFewRuns(resolution.len().min(error.len()) + 1));
    }
    let xs: Vec<f64> = resolution.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = error.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Tables for the summed error and each variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub total: ConvergenceTable,
    pub rho: ConvergenceTable,
    pub c: ConvergenceTable,
    pub v: ConvergenceTable,
}

struct PairErrors {
    rho: f64,
    c: f64,
    v: f64,
}

fn build_report(resolution: &[f64], errs: &[PairErrors]) -> Result<ConvergenceReport> {
    let pick = |f: fn(&PairErrors) -> f64| errs.iter().map(f).collect::<Vec<_>>();
    let total: Vec<f64> = errs.iter().map(|e| e.rho + e.c + e.v).collect();
    Ok(ConvergenceReport {
        total: ConvergenceTable::from_points(resolution, &total)?,
        rho: ConvergenceTable::from_points(resolution, &pick(|e| e.rho))?,
        c: ConvergenceTable::from_points(resolution, &pick(|e| e.c))?,
        v: ConvergenceTable::from_points(resolution, &pick(|e| e.v))?,
    })
}

fn final_state(cfg: &RunConfig) -> Result<SimState> {
    Ok(run(cfg, |_| Ok(()))?.final_state)
}

/// `sqrt(sum_fine dV (coarse(extended) - fine)^2)` where each coarse cell is
/// copied onto the fine cells it covers.
pub fn extended_difference(coarse: &Field, fine: &Field) -> Result<f64> {
    let (gc, gf) = (coarse.grid(), fine.grid());
    let rx = gf.nx() / gc.nx();
    let ry = gf.ny() / gc.ny();
    if gc.dim() != gf.dim() || rx * gc.nx() != gf.nx() || ry * gc.ny() != gf.ny() {
        return Err(Error::Dimension(format!(
            "{}x{} grid does not refine {}x{}",
            gf.nx(),
            gf.ny(),
            gc.nx(),
            gc.ny()
        )));
    }
    let mut sum = 0.0;
    for k in 0..gf.len() {
        let (j, i) = gf.coords(k);
        let d = coarse[gc.index(j / rx, i / ry)] - fine[k];
        sum += d * d;
    }
    Ok((sum * gf.cell_volume()).sqrt())
}

fn pair_errors(coarse: &SimState, fine: &SimState) -> Result<PairErrors> {
    let mut v = 0.0;
    for &axis in coarse.grid().axes() {
        v += extended_difference(&coarse.velocity(axis), &fine.velocity(axis))?;
    }
    Ok(PairErrors {
        rho: extended_difference(coarse.rho(), fine.rho())?,
        c: extended_difference(&coarse.c, &fine.c)?,
        v,
    })
}

/// Runs the `convergence.nx` ladder (each entry doubling the previous) and
/// compares consecutive grids at `t_final`.
pub fn convergence_space(cfg: &RunConfig) -> Result<ConvergenceReport> {
    let ladder = &cfg.convergence.nx;
    if ladder.len() < 2 {
        return Err(Error::TooFewRuns(ladder.len()));
    }
    let states: Vec<SimState> = ladder
        .par_iter()
        .map(|&nx| {
            let mut c = cfg.clone();
            c.grid.nx = nx;
            if c.grid.dim == 2 {
                c.grid.ny = nx;
            }
            final_state(&c)
        })
        .collect::<Result<_>>()?;
    let mut res = Vec::new();
    let mut errs = Vec::new();
    for w in states.windows(2) {
        res.push(w[0].grid().dx());
        errs.push(pair_errors(&w[0], &w[1])?);
    }
    build_report(&res, &errs)
}

/// Runs the `convergence.dt` ladder with fixed steps on one grid and
/// compares consecutive step sizes at `t_final`.
pub fn convergence_time(cfg: &RunConfig) -> Result<ConvergenceReport> {
    let ladder = &cfg.convergence.dt;
    if ladder.len() < 2 {
        return Err(Error::TooFewRuns(ladder.len()));
    }
    let states: Vec<SimState> = ladder
        .par_iter()
        .map(|&dt| {
            let mut c = cfg.clone();
            c.time.fixed_dt = true;
            c.time.dt_max = dt;
            c.time.dt_init = dt;
            final_state(&c)
        })
        .collect::<Result<_>>()?;
    let mut res = Vec::new();
    let mut errs = Vec::new();
    for (w, dt) in states.windows(2).zip(ladder) {
        res.push(*dt);
        errs.push(pair_errors(&w[0], &w[1])?);
    }
    build_report(&res, &errs)
}
