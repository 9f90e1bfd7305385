//! Bound-preserving SAV step for the Cahn-Hilliard part.
//!
//! The mass fraction is carried through the transform `c = T(v)`. One step
//! solves a linear system for the provisional pair `(vbar, mu)`, rescales
//! `T(vbar)` by a scalar `lambda` so the discrete mass balance of `c` holds,
//! advances the auxiliary energy scalar `r`, and finally multiplies `c` and
//! `v` by `sigma = 1 - (1 - xi)^2` with `xi = r / (E + C0)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linsolve::{self, BandedLu, GmresOptions, Ilu0, SolveReport, SparseMatrix};
use crate::mesh::{self, Field, Grid};
use crate::physics::PhysParams;

/// Auxiliary energy scalar and the last rescaling it produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SavState {
    pub r: f64,
    pub c0: f64,
    pub xi: f64,
    pub sigma: f64,
}

impl SavState {
    /// `C0 = 2 c_under + |E0|`, `r0 = E0 + C0`.
    pub fn new(e0: f64, c_under: f64) -> Self {
        let c0 = 2.0 * c_under + e0.abs();
        Self {
            r: e0 + c0,
            c0,
            xi: 1.0,
            sigma: 1.0,
        }
    }
}

/// Discretisation of the transport term `vel . grad(vbar)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Advection {
    #[default]
    Upwind,
    Central,
}

/// How the coupled `(vbar, mu)` system is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    #[default]
    Gmres,
    /// Banded LU after a zigzag renumbering of the periodic grid.
    Direct,
}

/// What the next step starts from for the transformed variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VUpdate {
    /// `v^{n+1} = sigma vbar`, carried independently of `c`.
    #[default]
    Evolve,
    /// `v^{n+1} = T^{-1}(c^{n+1})`.
    Reinit,
}

/// Left preconditioner for the iterative solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecondKind {
    Jacobi,
    /// ILU(0) with each `vbar` unknown next to its `mu` partner.
    #[default]
    Ilu0,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub method: SolverMethod,
    pub preconditioner: PrecondKind,
    pub tol: f64,
    pub restart: usize,
    pub maxiter: usize,
    pub advection: Advection,
    pub v_update: VUpdate,
}

impl Default for SolverOptions {
    fn default() -> Self {
        let g = GmresOptions::default();
        Self {
            method: SolverMethod::Gmres,
            preconditioner: PrecondKind::Ilu0,
            tol: g.tol,
            restart: g.restart,
            maxiter: g.maxiter,
            advection: Advection::Upwind,
            v_update: VUpdate::Evolve,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::config("solver.tol", format!("{} must lie in (0,1)", self.tol)));
        }
        if self.restart == 0 {
            return Err(Error::config("solver.restart", "must be positive"));
        }
        if self.maxiter == 0 {
            return Err(Error::config("solver.maxiter", "must be positive"));
        }
        Ok(())
    }

    fn gmres(&self) -> GmresOptions {
        GmresOptions {
            tol: self.tol,
            restart: self.restart,
            maxiter: self.maxiter,
        }
    }
}

/// Linear system in `2 n` unknowns: `vbar` in `0..n`, `mu` in `n..2n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChSystem {
    pub grid: Grid,
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
}

/// Time-level data the assembly reads.
#[derive(Debug, Clone, Copy)]
pub struct ChInputs<'a> {
    pub vn: &'a Field,
    pub cn: &'a Field,
    pub rho_n: &'a Field,
    pub rho_next: &'a Field,
    /// One velocity component per axis, at the new time level.
    pub vel_next: &'a [Field],
}

/// Assembles the implicit system for `(vbar, mu)`.
///
/// Row `k`:
/// `vbar/dt + vel . grad vbar - div(b(c^n) grad mu) / (T'(v^n) rho^{n+1})
///   = v^n/dt + F_c(rho^n, c^n) / (T'(v^n) rho^{n+1})`.
///
/// Row `n + k`:
/// `mu + gamma T'(v^n)/rho^{n+1} lap(vbar)
///   = -gamma T''(v^n)/rho^{n+1} |grad v^n|^2 + dpsi0/dc(rho^n, c^n)`.
pub fn assemble_system(inp: ChInputs<'_>, dt: f64, params: &PhysParams, advection: Advection) -> Result<ChSystem> {
    let grid = *inp.vn.grid();
    let n = grid.len();
    if inp.vel_next.len() != grid.dim() {
        return Err(Error::Dimension(format!(
            "{} velocity components on a {}D grid",
            inp.vel_next.len(),
            grid.dim()
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::Domain {
            what: "dt",
            value: dt,
            domain: "(0,inf)",
        });
    }
    let tr = params.transform;
    let mob = inp.cn.try_map(|c| params.mobility(c))?;
    let grad_vn = mesh::grad_norm_sq(inp.vn)?;

    let mut rows = Vec::with_capacity(2 * n);
    let mut mu_rows = Vec::with_capacity(n);
    let mut rhs = vec![0.0; 2 * n];
    for k in 0..n {
        let rho1 = inp.rho_next[k];
        if !(rho1 > 0.0) {
            return Err(Error::Positivity { cell: k, value: rho1 });
        }
        let v = inp.vn[k];
        let d1 = tr.derivative(v);
        if !(d1 > 0.0) {
            return Err(Error::Domain {
                what: "T'(v)",
                value: d1,
                domain: "(0,inf)",
            });
        }
        let s = 1.0 / (d1 * rho1);
        let g = params.gamma * d1 / rho1;
        let mut row = Vec::with_capacity(2 + 4 * grid.dim());
        let mut mu_row = Vec::with_capacity(2 + 2 * grid.dim());
        let mut adv_diag = [0.0; 2];
        let mut diff_diag = [0.0; 2];
        let mut lap_diag = [0.0; 2];
        for &axis in grid.axes() {
            let a = axis.index();
            let h = grid.spacing(axis);
            let h2 = h * h;
            let (kp, km) = (grid.neighbor(k, axis, 1), grid.neighbor(k, axis, -1));
            let vel = inp.vel_next[a][k];
            match advection {
                Advection::Upwind if vel >= 0.0 => {
                    adv_diag[a] = vel / h;
                    row.push((km, -vel / h));
                }
                Advection::Upwind => {
                    adv_diag[a] = -vel / h;
                    row.push((kp, vel / h));
                }
                Advection::Central => {
                    row.push((kp, vel / (2.0 * h)));
                    row.push((km, -vel / (2.0 * h)));
                }
            }
            let bp = mesh::face_mean(mob[k], mob[kp]);
            let bm = mesh::face_mean(mob[k], mob[km]);
            row.push((n + kp, -s * bp / h2));
            row.push((n + km, -s * bm / h2));
            diff_diag[a] = s * (bp + bm) / h2;

            mu_row.push((kp, g / h2));
            mu_row.push((km, g / h2));
            lap_diag[a] = -2.0 * g / h2;
        }
        row.push((k, 1.0 / dt + (adv_diag[0] + adv_diag[1])));
        row.push((n + k, diff_diag[0] + diff_diag[1]));
        mu_row.push((k, lap_diag[0] + lap_diag[1]));
        mu_row.push((n + k, 1.0));
        rows.push(row);
        mu_rows.push(mu_row);
        rhs[k] = v / dt + params.source(inp.rho_n[k], inp.cn[k]) * s;
        rhs[n + k] =
            -params.gamma * tr.second_derivative(v) / rho1 * grad_vn[k] + params.dpsi0_dc(inp.rho_n[k], inp.cn[k])?;
    }
    rows.extend(mu_rows);
    Ok(ChSystem {
        grid,
        matrix: SparseMatrix::from_rows(2 * n, rows)?,
        rhs,
    })
}

/// Renumbering that makes the periodic couplings banded: zigzag along each
/// axis, cells interleaved with their `mu` partner.
pub fn banded_order(grid: &Grid) -> Vec<usize> {
    let n = grid.len();
    let px = linsolve::zigzag_order(grid.nx());
    let py = linsolve::zigzag_order(grid.ny());
    let mut perm = vec![0; 2 * n];
    for k in 0..n {
        let (j, i) = grid.coords(k);
        let cell = py[i] * grid.nx() + px[j];
        perm[k] = 2 * cell;
        perm[n + k] = 2 * cell + 1;
    }
    perm
}

/// `vbar_k -> 2k`, `mu_k -> 2k + 1`.
pub fn interleaved_order(n: usize) -> Vec<usize> {
    (0..2 * n)
        .map(|i| if i < n { 2 * i } else { 2 * (i - n) + 1 })
        .collect()
}

/// Solves the system and splits the solution into `(vbar, mu)`.
///
/// `guess` (typically `(v^n, mu^n)`) seeds the iterative solver.
pub fn solve_ch(
    sys: &ChSystem,
    opts: &SolverOptions,
    guess: Option<(&Field, &Field)>,
) -> Result<(Field, Field, SolveReport)> {
    let n = sys.grid.len();
    let (x, report) = match opts.method {
        SolverMethod::Gmres => {
            let x0 = guess.map(|(v, mu)| {
                let mut x0 = v.values().to_vec();
                x0.extend_from_slice(mu.values());
                x0
            });
            let (x, report) = match opts.preconditioner {
                PrecondKind::Jacobi => linsolve::gmres(&sys.matrix, &sys.rhs, &opts.gmres(), x0.as_deref())?,
                PrecondKind::Ilu0 => {
                    let m = Ilu0::factor(&sys.matrix, &interleaved_order(n))?;
                    linsolve::gmres_with(&sys.matrix, &sys.rhs, &opts.gmres(), x0.as_deref(), &m)?
                }
            };
            if !report.converged {
                return Err(Error::Solver {
                    iterations: report.iterations,
                    residual: report.residual,
                });
            }
            (x, report)
        }
        SolverMethod::Direct => {
            let lu = BandedLu::factor(&sys.matrix, &banded_order(&sys.grid))?;
            let x = lu.solve(&sys.rhs)?;
            let ax = sys.matrix.matvec(&x)?;
            let rn: f64 = sys
                .rhs
                .iter()
                .zip(&ax)
                .map(|(b, a)| (b - a).powi(2))
                .sum::<f64>()
                .sqrt();
            let bn: f64 = sys.rhs.iter().map(|b| b * b).sum::<f64>().sqrt();
            let residual = if bn > 0.0 { rn / bn } else { rn };
            (
                x,
                SolveReport {
                    iterations: 1,
                    residual,
                    converged: true,
                    history: Vec::new(),
                },
            )
        }
    };
    let mu = Field::new(sys.grid, x[n..].to_vec())?;
    let mut x = x;
    x.truncate(n);
    Ok((Field::new(sys.grid, x)?, mu, report))
}

/// Global mass-correction factor and the corrected field `cbar = lambda T(vbar)`.
pub fn lambda_correct(vbar: &Field, cn: &Field, rho_n: &Field, dt: f64, params: &PhysParams) -> Result<(f64, Field)> {
    let tr = params.transform;
    let t_vbar = vbar.map(|v| tr.apply(v));
    let target = cn.zip_map(rho_n, |c, r| c + dt * params.source(r, c));
    let denom = mesh::integrate(&t_vbar);
    if !(denom > 0.0) {
        return Err(Error::Domain {
            what: "integral of T(vbar)",
            value: denom,
            domain: "(0,inf)",
        });
    }
    let lambda = mesh::integrate(&target) / denom;
    Ok((lambda, t_vbar.scale(lambda)))
}

/// The two integrals entering the update of `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RFactors {
    /// `1 + dt/(E+C0) int mu F_c(rho^{n+1}, cbar)`
    pub numerator: f64,
    /// `1 + dt/(E+C0) int b(cbar) |grad mu|^2`
    pub denominator: f64,
}

impl RFactors {
    pub fn ratio(&self) -> f64 {
        self.numerator / self.denominator
    }
}

/// Closed-form update of `r`. Fails with [`Error::SavGuard`] when the source
/// term makes the numerator negative, which the caller treats as "dt too
/// large".
pub fn update_r(
    sav: &SavState,
    cbar: &Field,
    mu: &Field,
    rho_next: &Field,
    energy_bar: f64,
    dt: f64,
    params: &PhysParams,
) -> Result<(f64, RFactors)> {
    let shifted = energy_bar + sav.c0;
    if !(shifted > 0.0) {
        return Err(Error::Domain {
            what: "E + C0",
            value: shifted,
            domain: "(0,inf)",
        });
    }
    let w = dt / shifted;
    let numerator = if params.has_source() {
        let prod = Field::new(
            *mu.grid(),
            (0..mu.len())
                .map(|k| mu[k] * params.source(rho_next[k], cbar[k]))
                .collect(),
        )?;
        1.0 + w * mesh::integrate(&prod)
    } else {
        1.0
    };
    if numerator < 0.0 {
        return Err(Error::SavGuard { factor: numerator });
    }
    let mob = cbar.try_map(|c| params.mobility(c))?;
    let diss = mob.zip_map(&mesh::grad_norm_sq(mu)?, |b, g| b * g);
    let denominator = 1.0 + w * mesh::integrate(&diss);
    let f = RFactors { numerator, denominator };
    Ok((sav.r * f.ratio(), f))
}

/// Result of the final rescaling.
#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled {
    pub xi: f64,
    pub sigma: f64,
    pub c: Field,
    pub v: Field,
}

/// `xi = r/(E + C0)`, `sigma = 1 - (1 - xi)^2`; scales `cbar` and `vbar` by `sigma`.
pub fn rescale(r_next: f64, c0: f64, energy_bar: f64, cbar: &Field, vbar: &Field) -> Result<Rescaled> {
    let xi = r_next / (energy_bar + c0);
    if !(xi > 0.0 && xi < 2.0) {
        return Err(Error::Xi { xi });
    }
    let sigma = 1.0 - (1.0 - xi) * (1.0 - xi);
    Ok(Rescaled {
        xi,
        sigma,
        c: cbar.scale(sigma),
        v: vbar.scale(sigma),
    })
}

/// Continuous-form chemical potential `-gamma/rho lap(c) + dpsi0/dc`, used
/// for the initial state.
pub fn chemical_potential(rho: &Field, c: &Field, params: &PhysParams) -> Result<Field> {
    let lap = mesh::laplacian(c)?;
    let vals = (0..c.len())
        .map(|k| Ok(-params.gamma / rho[k] * lap[k] + params.dpsi0_dc(rho[k], c[k])?))
        .collect::<Result<Vec<_>>>()?;
    Field::new(*c.grid(), vals)
}

/// Helper for callers that need the velocity fields of a momentum vector.
pub fn velocities(rho: &Field, momentum: &[Field]) -> Vec<Field> {
    momentum.iter().map(|m| m.zip_map(rho, |m, r| m / r)).collect()
}
