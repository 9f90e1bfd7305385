//! Relaxation scheme for the compressible momentum balance.
//!
//! The conservative variables `U = (rho, rho u[, rho v])` are paired with
//! auxiliary fluxes `V` (x) and `W` (y) that relax toward the physical
//! fluxes `F(U)`, `K(U)` with time constant `eta`. The relaxed system is
//! linear with characteristic speeds `+-sqrt(a)`, so the transport step is
//! a first-order upwind update; friction is applied implicitly afterwards.

use crate::error::{Error, Result};
use crate::mesh::{self, Axis, Field, Grid};
use crate::physics::PhysParams;

/// Conservative variables and relaxation fluxes. Components are ordered
/// `rho, m_x[, m_y]`; `w` exists only in 2D.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicState {
    pub u: Vec<Field>,
    pub v: Vec<Field>,
    pub w: Option<Vec<Field>>,
}

impl HyperbolicState {
    pub fn grid(&self) -> &Grid {
        self.u[0].grid()
    }

    pub fn rho(&self) -> &Field {
        &self.u[0]
    }

    pub fn momentum(&self, axis: Axis) -> &Field {
        &self.u[1 + axis.index()]
    }

    pub fn velocity(&self, axis: Axis) -> Field {
        self.momentum(axis).zip_map(self.rho(), |m, r| m / r)
    }

    /// Builds the state at flux equilibrium, `V = F(U)` and `W = K(U)`.
    pub fn at_equilibrium(rho: Field, momentum: Vec<Field>, c: &Field, params: &PhysParams) -> Result<Self> {
        let grid = *rho.grid();
        if momentum.len() != grid.dim() {
            return Err(Error::Dimension(format!(
                "{} momentum components on a {}D grid",
                momentum.len(),
                grid.dim()
            )));
        }
        check_positive(&rho)?;
        let mut u = vec![rho];
        u.extend(momentum);
        let v = flux_f(&u, c, params)?;
        let w = if grid.dim() == 2 {
            Some(flux_k(&u, c, params)?)
        } else {
            None
        };
        Ok(Self { u, v, w })
    }
}

fn check_positive(rho: &Field) -> Result<()> {
    match rho.values().iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
        Some((cell, &value)) => Err(Error::Positivity { cell, value }),
        None => Ok(()),
    }
}

/// Relaxation constants `a` (x direction) and `b` (y direction, 2D only).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubcharConstants {
    pub a: f64,
    pub b: Option<f64>,
}

impl SubcharConstants {
    /// `dt (sqrt(a)/dx + sqrt(b)/dy)`; must not exceed one.
    pub fn cfl_number(&self, dt: f64, grid: &Grid) -> f64 {
        let mut n = dt * self.a.sqrt() / grid.dx();
        if let Some(b) = self.b {
            n += dt * b.sqrt() / grid.dy();
        }
        n
    }

    /// Largest stable time step.
    pub fn max_dt(&self, grid: &Grid) -> f64 {
        1.0 / self.cfl_number(1.0, grid)
    }
}

/// Physical x-flux `F(U)`.
///
/// In 1D: `(rho u, rho u^2 + p - nu u_x + gamma/2 c_x^2)`. In 2D the
/// momentum rows carry the full viscous and capillary stresses.
pub fn flux_f(u: &[Field], c: &Field, params: &PhysParams) -> Result<Vec<Field>> {
    let grid = *c.grid();
    let rho = &u[0];
    let ux = u[1].zip_map(rho, |m, r| m / r);
    let cx = mesh::central_gradient(c, Axis::X)?;
    let dux_dx = mesh::central_gradient(&ux, Axis::X)?;
    let n = grid.len();
    let mut mass = vec![0.0; n];
    let mut mom_x = vec![0.0; n];
    if grid.dim() == 1 {
        for k in 0..n {
            let p = params.pressure(rho[k], c[k])?;
            let nu = params.viscosity(c[k]);
            mass[k] = u[1][k];
            mom_x[k] = u[1][k] * ux[k] + p - nu * dux_dx[k] + 0.5 * params.gamma * cx[k] * cx[k];
        }
        return Ok(vec![Field::new(grid, mass)?, Field::new(grid, mom_x)?]);
    }
    let uy = u[2].zip_map(rho, |m, r| m / r);
    let cy = mesh::central_gradient(c, Axis::Y)?;
    let dux_dy = mesh::central_gradient(&ux, Axis::Y)?;
    let duy_dx = mesh::central_gradient(&uy, Axis::X)?;
    let duy_dy = mesh::central_gradient(&uy, Axis::Y)?;
    let mut mom_y = vec![0.0; n];
    for k in 0..n {
        let p = params.pressure(rho[k], c[k])?;
        let nu = params.viscosity(c[k]);
        let div = dux_dx[k] + duy_dy[k];
        mass[k] = u[1][k];
        mom_x[k] = u[1][k] * ux[k] + p - 2.0 * nu * dux_dx[k]
            + (2.0 / 3.0) * nu * div
            + 0.5 * params.gamma * (cx[k] * cx[k] - cy[k] * cy[k]);
        mom_y[k] = u[1][k] * uy[k] - nu * (dux_dy[k] + duy_dx[k]) + params.gamma * cx[k] * cy[k];
    }
    Ok(vec![
        Field::new(grid, mass)?,
        Field::new(grid, mom_x)?,
        Field::new(grid, mom_y)?,
    ])
}

/// Physical y-flux `K(U)` (2D only), the mirror image of [`flux_f`].
pub fn flux_k(u: &[Field], c: &Field, params: &PhysParams) -> Result<Vec<Field>> {
    let grid = *c.grid();
    grid.check_axis(Axis::Y)?;
    let rho = &u[0];
    let ux = u[1].zip_map(rho, |m, r| m / r);
    let uy = u[2].zip_map(rho, |m, r| m / r);
    let cx = mesh::central_gradient(c, Axis::X)?;
    let cy = mesh::central_gradient(c, Axis::Y)?;
    let dux_dx = mesh::central_gradient(&ux, Axis::X)?;
    let dux_dy = mesh::central_gradient(&ux, Axis::Y)?;
    let duy_dx = mesh::central_gradient(&uy, Axis::X)?;
    let duy_dy = mesh::central_gradient(&uy, Axis::Y)?;
    let n = grid.len();
    let (mut mass, mut mom_x, mut mom_y) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for k in 0..n {
        let p = params.pressure(rho[k], c[k])?;
        let nu = params.viscosity(c[k]);
        let div = duy_dy[k] + dux_dx[k];
        mass[k] = u[2][k];
        mom_x[k] = u[2][k] * ux[k] - nu * (duy_dx[k] + dux_dy[k]) + params.gamma * cy[k] * cx[k];
        mom_y[k] = u[2][k] * uy[k] + p - 2.0 * nu * duy_dy[k]
            + (2.0 / 3.0) * nu * div
            + 0.5 * params.gamma * (cy[k] * cy[k] - cx[k] * cx[k]);
    }
    Ok(vec![
        Field::new(grid, mass)?,
        Field::new(grid, mom_x)?,
        Field::new(grid, mom_y)?,
    ])
}

/// Grid maxima of `(u -+ sqrt(dp/drho))^2` (and `u^2` in 2D) per direction.
pub fn subchar_constants(u: &[Field], c: &Field, params: &PhysParams) -> Result<SubcharConstants> {
    let grid = *c.grid();
    let rho = &u[0];
    let mut a = 0.0f64;
    let mut b = 0.0f64;
    for k in 0..grid.len() {
        let dp = params.dpressure_drho(rho[k], c[k])?;
        if dp < 0.0 {
            return Err(Error::Domain {
                what: "dp/drho",
                value: dp,
                domain: "[0,inf)",
            });
        }
        let s = dp.sqrt();
        let ux = u[1][k] / rho[k];
        a = a.max((ux + s).powi(2)).max((ux - s).powi(2));
        if grid.dim() == 2 {
            a = a.max(ux * ux);
            let uy = u[2][k] / rho[k];
            b = b.max((uy + s).powi(2)).max(uy * uy).max((uy - s).powi(2));
        }
    }
    Ok(SubcharConstants {
        a,
        b: (grid.dim() == 2).then_some(b),
    })
}

/// Implicit relaxation `V* = Vn - dt/eta (V* - F)`, solved in closed form.
pub fn relax_star(vn: &Field, f: &Field, dt: f64, eta: f64) -> Field {
    let r = dt / eta;
    let denom = 1.0 + r;
    vn.zip_map(f, |v, fl| (v + r * fl) / denom)
}

/// Upwind contribution of one direction to the update of `target`:
/// `-dt/(2h) (flux[k+1] - flux[k-1]) * coupling + dt/(2h) sqrt(s) d2(target)`.
fn directional_increment(
    target: &Field,
    flux: &Field,
    coupling: f64,
    speed2: f64,
    dt: f64,
    axis: Axis,
) -> Result<Vec<f64>> {
    let grid = *target.grid();
    let lam = dt / (2.0 * grid.spacing(axis));
    let sq = speed2.sqrt();
    let d2 = mesh::second_difference(target, axis)?;
    Ok((0..grid.len())
        .map(|k| {
            let diff = flux[grid.neighbor(k, axis, 1)] - flux[grid.neighbor(k, axis, -1)];
            -lam * coupling * diff + lam * sq * d2[k]
        })
        .collect())
}

/// One transport step of the relaxed system from `(U*, V*[, W*])`, followed
/// by the implicit friction update of the momentum rows.
///
/// `state.u` is `U* = Un`; `vstar`/`wstar` are the relaxed fluxes. Friction
/// `kappa(rho^{n+1}, c^n)` is applied as `m <- m / (1 + dt kappa / rho)`.
pub fn fv_update(
    state: &HyperbolicState,
    vstar: &[Field],
    wstar: Option<&[Field]>,
    consts: SubcharConstants,
    dt: f64,
    c: &Field,
    params: &PhysParams,
) -> Result<HyperbolicState> {
    let grid = *state.grid();
    let cfl = consts.cfl_number(dt, &grid);
    if cfl > 1.0 + 1e-12 {
        return Err(Error::Cfl { number: cfl });
    }
    let ncomp = state.u.len();
    let mut u_new = Vec::with_capacity(ncomp);
    let mut v_new = Vec::with_capacity(ncomp);
    let mut w_new = Vec::with_capacity(ncomp);
    for comp in 0..ncomp {
        let ustar = &state.u[comp];
        let inc_x = directional_increment(ustar, &vstar[comp], 1.0, consts.a, dt, Axis::X)?;
        let vx = directional_increment(&vstar[comp], ustar, consts.a, consts.a, dt, Axis::X)?;
        let mut un = ustar.values().to_vec();
        match (wstar, consts.b) {
            (Some(ws), Some(b)) => {
                let inc_y = directional_increment(ustar, &ws[comp], 1.0, b, dt, Axis::Y)?;
                let wy = directional_increment(&ws[comp], ustar, b, b, dt, Axis::Y)?;
                for k in 0..un.len() {
                    un[k] += inc_x[k] + inc_y[k];
                }
                let w: Vec<f64> = ws[comp].values().iter().zip(&wy).map(|(w, d)| w + d).collect();
                w_new.push(Field::new(grid, w)?);
            }
            (None, None) => {
                for k in 0..un.len() {
                    un[k] += inc_x[k];
                }
            }
            _ => {
                return Err(Error::Dimension(
                    "y flux and y relaxation constant must both be present in 2D".into(),
                ))
            }
        }
        let v: Vec<f64> = vstar[comp].values().iter().zip(&vx).map(|(v, d)| v + d).collect();
        u_new.push(Field::new(grid, un)?);
        v_new.push(Field::new(grid, v)?);
    }

    check_positive(&u_new[0])?;
    if params.kappa1 != 0.0 || params.kappa2 != 0.0 {
        let rho = u_new[0].clone();
        for m in u_new.iter_mut().skip(1) {
            let vals = m.values_mut();
            for k in 0..vals.len() {
                let kappa = params.friction(rho[k], c[k]);
                vals[k] /= 1.0 + dt * kappa / rho[k];
            }
        }
    }

    Ok(HyperbolicState {
        u: u_new,
        v: v_new,
        w: if wstar.is_some() { Some(w_new) } else { None },
    })
}

/// `sqrt(sum over components of <f, f>)`.
pub fn vector_norm(fields: &[Field]) -> f64 {
    fields.iter().map(|f| mesh::inner(f, f)).sum::<f64>().sqrt()
}
