//! Uniform periodic cell-centred grids and the finite-volume stencils built
//! on them.
//!
//! Cells are indexed lexicographically, `k = i * nx + j` with `j` along x and
//! `i` along y; cell centres sit at `((j + 1/2) dx, (i + 1/2) dy)`. Every
//! stencil wraps periodically.

use crate::error::{Error, Result};

/// Coordinate direction of a stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    dx: f64,
    dy: f64,
}

impl Grid {
    pub fn new_1d(nx: usize, lx: f64) -> Result<Self> {
        Self::build(1, nx, 1, lx, 1.0)
    }

    pub fn new_2d(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        Self::build(2, nx, ny, lx, ly)
    }

    fn build(dim: usize, nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Grid(format!("cell counts must be positive (nx={nx}, ny={ny})")));
        }
        if !(lx > 0.0 && lx.is_finite() && ly > 0.0 && ly.is_finite()) {
            return Err(Error::Grid(format!(
                "domain lengths must be positive (lx={lx}, ly={ly})"
            )));
        }
        Ok(Self {
            dim,
            nx,
            ny,
            lx,
            ly,
            dx: lx / nx as f64,
            dy: ly / ny as f64,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume of one cell (`dx` in 1D, `dx*dy` in 2D).
    pub fn cell_volume(&self) -> f64 {
        if self.dim == 1 {
            self.dx
        } else {
            self.dx * self.dy
        }
    }

    pub fn spacing(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.dx,
            Axis::Y => self.dy,
        }
    }

    pub fn cells_along(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.nx,
            Axis::Y => self.ny,
        }
    }

    /// The axes this grid actually has.
    pub fn axes(&self) -> &'static [Axis] {
        if self.dim == 1 {
            &[Axis::X]
        } else {
            &[Axis::X, Axis::Y]
        }
    }

    pub fn check_axis(&self, axis: Axis) -> Result<()> {
        if axis.index() >= self.dim {
            return Err(Error::Axis {
                axis: axis.index(),
                dim: self.dim,
            });
        }
        Ok(())
    }

    #[inline]
    pub fn index(&self, j: usize, i: usize) -> usize {
        i * self.nx + j
    }

    /// (j, i) of a lexicographic index.
    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    /// Periodic neighbour of cell `k` along `axis`: `offset` is +1 or -1.
    #[inline]
    pub fn neighbor(&self, k: usize, axis: Axis, offset: isize) -> usize {
        let (j, i) = self.coords(k);
        match axis {
            Axis::X => {
                let jj = (j as isize + offset).rem_euclid(self.nx as isize) as usize;
                self.index(jj, i)
            }
            Axis::Y => {
                let ii = (i as isize + offset).rem_euclid(self.ny as isize) as usize;
                self.index(j, ii)
            }
        }
    }

    pub fn x_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dx
    }

    pub fn y_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dy
    }

    /// Cell centre of lexicographic index `k` (`y` is 0.5*dy in 1D).
    pub fn center(&self, k: usize) -> (f64, f64) {
        let (j, i) = self.coords(k);
        (self.x_center(j), self.y_center(i))
    }
}

/// One scalar per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Field sampled at cell centres.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let (x, y) = grid.center(k);
                f(x, y)
            })
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn try_map<E>(&self, f: impl Fn(f64) -> std::result::Result<f64, E>) -> std::result::Result<Field, E> {
        let values = self
            .values
            .iter()
            .map(|&v| f(v))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Field {
            grid: self.grid,
            values,
        })
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.len(), other.len());
        Field {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map(|v| s * v)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn same_grid(&self, other: &Field) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::Shape {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for Field {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.values[k]
    }
}

fn check_stencil(grid: &Grid, axis: Axis) -> Result<()> {
    grid.check_axis(axis)?;
    let n = grid.cells_along(axis);
    if n < 3 {
        return Err(Error::Grid(format!(
            "stencil along axis {} needs at least 3 cells, grid has {n}",
            axis.index()
        )));
    }
    Ok(())
}

/// `(f[k+1] - f[k-1]) / (2 h)` along `axis`.
pub fn central_gradient(f: &Field, axis: Axis) -> Result<Field> {
    let grid = f.grid;
    check_stencil(&grid, axis)?;
    let inv = 1.0 / (2.0 * grid.spacing(axis));
    let values = (0..grid.len())
        .map(|k| (f.values[grid.neighbor(k, axis, 1)] - f.values[grid.neighbor(k, axis, -1)]) * inv)
        .collect();
    Ok(Field { grid, values })
}

/// Undivided second difference `f[k+1] - 2 f[k] + f[k-1]`.
pub fn second_difference(f: &Field, axis: Axis) -> Result<Field> {
    let grid = f.grid;
    check_stencil(&grid, axis)?;
    let values = (0..grid.len())
        .map(|k| f.values[grid.neighbor(k, axis, 1)] - 2.0 * f.values[k] + f.values[grid.neighbor(k, axis, -1)])
        .collect();
    Ok(Field { grid, values })
}

/// Five-point (three-point in 1D) Laplacian.
pub fn laplacian(f: &Field) -> Result<Field> {
    let grid = f.grid;
    let mut out = vec![0.0; grid.len()];
    for &axis in grid.axes() {
        let d2 = second_difference(f, axis)?;
        let h2 = grid.spacing(axis).powi(2);
        for (o, v) in out.iter_mut().zip(d2.values) {
            *o += v / h2;
        }
    }
    Ok(Field { grid, values: out })
}

/// Interface coefficient between two cells.
#[inline]
pub fn face_mean(a: f64, b: f64) -> f64 {
    0.5 * (a + b)
}

/// Conservative flux-form `div(b grad mu)` with arithmetic-mean face
/// coefficients.
pub fn div_coef_grad(b: &Field, mu: &Field) -> Result<Field> {
    b.same_grid(mu)?;
    if let Some((cell, &value)) = b.values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeCoefficient { cell, value });
    }
    let grid = mu.grid;
    let mut out = vec![0.0; grid.len()];
    for &axis in grid.axes() {
        check_stencil(&grid, axis)?;
        let h2 = grid.spacing(axis).powi(2);
        for (k, o) in out.iter_mut().enumerate() {
            let kp = grid.neighbor(k, axis, 1);
            let km = grid.neighbor(k, axis, -1);
            let flux_p = face_mean(b.values[k], b.values[kp]) * (mu.values[kp] - mu.values[k]);
            let flux_m = face_mean(b.values[km], b.values[k]) * (mu.values[k] - mu.values[km]);
            *o += (flux_p - flux_m) / h2;
        }
    }
    Ok(Field { grid, values: out })
}

/// Midpoint quadrature over the domain.
pub fn integrate(f: &Field) -> f64 {
    f.grid.cell_volume() * f.values.iter().sum::<f64>()
}

/// Discrete inner product `<u, v> = vol * sum u_k v_k`.
pub fn inner(u: &Field, v: &Field) -> f64 {
    u.grid.cell_volume() * u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum::<f64>()
}

/// Squared magnitude of the central gradient, summed over axes.
pub fn grad_norm_sq(f: &Field) -> Result<Field> {
    let grid = f.grid;
    let mut out = vec![0.0; grid.len()];
    for &axis in grid.axes() {
        let g = central_gradient(f, axis)?;
        for (o, v) in out.iter_mut().zip(g.values) {
            *o += v * v;
        }
    }
    Ok(Field { grid, values: out })
}
