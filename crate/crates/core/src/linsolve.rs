//! Compressed-row sparse matrices, restarted GMRES with left
//! preconditioning (Jacobi or ILU(0)), and LU direct solvers used as
//! fallbacks and test oracles.

use crate::error::{Error, Result};

/// Square matrix in compressed sparse row form. Column indices inside a row
/// are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` entries; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|(r, c, _)| *r >= n || *c >= n) {
            return Err(Error::Dimension(format!("entry ({r},{c}) outside a {n}x{n} matrix")));
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            col_idx.push(c);
            values.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds row by row; each row's entries are sorted by column and
    /// duplicates summed in the order given.
    pub fn from_rows(n: usize, rows: impl IntoIterator<Item = Vec<(usize, f64)>>) -> Result<Self> {
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        for (r, mut row) in rows.into_iter().enumerate() {
            if r >= n {
                return Err(Error::Dimension(format!("more than {n} rows")));
            }
            row.sort_by_key(|&(c, _)| c);
            let start = col_idx.len();
            for (c, v) in row {
                if c >= n {
                    return Err(Error::Dimension(format!("entry ({r},{c}) outside a {n}x{n} matrix")));
                }
                if col_idx.len() > start && col_idx.last() == Some(&c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        if row_ptr.len() != n + 1 {
            return Err(Error::Dimension(format!("{} rows for n = {n}", row_ptr.len() - 1)));
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(col, value)` pairs of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::Dimension(format!(
                "vector of length {} against a {}x{} matrix",
                x.len(),
                self.n,
                self.n
            )));
        }
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (yr, w) in y.iter_mut().zip(self.row_ptr.windows(2)) {
            let (cols, vals) = (&self.col_idx[w[0]..w[1]], &self.values[w[0]..w[1]]);
            *yr = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                d[(r, c)] = v;
            }
        }
        d
    }

    /// Largest `|row - col|` over stored entries once rows and columns are
    /// renumbered by `perm` (`perm[old] = new`).
    pub fn bandwidth(&self, perm: &[usize]) -> usize {
        let mut bw = 0;
        for r in 0..self.n {
            for (c, _) in self.row(r) {
                bw = bw.max(perm[r].abs_diff(perm[c]));
            }
        }
        bw
    }
}

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!(
                    "row {r} has {} entries, expected {n}",
                    row.len()
                )));
            }
            m.data[r * n..(r + 1) * n].copy_from_slice(row);
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                self.data[r * self.n..(r + 1) * self.n]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.n + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.n + c]
    }
}

pub const DENSE_LIMIT: usize = 4096;

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.n;
    if b.len() != n {
        return Err(Error::Dimension(format!("rhs of length {} for n = {n}", b.len())));
    }
    if n > DENSE_LIMIT {
        return Err(Error::Dimension(format!(
            "dense solve limited to n <= {DENSE_LIMIT}, got {n}"
        )));
    }
    let mut m = a.data.clone();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    for col in 0..n {
        let (piv, pmax) = (col..n)
            .map(|r| (r, m[r * n + col].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax <= f64::EPSILON * scale * n as f64 || pmax == 0.0 {
            return Err(Error::Singular {
                column: col,
                pivot: pmax,
            });
        }
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
            }
            x.swap(col, piv);
        }
        let d = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            m[r * n + col] = 0.0;
            for c in col + 1..n {
                m[r * n + c] -= f * m[col * n + c];
            }
            x[r] -= f * x[col];
        }
    }
    for r in (0..n).rev() {
        let mut s = x[r];
        for c in r + 1..n {
            s -= m[r * n + c] * x[c];
        }
        x[r] = s / m[r * n + r];
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    pub tol: f64,
    pub restart: usize,
    pub maxiter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            restart: 50,
            maxiter: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `||b - A x|| / ||b||` of the returned iterate.
    pub residual: f64,
    pub converged: bool,
    /// Preconditioned residual estimate after every inner iteration.
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn true_residual(a: &SparseMatrix, b: &[f64], x: &[f64], work: &mut [f64]) -> f64 {
    a.matvec_into(x, work);
    b.iter()
        .zip(work.iter())
        .map(|(bi, ai)| (bi - ai).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Left preconditioner: `out = M^-1 r`.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], out: &mut [f64]);
}

/// `M = diag(A)`; zero or non-finite diagonal entries are replaced by 1.
#[derive(Debug, Clone)]
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &SparseMatrix) -> Self {
        Self {
            inv_diag: a
                .diagonal()
                .into_iter()
                .map(|d| if d != 0.0 && d.is_finite() { 1.0 / d } else { 1.0 })
                .collect(),
        }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], out: &mut [f64]) {
        for ((o, ri), di) in out.iter_mut().zip(r).zip(&self.inv_diag) {
            *o = ri * di;
        }
    }
}

/// Incomplete LU with the sparsity pattern of `A`, computed after the
/// symmetric renumbering `perm[old] = new`.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    perm: Vec<usize>,
    /// unit lower factor below the diagonal, upper factor on and above it
    lu: SparseMatrix,
    diag_pos: Vec<usize>,
    scratch: std::cell::RefCell<Vec<f64>>,
}

impl Ilu0 {
    pub fn factor(a: &SparseMatrix, perm: &[usize]) -> Result<Self> {
        let n = a.n;
        check_perm(perm, n)?;
        let mut inv = vec![0; n];
        for (old, &new) in perm.iter().enumerate() {
            inv[new] = old;
        }
        let mut lu = SparseMatrix::from_rows(
            n,
            inv.iter()
                .map(|&old| a.row(old).map(|(c, v)| (perm[c], v)).collect::<Vec<_>>()),
        )?;

        let mut diag_pos = vec![usize::MAX; n];
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for p in start..end {
                pos[lu.col_idx[p]] = p;
            }
            for p in start..end {
                let k = lu.col_idx[p];
                if k >= i {
                    break;
                }
                let piv = lu.values[diag_pos[k]];
                let lik = lu.values[p] / piv;
                lu.values[p] = lik;
                for q in diag_pos[k] + 1..lu.row_ptr[k + 1] {
                    let j = lu.col_idx[q];
                    if pos[j] != usize::MAX {
                        lu.values[pos[j]] -= lik * lu.values[q];
                    }
                }
            }
            let d = pos[i];
            let piv = if d == usize::MAX { 0.0 } else { lu.values[d] };
            if piv == 0.0 || !piv.is_finite() {
                return Err(Error::Singular { column: i, pivot: piv });
            }
            diag_pos[i] = d;
            for p in start..end {
                pos[lu.col_idx[p]] = usize::MAX;
            }
        }
        Ok(Self {
            perm: perm.to_vec(),
            lu,
            diag_pos,
            scratch: std::cell::RefCell::new(vec![0.0; n]),
        })
    }
}

impl Preconditioner for Ilu0 {
    fn apply(&self, r: &[f64], out: &mut [f64]) {
        let lu = &self.lu;
        let mut y = self.scratch.borrow_mut();
        for (old, &new) in self.perm.iter().enumerate() {
            y[new] = r[old];
        }
        for i in 0..lu.n {
            let mut s = y[i];
            for p in lu.row_ptr[i]..self.diag_pos[i] {
                s -= lu.values[p] * y[lu.col_idx[p]];
            }
            y[i] = s;
        }
        for i in (0..lu.n).rev() {
            let d = self.diag_pos[i];
            let mut s = y[i];
            for p in d + 1..lu.row_ptr[i + 1] {
                s -= lu.values[p] * y[lu.col_idx[p]];
            }
            y[i] = s / lu.values[d];
        }
        for (old, &new) in self.perm.iter().enumerate() {
            out[old] = y[new];
        }
    }
}

fn check_perm(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::Dimension(format!(
            "permutation of length {} for n = {n}",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::Dimension("not a permutation".into()));
        }
    }
    Ok(())
}

/// Restarted GMRES on `D^-1 A x = D^-1 b`, `D = diag(A)`.
pub fn gmres(a: &SparseMatrix, b: &[f64], opts: &GmresOptions, x0: Option<&[f64]>) -> Result<(Vec<f64>, SolveReport)> {
    gmres_with(a, b, opts, x0, &Jacobi::new(a))
}

/// Restarted GMRES on `M^-1 A x = M^-1 b`.
///
/// Convergence is judged on the unpreconditioned residual; a non-converged
/// solve still returns the best iterate together with its report.
pub fn gmres_with(
    a: &SparseMatrix,
    b: &[f64],
    opts: &GmresOptions,
    x0: Option<&[f64]>,
    precond: &impl Preconditioner,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.n;
    if b.len() != n {
        return Err(Error::Dimension(format!("rhs of length {} for n = {n}", b.len())));
    }
    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(x0) => {
            return Err(Error::Dimension(format!(
                "initial guess of length {} for n = {n}",
                x0.len()
            )));
        }
        None => vec![0.0; n],
    };

    let bnorm = norm(b);
    let mut report = SolveReport {
        iterations: 0,
        residual: 0.0,
        converged: true,
        history: Vec::new(),
    };
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], report));
    }

    let m = opts.restart.max(1);
    let mut work = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut h = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut inner_tol = opts.tol;
    precond.apply(b, &mut w);
    let pb_norm = norm(&w);
    // work holds A x at the top of every cycle
    let mut res = true_residual(a, b, &x, &mut work) / bnorm;

    loop {
        report.residual = res;
        if res <= opts.tol {
            report.converged = true;
            return Ok((x, report));
        }
        if report.iterations >= opts.maxiter {
            report.converged = false;
            return Ok((x, report));
        }

        // preconditioned residual
        for (wi, (bi, ai)) in w.iter_mut().zip(b.iter().zip(&work)) {
            *wi = bi - ai;
        }
        let mut r = vec![0.0; n];
        precond.apply(&w, &mut r);
        let beta = norm(&r);
        if beta == 0.0 {
            report.converged = res <= opts.tol;
            return Ok((x, report));
        }
        r.iter_mut().for_each(|v| *v /= beta);
        basis.clear();
        basis.push(r);
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;

        let mut k_done = 0;
        for k in 0..m {
            report.iterations += 1;
            a.matvec_into(&basis[k], &mut work);
            precond.apply(&work, &mut w);
            // modified Gram-Schmidt
            for j in 0..=k {
                let hj = dot(&w, &basis[j]);
                h[j][k] = hj;
                for (wi, vi) in w.iter_mut().zip(&basis[j]) {
                    *wi -= hj * vi;
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;

            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let (c, s) = givens(h[k][k], h[k + 1][k]);
            cs[k] = c;
            sn[k] = s;
            h[k][k] = c * h[k][k] + s * h[k + 1][k];
            h[k + 1][k] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;

            k_done = k + 1;
            let est = g[k + 1].abs() / pb_norm;
            report.history.push(est);

            let breakdown = hn <= 1e-14 * beta;
            if est <= inner_tol || breakdown || report.iterations >= opts.maxiter {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }

        let mut y = vec![0.0; k_done];
        for i in (0..k_done).rev() {
            let mut s = g[i];
            for j in i + 1..k_done {
                s -= h[i][j] * y[j];
            }
            y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[j]) {
                *xi += yj * vi;
            }
        }

        // The preconditioned estimate can undershoot the true residual when
        // rows are badly scaled; tighten the inner target for the next cycle.
        res = true_residual(a, b, &x, &mut work) / bnorm;
        if res > opts.tol {
            inner_tol = (inner_tol * (opts.tol / res).max(1e-3)).max(1e-16);
        }
    }
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

/// LU factorisation of a banded matrix with partial pivoting, after a
/// symmetric renumbering of unknowns (`perm[old] = new`). Periodic 1D
/// couplings become banded under [`zigzag_order`].
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// rows of width `2*kl + ku + 1`, LAPACK `gbtrf` layout
    ab: Vec<f64>,
    ldab: usize,
    pivots: Vec<usize>,
    perm: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &SparseMatrix, perm: &[usize]) -> Result<Self> {
        let n = a.n;
        if perm.len() != n {
            return Err(Error::Dimension(format!(
                "permutation of length {} for n = {n}",
                perm.len()
            )));
        }
        let bw = a.bandwidth(perm);
        let (kl, ku) = (bw, bw);
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * n];
        let kv = ku + kl;
        // element (i, j) of the permuted matrix lives at ab[j*ldab + kv + i - j]
        for r in 0..n {
            for (c, v) in a.row(r) {
                let (i, j) = (perm[r], perm[c]);
                ab[j * ldab + kv + i - j] += v;
            }
        }
        let scale = ab.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let mut pivots = vec![0; n];
        for j in 0..n {
            let last = (j + kl).min(n - 1);
            let (mut p, mut pmax) = (j, 0.0);
            for i in j..=last {
                let v = ab[j * ldab + kv + i - j].abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            if pmax <= f64::EPSILON * scale * 1e-3 {
                return Err(Error::Singular { column: j, pivot: pmax });
            }
            pivots[j] = p;
            let ucol_end = (j + kv).min(n - 1);
            if p != j {
                for c in j..=ucol_end {
                    ab.swap(c * ldab + kv + p - c, c * ldab + kv + j - c);
                }
            }
            let d = ab[j * ldab + kv];
            for i in j + 1..=last {
                ab[j * ldab + kv + i - j] /= d;
            }
            for c in j + 1..=ucol_end {
                let ujc = ab[c * ldab + kv + j - c];
                if ujc == 0.0 {
                    continue;
                }
                for i in j + 1..=last {
                    let l = ab[j * ldab + kv + i - j];
                    ab[c * ldab + kv + i - c] -= l * ujc;
                }
            }
        }
        Ok(Self {
            n,
            kl,
            ku,
            ab,
            ldab,
            pivots,
            perm: perm.to_vec(),
        })
    }

    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::Dimension(format!("rhs of length {} for n = {n}", b.len())));
        }
        let kv = self.kl + self.ku;
        let ldab = self.ldab;
        let mut y = vec![0.0; n];
        for (old, &new) in self.perm.iter().enumerate() {
            y[new] = b[old];
        }
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                y.swap(p, j);
            }
            let last = (j + self.kl).min(n - 1);
            for i in j + 1..=last {
                y[i] -= self.ab[j * ldab + kv + i - j] * y[j];
            }
        }
        for j in (0..n).rev() {
            y[j] /= self.ab[j * ldab + kv];
            let first = j.saturating_sub(kv);
            for i in first..j {
                y[i] -= self.ab[j * ldab + kv + i - j] * y[j];
            }
        }
        let mut x = vec![0.0; n];
        for (old, &new) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        Ok(x)
    }
}

/// Renumbering `0, n-1, 1, n-2, ...` of a ring of `n` nodes; neighbours on
/// the ring end up at most two positions apart. Returns `perm[old] = new`.
pub fn zigzag_order(n: usize) -> Vec<usize> {
    let mut perm = vec![0; n];
    for (cell, slot) in perm.iter_mut().enumerate() {
        *slot = if cell < n.div_ceil(2) {
            2 * cell
        } else {
            2 * (n - 1 - cell) + 1
        };
    }
    perm
}
