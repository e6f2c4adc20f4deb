//! Compressed-row sparse matrices, a Jacobi-preconditioned BiCGSTAB solver
//! and block elimination for systems bordered by one scalar unknown.

use crate::error::{Error, Result};

/// Row-compressed matrix. Column indices are sorted within a row and unique.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) outside {nrows}x{ncols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    /// Iterates `(col, value)` over one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "mul_vec: x has wrong length");
        assert_eq!(y.len(), self.nrows, "mul_vec: y has wrong length");
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *out = acc;
        }
    }

    /// Sparse product `self * rhs`.
    pub fn matmul(&self, rhs: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.ncols, rhs.nrows, "matmul: inner dimensions differ");
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![0.0; rhs.ncols];
        let mut mark = vec![usize::MAX; rhs.ncols];
        let mut touched = Vec::new();
        for r in 0..self.nrows {
            touched.clear();
            for (k, a) in self.row(r) {
                for (c, b) in rhs.row(k) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = 0.0;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                indices.push(c);
                values.push(acc[c]);
            }
            indptr.push(indices.len());
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: rhs.ncols,
            indptr,
            indices,
            values,
        }
    }

    /// `alpha * self + beta * other`.
    pub fn linear_combination(&self, alpha: f64, other: &SparseMatrix, beta: f64) -> SparseMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut trip = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.nrows {
            trip.extend(self.row(r).map(|(c, v)| (r, c, alpha * v)));
            trip.extend(other.row(r).map(|(c, v)| (r, c, beta * v)));
        }
        SparseMatrix::from_triplets(self.nrows, self.ncols, trip)
    }

    /// Multiplies column `c` by `scale[c]`.
    pub fn scale_columns(&self, scale: &[f64]) -> SparseMatrix {
        assert_eq!(scale.len(), self.ncols);
        let mut out = self.clone();
        for (v, c) in out.values.iter_mut().zip(&out.indices) {
            *v *= scale[*c];
        }
        out
    }

    pub fn scale(&self, alpha: f64) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut trip = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            trip.extend(self.row(r).map(|(c, v)| (c, r, v)));
        }
        SparseMatrix::from_triplets(self.ncols, self.nrows, trip)
    }

    /// Appends the entries of `self` shifted by `(row0, col0)` to `out`.
    pub fn push_block(&self, row0: usize, col0: usize, out: &mut Vec<(usize, usize, f64)>) {
        for r in 0..self.nrows {
            out.extend(self.row(r).map(|(c, v)| (row0 + r, col0 + c, v)));
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }
}

/// Stopping rule for the iterative solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Relative residual target `||A x - b|| <= tol ||b||`.
    pub tol: f64,
    /// Iteration cap; `None` means `10 * N`.
    pub max_iter: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = rhs`. Non-convergence is reported through the flag, never
/// as non-finite output.
pub fn solve(a: &SparseMatrix, rhs: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, SolveReport)> {
    solve_with_guess(a, rhs, None, opts)
}

pub fn solve_with_guess(
    a: &SparseMatrix,
    rhs: &[f64],
    guess: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(Error::Shape(format!("solve: matrix is {}x{}", a.nrows(), a.ncols())));
    }
    if rhs.len() != n {
        return Err(Error::Shape(format!("solve: rhs has {} entries, matrix {n}", rhs.len())));
    }
    if let Some(g) = guess {
        if g.len() != n {
            return Err(Error::Shape("solve: guess has wrong length".into()));
        }
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("solve: right-hand side".into()));
    }
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let b_norm = norm(rhs);
    if b_norm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveReport {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            },
        ));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d != 0.0 && d.is_finite() { 1.0 / d } else { 1.0 })
        .collect();
    let precond = |v: &[f64], out: &mut [f64]| {
        for ((o, x), d) in out.iter_mut().zip(v).zip(&inv_diag) {
            *o = x * d;
        }
    };

    let mut x = guess.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    let mut r = vec![0.0; n];
    let residual = |x: &[f64], r: &mut [f64]| {
        a.mul_vec_into(x, r);
        for (ri, bi) in r.iter_mut().zip(rhs) {
            *ri = bi - *ri;
        }
    };
    residual(&x, &mut r);
    let target = opts.tol * b_norm;
    let mut iterations = 0;
    let mut restarts = 0;

    'outer: while norm(&r) > target && iterations < max_iter && restarts < 5 {
        let r_hat = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut s = vec![0.0; n];
        let mut t = vec![0.0; n];
        while iterations < max_iter {
            iterations += 1;
            let rho_new = dot(&r_hat, &r);
            if rho_new.abs() < 1e-300 || !rho_new.is_finite() {
                restarts += 1;
                continue 'outer;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            precond(&p, &mut y);
            a.mul_vec_into(&y, &mut v);
            let denom = dot(&r_hat, &v);
            if denom.abs() < 1e-300 || !denom.is_finite() {
                restarts += 1;
                continue 'outer;
            }
            alpha = rho_new / denom;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            if norm(&s) <= target {
                for i in 0..n {
                    x[i] += alpha * y[i];
                }
                break 'outer;
            }
            precond(&s, &mut z);
            a.mul_vec_into(&z, &mut t);
            let tt = dot(&t, &t);
            if tt == 0.0 || !tt.is_finite() {
                restarts += 1;
                continue 'outer;
            }
            omega = dot(&t, &s) / tt;
            for i in 0..n {
                x[i] += alpha * y[i] + omega * z[i];
                r[i] = s[i] - omega * t[i];
            }
            rho = rho_new;
            if norm(&r) <= target {
                break;
            }
            if omega == 0.0 {
                restarts += 1;
                continue 'outer;
            }
        }
        // refresh the recurrence residual against drift
        residual(&x, &mut r);
    }

    if x.iter().any(|v| !v.is_finite()) {
        x.iter_mut().for_each(|v| *v = 0.0);
    }
    residual(&x, &mut r);
    let relative_residual = norm(&r) / b_norm;
    Ok((
        x,
        SolveReport {
            iterations,
            relative_residual,
            converged: relative_residual <= opts.tol,
        },
    ))
}

/// Solution of `[A g; w^T sigma] [x; h] = [rhs; rhs_h]`.
#[derive(Debug, Clone)]
pub struct BorderedSolution {
    pub x: Vec<f64>,
    pub h: f64,
    /// Relative residual of the full bordered system.
    pub relative_residual: f64,
    pub iterations: usize,
}

/// The bordered system in block form.
#[derive(Debug, Clone)]
pub struct BorderedSystem {
    pub a: SparseMatrix,
    pub g: Vec<f64>,
    pub w: Vec<f64>,
    pub sigma: f64,
    pub rhs: Vec<f64>,
    pub rhs_h: f64,
}

impl BorderedSystem {
    /// Residual vector of the full system, scalar row last.
    pub fn residual(&self, x: &[f64], h: f64) -> (Vec<f64>, f64) {
        let mut r = self.a.mul_vec(x);
        for ((ri, gi), bi) in r.iter_mut().zip(&self.g).zip(&self.rhs) {
            *ri = bi - (*ri + gi * h);
        }
        let rh = self.rhs_h - (dot(&self.w, x) + self.sigma * h);
        (r, rh)
    }

    pub fn relative_residual(&self, x: &[f64], h: f64) -> f64 {
        let (r, rh) = self.residual(x, h);
        let num = (dot(&r, &r) + rh * rh).sqrt();
        let den = (dot(&self.rhs, &self.rhs) + self.rhs_h * self.rhs_h).sqrt();
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }

    pub fn solve(&self, guess: Option<&[f64]>, opts: &SolveOptions) -> Result<BorderedSolution> {
        solve_bordered(
            &self.a, &self.g, &self.w, self.sigma, &self.rhs, self.rhs_h, guess, opts,
        )
    }
}

/// Block elimination: `x0 = A^-1 rhs`, `x1 = A^-1 g`,
/// `h = (rhs_h - w.x0)/(sigma - w.x1)`, `x = x0 - h x1`, followed by
/// residual-driven refinement until the full system meets `tol`.
#[allow(clippy::too_many_arguments)]
pub fn solve_bordered(
    a: &SparseMatrix,
    g: &[f64],
    w: &[f64],
    sigma: f64,
    rhs: &[f64],
    rhs_h: f64,
    guess: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<BorderedSolution> {
    let n = a.nrows();
    if g.len() != n || w.len() != n || rhs.len() != n {
        return Err(Error::Shape("solve_bordered: vector lengths differ from matrix".into()));
    }
    let system = BorderedSystem {
        a: a.clone(),
        g: g.to_vec(),
        w: w.to_vec(),
        sigma,
        rhs: rhs.to_vec(),
        rhs_h,
    };
    // inner solves run tighter so the eliminated combination still meets tol
    let inner = SolveOptions {
        tol: opts.tol * 1e-2,
        max_iter: opts.max_iter,
    };
    let mut iterations = 0;
    let (x1, rep1) = solve(a, g, &inner)?;
    iterations += rep1.iterations;
    if !rep1.converged && rep1.relative_residual > opts.tol {
        return Err(Error::Solver {
            context: "bordered solve, border column".into(),
            iterations: rep1.iterations,
            residual: rep1.relative_residual,
        });
    }
    let pivot = sigma - dot(w, &x1);
    let scale = sigma.abs() + w.iter().zip(&x1).map(|(a, b)| (a * b).abs()).sum::<f64>();
    if !(pivot.abs() > 1e-14 * scale) {
        return Err(Error::Pivot { pivot, scale });
    }

    let mut x = vec![0.0; n];
    let mut h = 0.0;
    let mut first = true;
    for _ in 0..4 {
        let (r, rh) = if first {
            (rhs.to_vec(), rhs_h)
        } else {
            system.residual(&x, h)
        };
        let start = if first { guess } else { None };
        let (x0, rep0) = solve_with_guess(a, &r, start, &inner)?;
        iterations += rep0.iterations;
        if !rep0.converged && rep0.relative_residual > opts.tol {
            return Err(Error::Solver {
                context: "bordered solve, main block".into(),
                iterations: rep0.iterations,
                residual: rep0.relative_residual,
            });
        }
        let dh = (rh - dot(w, &x0)) / pivot;
        for i in 0..n {
            x[i] += x0[i] - dh * x1[i];
        }
        h += dh;
        first = false;
        if system.relative_residual(&x, h) <= opts.tol * 1e-2 {
            break;
        }
    }
    let relative_residual = system.relative_residual(&x, h);
    if !(relative_residual <= opts.tol) {
        return Err(Error::Solver {
            context: "bordered solve".into(),
            iterations,
            residual: relative_residual,
        });
    }
    Ok(BorderedSolution {
        x,
        h,
        relative_residual,
        iterations,
    })
}
