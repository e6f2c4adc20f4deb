//! Uniform 2D MAC grid: scalars at cell centers, x-velocity on vertical
//! faces, y-velocity on horizontal faces.
//!
//! Periodic grids keep the full `(nx+1) x ny` / `nx x (ny+1)` face layout;
//! the last column (row) duplicates the first and every operator writes both.

pub mod momentum;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Zero normal velocity, zero normal flux and zero normal density gradient.
    NoFluxNoSlip,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaggeredGrid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub bc: Boundary,
}

impl StaggeredGrid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, bc: Boundary) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::Domain(format!("grid needs at least 2x2 cells, got {nx}x{ny}")));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::Domain(format!("domain lengths must be positive, got {lx} x {ly}")));
        }
        Ok(Self { nx, ny, lx, ly, bc })
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    /// Area of one cell (volume per unit depth).
    pub fn cell_volume(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_xfaces(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn n_yfaces(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    pub fn n_faces(&self) -> usize {
        self.n_xfaces() + self.n_yfaces()
    }

    pub fn cell(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    /// Index of the x-face at the west side of cell `(i, j)`, `i` in `0..=nx`.
    pub fn xface(&self, i: usize, j: usize) -> usize {
        i + (self.nx + 1) * j
    }

    /// Index of the y-face at the south side of cell `(i, j)`, `j` in `0..=ny`.
    pub fn yface(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    /// Position of a y-face in the flattened `[x | y]` face vector.
    pub fn yface_flat(&self, i: usize, j: usize) -> usize {
        self.n_xfaces() + self.yface(i, j)
    }

    pub fn is_periodic(&self) -> bool {
        self.bc == Boundary::Periodic
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy())
    }

    /// Quadrature weights of the face inner product: `hx*hy` on unique faces,
    /// 0 on periodic duplicates and on boundary faces of a walled grid.
    pub fn face_weights(&self) -> FaceField {
        let w = self.cell_volume();
        let mut f = FaceField::zeros(self);
        for j in 0..self.ny {
            for i in 0..=self.nx {
                let interior = i > 0 && i < self.nx;
                let keep = match self.bc {
                    Boundary::Periodic => i < self.nx,
                    Boundary::NoFluxNoSlip => interior,
                };
                if keep {
                    f.x[self.xface(i, j)] = w;
                }
            }
        }
        for j in 0..=self.ny {
            for i in 0..self.nx {
                let interior = j > 0 && j < self.ny;
                let keep = match self.bc {
                    Boundary::Periodic => j < self.ny,
                    Boundary::NoFluxNoSlip => interior,
                };
                if keep {
                    f.y[self.yface(i, j)] = w;
                }
            }
        }
        f
    }

    /// 1 on faces that carry flux, 0 on walled boundary faces.
    pub fn flux_mask(&self) -> FaceField {
        let mut f = FaceField::zeros(self);
        let periodic = self.is_periodic();
        for j in 0..self.ny {
            for i in 0..=self.nx {
                if periodic || (i > 0 && i < self.nx) {
                    f.x[self.xface(i, j)] = 1.0;
                }
            }
        }
        for j in 0..=self.ny {
            for i in 0..self.nx {
                if periodic || (j > 0 && j < self.ny) {
                    f.y[self.yface(i, j)] = 1.0;
                }
            }
        }
        f
    }

    pub(crate) fn check_cell(&self, q: &CellField) -> Result<()> {
        if q.nx != self.nx || q.ny != self.ny || q.data.len() != self.n_cells() {
            return Err(Error::Shape(format!(
                "cell field {}x{} on grid {}x{}",
                q.nx, q.ny, self.nx, self.ny
            )));
        }
        Ok(())
    }

    pub(crate) fn check_face(&self, v: &FaceField) -> Result<()> {
        if v.nx != self.nx || v.ny != self.ny || v.x.len() != self.n_xfaces() || v.y.len() != self.n_yfaces() {
            return Err(Error::Shape(format!(
                "face field {}x{} on grid {}x{}",
                v.nx, v.ny, self.nx, self.ny
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    pub nx: usize,
    pub ny: usize,
    pub data: Vec<f64>,
}

impl CellField {
    pub fn zeros(grid: &StaggeredGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &StaggeredGrid, value: f64) -> Self {
        Self {
            nx: grid.nx,
            ny: grid.ny,
            data: vec![value; grid.n_cells()],
        }
    }

    pub fn from_fn(grid: &StaggeredGrid, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.n_cells());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                data.push(f(i, j));
            }
        }
        Self {
            nx: grid.nx,
            ny: grid.ny,
            data,
        }
    }

    pub fn from_vec(grid: &StaggeredGrid, data: Vec<f64>) -> Result<Self> {
        let f = Self {
            nx: grid.nx,
            ny: grid.ny,
            data,
        };
        grid.check_cell(&f)?;
        Ok(f)
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i + self.nx * j]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            nx: self.nx,
            ny: self.ny,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.data.len(), other.data.len());
        Self {
            nx: self.nx,
            ny: self.ny,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    pub nx: usize,
    pub ny: usize,
    /// Values on x-normal faces, `(nx+1) x ny`.
    pub x: Vec<f64>,
    /// Values on y-normal faces, `nx x (ny+1)`.
    pub y: Vec<f64>,
}

impl FaceField {
    pub fn zeros(grid: &StaggeredGrid) -> Self {
        Self {
            nx: grid.nx,
            ny: grid.ny,
            x: vec![0.0; grid.n_xfaces()],
            y: vec![0.0; grid.n_yfaces()],
        }
    }

    /// Flattened `[x | y]` vector, the layout used by the sparse operators.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.x.len() + self.y.len());
        v.extend_from_slice(&self.x);
        v.extend_from_slice(&self.y);
        v
    }

    pub fn from_vec(grid: &StaggeredGrid, v: &[f64]) -> Result<Self> {
        if v.len() != grid.n_faces() {
            return Err(Error::Shape(format!("face vector has {} entries, grid {}", v.len(), grid.n_faces())));
        }
        Ok(Self {
            nx: grid.nx,
            ny: grid.ny,
            x: v[..grid.n_xfaces()].to_vec(),
            y: v[grid.n_xfaces()..].to_vec(),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            nx: self.nx,
            ny: self.ny,
            x: self.x.iter().map(|&v| f(v)).collect(),
            y: self.y.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.x.len(), other.x.len());
        assert_eq!(self.y.len(), other.y.len());
        Self {
            nx: self.nx,
            ny: self.ny,
            x: self.x.iter().zip(&other.x).map(|(&a, &b)| f(a, b)).collect(),
            y: self.y.iter().zip(&other.y).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        for (a, b) in self.x.iter_mut().zip(&other.x) {
            *a += alpha * b;
        }
        for (a, b) in self.y.iter_mut().zip(&other.y) {
            *a += alpha * b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.x.iter().chain(&self.y).fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Weighted face inner product `sum_f w_f a_f b_f`.
pub fn face_dot(grid: &StaggeredGrid, a: &FaceField, b: &FaceField) -> f64 {
    let w = grid.face_weights();
    let sx: f64 = (0..a.x.len()).map(|k| w.x[k] * a.x[k] * b.x[k]).sum();
    let sy: f64 = (0..a.y.len()).map(|k| w.y[k] * a.y[k] * b.y[k]).sum();
    sx + sy
}

/// Cell inner product `sum_c V a_c b_c`.
pub fn cell_dot(grid: &StaggeredGrid, a: &CellField, b: &CellField) -> f64 {
    grid.cell_volume() * a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum::<f64>()
}

/// `sum_c V q_c`.
pub fn integrate(grid: &StaggeredGrid, q: &CellField) -> f64 {
    grid.cell_volume() * q.sum()
}

/// Neighbour cells `(left, right)` of x-face `(i, j)`; `None` outside a walled domain.
fn xface_cells(grid: &StaggeredGrid, i: usize, j: usize) -> (Option<usize>, Option<usize>) {
    let nx = grid.nx;
    match grid.bc {
        Boundary::Periodic => {
            let l = (i + nx - 1) % nx;
            let r = i % nx;
            (Some(grid.cell(l, j)), Some(grid.cell(r, j)))
        }
        Boundary::NoFluxNoSlip => {
            let l = (i > 0).then(|| grid.cell(i - 1, j));
            let r = (i < nx).then(|| grid.cell(i, j));
            (l, r)
        }
    }
}

fn yface_cells(grid: &StaggeredGrid, i: usize, j: usize) -> (Option<usize>, Option<usize>) {
    let ny = grid.ny;
    match grid.bc {
        Boundary::Periodic => {
            let s = (j + ny - 1) % ny;
            let n = j % ny;
            (Some(grid.cell(i, s)), Some(grid.cell(i, n)))
        }
        Boundary::NoFluxNoSlip => {
            let s = (j > 0).then(|| grid.cell(i, j - 1));
            let n = (j < ny).then(|| grid.cell(i, j));
            (s, n)
        }
    }
}

/// Face gradient of a cell field. Walled boundary faces carry 0.
pub fn grad_cc(q: &CellField, grid: &StaggeredGrid) -> Result<FaceField> {
    grid.check_cell(q)?;
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut g = FaceField::zeros(grid);
    for j in 0..grid.ny {
        for i in 0..=grid.nx {
            if let (Some(l), Some(r)) = xface_cells(grid, i, j) {
                g.x[grid.xface(i, j)] = (q.data[r] - q.data[l]) / hx;
            }
        }
    }
    for j in 0..=grid.ny {
        for i in 0..grid.nx {
            if let (Some(s), Some(n)) = yface_cells(grid, i, j) {
                g.y[grid.yface(i, j)] = (q.data[n] - q.data[s]) / hy;
            }
        }
    }
    Ok(g)
}

/// Cell divergence `(v_E - v_W)/hx + (v_N - v_S)/hy`.
pub fn div_fc(v: &FaceField, grid: &StaggeredGrid) -> Result<CellField> {
    grid.check_face(v)?;
    let (hx, hy) = (grid.hx(), grid.hy());
    Ok(CellField::from_fn(grid, |i, j| {
        (v.x[grid.xface(i + 1, j)] - v.x[grid.xface(i, j)]) / hx
            + (v.y[grid.yface(i, j + 1)] - v.y[grid.yface(i, j)]) / hy
    }))
}

/// Discrete Laplacian `div(grad q)`.
pub fn laplacian(q: &CellField, grid: &StaggeredGrid) -> Result<CellField> {
    div_fc(&grad_cc(q, grid)?, grid)
}

/// Summation-by-parts defect of the gradient/divergence pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adjointness {
    /// `sum_f w (grad q) v + sum_c V q (div v)`.
    pub residual: f64,
    /// Sum of the absolute values of the terms in both sums.
    pub scale: f64,
}

impl Adjointness {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.residual.abs()
        } else {
            self.residual.abs() / self.scale
        }
    }
}

/// Evaluates the integration-by-parts identity. Faces are summed with unit
/// weight over the stored layout minus periodic duplicates, so a nonzero
/// normal value on a walled boundary face reappears in the residual.
pub fn adjointness_check(q: &CellField, v: &FaceField, grid: &StaggeredGrid) -> Result<Adjointness> {
    let g = grad_cc(q, grid)?;
    let d = div_fc(v, grid)?;
    let vol = grid.cell_volume();
    let mut residual = 0.0;
    let mut scale = 0.0;
    let mut add = |t: f64| {
        residual += t;
        scale += t.abs();
    };
    let periodic = grid.is_periodic();
    for j in 0..grid.ny {
        for i in 0..=grid.nx {
            if periodic && i == grid.nx {
                continue;
            }
            let k = grid.xface(i, j);
            add(vol * g.x[k] * v.x[k]);
        }
    }
    for j in 0..=grid.ny {
        for i in 0..grid.nx {
            if periodic && j == grid.ny {
                continue;
            }
            let k = grid.yface(i, j);
            add(vol * g.y[k] * v.y[k]);
        }
    }
    for (qc, dc) in q.data.iter().zip(&d.data) {
        add(vol * qc * dc);
    }
    Ok(Adjointness { residual, scale })
}

/// Arithmetic mean of the two cells adjacent to each face; walled boundary
/// faces take the single interior neighbour.
pub fn face_interp(q: &CellField, grid: &StaggeredGrid) -> Result<FaceField> {
    grid.check_cell(q)?;
    let mut f = FaceField::zeros(grid);
    let avg = |pair: (Option<usize>, Option<usize>)| match pair {
        (Some(a), Some(b)) => 0.5 * (q.data[a] + q.data[b]),
        (Some(a), None) | (None, Some(a)) => q.data[a],
        (None, None) => 0.0,
    };
    for j in 0..grid.ny {
        for i in 0..=grid.nx {
            f.x[grid.xface(i, j)] = avg(xface_cells(grid, i, j));
        }
    }
    for j in 0..=grid.ny {
        for i in 0..grid.nx {
            f.y[grid.yface(i, j)] = avg(yface_cells(grid, i, j));
        }
    }
    Ok(f)
}

/// Donor-cell face values of `q` chosen by the sign of `v`; faces with
/// `v == 0` take the centered average.
pub fn upwind_face_values(q: &CellField, v: &FaceField, grid: &StaggeredGrid) -> Result<FaceField> {
    grid.check_cell(q)?;
    grid.check_face(v)?;
    let mut f = FaceField::zeros(grid);
    let pick = |pair: (Option<usize>, Option<usize>), vel: f64| match pair {
        (Some(a), Some(b)) => {
            if vel > 0.0 {
                q.data[a]
            } else if vel < 0.0 {
                q.data[b]
            } else {
                0.5 * (q.data[a] + q.data[b])
            }
        }
        (Some(a), None) | (None, Some(a)) => q.data[a],
        (None, None) => 0.0,
    };
    for j in 0..grid.ny {
        for i in 0..=grid.nx {
            let k = grid.xface(i, j);
            f.x[k] = pick(xface_cells(grid, i, j), v.x[k]);
        }
    }
    for j in 0..=grid.ny {
        for i in 0..grid.nx {
            let k = grid.yface(i, j);
            f.y[k] = pick(yface_cells(grid, i, j), v.y[k]);
        }
    }
    Ok(f)
}

/// Upwind discretization of `div(n v)`.
pub fn upwind_convect(n: &CellField, v: &FaceField, grid: &StaggeredGrid) -> Result<CellField> {
    let nf = upwind_face_values(n, v, grid)?;
    div_fc(&nf.zip_map(v, |a, b| a * b), grid)
}

/// Sparse face gradient, `n_faces x n_cells`, rows in `[x | y]` order.
pub fn gradient_matrix(grid: &StaggeredGrid) -> SparseMatrix {
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut t = Vec::with_capacity(2 * grid.n_faces());
    for j in 0..grid.ny {
        for i in 0..=grid.nx {
            if let (Some(l), Some(r)) = xface_cells(grid, i, j) {
                let row = grid.xface(i, j);
                t.push((row, r, 1.0 / hx));
                t.push((row, l, -1.0 / hx));
            }
        }
    }
    for j in 0..=grid.ny {
        for i in 0..grid.nx {
            if let (Some(s), Some(n)) = yface_cells(grid, i, j) {
                let row = grid.yface_flat(i, j);
                t.push((row, n, 1.0 / hy));
                t.push((row, s, -1.0 / hy));
            }
        }
    }
    SparseMatrix::from_triplets(grid.n_faces(), grid.n_cells(), t)
}

/// Sparse divergence, `n_cells x n_faces`.
pub fn divergence_matrix(grid: &StaggeredGrid) -> SparseMatrix {
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut t = Vec::with_capacity(4 * grid.n_cells());
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let row = grid.cell(i, j);
            t.push((row, grid.xface(i + 1, j), 1.0 / hx));
            t.push((row, grid.xface(i, j), -1.0 / hx));
            t.push((row, grid.yface_flat(i, j + 1), 1.0 / hy));
            t.push((row, grid.yface_flat(i, j), -1.0 / hy));
        }
    }
    SparseMatrix::from_triplets(grid.n_cells(), grid.n_faces(), t)
}
