//! Discrete momentum operators on MAC velocity unknowns: viscous stress from
//! a strain-rate dissipation functional, upwind convection by a face mass
//! flux, and the semi-implicit momentum system.

use super::{Boundary, FaceField, StaggeredGrid};
use crate::error::{Error, Result};
use crate::sparse::{solve_with_guess, SolveOptions, SolveReport, SparseMatrix};

/// Map between stored faces and velocity unknowns. Walled boundary faces are
/// pinned to 0; periodic duplicates share the unknown of their partner face.
#[derive(Debug, Clone)]
pub struct VelocityDofs {
    face_to_dof: Vec<Option<usize>>,
    dof_to_face: Vec<usize>,
}

impl VelocityDofs {
    pub fn new(grid: &StaggeredGrid) -> Self {
        let mut face_to_dof = vec![None; grid.n_faces()];
        let mut dof_to_face = Vec::new();
        let periodic = grid.is_periodic();
        for j in 0..grid.ny {
            for i in 0..=grid.nx {
                let own = if periodic { i < grid.nx } else { i > 0 && i < grid.nx };
                if own {
                    face_to_dof[grid.xface(i, j)] = Some(dof_to_face.len());
                    dof_to_face.push(grid.xface(i, j));
                }
            }
        }
        for j in 0..=grid.ny {
            for i in 0..grid.nx {
                let own = if periodic { j < grid.ny } else { j > 0 && j < grid.ny };
                if own {
                    face_to_dof[grid.yface_flat(i, j)] = Some(dof_to_face.len());
                    dof_to_face.push(grid.yface_flat(i, j));
                }
            }
        }
        if periodic {
            for j in 0..grid.ny {
                face_to_dof[grid.xface(grid.nx, j)] = face_to_dof[grid.xface(0, j)];
            }
            for i in 0..grid.nx {
                face_to_dof[grid.yface_flat(i, grid.ny)] = face_to_dof[grid.yface_flat(i, 0)];
            }
        }
        Self {
            face_to_dof,
            dof_to_face,
        }
    }

    pub fn len(&self) -> usize {
        self.dof_to_face.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dof_to_face.is_empty()
    }

    /// Flattened face index owning the unknown.
    pub fn face(&self, dof: usize) -> usize {
        self.dof_to_face[dof]
    }

    pub fn dof(&self, flat_face: usize) -> Option<usize> {
        self.face_to_dof[flat_face]
    }

    pub fn gather(&self, f: &FaceField) -> Vec<f64> {
        let flat = f.to_vec();
        self.dof_to_face.iter().map(|&k| flat[k]).collect()
    }

    pub fn scatter(&self, grid: &StaggeredGrid, values: &[f64]) -> FaceField {
        let flat: Vec<f64> = self
            .face_to_dof
            .iter()
            .map(|d| d.map_or(0.0, |d| values[d]))
            .collect();
        FaceField::from_vec(grid, &flat).expect("face layout matches grid")
    }
}

/// Viscous and convective operators for constant shear and bulk viscosity.
#[derive(Debug, Clone)]
pub struct MomentumOperators {
    grid: StaggeredGrid,
    dofs: VelocityDofs,
    eta: f64,
    lambda: f64,
    viscous: SparseMatrix,
}

/// Builds the operator bundle; `lambda = xi - 2/3 eta` is the second
/// viscosity coefficient.
pub fn momentum_operators(grid: &StaggeredGrid, eta: f64, lambda: f64) -> Result<MomentumOperators> {
    MomentumOperators::new(grid, eta, lambda)
}

impl MomentumOperators {
    pub fn new(grid: &StaggeredGrid, eta: f64, lambda: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::config("viscosity.shear_pa_s", format!("shear viscosity must be positive, got {eta}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::config(
                "viscosity.bulk_pa_s",
                format!("bulk viscosity must exceed 2/3 of the shear viscosity (lambda = {lambda})"),
            ));
        }
        let dofs = VelocityDofs::new(grid);
        let viscous = assemble_viscous(grid, &dofs, eta, lambda);
        Ok(Self {
            grid: *grid,
            dofs,
            eta,
            lambda,
            viscous,
        })
    }

    pub fn grid(&self) -> &StaggeredGrid {
        &self.grid
    }

    pub fn dofs(&self) -> &VelocityDofs {
        &self.dofs
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Symmetric positive semi-definite stiffness `B^T W B` of the viscous
    /// dissipation, on velocity unknowns.
    pub fn viscous_matrix(&self) -> &SparseMatrix {
        &self.viscous
    }

    /// Viscous dissipation rate `u^T K u` per unit depth [W/m].
    pub fn dissipation(&self, u: &FaceField) -> f64 {
        let x = self.dofs.gather(u);
        let kx = self.viscous.mul_vec(&x);
        x.iter().zip(&kx).map(|(a, b)| a * b).sum()
    }

    /// Viscous force density `grad(lambda div u) + div(eta (grad u + grad u^T))`
    /// on faces.
    pub fn viscous_apply(&self, u: &FaceField) -> FaceField {
        let x = self.dofs.gather(u);
        let vol = self.grid.cell_volume();
        let f: Vec<f64> = self.viscous.mul_vec(&x).iter().map(|v| -v / vol).collect();
        self.dofs.scatter(&self.grid, &f)
    }

    /// Volume-weighted upwind convection matrix for the face mass flux `flux`
    /// [kg/(m^2 s)]: row `P` is `sum over inflow control-volume faces of
    /// |F| (u_P - u_N)`.
    pub fn convection_matrix(&self, flux: &FaceField) -> SparseMatrix {
        let g = &self.grid;
        let (nx, ny) = (g.nx as isize, g.ny as isize);
        let (hx, hy) = (g.hx(), g.hy());
        let periodic = g.is_periodic();
        let wrap = |k: isize, n: isize| k.rem_euclid(n) as usize;
        let phix = |i: isize, j: isize| -> f64 {
            if periodic {
                flux.x[g.xface(wrap(i, nx), wrap(j, ny))]
            } else if (0..=nx).contains(&i) && (0..ny).contains(&j) {
                flux.x[g.xface(i as usize, j as usize)]
            } else {
                0.0
            }
        };
        let phiy = |i: isize, j: isize| -> f64 {
            if periodic {
                flux.y[g.yface(wrap(i, nx), wrap(j, ny))]
            } else if (0..nx).contains(&i) && (0..=ny).contains(&j) {
                flux.y[g.yface(i as usize, j as usize)]
            } else {
                0.0
            }
        };
        let udof = |i: isize, j: isize| -> Option<usize> {
            if periodic {
                self.dofs.dof(g.xface(wrap(i, nx), wrap(j, ny)))
            } else if (0..=nx).contains(&i) && (0..ny).contains(&j) {
                self.dofs.dof(g.xface(i as usize, j as usize))
            } else {
                None
            }
        };
        let vdof = |i: isize, j: isize| -> Option<usize> {
            if periodic {
                self.dofs.dof(g.yface_flat(wrap(i, nx), wrap(j, ny)))
            } else if (0..nx).contains(&i) && (0..=ny).contains(&j) {
                self.dofs.dof(g.yface_flat(i as usize, j as usize))
            } else {
                None
            }
        };

        let mut t = Vec::with_capacity(5 * self.dofs.len());
        let add = |p: usize, outward: f64, nb: Option<usize>, t: &mut Vec<(usize, usize, f64)>| {
            if outward < 0.0 {
                t.push((p, p, -outward));
                if let Some(n) = nb {
                    t.push((p, n, outward));
                }
            }
        };
        let nxf = g.n_xfaces();
        for p in 0..self.dofs.len() {
            let face = self.dofs.face(p);
            if face < nxf {
                let (i, j) = ((face % (g.nx + 1)) as isize, (face / (g.nx + 1)) as isize);
                let east = 0.5 * hy * (phix(i, j) + phix(i + 1, j));
                let west = -0.5 * hy * (phix(i - 1, j) + phix(i, j));
                let north = 0.5 * hx * (phiy(i - 1, j + 1) + phiy(i, j + 1));
                let south = -0.5 * hx * (phiy(i - 1, j) + phiy(i, j));
                add(p, east, udof(i + 1, j), &mut t);
                add(p, west, udof(i - 1, j), &mut t);
                add(p, north, udof(i, j + 1), &mut t);
                add(p, south, udof(i, j - 1), &mut t);
            } else {
                let k = face - nxf;
                let (i, j) = ((k % g.nx) as isize, (k / g.nx) as isize);
                let north = 0.5 * hx * (phiy(i, j) + phiy(i, j + 1));
                let south = -0.5 * hx * (phiy(i, j - 1) + phiy(i, j));
                let east = 0.5 * hy * (phix(i + 1, j - 1) + phix(i + 1, j));
                let west = -0.5 * hy * (phix(i, j - 1) + phix(i, j));
                add(p, north, vdof(i, j + 1), &mut t);
                add(p, south, vdof(i, j - 1), &mut t);
                add(p, east, vdof(i + 1, j), &mut t);
                add(p, west, vdof(i - 1, j), &mut t);
            }
        }
        SparseMatrix::from_triplets(self.dofs.len(), self.dofs.len(), t)
    }

    /// Convective acceleration `(flux . grad) u` per unit volume on faces.
    pub fn convection_apply(&self, flux: &FaceField, u: &FaceField) -> FaceField {
        let c = self.convection_matrix(flux);
        let vol = self.grid.cell_volume();
        let f: Vec<f64> = c.mul_vec(&self.dofs.gather(u)).iter().map(|v| v / vol).collect();
        self.dofs.scatter(&self.grid, &f)
    }

    /// Assembles `[W rho/dt + W C(flux) + K] u = W rho u_star / dt`.
    pub fn assemble(
        &self,
        rho_faces: &FaceField,
        flux: &FaceField,
        u_star: &FaceField,
        dt: f64,
    ) -> (SparseMatrix, Vec<f64>) {
        let vol = self.grid.cell_volume();
        let rho = self.dofs.gather(rho_faces);
        let us = self.dofs.gather(u_star);
        let mass: Vec<f64> = rho.iter().map(|r| vol * r / dt).collect();
        let rhs: Vec<f64> = mass.iter().zip(&us).map(|(m, u)| m * u).collect();
        let a = SparseMatrix::from_diagonal(&mass)
            .linear_combination(1.0, &self.convection_matrix(flux), 1.0)
            .linear_combination(1.0, &self.viscous, 1.0);
        (a, rhs)
    }

    /// Solves the semi-implicit momentum system for the new velocity.
    pub fn solve(
        &self,
        rho_faces: &FaceField,
        flux: &FaceField,
        u_star: &FaceField,
        dt: f64,
        opts: &SolveOptions,
    ) -> Result<(FaceField, SolveReport)> {
        let (a, rhs) = self.assemble(rho_faces, flux, u_star, dt);
        if a.nrows() == 0 {
            return Ok((
                FaceField::zeros(&self.grid),
                SolveReport {
                    iterations: 0,
                    relative_residual: 0.0,
                    converged: true,
                },
            ));
        }
        let guess = self.dofs.gather(u_star);
        let (x, report) = solve_with_guess(&a, &rhs, Some(&guess), opts)?;
        if !report.converged {
            return Err(Error::Solver {
                context: "momentum".into(),
                iterations: report.iterations,
                residual: report.relative_residual,
            });
        }
        Ok((self.dofs.scatter(&self.grid, &x), report))
    }
}

/// One strain measurement: a linear functional of the unknowns and its
/// quadrature weight in the dissipation functional.
struct Measurement {
    terms: Vec<(usize, f64)>,
    weight: f64,
}

fn assemble_viscous(grid: &StaggeredGrid, dofs: &VelocityDofs, eta: f64, lambda: f64) -> SparseMatrix {
    let (nx, ny) = (grid.nx as isize, grid.ny as isize);
    let (hx, hy) = (grid.hx(), grid.hy());
    let vol = grid.cell_volume();
    let periodic = grid.bc == Boundary::Periodic;
    let wrap = |k: isize, n: isize| k.rem_euclid(n) as usize;
    let u = |i: isize, j: isize| -> Option<usize> {
        if periodic {
            dofs.dof(grid.xface(wrap(i, nx), wrap(j, ny)))
        } else {
            dofs.dof(grid.xface(i as usize, j as usize))
        }
    };
    let v = |i: isize, j: isize| -> Option<usize> {
        if periodic {
            dofs.dof(grid.yface_flat(wrap(i, nx), wrap(j, ny)))
        } else {
            dofs.dof(grid.yface_flat(i as usize, j as usize))
        }
    };
    let term = |d: Option<usize>, c: f64| d.map(|d| (d, c));

    let mut ms: Vec<Measurement> = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let exx: Vec<_> = [term(u(i + 1, j), 1.0 / hx), term(u(i, j), -1.0 / hx)]
                .into_iter()
                .flatten()
                .collect();
            let eyy: Vec<_> = [term(v(i, j + 1), 1.0 / hy), term(v(i, j), -1.0 / hy)]
                .into_iter()
                .flatten()
                .collect();
            let div: Vec<_> = exx.iter().chain(&eyy).copied().collect();
            ms.push(Measurement {
                terms: div,
                weight: lambda * vol,
            });
            ms.push(Measurement {
                terms: exx,
                weight: 2.0 * eta * vol,
            });
            ms.push(Measurement {
                terms: eyy,
                weight: 2.0 * eta * vol,
            });
        }
    }

    // shear rate du/dy + dv/dx at cell corners
    if periodic {
        for j in 0..ny {
            for i in 0..nx {
                let terms: Vec<_> = [
                    term(u(i, j), 1.0 / hy),
                    term(u(i, j - 1), -1.0 / hy),
                    term(v(i, j), 1.0 / hx),
                    term(v(i - 1, j), -1.0 / hx),
                ]
                .into_iter()
                .flatten()
                .collect();
                ms.push(Measurement {
                    terms,
                    weight: eta * vol,
                });
            }
        }
    } else {
        for j in 0..=ny {
            for i in 0..=nx {
                let wall_x = i == 0 || i == nx;
                let wall_y = j == 0 || j == ny;
                let (terms, weight): (Vec<Option<(usize, f64)>>, f64) = match (wall_x, wall_y) {
                    (true, true) => continue,
                    // half-cell distance to the no-slip wall
                    (true, false) if i == 0 => (vec![term(v(0, j), 2.0 / hx)], 0.5),
                    (true, false) => (vec![term(v(nx - 1, j), -2.0 / hx)], 0.5),
                    (false, true) if j == 0 => (vec![term(u(i, 0), 2.0 / hy)], 0.5),
                    (false, true) => (vec![term(u(i, ny - 1), -2.0 / hy)], 0.5),
                    (false, false) => (
                        vec![
                            term(u(i, j), 1.0 / hy),
                            term(u(i, j - 1), -1.0 / hy),
                            term(v(i, j), 1.0 / hx),
                            term(v(i - 1, j), -1.0 / hx),
                        ],
                        1.0,
                    ),
                };
                ms.push(Measurement {
                    terms: terms.into_iter().flatten().collect(),
                    weight: eta * vol * weight,
                });
            }
        }
    }

    let mut t = Vec::new();
    for m in &ms {
        for &(a, ca) in &m.terms {
            for &(b, cb) in &m.terms {
                t.push((a, b, m.weight * ca * cb));
            }
        }
    }
    SparseMatrix::from_triplets(dofs.len(), dofs.len(), t)
}
