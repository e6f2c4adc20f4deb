//! Component-wise decoupled step: scalar bordered solves swept over the
//! components at fractional levels, then one momentum solve.

use super::{norm, velocity_increment, FieldState, Model, StepAudit, StepContext};
use crate::error::{Error, Result};
use crate::interface::gradient_energy;
use crate::mesh::{face_dot, CellField, FaceField};
use crate::sparse::{BorderedSystem, SparseMatrix};

/// State after `index` of the component sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalState {
    pub index: usize,
    /// Components `< index` at the new level, the rest at the old level.
    pub n_mixed: Vec<CellField>,
    pub h: f64,
    pub u_star: FaceField,
}

impl FractionalState {
    pub fn start(state: &FieldState) -> Self {
        Self {
            index: 0,
            n_mixed: state.n.clone(),
            h: state.h,
            u_star: state.u.clone(),
        }
    }
}

/// Energy balance of one sweep: `lhs` is the change of `H^2 + F_grad`,
/// `bound` the work of the chemical-potential force on the new fractional
/// velocity minus the diffusive dissipation. `lhs <= bound` holds exactly
/// up to the solver residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalEnergy {
    pub lhs: f64,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct ComponentUpdate {
    pub frac: FractionalState,
    pub mu: CellField,
    pub flux: FaceField,
    pub energy: FractionalEnergy,
    pub mass_residual: f64,
    pub sav_residual: f64,
    pub iterations: usize,
}

/// Sweep diagnostics of a full step.
#[derive(Debug, Clone)]
pub struct SweepAudit {
    pub energies: Vec<FractionalEnergy>,
    /// Fractional velocities after each sweep.
    pub u_stars: Vec<FaceField>,
    /// Max deviation between the last fractional velocity and the velocity
    /// rebuilt from all potentials at once, relative to its magnitude.
    pub telescoping_defect: f64,
}

fn check_diagonal(model: &Model) -> Result<()> {
    if !model.config.mobility.is_diagonal() {
        return Err(Error::config(
            "mobility.kind",
            "the componentwise scheme requires the diagonal mobility",
        ));
    }
    Ok(())
}

/// Advances component `i` given the sweep state after components `< i`.
/// `denom` is the auxiliary-variable denominator frozen at the old level.
pub fn component_solve(
    model: &Model,
    i: usize,
    frac: &FractionalState,
    state_k: &FieldState,
    denom: f64,
) -> Result<ComponentUpdate> {
    check_diagonal(model)?;
    let ctx = model.context(state_k)?;
    solve_component(model, &ctx, i, frac, state_k, denom)
}

fn solve_component(
    model: &Model,
    ctx: &StepContext,
    i: usize,
    frac: &FractionalState,
    state_k: &FieldState,
    denom: f64,
) -> Result<ComponentUpdate> {
    let m = model.len();
    if i >= m || frac.index != i {
        return Err(Error::Shape(format!("sweep {i} requested at fractional index {}", frac.index)));
    }
    let grid = &model.grid;
    let nc = grid.n_cells();
    let dt = model.config.dt;
    let vol = grid.cell_volume();
    let cii = model.influence.get(i, i);

    let w = model.sav_weights_with_denominator(&frac.n_mixed, denom)?.swap_remove(i);
    let k = ctx.n_faces[i]
        .zip_map(&ctx.rho_faces, |n, r| dt * n * n / r)
        .zip_map(ctx.mobility.get(i, i), |a, b| a + b);

    let mut cross = CellField::zeros(grid);
    for j in (0..m).filter(|&j| j != i) {
        let c = model.influence.get(i, j);
        if c != 0.0 {
            let lap = model.div(&model.grad(&frac.n_mixed[j]));
            for (r, l) in cross.data.iter_mut().zip(&lap.data) {
                *r += c * l;
            }
        }
    }

    let mut trip = Vec::new();
    if cii != 0.0 {
        model
            .div_matrix()
            .scale_columns(&k.to_vec())
            .matmul(model.grad_lap_matrix())
            .scale(dt * cii)
            .push_block(0, 0, &mut trip);
    }
    for c in 0..nc {
        trip.push((c, c, 1.0));
    }
    let a = SparseMatrix::from_triplets(nc, nc, trip);
    let g = model.div(&k.zip_map(&model.grad(&w), |a, b| a * b)).map(|v| -dt * v);
    let conv = model.div(&ctx.n_faces[i].zip_map(&frac.u_star, |a, b| a * b));
    let cross_flux = model.div(&k.zip_map(&model.grad(&cross), |a, b| a * b));
    let n_old = &state_k.n[i];
    let rhs: Vec<f64> = (0..nc)
        .map(|c| n_old.data[c] - dt * conv.data[c] - frac.h * g.data[c] - dt * cross_flux.data[c])
        .collect();
    let border: Vec<f64> = w.data.iter().map(|v| -vol * v).collect();
    let rhs_h = frac.h - vol * w.data.iter().zip(&n_old.data).map(|(a, b)| a * b).sum::<f64>();
    let sys = BorderedSystem {
        a,
        g: g.data,
        w: border,
        sigma: 1.0,
        rhs,
        rhs_h,
    };
    if sys.rhs.iter().chain(&sys.g).chain(&sys.w).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("mass system coefficients of component {i}")));
    }
    let sol = sys.solve(Some(&n_old.data), &model.config.solver)?;
    let x = model.cell_from(sol.x);

    let lap_x = model.div(&model.grad(&x));
    let mu = CellField {
        nx: grid.nx,
        ny: grid.ny,
        data: (0..nc)
            .map(|c| (sol.h + frac.h) * w.data[c] - cii * lap_x.data[c] - cross.data[c])
            .collect(),
    };
    let grad_mu = model.grad(&mu);
    let mut u_star = frac.u_star.clone();
    u_star.axpy(1.0, &velocity_increment(model, ctx, [(i, grad_mu.clone())]));
    let flux = ctx.mobility.get(i, i).zip_map(&grad_mu, |a, b| -a * b);

    let mut total = ctx.n_faces[i].zip_map(&u_star, |a, b| a * b);
    total.axpy(1.0, &flux);
    let d = model.div(&total);
    let r: Vec<f64> = (0..nc).map(|c| x.data[c] - n_old.data[c] + dt * d.data[c]).collect();
    let mass_residual = norm(&r) / norm(&n_old.data);
    let sav_change = vol
        * w.data
            .iter()
            .zip(x.data.iter().zip(&n_old.data))
            .map(|(w, (a, b))| w * (a - b))
            .sum::<f64>();
    let sav_residual = (sol.h - frac.h - sav_change).abs() / frac.h.abs().max(f64::MIN_POSITIVE);

    let mut n_mixed = frac.n_mixed.clone();
    n_mixed[i] = x;
    let f_before = gradient_energy(&model.influence, &frac.n_mixed, grid)?;
    let f_after = gradient_energy(&model.influence, &n_mixed, grid)?;
    let lhs = sol.h * sol.h - frac.h * frac.h + f_after - f_before;
    let work = face_dot(grid, &ctx.n_faces[i].zip_map(&u_star, |a, b| a * b), &grad_mu);
    let dissipation = face_dot(grid, &ctx.mobility.get(i, i).zip_map(&grad_mu, |a, b| a * b), &grad_mu);
    let bound = dt * (work - dissipation);

    Ok(ComponentUpdate {
        frac: FractionalState {
            index: i + 1,
            n_mixed,
            h: sol.h,
            u_star,
        },
        mu,
        flux,
        energy: FractionalEnergy { lhs, bound },
        mass_residual,
        sav_residual,
        iterations: sol.iterations,
    })
}

/// Face average `sum_i rho_i u_i / sum_i rho_i` of the fractional
/// velocities with partial mass densities `rho_i` on faces.
pub fn mean_intermediate_velocity(u_stars: &[FaceField], partial_densities: &[FaceField]) -> Result<FaceField> {
    if u_stars.is_empty() || u_stars.len() != partial_densities.len() {
        return Err(Error::Shape(format!(
            "{} fractional velocities for {} densities",
            u_stars.len(),
            partial_densities.len()
        )));
    }
    let mut num = u_stars[0].map(|_| 0.0);
    let mut den = num.clone();
    for (u, r) in u_stars.iter().zip(partial_densities) {
        num.axpy(1.0, &u.zip_map(r, |a, b| a * b));
        den.axpy(1.0, r);
    }
    if den.x.iter().chain(&den.y).any(|d| !(*d > 0.0)) {
        return Err(Error::Domain("mass density vanishes on a face".into()));
    }
    Ok(num.zip_map(&den, |a, b| a / b))
}

pub fn step_with_audit(model: &Model, state: &FieldState) -> Result<(FieldState, StepAudit, SweepAudit)> {
    check_diagonal(model)?;
    let ctx = model.context(state)?;
    let denom = model.sav_weights(&state.n)?.denom;
    let m = model.len();
    let mut frac = FractionalState::start(state);
    let mut audit = StepAudit::default();
    let mut energies = Vec::with_capacity(m);
    let mut u_stars = Vec::with_capacity(m);
    let mut grad_mu = Vec::with_capacity(m);
    let mut fluxes = Vec::with_capacity(m);
    for i in 0..m {
        let up = solve_component(model, &ctx, i, &frac, state, denom)?;
        audit.mass_residual = audit.mass_residual.max(up.mass_residual);
        audit.sav_residual = audit.sav_residual.max(up.sav_residual);
        audit.mass_iterations += up.iterations;
        energies.push(up.energy);
        u_stars.push(up.frac.u_star.clone());
        grad_mu.push(model.grad(&up.mu));
        fluxes.push(up.flux);
        frac = up.frac;
    }

    let mw = model.molar_weights();
    let partial: Vec<FaceField> = (0..m).map(|i| ctx.n_faces[i].map(|v| mw[i] * v)).collect();
    let u_mean = mean_intermediate_velocity(&u_stars, &partial)?;
    let mut rho_up = FaceField::zeros(&model.grid);
    for p in &partial {
        rho_up.axpy(1.0, p);
    }
    let mut mass_flux = rho_up.zip_map(&u_mean, |a, b| a * b);
    for (i, j) in fluxes.iter().enumerate() {
        mass_flux.axpy(mw[i], j);
    }

    let u_final = frac.u_star.clone();
    let mut rebuilt = state.u.clone();
    rebuilt.axpy(1.0, &velocity_increment(model, &ctx, grad_mu.into_iter().enumerate()));
    let scale = u_final.max_abs().max(f64::MIN_POSITIVE);
    let telescoping_defect = rebuilt.zip_map(&u_final, |a, b| (a - b).abs()).max_abs() / scale;

    let (u, report) = model.momentum().solve(
        &ctx.rho_faces,
        &mass_flux,
        &u_final,
        model.config.dt,
        &model.config.solver,
    )?;
    audit.momentum_iterations = report.iterations;
    let next = FieldState {
        n: frac.n_mixed,
        u,
        h: frac.h,
        t: state.t + model.config.dt,
    };
    if !next.is_finite() {
        return Err(Error::NonFinite(format!("state after step at t = {:.6e} s", next.t)));
    }
    Ok((
        next,
        audit,
        SweepAudit {
            energies,
            u_stars,
            telescoping_defect,
        },
    ))
}

pub fn step(model: &Model, state: &FieldState) -> Result<FieldState> {
    step_with_audit(model, state).map(|(s, _, _)| s)
}
