//! Velocity-density decoupled step: one bordered linear system for all new
//! molar densities and the auxiliary scalar, then one momentum solve.

use super::{norm, velocity_increment, FieldState, Model, StepAudit, StepContext};
use crate::error::{Error, Result};
use crate::mesh::{CellField, FaceField};
use crate::sparse::{BorderedSystem, SolveReport, SparseMatrix};

/// Level-(k+1) mass quantities and the intermediate velocity.
#[derive(Debug, Clone)]
pub struct MassUpdate {
    pub n: Vec<CellField>,
    pub h: f64,
    pub mu: Vec<CellField>,
    /// Intermediate velocity after the chemical-potential force.
    pub u_star: FaceField,
    /// Diffusion fluxes `J_i` [mol/(m^2 s)].
    pub flux: Vec<FaceField>,
    /// Total mass flux `sum_i M_w,i (n_i u_star + J_i)` [kg/(m^2 s)].
    pub mass_flux: FaceField,
    /// Old mass density on faces.
    pub rho_faces: FaceField,
    pub audit: StepAudit,
}

/// Face coefficients `K_ij = dt n_i n_j / rho + M_ij` coupling the
/// chemical-potential gradients into the mass fluxes.
fn transport_tensor(model: &Model, ctx: &StepContext) -> Vec<Vec<FaceField>> {
    let m = model.len();
    let dt = model.config.dt;
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let nn = ctx.n_faces[i].zip_map(&ctx.n_faces[j], |a, b| a * b);
                    let conv = nn.zip_map(&ctx.rho_faces, |a, r| dt * a / r);
                    conv.zip_map(ctx.mobility.get(i, j), |a, b| a + b)
                })
                .collect()
        })
        .collect()
}

fn assemble(model: &Model, ctx: &StepContext, state: &FieldState, w: &[CellField]) -> BorderedSystem {
    let m = model.len();
    let nc = model.grid.n_cells();
    let dt = model.config.dt;
    let vol = model.grid.cell_volume();
    let k = transport_tensor(model, ctx);
    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..m {
        for l in 0..m {
            let mut q = FaceField::zeros(&model.grid);
            for j in 0..m {
                let c = model.influence.get(j, l);
                if c != 0.0 {
                    q.axpy(c, &k[i][j]);
                }
            }
            if q.max_abs() != 0.0 {
                let block = model
                    .div_matrix()
                    .scale_columns(&q.to_vec())
                    .matmul(model.grad_lap_matrix())
                    .scale(dt);
                block.push_block(i * nc, l * nc, &mut trip);
            }
        }
        for c in 0..nc {
            trip.push((i * nc + c, i * nc + c, 1.0));
        }
    }
    let a = SparseMatrix::from_triplets(m * nc, m * nc, trip);

    let grad_w: Vec<FaceField> = w.iter().map(|f| model.grad(f)).collect();
    let mut g = Vec::with_capacity(m * nc);
    let mut rhs = Vec::with_capacity(m * nc);
    let mut border = Vec::with_capacity(m * nc);
    let mut rhs_h = state.h;
    for i in 0..m {
        let mut kgw = FaceField::zeros(&model.grid);
        for j in 0..m {
            kgw.axpy(1.0, &k[i][j].zip_map(&grad_w[j], |a, b| a * b));
        }
        let gi = model.div(&kgw).map(|v| -dt * v);
        let conv = model.div(&ctx.n_faces[i].zip_map(&state.u, |a, b| a * b));
        for c in 0..nc {
            rhs.push(state.n[i].data[c] - dt * conv.data[c] - state.h * gi.data[c]);
            border.push(-vol * w[i].data[c]);
            rhs_h -= vol * w[i].data[c] * state.n[i].data[c];
        }
        g.extend(gi.data);
    }
    BorderedSystem {
        a,
        g,
        w: border,
        sigma: 1.0,
        rhs,
        rhs_h,
    }
}

/// The bordered system for all new molar densities (stacked by component)
/// and the new auxiliary scalar.
pub fn assemble_mass_system(model: &Model, state: &FieldState) -> Result<BorderedSystem> {
    let ctx = model.context(state)?;
    let sav = model.sav_weights(&state.n)?;
    let sys = assemble(model, &ctx, state, &sav.w);
    if sys.rhs.iter().chain(&sys.g).chain(&sys.w).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mass system coefficients".into()));
    }
    Ok(sys)
}

pub fn step_mass(model: &Model, state: &FieldState) -> Result<MassUpdate> {
    let ctx = model.context(state)?;
    let sav = model.sav_weights(&state.n)?;
    let sys = assemble(model, &ctx, state, &sav.w);
    if sys.rhs.iter().chain(&sys.g).chain(&sys.w).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mass system coefficients".into()));
    }
    let guess: Vec<f64> = state.n.iter().flat_map(|f| f.data.iter().copied()).collect();
    let sol = sys.solve(Some(&guess), &model.config.solver)?;
    let nc = model.grid.n_cells();
    let m = model.len();
    let n_new: Vec<CellField> = (0..m)
        .map(|i| model.cell_from(sol.x[i * nc..(i + 1) * nc].to_vec()))
        .collect();

    let mu = model.potentials(sol.h + state.h, &sav.w, &n_new);
    let grad_mu: Vec<FaceField> = mu.iter().map(|f| model.grad(f)).collect();
    let mut u_star = state.u.clone();
    u_star.axpy(1.0, &velocity_increment(model, &ctx, grad_mu.iter().cloned().enumerate()));
    let flux: Vec<FaceField> = (0..m)
        .map(|i| {
            let mut j_i = FaceField::zeros(&model.grid);
            for (j, g) in grad_mu.iter().enumerate() {
                j_i.axpy(-1.0, &ctx.mobility.get(i, j).zip_map(g, |a, b| a * b));
            }
            j_i
        })
        .collect();

    let dt = model.config.dt;
    let vol = model.grid.cell_volume();
    let mut mass_flux = FaceField::zeros(&model.grid);
    let mut mass_residual: f64 = 0.0;
    let mut sav_change = 0.0;
    for i in 0..m {
        let mut total = ctx.n_faces[i].zip_map(&u_star, |a, b| a * b);
        total.axpy(1.0, &flux[i]);
        let d = model.div(&total);
        let r: Vec<f64> = (0..nc)
            .map(|c| n_new[i].data[c] - state.n[i].data[c] + dt * d.data[c])
            .collect();
        mass_residual = mass_residual.max(norm(&r) / norm(&state.n[i].data));
        mass_flux.axpy(model.molar_weights()[i], &total);
        sav_change += vol
            * sav.w[i]
                .data
                .iter()
                .zip(n_new[i].data.iter().zip(&state.n[i].data))
                .map(|(w, (a, b))| w * (a - b))
                .sum::<f64>();
    }
    let sav_residual = (sol.h - state.h - sav_change).abs() / state.h.abs().max(f64::MIN_POSITIVE);
    Ok(MassUpdate {
        n: n_new,
        h: sol.h,
        mu,
        u_star,
        flux,
        mass_flux,
        rho_faces: ctx.rho_faces,
        audit: StepAudit {
            mass_residual,
            sav_residual,
            mass_iterations: sol.iterations,
            momentum_iterations: 0,
        },
    })
}

/// Semi-implicit momentum solve advected by the step's mass flux.
pub fn step_momentum(model: &Model, update: &MassUpdate) -> Result<(FaceField, SolveReport)> {
    model.momentum().solve(
        &update.rho_faces,
        &update.mass_flux,
        &update.u_star,
        model.config.dt,
        &model.config.solver,
    )
}

pub fn step_with_audit(model: &Model, state: &FieldState) -> Result<(FieldState, StepAudit)> {
    let update = step_mass(model, state)?;
    let (u, report) = step_momentum(model, &update)?;
    let mut audit = update.audit;
    audit.momentum_iterations = report.iterations;
    let next = FieldState {
        n: update.n,
        u,
        h: update.h,
        t: state.t + model.config.dt,
    };
    if !next.is_finite() {
        return Err(Error::NonFinite(format!("state after step at t = {:.6e} s", next.t)));
    }
    Ok((next, audit))
}

pub fn step(model: &Model, state: &FieldState) -> Result<FieldState> {
    step_with_audit(model, state).map(|(s, _)| s)
}
