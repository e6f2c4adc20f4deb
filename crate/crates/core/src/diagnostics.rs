//! Discrete energy bookkeeping.

use crate::error::Result;
use crate::interface::{gradient_energy, InfluenceMatrix};
use crate::mesh::{face_interp, integrate, StaggeredGrid};
use crate::scheme::{FieldState, Model};

/// Energies per unit depth [J/m].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    pub step: usize,
    pub time: f64,
    pub e_kin: f64,
    pub f_grad: f64,
    pub h_sq: f64,
    pub f_modified: f64,
    pub f_original: f64,
    pub total_modified: f64,
    pub total_original: f64,
}

/// `1/2 sum_f w_f rho_f u_f^2` with `rho_f` the face mean of the cell densities.
pub fn kinetic_energy(state: &FieldState, molar_weights: &[f64], grid: &StaggeredGrid) -> Result<f64> {
    let rho = face_interp(&state.mass_density(molar_weights), grid)?;
    let w = grid.face_weights();
    let sx: f64 = (0..state.u.x.len()).map(|k| w.x[k] * rho.x[k] * state.u.x[k].powi(2)).sum();
    let sy: f64 = (0..state.u.y.len()).map(|k| w.y[k] * rho.y[k] * state.u.y[k].powi(2)).sum();
    Ok(0.5 * (sx + sy))
}

/// `H^2 + F_grad - sum C_T N`.
pub fn modified_helmholtz(state: &FieldState, c: &InfluenceMatrix, c_t: &[f64], grid: &StaggeredGrid) -> Result<f64> {
    let shift: f64 = c_t.iter().zip(&state.n).map(|(ct, f)| ct * integrate(grid, f)).sum();
    Ok(state.h * state.h + gradient_energy(c, &state.n, grid)? - shift)
}

/// `sum_c V f_b(n) + F_grad`.
pub fn original_helmholtz(model: &Model, state: &FieldState) -> Result<f64> {
    let bulk = model.bulk_fields(&state.n)?;
    Ok(integrate(&model.grid, &bulk.f_b) + gradient_energy(&model.influence, &state.n, &model.grid)?)
}

pub fn energy_record(model: &Model, state: &FieldState, step: usize) -> Result<EnergyRecord> {
    let grid = &model.grid;
    let e_kin = kinetic_energy(state, model.molar_weights(), grid)?;
    let f_grad = gradient_energy(&model.influence, &state.n, grid)?;
    let shift: f64 = model
        .config
        .c_t
        .iter()
        .zip(&state.n)
        .map(|(ct, f)| ct * integrate(grid, f))
        .sum();
    let h_sq = state.h * state.h;
    let f_modified = h_sq + f_grad - shift;
    let f_bulk = integrate(grid, &model.bulk_fields(&state.n)?.f_b);
    let f_original = f_bulk + f_grad;
    Ok(EnergyRecord {
        step,
        time: state.t,
        e_kin,
        f_grad,
        h_sq,
        f_modified,
        f_original,
        total_modified: e_kin + f_modified,
        total_original: e_kin + f_original,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationVerdict {
    pub passed: bool,
    /// Step number of the first record whose energy rose beyond tolerance.
    pub first_violation: Option<usize>,
    /// Largest relative increase `(E_{k+1} - E_k)/|E_k|` seen.
    pub max_relative_increase: f64,
}

/// Checks that `total_modified` never rises by more than `tol_rel |E_k|`.
pub fn assert_dissipation(records: &[EnergyRecord], tol_rel: f64) -> DissipationVerdict {
    let mut first_violation = None;
    let mut max_relative_increase = f64::NEG_INFINITY;
    for pair in records.windows(2) {
        let (a, b) = (pair[0].total_modified, pair[1].total_modified);
        let rel = (b - a) / a.abs().max(f64::MIN_POSITIVE);
        max_relative_increase = max_relative_increase.max(rel);
        if !(rel <= tol_rel) && first_violation.is_none() {
            first_violation = Some(pair[1].step);
        }
    }
    DissipationVerdict {
        passed: first_violation.is_none(),
        first_violation,
        max_relative_increase,
    }
}
