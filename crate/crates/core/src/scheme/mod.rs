//! Shared state, configuration and helpers of the two SAV time steppers.

pub mod componentwise;
pub mod coupled;

use crate::error::{Error, Result};
use crate::interface::InfluenceMatrix;
use crate::mesh::momentum::MomentumOperators;
use crate::mesh::{
    divergence_matrix, face_interp, gradient_matrix, integrate, upwind_face_values, CellField, FaceField,
    StaggeredGrid,
};
use crate::mobility::{face_mobility, FaceMobility, MobilitySpec};
use crate::sparse::{SolveOptions, SparseMatrix};
use crate::thermo::{MixtureSpec, PengRobinson};

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    /// Time step [s].
    pub dt: f64,
    /// Energy shift coefficients [J/mol], one per component.
    pub c_t: Vec<f64>,
    pub solver: SolveOptions,
    pub mobility: MobilitySpec,
    /// Bulk viscosity [Pa s].
    pub xi: f64,
    /// Shear viscosity [Pa s].
    pub eta: f64,
}

impl SchemeConfig {
    /// Second viscosity coefficient `xi - 2/3 eta`.
    pub fn lambda(&self) -> f64 {
        self.xi - 2.0 / 3.0 * self.eta
    }

    fn validate(&self, m: usize) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("time.dt_s", format!("time step must be positive, got {}", self.dt)));
        }
        if self.c_t.len() != m {
            return Err(Error::config("energy_shift_j_per_mol", format!("expected {m} entries, got {}", self.c_t.len())));
        }
        if self.c_t.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::config("energy_shift_j_per_mol", "entries must be finite and non-negative"));
        }
        if self.mobility.len() != m {
            return Err(Error::config("mobility", format!("expected coefficients for {m} components")));
        }
        if !(self.solver.tol > 0.0) {
            return Err(Error::config("solver.tol", "tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    /// Molar densities [mol/m^3], one field per component.
    pub n: Vec<CellField>,
    /// Face-normal velocity [m/s].
    pub u: FaceField,
    /// Auxiliary scalar, square root of the shifted bulk energy.
    pub h: f64,
    /// Time [s].
    pub t: f64,
}

impl FieldState {
    pub fn mass_density(&self, molar_weights: &[f64]) -> CellField {
        mass_density(&self.n, molar_weights)
    }

    /// `sum_c V n_i` per component.
    pub fn total_moles(&self, grid: &StaggeredGrid) -> Vec<f64> {
        self.n.iter().map(|f| integrate(grid, f)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.h.is_finite()
            && self.n.iter().all(|f| f.data.iter().all(|v| v.is_finite()))
            && self.u.x.iter().chain(&self.u.y).all(|v| v.is_finite())
    }
}

pub fn mass_density(n: &[CellField], molar_weights: &[f64]) -> CellField {
    let mut rho = CellField {
        nx: n[0].nx,
        ny: n[0].ny,
        data: vec![0.0; n[0].data.len()],
    };
    for (f, mw) in n.iter().zip(molar_weights) {
        for (r, v) in rho.data.iter_mut().zip(&f.data) {
            *r += mw * v;
        }
    }
    rho
}

/// Bulk energy density and bulk chemical potentials on every cell.
#[derive(Debug, Clone)]
pub struct BulkFields {
    pub f_b: CellField,
    pub mu_b: Vec<CellField>,
}

/// Auxiliary-variable weights `mu_b / (2 S)` with `S = sqrt(F_b + sum C_T N)`.
#[derive(Debug, Clone)]
pub struct SavWeights {
    pub denom: f64,
    pub w: Vec<CellField>,
}

/// Everything a step needs besides the state: thermodynamics, operators and
/// the scheme configuration.
#[derive(Debug, Clone)]
pub struct Model {
    pub mixture: MixtureSpec,
    pub eos: PengRobinson,
    pub influence: InfluenceMatrix,
    pub config: SchemeConfig,
    pub grid: StaggeredGrid,
    momentum: MomentumOperators,
    grad: SparseMatrix,
    div: SparseMatrix,
    grad_lap: SparseMatrix,
    molar_weights: Vec<f64>,
}

impl Model {
    pub fn new(
        mixture: MixtureSpec,
        influence: InfluenceMatrix,
        config: SchemeConfig,
        grid: StaggeredGrid,
    ) -> Result<Self> {
        let eos = mixture.eos()?;
        Self::with_eos(mixture, eos, influence, config, grid)
    }

    /// Uses a caller-supplied equation of state, e.g. one built from
    /// explicit attraction and covolume parameters.
    pub fn with_eos(
        mixture: MixtureSpec,
        eos: PengRobinson,
        influence: InfluenceMatrix,
        config: SchemeConfig,
        grid: StaggeredGrid,
    ) -> Result<Self> {
        let m = mixture.len();
        config.validate(m)?;
        if influence.len() != m || eos.len() != m {
            return Err(Error::Shape(format!(
                "influence matrix {}x{} and equation of state for {} components, mixture has {m}",
                influence.len(),
                influence.len(),
                eos.len()
            )));
        }
        let momentum = MomentumOperators::new(&grid, config.eta, config.lambda())?;
        let grad = gradient_matrix(&grid);
        let div = divergence_matrix(&grid);
        let grad_lap = grad.matmul(&div).matmul(&grad);
        let molar_weights = mixture.molar_weights();
        Ok(Self {
            mixture,
            eos,
            influence,
            config,
            grid,
            momentum,
            grad,
            div,
            grad_lap,
            molar_weights,
        })
    }

    pub fn len(&self) -> usize {
        self.mixture.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mixture.is_empty()
    }

    pub fn molar_weights(&self) -> &[f64] {
        &self.molar_weights
    }

    pub fn momentum(&self) -> &MomentumOperators {
        &self.momentum
    }

    pub(crate) fn div_matrix(&self) -> &SparseMatrix {
        &self.div
    }

    /// `G D G`, the face gradient of the Laplacian.
    pub(crate) fn grad_lap_matrix(&self) -> &SparseMatrix {
        &self.grad_lap
    }

    pub fn bulk_fields(&self, n: &[CellField]) -> Result<BulkFields> {
        let m = self.len();
        if n.len() != m {
            return Err(Error::Shape(format!("{} density fields for {m} components", n.len())));
        }
        let mut f_b = CellField::zeros(&self.grid);
        let mut mu_b = vec![CellField::zeros(&self.grid); m];
        let mut point = vec![0.0; m];
        for c in 0..self.grid.n_cells() {
            for (p, f) in point.iter_mut().zip(n) {
                *p = f.data[c];
            }
            let e = self.eos.evaluate(&point).map_err(|err| locate(err, &self.grid, c))?;
            f_b.data[c] = e.f_b;
            for (mu, v) in mu_b.iter_mut().zip(&e.mu_b) {
                mu.data[c] = *v;
            }
        }
        Ok(BulkFields { f_b, mu_b })
    }

    /// `F_b + sum C_T N` for the given densities.
    pub fn shifted_bulk_energy(&self, n: &[CellField]) -> Result<f64> {
        let bulk = self.bulk_fields(n)?;
        Ok(self.shifted_from(&bulk, n))
    }

    fn shifted_from(&self, bulk: &BulkFields, n: &[CellField]) -> f64 {
        let f: f64 = integrate(&self.grid, &bulk.f_b);
        let shift: f64 = self
            .config
            .c_t
            .iter()
            .zip(n)
            .map(|(c, f)| c * integrate(&self.grid, f))
            .sum();
        f + shift
    }

    /// `sqrt(F_b + sum C_T N)`, the auxiliary variable consistent with `n`.
    pub fn initial_h(&self, n: &[CellField]) -> Result<f64> {
        let r = self.shifted_bulk_energy(n)?;
        if !(r > 0.0) {
            return Err(Error::EnergyShift {
                radicand: r,
                c_t: self.config.c_t.clone(),
            });
        }
        Ok(r.sqrt())
    }

    pub fn sav_weights(&self, n: &[CellField]) -> Result<SavWeights> {
        let bulk = self.bulk_fields(n)?;
        let r = self.shifted_from(&bulk, n);
        if !(r > 0.0) {
            return Err(Error::EnergyShift {
                radicand: r,
                c_t: self.config.c_t.clone(),
            });
        }
        let denom = r.sqrt();
        let w = bulk.mu_b.iter().map(|mu| mu.map(|v| v / (2.0 * denom))).collect();
        Ok(SavWeights { denom, w })
    }

    /// Weights from bulk potentials at `n_mu` with a fixed denominator.
    pub fn sav_weights_with_denominator(&self, n_mu: &[CellField], denom: f64) -> Result<Vec<CellField>> {
        let bulk = self.bulk_fields(n_mu)?;
        Ok(bulk.mu_b.iter().map(|mu| mu.map(|v| v / (2.0 * denom))).collect())
    }

    pub(crate) fn context(&self, state: &FieldState) -> Result<StepContext> {
        let m = self.len();
        if state.n.len() != m {
            return Err(Error::Shape(format!("state has {} components, model {m}", state.n.len())));
        }
        if !state.is_finite() {
            return Err(Error::NonFinite(format!("state at t = {:.6e} s", state.t)));
        }
        let rho_cells = state.mass_density(&self.molar_weights);
        if let Some((c, r)) = rho_cells.data.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
            return Err(locate(Error::Domain(format!("mass density {r} is not positive")), &self.grid, c));
        }
        let rho_faces = face_interp(&rho_cells, &self.grid)?;
        let n_faces = state
            .n
            .iter()
            .map(|f| upwind_face_values(f, &state.u, &self.grid))
            .collect::<Result<Vec<_>>>()?;
        let mobility = face_mobility(&self.config.mobility, &self.mixture, &state.n, &self.grid)?;
        Ok(StepContext {
            rho_faces,
            n_faces,
            mobility,
        })
    }

    pub(crate) fn face_from(&self, v: &[f64]) -> FaceField {
        FaceField::from_vec(&self.grid, v).expect("operator output matches grid")
    }

    pub(crate) fn cell_from(&self, v: Vec<f64>) -> CellField {
        CellField::from_vec(&self.grid, v).expect("operator output matches grid")
    }

    pub(crate) fn grad(&self, q: &CellField) -> FaceField {
        self.face_from(&self.grad.mul_vec(&q.data))
    }

    pub(crate) fn div(&self, v: &FaceField) -> CellField {
        self.cell_from(self.div.mul_vec(&v.to_vec()))
    }

    /// Chemical potentials `(h + h_old) w_i - sum_j c_ij L n_j`.
    pub(crate) fn potentials(&self, h_sum: f64, w: &[CellField], n: &[CellField]) -> Vec<CellField> {
        let laps: Vec<CellField> = n.iter().map(|f| self.div(&self.grad(f))).collect();
        (0..self.len())
            .map(|i| {
                let mut mu = w[i].map(|v| h_sum * v);
                for (j, lap) in laps.iter().enumerate() {
                    let cij = self.influence.get(i, j);
                    if cij != 0.0 {
                        for (m, l) in mu.data.iter_mut().zip(&lap.data) {
                            *m -= cij * l;
                        }
                    }
                }
                mu
            })
            .collect()
    }
}

/// State-level quantities frozen during one step.
#[derive(Debug, Clone)]
pub(crate) struct StepContext {
    /// Face mass density, arithmetic mean of the adjacent cells.
    pub rho_faces: FaceField,
    /// Donor-cell molar densities, upwinded by the old velocity.
    pub n_faces: Vec<FaceField>,
    pub mobility: FaceMobility,
}

fn locate(err: Error, grid: &StaggeredGrid, cell: usize) -> Error {
    let (i, j) = (cell % grid.nx, cell / grid.nx);
    match err {
        Error::Domain(msg) => Error::Domain(format!("cell ({i}, {j}): {msg}")),
        Error::Covolume { bn } => Error::Domain(format!("cell ({i}, {j}): covolume violation, b*n = {bn:.6}")),
        other => other,
    }
}

/// Residuals of the discrete equations after a step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepAudit {
    /// Max over components of `||n_new - n + dt div(flux)|| / ||n||`.
    pub mass_residual: f64,
    /// Auxiliary-variable update residual relative to `|H|`.
    pub sav_residual: f64,
    /// Linear solver iterations spent in the mass solves.
    pub mass_iterations: usize,
    pub momentum_iterations: usize,
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `u* = u_old - dt/rho_f sum_i n_if grad mu_i` restricted to the given components.
pub(crate) fn velocity_increment(
    model: &Model,
    ctx: &StepContext,
    components: impl IntoIterator<Item = (usize, FaceField)>,
) -> FaceField {
    let dt = model.config.dt;
    let mut inc = FaceField::zeros(&model.grid);
    for (i, grad_mu) in components {
        let term = ctx.n_faces[i].zip_map(&grad_mu, |a, b| a * b);
        inc.axpy(1.0, &term);
    }
    inc.zip_map(&ctx.rho_faces, |s, r| -dt * s / r)
}

/// Which time stepper advances a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize, serde::Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    /// All components solved together with the full mobility tensor.
    Coupled,
    /// Components solved one after another; needs a diagonal mobility.
    Componentwise,
}

impl SchemeKind {
    pub fn step(self, model: &Model, state: &FieldState) -> Result<(FieldState, StepAudit)> {
        match self {
            SchemeKind::Coupled => coupled::step_with_audit(model, state),
            SchemeKind::Componentwise => componentwise::step_with_audit(model, state).map(|(s, a, _)| (s, a)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Coupled => "coupled",
            SchemeKind::Componentwise => "componentwise",
        }
    }
}
