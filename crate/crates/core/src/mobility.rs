//! Diffusion mobility tensors and the face diffusion fluxes they produce.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::{face_interp, grad_cc, CellField, FaceField, StaggeredGrid};
use crate::thermo::{MixtureSpec, GAS_CONSTANT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MobilityKind {
    /// Independent Fickian diffusion per component.
    Diagonal,
    /// Maxwell-Stefan-type tensor conserving total moles.
    MolarAverage,
    /// Maxwell-Stefan-type tensor conserving total mass.
    MassAverage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilitySpec {
    pub kind: MobilityKind,
    /// Per-component diffusivities [m^2/s], used by `Diagonal`.
    pub d_i: Vec<f64>,
    /// Pair diffusivities [m^2/s], used by the averaged kinds.
    pub d_ij: DMatrix<f64>,
}

impl MobilitySpec {
    pub fn diagonal(d_i: Vec<f64>) -> Result<Self> {
        if let Some((i, d)) = d_i.iter().enumerate().find(|(_, d)| !(**d > 0.0 && d.is_finite())) {
            return Err(Error::config(format!("mobility.d_i[{i}]"), format!("diffusivity must be positive, got {d}")));
        }
        let m = d_i.len();
        Ok(Self {
            kind: MobilityKind::Diagonal,
            d_i,
            d_ij: DMatrix::zeros(m, m),
        })
    }

    pub fn molar_average(d_ij: DMatrix<f64>) -> Result<Self> {
        Self::pairwise(MobilityKind::MolarAverage, d_ij)
    }

    pub fn mass_average(d_ij: DMatrix<f64>) -> Result<Self> {
        Self::pairwise(MobilityKind::MassAverage, d_ij)
    }

    fn pairwise(kind: MobilityKind, d_ij: DMatrix<f64>) -> Result<Self> {
        let m = d_ij.nrows();
        if d_ij.ncols() != m {
            return Err(Error::config("mobility.d_ij", "pair diffusivity matrix must be square"));
        }
        for i in 0..m {
            if d_ij[(i, i)] != 0.0 {
                return Err(Error::config(format!("mobility.d_ij[{i}][{i}]"), "diagonal must be 0"));
            }
            for j in 0..m {
                if i != j {
                    let d = d_ij[(i, j)];
                    if d != d_ij[(j, i)] {
                        return Err(Error::config(format!("mobility.d_ij[{i}][{j}]"), "matrix must be symmetric"));
                    }
                    if !(d > 0.0 && d.is_finite()) {
                        return Err(Error::config(
                            format!("mobility.d_ij[{i}][{j}]"),
                            format!("diffusivity must be positive, got {d}"),
                        ));
                    }
                }
            }
        }
        Ok(Self {
            kind,
            d_i: vec![0.0; m],
            d_ij,
        })
    }

    pub fn len(&self) -> usize {
        self.d_ij.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_diagonal(&self) -> bool {
        self.kind == MobilityKind::Diagonal
    }
}

/// Mobility matrix at one point [mol^2 s/(kg m^3)].
pub fn mobility_matrix(spec: &MobilitySpec, mix: &MixtureSpec, n: &[f64]) -> Result<DMatrix<f64>> {
    let m = mix.len();
    if spec.len() != m || n.len() != m {
        return Err(Error::Shape(format!(
            "mobility for {} components, mixture {m}, state {}",
            spec.len(),
            n.len()
        )));
    }
    if n.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Domain(format!("mobility needs non-negative densities, got {n:?}")));
    }
    let rt = GAS_CONSTANT * mix.temperature;
    let mut out = DMatrix::zeros(m, m);
    match spec.kind {
        MobilityKind::Diagonal => {
            for i in 0..m {
                out[(i, i)] = spec.d_i[i] * n[i] / rt;
            }
        }
        MobilityKind::MolarAverage => {
            let total: f64 = n.iter().sum();
            if total > 0.0 {
                for i in 0..m {
                    for j in (i + 1)..m {
                        let v = spec.d_ij[(i, j)] * n[i] * n[j] / (total * rt);
                        out[(i, j)] = -v;
                        out[(j, i)] = -v;
                        out[(i, i)] += v;
                        out[(j, j)] += v;
                    }
                }
            }
        }
        MobilityKind::MassAverage => {
            let mw = mix.molar_weights();
            let rho: f64 = n.iter().zip(&mw).map(|(a, b)| a * b).sum();
            if rho > 0.0 {
                for i in 0..m {
                    for j in (i + 1)..m {
                        let d = spec.d_ij[(i, j)];
                        let v = d * n[i] * n[j] / (rho * rt);
                        out[(i, j)] = -v;
                        out[(j, i)] = -v;
                        out[(i, i)] += v * mw[j] / mw[i];
                        out[(j, j)] += v * mw[i] / mw[j];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Mobility entries on faces: arithmetic mean of the adjacent cell matrices,
/// zero on walled boundary faces.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceMobility {
    m: usize,
    entries: Vec<FaceField>,
}

impl FaceMobility {
    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn get(&self, i: usize, j: usize) -> &FaceField {
        &self.entries[i * self.m + j]
    }
}

pub fn face_mobility(
    spec: &MobilitySpec,
    mix: &MixtureSpec,
    n: &[CellField],
    grid: &StaggeredGrid,
) -> Result<FaceMobility> {
    let m = mix.len();
    if n.len() != m {
        return Err(Error::Shape(format!("{} density fields for {m} components", n.len())));
    }
    let mut cells = vec![CellField::zeros(grid); m * m];
    let mut point = vec![0.0; m];
    for c in 0..grid.n_cells() {
        for (p, f) in point.iter_mut().zip(n) {
            *p = f.data[c];
        }
        let mat = mobility_matrix(spec, mix, &point)?;
        for i in 0..m {
            for j in 0..m {
                cells[i * m + j].data[c] = mat[(i, j)];
            }
        }
    }
    let mask = grid.flux_mask();
    let entries = cells
        .iter()
        .map(|f| Ok(face_interp(f, grid)?.zip_map(&mask, |a, b| a * b)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FaceMobility { m, entries })
}

/// `J_i = -sum_j M_ij grad mu_j` with precomputed face mobilities.
pub fn flux_from_potentials(mob: &FaceMobility, mu: &[CellField], grid: &StaggeredGrid) -> Result<Vec<FaceField>> {
    if mu.len() != mob.len() {
        return Err(Error::Shape(format!("{} potentials for {} components", mu.len(), mob.len())));
    }
    let grads = mu.iter().map(|f| grad_cc(f, grid)).collect::<Result<Vec<_>>>()?;
    Ok((0..mob.len())
        .map(|i| {
            let mut j_i = FaceField::zeros(grid);
            for (j, g) in grads.iter().enumerate() {
                let mij = mob.get(i, j);
                j_i.axpy(-1.0, &mij.zip_map(g, |a, b| a * b));
            }
            j_i
        })
        .collect())
}

pub fn diffusion_flux(
    spec: &MobilitySpec,
    mix: &MixtureSpec,
    n: &[CellField],
    mu: &[CellField],
    grid: &StaggeredGrid,
) -> Result<Vec<FaceField>> {
    flux_from_potentials(&face_mobility(spec, mix, n, grid)?, mu, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Boundary;
    use crate::thermo::component_by_name;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn mix(names: &[&str], t: f64) -> MixtureSpec {
        let comps = names.iter().map(|n| component_by_name(n).unwrap()).collect();
        MixtureSpec::ideal_mixing(comps, t).unwrap()
    }

    fn pair(m: usize, d: f64) -> DMatrix<f64> {
        DMatrix::from_fn(m, m, |i, j| if i == j { 0.0 } else { d * (1.0 + 0.1 * (i + j) as f64) })
    }

    #[test]
    fn single_component_diagonal_value() {
        let spec = MobilitySpec::diagonal(vec![1e-8]).unwrap();
        let m = mobility_matrix(&spec, &mix(&["methane"], 310.0), &[1000.0]).unwrap();
        assert_relative_eq!(m[(0, 0)], 3.879_754_703_502_088_6e-9, max_relative = 1e-14);
        assert_relative_eq!(m[(0, 0)], 1e-8 * 1000.0 / (GAS_CONSTANT * 310.0), max_relative = 1e-15);
    }

    #[test]
    fn invalid_coefficients() {
        assert!(MobilitySpec::diagonal(vec![1e-8, 0.0]).is_err());
        let mut d = pair(2, 1e-8);
        d[(0, 1)] = 2e-8;
        assert!(MobilitySpec::molar_average(d).is_err());
    }

    #[test]
    fn absent_species_have_no_mobility() {
        let mx = mix(&["methane", "pentane"], 310.0);
        for spec in [
            MobilitySpec::diagonal(vec![1e-8, 1e-8]).unwrap(),
            MobilitySpec::molar_average(pair(2, 1e-8)).unwrap(),
            MobilitySpec::mass_average(pair(2, 1e-8)).unwrap(),
        ] {
            let m = mobility_matrix(&spec, &mx, &[0.0, 0.0]).unwrap();
            assert!(m.iter().all(|v| *v == 0.0));
            let m = mobility_matrix(&spec, &mx, &[0.0, 500.0]).unwrap();
            assert!(m.row(0).iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn uniform_potential_has_no_flux() {
        let g = StaggeredGrid::new(4, 3, 1.0, 1.0, Boundary::NoFluxNoSlip).unwrap();
        let mx = mix(&["methane", "pentane"], 310.0);
        let spec = MobilitySpec::molar_average(pair(2, 1e-8)).unwrap();
        let n = vec![
            CellField::from_fn(&g, |i, j| 100.0 + (i * j) as f64),
            CellField::from_fn(&g, |i, _| 50.0 + i as f64),
        ];
        let mu = vec![CellField::constant(&g, 3.0), CellField::constant(&g, -1.0)];
        let j = diffusion_flux(&spec, &mx, &n, &mu, &g).unwrap();
        assert!(j.iter().all(|f| f.max_abs() == 0.0));
    }

    #[test]
    fn diagonal_flux_decouples() {
        let g = StaggeredGrid::new(4, 4, 1.0, 1.0, Boundary::Periodic).unwrap();
        let mx = mix(&["methane", "pentane"], 310.0);
        let spec = MobilitySpec::diagonal(vec![1e-8, 2e-8]).unwrap();
        let n = vec![CellField::constant(&g, 100.0), CellField::constant(&g, 300.0)];
        let mu0 = CellField::from_fn(&g, |i, j| (i + 2 * j) as f64);
        let a = diffusion_flux(&spec, &mx, &n, &[mu0.clone(), CellField::zeros(&g)], &g).unwrap();
        let b = diffusion_flux(&spec, &mx, &n, &[mu0, CellField::from_fn(&g, |i, _| i as f64)], &g).unwrap();
        assert_eq!(a[0], b[0]);
    }

    #[test]
    fn two_cell_jump() {
        let g = StaggeredGrid::new(2, 2, 2e-9, 2e-9, Boundary::NoFluxNoSlip).unwrap();
        let mx = mix(&["methane"], 310.0);
        let spec = MobilitySpec::diagonal(vec![1e-8]).unwrap();
        let n = vec![CellField::constant(&g, 1000.0)];
        let mu = vec![CellField::from_vec(&g, vec![10.0, 25.0, 10.0, 25.0]).unwrap()];
        let j = diffusion_flux(&spec, &mx, &n, &mu, &g).unwrap();
        let expected = -(1e-8 * 1000.0 / (GAS_CONSTANT * 310.0)) * 15.0 / g.hx();
        assert_relative_eq!(j[0].x[g.xface(1, 0)], expected, max_relative = 1e-14);
        assert_eq!(j[0].x[g.xface(0, 0)], 0.0);
        assert_eq!(j[0].x[g.xface(2, 1)], 0.0);
    }

    fn state() -> impl Strategy<Value = (usize, Vec<f64>)> {
        (1usize..=3).prop_flat_map(|m| (Just(m), prop::collection::vec(0.0f64..15000.0, m)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn symmetric_psd_with_conservation_kernels((m, n) in state(), t in 280.0f64..400.0) {
            let names = ["methane", "pentane", "decane"];
            let mx = mix(&names[..m], t);
            let mw = mx.molar_weights();
            for spec in [
                MobilitySpec::diagonal((0..m).map(|i| 1e-8 * (1.0 + i as f64)).collect()).unwrap(),
                MobilitySpec::molar_average(pair(m, 1e-8)).unwrap(),
                MobilitySpec::mass_average(pair(m, 1e-8)).unwrap(),
            ] {
                let mat = mobility_matrix(&spec, &mx, &n).unwrap();
                prop_assert_eq!(&mat, &mat.transpose());
                let eig = mat.clone().symmetric_eigen().eigenvalues;
                let top = eig.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                prop_assert!(eig.min() >= -1e-12 * top);
                let scale = mat.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                match spec.kind {
                    MobilityKind::MolarAverage => {
                        let r = &mat * nalgebra::DVector::from_element(m, 1.0);
                        prop_assert!(r.amax() <= 1e-12 * scale.max(1e-300));
                    }
                    MobilityKind::MassAverage => {
                        let w = nalgebra::DVector::from_vec(mw.clone());
                        let r = &mat * &w;
                        prop_assert!(r.amax() <= 1e-12 * scale.max(1e-300) * w.amax());
                    }
                    MobilityKind::Diagonal => {}
                }
            }
        }
    }
}
