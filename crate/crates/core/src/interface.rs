//! Influence parameters of the gradient free energy and the gradient
//! contribution to the chemical potential.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::{face_dot, grad_cc, laplacian, CellField, StaggeredGrid};
use crate::thermo::{pure_params, ComponentSpec, MixtureSpec};

/// Symmetric matrix of influence parameters [J m^5/mol^2] with the
/// cross-term reduction factors used to build it.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMatrix {
    pub c: DMatrix<f64>,
    pub beta: DMatrix<f64>,
}

/// `beta_ij = 0.5` off the diagonal.
pub fn default_beta(m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |i, j| if i == j { 0.0 } else { 0.5 })
}

/// Pure-component influence parameter at temperature `t`.
pub fn influence_coefficient(c: &ComponentSpec, t: f64) -> Result<f64> {
    let p = pure_params(c, t)?;
    let w = c.acentric;
    let gamma = -1e-16 / (1.2326 + 1.3757 * w);
    let phi = 1e-16 / (0.9051 + 1.5410 * w);
    let value = p.a * p.b.powf(2.0 / 3.0) * (gamma * (1.0 - t / c.t_crit) + phi);
    if !(value > 0.0) {
        return Err(Error::Domain(format!(
            "influence parameter of {} is {value:.3e} at T = {t} K (must be positive)",
            c.name
        )));
    }
    Ok(value)
}

pub fn influence_matrix(spec: &MixtureSpec, beta: &DMatrix<f64>) -> Result<InfluenceMatrix> {
    let m = spec.len();
    if beta.nrows() != m || beta.ncols() != m {
        return Err(Error::Shape(format!("beta is {}x{}, mixture has {m} components", beta.nrows(), beta.ncols())));
    }
    for i in 0..m {
        if beta[(i, i)] != 0.0 {
            return Err(Error::Domain(format!("beta[{i}][{i}] must be 0")));
        }
        for j in 0..m {
            let b = beta[(i, j)];
            if b != beta[(j, i)] {
                return Err(Error::Domain(format!("beta must be symmetric ({i},{j})")));
            }
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Domain(format!("beta[{i}][{j}] = {b} outside [0, 1)")));
            }
        }
    }
    let ci = spec
        .components
        .iter()
        .map(|c| influence_coefficient(c, spec.temperature))
        .collect::<Result<Vec<_>>>()?;
    let c = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            ci[i]
        } else {
            (1.0 - beta[(i, j)]) * (ci[i] * ci[j]).sqrt()
        }
    });
    Ok(InfluenceMatrix { c, beta: beta.clone() })
}

impl InfluenceMatrix {
    /// Wraps a given coefficient matrix; diagonal entries may be zero.
    pub fn from_coefficients(c: DMatrix<f64>) -> Result<Self> {
        let m = c.nrows();
        if c.ncols() != m {
            return Err(Error::Shape("influence matrix must be square".into()));
        }
        for i in 0..m {
            if !(c[(i, i)] >= 0.0) {
                return Err(Error::Domain(format!("c[{i}][{i}] must be non-negative")));
            }
            for j in 0..i {
                if c[(i, j)] != c[(j, i)] {
                    return Err(Error::Domain(format!("influence matrix not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self {
            c,
            beta: DMatrix::zeros(m, m),
        })
    }

    pub fn len(&self) -> usize {
        self.c.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.c.nrows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.c[(i, j)]
    }

    pub fn eigenvalue_range(&self) -> (f64, f64) {
        let e = self.c.clone().symmetric_eigen().eigenvalues;
        (e.min(), e.max())
    }

    /// `min eigenvalue >= -1e-12 * max |eigenvalue|`.
    pub fn is_positive_semidefinite(&self) -> bool {
        let (lo, hi) = self.eigenvalue_range();
        lo >= -1e-12 * hi.abs().max(lo.abs())
    }
}

fn check_fields(c: &InfluenceMatrix, n: &[CellField]) -> Result<()> {
    if n.len() != c.len() {
        return Err(Error::Shape(format!("{} fields for {} components", n.len(), c.len())));
    }
    Ok(())
}

/// `1/2 sum_f w_f sum_ij c_ij (grad n_i)(grad n_j)` [J per unit depth].
pub fn gradient_energy(c: &InfluenceMatrix, n: &[CellField], grid: &StaggeredGrid) -> Result<f64> {
    check_fields(c, n)?;
    let grads = n.iter().map(|f| grad_cc(f, grid)).collect::<Result<Vec<_>>>()?;
    let m = n.len();
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            let cij = c.get(i, j);
            if cij != 0.0 {
                total += cij * face_dot(grid, &grads[i], &grads[j]);
            }
        }
    }
    Ok(0.5 * total)
}

/// `-sum_j c_ij L n_j` per component.
pub fn gradient_chem_potential(c: &InfluenceMatrix, n: &[CellField], grid: &StaggeredGrid) -> Result<Vec<CellField>> {
    check_fields(c, n)?;
    let laps = n.iter().map(|f| laplacian(f, grid)).collect::<Result<Vec<_>>>()?;
    let m = n.len();
    Ok((0..m)
        .map(|i| {
            let mut out = CellField::zeros(grid);
            for (j, lap) in laps.iter().enumerate() {
                let cij = c.get(i, j);
                if cij != 0.0 {
                    for (o, l) in out.data.iter_mut().zip(&lap.data) {
                        *o -= cij * l;
                    }
                }
            }
            out
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{cell_dot, Boundary};
    use crate::thermo::component_by_name;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn mix(names: &[&str], t: f64) -> MixtureSpec {
        let comps = names.iter().map(|n| component_by_name(n).unwrap()).collect();
        MixtureSpec::ideal_mixing(comps, t).unwrap()
    }

    #[test]
    fn methane_influence_parameter() {
        let c = influence_coefficient(&component_by_name("methane").unwrap(), 310.0).unwrap();
        assert_relative_eq!(c, 2.823_206_972_086_099e-20, max_relative = 1e-12);
    }

    #[test]
    fn table_species_at_both_temperatures() {
        let cases = [
            (310.0, ["methane", "pentane", "decane"], [2.823_206_972_086_099e-20, 3.018_811_881_648_862_4e-19, 1.105_031_466_411_533_8e-18]),
            (323.0, ["methane", "pentane", "decane"], [2.853_016_181_531_704e-20, 3.045_383_472_592_642e-19, 1.113_697_627_758_435_2e-18]),
        ];
        for (t, names, expect) in cases {
            for (n, e) in names.iter().zip(expect) {
                let c = influence_coefficient(&component_by_name(n).unwrap(), t).unwrap();
                assert_relative_eq!(c, e, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn cross_terms() {
        let spec = mix(&["methane", "pentane"], 310.0);
        let plain = influence_matrix(&spec, &DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(plain.get(0, 1), (plain.get(0, 0) * plain.get(1, 1)).sqrt());
        let half = influence_matrix(&spec, &default_beta(2)).unwrap();
        assert_eq!(half.get(0, 1), 0.5 * (half.get(0, 0) * half.get(1, 1)).sqrt());
        assert_eq!(half.get(0, 1), half.get(1, 0));
    }

    #[test]
    fn negative_correlation_is_rejected_by_name() {
        // a very large acentric factor far below the critical point drives the bracket negative
        let heavy = ComponentSpec::new("heavy", 1.5e6, 600.0, 3.0, 0.3).unwrap();
        let spec = MixtureSpec::ideal_mixing(vec![heavy], 5.0).unwrap();
        let err = influence_matrix(&spec, &DMatrix::zeros(1, 1)).unwrap_err();
        assert!(err.to_string().contains("heavy"), "{err}");
    }

    #[test]
    fn invalid_beta_is_rejected() {
        let spec = mix(&["methane", "pentane"], 310.0);
        let mut b = default_beta(2);
        b[(0, 1)] = 1.0;
        b[(1, 0)] = 1.0;
        assert!(influence_matrix(&spec, &b).is_err());
    }

    #[test]
    fn preset_mixtures_are_psd() {
        for (names, t) in [(&["methane", "pentane"][..], 310.0), (&["methane", "pentane", "decane"][..], 323.0)] {
            let c = influence_matrix(&mix(names, t), &default_beta(names.len())).unwrap();
            assert!(c.is_positive_semidefinite());
        }
    }

    #[test]
    fn uniform_fields_carry_no_gradient_terms() {
        let g = StaggeredGrid::new(5, 4, 1.0, 1.0, Boundary::NoFluxNoSlip).unwrap();
        let c = InfluenceMatrix::from_coefficients(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap();
        let n = vec![CellField::constant(&g, 3.0), CellField::constant(&g, 7.0)];
        assert_eq!(gradient_energy(&c, &n, &g).unwrap(), 0.0);
        assert!(gradient_chem_potential(&c, &n, &g).unwrap().iter().all(|f| f.max_abs() == 0.0));
    }

    #[test]
    fn ramp_energy_by_hand() {
        let g = StaggeredGrid::new(4, 4, 2.0, 2.0, Boundary::Periodic).unwrap();
        let c = InfluenceMatrix::from_coefficients(DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.5])).unwrap();
        let (s1, s2) = (1.5, -0.75);
        let n = vec![
            CellField::from_fn(&g, |i, _| s1 * g.cell_center(i, 0).0),
            CellField::from_fn(&g, |i, _| s2 * g.cell_center(i, 0).0),
        ];
        let quad = 2.0 * s1 * s1 + 2.0 * 0.3 * s1 * s2 + 1.5 * s2 * s2;
        // 3 interior columns with unit slope factor, one wrap column with factor -(nx-1)
        let columns = 3.0 + 9.0;
        let expected = 0.5 * quad * columns * g.ny as f64 * g.cell_volume();
        assert_relative_eq!(gradient_energy(&c, &n, &g).unwrap(), expected, max_relative = 1e-13);
    }

    #[test]
    fn single_component_energy_is_non_negative() {
        let g = StaggeredGrid::new(6, 5, 1.0, 1.0, Boundary::NoFluxNoSlip).unwrap();
        let c = InfluenceMatrix::from_coefficients(DMatrix::from_element(1, 1, 3e-20)).unwrap();
        let n = vec![CellField::from_fn(&g, |i, j| ((i * 5 + j * 3) % 7) as f64 * 100.0)];
        assert!(gradient_energy(&c, &n, &g).unwrap() > 0.0);
    }

    #[test]
    fn fourier_mode_potential() {
        let g = StaggeredGrid::new(8, 8, 1.0, 1.0, Boundary::Periodic).unwrap();
        let c = InfluenceMatrix::from_coefficients(DMatrix::from_element(1, 1, 0.4)).unwrap();
        let n = vec![CellField::from_fn(&g, |i, j| {
            let (x, y) = g.cell_center(i, j);
            (2.0 * PI * (x + 2.0 * y)).sin()
        })];
        let symbol = -(2.0 / g.hx().powi(2)) * (1.0 - (2.0 * PI * g.hx()).cos())
            - (2.0 / g.hy().powi(2)) * (1.0 - (2.0 * PI * 2.0 * g.hy()).cos());
        let mu = &gradient_chem_potential(&c, &n, &g).unwrap()[0];
        for (m, v) in mu.data.iter().zip(&n[0].data) {
            assert!((m + 0.4 * symbol * v).abs() < 1e-10 * symbol.abs());
        }
    }

    #[test]
    fn diagonal_coefficients_decouple() {
        let g = StaggeredGrid::new(4, 4, 1.0, 1.0, Boundary::Periodic).unwrap();
        let c = InfluenceMatrix::from_coefficients(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0])).unwrap();
        let a = CellField::from_fn(&g, |i, j| (i * j) as f64);
        let b1 = CellField::from_fn(&g, |i, _| i as f64);
        let b2 = CellField::from_fn(&g, |_, j| j as f64 * 3.0);
        let r1 = gradient_chem_potential(&c, &[a.clone(), b1], &g).unwrap();
        let r2 = gradient_chem_potential(&c, &[a, b2], &g).unwrap();
        assert_eq!(r1[0], r2[0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn shift_invariance_and_summation_by_parts(
            seed in prop::collection::vec(-1.0f64..1.0, 64),
            shift in -10.0f64..10.0,
        ) {
            let g = StaggeredGrid::new(6, 5, 1.0, 1.0, Boundary::Periodic).unwrap();
            let c = InfluenceMatrix::from_coefficients(DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 0.8])).unwrap();
            let q = CellField::from_fn(&g, |i, j| seed[(i * 7 + j * 11) % 64]);
            let r = CellField::from_fn(&g, |i, j| seed[(i * 3 + j * 5 + 13) % 64]);
            let e0 = gradient_energy(&c, &[q.clone(), r.clone()], &g).unwrap();
            let e1 = gradient_energy(&c, &[q.map(|v| v + shift), r.clone()], &g).unwrap();
            prop_assert!((e0 - e1).abs() <= 1e-12 * e0.abs());

            let lhs = -cell_dot(&g, &q, &laplacian(&r, &g).unwrap());
            let rhs = face_dot(&g, &grad_cc(&q, &g).unwrap(), &grad_cc(&r, &g).unwrap());
            prop_assert!((lhs - rhs).abs() <= 1e-13 * rhs.abs().max(1e-300) + 1e-14);
        }
    }
}
