//! Peng-Robinson bulk thermodynamics in the NVT (moles, volume, temperature)
//! setting: Helmholtz free-energy density `f_b(n)`, bulk chemical potentials
//! `mu_i = df_b/dn_i` and the bulk pressure `p_b = sum n_i mu_i - f_b`.
//!
//! All quantities are SI: densities in mol/m^3, energy densities in J/m^3,
//! chemical potentials in J/mol, pressures in Pa.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Universal gas constant [J/(mol K)].
pub const GAS_CONSTANT: f64 = 8.3144598;

/// Largest admissible packing fraction `b * n` before the repulsion log blows up.
pub const MAX_PACKING: f64 = 1.0 - 1e-12;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// One row of the component database.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSpec {
    pub name: String,
    /// Critical pressure [Pa].
    pub p_crit: f64,
    /// Critical temperature [K].
    pub t_crit: f64,
    /// Acentric factor.
    pub acentric: f64,
    /// Molar weight [kg/mol].
    pub molar_weight: f64,
}

impl ComponentSpec {
    pub fn new(
        name: impl Into<String>,
        p_crit: f64,
        t_crit: f64,
        acentric: f64,
        molar_weight: f64,
    ) -> Result<Self> {
        let name = name.into();
        for (label, v) in [
            ("p_crit", p_crit),
            ("t_crit", t_crit),
            ("molar_weight", molar_weight),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!(
                    "component `{name}`: {label} must be positive, got {v}"
                )));
            }
        }
        if !acentric.is_finite() {
            return Err(Error::Domain(format!(
                "component `{name}`: acentric factor must be finite"
            )));
        }
        Ok(Self {
            name,
            p_crit,
            t_crit,
            acentric,
            molar_weight,
        })
    }
}

/// Methane, n-pentane and n-decane with SI units.
pub fn builtin_components() -> Vec<ComponentSpec> {
    let row = |name: &str, p_bar: f64, t_k: f64, w: f64, mw_g: f64| ComponentSpec {
        name: name.to_string(),
        p_crit: p_bar * 1e5,
        t_crit: t_k,
        acentric: w,
        molar_weight: mw_g * 1e-3,
    };
    vec![
        row("methane", 45.99, 190.56, 0.011, 16.04),
        row("pentane", 33.70, 469.7, 0.251, 72.15),
        row("decane", 21.1, 617.7, 0.489, 142.28),
    ]
}

/// Looks up a built-in component by name (`methane`/`c1`, `pentane`/`c5`,
/// `decane`/`c10`, case-insensitive).
pub fn component_by_name(name: &str) -> Option<ComponentSpec> {
    let key = match name.to_ascii_lowercase().as_str() {
        "methane" | "c1" | "ch4" => "methane",
        "pentane" | "n-pentane" | "c5" | "nc5" => "pentane",
        "decane" | "n-decane" | "c10" | "nc10" => "decane",
        _ => return None,
    };
    builtin_components().into_iter().find(|c| c.name == key)
}

/// Component list, EOS binary interaction coefficients and temperature.
#[derive(Debug, Clone)]
pub struct MixtureSpec {
    pub components: Vec<ComponentSpec>,
    pub k_ij: DMatrix<f64>,
    pub temperature: f64,
}

impl MixtureSpec {
    pub fn new(components: Vec<ComponentSpec>, k_ij: DMatrix<f64>, temperature: f64) -> Result<Self> {
        let m = components.len();
        if m == 0 {
            return Err(Error::Domain("mixture needs at least one component".into()));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::Domain(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        if k_ij.nrows() != m || k_ij.ncols() != m {
            return Err(Error::Shape(format!(
                "k_ij is {}x{}, expected {m}x{m}",
                k_ij.nrows(),
                k_ij.ncols()
            )));
        }
        for i in 0..m {
            if k_ij[(i, i)] != 0.0 {
                return Err(Error::Domain(format!("k_ij diagonal ({i},{i}) must be zero")));
            }
            for j in 0..i {
                if k_ij[(i, j)] != k_ij[(j, i)] {
                    return Err(Error::Domain(format!("k_ij must be symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self {
            components,
            k_ij,
            temperature,
        })
    }

    /// Mixture with all binary interaction coefficients set to zero.
    pub fn ideal_mixing(components: Vec<ComponentSpec>, temperature: f64) -> Result<Self> {
        let m = components.len();
        Self::new(components, DMatrix::zeros(m, m), temperature)
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn molar_weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.molar_weight).collect()
    }

    /// Pre-computes the per-component parameters for repeated evaluation.
    pub fn eos(&self) -> Result<PengRobinson> {
        PengRobinson::new(self)
    }
}

/// Pure-component Peng-Robinson parameters at a fixed temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureParams {
    /// Attraction parameter [Pa m^6/mol^2].
    pub a: f64,
    /// Covolume [m^3/mol].
    pub b: f64,
    /// Slope of the alpha-function in `sqrt(T_r)`.
    pub m: f64,
}

/// `m_i` from the acentric factor; the cubic fit applies above 0.49.
pub fn alpha_slope(acentric: f64) -> f64 {
    let w = acentric;
    if w <= 0.49 {
        0.37464 + 1.54226 * w - 0.26992 * w * w
    } else {
        0.379642 + 1.485030 * w - 0.164423 * w * w + 0.016666 * w * w * w
    }
}

pub fn pure_params(c: &ComponentSpec, temperature: f64) -> Result<PureParams> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::Domain(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if !(c.p_crit > 0.0 && c.t_crit > 0.0) {
        return Err(Error::Domain(format!(
            "component `{}` has non-positive critical constants",
            c.name
        )));
    }
    let r = GAS_CONSTANT;
    let m = alpha_slope(c.acentric);
    let sqrt_tr = (temperature / c.t_crit).sqrt();
    let alpha = 1.0 + m * (1.0 - sqrt_tr);
    let a = 0.45724 * r * r * c.t_crit * c.t_crit / c.p_crit * alpha * alpha;
    let b = 0.07780 * r * c.t_crit / c.p_crit;
    Ok(PureParams { a, b, m })
}

/// Mixture `a` and `b` from the van der Waals one-fluid mixing rules.
pub fn mixture_params(spec: &MixtureSpec, n: &[f64]) -> Result<(f64, f64)> {
    let eos = spec.eos()?;
    eos.mixture_params(n)
}

pub fn helmholtz_bulk(spec: &MixtureSpec, n: &[f64]) -> Result<f64> {
    Ok(spec.eos()?.evaluate(n)?.f_b)
}

pub fn chemical_potential_bulk(spec: &MixtureSpec, n: &[f64]) -> Result<Vec<f64>> {
    Ok(spec.eos()?.evaluate(n)?.mu_b)
}

pub fn pressure_bulk(spec: &MixtureSpec, n: &[f64]) -> Result<f64> {
    Ok(spec.eos()?.evaluate(n)?.p_b)
}

/// Bulk free energy density, chemical potentials and pressure at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct BulkEosEval {
    pub f_b: f64,
    pub mu_b: Vec<f64>,
    pub p_b: f64,
}

/// Peng-Robinson model with per-component parameters frozen at one temperature.
#[derive(Debug, Clone)]
pub struct PengRobinson {
    rt: f64,
    a: Vec<f64>,
    b: Vec<f64>,
    /// `sqrt(a_i a_j) (1 - k_ij)`, row-major.
    a_cross: Vec<f64>,
}

impl PengRobinson {
    pub fn new(spec: &MixtureSpec) -> Result<Self> {
        let params = spec
            .components
            .iter()
            .map(|c| pure_params(c, spec.temperature))
            .collect::<Result<Vec<_>>>()?;
        let a: Vec<f64> = params.iter().map(|p| p.a).collect();
        let b: Vec<f64> = params.iter().map(|p| p.b).collect();
        Self::from_parameters(spec.temperature, a, b, &spec.k_ij)
    }

    /// Builds the model from explicit `a_i`, `b_i`. Zero values are allowed,
    /// which reduces the model to an ideal gas.
    pub fn from_parameters(temperature: f64, a: Vec<f64>, b: Vec<f64>, k_ij: &DMatrix<f64>) -> Result<Self> {
        let m = a.len();
        if b.len() != m || k_ij.nrows() != m || k_ij.ncols() != m {
            return Err(Error::Shape("a, b and k_ij must share the component count".into()));
        }
        if a.iter().chain(b.iter()).any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::Domain("a_i and b_i must be finite and non-negative".into()));
        }
        let mut a_cross = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                a_cross[i * m + j] = (a[i] * a[j]).sqrt() * (1.0 - k_ij[(i, j)]);
            }
        }
        Ok(Self {
            rt: GAS_CONSTANT * temperature,
            a,
            b,
            a_cross,
        })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn rt(&self) -> f64 {
        self.rt
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn mixture_params(&self, n: &[f64]) -> Result<(f64, f64)> {
        self.check_len(n)?;
        if n.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::Domain("molar densities must be finite and non-negative".into()));
        }
        let total: f64 = n.iter().sum();
        if total <= 0.0 {
            return Err(Error::Domain(
                "mole fractions undefined for an all-zero density vector".into(),
            ));
        }
        let (a_hat, bn) = self.quadratic_terms(n);
        Ok((a_hat / (total * total), bn / total))
    }

    /// Free energy density, chemical potentials and pressure in one pass.
    pub fn evaluate(&self, n: &[f64]) -> Result<BulkEosEval> {
        self.check_len(n)?;
        if let Some((i, v)) = n.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!(
                "molar density of component {i} must be positive, got {v}"
            )));
        }
        let m = self.len();
        let rt = self.rt;
        let total: f64 = n.iter().sum();
        // a_hat = a n^2 (quadratic in n), bn = b n (linear in n)
        let (a_hat, bn) = self.quadratic_terms(n);
        if !(bn <= MAX_PACKING) {
            return Err(Error::Covolume { bn });
        }
        let (g, dg) = attraction_shape(bn);
        let log_free = (-bn).ln_1p();

        let ideal: f64 = n.iter().map(|ni| ni * (ni.ln() - 1.0)).sum::<f64>() * rt;
        let repulsion = -total * rt * log_free;
        let attraction = a_hat * g;
        let f_b = ideal + repulsion + attraction;

        let mut mu_b = Vec::with_capacity(m);
        for i in 0..m {
            let da_hat: f64 = 2.0
                * (0..m)
                    .map(|j| self.a_cross[i * m + j] * n[j])
                    .sum::<f64>();
            let mu = rt * n[i].ln() - rt * log_free
                + total * rt * self.b[i] / (1.0 - bn)
                + da_hat * g
                + a_hat * dg * self.b[i];
            mu_b.push(mu);
        }
        let p_b = n.iter().zip(&mu_b).map(|(ni, mi)| ni * mi).sum::<f64>() - f_b;
        Ok(BulkEosEval { f_b, mu_b, p_b })
    }

    /// The textbook Peng-Robinson pressure `nRT/(1-bn) - a n^2/(1+2bn-(bn)^2)`.
    pub fn pressure_closed_form(&self, n: &[f64]) -> Result<f64> {
        self.check_len(n)?;
        let total: f64 = n.iter().sum();
        let (a_hat, bn) = self.quadratic_terms(n);
        if !(bn <= MAX_PACKING) {
            return Err(Error::Covolume { bn });
        }
        Ok(total * self.rt / (1.0 - bn) - a_hat / (1.0 + 2.0 * bn - bn * bn))
    }

    fn quadratic_terms(&self, n: &[f64]) -> (f64, f64) {
        let m = self.len();
        let mut a_hat = 0.0;
        for i in 0..m {
            for j in 0..m {
                a_hat += n[i] * n[j] * self.a_cross[i * m + j];
            }
        }
        let bn = n.iter().zip(&self.b).map(|(ni, bi)| ni * bi).sum();
        (a_hat, bn)
    }

    fn check_len(&self, n: &[f64]) -> Result<()> {
        if n.len() != self.len() {
            return Err(Error::Shape(format!(
                "density vector has {} entries, mixture has {}",
                n.len(),
                self.len()
            )));
        }
        Ok(())
    }
}

/// `g(B) = ln[(1+(1-sqrt2)B)/(1+(1+sqrt2)B)] / (2 sqrt2 B)` and `g'(B)`,
/// with a series branch near `B = 0` where the closed form cancels.
fn attraction_shape(bn: f64) -> (f64, f64) {
    if bn < 1e-6 {
        let g = -1.0 + bn - 5.0 / 3.0 * bn * bn;
        let dg = 1.0 - 10.0 / 3.0 * bn;
        return (g, dg);
    }
    let psi = ((1.0 - SQRT2) * bn).ln_1p() - ((1.0 + SQRT2) * bn).ln_1p();
    let g = psi / (2.0 * SQRT2 * bn);
    let dg = -1.0 / (bn * (1.0 + 2.0 * bn - bn * bn)) - g / bn;
    (g, dg)
}
