//! Run configuration: TOML document, unit conversion, validation and the
//! built-in presets.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::interface::{default_beta, influence_matrix, InfluenceMatrix};
use crate::mesh::{Boundary, StaggeredGrid};
use crate::mobility::MobilitySpec;
use crate::scheme::{Model, SchemeConfig, SchemeKind};
use crate::sparse::SolveOptions;
use crate::thermo::{component_by_name, ComponentSpec, MixtureSpec};

const NM: f64 = 1e-9;

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 2] = ["binary_c1c5_310K", "ternary_c1c5c10_323K"];

pub fn preset_text(name: &str) -> Option<&'static str> {
    match name {
        "binary_c1c5_310K" => Some(include_str!("../presets/binary_c1c5_310K.toml")),
        "ternary_c1c5c10_323K" => Some(include_str!("../presets/ternary_c1c5c10_323K.toml")),
        _ => None,
    }
}

pub fn preset(name: &str) -> Result<RunConfig> {
    let text = preset_text(name).ok_or_else(|| {
        Error::config("--preset", format!("unknown preset `{name}`, expected one of {}", PRESETS.join(", ")))
    })?;
    RunConfig::from_toml_str(text)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scheme: SchemeKind,
    #[serde(default)]
    energy_shift_j_per_mol: Option<Vec<f64>>,
    mixture: RawMixture,
    mobility: RawMobility,
    viscosity: RawViscosity,
    grid: RawGrid,
    time: RawTime,
    initial: RawInitial,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    solver: RawSolver,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMixture {
    temperature_k: f64,
    components: Vec<RawComponent>,
    k_ij: Option<Vec<Vec<f64>>>,
    beta_ij: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawComponent {
    Named(String),
    Inline(InlineComponent),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InlineComponent {
    name: String,
    p_crit_bar: f64,
    t_crit_k: f64,
    acentric: f64,
    molar_weight_g_per_mol: f64,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawMobilityKind {
    Diagonal,
    MolarAverage,
    MassAverage,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMobility {
    kind: RawMobilityKind,
    d_i_m2_per_s: Option<Vec<f64>>,
    d_ij_m2_per_s: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawViscosity {
    bulk_pa_s: f64,
    shear_pa_s: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    nx: usize,
    ny: usize,
    lx_nm: f64,
    ly_nm: f64,
    boundary: Boundary,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    dt_s: f64,
    steps: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    background_kmol_per_m3: Option<Vec<f64>>,
    background_mol_per_m3: Option<Vec<f64>>,
    #[serde(default)]
    droplets: Vec<RawDroplet>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDroplet {
    center_nm: [f64; 2],
    size_nm: [f64; 2],
    density_kmol_per_m3: Option<Vec<f64>>,
    density_mol_per_m3: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(default = "default_dir")]
    dir: PathBuf,
    #[serde(default)]
    snapshot_every: usize,
    #[serde(default = "default_every")]
    energy_every: usize,
}

impl Default for RawOutput {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            snapshot_every: 0,
            energy_every: 1,
        }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("output")
}

fn default_every() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    #[serde(default = "default_tol")]
    tol: f64,
    max_iter: Option<usize>,
}

impl Default for RawSolver {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iter: None,
        }
    }
}

fn default_tol() -> f64 {
    SolveOptions::default().tol
}

/// Axis-aligned liquid region of the initial state, SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Droplet {
    /// Center [m].
    pub center: [f64; 2],
    /// Side lengths [m].
    pub size: [f64; 2],
    /// Interior molar densities [mol/m^3].
    pub density: Vec<f64>,
}

impl Droplet {
    /// Whether a point lies strictly inside the rectangle.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.center[0]).abs() < 0.5 * self.size[0] && (y - self.center[1]).abs() < 0.5 * self.size[1]
    }

    fn overlaps(&self, other: &Droplet) -> bool {
        (0..2).all(|d| (self.center[d] - other.center[d]).abs() < 0.5 * (self.size[d] + other.size[d]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialConfig {
    /// Gas molar densities [mol/m^3].
    pub background: Vec<f64>,
    pub droplets: Vec<Droplet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Snapshot cadence in steps; 0 disables snapshots.
    pub snapshot_every: usize,
    /// Energy-record cadence in steps; 0 records only the initial state.
    pub energy_every: usize,
}

/// A validated run description in SI units.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mixture: MixtureSpec,
    pub beta: DMatrix<f64>,
    pub scheme: SchemeKind,
    pub grid: StaggeredGrid,
    pub steps: usize,
    pub scheme_config: SchemeConfig,
    pub initial: InitialConfig,
    pub output: OutputConfig,
}

fn matrix(path: &str, rows: &[Vec<f64>], m: usize) -> Result<DMatrix<f64>> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(Error::config(path, format!("expected a {m}x{m} matrix")));
    }
    Ok(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
}

fn densities(path: &str, kmol: Option<Vec<f64>>, mol: Option<Vec<f64>>, m: usize) -> Result<Vec<f64>> {
    let (values, key) = match (kmol, mol) {
        (Some(v), None) => (v.iter().map(|x| x * 1e3).collect::<Vec<_>>(), "_kmol_per_m3"),
        (None, Some(v)) => (v, "_mol_per_m3"),
        (Some(_), Some(_)) => {
            return Err(Error::config(path, "give densities in either kmol/m^3 or mol/m^3, not both"));
        }
        (None, None) => return Err(Error::config(path, "densities missing")),
    };
    if values.len() != m {
        return Err(Error::config(
            format!("{path}{key}"),
            format!("expected {m} entries, got {}", values.len()),
        ));
    }
    if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::config(format!("{path}{key}[{i}]"), format!("density must be positive, got {v}")));
    }
    Ok(values)
}

/// Configuration errors keep their own path; anything else is reported at `path`.
fn at(path: &str, err: Error) -> Error {
    match err {
        Error::Config { path: inner, message } => Error::config(inner, message),
        other => Error::config(path, other.to_string()),
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.message().to_string()))?;
        let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().message().to_string())
        })?;
        Self::from_raw(raw)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), format!("cannot read: {e}")))?;
        Self::from_toml_str(&text)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let components = raw
            .mixture
            .components
            .into_iter()
            .enumerate()
            .map(|(i, c)| match c {
                RawComponent::Named(name) => component_by_name(&name)
                    .ok_or_else(|| Error::config(format!("mixture.components[{i}]"), format!("unknown component `{name}`"))),
                RawComponent::Inline(c) => ComponentSpec::new(
                    c.name,
                    c.p_crit_bar * 1e5,
                    c.t_crit_k,
                    c.acentric,
                    c.molar_weight_g_per_mol * 1e-3,
                )
                .map_err(|e| at(&format!("mixture.components[{i}]"), e)),
            })
            .collect::<Result<Vec<_>>>()?;
        let m = components.len();
        if m == 0 {
            return Err(Error::config("mixture.components", "at least one component is required"));
        }
        let k_ij = match &raw.mixture.k_ij {
            Some(rows) => matrix("mixture.k_ij", rows, m)?,
            None => DMatrix::zeros(m, m),
        };
        let beta = match &raw.mixture.beta_ij {
            Some(rows) => matrix("mixture.beta_ij", rows, m)?,
            None => default_beta(m),
        };
        let mixture = MixtureSpec::new(components, k_ij, raw.mixture.temperature_k).map_err(|e| at("mixture", e))?;

        let mobility = match raw.mobility.kind {
            RawMobilityKind::Diagonal => {
                let d = raw
                    .mobility
                    .d_i_m2_per_s
                    .ok_or_else(|| Error::config("mobility.d_i_m2_per_s", "required for the diagonal mobility"))?;
                if d.len() != m {
                    return Err(Error::config("mobility.d_i_m2_per_s", format!("expected {m} entries, got {}", d.len())));
                }
                MobilitySpec::diagonal(d)
            }
            kind => {
                let rows = raw.mobility.d_ij_m2_per_s.ok_or_else(|| {
                    Error::config("mobility.d_ij_m2_per_s", "required for the averaged mobilities")
                })?;
                let d = matrix("mobility.d_ij_m2_per_s", &rows, m)?;
                match kind {
                    RawMobilityKind::MolarAverage => MobilitySpec::molar_average(d),
                    _ => MobilitySpec::mass_average(d),
                }
            }
        }
        .map_err(|e| at("mobility", e))?;

        let grid = StaggeredGrid::new(
            raw.grid.nx,
            raw.grid.ny,
            raw.grid.lx_nm * NM,
            raw.grid.ly_nm * NM,
            raw.grid.boundary,
        )
        .map_err(|e| at("grid", e))?;

        let c_t = raw.energy_shift_j_per_mol.unwrap_or_else(|| vec![0.0; m]);
        let scheme_config = SchemeConfig {
            dt: raw.time.dt_s,
            c_t,
            solver: SolveOptions {
                tol: raw.solver.tol,
                max_iter: raw.solver.max_iter,
            },
            mobility,
            xi: raw.viscosity.bulk_pa_s,
            eta: raw.viscosity.shear_pa_s,
        };

        let background = densities(
            "initial.background",
            raw.initial.background_kmol_per_m3,
            raw.initial.background_mol_per_m3,
            m,
        )?;
        let droplets = raw
            .initial
            .droplets
            .into_iter()
            .enumerate()
            .map(|(k, d)| {
                Ok(Droplet {
                    center: d.center_nm.map(|v| v * NM),
                    size: d.size_nm.map(|v| v * NM),
                    density: densities(
                        &format!("initial.droplets[{k}].density"),
                        d.density_kmol_per_m3,
                        d.density_mol_per_m3,
                        m,
                    )?,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let cfg = Self {
            mixture,
            beta,
            scheme: raw.scheme,
            grid,
            steps: raw.time.steps,
            scheme_config,
            initial: InitialConfig { background, droplets },
            output: OutputConfig {
                dir: raw.output.dir,
                snapshot_every: raw.output.snapshot_every,
                energy_every: raw.output.energy_every,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Cross-field checks; re-run after command-line overrides.
    pub fn validate(&self) -> Result<()> {
        let m = self.mixture.len();
        if self.scheme == SchemeKind::Componentwise && !self.scheme_config.mobility.is_diagonal() {
            return Err(Error::config(
                "mobility.kind",
                "the componentwise scheme requires kind = \"diagonal\"",
            ));
        }
        let sc = &self.scheme_config;
        if !(sc.dt > 0.0 && sc.dt.is_finite()) {
            return Err(Error::config("time.dt_s", format!("time step must be positive, got {}", sc.dt)));
        }
        if !(sc.eta > 0.0 && sc.eta.is_finite()) {
            return Err(Error::config("viscosity.shear_pa_s", format!("must be positive, got {}", sc.eta)));
        }
        if !(sc.lambda() > 0.0 && sc.xi.is_finite()) {
            return Err(Error::config(
                "viscosity.bulk_pa_s",
                format!("must exceed 2/3 of the shear viscosity, got {} vs {}", sc.xi, sc.eta),
            ));
        }
        if sc.c_t.len() != m {
            return Err(Error::config(
                "energy_shift_j_per_mol",
                format!("expected {m} entries, got {}", sc.c_t.len()),
            ));
        }
        if let Some((i, c)) = sc.c_t.iter().enumerate().find(|(_, c)| !(**c >= 0.0 && c.is_finite())) {
            return Err(Error::config(
                format!("energy_shift_j_per_mol[{i}]"),
                format!("must be finite and non-negative, got {c}"),
            ));
        }
        if !(sc.solver.tol > 0.0 && sc.solver.tol < 1.0) {
            return Err(Error::config("solver.tol", format!("must lie in (0, 1), got {}", sc.solver.tol)));
        }
        let (lx, ly) = (self.grid.lx, self.grid.ly);
        let slack = 1e-12 * lx.max(ly);
        for (k, d) in self.initial.droplets.iter().enumerate() {
            if d.size.iter().any(|s| !(*s > 0.0)) {
                return Err(Error::config(format!("initial.droplets[{k}].size_nm"), "sides must be positive"));
            }
            let inside = d.center[0] - 0.5 * d.size[0] >= -slack
                && d.center[0] + 0.5 * d.size[0] <= lx + slack
                && d.center[1] - 0.5 * d.size[1] >= -slack
                && d.center[1] + 0.5 * d.size[1] <= ly + slack;
            if !inside {
                return Err(Error::config(
                    format!("initial.droplets[{k}]"),
                    "rectangle extends beyond the domain",
                ));
            }
            for (l, e) in self.initial.droplets.iter().enumerate().take(k) {
                if d.overlaps(e) {
                    return Err(Error::config(
                        format!("initial.droplets[{k}]"),
                        format!("overlaps initial.droplets[{l}]"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn influence(&self) -> Result<InfluenceMatrix> {
        influence_matrix(&self.mixture, &self.beta).map_err(|e| at("mixture.beta_ij", e))
    }

    pub fn model(&self) -> Result<Model> {
        Model::new(
            self.mixture.clone(),
            self.influence()?,
            self.scheme_config.clone(),
            self.grid,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::MobilityKind;

    #[test]
    fn binary_preset_values() {
        let c = preset("binary_c1c5_310K").unwrap();
        assert_eq!(c.mixture.temperature, 310.0);
        assert_eq!(c.scheme, SchemeKind::Coupled);
        assert_eq!(c.steps, 200);
        assert_eq!(c.scheme_config.dt, 1e-12);
        assert_eq!((c.scheme_config.xi, c.scheme_config.eta), (1e-4, 1e-4));
        assert_eq!(c.scheme_config.mobility.kind, MobilityKind::MolarAverage);
        assert_eq!(c.scheme_config.mobility.d_ij[(0, 1)], 1e-8);
        assert_eq!(c.scheme_config.c_t, vec![0.0, 0.0]);
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * y);
        assert!(close(&c.initial.background, &[7430.2, 673.6]));
        assert_eq!(c.initial.droplets.len(), 1);
        assert!(close(&c.initial.droplets[0].density, &[6866.3, 4791.5]));
        assert_eq!((c.grid.nx, c.grid.ny), (40, 40));
        assert!((c.grid.lx - 20e-9).abs() < 1e-20);
    }

    #[test]
    fn ternary_preset_values() {
        let c = preset("ternary_c1c5c10_323K").unwrap();
        assert_eq!(c.mixture.temperature, 323.0);
        assert_eq!(c.scheme, SchemeKind::Componentwise);
        assert_eq!(c.steps, 1000);
        assert_eq!(c.scheme_config.mobility.kind, MobilityKind::Diagonal);
        assert_eq!(c.scheme_config.mobility.d_i, vec![3e-8; 3]);
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * y);
        assert!(close(&c.initial.background, &[10516.0, 770.0, 184.0]));
        assert_eq!(c.initial.droplets.len(), 2);
        for d in &c.initial.droplets {
            assert!(close(&d.density, &[7841.2, 1992.5, 1433.0]));
        }
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(preset("nope"), Err(Error::Config { .. })));
    }

    fn edited(from: &str, to: &str) -> Result<RunConfig> {
        let text = preset_text("binary_c1c5_310K").unwrap();
        assert!(text.contains(from), "fixture text `{from}` missing");
        RunConfig::from_toml_str(&text.replacen(from, to, 1))
    }

    fn config_path(r: Result<RunConfig>) -> String {
        match r {
            Err(Error::Config { path, .. }) => path,
            other => panic!("expected a configuration error, got {other:?}"),
        }
    }

    #[test]
    fn componentwise_needs_diagonal_mobility() {
        let r = edited("scheme = \"coupled\"", "scheme = \"componentwise\"");
        assert_eq!(config_path(r), "mobility.kind");
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let r = edited("nx = 40", "nx = 40\nnz = 3");
        assert!(config_path(r).starts_with("grid"));
        let r = edited("kind = \"molar_average\"", "kind = \"molar_average\"\nd_typo = 1");
        assert!(config_path(r).starts_with("mobility"));
    }

    #[test]
    fn constraint_violations_carry_paths() {
        assert_eq!(config_path(edited("shear_pa_s = 1e-4", "shear_pa_s = 0.0")), "viscosity.shear_pa_s");
        assert_eq!(config_path(edited("bulk_pa_s = 1e-4", "bulk_pa_s = 5e-5")), "viscosity.bulk_pa_s");
        assert_eq!(
            config_path(edited("center_nm = [10.0, 10.0]", "center_nm = [2.0, 10.0]")),
            "initial.droplets[0]"
        );
        assert_eq!(
            config_path(edited("background_kmol_per_m3 = [7.4302, 0.6736]", "background_kmol_per_m3 = [7.4302]")),
            "initial.background_kmol_per_m3"
        );
        assert_eq!(
            config_path(edited("components = [\"methane\", \"pentane\"]", "components = [\"methane\", \"argon\"]")),
            "mixture.components[1]"
        );
        assert_eq!(
            config_path(edited("energy_shift_j_per_mol = [0.0, 0.0]", "energy_shift_j_per_mol = [0.0, -1.0]")),
            "energy_shift_j_per_mol[1]"
        );
    }

    #[test]
    fn overlapping_droplets_are_rejected() {
        let extra = "\n[[initial.droplets]]\ncenter_nm = [12.0, 12.0]\nsize_nm = [4.0, 4.0]\ndensity_kmol_per_m3 = [6.8663, 4.7915]\n";
        let text = preset_text("binary_c1c5_310K").unwrap().replacen("[output]", &format!("{extra}\n[output]"), 1);
        let r = RunConfig::from_toml_str(&text);
        assert_eq!(config_path(r), "initial.droplets[1]");
    }

    #[test]
    fn inline_components_and_mol_units() {
        let text = r#"
scheme = "componentwise"

[mixture]
temperature_k = 300.0
components = [{ name = "light", p_crit_bar = 45.99, t_crit_k = 190.56, acentric = 0.011, molar_weight_g_per_mol = 16.04 }]

[mobility]
kind = "diagonal"
d_i_m2_per_s = [1e-8]

[viscosity]
bulk_pa_s = 1e-4
shear_pa_s = 1e-4

[grid]
nx = 4
ny = 4
lx_nm = 2.0
ly_nm = 2.0
boundary = "periodic"

[time]
dt_s = 1e-12
steps = 3

[initial]
background_mol_per_m3 = [5000.0]
"#;
        let c = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(c.mixture.components[0].p_crit, 45.99e5);
        assert!((c.mixture.components[0].molar_weight - 0.01604).abs() < 1e-15);
        assert_eq!(c.initial.background, vec![5000.0]);
        assert_eq!(c.scheme_config.c_t, vec![0.0]);
        assert_eq!(c.output.energy_every, 1);
        assert!(c.model().is_ok());
    }
}
