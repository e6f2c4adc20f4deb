#![allow(dead_code)]

use nvtflow::config::{preset, Droplet, InitialConfig, RunConfig};
use nvtflow::initial::build_initial_state;
use nvtflow::mesh::{CellField, FaceField};
use nvtflow::mobility::MobilitySpec;
use nvtflow::scheme::{FieldState, Model, SchemeKind};
use nvtflow::thermo::{component_by_name, MixtureSpec};

/// Methane alone at 310 K: a dense square in a lighter background,
/// diagonal mobility.
pub fn methane_droplet(nx: usize) -> RunConfig {
    let mut cfg = preset("binary_c1c5_310K").unwrap();
    cfg.mixture = MixtureSpec::ideal_mixing(vec![component_by_name("methane").unwrap()], 310.0).unwrap();
    cfg.beta = nalgebra::DMatrix::zeros(1, 1);
    cfg.scheme_config.mobility = MobilitySpec::diagonal(vec![1e-8]).unwrap();
    cfg.scheme_config.c_t = vec![0.0];
    cfg.grid = nvtflow::mesh::StaggeredGrid::new(nx, nx, 20e-9, 20e-9, cfg.grid.bc).unwrap();
    cfg.initial = InitialConfig {
        background: vec![2000.0],
        droplets: vec![Droplet {
            center: [10e-9, 10e-9],
            size: [10e-9, 10e-9],
            density: vec![9000.0],
        }],
    };
    cfg.validate().unwrap();
    cfg
}

pub fn initial(cfg: &RunConfig) -> (Model, FieldState) {
    let model = cfg.model().unwrap();
    let state = build_initial_state(&cfg.initial, &model).unwrap();
    (model, state)
}

pub fn uniform(model: &Model, n: &[f64]) -> FieldState {
    let fields: Vec<CellField> = n.iter().map(|&v| CellField::constant(&model.grid, v)).collect();
    FieldState {
        h: model.initial_h(&fields).unwrap(),
        n: fields,
        u: FaceField::zeros(&model.grid),
        t: 0.0,
    }
}

pub fn advance(kind: SchemeKind, model: &Model, state: &FieldState, steps: usize) -> FieldState {
    let mut s = state.clone();
    for _ in 0..steps {
        s = kind.step(model, &s).unwrap().0;
    }
    s
}

/// Largest entry-wise difference relative to the largest magnitude.
pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Worst relative difference over all density and velocity fields.
pub fn state_diff(a: &FieldState, b: &FieldState) -> f64 {
    let dn = a.n.iter().zip(&b.n).map(|(x, y)| rel_diff(&x.data, &y.data)).fold(0.0, f64::max);
    dn.max(rel_diff(&a.u.to_vec(), &b.u.to_vec()))
}
