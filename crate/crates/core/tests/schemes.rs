mod common;

use common::*;
use nalgebra::DMatrix;
use nvtflow::config::preset;
use nvtflow::interface::{influence_matrix, default_beta, InfluenceMatrix};
use nvtflow::mesh::{CellField, FaceField};
use nvtflow::scheme::componentwise::{self, component_solve, mean_intermediate_velocity, FractionalState};
use nvtflow::scheme::coupled::{self, assemble_mass_system};
use nvtflow::scheme::{Model, SchemeKind};
use nvtflow::thermo::{component_by_name, MixtureSpec, PengRobinson, GAS_CONSTANT};

#[test]
fn uniform_quiescent_states_are_fixed_points() {
    for (name, kinds) in [
        ("binary_c1c5_310K", &[SchemeKind::Coupled][..]),
        ("ternary_c1c5c10_323K", &[SchemeKind::Coupled, SchemeKind::Componentwise][..]),
    ] {
        let cfg = preset(name).unwrap();
        let model = cfg.model().unwrap();
        for rho in [&cfg.initial.background, &cfg.initial.droplets[0].density] {
            let s0 = uniform(&model, rho);
            for &kind in kinds {
                let s = advance(kind, &model, &s0, 10);
                let d = state_diff(&s, &s0);
                assert!(d <= 1e-10, "{name} {kind:?}: drift {d:e}");
                assert!(s.u.max_abs() <= 1e-10, "{name} {kind:?}: velocity {:e}", s.u.max_abs());
                assert!(((s.h - s0.h) / s0.h).abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn single_component_schemes_coincide() {
    let cfg = methane_droplet(20);
    let (model, s0) = initial(&cfg);
    let a = advance(SchemeKind::Coupled, &model, &s0, 10);
    let b = advance(SchemeKind::Componentwise, &model, &s0, 10);
    let d = state_diff(&a, &b);
    assert!(d <= 1e-8, "trajectories differ by {d:e}");
    assert!(((a.h - b.h) / a.h).abs() <= 1e-8);
    assert!(state_diff(&a, &s0) > 1e-6, "the droplet should evolve");
}

/// Dense `sum_nb k_f (x_nb - x_c) / h^2` on a square no-flux grid, with
/// the face coefficient supplied per neighbour pair.
fn weighted_laplacian(nx: usize, h: f64, k: impl Fn(usize, usize) -> f64) -> DMatrix<f64> {
    let nc = nx * nx;
    let mut l = DMatrix::zeros(nc, nc);
    for j in 0..nx {
        for i in 0..nx {
            let c = i + nx * j;
            let mut nbs = Vec::new();
            if i > 0 {
                nbs.push(c - 1);
            }
            if i + 1 < nx {
                nbs.push(c + 1);
            }
            if j > 0 {
                nbs.push(c - nx);
            }
            if j + 1 < nx {
                nbs.push(c + nx);
            }
            for nb in nbs {
                let kf = k(c, nb) / (h * h);
                l[(c, nb)] += kf;
                l[(c, c)] -= kf;
            }
        }
    }
    l
}

#[test]
fn scalar_mass_system_matches_hand_assembly() {
    let mut cfg = methane_droplet(4);
    cfg.initial.droplets.clear();
    let (model, mut s) = initial(&cfg);
    s.n[0] = CellField::from_fn(&model.grid, |i, j| 3000.0 + 700.0 * i as f64 + 250.0 * (j * j) as f64);
    s.h = model.initial_h(&s.n).unwrap();

    let sys = assemble_mass_system(&model, &s).unwrap();
    let nc = 16;
    let h = model.grid.hx();
    let vol = model.grid.cell_volume();
    let dt = cfg.scheme_config.dt;
    let mw = model.molar_weights()[0];
    let rt = GAS_CONSTANT * 310.0;
    let d = cfg.scheme_config.mobility.d_i[0];
    let n = &s.n[0].data;
    let kf = |a: usize, b: usize| {
        let nf = 0.5 * (n[a] + n[b]);
        dt * nf * nf / (mw * nf) + d * nf / rt
    };
    let lk = weighted_laplacian(4, h, kf);
    let lap = weighted_laplacian(4, h, |_, _| 1.0);
    let c11 = model.influence.get(0, 0);
    let expected_a = DMatrix::identity(nc, nc) + &lk * &lap * (dt * c11);
    let got_a = sys.a.to_dense();
    let scale = expected_a.abs().max();
    assert!((&got_a - &expected_a).abs().max() <= 1e-12 * scale);

    let w = model.sav_weights(&s.n).unwrap().w.remove(0);
    let wv = nalgebra::DVector::from_column_slice(&w.data);
    let expected_g = -(&lk * &wv) * dt;
    let gscale = expected_g.abs().max();
    for c in 0..nc {
        assert!((sys.g[c] - expected_g[c]).abs() <= 1e-12 * gscale, "g[{c}]");
        assert!((sys.w[c] + vol * w.data[c]).abs() <= 1e-15 * vol * w.data[c].abs());
        let rhs = n[c] - s.h * expected_g[c];
        assert!((sys.rhs[c] - rhs).abs() <= 1e-12 * rhs.abs());
    }
    let rhs_h = s.h - vol * (0..nc).map(|c| w.data[c] * n[c]).sum::<f64>();
    assert!((sys.rhs_h - rhs_h).abs() <= 1e-12 * rhs_h.abs().max(s.h));
    assert_eq!(sys.sigma, 1.0);
}

#[test]
fn without_gradient_energy_the_system_is_identity_plus_border() {
    let mut cfg = methane_droplet(4);
    cfg.initial.droplets.clear();
    let mut model = cfg.model().unwrap();
    model.influence = InfluenceMatrix::from_coefficients(DMatrix::zeros(1, 1)).unwrap();
    let mut s = uniform(&model, &[4000.0]);
    s.n[0].data[5] = 6000.0;
    s.h = model.initial_h(&s.n).unwrap();
    let sys = assemble_mass_system(&model, &s).unwrap();
    assert_eq!(sys.a.to_dense(), DMatrix::identity(16, 16));
}

#[test]
fn steps_conserve_moles_and_satisfy_discrete_equations() {
    for (name, kind) in [
        ("binary_c1c5_310K", SchemeKind::Coupled),
        ("ternary_c1c5c10_323K", SchemeKind::Componentwise),
        ("ternary_c1c5c10_323K", SchemeKind::Coupled),
    ] {
        let cfg = preset(name).unwrap();
        let (model, mut s) = initial(&cfg);
        let tol = cfg.scheme_config.solver.tol;
        let n0 = s.total_moles(&model.grid);
        for step in 1..=5 {
            let before = s.total_moles(&model.grid);
            let (next, audit) = kind.step(&model, &s).unwrap();
            let after = next.total_moles(&model.grid);
            for (a, b) in after.iter().zip(&before) {
                assert!(((a - b) / b).abs() <= 1e-8, "{name} step {step}: per-step drift");
            }
            assert!(audit.mass_residual <= 10.0 * tol, "{name} step {step}: mass residual {:e}", audit.mass_residual);
            assert!(audit.sav_residual <= 10.0 * tol, "{name} step {step}: sav residual {:e}", audit.sav_residual);
            s = next;
        }
        for (a, b) in s.total_moles(&model.grid).iter().zip(&n0) {
            assert!(((a - b) / b).abs() <= 1e-6);
        }
    }
}

#[test]
fn fractional_velocities_telescope_and_energy_chain_holds() {
    let cfg = preset("ternary_c1c5c10_323K").unwrap();
    let (model, mut s) = initial(&cfg);
    for _ in 0..3 {
        let (next, _, sweep) = componentwise::step_with_audit(&model, &s).unwrap();
        assert!(sweep.telescoping_defect <= 1e-12, "defect {:e}", sweep.telescoping_defect);
        assert_eq!(sweep.energies.len(), 3);
        for (i, e) in sweep.energies.iter().enumerate() {
            let scale = e.lhs.abs().max(e.bound.abs());
            assert!(e.lhs <= e.bound + 1e-8 * scale, "sweep {i}: {} > {}", e.lhs, e.bound);
        }
        s = next;
    }
}

#[test]
fn sweeps_follow_configured_component_order() {
    let cfg = preset("ternary_c1c5c10_323K").unwrap();
    let (model, s0) = initial(&cfg);
    let (stepped, _, sweep) = componentwise::step_with_audit(&model, &s0).unwrap();

    let denom = model.sav_weights(&s0.n).unwrap().denom;
    let mut frac = FractionalState::start(&s0);
    for i in 0..3 {
        frac = component_solve(&model, i, &frac, &s0, denom).unwrap().frac;
        assert!(rel_diff(&frac.u_star.to_vec(), &sweep.u_stars[i].to_vec()) <= 1e-14);
    }
    for i in 0..3 {
        assert!(rel_diff(&frac.n_mixed[i].data, &stepped.n[i].data) <= 1e-14);
    }
    assert!(((frac.h - stepped.h) / frac.h).abs() <= 1e-14);

    // the same mixture listed in reverse gives a different step
    let mut rev = cfg.clone();
    rev.mixture.components.reverse();
    rev.initial.background.reverse();
    for d in &mut rev.initial.droplets {
        d.density.reverse();
    }
    let (rmodel, r0) = initial(&rev);
    let r = SchemeKind::Componentwise.step(&rmodel, &r0).unwrap().0;
    let diff = (0..3).map(|i| rel_diff(&r.n[2 - i].data, &stepped.n[i].data)).fold(0.0, f64::max);
    assert!(diff > 1e-12, "sweep order had no effect ({diff:e})");
    for i in 0..3 {
        let (a, b) = (r.total_moles(&rmodel.grid)[2 - i], stepped.total_moles(&model.grid)[i]);
        assert!(((a - b) / b).abs() <= 1e-9);
    }
}

#[test]
fn decoupled_component_is_independent_of_sweep_order() {
    let cfg = preset("binary_c1c5_310K").unwrap();
    let comps = vec![component_by_name("methane").unwrap(), component_by_name("pentane").unwrap()];
    let build = |order: [usize; 2]| {
        let mix = MixtureSpec::ideal_mixing(order.iter().map(|&k| comps[k].clone()).collect(), 310.0).unwrap();
        let eos = PengRobinson::from_parameters(310.0, vec![0.0; 2], vec![0.0; 2], &DMatrix::zeros(2, 2)).unwrap();
        let full = influence_matrix(&MixtureSpec::ideal_mixing(comps.clone(), 310.0).unwrap(), &default_beta(2)).unwrap();
        let c = DMatrix::from_fn(2, 2, |i, j| if i == j { full.get(order[i], order[i]) } else { 0.0 });
        let mut sc = cfg.scheme_config.clone();
        let d = [1e-8, 2e-8];
        sc.mobility = nvtflow::mobility::MobilitySpec::diagonal(order.iter().map(|&k| d[k]).collect()).unwrap();
        Model::with_eos(mix, eos, InfluenceMatrix::from_coefficients(c).unwrap(), sc, cfg.grid).unwrap()
    };
    let fields = |model: &Model, order: [usize; 2]| {
        let droplet = CellField::from_fn(&model.grid, |i, j| {
            if (12..28).contains(&i) && (15..25).contains(&j) {
                8000.0
            } else {
                1500.0
            }
        });
        let flat = CellField::constant(&model.grid, 900.0);
        let n: Vec<CellField> = order.iter().map(|&k| if k == 0 { droplet.clone() } else { flat.clone() }).collect();
        nvtflow::scheme::FieldState {
            h: model.initial_h(&n).unwrap(),
            n,
            u: FaceField::zeros(&model.grid),
            t: 0.0,
        }
    };
    let fwd = build([0, 1]);
    let bwd = build([1, 0]);
    let a = componentwise::step(&fwd, &fields(&fwd, [0, 1])).unwrap();
    let b = componentwise::step(&bwd, &fields(&bwd, [1, 0])).unwrap();
    let d = rel_diff(&a.n[0].data, &b.n[1].data);
    assert!(d <= 1e-12, "methane differs by {d:e} between sweep orders");
    let moved = rel_diff(&a.n[0].data, &fields(&fwd, [0, 1]).n[0].data);
    assert!(moved > 1e-8);
}

#[test]
fn mean_velocity_weights() {
    let cfg = methane_droplet(4);
    let g = &cfg.grid;
    let u1 = FaceField::zeros(g).map(|_| 2.0);
    let u2 = FaceField::zeros(g).map(|_| 4.0);
    let r = FaceField::zeros(g).map(|_| 3.0);
    let m = mean_intermediate_velocity(&[u1.clone(), u2], &[r.clone(), r.clone()]).unwrap();
    assert!(m.x.iter().chain(&m.y).all(|v| (v - 3.0).abs() < 1e-15));
    let same = mean_intermediate_velocity(std::slice::from_ref(&u1), std::slice::from_ref(&r)).unwrap();
    assert_eq!(same, u1);
    assert!(mean_intermediate_velocity(std::slice::from_ref(&u1), &[FaceField::zeros(g)]).is_err());
}

#[test]
fn componentwise_rejects_coupled_mobility() {
    let cfg = preset("binary_c1c5_310K").unwrap();
    let (model, s) = initial(&cfg);
    assert!(matches!(
        componentwise::step(&model, &s),
        Err(nvtflow::error::Error::Config { .. })
    ));
    assert!(coupled::step(&model, &s).is_ok());
}
