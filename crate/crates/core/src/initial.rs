//! Sharp-interface initial states from background and droplet densities.

use crate::config::InitialConfig;
use crate::error::{Error, Result};
use crate::mesh::{CellField, FaceField};
use crate::scheme::{FieldState, Model};

/// Background densities everywhere, droplet densities in cells whose center
/// lies inside a droplet; zero velocity and the consistent auxiliary scalar.
pub fn build_initial_state(init: &InitialConfig, model: &Model) -> Result<FieldState> {
    let grid = &model.grid;
    let m = model.len();
    if init.background.len() != m || init.droplets.iter().any(|d| d.density.len() != m) {
        return Err(Error::Shape(format!("initial densities must have {m} entries")));
    }
    let mut n: Vec<CellField> = init.background.iter().map(|&v| CellField::constant(grid, v)).collect();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (x, y) = grid.cell_center(i, j);
            let mut hits = init.droplets.iter().enumerate().filter(|(_, d)| d.contains(x, y));
            if let Some((k, d)) = hits.next() {
                if let Some((l, _)) = hits.next() {
                    return Err(Error::config(
                        format!("initial.droplets[{l}]"),
                        format!("overlaps initial.droplets[{k}] at cell ({i}, {j})"),
                    ));
                }
                let c = grid.cell(i, j);
                for (f, v) in n.iter_mut().zip(&d.density) {
                    f.data[c] = *v;
                }
            }
        }
    }
    let h = model.initial_h(&n)?;
    Ok(FieldState {
        n,
        u: FaceField::zeros(grid),
        h,
        t: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{preset, Droplet};
    use crate::mesh::integrate;

    #[test]
    fn no_droplets_gives_uniform_gas() {
        let mut cfg = preset("binary_c1c5_310K").unwrap();
        cfg.initial.droplets.clear();
        let model = cfg.model().unwrap();
        let s = build_initial_state(&cfg.initial, &model).unwrap();
        for (f, v) in s.n.iter().zip(&cfg.initial.background) {
            assert!(f.data.iter().all(|x| x == v));
        }
        assert_eq!(s.u.max_abs(), 0.0);
        assert_eq!(s.t, 0.0);
    }

    #[test]
    fn centered_droplet_covers_twenty_by_twenty_cells() {
        let cfg = preset("binary_c1c5_310K").unwrap();
        let model = cfg.model().unwrap();
        let s = build_initial_state(&cfg.initial, &model).unwrap();
        let liquid = cfg.initial.droplets[0].density[1];
        let count = s.n[1].data.iter().filter(|&&v| v == liquid).count();
        assert_eq!(count, 400);
        for j in 0..40 {
            for i in 0..40 {
                let inside = (10..30).contains(&i) && (10..30).contains(&j);
                assert_eq!(s.n[1].at(i, j) == liquid, inside, "cell ({i}, {j})");
            }
        }
    }

    #[test]
    fn auxiliary_scalar_matches_shifted_bulk_energy() {
        let mut cfg = preset("binary_c1c5_310K").unwrap();
        cfg.scheme_config.c_t = vec![1500.0, 2500.0];
        let model = cfg.model().unwrap();
        let s = build_initial_state(&cfg.initial, &model).unwrap();
        let f_b = integrate(&model.grid, &model.bulk_fields(&s.n).unwrap().f_b);
        let shift: f64 = cfg
            .scheme_config
            .c_t
            .iter()
            .zip(&s.n)
            .map(|(c, f)| c * integrate(&model.grid, f))
            .sum();
        let lhs = s.h * s.h - f_b;
        assert!((lhs - shift).abs() <= 1e-12 * shift.abs().max(f_b.abs()), "{lhs} vs {shift}");
    }

    #[test]
    fn overlapping_droplets_fail() {
        let cfg = preset("binary_c1c5_310K").unwrap();
        let model = cfg.model().unwrap();
        let mut init = cfg.initial.clone();
        init.droplets.push(Droplet {
            center: [12e-9, 12e-9],
            size: [4e-9, 4e-9],
            density: init.droplets[0].density.clone(),
        });
        assert!(matches!(build_initial_state(&init, &model), Err(Error::Config { .. })));
    }
}
