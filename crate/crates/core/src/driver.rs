//! Time loop with energy recording and snapshot output.

use std::path::PathBuf;
use std::time::Instant;

use log::{info, warn};

use crate::config::RunConfig;
use crate::diagnostics::{energy_record, EnergyRecord};
use crate::error::Error;
use crate::initial::build_initial_state;
use crate::output::{write_snapshot, EnergyWriter};
use crate::scheme::FieldState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Abort when the modified total energy rises.
    pub strict_energy: bool,
    /// Allowed relative rise of the modified total energy per step.
    pub energy_tol: f64,
    /// Write energies and snapshots to the configured directory.
    pub write_output: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            strict_energy: false,
            energy_tol: 1e-10,
            write_output: true,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("setup failed: {0}")]
    Setup(#[source] Error),
    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Error,
    },
    #[error("modified total energy rose at step {step}: relative increase {relative_increase:.3e} exceeds {tol:.1e}")]
    Energy {
        step: usize,
        relative_increase: f64,
        tol: f64,
    },
    #[error("output failed at step {step}: {source}")]
    Output {
        step: usize,
        #[source]
        source: Error,
    },
}

impl RunError {
    /// 2 configuration, 3 numerical failure, 4 energy violation, 1 IO.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Setup(Error::Io(_)) | RunError::Output { .. } => 1,
            RunError::Setup(_) => 2,
            RunError::Step { .. } => 3,
            RunError::Energy { .. } => 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    /// Energy of every step, including step 0.
    pub records: Vec<EnergyRecord>,
    /// Per-component total moles of every step.
    pub moles: Vec<Vec<f64>>,
    pub initial: FieldState,
    pub state: FieldState,
    /// Largest relative rise of the modified total energy over one step.
    pub max_relative_increase: f64,
    pub snapshots: Vec<PathBuf>,
    pub seconds: f64,
}

fn due(step: usize, every: usize, last: usize) -> bool {
    step == 0 || (every > 0 && (step.is_multiple_of(every) || step == last))
}

pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunSummary, RunError> {
    let start = Instant::now();
    let model = cfg.model().map_err(RunError::Setup)?;
    if !model.influence.is_positive_semidefinite() {
        let (lo, hi) = model.influence.eigenvalue_range();
        warn!("influence matrix is not positive semidefinite (eigenvalues in [{lo:.3e}, {hi:.3e}]); the gradient energy may be negative");
    }
    let initial = build_initial_state(&cfg.initial, &model).map_err(RunError::Setup)?;
    let names: Vec<String> = cfg.mixture.components.iter().map(|c| c.name.clone()).collect();

    let mut energies = None;
    if opts.write_output {
        std::fs::create_dir_all(&cfg.output.dir).map_err(|e| RunError::Setup(e.into()))?;
        energies = Some(EnergyWriter::create(&cfg.output.dir.join("energies.csv")).map_err(RunError::Setup)?);
    }
    let mut snapshots = Vec::new();
    let mut emit = |step: usize, state: &FieldState, rec: &EnergyRecord| -> Result<(), RunError> {
        let wrap = |source| RunError::Output { step, source };
        if let Some(w) = energies.as_mut() {
            if due(step, cfg.output.energy_every, cfg.steps) {
                w.write(rec).map_err(wrap)?;
            }
            if cfg.output.snapshot_every > 0 && due(step, cfg.output.snapshot_every, cfg.steps) {
                let stem = cfg.output.dir.join(format!("snapshot_{step:06}"));
                let paths = write_snapshot(state, &model.grid, &names, &stem).map_err(wrap)?;
                snapshots.extend(paths);
            }
        }
        Ok(())
    };

    let first = energy_record(&model, &initial, 0).map_err(RunError::Setup)?;
    emit(0, &initial, &first)?;
    info!(
        "{} scheme, {} components, {}x{} cells, {} steps of {:.3e} s",
        cfg.scheme.name(),
        model.len(),
        model.grid.nx,
        model.grid.ny,
        cfg.steps,
        cfg.scheme_config.dt
    );
    let mut records = vec![first];
    let mut moles = vec![initial.total_moles(&model.grid)];
    let mut state = initial.clone();
    let mut max_relative_increase = f64::NEG_INFINITY;
    for step in 1..=cfg.steps {
        let (next, audit) = cfg.scheme.step(&model, &state).map_err(|source| RunError::Step { step, source })?;
        let rec = energy_record(&model, &next, step).map_err(|source| RunError::Step { step, source })?;
        let prev = records.last().map(|r| r.total_modified).unwrap_or(rec.total_modified);
        let rel = (rec.total_modified - prev) / prev.abs().max(f64::MIN_POSITIVE);
        max_relative_increase = max_relative_increase.max(rel);
        if !(rel <= opts.energy_tol) {
            if opts.strict_energy {
                return Err(RunError::Energy {
                    step,
                    relative_increase: rel,
                    tol: opts.energy_tol,
                });
            }
            warn!("step {step}: modified total energy rose by {rel:.3e} (relative)");
        }
        log::debug!(
            "step {step}: E = {:.12e} J/m, mass residual {:.2e}, iterations {}/{}",
            rec.total_modified,
            audit.mass_residual,
            audit.mass_iterations,
            audit.momentum_iterations
        );
        emit(step, &next, &rec)?;
        moles.push(next.total_moles(&model.grid));
        records.push(rec);
        state = next;
    }
    let seconds = start.elapsed().as_secs_f64();
    info!("finished {} steps in {seconds:.2} s", cfg.steps);
    Ok(RunSummary {
        records,
        moles,
        initial,
        state,
        max_relative_increase,
        snapshots,
        seconds,
    })
}
