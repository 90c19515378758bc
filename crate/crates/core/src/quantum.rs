//! Wigner-function evolution under the open master equation, plus snapshot
//! scheduling. The density-matrix oracle lives in [`crate::dm_oracle`] as a
//! deliberately independent code path.

use serde::{Deserialize, Serialize};

use crate::grid::{diagnostics, Diagnostics, PhaseSpaceField};
use crate::model::SystemParams;
use crate::propagator::{KernelKind, SplitStepPropagator};

pub use crate::propagator::PropagatorError;

/// Builds a spectral propagator for the full quantum kernel.
pub fn wigner_propagator(
    field: &PhaseSpaceField,
    params: &SystemParams,
    dt: f64,
) -> Result<SplitStepPropagator, PropagatorError> {
    SplitStepPropagator::new(field.grid, params, dt, KernelKind::Quantum)
}

/// One Strang step of the open Wigner equation.
pub fn step_wigner(
    field: &mut PhaseSpaceField,
    dt: f64,
    params: &SystemParams,
) -> Result<(), PropagatorError> {
    let mut prop = wigner_propagator(field, params, dt)?;
    prop.step(field)
}

/// Evolution output: the final field, diagnostics recorded on the snapshot
/// schedule, and (optionally) the snapshot fields themselves.
#[derive(Debug, Clone)]
pub struct EvolutionOutput {
    pub field: PhaseSpaceField,
    pub series: Vec<Diagnostics>,
    pub snapshots: Vec<PhaseSpaceField>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotSchedule {
    /// Absolute times at which to record diagnostics (and fields when
    /// `capture_fields`). Must be ≥ the initial time and multiples of dt.
    pub times: Vec<f64>,
    pub capture_fields: bool,
}

impl SnapshotSchedule {
    pub fn none() -> Self {
        SnapshotSchedule {
            times: Vec::new(),
            capture_fields: false,
        }
    }

    pub fn every(interval: f64, t0: f64, t_final: f64, capture_fields: bool) -> Self {
        let mut times = Vec::new();
        let mut t = t0 + interval;
        while t <= t_final + 1e-9 * interval {
            times.push(t.min(t_final));
            t += interval;
        }
        SnapshotSchedule {
            times,
            capture_fields,
        }
    }
}

/// Repeated `step_wigner` with interior half-streams merged; diagnostics are
/// recorded at each scheduled time.
pub fn evolve_wigner(
    field: PhaseSpaceField,
    t_final: f64,
    dt: f64,
    params: &SystemParams,
    schedule: &SnapshotSchedule,
) -> Result<EvolutionOutput, PropagatorError> {
    let mut prop = SplitStepPropagator::new(field.grid, params, dt, KernelKind::Quantum)?;
    evolve_with(&mut prop, field, t_final, schedule)
}

/// Shared evolution driver for either kernel; segments the run at snapshot
/// boundaries so schedule points land on exact Strang-step states. Use this
/// with [`wigner_propagator`] when non-default propagator settings (e.g. the
/// boundary-mass cap) are needed.
pub fn evolve_with(
    prop: &mut SplitStepPropagator,
    mut field: PhaseSpaceField,
    t_final: f64,
    schedule: &SnapshotSchedule,
) -> Result<EvolutionOutput, PropagatorError> {
    let dt = prop.dt;
    if t_final < field.t - 1e-12 {
        return Err(PropagatorError::BadTimeStep);
    }
    let mut marks: Vec<f64> = schedule
        .times
        .iter()
        .copied()
        .filter(|&t| t > field.t && t <= t_final + 1e-9 * dt)
        .collect();
    marks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    marks.push(t_final);

    let mut series = Vec::new();
    let mut snapshots = Vec::new();
    for &mark in &marks {
        let span = mark - field.t;
        let n_steps = (span / dt).round() as i64;
        let aligned = (span - n_steps as f64 * dt).abs() <= 1e-9 * dt.max(1.0);
        if n_steps < 0 || !aligned {
            return Err(PropagatorError::BadTimeStep);
        }
        prop.evolve(&mut field, n_steps as usize)?;
        field.t = mark; // remove accumulated fp drift in the time stamp
        if mark < t_final || schedule.times.iter().any(|&t| (t - mark).abs() <= 1e-9) {
            series.push(diagnostics(&field));
            if schedule.capture_fields {
                snapshots.push(field.clone());
            }
        }
    }
    if !field.all_finite() {
        return Err(PropagatorError::NonFiniteField { t: field.t });
    }
    Ok(EvolutionOutput {
        field,
        series,
        snapshots,
    })
}

/// The X-expansion of the exact two-point bracket against the truncated Moyal
/// series X·V′ + X³·V‴/24. Identically zero for quartic potentials; used by
/// tests and kept here as the statement of kernel exactness.
pub fn bracket_vs_moyal_residual(q: f64, x: f64, t: f64, params: &SystemParams) -> f64 {
    let pd_p = crate::model::potential_derivatives(q + 0.5 * x, t, params);
    let pd_m = crate::model::potential_derivatives(q - 0.5 * x, t, params);
    let pd = crate::model::potential_derivatives(q, t, params);
    let exact = pd_p.v - pd_m.v;
    let moyal = x * pd.v1 + x * x * x * pd.v3 / 24.0;
    exact - moyal
}
