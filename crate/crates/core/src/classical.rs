//! Classical counterparts of the Wigner solver: Langevin trajectory ensembles
//! and the grid Fokker-Planck propagator (the L_q = 0 limit).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{FieldKind, PhaseSpaceField, PhaseSpaceGrid};
use crate::model::{force, PhasePoint, SystemParams};
use crate::propagator::{KernelKind, SplitStepPropagator};
use crate::quantum::{evolve_with, EvolutionOutput, SnapshotSchedule};
use crate::rng::{substream, Stream};

pub use crate::propagator::PropagatorError;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("trajectory {index} left the finite domain at t = {t}")]
    NonFiniteState { index: usize, t: f64 },
    #[error("time step must be positive and divide the requested span")]
    BadTimeStep,
    #[error("all ensemble points fall outside the grid")]
    AllPointsOutsideGrid,
}

/// One Euler–Maruyama step: the deterministic parts are evaluated at the
/// pre-step state (q-update uses the pre-step p), the noise is exact for
/// additive constant-coefficient diffusion.
#[inline]
pub fn step_langevin(
    point: PhasePoint,
    dt: f64,
    params: &SystemParams,
    noise: &mut ChaCha8Rng,
) -> PhasePoint {
    let f0 = force(point.q, point.t, params);
    let xi: f64 = noise.sample(StandardNormal);
    PhasePoint {
        q: point.q + point.p / params.m * dt,
        p: point.p + f0 * dt + (2.0 * params.d * dt).sqrt() * xi,
        t: point.t + dt,
    }
}

/// N independent phase-space trajectories. Each trajectory owns a generator
/// derived from (seed, index), so results are bit-identical however the work
/// is partitioned, and the ensemble can be advanced in stages.
#[derive(Debug, Clone)]
pub struct TrajectoryEnsemble {
    pub points: Vec<PhasePoint>,
    rngs: Vec<ChaCha8Rng>,
    pub seed: u64,
    pub t: f64,
}

impl TrajectoryEnsemble {
    /// All trajectories start at `z0`.
    pub fn from_point(n: usize, z0: PhasePoint, seed: u64) -> Self {
        assert!(n >= 1, "ensemble needs at least one trajectory");
        TrajectoryEnsemble {
            points: vec![z0; n],
            rngs: (0..n)
                .map(|i| substream(seed, Stream::Ensemble, i as u64))
                .collect(),
            seed,
            t: z0.t,
        }
    }

    /// Trajectories sampled i.i.d. from the Gaussian matching
    /// `init_coherent_state` (σ_p = ħ/2σ_q); each draw comes from the
    /// trajectory's own substream.
    pub fn sample_coherent(
        n: usize,
        q0: f64,
        p0: f64,
        sigma_q: f64,
        hbar: f64,
        t0: f64,
        seed: u64,
    ) -> Self {
        assert!(n >= 1, "ensemble needs at least one trajectory");
        let sigma_p = hbar / (2.0 * sigma_q);
        let mut rngs: Vec<ChaCha8Rng> = (0..n)
            .map(|i| substream(seed, Stream::Ensemble, i as u64))
            .collect();
        let points = rngs
            .iter_mut()
            .map(|rng| {
                let gq: f64 = rng.sample(StandardNormal);
                let gp: f64 = rng.sample(StandardNormal);
                PhasePoint::new(q0 + sigma_q * gq, p0 + sigma_p * gp, t0)
            })
            .collect();
        TrajectoryEnsemble {
            points,
            rngs,
            seed,
            t: t0,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sample means and (unbiased) covariance of (q, p).
    pub fn moments(&self) -> EnsembleMoments {
        let n = self.points.len() as f64;
        let mut mq = 0.0;
        let mut mp = 0.0;
        for z in &self.points {
            mq += z.q;
            mp += z.p;
        }
        mq /= n;
        mp /= n;
        let mut vq = 0.0;
        let mut vp = 0.0;
        let mut cqp = 0.0;
        for z in &self.points {
            vq += (z.q - mq) * (z.q - mq);
            vp += (z.p - mp) * (z.p - mp);
            cqp += (z.q - mq) * (z.p - mp);
        }
        let denom = (n - 1.0).max(1.0);
        EnsembleMoments {
            mean_q: mq,
            mean_p: mp,
            var_q: vq / denom,
            var_p: vp / denom,
            cov_qp: cqp / denom,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleMoments {
    pub mean_q: f64,
    pub mean_p: f64,
    pub var_q: f64,
    pub var_p: f64,
    pub cov_qp: f64,
}

/// Advances every trajectory to `t_final` with its own substream.
/// Embarrassingly parallel; the result does not depend on the partitioning.
pub fn evolve_ensemble(
    ensemble: &mut TrajectoryEnsemble,
    t_final: f64,
    dt: f64,
    params: &SystemParams,
) -> Result<(), EnsembleError> {
    let span = t_final - ensemble.t;
    if span == 0.0 {
        return Ok(());
    }
    if !(dt > 0.0) || span < 0.0 {
        return Err(EnsembleError::BadTimeStep);
    }
    let n_steps = (span / dt).round() as usize;
    if ((span - n_steps as f64 * dt) / dt).abs() > 1e-6 {
        return Err(EnsembleError::BadTimeStep);
    }
    let t0 = ensemble.t;
    let first_bad = ensemble
        .points
        .par_iter_mut()
        .zip(ensemble.rngs.par_iter_mut())
        .enumerate()
        .map(|(idx, (z, rng))| {
            z.t = t0;
            for _ in 0..n_steps {
                *z = step_langevin(*z, dt, params, rng);
                if !z.is_finite() {
                    return Some((idx, z.t));
                }
            }
            None
        })
        .reduce(|| None, |a, b| a.or(b));
    if let Some((index, t)) = first_bad {
        return Err(EnsembleError::NonFiniteState { index, t });
    }
    ensemble.t = t0 + n_steps as f64 * dt;
    for z in &mut ensemble.points {
        z.t = ensemble.t;
    }
    Ok(())
}

/// Deterministic fixed-order binning of the ensemble onto `grid`, normalized
/// to unit mass, with optional separable Gaussian smoothing of the histogram.
/// `bandwidth` is in units of one grid cell per axis; 0 keeps the raw counts.
pub fn density_from_ensemble(
    ensemble: &TrajectoryEnsemble,
    grid: PhaseSpaceGrid,
    bandwidth: f64,
    hbar: f64,
) -> Result<PhaseSpaceField, EnsembleError> {
    let mut field = PhaseSpaceField::zeros(grid, hbar, FieldKind::Classical);
    field.t = ensemble.t;
    let dq = grid.dq();
    let dp = grid.dp();
    let mut kept = 0usize;
    for z in &ensemble.points {
        // Nearest-node cells, consistent with node-sampled grid fields.
        let fi = (z.q - grid.q_min) / dq + 0.5;
        let fj = (z.p - grid.p_min) / dp + 0.5;
        if fi < 0.0 || fj < 0.0 {
            continue;
        }
        let (i, j) = (fi as usize, fj as usize);
        if i >= grid.n_q || j >= grid.n_p {
            continue;
        }
        field.values[i * grid.n_p + j] += 1.0;
        kept += 1;
    }
    if kept == 0 {
        return Err(EnsembleError::AllPointsOutsideGrid);
    }
    if bandwidth > 0.0 {
        smooth_separable(&mut field, bandwidth);
    }
    let inv = 1.0 / (kept as f64 * grid.cell_area());
    for v in &mut field.values {
        *v *= inv;
    }
    Ok(field)
}

/// In-place separable convolution with a truncated discrete Gaussian of
/// σ = `bandwidth` cells along each axis. The kernel is normalized to unit
/// sum, so mass and nonnegativity are preserved exactly.
fn smooth_separable(field: &mut PhaseSpaceField, bandwidth: f64) {
    let radius = (4.0 * bandwidth).ceil() as usize;
    let mut kernel = Vec::with_capacity(2 * radius + 1);
    for k in -(radius as isize)..=(radius as isize) {
        let u = k as f64 / bandwidth;
        kernel.push((-0.5 * u * u).exp());
    }
    let ksum: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= ksum;
    }
    let (n_q, n_p) = (field.grid.n_q, field.grid.n_p);
    let mut tmp = vec![0.0; field.values.len()];
    // Along p (contiguous), zero boundary.
    for i in 0..n_q {
        let row = &field.values[i * n_p..(i + 1) * n_p];
        let out = &mut tmp[i * n_p..(i + 1) * n_p];
        for j in 0..n_p {
            let mut acc = 0.0;
            for (kk, &w) in kernel.iter().enumerate() {
                let jj = j as isize + kk as isize - radius as isize;
                if jj >= 0 && (jj as usize) < n_p {
                    acc += w * row[jj as usize];
                }
            }
            out[j] = acc;
        }
    }
    // Along q.
    for j in 0..n_p {
        for i in 0..n_q {
            let mut acc = 0.0;
            for (kk, &w) in kernel.iter().enumerate() {
                let ii = i as isize + kk as isize - radius as isize;
                if ii >= 0 && (ii as usize) < n_q {
                    acc += w * tmp[ii as usize * n_p + j];
                }
            }
            field.values[i * n_p + j] = acc;
        }
    }
}

/// Builds a spectral propagator for the classical (Fokker-Planck) kernel.
pub fn fokker_planck_propagator(
    field: &PhaseSpaceField,
    params: &SystemParams,
    dt: f64,
) -> Result<SplitStepPropagator, PropagatorError> {
    SplitStepPropagator::new(field.grid, params, dt, KernelKind::Classical)
}

/// Grid Fokker-Planck evolution: identical split-step machinery as the Wigner
/// solver with the two-point kernel replaced by its classical limit.
pub fn evolve_fokker_planck(
    field: PhaseSpaceField,
    t_final: f64,
    dt: f64,
    params: &SystemParams,
    schedule: &SnapshotSchedule,
) -> Result<EvolutionOutput, PropagatorError> {
    let mut prop = SplitStepPropagator::new(field.grid, params, dt, KernelKind::Classical)?;
    evolve_with(&mut prop, field, t_final, schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::diagnostics;
    use crate::model::stroboscopic_map;

    #[test]
    fn zero_noise_reduces_to_euler_and_converges_to_the_map() {
        let params = SystemParams::duffing_benchmark(0.0);
        let z0 = PhasePoint::new(1.0, 0.5, 0.0);
        let period = params.drive_period();
        let exact = stroboscopic_map(z0, &params, 4000).unwrap();
        let mut errs = Vec::new();
        for steps in [2000usize, 4000, 8000] {
            let mut ens = TrajectoryEnsemble::from_point(1, z0, 9);
            evolve_ensemble(&mut ens, period, period / steps as f64, &params).unwrap();
            let z = ens.points[0];
            errs.push(((z.q - exact.q).powi(2) + (z.p - exact.p).powi(2)).sqrt());
        }
        // O(dt): halving dt roughly halves the error.
        assert!(errs[0] / errs[1] > 1.5 && errs[0] / errs[1] < 2.6);
        assert!(errs[1] / errs[2] > 1.5 && errs[1] / errs[2] < 2.6);
    }

    #[test]
    fn free_particle_momentum_variance_matches_wiener_statistics() {
        let params = SystemParams::free(1.0, 0.1, 1e-2);
        let n = 100_000;
        let t = 2.0;
        let mut ens = TrajectoryEnsemble::from_point(n, PhasePoint::new(0.0, 0.0, 0.0), 3);
        evolve_ensemble(&mut ens, t, 1e-2, &params).unwrap();
        let m = ens.moments();
        let expected = 2.0 * params.d * t;
        // SE(var) ≈ var·√(2/(n−1)).
        let se = expected * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!(
            (m.var_p - expected).abs() < 3.0 * se,
            "var_p {} vs {}",
            m.var_p,
            expected
        );
    }

    #[test]
    fn fixed_seed_is_bit_reproducible() {
        let params = SystemParams::duffing_benchmark(1e-2);
        let mut a = TrajectoryEnsemble::from_point(8, PhasePoint::new(1.0, 0.0, 0.0), 1234);
        let mut b = TrajectoryEnsemble::from_point(8, PhasePoint::new(1.0, 0.0, 0.0), 1234);
        evolve_ensemble(&mut a, 1.0, 1e-3, &params).unwrap();
        evolve_ensemble(&mut b, 1.0, 1e-3, &params).unwrap();
        for (x, y) in a.points.iter().zip(&b.points) {
            assert_eq!(x.q.to_bits(), y.q.to_bits());
            assert_eq!(x.p.to_bits(), y.p.to_bits());
        }
    }

    #[test]
    fn staged_evolution_continues_the_noise_streams() {
        let params = SystemParams::free(1.0, 0.1, 1e-2);
        let z0 = PhasePoint::new(0.0, 0.0, 0.0);
        let mut once = TrajectoryEnsemble::from_point(16, z0, 7);
        evolve_ensemble(&mut once, 1.0, 1e-3, &params).unwrap();
        let mut staged = TrajectoryEnsemble::from_point(16, z0, 7);
        evolve_ensemble(&mut staged, 0.5, 1e-3, &params).unwrap();
        evolve_ensemble(&mut staged, 1.0, 1e-3, &params).unwrap();
        for (x, y) in once.points.iter().zip(&staged.points) {
            assert_eq!(x.p.to_bits(), y.p.to_bits());
        }
    }

    #[test]
    fn identity_when_t_final_equals_current_time() {
        let params = SystemParams::duffing_benchmark(1e-2);
        let mut ens = TrajectoryEnsemble::from_point(4, PhasePoint::new(1.0, 0.0, 0.0), 5);
        let before = ens.points.clone();
        evolve_ensemble(&mut ens, 0.0, 1e-3, &params).unwrap();
        assert_eq!(before, ens.points);
    }

    #[test]
    fn harmonic_energy_grows_at_diffusion_rate() {
        // ⟨dE⟩ = (D/m) dt for kinetic diffusion without dissipation.
        let k = 4.0;
        let params = SystemParams::harmonic(1.0, k, 0.1, 1e-2);
        let n = 50_000;
        let t = 4.0;
        let mut ens = TrajectoryEnsemble::from_point(n, PhasePoint::new(0.0, 0.0, 0.0), 11);
        evolve_ensemble(&mut ens, t, 5e-4, &params).unwrap();
        let mean_e: f64 = ens
            .points
            .iter()
            .map(|z| z.p * z.p / 2.0 + 0.5 * k * z.q * z.q)
            .sum::<f64>()
            / n as f64;
        let expected = params.d / params.m * t;
        assert!(
            (mean_e - expected).abs() < 0.05 * expected,
            "mean energy {mean_e} vs {expected}"
        );
    }

    #[test]
    fn single_point_bins_to_one_cell() {
        let g = PhaseSpaceGrid::new(-2.0, 2.0, -2.0, 2.0, 16, 16).unwrap();
        // Exactly at a node.
        let z = PhasePoint::new(g.q_at(5), g.p_at(9), 0.0);
        let ens = TrajectoryEnsemble::from_point(1, z, 0);
        let f = density_from_ensemble(&ens, g, 0.0, 0.1).unwrap();
        let nonzero: Vec<(usize, f64)> = f
            .values
            .iter()
            .cloned()
            .enumerate()
            .filter(|&(_, v)| v != 0.0)
            .collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(nonzero[0].0, 5 * 16 + 9);
        assert!((nonzero[0].1 - 1.0 / g.cell_area()).abs() < 1e-12);
    }

    #[test]
    fn all_points_outside_grid_is_an_error() {
        let g = PhaseSpaceGrid::new(-1.0, 1.0, -1.0, 1.0, 16, 16).unwrap();
        let ens = TrajectoryEnsemble::from_point(3, PhasePoint::new(5.0, 5.0, 0.0), 0);
        assert!(matches!(
            density_from_ensemble(&ens, g, 0.0, 0.1),
            Err(EnsembleError::AllPointsOutsideGrid)
        ));
    }

    #[test]
    fn binned_density_converges_to_the_sampled_gaussian() {
        // L1 error should fall like n^{-1/2}: ratio at n vs 4n ≈ 2 within 30%.
        let hbar = 0.1;
        let sigma = (hbar / 2.0f64).sqrt();
        let g = PhaseSpaceGrid::new(-2.0, 2.0, -2.0, 2.0, 64, 64).unwrap();
        let analytic = crate::grid::init_coherent_state(g, 0.0, 0.0, sigma, hbar).unwrap();
        let l1_at = |n: usize| {
            let ens = TrajectoryEnsemble::sample_coherent(n, 0.0, 0.0, sigma, hbar, 0.0, 21);
            let f = density_from_ensemble(&ens, g, 0.0, hbar).unwrap();
            0.5 * f
                .values
                .iter()
                .zip(&analytic.values)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                * g.cell_area()
        };
        let e1 = l1_at(10_000);
        let e2 = l1_at(40_000);
        let ratio = e1 / e2;
        assert!(
            (ratio - 2.0).abs() < 0.6,
            "MC scaling ratio {ratio} (e1={e1:.4}, e2={e2:.4})"
        );
    }

    #[test]
    fn smoothing_preserves_mass_and_positivity() {
        let hbar = 0.1;
        let g = PhaseSpaceGrid::new(-2.0, 2.0, -2.0, 2.0, 32, 32).unwrap();
        let ens = TrajectoryEnsemble::sample_coherent(5_000, 0.0, 0.0, 0.3, hbar, 0.0, 2);
        let f = density_from_ensemble(&ens, g, 1.0, hbar).unwrap();
        assert!(f.values.iter().all(|&v| v >= 0.0));
        assert!((f.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fokker_planck_free_diffusion_law() {
        let params = SystemParams::free(1.0, 0.1, 1e-2);
        let g = PhaseSpaceGrid::new(-4.0, 4.0, -4.0, 4.0, 128, 128).unwrap();
        let f0 = crate::grid::init_coherent_state(g, 0.0, 0.0, (0.05f64).sqrt(), 0.1)
            .unwrap()
            .into_classical();
        let d0 = diagnostics(&f0);
        let out = evolve_fokker_planck(f0, 2.0, 0.01, &params, &SnapshotSchedule::none()).unwrap();
        let d1 = diagnostics(&out.field);
        assert!(((d1.var_p - d0.var_p) - 2.0 * params.d * 2.0).abs() < 1e-6);
    }

    #[test]
    fn ensemble_mean_tracks_the_deterministic_trajectory_at_zero_noise() {
        let params = SystemParams::duffing_benchmark(0.0);
        let z0 = PhasePoint::new(1.0, 0.0, 0.0);
        let mut ens = TrajectoryEnsemble::from_point(10, z0, 1);
        let dt = params.drive_period() / 20_000.0;
        evolve_ensemble(&mut ens, params.drive_period(), dt, &params).unwrap();
        let m = ens.moments();
        assert!(m.var_q < 1e-28 && m.var_p < 1e-28);
        let exact = stroboscopic_map(z0, &params, 20_000).unwrap();
        assert!((m.mean_q - exact.q).abs() < 2e-3);
        assert!((m.mean_p - exact.p).abs() < 2e-2);
    }
}
