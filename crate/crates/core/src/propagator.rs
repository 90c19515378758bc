//! Split-step spectral propagator for the open phase-space master equation
//!
//!   ∂f/∂t = −(p/m) ∂_q f + (∂_q V) ∂_p f + L_q f + D ∂²_p f
//!
//! Strang splitting alternates free streaming, applied as a phase in the
//! q-spectral domain, with the potential + quantum + diffusion update applied
//! in the X domain (Fourier conjugate to p, kernel e^{−ipX/ħ}):
//!
//!   multiply by exp(+i·dt/ħ·[V(q+X/2, t½) − V(q−X/2, t½)]) · exp(−k_env X² dt)
//!
//! The two-point potential kernel is exact: its X-expansion reproduces the
//! classical force term plus the entire odd Moyal series, which terminates at
//! X³ for a quartic potential. The classical solver replaces the bracket with
//! its first-order term X·V′(q, t½) and is otherwise identical. The diffusion
//! factor is the exact X-space solution of ∂_t f = D ∂²_p f, and the drive
//! contributes Λcos(ωt½)·X to either bracket, so it is applied as a separate
//! per-step factor while the rest of the kernel is precomputed.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use thiserror::Error;

use crate::grid::{FieldKind, PhaseSpaceField, PhaseSpaceGrid};
use crate::model::SystemParams;

#[derive(Debug, Error)]
pub enum PropagatorError {
    #[error("field contains non-finite values at t = {t} (time step too large?)")]
    NonFiniteField { t: f64 },
    #[error("boundary mass {mass:.3e} exceeds cap {cap:.3e} at t = {t}: spectral wrap-around")]
    BoundaryMassExceeded { mass: f64, cap: f64, t: f64 },
    #[error("field kind {found:?} does not match the {expected:?} propagator")]
    KindMismatch {
        expected: FieldKind,
        found: FieldKind,
    },
    #[error("field grid does not match the propagator grid")]
    GridMismatch,
    #[error("time step must be positive and divide the requested span")]
    BadTimeStep,
}

/// Which bracket the X-domain kernel applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// Exact two-point bracket V(q+X/2) − V(q−X/2): classical + full quantum.
    Quantum,
    /// First-order bracket X·V′(q): the Fokker-Planck limit.
    Classical,
}

impl KernelKind {
    pub fn field_kind(self) -> FieldKind {
        match self {
            KernelKind::Quantum => FieldKind::Wigner,
            KernelKind::Classical => FieldKind::Classical,
        }
    }
}

pub struct SplitStepPropagator {
    pub grid: PhaseSpaceGrid,
    pub params: SystemParams,
    pub dt: f64,
    pub kind: KernelKind,
    /// Boundary-mass tripwire; `None` disables the check.
    pub boundary_cap: Option<f64>,

    r2c_p: Arc<dyn RealToComplex<f64>>,
    c2r_p: Arc<dyn ComplexToReal<f64>>,
    r2c_q: Arc<dyn RealToComplex<f64>>,
    c2r_q: Arc<dyn ComplexToReal<f64>>,

    /// Static kernel factor, row i: exp(i dt/ħ · bracket(q_i, X_j)) · e^{−k_env X_j² dt} / n_p.
    kernel_static: Vec<Complex64>,
    /// X_j/ħ for the per-step drive factor (already includes dt·Λ missing cos).
    drive_angle: Vec<f64>,
    /// Streaming phases for a half step, row j_p: exp(−i k_q (p_j/m) dt/2) / n_q.
    stream_half: Vec<Complex64>,
    /// Same for a full step.
    stream_full: Vec<Complex64>,

    /// Transposed field buffer (p-major) for the streaming pass.
    transposed: Vec<f64>,
}

impl SplitStepPropagator {
    pub fn new(
        grid: PhaseSpaceGrid,
        params: &SystemParams,
        dt: f64,
        kind: KernelKind,
    ) -> Result<Self, PropagatorError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(PropagatorError::BadTimeStep);
        }
        let (n_q, n_p) = (grid.n_q, grid.n_p);
        let mut planner = RealFftPlanner::<f64>::new();
        let r2c_p = planner.plan_fft_forward(n_p);
        let c2r_p = planner.plan_fft_inverse(n_p);
        let r2c_q = planner.plan_fft_forward(n_q);
        let c2r_q = planner.plan_fft_inverse(n_q);

        // X bins conjugate to p: X_j = j·ΔX, ΔX = 2πħ/(n_p·Δp).
        let dx = 2.0 * std::f64::consts::PI * params.hbar / (n_p as f64 * grid.dp());
        let k_env = params.k_env();
        let np_half = n_p / 2 + 1;
        let inv_np = 1.0 / n_p as f64;
        let mut kernel_static = vec![Complex64::new(0.0, 0.0); n_q * np_half];
        for i in 0..n_q {
            let q = grid.q_at(i);
            for j in 0..np_half {
                let x = j as f64 * dx;
                let bracket = match kind {
                    KernelKind::Quantum => {
                        let vp = static_potential(q + 0.5 * x, params);
                        let vm = static_potential(q - 0.5 * x, params);
                        vp - vm
                    }
                    KernelKind::Classical => x * static_potential_deriv(q, params),
                };
                let phase = dt / params.hbar * bracket;
                let damp = (-k_env * x * x * dt).exp();
                kernel_static[i * np_half + j] =
                    Complex64::from_polar(damp * inv_np, phase);
            }
        }
        let drive_angle: Vec<f64> = (0..np_half)
            .map(|j| j as f64 * dx * dt / params.hbar)
            .collect();

        // Streaming phases: k_j = 2πj/L_q, multiplier exp(−i k_j (p/m) dt).
        let l_q = grid.q_max - grid.q_min;
        let nq_half = n_q / 2 + 1;
        let inv_nq = 1.0 / n_q as f64;
        let mut stream_half = vec![Complex64::new(0.0, 0.0); n_p * nq_half];
        let mut stream_full = vec![Complex64::new(0.0, 0.0); n_p * nq_half];
        for jp in 0..n_p {
            let v = grid.p_at(jp) / params.m;
            for k in 0..nq_half {
                let kq = 2.0 * std::f64::consts::PI * k as f64 / l_q;
                stream_half[jp * nq_half + k] =
                    Complex64::from_polar(inv_nq, -kq * v * 0.5 * dt);
                stream_full[jp * nq_half + k] = Complex64::from_polar(inv_nq, -kq * v * dt);
            }
        }
        // The Nyquist mode cannot carry a complex phase and stay real, and a
        // real projection would make half∘half ≠ full. Zero it: standard
        // dealiasing of the one unresolvable bin.
        for row in 0..n_q {
            kernel_static[row * np_half + np_half - 1] = Complex64::new(0.0, 0.0);
        }
        for row in 0..n_p {
            for tab in [&mut stream_half, &mut stream_full] {
                tab[row * nq_half + nq_half - 1] = Complex64::new(0.0, 0.0);
            }
        }

        Ok(SplitStepPropagator {
            grid,
            params: *params,
            dt,
            kind,
            boundary_cap: Some(1e-6),
            r2c_p,
            c2r_p,
            r2c_q,
            c2r_q,
            kernel_static,
            drive_angle,
            stream_half,
            stream_full,
            transposed: vec![0.0; n_q * n_p],
        })
    }

    fn check_field(&self, field: &PhaseSpaceField) -> Result<(), PropagatorError> {
        if field.grid != self.grid {
            return Err(PropagatorError::GridMismatch);
        }
        if field.kind != self.kind.field_kind() {
            return Err(PropagatorError::KindMismatch {
                expected: self.kind.field_kind(),
                found: field.kind,
            });
        }
        Ok(())
    }

    /// One full Strang step S(dt/2) K S(dt/2); `field.t` advances by dt.
    pub fn step(&mut self, field: &mut PhaseSpaceField) -> Result<(), PropagatorError> {
        self.check_field(field)?;
        let t_mid = field.t + 0.5 * self.dt;
        self.stream(&mut field.values, false);
        self.kernel(&mut field.values, t_mid);
        self.stream(&mut field.values, false);
        field.t += self.dt;
        self.guard(field)
    }

    /// Advances `n_steps` with the half-streams of interior steps merged:
    /// S(dt/2) K [S(dt) K]^{n−1} S(dt/2). Algebraically identical to `step`
    /// applied n times.
    pub fn evolve(
        &mut self,
        field: &mut PhaseSpaceField,
        n_steps: usize,
    ) -> Result<(), PropagatorError> {
        if n_steps == 0 {
            return Ok(());
        }
        self.check_field(field)?;
        let t0 = field.t;
        self.stream(&mut field.values, false);
        for s in 0..n_steps {
            let t_mid = t0 + (s as f64 + 0.5) * self.dt;
            self.kernel(&mut field.values, t_mid);
            if s + 1 < n_steps {
                self.stream(&mut field.values, true);
            } else {
                self.stream(&mut field.values, false);
            }
            field.t = t0 + (s + 1) as f64 * self.dt;
            self.guard(field)?;
        }
        Ok(())
    }

    fn guard(&self, field: &PhaseSpaceField) -> Result<(), PropagatorError> {
        let mass = field.boundary_mass();
        if !mass.is_finite() {
            return Err(PropagatorError::NonFiniteField { t: field.t });
        }
        if let Some(cap) = self.boundary_cap {
            if mass > cap {
                return Err(PropagatorError::BoundaryMassExceeded {
                    mass,
                    cap,
                    t: field.t,
                });
            }
        }
        Ok(())
    }

    /// X-domain potential + quantum + diffusion update at drive time `t_mid`.
    fn kernel(&mut self, values: &mut [f64], t_mid: f64) {
        let n_p = self.grid.n_p;
        let np_half = n_p / 2 + 1;
        let drive = self.params.lambda * (self.params.omega * t_mid).cos();
        let drive_factor: Vec<Complex64> = self
            .drive_angle
            .iter()
            .map(|&a| Complex64::from_polar(1.0, a * drive))
            .collect();
        let r2c = &self.r2c_p;
        let c2r = &self.c2r_p;
        let kernel_static = &self.kernel_static;
        values
            .par_chunks_exact_mut(n_p)
            .enumerate()
            .for_each_init(
                || {
                    (
                        vec![0.0f64; n_p],
                        vec![Complex64::default(); np_half],
                        vec![Complex64::default(); r2c.get_scratch_len().max(c2r.get_scratch_len())],
                    )
                },
                |(work, spec, scratch), (i, row)| {
                    work.copy_from_slice(row);
                    r2c.process_with_scratch(work, spec, scratch).unwrap();
                    let krow = &kernel_static[i * np_half..(i + 1) * np_half];
                    for j in 0..np_half {
                        spec[j] *= krow[j] * drive_factor[j];
                    }
                    // Keep packing exact for the inverse transform.
                    spec[0].im = 0.0;
                    spec[np_half - 1].im = 0.0;
                    c2r.process_with_scratch(spec, row, scratch).unwrap();
                },
            );
    }

    /// q-spectral streaming by a half or full step.
    fn stream(&mut self, values: &mut [f64], full: bool) {
        let (n_q, n_p) = (self.grid.n_q, self.grid.n_p);
        let nq_half = n_q / 2 + 1;
        transpose(values, &mut self.transposed, n_q, n_p);
        let table = if full {
            &self.stream_full
        } else {
            &self.stream_half
        };
        let r2c = &self.r2c_q;
        let c2r = &self.c2r_q;
        self.transposed
            .par_chunks_exact_mut(n_q)
            .enumerate()
            .for_each_init(
                || {
                    (
                        vec![0.0f64; n_q],
                        vec![Complex64::default(); nq_half],
                        vec![Complex64::default(); r2c.get_scratch_len().max(c2r.get_scratch_len())],
                    )
                },
                |(work, spec, scratch), (jp, line)| {
                    work.copy_from_slice(line);
                    r2c.process_with_scratch(work, spec, scratch).unwrap();
                    let srow = &table[jp * nq_half..(jp + 1) * nq_half];
                    for k in 0..nq_half {
                        spec[k] *= srow[k];
                    }
                    spec[0].im = 0.0;
                    spec[nq_half - 1].im = 0.0;
                    c2r.process_with_scratch(spec, line, scratch).unwrap();
                },
            );
        transpose(&self.transposed, values, n_p, n_q);
    }
}

fn static_potential(x: f64, params: &SystemParams) -> f64 {
    let x2 = x * x;
    params.b * x2 * x2 - params.a * x2
}

fn static_potential_deriv(x: f64, params: &SystemParams) -> f64 {
    4.0 * params.b * x * x * x - 2.0 * params.a * x
}

/// Blocked out-of-place transpose of an n_rows×n_cols row-major matrix.
fn transpose(src: &[f64], dst: &mut [f64], n_rows: usize, n_cols: usize) {
    const B: usize = 32;
    for ib in (0..n_rows).step_by(B) {
        let imax = (ib + B).min(n_rows);
        for jb in (0..n_cols).step_by(B) {
            let jmax = (jb + B).min(n_cols);
            for i in ib..imax {
                for j in jb..jmax {
                    dst[j * n_rows + i] = src[i * n_cols + j];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{diagnostics, init_coherent_state};

    fn gaussian_field(kind: FieldKind) -> PhaseSpaceField {
        let g = PhaseSpaceGrid::new(-4.0, 4.0, -4.0, 4.0, 128, 128).unwrap();
        let f = init_coherent_state(g, 1.0, 0.0, (0.05f64).sqrt(), 0.1).unwrap();
        match kind {
            FieldKind::Wigner => f,
            FieldKind::Classical => f.into_classical(),
        }
    }

    #[test]
    fn transpose_round_trip() {
        let n_r = 48;
        let n_c = 80;
        let src: Vec<f64> = (0..n_r * n_c).map(|k| k as f64).collect();
        let mut t = vec![0.0; n_r * n_c];
        let mut back = vec![0.0; n_r * n_c];
        transpose(&src, &mut t, n_r, n_c);
        transpose(&t, &mut back, n_c, n_r);
        assert_eq!(src, back);
        assert_eq!(t[5 * n_r + 3], src[3 * n_c + 5]);
    }

    #[test]
    fn norm_is_conserved_per_step() {
        let params = SystemParams::duffing_benchmark(1e-3);
        let mut f = gaussian_field(FieldKind::Wigner);
        let mut prop =
            SplitStepPropagator::new(f.grid, &params, params.drive_period() / 2000.0, KernelKind::Quantum)
                .unwrap();
        let n0 = f.norm();
        for _ in 0..50 {
            let before = f.norm();
            prop.step(&mut f).unwrap();
            assert!((f.norm() - before).abs() < 1e-12);
        }
        assert!((f.norm() - n0).abs() < 1e-11);
    }

    #[test]
    fn merged_evolve_matches_repeated_steps() {
        let params = SystemParams::duffing_benchmark(1e-3);
        let mut a = gaussian_field(FieldKind::Wigner);
        let mut b = a.clone();
        let dt = params.drive_period() / 500.0;
        let mut p1 = SplitStepPropagator::new(a.grid, &params, dt, KernelKind::Quantum).unwrap();
        let mut p2 = SplitStepPropagator::new(b.grid, &params, dt, KernelKind::Quantum).unwrap();
        for _ in 0..20 {
            p1.step(&mut a).unwrap();
        }
        p2.evolve(&mut b, 20).unwrap();
        let max = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        assert!(max < 1e-12, "merged vs stepped sup diff {max}");
        assert!((a.t - b.t).abs() < 1e-12);
    }

    #[test]
    fn free_diffusion_grows_var_p_exactly() {
        // V = 0, D > 0: var_p gains 2·D·t regardless of splitting.
        let params = SystemParams::free(1.0, 0.1, 1e-2);
        let g = PhaseSpaceGrid::new(-4.0, 4.0, -4.0, 4.0, 128, 128).unwrap();
        let f0 = init_coherent_state(g, 0.0, 0.0, (0.05f64).sqrt(), 0.1).unwrap();
        let mut f = f0.clone();
        let d0 = diagnostics(&f);
        let mut prop = SplitStepPropagator::new(g, &params, 0.01, KernelKind::Quantum).unwrap();
        prop.evolve(&mut f, 200).unwrap(); // t = 2
        let d1 = diagnostics(&f);
        let growth = d1.var_p - d0.var_p;
        assert!(
            (growth - 2.0 * 1e-2 * 2.0).abs() < 1e-8,
            "var_p growth {growth}"
        );
    }

    #[test]
    fn quantum_and_classical_kernels_coincide_for_quadratic_potentials() {
        let params = SystemParams::harmonic(1.0, 1.3, 0.1, 1e-2);
        let g = PhaseSpaceGrid::new(-4.0, 4.0, -4.0, 4.0, 128, 128).unwrap();
        let base = init_coherent_state(g, 1.0, 0.0, (0.05f64).sqrt(), 0.1).unwrap();
        let mut wig = base.clone();
        let mut cls = base.into_classical();
        let dt = 0.005;
        let mut pq = SplitStepPropagator::new(g, &params, dt, KernelKind::Quantum).unwrap();
        let mut pc = SplitStepPropagator::new(g, &params, dt, KernelKind::Classical).unwrap();
        pq.evolve(&mut wig, 400).unwrap();
        pc.evolve(&mut cls, 400).unwrap();
        let sup = wig
            .values
            .iter()
            .zip(&cls.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(sup < 1e-10, "quadratic equivalence sup diff {sup}");
    }

    #[test]
    fn harmonic_means_follow_the_classical_trajectory() {
        // Ehrenfest: for quadratic V the Wigner means rotate with the
        // classical flow; checks the signs of both spectral multipliers.
        let k = 2.0;
        let params = SystemParams::harmonic(1.0, k, 0.1, 0.0);
        let g = PhaseSpaceGrid::new(-4.0, 4.0, -4.0, 4.0, 128, 128).unwrap();
        let mut f = init_coherent_state(g, 1.0, 0.0, (0.05f64).sqrt(), 0.1).unwrap();
        let omega0 = k.sqrt();
        let quarter = 0.5 * std::f64::consts::PI / omega0;
        let steps = 400;
        let mut prop =
            SplitStepPropagator::new(g, &params, quarter / steps as f64, KernelKind::Quantum)
                .unwrap();
        prop.evolve(&mut f, steps).unwrap();
        let d = diagnostics(&f);
        // q(t) = cos(ω₀ t), p(t) = −ω₀ sin(ω₀ t) from (1, 0).
        assert!(d.mean_q.abs() < 1e-3, "mean_q {}", d.mean_q);
        assert!((d.mean_p + omega0).abs() < 1e-3, "mean_p {}", d.mean_p);
    }

    #[test]
    fn kind_and_grid_mismatches_are_rejected() {
        let params = SystemParams::duffing_benchmark(0.0);
        let f = gaussian_field(FieldKind::Classical);
        let mut prop =
            SplitStepPropagator::new(f.grid, &params, 0.001, KernelKind::Quantum).unwrap();
        let mut f2 = f.clone();
        assert!(matches!(
            prop.step(&mut f2),
            Err(PropagatorError::KindMismatch { .. })
        ));
    }

    #[test]
    fn boundary_tripwire_fires_on_escaping_content() {
        // Free streaming pushes a moving packet into the boundary frame.
        let params = SystemParams::free(1.0, 0.1, 0.0);
        let g = PhaseSpaceGrid::new(-4.0, 4.0, -4.0, 4.0, 64, 64).unwrap();
        let mut f = init_coherent_state(g, 0.0, 2.0, 0.4, 0.1).unwrap();
        let mut prop = SplitStepPropagator::new(g, &params, 0.01, KernelKind::Quantum).unwrap();
        let mut tripped = false;
        for _ in 0..400 {
            if let Err(PropagatorError::BoundaryMassExceeded { .. }) = prop.step(&mut f) {
                tripped = true;
                break;
            }
        }
        assert!(tripped, "packet reached the edge without tripping the cap");
    }
}
