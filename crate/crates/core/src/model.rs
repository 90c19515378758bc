//! Physical system definition: the driven Duffing oscillator
//! `H = p²/2m + B q⁴ − A q² + Λ q cos(ωt)`, its stroboscopic map, and the
//! hyperbolic fixed point of that map.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Physical constants of the system and its diffusive environment.
///
/// Units are the dimensionless ones of the benchmark: action in units of ħ₀=1
/// scales, `d` is a momentum diffusion coefficient (action²/time) and
/// `k_env = d/ħ²` the position-coupling strength of the environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Particle mass.
    pub m: f64,
    /// Quadratic well coefficient A (the −A q² term).
    pub a: f64,
    /// Quartic coefficient B (the +B q⁴ term).
    pub b: f64,
    /// Drive amplitude Λ.
    pub lambda: f64,
    /// Drive angular frequency ω.
    pub omega: f64,
    /// Reduced Planck constant.
    pub hbar: f64,
    /// Momentum diffusion coefficient D.
    pub d: f64,
}

impl SystemParams {
    /// Benchmark parameter set: A = Λ = 10, B = 0.5, ω = 6.07, ħ = 0.1, m = 1.
    /// The diffusion coefficient is chosen per experiment.
    pub fn duffing_benchmark(d: f64) -> Self {
        SystemParams {
            m: 1.0,
            a: 10.0,
            b: 0.5,
            lambda: 10.0,
            omega: 6.07,
            hbar: 0.1,
            d,
        }
    }

    /// Undriven harmonic oscillator V = ½ k q², expressed as A = −k/2, B = 0.
    pub fn harmonic(m: f64, k: f64, hbar: f64, d: f64) -> Self {
        SystemParams {
            m,
            a: -0.5 * k,
            b: 0.0,
            lambda: 0.0,
            omega: 1.0,
            hbar,
            d,
        }
    }

    /// Free particle (V = 0).
    pub fn free(m: f64, hbar: f64, d: f64) -> Self {
        SystemParams {
            m,
            a: 0.0,
            b: 0.0,
            lambda: 0.0,
            omega: 1.0,
            hbar,
            d,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.m > 0.0) || !self.m.is_finite() {
            return Err(ModelError::InvalidParams("m must be positive"));
        }
        if !(self.b >= 0.0) || !self.b.is_finite() {
            return Err(ModelError::InvalidParams("b must be nonnegative"));
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(ModelError::InvalidParams("omega must be positive"));
        }
        if !(self.hbar > 0.0) || !self.hbar.is_finite() {
            return Err(ModelError::InvalidParams("hbar must be positive"));
        }
        if !(self.d >= 0.0) || !self.d.is_finite() {
            return Err(ModelError::InvalidParams("d must be nonnegative"));
        }
        if !self.a.is_finite() || !self.lambda.is_finite() {
            return Err(ModelError::InvalidParams("a and lambda must be finite"));
        }
        Ok(())
    }

    /// Environment coupling k_env = D/ħ². Exact by construction.
    pub fn k_env(&self) -> f64 {
        self.d / (self.hbar * self.hbar)
    }

    /// Drive period T = 2π/ω.
    pub fn drive_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }

    /// Position of the potential minima ±√(A/2B) for a double well (A, B > 0).
    pub fn well_position(&self) -> Option<f64> {
        if self.a > 0.0 && self.b > 0.0 {
            Some((self.a / (2.0 * self.b)).sqrt())
        } else {
            None
        }
    }
}

/// A point of phase space at a given time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub q: f64,
    pub p: f64,
    pub t: f64,
}

impl PhasePoint {
    pub fn new(q: f64, p: f64, t: f64) -> Self {
        PhasePoint { q, p, t }
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.p.is_finite() && self.t.is_finite()
    }
}

/// Potential and its q-derivatives at (x, t). V is a quartic polynomial, so
/// everything beyond the third derivative vanishes identically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialDerivs {
    pub v: f64,
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
}

/// V = B x⁴ − A x² + Λ x cos(ωt) and its exact derivatives.
pub fn potential_derivatives(x: f64, t: f64, params: &SystemParams) -> PotentialDerivs {
    let drive = params.lambda * (params.omega * t).cos();
    let x2 = x * x;
    PotentialDerivs {
        v: params.b * x2 * x2 - params.a * x2 + drive * x,
        v1: 4.0 * params.b * x2 * x - 2.0 * params.a * x + drive,
        v2: 12.0 * params.b * x2 - 2.0 * params.a,
        v3: 24.0 * params.b * x,
    }
}

/// f(x, t) = −∂V/∂x = 2A x − 4B x³ − Λ cos(ωt).
pub fn force(x: f64, t: f64, params: &SystemParams) -> f64 {
    2.0 * params.a * x
        - 4.0 * params.b * x * x * x
        - params.lambda * (params.omega * t).cos()
}

/// ∂f/∂x = 2A − 12B x² (time independent).
pub fn force_gradient(x: f64, params: &SystemParams) -> f64 {
    2.0 * params.a - 12.0 * params.b * x * x
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid system parameters: {0}")]
    InvalidParams(&'static str),
    #[error("trajectory left the finite domain at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("Newton iteration did not converge within {iters} iterations (residual {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("fixed point is not hyperbolic: |multipliers| = {mu_abs:.6} within tolerance of 1")]
    NotHyperbolic { mu_abs: f64 },
}

/// One kick-drift-kick step of Hamilton's equations with the time-dependent
/// force frozen at the interval midpoint. Second order, exactly area
/// preserving.
#[inline]
pub fn symplectic_step(q: f64, p: f64, t: f64, dt: f64, params: &SystemParams) -> (f64, f64) {
    let t_mid = t + 0.5 * dt;
    let p_half = p + 0.5 * dt * force(q, t_mid, params);
    let q_new = q + dt * p_half / params.m;
    let p_new = p_half + 0.5 * dt * force(q_new, t_mid, params);
    (q_new, p_new)
}

/// `symplectic_step` together with its exact tangent map. The Jacobian of the
/// numerical step is the product of unit-determinant factors, so the returned
/// 2×2 matrix [[a,b],[c,d]] has det = 1 to round-off.
#[inline]
pub fn symplectic_step_tangent(
    q: f64,
    p: f64,
    t: f64,
    dt: f64,
    params: &SystemParams,
) -> ((f64, f64), [f64; 4]) {
    let t_mid = t + 0.5 * dt;
    let g0 = force_gradient(q, params);
    let p_half = p + 0.5 * dt * force(q, t_mid, params);
    let q_new = q + dt * p_half / params.m;
    let g1 = force_gradient(q_new, params);
    let p_new = p_half + 0.5 * dt * force(q_new, t_mid, params);

    // J = K(q_new) · D · K(q): kicks have unit diagonal with (dt/2)·f' below,
    // the drift has dt/m above.
    let h = 0.5 * dt;
    let dm = dt / params.m;
    // K(q): [[1, 0], [h g0, 1]]; D·K: [[1 + dm*h*g0, dm], [h g0, 1]]
    let a = 1.0 + dm * h * g0;
    let b = dm;
    let c = h * g0;
    let d = 1.0;
    // K(q_new)·(D·K):
    let j = [a, b, h * g1 * a + c, h * g1 * b + d];
    ((q_new, p_new), j)
}

/// Integrates Hamilton's equations (D = 0) over exactly one drive period with
/// `steps_per_period` fixed symplectic steps.
pub fn stroboscopic_map(
    start: PhasePoint,
    params: &SystemParams,
    steps_per_period: usize,
) -> Result<PhasePoint, ModelError> {
    let period = params.drive_period();
    let dt = period / steps_per_period as f64;
    let mut q = start.q;
    let mut p = start.p;
    for k in 0..steps_per_period {
        let t = start.t + k as f64 * dt;
        let (qn, pn) = symplectic_step(q, p, t, dt, params);
        q = qn;
        p = pn;
        if !(q.is_finite() && p.is_finite()) {
            return Err(ModelError::NonFiniteState { t });
        }
    }
    Ok(PhasePoint::new(q, p, start.t + period))
}

/// Stroboscopic map together with its monodromy matrix, accumulated from the
/// per-step analytic tangent maps.
pub fn stroboscopic_map_with_monodromy(
    start: PhasePoint,
    params: &SystemParams,
    steps_per_period: usize,
) -> Result<(PhasePoint, [f64; 4]), ModelError> {
    let period = params.drive_period();
    let dt = period / steps_per_period as f64;
    let mut q = start.q;
    let mut p = start.p;
    let mut mono = [1.0, 0.0, 0.0, 1.0];
    for k in 0..steps_per_period {
        let t = start.t + k as f64 * dt;
        let ((qn, pn), j) = symplectic_step_tangent(q, p, t, dt, params);
        q = qn;
        p = pn;
        mono = mat_mul(&j, &mono);
        if !(q.is_finite() && p.is_finite()) {
            return Err(ModelError::NonFiniteState { t });
        }
    }
    Ok((PhasePoint::new(q, p, start.t + period), mono))
}

#[inline]
pub(crate) fn mat_mul(l: &[f64; 4], r: &[f64; 4]) -> [f64; 4] {
    [
        l[0] * r[0] + l[1] * r[2],
        l[0] * r[1] + l[1] * r[3],
        l[2] * r[0] + l[3] * r[2],
        l[2] * r[1] + l[3] * r[3],
    ]
}

/// A hyperbolic fixed point of the stroboscopic map with its linearization.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FixedPoint {
    pub location: PhasePoint,
    /// Local Lyapunov exponent λ = ln|μ_max|/T from the largest monodromy
    /// multiplier.
    pub lambda: f64,
    /// Unit vector along the stable eigendirection, in the rescaled
    /// coordinates q' = √(λm) q, p' = p/√(λm).
    pub stable_dir: [f64; 2],
    /// Unit vector along the unstable eigendirection (rescaled coordinates).
    pub unstable_dir: [f64; 2],
    /// |map(z*) − z*| at the converged point.
    pub residual: f64,
}

/// Newton search for a fixed point of the stroboscopic map, starting from
/// `guess`. The Jacobian of `map(z) − z` is built from central finite
/// differences with step 1e-6 in coordinates rescaled by the undriven rate
/// √(2A/m); eigen-data comes from the analytic monodromy at the solution.
pub fn find_saddle(
    params: &SystemParams,
    guess: PhasePoint,
    tol: f64,
    steps_per_period: usize,
) -> Result<FixedPoint, ModelError> {
    params.validate()?;
    let max_iters = 50;
    // Scale for the finite-difference steps; falls back to 1 for potentials
    // without a quadratic hilltop.
    let rate = if params.a > 0.0 {
        (2.0 * params.a / params.m).sqrt()
    } else {
        1.0
    };
    let s = (rate * params.m).sqrt();
    let eps = 1e-6;
    let hq = eps / s;
    let hp = eps * s;

    // Residual of map(z) − z; non-finite excursions count as infinite so the
    // damped Newton backtracks instead of dying inside the flow.
    let res = |z: PhasePoint| -> (f64, f64, f64) {
        match stroboscopic_map(z, params, steps_per_period) {
            Ok(fz) => {
                let rq = fz.q - z.q;
                let rp = fz.p - z.p;
                (rq, rp, (rq * rq + rp * rp).sqrt())
            }
            Err(_) => (f64::NAN, f64::NAN, f64::INFINITY),
        }
    };

    let mut z = guess;
    let (mut rq, mut rp, mut residual) = res(z);
    let mut converged = residual < tol;
    for _ in 0..max_iters {
        if converged {
            break;
        }
        if !residual.is_finite() {
            return Err(ModelError::NoConvergence {
                iters: max_iters,
                residual,
            });
        }
        let map2 = |q: f64, p: f64| -> Result<(f64, f64), ModelError> {
            let out = stroboscopic_map(PhasePoint::new(q, p, z.t), params, steps_per_period)?;
            Ok((out.q, out.p))
        };
        let (fqp, fqm) = (map2(z.q + hq, z.p)?, map2(z.q - hq, z.p)?);
        let (fpp, fpm) = (map2(z.q, z.p + hp)?, map2(z.q, z.p - hp)?);
        // Jacobian of map(z) − z.
        let j = [
            (fqp.0 - fqm.0) / (2.0 * hq) - 1.0,
            (fpp.0 - fpm.0) / (2.0 * hp),
            (fqp.1 - fqm.1) / (2.0 * hq),
            (fpp.1 - fpm.1) / (2.0 * hp) - 1.0,
        ];
        let det = j[0] * j[3] - j[1] * j[2];
        if det.abs() < 1e-14 {
            return Err(ModelError::NoConvergence {
                iters: max_iters,
                residual,
            });
        }
        let dq = -(j[3] * rq - j[1] * rp) / det;
        let dp = -(-j[2] * rq + j[0] * rp) / det;
        // Backtracking: accept the longest step in {1, 1/2, ...} that reduces
        // the residual; the full nonlinear map is far wilder than its local
        // linearization around a strongly unstable point.
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial = PhasePoint::new(z.q + alpha * dq, z.p + alpha * dp, z.t);
            let (trq, trp, tres) = res(trial);
            if tres < residual {
                z = trial;
                rq = trq;
                rp = trp;
                residual = tres;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(ModelError::NoConvergence {
                iters: max_iters,
                residual,
            });
        }
        converged = residual < tol;
    }
    if !converged {
        return Err(ModelError::NoConvergence {
            iters: max_iters,
            residual,
        });
    }

    let (_, mono) = stroboscopic_map_with_monodromy(z, params, steps_per_period)?;
    let period = params.drive_period();
    // Eigenvalues of the (real, det≈1) monodromy matrix.
    let tr = mono[0] + mono[3];
    let det = mono[0] * mono[3] - mono[1] * mono[2];
    let disc = tr * tr / 4.0 - det;
    if disc <= 0.0 {
        return Err(ModelError::NotHyperbolic {
            mu_abs: det.abs().sqrt(),
        });
    }
    let root = disc.sqrt();
    let mu1 = tr / 2.0 + root;
    let mu2 = tr / 2.0 - root;
    let (mu_big, mu_small) = if mu1.abs() >= mu2.abs() {
        (mu1, mu2)
    } else {
        (mu2, mu1)
    };
    if (mu_big.abs() - 1.0).abs() < 1e-6 {
        return Err(ModelError::NotHyperbolic {
            mu_abs: mu_big.abs(),
        });
    }
    let lambda = mu_big.abs().ln() / period;

    // Eigenvectors in rescaled coordinates q' = √(λm) q, p' = p/√(λm):
    // M' = S M S⁻¹ with S = diag(s, 1/s), so M'₀₁ = s² M₀₁ and M'₁₀ = M₁₀/s².
    let s = (lambda * params.m).sqrt();
    let mp = [mono[0], mono[1] * s * s, mono[2] / (s * s), mono[3]];
    let unstable_dir = eigvec2(&mp, mu_big);
    let stable_dir = eigvec2(&mp, mu_small);

    Ok(FixedPoint {
        location: z,
        lambda,
        stable_dir,
        unstable_dir,
        residual,
    })
}

/// Linear-response guess for the drive-displaced hilltop orbit at stroboscopic
/// phase 0: the periodic solution of m q̈ = 2A q − Λcos(ωt) has
/// q(0) = Λ/(2A + mω²), p(0) = 0. A reliable Newton seed for `find_saddle`;
/// the naive origin guess lies outside the basin at strong drive.
pub fn driven_hilltop_guess(params: &SystemParams) -> PhasePoint {
    let q = params.lambda / (2.0 * params.a + params.m * params.omega * params.omega);
    PhasePoint::new(q, 0.0, 0.0)
}

/// Unit eigenvector of a 2×2 matrix for a (real) eigenvalue.
fn eigvec2(m: &[f64; 4], mu: f64) -> [f64; 2] {
    // (M − μ) v = 0; pick the better-conditioned row.
    let r1 = [m[0] - mu, m[1]];
    let r2 = [m[2], m[3] - mu];
    let n1 = r1[0] * r1[0] + r1[1] * r1[1];
    let n2 = r2[0] * r2[0] + r2[1] * r2[1];
    let v = if n1 >= n2 {
        [-r1[1], r1[0]]
    } else {
        [-r2[1], r2[0]]
    };
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    let mut out = [v[0] / n, v[1] / n];
    // Fix an orientation so results are reproducible.
    if out[0] < 0.0 || (out[0] == 0.0 && out[1] < 0.0) {
        out = [-out[0], -out[1]];
    }
    out
}

/// Total energy p²/2m + V(q, t); conserved for Λ = 0, D = 0.
pub fn energy(point: &PhasePoint, params: &SystemParams) -> f64 {
    let pd = potential_derivatives(point.q, point.t, params);
    point.p * point.p / (2.0 * params.m) + pd.v
}
