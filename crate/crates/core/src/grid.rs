//! Phase-space discretization, initial states, and field diagnostics shared
//! by the Wigner and classical grid solvers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("bad grid extents: {0}")]
    BadExtents(&'static str),
    #[error("grid point counts must be powers of two >= 16 (got {0})")]
    NotPowerOfTwo(usize),
    #[error("initial state support clipped by the grid: boundary mass {0:.3e}")]
    SupportClipped(f64),
    #[error("requested p = {p} is outside the grid range [{p_min}, {p_max}]")]
    OutOfRange { p: f64, p_min: f64, p_max: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
}

/// Uniform rectangular grid over [q_min, q_max) × [p_min, p_max), endpoint
/// exclusive so the nodes are FFT compatible. Row-major storage with q as the
/// outer index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceGrid {
    pub q_min: f64,
    pub q_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub n_q: usize,
    pub n_p: usize,
}

impl PhaseSpaceGrid {
    pub fn new(
        q_min: f64,
        q_max: f64,
        p_min: f64,
        p_max: f64,
        n_q: usize,
        n_p: usize,
    ) -> Result<Self, GridError> {
        if !(q_max > q_min) || !q_min.is_finite() || !q_max.is_finite() {
            return Err(GridError::BadExtents("q_max must exceed q_min"));
        }
        if !(p_max > p_min) || !p_min.is_finite() || !p_max.is_finite() {
            return Err(GridError::BadExtents("p_max must exceed p_min"));
        }
        for n in [n_q, n_p] {
            if n < 16 || !n.is_power_of_two() {
                return Err(GridError::NotPowerOfTwo(n));
            }
        }
        Ok(PhaseSpaceGrid {
            q_min,
            q_max,
            p_min,
            p_max,
            n_q,
            n_p,
        })
    }

    /// Default benchmark extents: the wells sit at ±√10 ≈ ±3.16 and the drive
    /// pumps momenta well past ±10, so [−10,10]×[−20,20] keeps the state far
    /// from spectral wrap-around.
    pub fn benchmark_default() -> Self {
        PhaseSpaceGrid::new(-10.0, 10.0, -20.0, 20.0, 512, 512).unwrap()
    }

    #[inline]
    pub fn dq(&self) -> f64 {
        (self.q_max - self.q_min) / self.n_q as f64
    }

    #[inline]
    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / self.n_p as f64
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.dq() * self.dp()
    }

    #[inline]
    pub fn q_at(&self, i: usize) -> f64 {
        self.q_min + i as f64 * self.dq()
    }

    #[inline]
    pub fn p_at(&self, j: usize) -> f64 {
        self.p_min + j as f64 * self.dp()
    }

    pub fn len(&self) -> usize {
        self.n_q * self.n_p
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Whether a field stores a Wigner function (may be negative) or a classical
/// density (nonnegative when produced by trajectory binning).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Wigner,
    Classical,
}

impl FieldKind {
    pub fn as_u32(self) -> u32 {
        match self {
            FieldKind::Wigner => 0,
            FieldKind::Classical => 1,
        }
    }

    pub fn from_u32(v: u32) -> Option<Self> {
        match v {
            0 => Some(FieldKind::Wigner),
            1 => Some(FieldKind::Classical),
            _ => None,
        }
    }
}

/// A discretized real distribution f(q, p) at time `t`. `values[i * n_p + j]`
/// holds f(q_i, p_j).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceField {
    pub grid: PhaseSpaceGrid,
    pub values: Vec<f64>,
    pub t: f64,
    pub hbar: f64,
    pub kind: FieldKind,
}

impl PhaseSpaceField {
    pub fn zeros(grid: PhaseSpaceGrid, hbar: f64, kind: FieldKind) -> Self {
        PhaseSpaceField {
            grid,
            values: vec![0.0; grid.len()],
            t: 0.0,
            hbar,
            kind,
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_p + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.values[i * self.grid.n_p + j]
    }

    /// Quadrature mass ∑ f Δq Δp.
    pub fn norm(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    /// Rescales so the quadrature mass is exactly 1.
    pub fn normalize(&mut self) {
        let n = self.norm();
        if n != 0.0 {
            let inv = 1.0 / n;
            for v in &mut self.values {
                *v *= inv;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// |mass| in the two outermost cells along each edge; the tripwire for
    /// spectral wrap-around. Net mass rather than an L1 sum, so zero-mean
    /// spectral ringing does not mask itself as transported probability.
    pub fn boundary_mass(&self) -> f64 {
        let (nq, np) = (self.grid.n_q, self.grid.n_p);
        let mut acc = 0.0;
        for i in 0..nq {
            let edge_row = i < 2 || i >= nq - 2;
            let row = &self.values[i * np..(i + 1) * np];
            if edge_row {
                acc += row.iter().sum::<f64>();
            } else {
                acc += row[0] + row[1] + row[np - 2] + row[np - 1];
            }
        }
        (acc * self.grid.cell_area()).abs()
    }

    /// Re-tag as a classical density; the weak-form comparisons start the
    /// classical solver from the identical initial distribution.
    pub fn into_classical(mut self) -> Self {
        self.kind = FieldKind::Classical;
        self
    }
}

/// Scalar summaries of a field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub t: f64,
    pub norm: f64,
    pub mean_q: f64,
    pub mean_p: f64,
    pub var_q: f64,
    pub var_p: f64,
    pub cov_qp: f64,
    /// ∑ max(−f, 0) Δq Δp; zero for any true probability density.
    pub negativity_volume: f64,
    pub min_value: f64,
    pub boundary_mass: f64,
}

/// Moments, negativity volume, and boundary mass by midpoint quadrature.
pub fn diagnostics(field: &PhaseSpaceField) -> Diagnostics {
    let g = &field.grid;
    let area = g.cell_area();
    let mut norm = 0.0;
    let mut sq = 0.0;
    let mut sp = 0.0;
    let mut sqq = 0.0;
    let mut spp = 0.0;
    let mut sqp = 0.0;
    let mut neg = 0.0;
    let mut min_value = f64::INFINITY;
    for i in 0..g.n_q {
        let q = g.q_at(i);
        let row = &field.values[i * g.n_p..(i + 1) * g.n_p];
        let mut row_sum = 0.0;
        let mut row_p = 0.0;
        let mut row_pp = 0.0;
        for (j, &v) in row.iter().enumerate() {
            let p = g.p_at(j);
            row_sum += v;
            row_p += v * p;
            row_pp += v * p * p;
            if v < 0.0 {
                neg -= v;
            }
            if v < min_value {
                min_value = v;
            }
        }
        norm += row_sum;
        sq += row_sum * q;
        sqq += row_sum * q * q;
        sp += row_p;
        spp += row_pp;
        sqp += row_p * q;
    }
    norm *= area;
    let mean_q = sq * area / norm;
    let mean_p = sp * area / norm;
    Diagnostics {
        t: field.t,
        norm,
        mean_q,
        mean_p,
        var_q: sqq * area / norm - mean_q * mean_q,
        var_p: spp * area / norm - mean_p * mean_p,
        cov_qp: sqp * area / norm - mean_q * mean_p,
        negativity_volume: neg * area,
        min_value,
        boundary_mass: field.boundary_mass(),
    }
}

/// Minimum-uncertainty Gaussian f = (1/πħ) exp(−(q−q0)²/2σ_q² − (p−p0)²/2σ_p²)
/// with σ_p = ħ/(2σ_q), normalized to 1 on the grid.
///
/// This is the Wigner function of a coherent state; the identical field
/// (re-tagged) seeds the classical solver so both descriptions start from the
/// same distribution.
pub fn init_coherent_state(
    grid: PhaseSpaceGrid,
    q0: f64,
    p0: f64,
    sigma_q: f64,
    hbar: f64,
) -> Result<PhaseSpaceField, GridError> {
    if !(sigma_q > 0.0) {
        return Err(GridError::BadExtents("sigma_q must be positive"));
    }
    let sigma_p = hbar / (2.0 * sigma_q);
    // 5σ support check before doing any work.
    if q0 - 5.0 * sigma_q < grid.q_min
        || q0 + 5.0 * sigma_q > grid.q_max
        || p0 - 5.0 * sigma_p < grid.p_min
        || p0 + 5.0 * sigma_p > grid.p_max
    {
        return Err(GridError::SupportClipped(f64::NAN));
    }
    let mut field = PhaseSpaceField::zeros(grid, hbar, FieldKind::Wigner);
    let peak = 1.0 / (std::f64::consts::PI * hbar);
    for i in 0..grid.n_q {
        let dq = (grid.q_at(i) - q0) / sigma_q;
        let gq = (-0.5 * dq * dq).exp();
        for j in 0..grid.n_p {
            let dp = (grid.p_at(j) - p0) / sigma_p;
            field.values[i * grid.n_p + j] = peak * gq * (-0.5 * dp * dp).exp();
        }
    }
    let bmass = field.boundary_mass();
    if bmass > 1e-10 {
        return Err(GridError::SupportClipped(bmass));
    }
    field.normalize();
    Ok(field)
}

/// Nearest-row cut f(q, p ≈ p_value): the raw data behind sectional plots.
pub fn slice_at_p(field: &PhaseSpaceField, p_value: f64) -> Result<Vec<(f64, f64)>, GridError> {
    let g = &field.grid;
    if p_value < g.p_min || p_value > g.p_max {
        return Err(GridError::OutOfRange {
            p: p_value,
            p_min: g.p_min,
            p_max: g.p_max,
        });
    }
    let j = (((p_value - g.p_min) / g.dp()).round() as usize).min(g.n_p - 1);
    Ok((0..g.n_q)
        .map(|i| (g.q_at(i), field.at(i, j)))
        .collect())
}
