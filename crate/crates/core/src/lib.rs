//! Simulation laboratory for open quantum and classical dynamics of bounded
//! chaotic systems, with the driven Duffing oscillator as the built-in
//! benchmark.
//!
//! The same system is evolved through its Wigner-function master equation
//! (spectral split-step) and its classical description (Langevin ensembles
//! and a grid Fokker-Planck solver), the two are compared quantitatively,
//! and the semiclassical-threshold diagnostics — smoothing width, fold
//! spacing, the structure-saturation time t*, and the D·t* ≳ λ̄mħ verdict —
//! are computed from the chaotic geometry.

pub mod classical;
pub mod compare;
pub mod dm_oracle;
pub mod geometry;
pub mod grid;
pub mod hyperbolic;
pub mod io;
pub mod model;
mod propagator;
pub mod quantum;
pub mod rng;
pub mod semiclassical;

pub use propagator::{KernelKind, PropagatorError, SplitStepPropagator};
