//! Exact controllability of linear neutral time-delay systems
//!
//! ```text
//! z'(t) = A_{-1} z'(t-1) + ∫ A2(θ) z'(t+θ) dθ + ∫ A3(θ) z(t+θ) dθ + B u(t)
//! ```
//!
//! The crate decides exact controllability (rank conditions on the
//! characteristic matrix and on the neutral pair), computes the critical
//! time `n1 * h`, and synthesizes steering controls by solving a truncated
//! moment problem over the eigenvectors of the system operator. A
//! method-of-steps integrator verifies the synthesized controls.
//!
//! Module map:
//!
//! * [`kernel`], [`system`], [`state`]: system model, characteristic matrix,
//!   M2 states.
//! * [`canonical`]: Kalman analysis, feedback, Frobenius normal form.
//! * [`spectral`]: characteristic roots, certification, eigenvectors and
//!   biorthogonal families.
//! * [`moment`]: moment problem, Gram matrices, least-norm controls.
//! * [`simulate`]: method-of-steps integrator.
//! * [`report`]: analysis verdicts and the end-to-end pipelines used by the
//!   `nctl` binary.

pub mod canonical;
pub mod error;
mod json;
pub mod kernel;
pub mod linalg;
pub mod moment;
pub mod report;
pub mod simulate;
pub mod spectral;
pub mod state;
pub mod system;

pub use error::{Error, Result};
pub use linalg::{c64, CMat, CVec};
