//! A generic EM engine and four estimators built on it:
//!
//! - [`abo`]: ABO allele frequencies from blood-type counts (gene counting)
//! - [`ibd`]: IBD sharing probabilities for affected sib pairs
//! - [`motif`]: one-occurrence-per-sequence DNA motif discovery
//! - [`deconv`]: Poisson deconvolution of diffusion-battery counts
//!
//! All four share the driver in [`em`]: supply an E-step, an M-step and a
//! log-likelihood through the [`em::EmModel`] trait and the driver iterates
//! to convergence, recording a monotone log-likelihood trace.

pub mod abo;
pub mod deconv;
pub mod em;
pub mod error;
pub mod ibd;
pub mod io;
pub mod motif;
pub mod simplex;

pub use em::{run_em, EmConfig, EmModel, EmResult, EmTrace, StopReason, TraceEntry};
pub use error::EmError;
pub use simplex::SimplexVector;
