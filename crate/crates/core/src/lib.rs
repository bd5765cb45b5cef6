//! Selective admissions over Gamma-distributed academic scores.
//!
//! Applicants live in regions; within region `r` the log score
//! `Q = -ln((S - s_min) / (s_max - s_min))` of an applicant follows a Gamma
//! distribution with region-specific shape/scale. Smaller `q` means a
//! stronger raw score, so an admission rule is a per-cell threshold
//! `q <= q_cut` and its admit share is a Gamma CDF value.
//!
//! On top of that model the crate provides:
//!
//! * exact capacity-constrained solvers for four admission procedures
//!   (open competition, group quota, plus-factor scaling, per-region
//!   top-percentage) in [`procedures`],
//! * numeric checkers for three comparative-statics results about those
//!   procedures in [`theorems`],
//! * a seeded Monte Carlo replay used as a stochastic cross-check in
//!   [`montecarlo`],
//! * a summary-statistics fitter that recovers latent region mixtures from
//!   published applicant/admit tables in [`fit`],
//! * versioned file formats for populations, solver reports, and plot-ready
//!   density bundles in [`io`] and [`report`].
//!
//! Core math is generic over the floating scalar (see [`scalar::Real`]);
//! the crate root re-exports `f64` aliases, which is what the solvers, the
//! fitter, and all file formats use.

pub mod error;
pub mod fit;
pub mod gamma;
pub mod io;
pub mod montecarlo;
pub mod population;
pub mod procedures;
pub mod report;
pub mod scalar;
pub mod score;
mod special;
pub mod theorems;

pub use error::{Error, Result};

/// `f64` instantiations of the generic core types.
pub type GammaParams64 = gamma::GammaParams<f64>;
pub type LogScore64 = score::LogScore<f64>;
pub type RawScore64 = score::RawScore<f64>;
pub type ScoreScale64 = score::ScoreScale<f64>;
pub type Population64 = population::Population<f64>;
pub type Capacity64 = population::Capacity<f64>;
pub type ProcedureOutcome64 = procedures::ProcedureOutcome<f64>;
pub type TheoremReport64 = theorems::TheoremReport<f64>;
