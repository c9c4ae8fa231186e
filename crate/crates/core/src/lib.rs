//! Exact pseudocalibration machinery for random constraint satisfaction problems.
//!
//! Modules are layered bottom-up: [`scalar`] and [`csp`] provide numbers and
//! instances, [`fourier`] the mixed-basis polynomials, [`oracle`] brute-force ground
//! truth, [`planted`] the analytic planted-density coefficients and decay envelopes,
//! [`derivation`] the counting combinatorics, [`cbd`] blockwise-dense decompositions
//! and [`experiments`] the refutation-facing measurements. [`f2`] solves parity
//! derivations by linear algebra and [`decay`] evaluates the decay envelopes on grids.
//!
//! On top sit [`config`] and [`io`] for `key = value` files and JSON instances,
//! [`runner`] for configured experiments and [`suites`] for the verification suites.
//! [`exec`] selects the rayon or sequential path; both give identical results.

pub mod cbd;
pub mod config;
pub mod csp;
pub mod decay;
pub mod derivation;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod f2;
pub mod fourier;
pub mod io;
pub mod oracle;
pub mod planted;
pub mod runner;
pub mod scalar;
pub mod suites;

pub use error::{Error, Result};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
