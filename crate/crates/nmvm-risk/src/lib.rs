//! Tail-risk analytics for normal mean-variance mixture (NMVM) portfolios.
//!
//! An NMVM random vector is
//!
//! ```text
//! X  =d  μ + Θγ + √Θ · A · Z,      Σ = AA',
//! ```
//!
//! with `Z` standard multivariate normal and `Θ` an independent positive
//! mixing random variable (generalised inverse Gaussian, a degenerate point
//! mass, or a tabulated density). With GIG mixing this is the generalised
//! hyperbolic family. The library computes, for the aggregate loss
//! `S = w'X`:
//!
//! * tail moments `TM_k = E[S^k | S > s_α]` and tail central moments
//!   `TCM_k = E[(S − CTE)^k | S > s_α]` by an exact recursion over
//!   moment-tilted mixing laws ([`tail_moments`]),
//! * per-component capital allocations for the CTE, tail-variance, TCM,
//!   combined, and Euler-rooted rules ([`allocation`]),
//! * an independent Monte Carlo oracle with batch-means standard errors to
//!   validate every analytic quantity ([`oracle`]),
//! * portfolio plumbing: model files, log-loss transforms, descriptive
//!   statistics, and CSV sweep reports ([`model_file`], [`series`],
//!   [`sweep`]).
//!
//! Numerical foundations live in [`special`] (log-scale modified Bessel
//! function of the second kind, standard normal pdf/cdf/quantile) and
//! [`quad`] (adaptive Gauss–Kronrod quadrature).

pub mod allocation;
pub mod error;
pub mod mixing;
pub mod model_file;
pub mod nmvm;
pub mod oracle;
pub mod quad;
pub mod series;
pub mod special;
pub mod sweep;
pub mod tail_moments;

pub use error::{Error, Result};
