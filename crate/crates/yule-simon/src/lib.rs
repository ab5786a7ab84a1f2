//! Simulation and estimation toolkit for the two-parameter Yule-Simon
//! distribution `X(theta, rho)` — the population size of an age-dependent
//! branching process observed at an independent exponential time.
//!
//! The crate is organized around five concerns:
//!
//! * [`distributions`] — closed-form reference laws and moments (classical
//!   Yule-Simon pmf, Borel total-progeny pmf, first-passage pmf, mean
//!   formulas, extinction probabilities, quadrature for `P(X = 1)`).
//! * [`cmj`] — exact event-driven simulation of the branching process, its
//!   fertility process, exact sampling of `X`, and full genealogies.
//! * [`tail`] — Monte Carlo estimation of the survival function
//!   `P(X > n)` through a Poissonian path representation, with optional
//!   exponential tilting for the light-tailed regime.
//! * [`asymptotics`] — weighted least-squares fitters for the power,
//!   exponential and stretched-exponential tail regimes, plus growth-rate
//!   diagnostics.
//! * [`forest`] — genealogies with neutral mutation marks, allelic
//!   partitions, and convergence experiments for the limiting sub-population
//!   size frequencies.
//!
//! All replicated experiments draw their randomness from per-replicate
//! counter-style streams derived from an experiment seed, so results are
//! independent of thread count and scheduling (see [`exec`] and [`rng`]).

// `!(x > 0.0)` style guards are intentional throughout: they reject NaN
// together with out-of-domain values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cmj;
pub mod distributions;
pub mod error;
pub mod exec;
pub mod forest;
pub mod params;
pub mod rng;
pub mod summary;
pub mod tail;

pub use error::{Error, Result};
pub use params::{FirstPassageParams, ModelParams};

/// Formats a float with 17 significant digits, enough to round-trip `f64`.
/// Used by every CSV writer in the crate.
pub fn full_precision(x: f64) -> String {
    format!("{:.16e}", x)
}
