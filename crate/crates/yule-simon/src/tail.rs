//! Monte Carlo estimation of the survival function `P(X(theta, rho) > n)`.
//!
//! The representation estimator drives a unit-rate Poisson path `N` against
//! the drift line `theta t`: each replicate simulates the first `n` arrivals,
//! checks absorption of `N(t) + 1 - theta t` at zero analytically (the drift
//! line is deterministic between jumps, so the hit time in a segment where
//! `N = k` is exactly `(k+1)/theta`), and contributes
//! `exp(-rho * Int_0^{gamma(n)} (N(t)+1-theta t)^{-1} dt)` if the path is
//! still alive, 0 otherwise. Segment integrals are exact antiderivatives.
//!
//! For `theta > 1` survival is a rare event; the tilted estimator samples
//! arrivals at rate `lambda` (the natural choice is `lambda = theta`, which
//! makes the tilted walk critical against the absorbing line) and reweights
//! by the exact likelihood ratio `lambda^{-n} e^{(lambda-1) gamma(n)}`,
//! computed in log space because `lambda^{-n}` underflows for large `n`.
//!
//! Curve estimators share paths across the requested `n`: one path of
//! `n_max` arrivals yields partial integrals for every smaller `n`. Points
//! are therefore positively correlated across `n` but unbiased pointwise,
//! and the shared-path curve is pathwise nonincreasing in `n` when untilted.

use std::io::{self, Write};
use std::time::Instant;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::run_batched;
use crate::full_precision;
use crate::params::ModelParams;
use crate::summary::MeanAccumulator;

/// Which estimator produced a [`TailCurve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    DirectSampling,
    Representation,
    RepresentationTilted { lambda: f64 },
}

impl Estimator {
    pub fn tag(&self) -> &'static str {
        match self {
            Estimator::DirectSampling => "direct_sampling",
            Estimator::Representation => "representation",
            Estimator::RepresentationTilted { .. } => "representation_tilted",
        }
    }
}

/// One estimated point of a survival curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: u64,
    pub estimate: f64,
    pub stderr: f64,
    pub replicates: u64,
}

/// An estimated survival curve `n -> P(X > n)` with standard errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailCurve {
    pub params: ModelParams,
    pub estimator: Estimator,
    pub seed: u64,
    /// Whether all points of one replicate came from the same Poisson path
    /// (true for the representation estimators, false for direct sampling).
    /// Shared-path points are positively correlated across `n`.
    pub shared_paths: bool,
    pub wall_time_seconds: f64,
    pub points: Vec<CurvePoint>,
}

impl TailCurve {
    pub fn point(&self, n: u64) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.n == n)
    }

    /// Writes `n,estimate,stderr,replicates` rows with full float precision.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "n,estimate,stderr,replicates")?;
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{}",
                p.n,
                full_precision(p.estimate),
                full_precision(p.stderr),
                p.replicates
            )?;
        }
        Ok(())
    }

    /// JSON document embedding the parameters, estimator tag (with lambda
    /// when tilted), seed and wall-clock time alongside the points.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("curve serialization cannot fail")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        serde_json::from_value(value.clone())
            .map_err(|e| Error::Input(format!("not a tail curve document: {e}")))
    }
}

/// Exact integral of `(k + 1 - theta t)^{-1}` over `[t0, t1]`, one
/// Poisson-constant segment of the representation integrand: for nonzero
/// `theta` this is `(1/theta) ln((k+1-theta t0)/(k+1-theta t1))`.
///
/// The integrand must be positive on the whole segment; callers must split
/// at the absorption time first.
pub fn segment_integral(k: u64, theta: f64, t0: f64, t1: f64) -> Result<f64> {
    if !(0.0 <= t0 && t0 <= t1) {
        return Err(Error::Input(format!(
            "segment must satisfy 0 <= t0 <= t1, got [{t0}, {t1}]"
        )));
    }
    let level = (k + 1) as f64;
    // linear in t: positivity on the segment reduces to the endpoints
    if level - theta * t0 <= 0.0 || level - theta * t1 <= 0.0 {
        return Err(Error::Domain(format!(
            "integrand nonpositive on segment k={k}, theta={theta}, [{t0}, {t1}]: absorbed"
        )));
    }
    if theta == 0.0 {
        Ok((t1 - t0) / level)
    } else {
        Ok(((level - theta * t0) / (level - theta * t1)).ln() / theta)
    }
}

/// A simulated Poisson path against the drift line, materialized for
/// inspection: the arrivals strictly before the absorption time, and the
/// absorption time itself when the drift line was hit (`theta > 0` only).
#[derive(Debug, Clone, Serialize)]
pub struct PoissonDriftPath {
    pub arrival_times: Vec<f64>,
    pub theta: f64,
    pub absorbed_at: Option<f64>,
}

impl PoissonDriftPath {
    /// Simulates arrivals at rate `lambda` until absorption or `max_arrivals`.
    pub fn simulate(
        theta: f64,
        max_arrivals: u64,
        lambda: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        check_lambda(lambda)?;
        let mut arrival_times = Vec::new();
        let mut gamma = 0.0f64;
        let mut absorbed_at = None;
        for k in 0..max_arrivals {
            let gap: f64 = rng.sample::<f64, _>(Exp1) / lambda;
            let next = gamma + gap;
            let level = (k + 1) as f64;
            if theta > 0.0 && level - theta * next < 0.0 {
                absorbed_at = Some(level / theta);
                break;
            }
            arrival_times.push(next);
            gamma = next;
        }
        Ok(Self {
            arrival_times,
            theta,
            absorbed_at,
        })
    }
}

/// Per-batch accumulator for shared-path curves.
struct CurveAcc {
    stats: Vec<MeanAccumulator>,
    scratch: Vec<f64>,
}

/// One replicate of the (possibly tilted) representation estimator: walks a
/// single Poisson path and writes the contribution for every requested `n`
/// into `out` (absorbed paths leave the remaining entries at zero).
fn walk_contributions(
    theta: f64,
    rho: f64,
    lambda: f64,
    ns: &[u64],
    rng: &mut impl Rng,
    out: &mut [f64],
) {
    out.fill(0.0);
    let mut next_point = 0usize;
    if ns[0] == 0 {
        out[0] = 1.0;
        next_point = 1;
    }
    let ln_lambda = lambda.ln();
    let mut gamma = 0.0f64;
    let mut integral = 0.0f64;
    let mut k = 0u64;
    while next_point < ns.len() {
        let gap: f64 = rng.sample::<f64, _>(Exp1) / lambda;
        let next = gamma + gap;
        let level = (k + 1) as f64;
        let end_value = level - theta * next;
        if theta > 0.0 && end_value < 0.0 {
            return; // absorbed: every remaining n contributes 0
        }
        integral += if theta == 0.0 {
            gap / level
        } else {
            ((level - theta * gamma) / end_value).ln() / theta
        };
        gamma = next;
        k += 1;
        if k == ns[next_point] {
            let log_weight = if lambda == 1.0 {
                0.0
            } else {
                (lambda - 1.0) * gamma - k as f64 * ln_lambda
            };
            // rho = 0 estimates the bare passage probability; keep the
            // (possibly infinite) integral out of its contribution
            let log_contribution = if rho == 0.0 {
                log_weight
            } else {
                -rho * integral + log_weight
            };
            out[next_point] = log_contribution.exp();
            next_point += 1;
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda must be > 0, got {lambda}")));
    }
    Ok(())
}

fn check_ns(ns: &[u64]) -> Result<()> {
    if ns.is_empty() {
        return Err(Error::Input("at least one curve point is required".into()));
    }
    if !ns.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Input("curve points must be strictly increasing".into()));
    }
    Ok(())
}

fn check_replicates(replicates: u64) -> Result<()> {
    if replicates < 2 {
        return Err(Error::Input(format!(
            "at least 2 replicates are required, got {replicates}"
        )));
    }
    Ok(())
}

fn representation_curve_impl(
    params: &ModelParams,
    ns: &[u64],
    lambda: f64,
    estimator: Estimator,
    replicates: u64,
    seed: u64,
    sequential: bool,
) -> Result<TailCurve> {
    check_lambda(lambda)?;
    check_ns(ns)?;
    check_replicates(replicates)?;
    let start = Instant::now();
    let (theta, rho) = (params.theta, params.rho);
    let new_acc = || CurveAcc {
        stats: vec![MeanAccumulator::default(); ns.len()],
        scratch: vec![0.0; ns.len()],
    };
    let step = |acc: &mut CurveAcc, _replicate: u64, rng: &mut rand_chacha::ChaCha8Rng| {
        walk_contributions(theta, rho, lambda, ns, rng, &mut acc.scratch);
        for (stat, &v) in acc.stats.iter_mut().zip(acc.scratch.iter()) {
            stat.add(v);
        }
    };
    let merge = |a: &mut CurveAcc, b: CurveAcc| {
        for (x, y) in a.stats.iter_mut().zip(b.stats.iter()) {
            x.merge(y);
        }
    };
    let acc = if sequential {
        crate::exec::run_batched_sequential(seed, replicates, new_acc, step, merge)
    } else {
        run_batched(seed, replicates, new_acc, step, merge)
    };
    let points = ns
        .iter()
        .zip(acc.stats.iter())
        .map(|(&n, stat)| CurvePoint {
            n,
            estimate: stat.mean(),
            stderr: stat.stderr(),
            replicates,
        })
        .collect();
    Ok(TailCurve {
        params: *params,
        estimator,
        seed,
        shared_paths: true,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        points,
    })
}

/// Shared-path representation estimate of the survival curve at the
/// requested `n` values (strictly increasing).
pub fn representation_curve(
    params: &ModelParams,
    ns: &[u64],
    replicates: u64,
    seed: u64,
) -> Result<TailCurve> {
    representation_curve_impl(
        params,
        ns,
        1.0,
        Estimator::Representation,
        replicates,
        seed,
        false,
    )
}

/// [`representation_curve`] forced through the sequential batch runner.
/// Bit-identical output; exists so the bench suite can compare the two
/// execution paths on the same workload.
pub fn representation_curve_sequential(
    params: &ModelParams,
    ns: &[u64],
    replicates: u64,
    seed: u64,
) -> Result<TailCurve> {
    representation_curve_impl(
        params,
        ns,
        1.0,
        Estimator::Representation,
        replicates,
        seed,
        true,
    )
}

/// Tilted variant of [`representation_curve`]: arrivals at rate `lambda`,
/// exact likelihood-ratio reweighting. Unbiased for the same target; choose
/// `lambda` near `theta` in the rare-event regime `theta > 1`.
pub fn tilted_curve(
    params: &ModelParams,
    ns: &[u64],
    lambda: f64,
    replicates: u64,
    seed: u64,
) -> Result<TailCurve> {
    representation_curve_impl(
        params,
        ns,
        lambda,
        Estimator::RepresentationTilted { lambda },
        replicates,
        seed,
        false,
    )
}

/// Point estimate `(estimate, stderr)` of `P(X > n)` by the representation.
pub fn estimate_survival_representation(
    params: &ModelParams,
    n: u64,
    replicates: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    let curve = representation_curve(params, &[n], replicates, seed)?;
    let p = &curve.points[0];
    Ok((p.estimate, p.stderr))
}

/// Point estimate of `P(X > n)` by the tilted representation.
pub fn estimate_survival_tilted(
    params: &ModelParams,
    n: u64,
    lambda: f64,
    replicates: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    let curve = tilted_curve(params, &[n], lambda, replicates, seed)?;
    let p = &curve.points[0];
    Ok((p.estimate, p.stderr))
}

/// Estimates `P(gamma(n) < zeta_theta)` — the probability that the Poisson
/// path outlives the drift line through its n-th arrival, i.e. the indicator
/// factor of the survival representation — with tilted sampling and exact
/// reweighting (`lambda = 1` is plain Monte Carlo). Used for decay-rate
/// diagnostics of the light-tailed regime.
pub fn passage_probability_curve(
    theta: f64,
    ns: &[u64],
    lambda: f64,
    replicates: u64,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    check_lambda(lambda)?;
    check_ns(ns)?;
    check_replicates(replicates)?;
    let acc = run_batched(
        seed,
        replicates,
        || CurveAcc {
            stats: vec![MeanAccumulator::default(); ns.len()],
            scratch: vec![0.0; ns.len()],
        },
        |acc, _replicate, rng| {
            walk_contributions(theta, 0.0, lambda, ns, rng, &mut acc.scratch);
            for (stat, &v) in acc.stats.iter_mut().zip(acc.scratch.iter()) {
                stat.add(v);
            }
        },
        |a, b| {
            for (x, y) in a.stats.iter_mut().zip(b.stats.iter()) {
                x.merge(y);
            }
        },
    );
    Ok(ns
        .iter()
        .zip(acc.stats.iter())
        .map(|(&n, stat)| CurvePoint {
            n,
            estimate: stat.mean(),
            stderr: stat.stderr(),
            replicates,
        })
        .collect())
}

/// Empirical survival curve from exact samples of `X`, with binomial
/// standard errors at every `n <= n_max`. Sampling walks are capped at
/// `n_max + 1`, which leaves every reported indicator exact.
pub fn direct_curve(
    params: &ModelParams,
    n_max: u64,
    replicates: u64,
    seed: u64,
) -> Result<TailCurve> {
    check_replicates(replicates)?;
    let start = Instant::now();
    let params_copy = *params;
    let len = n_max as usize + 2;
    let counts = run_batched(
        seed,
        replicates,
        || vec![0u64; len],
        |counts, _replicate, rng| {
            let x = crate::cmj::sample_x_capped(&params_copy, n_max, rng);
            counts[x as usize] += 1;
        },
        |a, b| {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x += y;
            }
        },
    );
    let r = replicates as f64;
    let mut exceeding = replicates;
    let mut points = Vec::with_capacity(n_max as usize + 1);
    for n in 0..=n_max {
        exceeding -= counts[n as usize]; // now counts samples with X > n
        let p = exceeding as f64 / r;
        points.push(CurvePoint {
            n,
            estimate: p,
            stderr: (p * (1.0 - p) / r).sqrt(),
            replicates,
        });
    }
    Ok(TailCurve {
        params: *params,
        estimator: Estimator::DirectSampling,
        seed,
        shared_paths: false,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        points,
    })
}
