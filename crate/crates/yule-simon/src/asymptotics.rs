//! Tail-regime fitting and growth-rate diagnostics.
//!
//! The fitters run weighted least squares on transformed survival curves,
//! with delta-method weights `1 / (stderr/estimate)^2`: survival estimates
//! have strongly heteroskedastic log-errors, so unweighted fits would let the
//! noisiest deep-tail points dominate. Curves with exact points (zero
//! stderr everywhere, e.g. analytic oracles) fall back to an unweighted fit.
//! Fit ranges are always caller-specified: asymptotic regimes have unknown
//! onset, and silent auto-ranging would hide bias.

use serde::Serialize;

use crate::cmj::population_at_horizon;
use crate::distributions::mean_y_at;
use crate::error::{Error, Result};
use crate::exec::run_batched;
use crate::rng::derive_seed;
use crate::summary::MeanAccumulator;
use crate::tail::TailCurve;

/// Parametric family a survival tail was fitted against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    /// `P(X > n) ~ C n^s` — fit of `ln P` on `ln n`.
    Power,
    /// `ln P(X > n) ~ s n` — fit of `ln P` on `n`.
    Exponential,
    /// `ln P(X > n) ~ -c n^s` — fit of `ln(-ln P)` on `ln n`.
    Stretched,
}

/// Result of one tail fit. For power fits the intercept absorbs the unknown
/// multiplicative constant, which is reported and never asserted against.
#[derive(Debug, Clone, Serialize)]
pub struct TailFit {
    pub kind: TailKind,
    pub fitted_exponent: f64,
    pub theoretical_exponent: Option<f64>,
    pub intercept: f64,
    pub fit_range: (u64, u64),
    pub residual_rms: f64,
    pub weighted: bool,
    /// Stretched fits only: the prefactor `c` of `-c (rho^2 n)^{1/3}`,
    /// refitted with the stretch pinned at 1/3.
    pub stretch_prefactor: Option<f64>,
}

impl TailFit {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("fit serialization cannot fail")
    }
}

struct FitData {
    /// (n, estimate, relative variance) for points in range
    points: Vec<(f64, f64, f64)>,
    weighted: bool,
}

fn select_range(curve: &TailCurve, n_lo: u64, n_hi: u64, need_below_one: bool) -> Result<FitData> {
    if n_lo >= n_hi {
        return Err(Error::Input(format!(
            "fit range must satisfy n_lo < n_hi, got [{n_lo}, {n_hi}]"
        )));
    }
    let mut points = Vec::new();
    let mut weighted = true;
    for p in &curve.points {
        if p.n < n_lo.max(1) || p.n > n_hi {
            continue;
        }
        if !(p.estimate > 0.0) {
            return Err(Error::FitDomain(format!(
                "estimate at n={} is not positive; increase the replicate budget",
                p.n
            )));
        }
        if need_below_one && p.estimate >= 1.0 {
            return Err(Error::FitDomain(format!(
                "estimate at n={} is >= 1; the transform ln(-ln p) requires p < 1",
                p.n
            )));
        }
        if p.stderr > 0.0 {
            points.push((p.n as f64, p.estimate, (p.stderr / p.estimate).powi(2)));
        } else {
            weighted = false;
            points.push((p.n as f64, p.estimate, 0.0));
        }
    }
    if points.len() < 2 {
        return Err(Error::FitDomain(format!(
            "need at least 2 curve points in [{n_lo}, {n_hi}], found {}",
            points.len()
        )));
    }
    Ok(FitData { points, weighted })
}

/// Plain weighted least squares of `y` on `x`; returns (intercept, slope,
/// residual rms).
fn weighted_least_squares(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64, f64) {
    let sw: f64 = w.iter().sum();
    let xb: f64 = x.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let yb: f64 = y.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((x, y), w)| w * (x - xb) * (y - yb))
        .sum();
    let sxx: f64 = x.iter().zip(w).map(|(x, w)| w * (x - xb) * (x - xb)).sum();
    let slope = sxy / sxx;
    let intercept = yb - slope * xb;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / x.len() as f64)
        .sqrt();
    (intercept, slope, rms)
}

/// Fits `ln P(X > n) = a + s ln n` over `[n_lo, n_hi]`. The theoretical
/// exponent `-rho / (1 - theta)` is attached when `theta < 1`.
pub fn fit_power_tail(curve: &TailCurve, n_lo: u64, n_hi: u64) -> Result<TailFit> {
    let data = select_range(curve, n_lo, n_hi, false)?;
    let x: Vec<f64> = data.points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = data.points.iter().map(|p| p.1.ln()).collect();
    let w: Vec<f64> = weights(&data);
    let (intercept, slope, rms) = weighted_least_squares(&x, &y, &w);
    let theta = curve.params.theta;
    Ok(TailFit {
        kind: TailKind::Power,
        fitted_exponent: slope,
        theoretical_exponent: (theta < 1.0).then(|| -curve.params.rho / (1.0 - theta)),
        intercept,
        fit_range: (n_lo, n_hi),
        residual_rms: rms,
        weighted: data.weighted,
        stretch_prefactor: None,
    })
}

/// Fits `ln P(X > n) = a + s n` over `[n_lo, n_hi]`. The theoretical rate
/// `-(ln theta - 1 + 1/theta)` is attached when `theta > 1`.
pub fn fit_exponential_tail(curve: &TailCurve, n_lo: u64, n_hi: u64) -> Result<TailFit> {
    let data = select_range(curve, n_lo, n_hi, false)?;
    let x: Vec<f64> = data.points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = data.points.iter().map(|p| p.1.ln()).collect();
    let w: Vec<f64> = weights(&data);
    let (intercept, slope, rms) = weighted_least_squares(&x, &y, &w);
    let theta = curve.params.theta;
    Ok(TailFit {
        kind: TailKind::Exponential,
        fitted_exponent: slope,
        theoretical_exponent: (theta > 1.0).then(|| -(theta.ln() - 1.0 + 1.0 / theta)),
        intercept,
        fit_range: (n_lo, n_hi),
        residual_rms: rms,
        weighted: data.weighted,
        stretch_prefactor: None,
    })
}

/// Fits `ln(-ln P(X > n)) = a + s ln n` over `[n_lo, n_hi]`; `s` is the
/// stretch, with theoretical value 1/3 in the critical regime. Also refits
/// the prefactor `c` of `-c (rho^2 n)^{1/3}` with the stretch pinned, for
/// comparison against theoretical brackets.
pub fn fit_stretched_tail(curve: &TailCurve, n_lo: u64, n_hi: u64) -> Result<TailFit> {
    let data = select_range(curve, n_lo, n_hi, true)?;
    let x: Vec<f64> = data.points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = data.points.iter().map(|p| (-p.1.ln()).ln()).collect();
    // delta method twice: var(ln(-ln p)) = relvar / (ln p)^2
    let w: Vec<f64> = if data.weighted {
        data.points
            .iter()
            .map(|p| p.1.ln().powi(2) / p.2)
            .collect()
    } else {
        vec![1.0; data.points.len()]
    };
    let (intercept, slope, rms) = weighted_least_squares(&x, &y, &w);

    // pinned-stretch least squares for the prefactor: -ln p = c (rho^2 n)^{1/3}
    let rho = curve.params.rho;
    let mut num = 0.0;
    let mut den = 0.0;
    for p in &data.points {
        let u = (rho * rho * p.0).cbrt();
        let target = -p.1.ln();
        let wq = if data.weighted { 1.0 / p.2 } else { 1.0 };
        num += wq * u * target;
        den += wq * u * u;
    }
    Ok(TailFit {
        kind: TailKind::Stretched,
        fitted_exponent: slope,
        theoretical_exponent: Some(1.0 / 3.0),
        intercept,
        fit_range: (n_lo, n_hi),
        residual_rms: rms,
        weighted: data.weighted,
        stretch_prefactor: Some(num / den),
    })
}

fn weights(data: &FitData) -> Vec<f64> {
    if data.weighted {
        data.points.iter().map(|p| 1.0 / p.2).collect()
    } else {
        vec![1.0; data.points.len()]
    }
}

/// One horizon row of a [`MalthusReport`].
#[derive(Debug, Clone, Serialize)]
pub struct MalthusRow {
    pub horizon: f64,
    /// Mean of `e^{(theta-1) t} Y(t)` over replicates.
    pub normalized_mean: f64,
    pub normalized_mean_stderr: f64,
    pub normalized_variance: f64,
    /// Expected value of the normalized mean, `e^{(theta-1) t} E[Y(t)]`.
    pub expected_mean: f64,
    /// Fraction of runs whose line had lost all fertility by the horizon
    /// (possible only for `theta` in (0,1)).
    pub stalled_fraction: f64,
    pub replicates: u64,
}

/// Concentration check of the normalized population `e^{(theta-1) t} Y(t)`
/// in the supercritical regime.
#[derive(Debug, Clone, Serialize)]
pub struct MalthusReport {
    pub theta: f64,
    pub seed: u64,
    pub rows: Vec<MalthusRow>,
}

impl MalthusReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serialization cannot fail")
    }
}

/// Simulates populations to each horizon and reports moments of the
/// normalized variable together with the stalled fraction. Requires
/// `theta < 1` (the normalization is degenerate otherwise) and strictly
/// increasing horizons.
pub fn malthusian_growth_check(
    theta: f64,
    horizons: &[f64],
    replicates: u64,
    seed: u64,
) -> Result<MalthusReport> {
    if !(theta < 1.0) {
        return Err(Error::Domain(format!(
            "growth check requires theta < 1, got {theta}"
        )));
    }
    if horizons.is_empty() || !horizons.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Input("horizons must be strictly increasing".into()));
    }
    if !(horizons[0] >= 0.0) {
        return Err(Error::Domain("horizons must be nonnegative".into()));
    }
    if replicates < 2 {
        return Err(Error::Input("at least 2 replicates are required".into()));
    }
    let mut rows = Vec::with_capacity(horizons.len());
    for (idx, &t) in horizons.iter().enumerate() {
        let scale = ((theta - 1.0) * t).exp();
        let (acc, stalled) = run_batched(
            derive_seed(seed, idx as u64 + 1),
            replicates,
            || (MeanAccumulator::default(), 0u64),
            |(acc, stalled), _replicate, rng| {
                let (population, extinct) = population_at_horizon(theta, t, rng);
                acc.add(scale * population as f64);
                if extinct {
                    *stalled += 1;
                }
            },
            |(a, s), (b, t)| {
                a.merge(&b);
                *s += t;
            },
        );
        rows.push(MalthusRow {
            horizon: t,
            normalized_mean: acc.mean(),
            normalized_mean_stderr: acc.stderr(),
            normalized_variance: acc.sample_variance(),
            expected_mean: scale * mean_y_at(theta, t)?,
            stalled_fraction: stalled as f64 / replicates as f64,
            replicates,
        });
    }
    Ok(MalthusReport {
        theta,
        seed,
        rows,
    })
}
