//! Closed-form reference laws and moments, used as oracles by the simulation
//! and estimation modules.
//!
//! All pmfs are evaluated in log space through the log-gamma function so that
//! factorials and powers like `(x+n)^(n-1)` stay finite for `n` up to 1e6.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::params::{FirstPassageParams, ModelParams};

/// Classical (one-parameter) Yule-Simon pmf: `rho * B(k, rho + 1)`.
pub fn yule_simon_pmf_theta0(rho: f64, k: u64) -> Result<f64> {
    check_rho(rho)?;
    if k == 0 {
        return Err(Error::Domain("k must be >= 1".into()));
    }
    let k = k as f64;
    Ok((rho.ln() + ln_beta(k, rho + 1.0)).exp())
}

/// Survival function of the classical law: `P(X > n) = rho * B(n + 1, rho)`.
pub fn survival_theta0(rho: f64, n: u64) -> Result<f64> {
    check_rho(rho)?;
    let n = n as f64;
    Ok((rho.ln() + ln_beta(n + 1.0, rho)).exp())
}

/// Borel pmf with parameter `1/theta`: the law of the total progeny when
/// fertility decays at rate `theta > 0`. For `theta >= 1` it is a probability
/// distribution; for `theta` in (0,1) its total mass is the extinction
/// probability.
pub fn borel_total_progeny_pmf(theta: f64, n: u64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::Domain(format!(
            "total progeny is a.s. infinite for theta <= 0 (got {theta})"
        )));
    }
    if n == 0 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    let mu = 1.0 / theta;
    let n = n as f64;
    Ok((-n * mu + (n - 1.0) * (n * mu).ln() - ln_gamma(n + 1.0)).exp())
}

/// First-passage pmf of a unit Poisson process through the line `b t - x`:
/// `P(b nu(x) - x = n) = e^{-(x+n)/b} x (x+n)^{n-1} b^{-n} / n!`.
pub fn first_passage_pmf(fp: &FirstPassageParams, n: u64) -> f64 {
    first_passage_log_pmf(fp, n).exp()
}

/// Natural log of [`first_passage_pmf`]; the pmf itself underflows around
/// `n (ln b - 1 + 1/b) > 700`, the log stays finite.
pub fn first_passage_log_pmf(fp: &FirstPassageParams, n: u64) -> f64 {
    let (b, x) = (fp.b, fp.x);
    if n == 0 {
        return -x / b;
    }
    let n = n as f64;
    -(x + n) / b + x.ln() + (n - 1.0) * (x + n).ln() - n * b.ln() - ln_gamma(n + 1.0)
}

/// Exponential decay rate of [`first_passage_pmf`] in `n`: `1 - 1/b - ln b`.
pub fn first_passage_log_rate(b: f64) -> f64 {
    1.0 - 1.0 / b - b.ln()
}

/// Constant the Stirling-normalized log-pmf converges to:
/// `ln(x e^{x(1-1/b)} / sqrt(2 pi))`.
pub fn first_passage_stirling_constant(fp: &FirstPassageParams) -> f64 {
    fp.x.ln() + fp.x * (1.0 - 1.0 / fp.b) - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Mean of `X(theta, rho)`: `(theta + rho) / (theta + rho - 1)` when
/// `theta + rho > 1`, positive infinity otherwise.
pub fn mean_x(params: &ModelParams) -> f64 {
    let s = params.theta + params.rho;
    if s > 1.0 {
        s / (s - 1.0)
    } else {
        f64::INFINITY
    }
}

/// Mean population size at time `t`: `(e^{(1-theta) t} - theta) / (1 - theta)`,
/// with the removable singularity at `theta = 1` evaluating to `1 + t`.
pub fn mean_y_at(theta: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t must be >= 0, got {t}")));
    }
    if (1.0 - theta).abs() < 1e-12 {
        Ok(1.0 + t)
    } else {
        Ok((((1.0 - theta) * t).exp() - theta) / (1.0 - theta))
    }
}

/// Extinction probability for fertility decay rate `theta` in (0,1): the
/// smallest fixed point of `q = e^{(q-1)/theta}`, reached by monotone
/// iteration from 0. Callers use the constants 1 (`theta >= 1`) and 0
/// (`theta <= 0`) outside this range.
pub fn extinction_probability(theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Domain(format!(
            "extinction probability is only nontrivial for theta in (0,1), got {theta}"
        )));
    }
    let mut q = 0.0f64;
    for _ in 0..100_000_000u64 {
        let next = ((q - 1.0) / theta).exp();
        if (next - q).abs() < 1e-12 {
            return Ok(next);
        }
        q = next;
    }
    Err(Error::Numeric(format!(
        "extinction fixed point did not converge for theta={theta}"
    )))
}

/// `P(X(theta, rho) = 1)` by adaptive quadrature of
/// `rho * Int_0^inf e^{-rho t} exp(-Int_0^t e^{-theta s} ds) dt`
/// to absolute tolerance `quad_tol`.
pub fn prob_x_equals_one(params: &ModelParams, quad_tol: f64) -> Result<f64> {
    if !(quad_tol > 0.0) || !quad_tol.is_finite() {
        return Err(Error::Domain(format!("quad_tol must be > 0, got {quad_tol}")));
    }
    let (theta, rho) = (params.theta, params.rho);
    // cumulative birth intensity of a single individual up to age t
    let inner = move |t: f64| -> f64 {
        if theta == 0.0 {
            t
        } else {
            -(-theta * t).exp_m1() / theta
        }
    };
    let integrand = move |t: f64| rho * (-rho * t).exp() * (-inner(t)).exp();
    // beyond t_max the remaining mass is below e^{-rho t_max} = quad_tol / 10
    let t_max = (10.0 / quad_tol).ln() / rho;
    let value = adaptive_simpson(&integrand, 0.0, t_max, 0.9 * quad_tol)?;
    Ok(value.clamp(0.0, 1.0))
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Domain(format!("rho must be > 0, got {rho}")));
    }
    Ok(())
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(Error::Numeric(format!(
                "adaptive quadrature failed to converge on [{a}, {b}] (residual {delta:e})"
            )));
        }
        let l = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
        let r = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
        Ok(l + r)
    }

    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}
