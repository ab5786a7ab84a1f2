//! Parameter types naming the laws handled by this crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The pair `(theta, rho)` naming a two-parameter Yule-Simon law.
///
/// `theta` is the fertility decay rate of the underlying branching process
/// (negative values mean fertility grows with age) and `rho > 0` is the rate
/// of the independent exponential sampling time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub theta: f64,
    pub rho: f64,
}

impl ModelParams {
    /// Validates `rho > 0` (and finiteness of both fields).
    pub fn new(theta: f64, rho: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::Domain(format!("theta must be finite, got {theta}")));
        }
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::Domain(format!("rho must be > 0, got {rho}")));
        }
        Ok(Self { theta, rho })
    }

    /// Whether `X(theta, rho)` is integrable, i.e. `theta + rho > 1`.
    pub fn mean_finite(&self) -> bool {
        self.theta + self.rho > 1.0
    }
}

/// Parameters of the first-passage law of a unit Poisson process through the
/// moving boundary `b t - x`: requires `b > 1` and `x > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstPassageParams {
    pub b: f64,
    pub x: f64,
}

impl FirstPassageParams {
    pub fn new(b: f64, x: f64) -> Result<Self> {
        if !(b > 1.0) || !b.is_finite() {
            return Err(Error::Domain(format!("b must be > 1, got {b}")));
        }
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::Domain(format!("x must be > 0, got {x}")));
        }
        Ok(Self { b, x })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0.0, 2.0).is_ok());
        assert!(ModelParams::new(-3.5, 0.1).is_ok());
        assert!(ModelParams::new(0.0, 0.0).is_err());
        assert!(ModelParams::new(0.0, -1.0).is_err());
        assert!(ModelParams::new(f64::NAN, 1.0).is_err());
        assert!(ModelParams::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn mean_finite_flag() {
        assert!(ModelParams::new(0.0, 2.0).unwrap().mean_finite());
        assert!(!ModelParams::new(0.0, 1.0).unwrap().mean_finite());
        assert!(!ModelParams::new(-1.0, 2.0).unwrap().mean_finite());
        assert!(ModelParams::new(0.5, 1.0).unwrap().mean_finite());
    }

    #[test]
    fn first_passage_validation() {
        assert!(FirstPassageParams::new(2.0, 1.0).is_ok());
        assert!(FirstPassageParams::new(1.0, 1.0).is_err());
        assert!(FirstPassageParams::new(2.0, 0.0).is_err());
    }
}
