//! Hurst parameter domain type.
//!
//! Everything downstream branches on which side of 1/2 the parameter sits:
//! rough paths (H < 1/2) have singular kernels and negatively correlated
//! increments, smooth paths (H > 1/2) have long-range dependence, and
//! H = 1/2 collapses to standard Brownian motion. The regime is derived
//! once here so branch conventions stay in one place.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HurstError {
    #[error("Hurst parameter must lie in the open interval (0,1), got {0}")]
    OutOfRange(f64),
}

/// Roughness regime relative to the Brownian point H = 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Rough,
    Brownian,
    Smooth,
}

/// Validated Hurst parameter, H in (0,1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstParameter(f64);

impl HurstParameter {
    pub fn new(h: f64) -> Result<Self, HurstError> {
        if !(h > 0.0 && h < 1.0) {
            return Err(HurstError::OutOfRange(h));
        }
        Ok(HurstParameter(h))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn regime(self) -> Regime {
        if self.0 < 0.5 {
            Regime::Rough
        } else if self.0 > 0.5 {
            Regime::Smooth
        } else {
            Regime::Brownian
        }
    }

    /// H ∨ 1/2, the exponent driver in every growth bound.
    #[inline]
    pub fn max_half(self) -> f64 {
        self.0.max(0.5)
    }

    #[inline]
    pub fn is_brownian(self) -> bool {
        self.0 == 0.5
    }
}

impl TryFrom<f64> for HurstParameter {
    type Error = HurstError;
    fn try_from(h: f64) -> Result<Self, HurstError> {
        HurstParameter::new(h)
    }
}

impl From<HurstParameter> for f64 {
    fn from(h: HurstParameter) -> f64 {
        h.0
    }
}

impl std::fmt::Display for HurstParameter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_interior_values() {
        for h in [1e-6, 0.3, 0.5, 0.7, 1.0 - 1e-6] {
            assert_eq!(HurstParameter::new(h).unwrap().value(), h);
        }
    }

    #[test]
    fn rejects_boundary_and_outside() {
        for h in [0.0, 1.0, -0.1, 1.5, f64::NAN, f64::INFINITY] {
            assert!(HurstParameter::new(h).is_err(), "h={h} should be rejected");
        }
    }

    #[test]
    fn regime_matches_half_comparison() {
        assert_eq!(HurstParameter::new(0.3).unwrap().regime(), Regime::Rough);
        assert_eq!(HurstParameter::new(0.5).unwrap().regime(), Regime::Brownian);
        assert_eq!(HurstParameter::new(0.7).unwrap().regime(), Regime::Smooth);
    }

    #[test]
    fn max_half_clamps_below() {
        assert_eq!(HurstParameter::new(0.3).unwrap().max_half(), 0.5);
        assert_eq!(HurstParameter::new(0.7).unwrap().max_half(), 0.7);
    }
}
