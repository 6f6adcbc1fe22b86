//! Per-instance margin losses and their smoothed versions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default smoothing parameter.
pub const DEFAULT_MU: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `(1 - z)+`
    Hinge,
    /// `((1 - z)+)^2 / 2`
    SmoothedHinge,
    /// `log(1 + exp(-z))`
    Logistic,
}

impl LossKind {
    pub fn is_differentiable(self) -> bool {
        self != LossKind::Hinge
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Hinge => "hinge",
            LossKind::SmoothedHinge => "smoothed_hinge",
            LossKind::Logistic => "logistic",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hinge" => Ok(LossKind::Hinge),
            "smoothed_hinge" | "smoothed-hinge" => Ok(LossKind::SmoothedHinge),
            "logistic" => Ok(LossKind::Logistic),
            other => Err(Error::invalid(format!(
                "unknown loss `{other}` (expected hinge, smoothed_hinge or logistic)"
            ))),
        }
    }
}

/// Loss kind plus smoothing parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub mu: f64,
}

impl LossSpec {
    /// Validates `mu`: finite and non-negative, and positive for the hinge.
    pub fn new(kind: LossKind, mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::invalid(format!("mu must be finite and >= 0, got {mu}")));
        }
        if kind == LossKind::Hinge && mu == 0.0 {
            return Err(Error::invalid("hinge loss needs mu > 0"));
        }
        Ok(LossSpec { kind, mu })
    }
}

impl Default for LossSpec {
    fn default() -> Self {
        LossSpec {
            kind: LossKind::Hinge,
            mu: DEFAULT_MU,
        }
    }
}

/// Unsmoothed loss at margin `z`.
pub fn loss_phi(kind: LossKind, z: f64) -> f64 {
    match kind {
        LossKind::Hinge => (1.0 - z).max(0.0),
        LossKind::SmoothedHinge => 0.5 * (1.0 - z).max(0.0).powi(2),
        LossKind::Logistic => {
            // log(1 + e^-z) without overflow for large |z|
            if z >= 0.0 {
                (-z).exp().ln_1p()
            } else {
                -z + z.exp().ln_1p()
            }
        }
    }
}

fn hinge_dual(z: f64, mu: f64) -> f64 {
    ((z - 1.0) / mu).clamp(-1.0, 0.0)
}

/// Smoothed loss. For the hinge this is `max over a in [-1, 0]` of
/// `a (z - 1) - mu a^2 / 2`; `mu = 0` gives the exact hinge. The
/// differentiable kinds are returned unsmoothed.
pub fn smoothed_phi(kind: LossKind, z: f64, mu: f64) -> Result<f64> {
    if mu.is_nan() || mu < 0.0 {
        return Err(Error::invalid(format!("mu must be >= 0, got {mu}")));
    }
    match kind {
        LossKind::Hinge if mu > 0.0 => {
            let a = hinge_dual(z, mu);
            Ok(a * (z - 1.0) - 0.5 * mu * a * a)
        }
        _ => Ok(loss_phi(kind, z)),
    }
}

/// Derivative of [`smoothed_phi`] in `z`.
pub fn smoothed_phi_grad(kind: LossKind, z: f64, mu: f64) -> Result<f64> {
    if mu.is_nan() || mu < 0.0 {
        return Err(Error::invalid(format!("mu must be >= 0, got {mu}")));
    }
    match kind {
        LossKind::Hinge if mu == 0.0 => Err(Error::invalid("hinge loss has no gradient at mu = 0")),
        LossKind::Hinge => Ok(hinge_dual(z, mu)),
        LossKind::SmoothedHinge => Ok(-(1.0 - z).max(0.0)),
        LossKind::Logistic => {
            // -1 / (1 + e^z) = -sigmoid(-z)
            if z >= 0.0 {
                let e = (-z).exp();
                Ok(-e / (1.0 + e))
            } else {
                Ok(-1.0 / (1.0 + z.exp()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert!((loss_phi(LossKind::Logistic, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(loss_phi(LossKind::SmoothedHinge, 0.0), 0.5);
        assert_eq!(loss_phi(LossKind::Hinge, 2.0), 0.0);
        assert!(loss_phi(LossKind::Logistic, -800.0).is_finite());
        assert_eq!(loss_phi(LossKind::Logistic, 800.0), 0.0);
    }

    #[test]
    fn smoothed_hinge_values() {
        let v = smoothed_phi(LossKind::Hinge, 0.5, 0.2).unwrap();
        assert!((v - 0.4).abs() < 1e-15);
        let v = smoothed_phi(LossKind::Hinge, 0.95, 0.2).unwrap();
        assert!((v - 0.00625).abs() < 1e-15);
        assert_eq!(smoothed_phi(LossKind::Hinge, 1.5, 0.3).unwrap(), 0.0);
        assert_eq!(smoothed_phi(LossKind::Hinge, -2.0, 0.0).unwrap(), 3.0);
        assert_eq!(
            smoothed_phi(LossKind::Logistic, 0.3, 0.5).unwrap(),
            loss_phi(LossKind::Logistic, 0.3)
        );
        assert!(smoothed_phi(LossKind::Hinge, 0.0, -1.0).is_err());
    }

    #[test]
    fn gradients() {
        assert!((smoothed_phi_grad(LossKind::Hinge, 0.95, 0.2).unwrap() + 0.25).abs() < 1e-12);
        assert_eq!(smoothed_phi_grad(LossKind::Logistic, 0.0, 0.0).unwrap(), -0.5);
        assert_eq!(smoothed_phi_grad(LossKind::Hinge, 3.0, 0.1).unwrap(), 0.0);
        assert_eq!(smoothed_phi_grad(LossKind::SmoothedHinge, 0.25, 0.0).unwrap(), -0.75);
        assert!(smoothed_phi_grad(LossKind::Hinge, 0.0, 0.0).is_err());
        assert!(smoothed_phi_grad(LossKind::Logistic, -800.0, 0.0).unwrap().is_finite());
    }

    #[test]
    fn spec_validation() {
        assert!(LossSpec::new(LossKind::Hinge, 0.0).is_err());
        assert!(LossSpec::new(LossKind::Logistic, 0.0).is_ok());
        assert!(LossSpec::new(LossKind::Logistic, f64::NAN).is_err());
        assert_eq!("smoothed_hinge".parse::<LossKind>().unwrap(), LossKind::SmoothedHinge);
        assert!("square".parse::<LossKind>().is_err());
    }
}
