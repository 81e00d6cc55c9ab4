//! Loss families, links, and their derivative/curvature objects.
//!
//! Each family supplies the loss `ρ(y; η(θ))`, its η-derivative
//! `ψ(y, η) = ψ†(y−η)·ψ‡(η)`, the inverse link `η(θ)` with two derivatives,
//! and the curvature pieces the solver and sandwich-variance estimators
//! need. Losses are convex in the index `θ` for every family.
//!
//! Conventions: least squares uses the ½-scaled loss `½(y−η)²` so that
//! `ψ = −(y−η)` and the Gram weight is exactly 1 (t-statistics are
//! invariant to the scaling). Huber keeps its customary unscaled form with
//! `ψ = −2r` inside the corridor. The logistic family accepts fractional
//! outcomes `y ∈ [0,1]` (quasi-likelihood).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Family {
    LeastSquares,
    Logit,
    Quantile { tau: f64 },
    Huber { tau: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
}

impl ModelSpec {
    pub fn least_squares() -> ModelSpec {
        ModelSpec {
            family: Family::LeastSquares,
        }
    }

    pub fn logit() -> ModelSpec {
        ModelSpec {
            family: Family::Logit,
        }
    }

    pub fn quantile(tau: f64) -> Result<ModelSpec> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "quantile level must lie in (0,1), got {tau}"
            )));
        }
        Ok(ModelSpec {
            family: Family::Quantile { tau },
        })
    }

    pub fn huber(tau: f64) -> Result<ModelSpec> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "Huber threshold must be positive, got {tau}"
            )));
        }
        Ok(ModelSpec {
            family: Family::Huber { tau },
        })
    }

    /// Parses the CLI grammar `ls | logit | quantile:<tau> | huber:<tau>`.
    pub fn parse(text: &str) -> Result<ModelSpec> {
        let lower = text.trim().to_ascii_lowercase();
        if lower == "ls" {
            return Ok(ModelSpec::least_squares());
        }
        if lower == "logit" {
            return Ok(ModelSpec::logit());
        }
        if let Some(rest) = lower.strip_prefix("quantile:") {
            let tau: f64 = rest
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad quantile level '{rest}'")))?;
            return ModelSpec::quantile(tau);
        }
        if let Some(rest) = lower.strip_prefix("huber:") {
            let tau: f64 = rest
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad Huber threshold '{rest}'")))?;
            return ModelSpec::huber(tau);
        }
        Err(Error::InvalidConfig(format!(
            "unknown model '{text}'; expected ls, logit, quantile:<tau>, or huber:<tau>"
        )))
    }

    pub fn grammar(&self) -> String {
        match self.family {
            Family::LeastSquares => "ls".into(),
            Family::Logit => "logit".into(),
            Family::Quantile { tau } => format!("quantile:{tau}"),
            Family::Huber { tau } => format!("huber:{tau}"),
        }
    }

    /// Validates an outcome vector against the family's domain.
    pub fn check_outcomes(&self, y: &[f64]) -> Result<()> {
        if let Family::Logit = self.family {
            if let Some(bad) = y.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::DomainError(format!(
                    "logit outcomes must lie in [0,1], found {bad}"
                )));
            }
        }
        Ok(())
    }

    /// Inverse link `η(θ)`.
    pub fn eta(&self, theta: f64) -> f64 {
        match self.family {
            Family::Logit => sigmoid(theta),
            _ => theta,
        }
    }

    /// `η⁽¹⁾(θ)`.
    pub fn eta1(&self, theta: f64) -> f64 {
        match self.family {
            Family::Logit => {
                let e = sigmoid(theta);
                e * (1.0 - e)
            }
            _ => 1.0,
        }
    }

    /// `η⁽²⁾(θ)`.
    pub fn eta2(&self, theta: f64) -> f64 {
        match self.family {
            Family::Logit => {
                let e = sigmoid(theta);
                e * (1.0 - e) * (1.0 - 2.0 * e)
            }
            _ => 0.0,
        }
    }

    /// Loss value at index `theta` (link composed in).
    pub fn rho(&self, y: f64, theta: f64) -> Result<f64> {
        match self.family {
            Family::LeastSquares => Ok(0.5 * (y - theta) * (y - theta)),
            Family::Logit => {
                if !(0.0..=1.0).contains(&y) {
                    return Err(Error::DomainError(format!(
                        "logit outcome {y} outside [0,1]"
                    )));
                }
                // −y·lnη − (1−y)·ln(1−η) = softplus(−θ) + (1−y)θ, stable both tails
                Ok(softplus(-theta) + (1.0 - y) * theta)
            }
            Family::Quantile { tau } => {
                let r = y - theta;
                Ok((tau - if r < 0.0 { 1.0 } else { 0.0 }) * r)
            }
            Family::Huber { tau } => {
                let r = (y - theta).abs();
                if r <= tau {
                    Ok(r * r)
                } else {
                    Ok(tau * (2.0 * r - tau))
                }
            }
        }
    }

    /// `ψ(y, η) = ∂ρ/∂η`.
    pub fn psi(&self, y: f64, eta: f64) -> Result<f64> {
        let (d, dd) = self.psi_factors(y, eta)?;
        Ok(d * dd)
    }

    /// The factorization `ψ(y,η) = ψ†(y−η)·ψ‡(η)`.
    pub fn psi_factors(&self, y: f64, eta: f64) -> Result<(f64, f64)> {
        let r = y - eta;
        match self.family {
            Family::LeastSquares => Ok((-r, 1.0)),
            Family::Logit => {
                if !(eta > 0.0 && eta < 1.0) {
                    return Err(Error::DomainError(format!(
                        "logit mean {eta} outside (0,1)"
                    )));
                }
                Ok((-r, 1.0 / (eta * (1.0 - eta))))
            }
            Family::Quantile { tau } => {
                Ok((if r < 0.0 { 1.0 } else { 0.0 } - tau, 1.0))
            }
            Family::Huber { tau } => {
                let d = if r.abs() <= tau {
                    -2.0 * r
                } else {
                    -2.0 * tau * r.signum()
                };
                Ok((d, 1.0))
            }
        }
    }

    /// Gradient of the composed loss in the index: `∂ρ(y; η(θ))/∂θ`.
    pub fn grad_theta(&self, y: f64, theta: f64) -> Result<f64> {
        match self.family {
            // ψ·η⁽¹⁾ collapses to η−y for the canonical logistic pair
            Family::Logit => {
                if !(0.0..=1.0).contains(&y) {
                    return Err(Error::DomainError(format!(
                        "logit outcome {y} outside [0,1]"
                    )));
                }
                Ok(sigmoid(theta) - y)
            }
            _ => self.psi(y, theta),
        }
    }

    /// Generalized second derivative of the composed loss in the index,
    /// used as the Newton/IRLS weight. Quantile losses are handled by the
    /// solver's smoothed counterpart, never by this method.
    pub fn curvature_theta(&self, y: f64, theta: f64) -> f64 {
        match self.family {
            Family::LeastSquares => 1.0,
            Family::Logit => {
                let e = sigmoid(theta);
                e * (1.0 - e)
            }
            Family::Huber { tau } => {
                if (y - theta).abs() <= tau {
                    2.0
                } else {
                    0.0
                }
            }
            Family::Quantile { .. } => f64::NAN,
        }
    }

    /// Per-observation Gram weight `Υ̂·η⁽¹⁾(θ̂)²` for the smooth families.
    /// Quantile weights require the estimated conditional density and are
    /// assembled in the covariance layer.
    pub fn upsilon_pointwise(&self, theta_hat: f64, resid: f64) -> Result<f64> {
        match self.family {
            Family::LeastSquares => Ok(1.0),
            Family::Logit => {
                let e = sigmoid(theta_hat);
                Ok(e * (1.0 - e))
            }
            Family::Huber { tau } => Ok(if resid.abs() <= tau { 2.0 } else { 0.0 }),
            Family::Quantile { .. } => Err(Error::SingularCurvature(
                "quantile curvature needs a sparsity estimate".into(),
            )),
        }
    }

    pub fn is_quantile(&self) -> bool {
        matches!(self.family, Family::Quantile { .. })
    }

    pub fn quantile_tau(&self) -> Option<f64> {
        match self.family {
            Family::Quantile { tau } => Some(tau),
            _ => None,
        }
    }
}

#[inline]
pub fn sigmoid(theta: f64) -> f64 {
    if theta >= 0.0 {
        1.0 / (1.0 + (-theta).exp())
    } else {
        let e = theta.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Moreau-envelope smoothing of the check function, used by the quantile
/// solver. As `kappa → 0` the envelope recovers the exact check loss.
pub mod smoothed_check {
    /// Smoothed loss at residual `r = y − θ`.
    pub fn rho(r: f64, tau: f64, kappa: f64) -> f64 {
        if r >= kappa * tau {
            tau * r - 0.5 * kappa * tau * tau
        } else if r <= -kappa * (1.0 - tau) {
            (tau - 1.0) * r - 0.5 * kappa * (1.0 - tau) * (1.0 - tau)
        } else {
            0.5 * r * r / kappa
        }
    }

    /// Derivative in θ (note `∂r/∂θ = −1`).
    pub fn grad_theta(r: f64, tau: f64, kappa: f64) -> f64 {
        if r >= kappa * tau {
            -tau
        } else if r <= -kappa * (1.0 - tau) {
            1.0 - tau
        } else {
            -r / kappa
        }
    }

    /// Second derivative in θ.
    pub fn curvature_theta(r: f64, tau: f64, kappa: f64) -> f64 {
        if r > -kappa * (1.0 - tau) && r < kappa * tau {
            1.0 / kappa
        } else {
            0.0
        }
    }
}
