//! Gamma priors on the shapes and a Beta prior on `theta`.

use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use crate::dist::Param;
use crate::error::{Error, Result};

/// Hyper-parameters: `alpha_k ~ Gamma(k_k, scale_k)` and `theta ~ Beta(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub k0: f64,
    pub theta0: f64,
    pub k1: f64,
    pub theta1: f64,
    pub k2: f64,
    pub theta2: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for PriorSpec {
    /// Vague priors: shape 0.70 and scale 0.75 for every alpha, `Beta(0.70, 0.75)` for theta.
    fn default() -> Self {
        Self::uniform_hyper(0.70, 0.75, 0.70, 0.75)
    }
}

impl PriorSpec {
    /// Same Gamma `(k, scale)` on all three shapes plus `Beta(a, b)`.
    pub fn uniform_hyper(k: f64, scale: f64, a: f64, b: f64) -> Self {
        Self {
            k0: k,
            theta0: scale,
            k1: k,
            theta1: scale,
            k2: k,
            theta2: scale,
            a,
            b,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("k0", self.k0),
            ("theta0", self.theta0),
            ("k1", self.k1),
            ("theta1", self.theta1),
            ("k2", self.k2),
            ("theta2", self.theta2),
            ("a", self.a),
            ("b", self.b),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("prior {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Every hyper-parameter multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            k0: self.k0 * factor,
            theta0: self.theta0 * factor,
            k1: self.k1 * factor,
            theta1: self.theta1 * factor,
            k2: self.k2 * factor,
            theta2: self.theta2 * factor,
            a: self.a * factor,
            b: self.b * factor,
        }
    }

    /// Log prior density of one coordinate; `-inf` outside its support.
    pub fn log_density(&self, which: Param, value: f64) -> f64 {
        let r = match which {
            Param::Theta => log_prior_theta(value, self.a, self.b),
            Param::Alpha0 => log_prior_alpha(value, self.k0, self.theta0),
            Param::Alpha1 => log_prior_alpha(value, self.k1, self.theta1),
            Param::Alpha2 => log_prior_alpha(value, self.k2, self.theta2),
        };
        r.unwrap_or(f64::NEG_INFINITY)
    }
}

/// Gamma log density with shape `k` and scale `scale`.
pub fn log_prior_alpha(x: f64, k: f64, scale: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma prior needs x > 0, got {x}")));
    }
    Ok(-ln_gamma(k) - k * scale.ln() + (k - 1.0) * x.ln() - x / scale)
}

/// Beta log density on the open unit interval.
pub fn log_prior_theta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!("beta prior needs 0 < x < 1, got {x}")));
    }
    Ok(-ln_beta(a, b) + (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p())
}
