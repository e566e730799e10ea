//! Univariate slice sampling with stepping out and shrinkage.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SliceConfig {
    /// initial bracket width `w`
    pub width: f64,
    /// total number of width-`w` extensions allowed while stepping out
    pub max_stepout: usize,
    /// rejected proposals tolerated before giving up and keeping the current point
    pub max_shrink: usize,
}

impl Default for SliceConfig {
    fn default() -> Self {
        Self {
            width: 1.0,
            max_stepout: 100,
            max_shrink: 100,
        }
    }
}

impl SliceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::Config(format!("slice width must be positive, got {}", self.width)));
        }
        Ok(())
    }
}

/// Result of one slice update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceOutcome {
    pub value: f64,
    /// shrinkage ran out of attempts; `value` is the starting point
    pub shrink_exhausted: bool,
    pub evaluations: usize,
}

/// One slice-sampling update of `x0` under the unnormalized log density `logf`.
///
/// `support` is the open interval on which `logf` may be finite; the bracket is clipped
/// to it. `logf` should return `-inf` outside the support.
pub fn slice_step<F, R>(
    mut logf: F,
    x0: f64,
    support: (f64, f64),
    cfg: &SliceConfig,
    rng: &mut R,
) -> Result<SliceOutcome>
where
    F: FnMut(f64) -> f64,
    R: Rng + ?Sized,
{
    let (lo, hi) = support;
    if !(x0 > lo && x0 < hi) {
        return Err(Error::Domain(format!("slice start {x0} outside ({lo}, {hi})")));
    }
    let f0 = logf(x0);
    let mut evaluations = 1;
    if !f0.is_finite() {
        return Err(Error::Domain(format!("log density at slice start {x0} is {f0}")));
    }
    // level = f0 + ln U, written with an Exp(1) draw that is never infinite
    let e: f64 = rng.random();
    let level = f0 + (-e).ln_1p();

    let w = cfg.width;
    let u: f64 = rng.random();
    let mut left = x0 - w * u;
    let mut right = left + w;
    let v: f64 = rng.random();
    let m = cfg.max_stepout;
    let mut j = (m as f64 * v).floor() as usize;
    let mut k = m.saturating_sub(1).saturating_sub(j);
    while j > 0 && left > lo {
        evaluations += 1;
        if logf(left) < level {
            break;
        }
        left -= w;
        j -= 1;
    }
    while k > 0 && right < hi {
        evaluations += 1;
        if logf(right) < level {
            break;
        }
        right += w;
        k -= 1;
    }
    left = left.max(lo);
    right = right.min(hi);

    for _ in 0..cfg.max_shrink {
        let t: f64 = rng.random();
        let x1 = left + t * (right - left);
        evaluations += 1;
        if x1 > lo && x1 < hi && logf(x1) >= level {
            return Ok(SliceOutcome {
                value: x1,
                shrink_exhausted: false,
                evaluations,
            });
        }
        if x1 < x0 {
            left = x1;
        } else {
            right = x1;
        }
    }
    Ok(SliceOutcome {
        value: x0,
        shrink_exhausted: true,
        evaluations,
    })
}

/// Outcome of running the slice sampler against a target with known moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceCheck {
    pub target: String,
    pub mean: f64,
    pub mean_expected: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_expected: f64,
    pub variance_se: f64,
}

impl SliceCheck {
    /// Both moments lie within `k` Monte Carlo standard errors of their exact values.
    pub fn within(&self, k: f64) -> bool {
        (self.mean - self.mean_expected).abs() <= k * self.mean_se
            && (self.variance - self.variance_expected).abs() <= k * self.variance_se
    }
}

fn check_target<F: Fn(f64) -> f64 + Copy>(
    target: &str,
    logf: F,
    support: (f64, f64),
    start: f64,
    moments: (f64, f64),
    iterations: usize,
    seed: u64,
) -> Result<SliceCheck> {
    let mut rng = crate::rng::RngStream::new(seed).rng();
    let cfg = SliceConfig::default();
    let mut x = start;
    let mut draws = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        x = slice_step(logf, x, support, &cfg, &mut rng)?.value;
        draws.push(x);
    }
    let mean = crate::stats::mean(&draws);
    let sq: Vec<f64> = draws.iter().map(|d| (d - mean) * (d - mean)).collect();
    let batches = 50;
    Ok(SliceCheck {
        target: target.into(),
        mean,
        mean_expected: moments.0,
        mean_se: crate::stats::batch_means_se(&draws, batches),
        variance: crate::stats::variance(&draws),
        variance_expected: moments.1,
        variance_se: crate::stats::batch_means_se(&sq, batches),
    })
}

/// Run the sampler on Uniform(0, 1), Beta(2, 5) and Gamma(shape 0.7, scale 0.75).
pub fn analytic_checks(iterations: usize, seed: u64) -> Result<Vec<SliceCheck>> {
    let unit = |x: f64, f: f64| if x > 0.0 && x < 1.0 { f } else { f64::NEG_INFINITY };
    let (k, s) = (0.7, 0.75);
    Ok(vec![
        check_target("uniform(0,1)", |x| unit(x, 0.0), (0.0, 1.0), 0.5, (0.5, 1.0 / 12.0), iterations, seed)?,
        check_target(
            "beta(2,5)",
            |x| unit(x, x.ln() + 4.0 * (-x).ln_1p()),
            (0.0, 1.0),
            0.3,
            (2.0 / 7.0, 10.0 / (49.0 * 8.0)),
            iterations,
            seed + 1,
        )?,
        check_target(
            "gamma(0.7,0.75)",
            |x| if x > 0.0 { (k - 1.0) * x.ln() - x / s } else { f64::NEG_INFINITY },
            (0.0, f64::INFINITY),
            0.5,
            (k * s, k * s * s),
            iterations,
            seed + 2,
        )?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn run(logf: impl Fn(f64) -> f64 + Copy, x0: f64, support: (f64, f64), n: usize) -> Vec<f64> {
        let mut rng = RngStream::new(2024).rng();
        let cfg = SliceConfig::default();
        let mut x = x0;
        (0..n)
            .map(|_| {
                x = slice_step(logf, x, support, &cfg, &mut rng).unwrap().value;
                x
            })
            .collect()
    }

    #[test]
    fn uniform_target() {
        let xs = run(|x| if x > 0.0 && x < 1.0 { 0.0 } else { f64::NEG_INFINITY }, 0.9, (0.0, 1.0), 50_000);
        let m = crate::stats::mean(&xs);
        // successive draws on a flat target are independent
        assert!((m - 0.5).abs() < 3.0 * (1.0f64 / 12.0 / xs.len() as f64).sqrt(), "{m}");
        assert!(xs.iter().all(|&x| x > 0.0 && x < 1.0));
    }

    #[test]
    fn analytic_targets() {
        for c in analytic_checks(40_000, 77).unwrap() {
            assert!(c.within(4.0), "{c:?}");
        }
    }

    #[test]
    fn rejects_bad_start() {
        let mut rng = RngStream::new(1).rng();
        let cfg = SliceConfig::default();
        assert!(slice_step(|_| 0.0, 2.0, (0.0, 1.0), &cfg, &mut rng).is_err());
        assert!(slice_step(|_| f64::NEG_INFINITY, 0.5, (0.0, 1.0), &cfg, &mut rng).is_err());
    }

    #[test]
    fn exhausted_shrink_keeps_start() {
        // a spike so narrow that no proposal can land in it
        let cfg = SliceConfig { max_shrink: 3, ..SliceConfig::default() };
        let mut rng = RngStream::new(5).rng();
        let logf = |x: f64| if (x - 0.5).abs() < 1e-300 { 0.0 } else { -1e6 };
        let out = slice_step(logf, 0.5, (0.0, 1.0), &cfg, &mut rng).unwrap();
        assert!(out.shrink_exhausted);
        assert_eq!(out.value, 0.5);
    }

    #[test]
    fn deterministic_given_stream() {
        let logf = |x: f64| -0.5 * x * x;
        let a = run(logf, 0.0, (f64::NEG_INFINITY, f64::INFINITY), 100);
        let b = run(logf, 0.0, (f64::NEG_INFINITY, f64::INFINITY), 100);
        assert_eq!(a, b);
    }
}
