//! Log-likelihood evaluator specialised for one-coordinate-at-a-time updates.

use crate::bivariate::BivariateSample;
use crate::dist::{ModelParams, RegionTag, Shapes};

/// Per-region log-excesses plus their sums, so the terms linear in the shapes cost O(1).
#[derive(Debug, Clone)]
pub(crate) struct LikelihoodKernel {
    below: Vec<(f64, f64)>,
    above: Vec<(f64, f64)>,
    sum_below: (f64, f64),
    sum_above: (f64, f64),
    log_jacobian: f64,
}

fn sums(v: &[(f64, f64)]) -> (f64, f64) {
    v.iter().fold((0.0, 0.0), |(a, b), &(l1, l2)| (a + l1, b + l2))
}

impl LikelihoodKernel {
    pub(crate) fn new(data: &BivariateSample) -> Self {
        let mut below = Vec::with_capacity(data.m1());
        let mut above = Vec::with_capacity(data.m2());
        for o in data.observations() {
            let l = (o.log1p_x1, o.log1p_x2);
            match o.region {
                RegionTag::Below => below.push(l),
                _ => above.push(l),
            }
        }
        let ls = data.loc_scale();
        Self {
            sum_below: sums(&below),
            sum_above: sums(&above),
            log_jacobian: data.len() as f64 * (ls.sigma1 * ls.sigma2).ln(),
            below,
            above,
        }
    }

    fn n(&self) -> f64 {
        (self.below.len() + self.above.len()) as f64
    }

    /// Everything except `n ln theta` and the geometric correction terms.
    pub(crate) fn shape_part(&self, s: &Shapes) -> f64 {
        let a02 = s.alpha0 + s.alpha2;
        let a01 = s.alpha0 + s.alpha1;
        let m1 = self.below.len() as f64;
        let m2 = self.above.len() as f64;
        let below = m1 * (s.alpha1 * a02).ln() - (s.alpha1 + 1.0) * self.sum_below.0 - (a02 + 1.0) * self.sum_below.1;
        let above = m2 * (s.alpha2 * a01).ln() - (a01 + 1.0) * self.sum_above.0 - (s.alpha2 + 1.0) * self.sum_above.1;
        let log_p = (s.alpha0 + s.alpha1 + s.alpha2).ln() - (s.alpha1 + s.alpha2).ln();
        below + above + self.n() * log_p - self.log_jacobian
    }

    /// Joint MOBVPA survival at every observation, below-region first.
    pub(crate) fn survivals(&self, s: &Shapes, out: &mut Vec<f64>) {
        out.clear();
        let a02 = s.alpha0 + s.alpha2;
        let a01 = s.alpha0 + s.alpha1;
        out.extend(self.below.iter().map(|&(l1, l2)| (-s.alpha1 * l1 - a02 * l2).exp()));
        out.extend(self.above.iter().map(|&(l1, l2)| (-a01 * l1 - s.alpha2 * l2).exp()));
    }

    /// `n ln theta + sum [ln(1 + r) - 3 ln(1 - r)]` with `r = (1 - theta) S`.
    pub(crate) fn theta_part(&self, theta: f64, survivals: &[f64]) -> f64 {
        let q = 1.0 - theta;
        let mut acc = self.n() * theta.ln();
        if q > 0.0 {
            for &s in survivals {
                let r = q * s;
                acc += r.ln_1p() - 3.0 * (-r).ln_1p();
            }
        }
        acc
    }

    fn theta_part_direct(&self, theta: f64, s: &Shapes) -> f64 {
        let q = 1.0 - theta;
        let mut acc = self.n() * theta.ln();
        if q > 0.0 {
            let a02 = s.alpha0 + s.alpha2;
            let a01 = s.alpha0 + s.alpha1;
            let term = |log_s: f64| {
                let r = q * log_s.exp();
                r.ln_1p() - 3.0 * (-r).ln_1p()
            };
            acc += self.below.iter().map(|&(l1, l2)| term(-s.alpha1 * l1 - a02 * l2)).sum::<f64>();
            acc += self.above.iter().map(|&(l1, l2)| term(-a01 * l1 - s.alpha2 * l2)).sum::<f64>();
        }
        acc
    }

    /// Full log-likelihood; `-inf` for parameters outside the support.
    pub(crate) fn loglik(&self, p: &ModelParams) -> f64 {
        let ok = p.theta > 0.0 && p.theta <= 1.0 && p.alpha0 > 0.0 && p.alpha1 > 0.0 && p.alpha2 > 0.0;
        if !ok {
            return f64::NEG_INFINITY;
        }
        let v = self.shape_part(&p.shapes()) + self.theta_part_direct(p.theta, &p.shapes());
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{loglik, LocationScale};
    use crate::rng::RngStream;
    use crate::sampler::sample_gbb;

    #[test]
    fn agrees_with_reference_loglik() {
        let ls = LocationScale::new(0.5, -0.2, 2.0, 0.7).unwrap();
        let truth = ModelParams::with_loc_scale(0.3, 0.5, 0.8, 1.1, ls).unwrap();
        let data = sample_gbb(&truth, 300, &mut RngStream::new(12).rng()).unwrap();
        let k = LikelihoodKernel::new(&data);
        let mut surv = Vec::new();
        for p in [
            truth,
            ModelParams { theta: 1.0, ..truth },
            ModelParams::with_loc_scale(0.05, 2.0, 0.1, 0.4, ls).unwrap(),
        ] {
            let want = loglik(&data, &p).unwrap();
            let got = k.loglik(&p);
            assert!((got - want).abs() <= 1e-10 * want.abs(), "{got} vs {want}");
            k.survivals(&p.shapes(), &mut surv);
            let split = k.shape_part(&p.shapes()) + k.theta_part(p.theta, &surv);
            assert!((split - want).abs() <= 1e-10 * want.abs());
        }
        assert_eq!(k.loglik(&ModelParams { theta: 0.0, ..truth }), f64::NEG_INFINITY);
    }
}
