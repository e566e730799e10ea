//! Bayesian estimation: a Gibbs cycle over `(theta, alpha0, alpha1, alpha2)` in which each
//! coordinate is refreshed by a univariate slice update on its full conditional.

mod kernel;
mod prior;
mod slice;

use serde::{Deserialize, Serialize};

pub use prior::{log_prior_alpha, log_prior_theta, PriorSpec};
pub use slice::{analytic_checks, slice_step, SliceCheck, SliceConfig, SliceOutcome};

use crate::bivariate::BivariateSample;
use crate::dist::{loglik, LocationScale, ModelParams, Param};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stats;
use kernel::LikelihoodKernel;

/// `loglik(data, others with which = value) + log prior(which)`; `-inf` off the support.
pub fn log_full_conditional(
    which: Param,
    value: f64,
    others: &ModelParams,
    data: &BivariateSample,
    prior: &PriorSpec,
) -> f64 {
    let lp = prior.log_density(which, value);
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    let p = ModelParams {
        loc_scale: data.loc_scale(),
        ..others.with_value(which, value)
    };
    match loglik(data, &p) {
        Ok(l) => l + lp,
        Err(_) => f64::NEG_INFINITY,
    }
}

fn support(which: Param) -> (f64, f64) {
    match which {
        Param::Theta => (0.0, 1.0),
        _ => (0.0, f64::INFINITY),
    }
}

/// Post-burn-in draws, one sequence per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub theta: Vec<f64>,
    pub alpha0: Vec<f64>,
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    pub burn_in: usize,
    pub total: usize,
    pub seed: RngStream,
    #[serde(default)]
    pub loc_scale: LocationScale,
    /// slice updates that kept their starting point after running out of shrink attempts
    pub shrink_exhausted: usize,
    /// log-density evaluations spent across the whole run, burn-in included
    pub evaluations: u64,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn param(&self, which: Param) -> &[f64] {
        match which {
            Param::Theta => &self.theta,
            Param::Alpha0 => &self.alpha0,
            Param::Alpha1 => &self.alpha1,
            Param::Alpha2 => &self.alpha2,
        }
    }

    pub fn draw(&self, i: usize) -> ModelParams {
        ModelParams {
            theta: self.theta[i],
            alpha0: self.alpha0[i],
            alpha1: self.alpha1[i],
            alpha2: self.alpha2[i],
            loc_scale: self.loc_scale,
        }
    }

    fn push(&mut self, p: &ModelParams) {
        self.theta.push(p.theta);
        self.alpha0.push(p.alpha0);
        self.alpha1.push(p.alpha1);
        self.alpha2.push(p.alpha2);
    }
}

/// Run the slice-within-Gibbs sampler for `total` sweeps and keep those after `burn_in`.
pub fn gibbs_run(
    data: &BivariateSample,
    prior: &PriorSpec,
    init: &ModelParams,
    cfg: &SliceConfig,
    total: usize,
    burn_in: usize,
    seed: RngStream,
) -> Result<Chain> {
    prior.validate()?;
    cfg.validate()?;
    if total <= burn_in {
        return Err(Error::Config(format!("total ({total}) must exceed burn_in ({burn_in})")));
    }
    init.validate()?;
    if init.theta >= 1.0 {
        return Err(Error::InvalidParams(format!(
            "the sampler works on theta in (0, 1); initial theta is {}",
            init.theta
        )));
    }
    let kernel = LikelihoodKernel::new(data);
    let mut rng = seed.rng();
    let mut p = ModelParams {
        loc_scale: data.loc_scale(),
        ..*init
    };
    let mut chain = Chain {
        theta: Vec::with_capacity(total - burn_in),
        alpha0: Vec::with_capacity(total - burn_in),
        alpha1: Vec::with_capacity(total - burn_in),
        alpha2: Vec::with_capacity(total - burn_in),
        burn_in,
        total,
        seed,
        loc_scale: data.loc_scale(),
        shrink_exhausted: 0,
        evaluations: 0,
    };
    let mut survivals = Vec::with_capacity(data.len());

    for sweep in 0..total {
        // theta: the shape-only part is constant along this coordinate
        kernel.survivals(&p.shapes(), &mut survivals);
        let fixed = kernel.shape_part(&p.shapes());
        let out = slice_step(
            |t| {
                let lp = prior.log_density(Param::Theta, t);
                if lp == f64::NEG_INFINITY {
                    return lp;
                }
                fixed + kernel.theta_part(t, &survivals) + lp
            },
            p.theta,
            support(Param::Theta),
            cfg,
            &mut rng,
        )?;
        record(&mut chain, &out);
        p.theta = out.value;

        for which in [Param::Alpha0, Param::Alpha1, Param::Alpha2] {
            let current = p;
            let out = slice_step(
                |x| {
                    let lp = prior.log_density(which, x);
                    if lp == f64::NEG_INFINITY {
                        return lp;
                    }
                    kernel.loglik(&current.with_value(which, x)) + lp
                },
                p.get(which),
                support(which),
                cfg,
                &mut rng,
            )?;
            record(&mut chain, &out);
            p = p.with_value(which, out.value);
        }

        debug_assert!(p.theta > 0.0 && p.theta < 1.0);
        if sweep >= burn_in {
            chain.push(&p);
        }
    }
    Ok(chain)
}

fn record(chain: &mut Chain, out: &SliceOutcome) {
    chain.evaluations += out.evaluations as u64;
    if out.shrink_exhausted {
        chain.shrink_exhausted += 1;
    }
}

/// How credible intervals are cut from the draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    /// sample quantiles at `(1 - level) / 2` and `(1 + level) / 2`
    #[default]
    EqualTailed,
    /// shortest window covering the requested share of draws
    Hpd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub mean: f64,
    pub low: f64,
    pub high: f64,
}

impl ParamSummary {
    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub level: f64,
    pub interval: IntervalKind,
    pub theta: ParamSummary,
    pub alpha0: ParamSummary,
    pub alpha1: ParamSummary,
    pub alpha2: ParamSummary,
}

impl PosteriorSummary {
    pub fn get(&self, which: Param) -> &ParamSummary {
        match which {
            Param::Theta => &self.theta,
            Param::Alpha0 => &self.alpha0,
            Param::Alpha1 => &self.alpha1,
            Param::Alpha2 => &self.alpha2,
        }
    }

    /// Posterior means as a parameter vector.
    pub fn means(&self) -> ModelParams {
        ModelParams {
            theta: self.theta.mean,
            alpha0: self.alpha0.mean,
            alpha1: self.alpha1.mean,
            alpha2: self.alpha2.mean,
            loc_scale: LocationScale::default(),
        }
    }
}

/// Posterior means and equal-tailed credible intervals.
pub fn posterior_summary(chain: &Chain, level: f64) -> Result<PosteriorSummary> {
    posterior_summary_with(chain, level, IntervalKind::EqualTailed)
}

pub fn posterior_summary_with(chain: &Chain, level: f64, kind: IntervalKind) -> Result<PosteriorSummary> {
    if chain.is_empty() {
        return Err(Error::Domain("posterior summary of an empty chain".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("credible level must lie in (0, 1), got {level}")));
    }
    let one = |which: Param| {
        let xs = chain.param(which);
        let (low, high) = match kind {
            IntervalKind::EqualTailed => stats::central_interval(xs, level),
            IntervalKind::Hpd => stats::hpd_interval(xs, level),
        };
        ParamSummary {
            mean: stats::mean(xs),
            low,
            high,
        }
    };
    Ok(PosteriorSummary {
        level,
        interval: kind,
        theta: one(Param::Theta),
        alpha0: one(Param::Alpha0),
        alpha1: one(Param::Alpha1),
        alpha2: one(Param::Alpha2),
    })
}

/// Everything a single Bayesian fit needs besides data and seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BayesConfig {
    pub prior: PriorSpec,
    pub slice: SliceConfig,
    pub total: usize,
    pub burn_in: usize,
    pub level: f64,
    pub interval: IntervalKind,
}

impl Default for BayesConfig {
    fn default() -> Self {
        Self {
            prior: PriorSpec::default(),
            slice: SliceConfig::default(),
            total: 6000,
            burn_in: 1000,
            level: 0.95,
            interval: IntervalKind::EqualTailed,
        }
    }
}

/// Starting point used by the sampler when the caller supplies none.
pub fn default_bayes_init() -> ModelParams {
    ModelParams::new(0.4794, 0.8654, 0.7781, 0.5386).expect("valid constant")
}

/// A chain and its summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesFit {
    pub summary: PosteriorSummary,
    pub chain: Chain,
}

pub fn fit_bayes(data: &BivariateSample, init: &ModelParams, cfg: &BayesConfig, seed: RngStream) -> Result<BayesFit> {
    let chain = gibbs_run(data, &cfg.prior, init, &cfg.slice, cfg.total, cfg.burn_in, seed)?;
    let summary = posterior_summary_with(&chain, cfg.level, cfg.interval)?;
    Ok(BayesFit { summary, chain })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::sample_gbb;

    fn data(n: usize, seed: u64) -> (ModelParams, BivariateSample) {
        let truth = ModelParams::new(0.4, 0.5, 1.0, 1.5).unwrap();
        (truth, sample_gbb(&truth, n, &mut RngStream::new(seed).rng()).unwrap())
    }

    #[test]
    fn conditional_decomposes_into_loglik_plus_prior() {
        let (truth, d) = data(200, 1);
        let prior = PriorSpec::default();
        for (which, v) in [(Param::Theta, 0.3), (Param::Alpha0, 0.9), (Param::Alpha1, 1.7), (Param::Alpha2, 0.2)] {
            let c = log_full_conditional(which, v, &truth, &d, &prior);
            let l = loglik(&d, &truth.with_value(which, v)).unwrap();
            assert_eq!(c - prior.log_density(which, v), c - (c - l));
            assert!((c - l - prior.log_density(which, v)).abs() < 1e-9);
        }
        assert_eq!(log_full_conditional(Param::Theta, 1.5, &truth, &d, &prior), f64::NEG_INFINITY);
        assert_eq!(log_full_conditional(Param::Alpha2, 0.0, &truth, &d, &prior), f64::NEG_INFINITY);
    }

    #[test]
    fn flat_prior_differences_are_loglik_differences() {
        let (truth, d) = data(150, 2);
        let flat = PriorSpec::uniform_hyper(1.0, 1e12, 1.0, 1.0);
        let c = |v| log_full_conditional(Param::Alpha1, v, &truth, &d, &flat);
        let l = |v| loglik(&d, &truth.with_value(Param::Alpha1, v)).unwrap();
        let diff = (c(1.2) - c(0.8)) - (l(1.2) - l(0.8));
        assert!(diff.abs() < 1e-9, "{diff}");
    }

    #[test]
    fn chain_is_deterministic_and_in_support() {
        let (_, d) = data(200, 3);
        let run = || {
            gibbs_run(&d, &PriorSpec::default(), &default_bayes_init(), &SliceConfig::default(), 300, 100, RngStream::new(9))
                .unwrap()
        };
        let a = run();
        assert_eq!(a, run());
        assert_eq!(a.len(), 200);
        for i in 0..a.len() {
            let p = a.draw(i);
            assert!(p.theta > 0.0 && p.theta < 1.0);
            assert!(p.alpha0 > 0.0 && p.alpha1 > 0.0 && p.alpha2 > 0.0);
        }
    }

    #[test]
    fn configuration_errors() {
        let (_, d) = data(50, 4);
        let cfg = SliceConfig::default();
        let prior = PriorSpec::default();
        assert!(gibbs_run(&d, &prior, &default_bayes_init(), &cfg, 10, 10, RngStream::new(1)).is_err());
        let at_one = ModelParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(gibbs_run(&d, &prior, &at_one, &cfg, 10, 1, RngStream::new(1)).is_err());
    }

    fn chain_of(values: Vec<f64>) -> Chain {
        Chain {
            theta: values.clone(),
            alpha0: values.clone(),
            alpha1: values.clone(),
            alpha2: values,
            burn_in: 0,
            total: 0,
            seed: RngStream::new(0),
            loc_scale: LocationScale::default(),
            shrink_exhausted: 0,
            evaluations: 0,
        }
    }

    #[test]
    fn summary_examples() {
        let s = posterior_summary(&chain_of(vec![0.25; 10]), 0.95).unwrap();
        assert_eq!((s.theta.mean, s.theta.low, s.theta.high), (0.25, 0.25, 0.25));
        let s = posterior_summary(&chain_of((1..=100).map(f64::from).collect()), 0.95).unwrap();
        assert!((s.alpha1.low - 3.475).abs() < 1e-12 && (s.alpha1.high - 97.525).abs() < 1e-12);
        assert_eq!(s.alpha1.mean, 50.5);
        let h = posterior_summary_with(&chain_of((1..=100).map(f64::from).collect()), 0.95, IntervalKind::Hpd).unwrap();
        assert_eq!(h.theta.high - h.theta.low, 94.0);
        assert!(posterior_summary(&chain_of(vec![]), 0.95).is_err());
    }
}
