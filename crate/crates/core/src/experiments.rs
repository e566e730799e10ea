//! Replicated simulation studies: simulate at a known truth, refit, aggregate.
//!
//! Replications run on a bounded rayon pool. Each one draws from its own substream of
//! the master seed and results are folded in replication order, so a report does not
//! depend on how work was scheduled.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{default_bayes_init, fit_bayes, BayesConfig, IntervalKind};
use crate::dist::{ModelParams, Param};
use crate::em::{default_init, fit_em_with, EmConfig};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::sampler::sample_gbb;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Em,
    Bayes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub truth: ModelParams,
    pub n: usize,
    pub replications: usize,
    pub level: f64,
    pub method: Method,
    pub em: EmConfig,
    /// EM starting point; the EM default when absent
    pub em_init: Option<ModelParams>,
    pub bayes: BayesConfig,
    /// sampler starting point; the Bayes default when absent
    pub bayes_init: Option<ModelParams>,
    /// master seed; studies refuse to run without one
    pub seed: Option<RngStream>,
    /// worker threads (0 lets rayon decide)
    pub jobs: usize,
    /// largest tolerated share of failed replications
    pub max_failure_rate: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            truth: ModelParams::new(0.2, 0.1, 0.2, 0.4).expect("valid constant"),
            n: 1000,
            replications: 100,
            level: 0.95,
            method: Method::Em,
            em: EmConfig::default(),
            em_init: None,
            bayes: BayesConfig::default(),
            bayes_init: None,
            seed: None,
            jobs: 0,
            max_failure_rate: 0.01,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        self.truth.validate()?;
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("sample size must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if !(0.0..=1.0).contains(&self.max_failure_rate) {
            return Err(Error::Config("max_failure_rate must lie in [0, 1]".into()));
        }
        if self.seed.is_none() {
            return Err(Error::Config("a study needs an explicit seed".into()));
        }
        Ok(())
    }

    fn failure_limit(&self) -> usize {
        (self.max_failure_rate * self.replications as f64).floor() as usize
    }
}

/// Aggregated study output. Per-parameter vectors are ordered `theta, alpha0, alpha1, alpha2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub method: Method,
    pub truth: [f64; 4],
    pub n: usize,
    pub replications: usize,
    pub level: f64,
    /// how `ci_low` / `ci_high` were formed
    pub interval: String,
    pub ae: [f64; 4],
    pub mse: [f64; 4],
    pub ci_low: [f64; 4],
    pub ci_high: [f64; 4],
    pub cp: Option<[f64; 4]>,
    pub avg_iterations: Option<f64>,
    pub failures: usize,
    pub wall_time_s: f64,
    /// the configuration that produced this report
    pub config: StudyConfig,
}

struct Replicate {
    estimate: [f64; 4],
    iterations: Option<usize>,
    interval: Option<([f64; 4], [f64; 4])>,
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

fn run_replications<F>(cfg: &StudyConfig, one: F) -> Result<(Vec<Replicate>, usize)>
where
    F: Fn(usize, RngStream) -> Result<Option<Replicate>> + Sync,
{
    let seed = cfg.seed.expect("validated");
    let outcomes: Vec<Option<Replicate>> = pool(cfg.jobs)?.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|r| one(r, seed.substream(r as u64)).ok().flatten())
            .collect()
    });
    let failures = outcomes.iter().filter(|o| o.is_none()).count();
    let limit = cfg.failure_limit();
    if failures > limit || failures == cfg.replications {
        return Err(Error::TooManyFailures {
            failed: failures,
            total: cfg.replications,
            limit,
        });
    }
    Ok((outcomes.into_iter().flatten().collect(), failures))
}

fn column(reps: &[Replicate], k: usize) -> Vec<f64> {
    reps.iter().map(|r| r.estimate[k]).collect()
}

fn aggregate(cfg: &StudyConfig, reps: &[Replicate], failures: usize, started: Instant) -> StudyReport {
    let truth = cfg.truth.to_array();
    let mut report = StudyReport {
        method: cfg.method,
        truth,
        n: cfg.n,
        replications: cfg.replications,
        level: cfg.level,
        interval: String::new(),
        ae: [0.0; 4],
        mse: [0.0; 4],
        ci_low: [0.0; 4],
        ci_high: [0.0; 4],
        cp: None,
        avg_iterations: None,
        failures,
        wall_time_s: 0.0,
        config: cfg.clone(),
    };
    for k in 0..4 {
        let xs = column(reps, k);
        report.ae[k] = stats::mean(&xs);
        report.mse[k] = xs.iter().map(|x| (x - truth[k]).powi(2)).sum::<f64>() / xs.len() as f64;
    }
    match cfg.method {
        Method::Em => {
            report.interval = "percentile of replication estimates".into();
            for k in 0..4 {
                let (lo, hi) = stats::central_interval(&column(reps, k), cfg.level);
                report.ci_low[k] = lo;
                report.ci_high[k] = hi;
            }
            let iters: Vec<f64> = reps.iter().filter_map(|r| r.iterations).map(|i| i as f64).collect();
            report.avg_iterations = Some(stats::mean(&iters));
        }
        Method::Bayes => {
            report.interval = match cfg.bayes.interval {
                IntervalKind::EqualTailed => "mean of equal-tailed credible bounds",
                IntervalKind::Hpd => "mean of HPD credible bounds",
            }
            .into();
            let mut cp = [0.0; 4];
            for k in 0..4 {
                let bounds: Vec<([f64; 4], [f64; 4])> = reps.iter().filter_map(|r| r.interval).collect();
                let lows: Vec<f64> = bounds.iter().map(|b| b.0[k]).collect();
                let highs: Vec<f64> = bounds.iter().map(|b| b.1[k]).collect();
                report.ci_low[k] = stats::mean(&lows);
                report.ci_high[k] = stats::mean(&highs);
                let hits = bounds.iter().filter(|b| b.0[k] <= truth[k] && truth[k] <= b.1[k]).count();
                cp[k] = hits as f64 / bounds.len() as f64;
            }
            report.cp = Some(cp);
        }
    }
    report.wall_time_s = started.elapsed().as_secs_f64();
    report
}

/// Simulate, fit by EM, and summarise with percentile intervals of the estimates.
pub fn run_em_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    if cfg.method != Method::Em {
        return Err(Error::Config("run_em_study needs method = em".into()));
    }
    let init = cfg.em_init.unwrap_or_else(default_init);
    let started = Instant::now();
    let (reps, failures) = run_replications(cfg, |_, stream| {
        let data = sample_gbb(&cfg.truth, cfg.n, &mut stream.rng())?;
        let fit = fit_em_with(&data, &init, &cfg.em)?;
        Ok(fit.converged.then(|| Replicate {
            estimate: fit.params.to_array(),
            iterations: Some(fit.iterations),
            interval: None,
        }))
    })?;
    Ok(aggregate(cfg, &reps, failures, started))
}

/// Simulate, sample the posterior, and report average posterior means and coverage.
pub fn run_bayes_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    if cfg.method != Method::Bayes {
        return Err(Error::Config("run_bayes_study needs method = bayes".into()));
    }
    let init = cfg.bayes_init.unwrap_or_else(default_bayes_init);
    let bayes = BayesConfig {
        level: cfg.level,
        ..cfg.bayes
    };
    let started = Instant::now();
    let (reps, failures) = run_replications(cfg, |_, stream| {
        let data = sample_gbb(&cfg.truth, cfg.n, &mut stream.substream(0).rng())?;
        let fit = fit_bayes(&data, &init, &bayes, stream.substream(1))?;
        let s = fit.summary;
        let pick = |f: fn(&crate::bayes::ParamSummary) -> f64| Param::ALL.map(|p| f(s.get(p)));
        Ok(Some(Replicate {
            estimate: pick(|x| x.mean),
            iterations: None,
            interval: Some((pick(|x| x.low), pick(|x| x.high))),
        }))
    })?;
    Ok(aggregate(cfg, &reps, failures, started))
}

/// Dispatch on `cfg.method`.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport> {
    match cfg.method {
        Method::Em => run_em_study(cfg),
        Method::Bayes => run_bayes_study(cfg),
    }
}

/// Parametric bootstrap: `b` data sets of size `n` simulated at `fitted`, each refitted by EM.
pub fn bootstrap_from_fit(fitted: &ModelParams, n: usize, b: usize, seed: RngStream, base: &StudyConfig) -> Result<StudyReport> {
    run_em_study(&StudyConfig {
        truth: *fitted,
        n,
        replications: b,
        method: Method::Em,
        seed: Some(seed),
        ..base.clone()
    })
}

impl StudyReport {
    /// Aligned-column rendering for terminals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:?} study: n = {}, replications = {}, level = {}",
            self.method, self.n, self.replications, self.level
        );
        let _ = writeln!(
            out,
            "{:<8} {:>10} {:>10} {:>10} {:>10} {:>10} {:>8}",
            "param", "truth", "ae", "mse", "ci_low", "ci_high", "cp"
        );
        for p in Param::ALL {
            let k = p.index();
            let cp = self.cp.map(|c| format!("{:.3}", c[k])).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<8} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>8}",
                p.name(),
                self.truth[k],
                self.ae[k],
                self.mse[k],
                self.ci_low[k],
                self.ci_high[k],
                cp
            );
        }
        let _ = writeln!(out, "interval: {}", self.interval);
        if let Some(it) = self.avg_iterations {
            let _ = writeln!(out, "avg_iterations: {it:.1}");
        }
        let _ = writeln!(out, "failures: {}", self.failures);
        let _ = writeln!(out, "wall_time_s: {:.3}", self.wall_time_s);
        out
    }

    /// One CSV row per parameter.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,truth,ae,mse,ci_low,ci_high,cp,avg_iterations,failures,wall_time_s\n");
        for p in Param::ALL {
            let k = p.index();
            let cp = self.cp.map(|c| c[k].to_string()).unwrap_or_default();
            let it = self.avg_iterations.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                p.name(),
                self.truth[k],
                self.ae[k],
                self.mse[k],
                self.ci_low[k],
                self.ci_high[k],
                cp,
                it,
                self.failures,
                self.wall_time_s
            );
        }
        out
    }

    /// The same report with the timing zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_time_s: 0.0,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(method: Method, reps: usize) -> StudyConfig {
        StudyConfig {
            truth: ModelParams::new(0.5, 0.5, 1.0, 1.5).unwrap(),
            n: 200,
            replications: reps,
            method,
            seed: Some(RngStream::new(99)),
            jobs: 2,
            bayes: BayesConfig {
                total: 300,
                burn_in: 100,
                ..BayesConfig::default()
            },
            ..StudyConfig::default()
        }
    }

    #[test]
    fn single_replication_is_the_single_fit() {
        let cfg = small(Method::Em, 1);
        let r = run_em_study(&cfg).unwrap();
        let data = sample_gbb(&cfg.truth, cfg.n, &mut RngStream::new(99).substream(0).rng()).unwrap();
        let fit = fit_em_with(&data, &default_init(), &cfg.em).unwrap();
        let est = fit.params.to_array();
        assert_eq!(r.ae, est);
        assert_eq!(r.ci_low, est);
        assert_eq!(r.avg_iterations, Some(fit.iterations as f64));
        for k in 0..4 {
            assert_eq!(r.mse[k], (est[k] - r.truth[k]).powi(2));
        }
    }

    #[test]
    fn reports_are_deterministic_and_satisfy_bias_variance() {
        let cfg = small(Method::Em, 6);
        let a = run_em_study(&cfg).unwrap();
        let b = run_em_study(&StudyConfig { jobs: 1, ..cfg.clone() }).unwrap();
        assert_eq!(a.without_timing().ae, b.without_timing().ae);
        assert_eq!(a.mse, b.mse);
        for k in 0..4 {
            assert!(a.mse[k] >= (a.ae[k] - a.truth[k]).powi(2) - 1e-15);
            assert!(a.ci_low[k] <= a.ae[k] && a.ae[k] <= a.ci_high[k]);
        }
        assert!(a.to_text().contains("alpha1"));
        assert_eq!(a.to_csv().lines().count(), 5);
    }

    #[test]
    fn bayes_study_reports_coverage() {
        let r = run_bayes_study(&small(Method::Bayes, 2)).unwrap();
        let cp = r.cp.unwrap();
        assert!(cp.iter().all(|&c| (0.0..=1.0).contains(&c)));
        assert!(r.avg_iterations.is_none());
        let json = serde_json::to_value(&r).unwrap();
        for key in ["ae", "mse", "ci_low", "ci_high", "cp", "avg_iterations", "failures", "wall_time_s"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn too_many_failures_is_an_error() {
        let cfg = StudyConfig {
            em: EmConfig {
                tol: 1e-300,
                max_iter: 2,
                ..EmConfig::default()
            },
            ..small(Method::Em, 3)
        };
        assert!(matches!(run_em_study(&cfg), Err(Error::TooManyFailures { failed: 3, .. })));
        let lenient = StudyConfig { max_failure_rate: 1.0, ..cfg };
        assert!(run_em_study(&lenient).is_err(), "no successful replication leaves nothing to aggregate");
    }

    #[test]
    fn seed_is_mandatory() {
        let cfg = StudyConfig { seed: None, ..small(Method::Em, 1) };
        assert!(matches!(run_em_study(&cfg), Err(Error::Config(_))));
    }
}
