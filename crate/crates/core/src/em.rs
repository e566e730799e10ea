//! Modified EM estimation for G-BBBVPA.
//!
//! The observed sample is treated as the off-diagonal part of a singular
//! G-MOBVPA sample whose diagonal block was never seen. That block is replaced
//! by plug-in estimates: its size `m0~ = m a0 / (a1 + a2)`, its conditional
//! geometric mean `a0~`, and the conditional mean of `ln(1 + U0)`, written
//! `b0*`. Each iteration runs an E-step (latent geometric count and cause
//! probabilities) followed by a closed-form M-step.

use serde::{Deserialize, Serialize};

use crate::bivariate::BivariateSample;
use crate::dist::{loglik, mo_log_pieces_offdiag, ModelParams};
use crate::error::{Error, Result};

/// How the unseen diagonal block's excess enters the updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmVariant {
    /// Estimate `ln(1 + U0)` by `1 / (a0~ (a0 + a1 + a2))`. Valid for every parameter value.
    #[default]
    LogScale,
    /// Estimate `U0` by `1 / (a0~ (a0 + a1 + a2) - 1)` and plug in `ln(1 + U0~)`.
    /// Requires `a0~ (a0 + a1 + a2) > 1`; kept for comparison only.
    RawScale,
}

/// Denominator of the theta update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaUpdate {
    /// `(m0~ + m) / (m0~ a0~ + sum a_i)`: the imputed block contributes `m0~` counts of mean `a0~`.
    #[default]
    ImputedCount,
    /// `(m0~ + m) / (m0~ a0~ b0* + sum a_i)`, the literal printed form.
    AsPrinted,
}

/// Conditional mean `a0~` of the geometric count on the unseen diagonal block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalMean {
    /// `a0~ = 1 / theta`: a diagonal outcome carries no information about `N`, because the
    /// tie probability `a0 / (a0 + a1 + a2)` is the same for every count.
    #[default]
    Marginal,
    /// The fixed-point recursion `(1 + c) / (1 - c)`, `c = (1 - theta) exp(-1 / a0~_prev)`,
    /// i.e. the posterior mean at a single representative diagonal point.
    Recursion,
}

/// Quantity whose relative change drives the stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    #[default]
    PseudoLoglik,
    Loglik,
    /// largest relative change across the four parameters
    Params,
}

/// Controls for [`fit_em_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub variant: EmVariant,
    pub theta_update: ThetaUpdate,
    pub diagonal_mean: DiagonalMean,
    pub stop_rule: StopRule,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 5000,
            variant: EmVariant::LogScale,
            theta_update: ThetaUpdate::ImputedCount,
            diagonal_mean: DiagonalMean::Marginal,
            stop_rule: StopRule::PseudoLoglik,
        }
    }
}

/// Starting point used when the caller supplies none.
pub fn default_init() -> ModelParams {
    ModelParams::new(0.5, 1.0, 1.0, 1.0).expect("valid constant")
}

/// E-step output.
#[derive(Debug, Clone, PartialEq)]
pub struct EStepQuantities {
    /// `a_i = E[N | y_i]` for every observation, in sample order.
    pub a: Vec<f64>,
    pub a0_tilde: f64,
    /// Estimated `ln(1 + U0)` for the imputed diagonal block.
    pub b0_star: f64,
    pub m0_tilde: f64,
    pub u1: f64,
    pub u2: f64,
    pub w1: f64,
    pub w2: f64,
}

impl EStepQuantities {
    /// `m* = m0~ + m1 + m2`
    pub fn m_star(&self) -> f64 {
        self.m0_tilde + self.a.len() as f64
    }
}

/// Posterior mean of the geometric count for an off-diagonal point.
///
/// With `q = (1 - theta) S(y)` the posterior is `P(N = n | y) ∝ n² q^(n-1)`,
/// whose mean is `(1 + 4q + q²) / ((1 + q)(1 - q))`.
pub fn cond_mean_n_ac(q: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::Domain(format!("q must lie in [0, 1), got {q}")));
    }
    Ok((1.0 + q * (4.0 + q)) / ((1.0 + q) * (1.0 - q)))
}

/// Next value of `a0~`: `(1 + c) / (1 - c)` with `c = (1 - theta) exp(-1 / a0~_prev)`.
pub fn update_a0_tilde(theta: f64, prev: f64) -> Result<f64> {
    if !(prev >= 1.0) {
        return Err(Error::Domain(format!("previous a0~ must be >= 1, got {prev}")));
    }
    let c = (1.0 - theta) * (-1.0 / prev).exp();
    if c >= 1.0 {
        return Err(Error::NumericRange(format!("a0~ update ratio {c} >= 1")));
    }
    Ok((1.0 + c) / (1.0 - c))
}

/// E-step at the current iterate `p`, given the previous `a0~`.
pub fn estep(data: &BivariateSample, p: &ModelParams, prev_a0_tilde: f64) -> Result<EStepQuantities> {
    estep_with(data, p, prev_a0_tilde, EmVariant::LogScale, DiagonalMean::Marginal)
}

pub fn estep_with(
    data: &BivariateSample,
    p: &ModelParams,
    prev_a0_tilde: f64,
    variant: EmVariant,
    diagonal_mean: DiagonalMean,
) -> Result<EStepQuantities> {
    p.validate()?;
    let shapes = p.shapes();
    let one_minus_theta = 1.0 - p.theta;
    let a = data
        .observations()
        .iter()
        .map(|o| {
            let pieces = mo_log_pieces_offdiag(&shapes, o.region, o.log1p_x1, o.log1p_x2);
            let q = one_minus_theta * pieces.log_survival.exp();
            if q >= 1.0 {
                return Err(Error::NumericRange(format!("(1 - theta) S = {q} >= 1")));
            }
            cond_mean_n_ac(q)
        })
        .collect::<Result<Vec<_>>>()?;

    let a0_tilde = match diagonal_mean {
        DiagonalMean::Marginal => 1.0 / p.theta,
        DiagonalMean::Recursion => update_a0_tilde(p.theta, prev_a0_tilde)?,
    };
    let scaled_total = a0_tilde * shapes.total();
    let b0_star = match variant {
        EmVariant::LogScale => 1.0 / scaled_total,
        EmVariant::RawScale => {
            if scaled_total <= 1.0 {
                return Err(Error::NumericRange(format!(
                    "raw-scale diagonal estimate needs a0~ (a0 + a1 + a2) > 1, got {scaled_total}"
                )));
            }
            (1.0 / (scaled_total - 1.0)).ln_1p()
        }
    };
    let m = data.len() as f64;
    Ok(EStepQuantities {
        a,
        a0_tilde,
        b0_star,
        m0_tilde: m * p.alpha0 / (p.alpha1 + p.alpha2),
        u1: p.alpha0 / (p.alpha0 + p.alpha2),
        u2: p.alpha2 / (p.alpha0 + p.alpha2),
        w1: p.alpha0 / (p.alpha0 + p.alpha1),
        w2: p.alpha1 / (p.alpha0 + p.alpha1),
    })
}

/// Weighted exposure sums `sum a_i ln(1 + y_ki)` split by region.
#[derive(Debug, Clone, Copy, Default)]
struct Exposures {
    below_x1: f64,
    below_x2: f64,
    above_x1: f64,
    above_x2: f64,
    sum_a: f64,
}

impl Exposures {
    fn collect(data: &BivariateSample, a: &[f64]) -> Self {
        let mut e = Exposures::default();
        for &i in data.below() {
            let o = &data.observations()[i];
            e.below_x1 += a[i] * o.log1p_x1;
            e.below_x2 += a[i] * o.log1p_x2;
        }
        for &i in data.above() {
            let o = &data.observations()[i];
            e.above_x1 += a[i] * o.log1p_x1;
            e.above_x2 += a[i] * o.log1p_x2;
        }
        e.sum_a = a.iter().sum();
        e
    }
}

fn ratio(name: &str, num: f64, den: f64) -> Result<f64> {
    if !(den > 0.0) || !den.is_finite() {
        return Err(Error::NumericRange(format!("{name} update has denominator {den}")));
    }
    let v = num / den;
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::NumericRange(format!("{name} update gives {v}")));
    }
    Ok(v)
}

/// Closed-form M-step. Theta is clamped to 1 when the raw update exceeds it.
pub fn mstep(e: &EStepQuantities, data: &BivariateSample) -> Result<ModelParams> {
    mstep_with(e, data, ThetaUpdate::ImputedCount)
}

pub fn mstep_with(e: &EStepQuantities, data: &BivariateSample, theta_update: ThetaUpdate) -> Result<ModelParams> {
    if e.a.len() != data.len() {
        return Err(Error::Domain("E-step quantities do not match the sample".into()));
    }
    let ex = Exposures::collect(data, &e.a);
    let (m1, m2) = (data.m1() as f64, data.m2() as f64);
    let block = e.m0_tilde * e.a0_tilde * e.b0_star;

    let alpha0 = ratio(
        "alpha0",
        e.m0_tilde + e.u1 * m1 + e.w1 * m2,
        block + ex.below_x2 + ex.above_x1,
    )?;
    let alpha1 = ratio("alpha1", m1 + e.w2 * m2, block + ex.below_x1 + ex.above_x1)?;
    let alpha2 = ratio("alpha2", m2 + e.u2 * m1, block + ex.below_x2 + ex.above_x2)?;
    let theta_den = match theta_update {
        ThetaUpdate::ImputedCount => e.m0_tilde * e.a0_tilde + ex.sum_a,
        ThetaUpdate::AsPrinted => block + ex.sum_a,
    };
    let theta = ratio("theta", e.m_star(), theta_den)?.min(1.0);
    ModelParams::with_loc_scale(theta, alpha0, alpha1, alpha2, data.loc_scale())
}

/// Pseudo log-likelihood `Q` of the completed data, with the diagonal block's sums
/// replaced by `m0~` copies of `a0~` and `b0*`.
///
/// At `theta = 1` the theta terms are taken in their limit form and contribute 0.
pub fn pseudo_loglik(data: &BivariateSample, p: &ModelParams, e: &EStepQuantities) -> Result<f64> {
    p.validate()?;
    if e.a.len() != data.len() {
        return Err(Error::Domain("E-step quantities do not match the sample".into()));
    }
    let (m1, m2) = (data.m1() as f64, data.m2() as f64);
    let m0 = e.m0_tilde;
    if e.a0_tilde <= 0.0 || e.a.iter().any(|&a| a <= 0.0) {
        return Err(Error::NumericRange("log of nonpositive conditional mean".into()));
    }
    let ex = Exposures::collect(data, &e.a);
    let log_a: f64 = e.a.iter().map(|a| a.ln()).sum();
    let raw_exposure: f64 = data
        .observations()
        .iter()
        .map(|o| o.log1p_x1 + o.log1p_x2)
        .sum();
    let block = m0 * e.a0_tilde * e.b0_star;

    let mut q = m0 * e.a0_tilde.ln() + 2.0 * log_a;
    q += (m0 + e.u1 * m1 + e.w1 * m2) * p.alpha0.ln();
    q += (m1 + e.w2 * m2) * p.alpha1.ln();
    q += (e.u2 * m1 + m2) * p.alpha2.ln();
    q -= m0 * e.b0_star + raw_exposure;
    q -= p.alpha0 * (block + ex.below_x2 + ex.above_x1);
    q -= p.alpha1 * (block + ex.below_x1 + ex.above_x1);
    q -= p.alpha2 * (block + ex.below_x2 + ex.above_x2);
    if p.theta < 1.0 {
        let m_star = e.m_star();
        let total_a = m0 * e.a0_tilde + ex.sum_a;
        q += m_star * (p.theta / (1.0 - p.theta)).ln() + (1.0 - p.theta).ln() * total_a;
    }
    if !q.is_finite() {
        return Err(Error::NumericRange(format!("pseudo log-likelihood is {q}")));
    }
    Ok(q)
}

/// Pseudo and observed log-likelihood after one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub q: f64,
    pub loglik: f64,
}

/// Result of [`fit_em`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmFit {
    pub params: ModelParams,
    pub iterations: usize,
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
}

impl EmFit {
    /// Fraction of consecutive iterations over which `Q` did not decrease.
    pub fn q_ascent_fraction(&self) -> f64 {
        if self.trace.len() < 2 {
            return 1.0;
        }
        let ups = self.trace.windows(2).filter(|w| w[1].q >= w[0].q).count();
        ups as f64 / (self.trace.len() - 1) as f64
    }
}

/// Run the modified EM from `init` with stopping rule `|dQ / Q| < tol`.
pub fn fit_em(data: &BivariateSample, init: &ModelParams, tol: f64, max_iter: usize) -> Result<EmFit> {
    fit_em_with(
        data,
        init,
        &EmConfig {
            tol,
            max_iter,
            ..EmConfig::default()
        },
    )
}

pub fn fit_em_with(data: &BivariateSample, init: &ModelParams, cfg: &EmConfig) -> Result<EmFit> {
    if !(cfg.tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {}", cfg.tol)));
    }
    if cfg.max_iter == 0 {
        return Err(Error::Config("max_iter must be at least 1".into()));
    }
    init.validate()?;
    let mut params = ModelParams {
        loc_scale: data.loc_scale(),
        ..*init
    };
    let mut a0_tilde = 1.0;
    let mut trace = Vec::new();
    let mut prev_q: Option<f64> = None;
    let mut converged = false;

    for _ in 0..cfg.max_iter {
        let e = estep_with(data, &params, a0_tilde, cfg.variant, cfg.diagonal_mean)?;
        let next = mstep_with(&e, data, cfg.theta_update)?;
        let entry = TraceEntry {
            q: pseudo_loglik(data, &next, &e)?,
            loglik: loglik(data, &next)?,
        };
        trace.push(entry);
        let step = params
            .to_array()
            .iter()
            .zip(next.to_array())
            .map(|(old, new)| ((new - old) / new).abs())
            .fold(0.0, f64::max);
        params = next;
        a0_tilde = e.a0_tilde;
        if cfg.stop_rule == StopRule::Params {
            if step < cfg.tol {
                converged = true;
                break;
            }
            continue;
        }
        let q = match cfg.stop_rule {
            StopRule::Loglik => entry.loglik,
            _ => entry.q,
        };
        if let Some(pq) = prev_q {
            if ((q - pq) / q).abs() < cfg.tol {
                converged = true;
                break;
            }
        }
        prev_q = Some(q);
    }
    Ok(EmFit {
        params,
        iterations: trace.len(),
        trace,
        converged,
    })
}
