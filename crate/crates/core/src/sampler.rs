//! Exact random-variate generation.
//!
//! The geometric-minimum construction is realised through the closed form of
//! the minimum: the componentwise minimum of `N` i.i.d. MOBVPA draws has the
//! same law as one MOBVPA draw with every shape multiplied by `N`, so each of
//! the three latent shocks is drawn once from `PA(II)(0, 1, N alpha_k)`.

use rand::Rng;

use crate::bivariate::BivariateSample;
use crate::dist::{LocationScale, ModelParams, Shapes};
use crate::error::Result;

/// Which latent shock produced a componentwise minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cause {
    /// the common shock `U0`
    Shared,
    /// the component's own shock (`U1` for the first coordinate, `U2` for the second)
    Own,
}

/// A draw with the provenance of each coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledDraw {
    pub pair: (f64, f64),
    pub cause1: Cause,
    pub cause2: Cause,
    /// geometric count `N` used for this draw (1 for plain MOBVPA)
    pub count: u64,
}

impl LabeledDraw {
    /// Both minima came from the same common shock, so the coordinates coincide.
    pub fn is_structural_tie(&self) -> bool {
        self.cause1 == Cause::Shared && self.cause2 == Cause::Shared
    }
}

/// `PA(II)(0, 1, alpha)` by inversion: `(1 - V)^(-1/alpha) - 1`.
pub fn sample_pareto2<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v: f64 = rng.random();
    pareto2_from_uniform(alpha, v)
}

/// Inverse survival of `PA(II)(0, 1, alpha)` at `1 - v`.
pub fn pareto2_from_uniform(alpha: f64, v: f64) -> f64 {
    // (1 - v)^(-1/alpha) - 1 = expm1(-ln(1 - v) / alpha)
    (-(-v).ln_1p() / alpha).exp_m1()
}

/// Geometric count on `{1, 2, ...}` with success probability `theta`, by inversion.
pub fn sample_geometric<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> u64 {
    if theta >= 1.0 {
        return 1;
    }
    let v: f64 = rng.random();
    let n = ((-v).ln_1p() / (-theta).ln_1p()).ceil();
    if n < 1.0 {
        1
    } else if n >= u64::MAX as f64 {
        u64::MAX
    } else {
        n as u64
    }
}

fn race<R: Rng + ?Sized>(shapes: &Shapes, count: u64, ls: &LocationScale, rng: &mut R) -> LabeledDraw {
    let n = count as f64;
    let u0 = sample_pareto2(n * shapes.alpha0, rng);
    let u1 = sample_pareto2(n * shapes.alpha1, rng);
    let u2 = sample_pareto2(n * shapes.alpha2, rng);
    let (x1, cause1) = if u0 < u1 { (u0, Cause::Shared) } else { (u1, Cause::Own) };
    let (x2, cause2) = if u0 < u2 { (u0, Cause::Shared) } else { (u2, Cause::Own) };
    LabeledDraw {
        pair: ls.unstandardize(x1, x2),
        cause1,
        cause2,
        count,
    }
}

/// MOBVPA draw: `X1 = min(U0, U1)`, `X2 = min(U0, U2)`.
pub fn sample_mobvpa<R: Rng + ?Sized>(shapes: &Shapes, ls: &LocationScale, rng: &mut R) -> LabeledDraw {
    race(shapes, 1, ls, rng)
}

/// G-MOBVPA draw: componentwise minima over `N ~ Geom(theta)` MOBVPA copies.
pub fn sample_gmo<R: Rng + ?Sized>(p: &ModelParams, rng: &mut R) -> LabeledDraw {
    let count = sample_geometric(p.theta, rng);
    race(&p.shapes(), count, &p.loc_scale, rng)
}

/// Pairs drawn from the absolutely continuous law plus the number of raw draws spent.
#[derive(Debug, Clone)]
pub struct GbbDraws {
    pub pairs: Vec<(f64, f64)>,
    pub raw_draws: u64,
}

/// Draw `n` pairs from G-BBBVPA by discarding structural ties of [`sample_gmo`].
pub fn sample_gbb_pairs<R: Rng + ?Sized>(p: &ModelParams, n: usize, rng: &mut R) -> GbbDraws {
    let mut pairs = Vec::with_capacity(n);
    let mut raw_draws = 0u64;
    while pairs.len() < n {
        let d = sample_gmo(p, rng);
        raw_draws += 1;
        if !d.is_structural_tie() {
            pairs.push(d.pair);
        }
    }
    GbbDraws { pairs, raw_draws }
}

/// Draw an off-diagonal sample of size `n` from G-BBBVPA.
pub fn sample_gbb<R: Rng + ?Sized>(p: &ModelParams, n: usize, rng: &mut R) -> Result<BivariateSample> {
    p.validate()?;
    let draws = sample_gbb_pairs(p, n.max(1), rng);
    BivariateSample::new(&draws.pairs, p.loc_scale)
}
