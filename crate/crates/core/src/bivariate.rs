//! Off-diagonal bivariate samples partitioned by region.

use crate::dist::{standardize, LocationScale, RegionTag};
use crate::error::{Error, Result};

/// One observation with its cached log-excesses `ln(1 + x)` on the standardized scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub y1: f64,
    pub y2: f64,
    pub log1p_x1: f64,
    pub log1p_x2: f64,
    pub region: RegionTag,
}

/// An ordered sample of pairs with no equal standardized components.
///
/// `below` holds indices with `y1 < y2`, `above` those with `y1 > y2`.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariateSample {
    obs: Vec<Observation>,
    below: Vec<usize>,
    above: Vec<usize>,
    loc_scale: LocationScale,
}

impl BivariateSample {
    /// Partition raw pairs; the first diagonal or out-of-support pair is an error.
    pub fn new(pairs: &[(f64, f64)], ls: LocationScale) -> Result<Self> {
        partition(pairs, ls)
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.obs
    }

    pub fn below(&self) -> &[usize] {
        &self.below
    }

    pub fn above(&self) -> &[usize] {
        &self.above
    }

    /// `m1 = |I1|`
    pub fn m1(&self) -> usize {
        self.below.len()
    }

    /// `m2 = |I2|`
    pub fn m2(&self) -> usize {
        self.above.len()
    }

    pub fn loc_scale(&self) -> LocationScale {
        self.loc_scale
    }

    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.obs.iter().map(|o| (o.y1, o.y2)).collect()
    }

    pub fn first_components(&self) -> Vec<f64> {
        self.obs.iter().map(|o| o.y1).collect()
    }

    pub fn second_components(&self) -> Vec<f64> {
        self.obs.iter().map(|o| o.y2).collect()
    }
}

/// Build the index sets `I1 = {y1 < y2}` and `I2 = {y1 > y2}`.
pub fn partition(pairs: &[(f64, f64)], ls: LocationScale) -> Result<BivariateSample> {
    ls.validate()?;
    if pairs.is_empty() {
        return Err(Error::Domain("sample must be nonempty".into()));
    }
    let mut obs = Vec::with_capacity(pairs.len());
    let mut below = Vec::new();
    let mut above = Vec::new();
    for (i, &(y1, y2)) in pairs.iter().enumerate() {
        let s = standardize((y1, y2), &ls);
        if !(s.x1 >= 0.0 && s.x2 >= 0.0) || !s.x1.is_finite() || !s.x2.is_finite() {
            return Err(Error::Domain(format!(
                "observation {i} = ({y1}, {y2}) lies outside the support"
            )));
        }
        match s.region {
            RegionTag::Below => below.push(i),
            RegionTag::Above => above.push(i),
            RegionTag::Diagonal => return Err(Error::DiagonalInput { index: i }),
        }
        obs.push(Observation {
            y1,
            y2,
            log1p_x1: s.x1.ln_1p(),
            log1p_x2: s.x2.ln_1p(),
            region: s.region,
        });
    }
    Ok(BivariateSample {
        obs,
        below,
        above,
        loc_scale: ls,
    })
}
