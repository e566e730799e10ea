//! Fit once, then judge the fit by a parametric bootstrap at the estimate.
//!
//! cargo run --release --example bootstrap

use gbbvpa::em::{default_init, fit_em_with, EmConfig};
use gbbvpa::experiments::{bootstrap_from_fit, StudyConfig};
use gbbvpa::sampler::sample_gbb;
use gbbvpa::{ModelParams, RngStream};

fn main() -> gbbvpa::Result<()> {
    let data = sample_gbb(&ModelParams::new(0.6, 1.0, 1.5, 2.0)?, 400, &mut RngStream::new(3).rng())?;
    let fit = fit_em_with(&data, &default_init(), &EmConfig::default())?;
    println!("point estimate {:?}", fit.params.to_array());
    let report = bootstrap_from_fit(&fit.params, data.len(), 50, RngStream::new(4), &StudyConfig::default())?;
    print!("{}", report.to_text());
    Ok(())
}
