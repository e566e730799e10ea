//! Simulate a sample and recover the parameters with the modified EM algorithm.
//!
//! cargo run --release --example fit_em

use gbbvpa::dist::loglik;
use gbbvpa::em::{default_init, fit_em_with, EmConfig};
use gbbvpa::sampler::sample_gbb;
use gbbvpa::{ModelParams, RngStream};

fn main() -> gbbvpa::Result<()> {
    let truth = ModelParams::new(0.8, 4.0, 5.0, 10.0)?;
    let data = sample_gbb(&truth, 1000, &mut RngStream::new(5).rng())?;
    let fit = fit_em_with(&data, &default_init(), &EmConfig::default())?;
    let p = fit.params;
    println!("truth     {:?}", truth.to_array());
    println!("estimate  [{:.4}, {:.4}, {:.4}, {:.4}]", p.theta, p.alpha0, p.alpha1, p.alpha2);
    println!("iterations {} converged {}", fit.iterations, fit.converged);
    println!("loglik at estimate {:.3}, at truth {:.3}", loglik(&data, &p)?, loglik(&data, &truth)?);
    for (i, t) in fit.trace.iter().enumerate().step_by((fit.trace.len() / 8).max(1)) {
        println!("  iter {:>4}: Q = {:.4}, loglik = {:.4}", i + 1, t.q, t.loglik);
    }
    Ok(())
}
