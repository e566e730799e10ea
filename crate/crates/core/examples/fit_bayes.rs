//! Posterior means and credible intervals from the slice-within-Gibbs sampler.
//!
//! cargo run --release --example fit_bayes

use gbbvpa::bayes::{default_bayes_init, fit_bayes, BayesConfig};
use gbbvpa::sampler::sample_gbb;
use gbbvpa::{ModelParams, Param, RngStream};

fn main() -> gbbvpa::Result<()> {
    let truth = ModelParams::new(0.2, 0.1, 0.2, 0.4)?;
    let data = sample_gbb(&truth, 1000, &mut RngStream::new(12).rng())?;
    let fit = fit_bayes(&data, &default_bayes_init(), &BayesConfig::default(), RngStream::new(13))?;
    println!("{} post-burn-in draws, {} exhausted slice updates", fit.chain.len(), fit.chain.shrink_exhausted);
    for p in Param::ALL {
        let s = fit.summary.get(p);
        println!(
            "{:<7} truth {:.4}  mean {:.4}  95% [{:.4}, {:.4}]",
            p.name(),
            truth.get(p),
            s.mean,
            s.low,
            s.high
        );
    }
    Ok(())
}
