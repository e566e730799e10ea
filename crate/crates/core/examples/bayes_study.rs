//! Coverage of Bayesian credible intervals over a handful of replications.
//!
//! cargo run --release --example bayes_study -- [replications]

use gbbvpa::bayes::BayesConfig;
use gbbvpa::experiments::{run_bayes_study, Method, StudyConfig};
use gbbvpa::RngStream;

fn main() -> gbbvpa::Result<()> {
    let replications = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let cfg = StudyConfig {
        method: Method::Bayes,
        n: 450,
        replications,
        seed: Some(RngStream::new(2)),
        bayes: BayesConfig {
            total: 3000,
            burn_in: 500,
            ..BayesConfig::default()
        },
        ..StudyConfig::default()
    };
    print!("{}", run_bayes_study(&cfg)?.to_text());
    Ok(())
}
