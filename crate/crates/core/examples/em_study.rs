//! A small replicated EM study.
//!
//! cargo run --release --example em_study -- [replications]

use gbbvpa::experiments::{run_em_study, StudyConfig};
use gbbvpa::RngStream;

fn main() -> gbbvpa::Result<()> {
    let replications = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let cfg = StudyConfig {
        replications,
        seed: Some(RngStream::new(1)),
        ..StudyConfig::default()
    };
    print!("{}", run_em_study(&cfg)?.to_text());
    Ok(())
}
