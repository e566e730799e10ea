//! Draw from G-MOBVPA and G-BBBVPA, and compare against the closed forms.
//!
//! cargo run --release --example simulate

use gbbvpa::dist::{marginal_survival, Margin};
use gbbvpa::sampler::{sample_gbb, sample_gmo};
use gbbvpa::stats::{ks_critical_99, ks_distance};
use gbbvpa::{ModelParams, RngStream};

fn main() -> gbbvpa::Result<()> {
    let p = ModelParams::new(0.2, 0.1, 0.2, 0.4)?;
    let mut rng = RngStream::new(2024).rng();

    let n = 100_000;
    let ties = (0..n).filter(|_| sample_gmo(&p, &mut rng).is_structural_tie()).count();
    println!("tie fraction {:.4} (alpha0 / total = {:.4})", ties as f64 / n as f64, p.alpha0 / p.alpha_total());

    let sample = sample_gbb(&p, 20_000, &mut rng)?;
    println!("{} pairs: {} with y1 < y2, {} with y1 > y2", sample.len(), sample.m1(), sample.m2());
    for (name, margin, xs) in [
        ("y1", Margin::First, sample.first_components()),
        ("y2", Margin::Second, sample.second_components()),
    ] {
        let d = ks_distance(&xs, |y| 1.0 - marginal_survival(y, margin, &p).unwrap_or(f64::NAN));
        println!("KS distance of {name}: {d:.4} (99% critical value {:.4})", ks_critical_99(xs.len()));
    }
    Ok(())
}
