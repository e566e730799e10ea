//! Closed-form densities next to the geometric-mixture series they sum.
//!
//! cargo run --release --example evaluate_density

use gbbvpa::dist::{mixture_pdf_oracle, pdf_gbb, pdf_gmo, survival_geo};
use gbbvpa::{LocationScale, ModelParams};

fn main() -> gbbvpa::Result<()> {
    let p = ModelParams::new(0.5, 1.0, 1.0, 1.0)?;
    println!("{:>6} {:>6} {:>14} {:>14} {:>14} {:>10}", "y1", "y2", "pdf_gmo", "series", "pdf_gbb", "survival");
    for y in [(0.3, 0.7), (1.5, 0.2), (2.0, 2.0), (5.0, 9.0)] {
        let closed = pdf_gmo(y, &p)?;
        let series = mixture_pdf_oracle(y, &p, 1e-14)?;
        let ac = if y.0 == y.1 { f64::NAN } else { pdf_gbb(y, &p)? };
        println!(
            "{:>6} {:>6} {:>14.8e} {:>14.8e} {:>14.8e} {:>10.6}{}",
            y.0,
            y.1,
            closed.value(),
            series.value(),
            ac,
            survival_geo(y, &p)?,
            if closed.is_singular() { "  (singular part)" } else { "" }
        );
    }

    // location and scale act through the affine map (y - mu) / sigma
    let shifted = ModelParams::with_loc_scale(0.5, 1.0, 1.0, 1.0, LocationScale::new(1.0, 2.0, 2.0, 0.5)?)?;
    println!("shifted pdf at (1.6, 2.35) = {:.8e}", pdf_gbb((1.6, 2.35), &shifted)?);
    Ok(())
}
