//! Traces SGD on the noisy scalar suite and prints the spread of the squared
//! distance to the optimum beside each term of the high-probability bound.
//!
//! ```text
//! cargo run --release --example sgd_concentration
//! ```

use mixmatch::harness::{self, ConcentrationSettings};
use mixmatch::problems::SuiteConfig;

fn main() -> mixmatch::Result<()> {
    let suite = SuiteConfig::noisy_scalar().build()?;
    let mut settings = ConcentrationSettings::new(100_000, 100_001.0, 100, 0, 3);
    settings.checkpoints = vec![0, 1000, 10_000, 100_000];
    let report = harness::verify_concentration(&suite, &settings)?;
    println!("E = {:.4e}, d0^2 = {}", report.e, report.d0sq);
    println!("{:>7} {:>10} {:>10} {:>10} {:>10} {:>10}", "t", "median", "p99", "G-term", "mart-term", "total");
    for c in &report.checkpoints {
        let b = c.bound.as_ref().expect("default E");
        println!(
            "{:>7} {:>10.4e} {:>10.4e} {:>10.4e} {:>10.4e} {:>10.4e}",
            c.t, c.median, c.p99, b.term_g, b.term_martingale, b.total
        );
    }

    // With a small E the same runs show the 1/t decay directly.
    settings.e_override = Some(8.0);
    settings.checkpoints = vec![1000, 3000, 10_000, 30_000, 100_000];
    let fast = harness::verify_concentration(&suite, &settings)?;
    println!("slope of median d_t^2 with E = 8: {:.3}", fast.median_slope(1000, 100_000).unwrap());
    Ok(())
}
