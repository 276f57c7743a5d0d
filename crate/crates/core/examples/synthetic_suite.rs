//! Builds the latent-feature suite, prints its constants, and compares the
//! closed-form optimum of a few mixtures with a Monte Carlo estimate.
//!
//! ```text
//! cargo run --release --example synthetic_suite
//! ```

use mixmatch::problems::SuiteConfig;
use mixmatch::{rng, MixtureWeights};

fn main() -> mixmatch::Result<()> {
    let config = SuiteConfig::latent_quadratic();
    println!("{}", config.to_toml());
    let suite = config.build()?;
    for (name, value) in suite.constants().entries() {
        println!("{name:>6} = {value:.6}");
    }

    let mut stream = rng::stream(1);
    for alpha in [MixtureWeights::uniform(3)?, MixtureWeights::new(&[0.3, 0.5, 0.2])?, MixtureWeights::vertex(3, 0)?] {
        let exact = suite.mixture_mean(&alpha)?;
        let n = 100_000;
        let mut mc = vec![0.0; exact.len()];
        for _ in 0..n {
            let z = suite.draw_sample(&alpha, &mut stream)?;
            // Features then label: the quadratic embedding of this suite.
            for (m, v) in mc.iter_mut().zip(z.x.iter().chain(std::iter::once(&z.y))) {
                *m += v / n as f64;
            }
        }
        println!("alpha {alpha}: w* = {exact:.4?}, sample mean = {mc:.4?}");
    }
    Ok(())
}
