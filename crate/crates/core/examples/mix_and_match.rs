//! Runs the tree search on the latent-feature suite and prints the audit
//! log's deepest evaluations and the chosen mixture.
//!
//! ```text
//! cargo run --release --example mix_and_match
//! ```

use mixmatch::harness::RegretOracle;
use mixmatch::problems::SuiteConfig;
use mixmatch::sgd::StepSchedule;
use mixmatch::treesearch::{mix_and_match, SearchConfig};

fn main() -> mixmatch::Result<()> {
    let suite = SuiteConfig::latent_quadratic().build()?;
    let config = SearchConfig::new(&suite, 100_000, 500, StepSchedule::practical(0.01)?, 42);
    let result = mix_and_match(&suite, &config)?;

    println!(
        "{} expansions, {} nodes, height {}, {} steps",
        result.expansions,
        result.node_count(),
        result.tree_height,
        result.total_steps
    );
    for a in result.audit.iter().filter(|a| a.height == result.tree_height).take(8) {
        println!("  h={} i={} alpha={} val_loss={:.5}", a.height, a.index, a.alpha, a.val_loss);
    }

    let oracle = RegretOracle::new(&suite)?;
    println!("chosen mixture {}", result.mixture);
    println!("true mixture   {}", suite.alpha_star().expect("synthetic suite"));
    println!("simple regret  {:.5}", oracle.simple_regret(&result.mixture)?.value);
    println!("model regret   {:.5}", oracle.model_regret(result.model.weights())?.value);
    Ok(())
}
