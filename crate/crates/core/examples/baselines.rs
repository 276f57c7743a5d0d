//! Trains every fixed policy with the same budget and compares their test
//! loss gaps with the tree search.
//!
//! ```text
//! cargo run --release --example baselines
//! ```

use mixmatch::baselines::{run_baseline, BaselineKind, RunOutcome};
use mixmatch::harness::RegretOracle;
use mixmatch::problems::SuiteConfig;
use mixmatch::sgd::StepSchedule;
use mixmatch::treesearch::{mix_and_match, SearchConfig};

fn main() -> mixmatch::Result<()> {
    let suite = SuiteConfig::latent_quadratic().build()?;
    let oracle = RegretOracle::new(&suite)?;
    let schedule = StepSchedule::practical(0.01)?;
    let budget = 100_000;

    let search = mix_and_match(&suite, &SearchConfig::new(&suite, budget, 500, schedule, 1))?;
    let mut runs = vec![RunOutcome::from_search("mixmatch", &search)];
    for kind in ["genie", "uniform", "validation", "only:1", "only:2", "only:3"] {
        runs.push(run_baseline(BaselineKind::parse(kind)?, &suite, budget, &schedule, 1)?);
    }

    println!("{:<11} {:<40} {:>12} {:>12}", "policy", "mixture", "simple", "model");
    for r in &runs {
        let simple = match &r.mixture {
            Some(a) => format!("{:.5}", oracle.simple_regret(a)?.value),
            None => "-".into(),
        };
        let mixture = r.mixture.as_ref().map(|m| m.to_string()).unwrap_or_else(|| "validation".into());
        println!(
            "{:<11} {:<40} {:>12} {:>12.5}",
            r.label,
            mixture,
            simple,
            oracle.model_regret(r.model.weights())?.value
        );
    }
    Ok(())
}
