//! Replicated experiment over a budget grid. Writes regret_curve.csv and
//! summary.csv to the directory given as the first argument.
//!
//! ```text
//! cargo run --release --example regret_curve -- /tmp/curve
//! ```

use mixmatch::harness::{run_experiment, ExperimentConfig};
use mixmatch::problems::SuiteConfig;

fn main() -> mixmatch::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "regret-curve".into());
    let config = ExperimentConfig::from_toml(
        r#"
suite = "builtin:latent"
algorithms = ["mixmatch", "genie", "uniform"]
budgets = [20000, 50000, 200000]
replicas = 10
seed = 1
node_steps = 500
schedule = "practical:0.01"
"#,
    )?;
    let suite = SuiteConfig::resolve(&config.suite)?.build()?;
    let result = run_experiment(&config, &suite)?;
    std::fs::create_dir_all(&out).map_err(|e| mixmatch::Error::Io { path: out.clone().into(), source: e })?;
    result.write(&out)?;

    for r in &result.reports {
        let q = r.regret_quartiles().expect("all cells succeed");
        let m = r.model_regret_quartiles().expect("all cells succeed");
        println!(
            "{:<9} {:>7}  regret {:.4} [{:.4}, {:.4}]  model {:.5}  h {:?}",
            r.algorithm,
            r.lambda,
            q.median,
            q.q1,
            q.q3,
            m.median,
            r.median_height()
        );
    }
    println!("wrote {out}/regret_curve.csv and {out}/summary.csv");
    Ok(())
}
