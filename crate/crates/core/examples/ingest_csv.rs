//! Generates a three-source CSV, splits it per source, and searches for the
//! training mixture that best matches the pooled validation rows.
//!
//! ```text
//! cargo run --release --example ingest_csv
//! ```

use mixmatch::harness::ingest::{self, IngestSpec};
use mixmatch::harness::{ingest_csv, RegretOracle};
use mixmatch::sgd::StepSchedule;
use mixmatch::treesearch::{mix_and_match, SearchConfig};

fn main() -> mixmatch::Result<()> {
    let dir = std::env::temp_dir().join("mixmatch-ingest-example");
    std::fs::create_dir_all(&dir).map_err(|e| mixmatch::Error::Io { path: dir.clone(), source: e })?;
    let data = dir.join("states.csv");
    ingest::write_fixture_csv(&data, &[("FL", 14605), ("CT", 2836), ("OH", 6664)], 5)?;

    let mut spec = IngestSpec::from_toml(
        r#"
path = "states.csv"
source_column = "source"
label_column = "y"
seed = 3

[[split]]
source = "FL"
train = 49.34
validate = 0.16
test = 0.5
discard = 50

[[split]]
source = "CT"
train = 50
validate = 7.5
test = 42.5
discard = 0

[[split]]
source = "OH"
train = 2.25
validate = 0.75
test = 2.25
discard = 94.75
"#,
    )?;
    spec.path = data;
    let ingested = ingest_csv(&spec)?;
    for c in &ingested.counts {
        println!("{}: {} rows -> {}/{}/{}/{}", c.source, c.total, c.train, c.validate, c.test, c.discard);
    }

    let suite = &ingested.suite;
    let result = mix_and_match(suite, &SearchConfig::new(suite, 50_000, 300, StepSchedule::practical(0.02)?, 9))?;
    let oracle = RegretOracle::new(suite)?;
    println!("best mixture by grid and polish: {}", oracle.argmin());
    println!("search picked {} at height {}", result.mixture, result.tree_height);
    println!("simple regret {:.5}", oracle.simple_regret(&result.mixture)?.value);
    Ok(())
}
