use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mixmatch::baselines::{self, BaselineKind};
use mixmatch::harness::{self, experiment, output, ConcentrationSettings, ExperimentConfig, IngestSpec, RegretOracle};
use mixmatch::problems::{ProblemSuite, SuiteConfig};
use mixmatch::sgd::ScheduleSpec;
use mixmatch::treesearch::{self, SearchConfig};
use mixmatch::{Error, PartitionStrategy};

/// Tree search over training-source mixtures, baselines, and checks.
#[derive(Parser)]
#[command(name = "mixmatch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SuiteArgs {
    /// Suite TOML file or `builtin:<name>`.
    #[arg(long)]
    suite: String,
    /// Overrides the suite file's seed.
    #[arg(long)]
    suite_seed: Option<u64>,
}

impl SuiteArgs {
    fn build(&self) -> Result<ProblemSuite, Error> {
        let config = SuiteConfig::resolve(&self.suite)?;
        ProblemSuite::synthetic(&config, self.suite_seed.unwrap_or(config.seed))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the tree search; writes search.csv, result.csv, suite-manifest.csv.
    Run {
        #[command(flatten)]
        suite: SuiteArgs,
        #[arg(long)]
        budget: u64,
        #[arg(long, default_value_t = 500)]
        node_steps: u64,
        #[arg(long, default_value = "bisect")]
        strategy: String,
        #[arg(long, default_value = "practical:0.01")]
        schedule: String,
        /// `deepest` or `leaves`.
        #[arg(long, default_value = "deepest")]
        final_pool: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a fixed policy; writes result.csv and suite-manifest.csv.
    Baseline {
        /// genie, uniform, validation, or only:<i>.
        #[arg(long)]
        kind: String,
        #[command(flatten)]
        suite: SuiteArgs,
        #[arg(long)]
        budget: u64,
        #[arg(long, default_value = "practical:0.01")]
        schedule: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare SGD distance quantiles with the concentration bound; writes concentration.csv.
    VerifySgd {
        #[command(flatten)]
        suite: SuiteArgs,
        /// Steps per run `T`.
        #[arg(long)]
        t: u64,
        /// Budget `Λ`; defaults to `T + 1`.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 100)]
        replicas: usize,
        #[arg(long, default_value_t = 0)]
        k: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the smoothness inequalities on random pairs; writes smoothness.csv.
    VerifySmoothness {
        #[command(flatten)]
        suite: SuiteArgs,
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Enumerate partition cells; writes partition.csv.
    PartitionDemo {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        height: u32,
        #[arg(long, default_value = "bisect")]
        strategy: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a CSV by source; writes splits.csv and suite-manifest.csv.
    IngestCheck {
        /// Ingest spec TOML.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replicated runs over a budget grid; writes regret_curve.csv, summary.csv, failures.csv.
    Experiment {
        /// Experiment TOML.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Succeeded, or completed with a failed check.
enum Status {
    Ok,
    Violation(String),
}

fn prepare(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.into(),
        source: e,
    })
}

fn regret_if_known(suite: &ProblemSuite, mixture: Option<&mixmatch::MixtureWeights>) -> Result<Option<f64>, Error> {
    match mixture {
        Some(a) if suite.loss().is_quadratic() => Ok(Some(RegretOracle::new(suite)?.simple_regret(a)?.value)),
        _ => Ok(None),
    }
}

fn execute(command: Command) -> Result<Status, Error> {
    match command {
        Command::Run {
            suite,
            budget,
            node_steps,
            strategy,
            schedule,
            final_pool,
            seed,
            out,
        } => {
            let suite = suite.build()?;
            let schedule = ScheduleSpec::parse(&schedule)?.resolve(suite.constants(), budget as f64)?;
            let mut config = SearchConfig::new(&suite, budget, node_steps, schedule, seed);
            config.strategy = PartitionStrategy::parse(&strategy, seed)?;
            config.final_pool = experiment::parse_final_pool(&final_pool)?;
            let result = treesearch::mix_and_match(&suite, &config)?;
            let regret = regret_if_known(&suite, Some(&result.mixture))?;
            prepare(&out)?;
            output::search_table(&result).write(out.join("search.csv"))?;
            let outcome = baselines::RunOutcome::from_search("mixmatch", &result);
            output::result_table(&outcome, regret).write(out.join("result.csv"))?;
            output::suite_manifest(&suite).write(out.join("suite-manifest.csv"))?;
            Ok(Status::Ok)
        }
        Command::Baseline {
            kind,
            suite,
            budget,
            schedule,
            seed,
            out,
        } => {
            let kind = BaselineKind::parse(&kind)?;
            let suite = suite.build()?;
            let schedule = ScheduleSpec::parse(&schedule)?.resolve(suite.constants(), budget as f64)?;
            let outcome = baselines::run_baseline(kind, &suite, budget, &schedule, seed)?;
            let regret = regret_if_known(&suite, outcome.mixture.as_ref())?;
            prepare(&out)?;
            output::result_table(&outcome, regret).write(out.join("result.csv"))?;
            output::suite_manifest(&suite).write(out.join("suite-manifest.csv"))?;
            Ok(Status::Ok)
        }
        Command::VerifySgd {
            suite,
            t,
            lambda,
            replicas,
            k,
            seed,
            out,
        } => {
            let suite = suite.build()?;
            let settings = ConcentrationSettings::new(t, lambda.unwrap_or(t as f64 + 1.0), replicas, k, seed);
            let report = harness::verify_concentration(&suite, &settings)?;
            prepare(&out)?;
            report.table().write(out.join("concentration.csv"))?;
            if report.passed() {
                Ok(Status::Ok)
            } else {
                Ok(Status::Violation("empirical distances exceed the concentration bound".into()))
            }
        }
        Command::VerifySmoothness { suite, pairs, seed, out } => {
            let suite = suite.build()?;
            let report = harness::verify_smoothness(&suite, pairs, seed)?;
            prepare(&out)?;
            report.table().write(out.join("smoothness.csv"))?;
            if report.passed() {
                Ok(Status::Ok)
            } else {
                Ok(Status::Violation(format!(
                    "{} model and {} value violations",
                    report.model_violations, report.value_violations
                )))
            }
        }
        Command::PartitionDemo {
            k,
            height,
            strategy,
            seed,
            out,
        } => {
            let strategy = PartitionStrategy::parse(&strategy, seed)?;
            let table = output::partition_table(k, height, &strategy)?;
            prepare(&out)?;
            table.write(out.join("partition.csv"))?;
            let over = table
                .rows
                .iter()
                .filter(|r| !r[3].is_empty() && r[2].parse::<f64>().ok() > r[3].parse::<f64>().ok())
                .count();
            if over == 0 || strategy != PartitionStrategy::LongestEdgeBisection {
                Ok(Status::Ok)
            } else {
                Ok(Status::Violation(format!("{over} cells exceed the diameter bound")))
            }
        }
        Command::IngestCheck { spec, out } => {
            let spec = IngestSpec::load(&spec)?;
            let ingested = harness::ingest_csv(&spec)?;
            let mut table = output::CsvTable::new(&["source", "total", "train", "validate", "test", "discard"]);
            for c in &ingested.counts {
                table.push(vec![
                    c.source.clone(),
                    c.total.to_string(),
                    c.train.to_string(),
                    c.validate.to_string(),
                    c.test.to_string(),
                    c.discard.to_string(),
                ]);
            }
            prepare(&out)?;
            table.write(out.join("splits.csv"))?;
            output::suite_manifest(&ingested.suite).write(out.join("suite-manifest.csv"))?;
            Ok(Status::Ok)
        }
        Command::Experiment { config, out } => {
            let config = ExperimentConfig::load(&config)?;
            let suite = SuiteConfig::resolve(&config.suite)?.build()?;
            let result = harness::run_experiment(&config, &suite)?;
            prepare(&out)?;
            result.write(&out)?;
            Ok(Status::Ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Violation(message)) => {
            eprintln!("check failed: {message}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
