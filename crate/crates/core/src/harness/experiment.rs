//! Replicated runs of several algorithms over a budget grid.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::output::{self, CsvTable};
use super::regret::{RegretOracle, RegretReport};
use crate::baselines::{self, BaselineKind, RunOutcome};
use crate::error::{Error, Result};
use crate::problems::ProblemSuite;
use crate::rng;
use crate::sgd::ScheduleSpec;
use crate::simplex::PartitionStrategy;
use crate::treesearch::{self, FinalPool, SearchConfig};

/// Header of `regret_curve.csv`.
pub const CURVE_HEADER: [&str; 6] = ["algorithm", "lambda", "seed", "regret", "h_final", "total_steps"];
/// Header of `summary.csv`.
pub const SUMMARY_HEADER: [&str; 11] = [
    "algorithm",
    "lambda",
    "replicas",
    "failed",
    "regret_q1",
    "regret_median",
    "regret_q3",
    "model_regret_q1",
    "model_regret_median",
    "model_regret_q3",
    "h_median",
];

/// A training policy the runner can compare.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    MixAndMatch,
    Baseline(BaselineKind),
}

impl Algorithm {
    /// `mixmatch`, or any baseline name accepted by [`BaselineKind::parse`].
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "mixmatch" | "mix-and-match" => Ok(Algorithm::MixAndMatch),
            other => BaselineKind::parse(other).map(Algorithm::Baseline),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Algorithm::MixAndMatch => "mixmatch".into(),
            Algorithm::Baseline(k) => k.to_string(),
        }
    }
}

/// Key-value description of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Suite file path or `builtin:<name>`.
    pub suite: String,
    pub algorithms: Vec<String>,
    /// Budget grid `Λ`.
    pub budgets: Vec<u64>,
    pub replicas: u32,
    #[serde(default)]
    pub seed: u64,
    /// Steps per tree node `λ`.
    #[serde(default = "default_node_steps")]
    pub node_steps: u64,
    /// `theoretical` or `practical:<eta>`.
    #[serde(default = "default_schedule")]
    pub schedule: String,
    /// `bisect` or `coordhalf`.
    #[serde(default = "default_strategy")]
    pub strategy: String,
    /// `deepest` or `leaves`.
    #[serde(default = "default_pool")]
    pub final_pool: String,
}

fn default_node_steps() -> u64 {
    500
}

fn default_schedule() -> String {
    "practical:0.01".into()
}

fn default_strategy() -> String {
    "bisect".into()
}

fn default_pool() -> String {
    "deepest".into()
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: "<string>".into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.into(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment configs serialize")
    }
}

/// Parses `deepest` or `leaves`.
pub fn parse_final_pool(text: &str) -> Result<FinalPool> {
    match text {
        "deepest" => Ok(FinalPool::Deepest),
        "leaves" | "all-leaves" => Ok(FinalPool::AllLeaves),
        other => Err(Error::param(format!("unknown final pool `{other}`"))),
    }
}

/// Seed of replica `replica` of `algorithm`. The budget is deliberately not
/// mixed in, so one seed follows the same random stream at every `Λ`.
pub fn replica_seed(master: u64, algorithm: &str, replica: u32) -> u64 {
    rng::derive_seed(master, &[rng::label_tag(algorithm), u64::from(replica)])
}

/// One `(algorithm, Λ, replica)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellOutcome {
    pub algorithm: String,
    pub lambda: u64,
    pub replica: u32,
    pub seed: u64,
    pub outcome: std::result::Result<CellValues, String>,
}

/// What a successful cell measured.
#[derive(Clone, Debug, PartialEq)]
pub struct CellValues {
    /// Simple regret; `None` when the policy has no training mixture.
    pub regret: Option<f64>,
    pub model_regret: f64,
    pub height: Option<u32>,
    pub total_steps: u64,
}

/// Everything [`run_experiment`] produced.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    /// Ordered by algorithm (config order), then `Λ`, then replica.
    pub cells: Vec<CellOutcome>,
    pub reports: Vec<RegretReport>,
}

/// Runs one policy once.
pub fn run_algorithm(
    algorithm: Algorithm,
    suite: &ProblemSuite,
    budget: u64,
    node_steps: u64,
    schedule: &ScheduleSpec,
    strategy: &PartitionStrategy,
    final_pool: FinalPool,
    seed: u64,
) -> Result<RunOutcome> {
    let schedule = schedule.resolve(suite.constants(), budget as f64)?;
    match algorithm {
        Algorithm::MixAndMatch => {
            let mut config = SearchConfig::new(suite, budget, node_steps, schedule, seed);
            config.strategy = *strategy;
            config.final_pool = final_pool;
            let result = treesearch::mix_and_match(suite, &config)?;
            Ok(RunOutcome::from_search(algorithm.label(), &result))
        }
        Algorithm::Baseline(kind) => baselines::run_baseline(kind, suite, budget, &schedule, seed),
    }
}

/// Runs every cell in parallel and assembles the results in a fixed order.
pub fn run_experiment(config: &ExperimentConfig, suite: &ProblemSuite) -> Result<ExperimentOutput> {
    if config.replicas == 0 || config.budgets.is_empty() || config.algorithms.is_empty() {
        return Err(Error::param("an experiment needs algorithms, budgets, and replicas"));
    }
    let algorithms: Vec<Algorithm> = config.algorithms.iter().map(|a| Algorithm::parse(a)).collect::<Result<_>>()?;
    let schedule = ScheduleSpec::parse(&config.schedule)?;
    let strategy = PartitionStrategy::parse(&config.strategy, config.seed)?;
    let final_pool = parse_final_pool(&config.final_pool)?;
    let oracle = RegretOracle::new(suite)?;

    let jobs: Vec<(Algorithm, u64, u32)> = algorithms
        .iter()
        .flat_map(|&a| config.budgets.iter().flat_map(move |&l| (0..config.replicas).map(move |r| (a, l, r))))
        .collect();
    let cells: Vec<CellOutcome> = jobs
        .par_iter()
        .map(|&(algorithm, lambda, replica)| {
            let label = algorithm.label();
            let seed = replica_seed(config.seed, &label, replica);
            let outcome = run_algorithm(algorithm, suite, lambda, config.node_steps, &schedule, &strategy, final_pool, seed)
                .and_then(|run| {
                    let regret = match &run.mixture {
                        Some(a) => Some(oracle.simple_regret(a)?.value),
                        None => None,
                    };
                    Ok(CellValues {
                        regret,
                        model_regret: oracle.model_regret(run.model.weights())?.value,
                        height: run.height,
                        total_steps: run.total_steps,
                    })
                })
                .map_err(|e| e.to_string());
            CellOutcome {
                algorithm: label,
                lambda,
                replica,
                seed,
                outcome,
            }
        })
        .collect();

    let mut reports = Vec::new();
    for group in cells.chunks(config.replicas as usize) {
        let mut report = RegretReport {
            algorithm: group[0].algorithm.clone(),
            lambda: group[0].lambda,
            node_steps: (group[0].algorithm == "mixmatch").then_some(config.node_steps),
            seeds: Vec::new(),
            regrets: Vec::new(),
            model_regrets: Vec::new(),
            heights: Vec::new(),
            total_steps: Vec::new(),
            failures: Vec::new(),
        };
        for cell in group {
            report.seeds.push(cell.seed);
            match &cell.outcome {
                Ok(v) => {
                    report.regrets.push(v.regret.unwrap_or(f64::NAN));
                    report.model_regrets.push(v.model_regret);
                    report.heights.push(v.height);
                    report.total_steps.push(v.total_steps);
                }
                Err(message) => {
                    report.regrets.push(f64::NAN);
                    report.model_regrets.push(f64::NAN);
                    report.heights.push(None);
                    report.total_steps.push(0);
                    report.failures.push((cell.seed, message.clone()));
                }
            }
        }
        reports.push(report);
    }
    Ok(ExperimentOutput { cells, reports })
}

impl ExperimentOutput {
    /// Rows of `regret_curve.csv`. Failed cells and policies without a
    /// training mixture leave the regret blank.
    pub fn curve_table(&self) -> CsvTable {
        let mut table = CsvTable::new(&CURVE_HEADER);
        for c in &self.cells {
            let (regret, h, steps) = match &c.outcome {
                Ok(v) => (
                    v.regret.map(output::fmt_f64).unwrap_or_default(),
                    v.height.map(|h| h.to_string()).unwrap_or_default(),
                    v.total_steps.to_string(),
                ),
                Err(_) => (String::new(), String::new(), String::new()),
            };
            table.push(vec![c.algorithm.clone(), c.lambda.to_string(), c.seed.to_string(), regret, h, steps]);
        }
        table
    }

    /// Rows of `summary.csv`.
    pub fn summary_table(&self) -> CsvTable {
        let mut table = CsvTable::new(&SUMMARY_HEADER);
        let q = |v: Option<f64>| v.map(output::fmt_f64).unwrap_or_default();
        for r in &self.reports {
            let rq = r.regret_quartiles();
            let mq = r.model_regret_quartiles();
            table.push(vec![
                r.algorithm.clone(),
                r.lambda.to_string(),
                r.seeds.len().to_string(),
                r.failures.len().to_string(),
                q(rq.map(|x| x.q1)),
                q(rq.map(|x| x.median)),
                q(rq.map(|x| x.q3)),
                q(mq.map(|x| x.q1)),
                q(mq.map(|x| x.median)),
                q(mq.map(|x| x.q3)),
                q(r.median_height()),
            ]);
        }
        table
    }

    /// Rows of `failures.csv`.
    pub fn failure_table(&self) -> CsvTable {
        let mut table = CsvTable::new(&["algorithm", "lambda", "seed", "error"]);
        for c in &self.cells {
            if let Err(message) = &c.outcome {
                table.push(vec![c.algorithm.clone(), c.lambda.to_string(), c.seed.to_string(), message.clone()]);
            }
        }
        table
    }

    /// Writes `regret_curve.csv`, `summary.csv`, and `failures.csv`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        self.curve_table().write(dir.join("regret_curve.csv"))?;
        self.summary_table().write(dir.join("summary.csv"))?;
        self.failure_table().write(dir.join("failures.csv"))
    }

    pub fn report(&self, algorithm: &str, lambda: u64) -> Option<&RegretReport> {
        self.reports.iter().find(|r| r.algorithm == algorithm && r.lambda == lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::SuiteConfig;

    fn config() -> ExperimentConfig {
        ExperimentConfig {
            suite: "builtin:planar".into(),
            algorithms: vec!["mixmatch".into(), "uniform".into(), "validation".into()],
            budgets: vec![4000, 8000],
            replicas: 3,
            seed: 11,
            node_steps: 200,
            schedule: "practical:0.05".into(),
            strategy: "bisect".into(),
            final_pool: "deepest".into(),
        }
    }

    #[test]
    fn rows_per_cell_and_order() {
        let suite = SuiteConfig::planar_quadratic().build().unwrap();
        let out = run_experiment(&config(), &suite).unwrap();
        assert_eq!(out.cells.len(), 3 * 2 * 3);
        assert_eq!(out.reports.len(), 6);
        assert_eq!(out.reports[0].algorithm, "mixmatch");
        assert_eq!(out.reports[1].lambda, 8000);
        assert!(out.reports.iter().all(|r| r.seeds.len() == 3 && r.failures.is_empty()));
        let curve = out.curve_table();
        assert_eq!(curve.rows.len(), 18);
        // The validation baseline has no training mixture.
        assert!(curve.rows.iter().filter(|r| r[0] == "validation").all(|r| r[3].is_empty()));
        assert!(curve.rows.iter().filter(|r| r[0] == "mixmatch").all(|r| !r[3].is_empty() && !r[4].is_empty()));
    }

    #[test]
    fn deterministic_and_budget_independent_seeds() {
        let suite = SuiteConfig::planar_quadratic().build().unwrap();
        let a = run_experiment(&config(), &suite).unwrap();
        let b = run_experiment(&config(), &suite).unwrap();
        assert_eq!(a.curve_table().to_bytes(), b.curve_table().to_bytes());
        assert_eq!(a.summary_table().to_bytes(), b.summary_table().to_bytes());
        assert_eq!(a.reports[0].seeds, a.reports[1].seeds);
        assert_ne!(a.reports[0].seeds, a.reports[2].seeds);
    }

    #[test]
    fn failed_cells_are_recorded() {
        let suite = SuiteConfig::planar_quadratic().build().unwrap();
        let mut c = config();
        // 300 steps cannot pay for the root expansion at λ = 200.
        c.budgets = vec![300];
        c.algorithms = vec!["mixmatch".into()];
        let out = run_experiment(&c, &suite).unwrap();
        assert_eq!(out.reports[0].failures.len(), 3);
        assert_eq!(out.failure_table().rows.len(), 3);
        assert!(out.curve_table().rows.iter().all(|r| r[3].is_empty()));
    }

    #[test]
    fn config_parsing() {
        let c = config();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
        let minimal = ExperimentConfig::from_toml("suite = \"builtin:scalar\"\nalgorithms = [\"genie\"]\nbudgets = [10]\nreplicas = 1\n").unwrap();
        assert_eq!(minimal.node_steps, 500);
        assert_eq!(minimal.schedule, "practical:0.01");
        assert!(ExperimentConfig::from_toml("suite = 1").is_err());
        assert!(Algorithm::parse("bogus").is_err());
        assert_eq!(Algorithm::parse("only:2").unwrap().label(), "only:2");
    }
}
