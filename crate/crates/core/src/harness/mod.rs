//! Experiment orchestration: regret oracles, CSV ingestion, replicated
//! experiments, verification drivers, and CSV output.

pub mod experiment;
pub mod ingest;
pub mod output;
pub mod regret;
pub mod verify;

pub use experiment::{run_experiment, Algorithm, ExperimentConfig, ExperimentOutput};
pub use ingest::{ingest_csv, IngestSpec, Ingested, SourceSplit};
pub use output::CsvTable;
pub use regret::{simple_regret, RegretOracle, RegretReport};
pub use verify::{verify_concentration, verify_smoothness, ConcentrationReport, ConcentrationSettings, SmoothnessReport};
