//! CSV tables with fixed headers.

use std::path::Path;

use crate::baselines::RunOutcome;
use crate::error::{Error, Result};
use crate::problems::ProblemSuite;
use crate::simplex::{self, PartitionStrategy};
use crate::treesearch::SearchResult;

pub const SEARCH_HEADER: [&str; 7] = ["order", "height", "index", "alpha_json", "steps", "val_loss", "b_value"];
pub const RESULT_HEADER: [&str; 4] = ["alpha_json", "height", "total_steps", "regret_if_known"];
pub const MANIFEST_HEADER: [&str; 2] = ["key", "value"];
pub const PARTITION_HEADER: [&str; 5] = ["height", "index", "diameter_l1", "bound", "vertex_json"];

/// Shortest round-trip form of a float, in scientific notation when very
/// small or very large.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// A header and string rows, written with the `csv` crate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("writing to memory");
        for r in &self.rows {
            w.write_record(r).expect("writing to memory");
        }
        w.into_inner().expect("writing to memory")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Index of a header column.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// The audit log of a search, one row per evaluated node.
pub fn search_table(result: &SearchResult) -> CsvTable {
    let mut t = CsvTable::new(&SEARCH_HEADER);
    for a in &result.audit {
        t.push(vec![
            a.order.to_string(),
            a.height.to_string(),
            a.index.to_string(),
            a.alpha.to_json(),
            a.steps.to_string(),
            fmt_f64(a.val_loss),
            fmt_f64(a.b_value),
        ]);
    }
    t
}

/// The single-row result of a run. Validation training shows the tag
/// `validation` instead of a mixture.
pub fn result_table(outcome: &RunOutcome, regret: Option<f64>) -> CsvTable {
    let mut t = CsvTable::new(&RESULT_HEADER);
    t.push(vec![
        outcome.mixture.as_ref().map(|m| m.to_json()).unwrap_or_else(|| "validation".into()),
        outcome.height.map(|h| h.to_string()).unwrap_or_default(),
        outcome.total_steps.to_string(),
        regret.map(fmt_f64).unwrap_or_default(),
    ]);
    t
}

/// Suite facts and constants as key-value rows.
pub fn suite_manifest(suite: &ProblemSuite) -> CsvTable {
    let mut t = CsvTable::new(&MANIFEST_HEADER);
    let mut kv = |k: &str, v: String| t.push(vec![k.to_string(), v]);
    kv("name", suite.name().to_string());
    kv("seed", suite.seed().to_string());
    kv("k", suite.k().to_string());
    kv("model_dim", suite.model_dim().to_string());
    kv("validation_size", suite.validation().len().to_string());
    kv("alpha_star", suite.alpha_star().map(|a| a.to_json()).unwrap_or_default());
    kv("constants_exact", suite.constants().exact.to_string());
    for (name, value) in suite.constants().entries() {
        kv(name, fmt_f64(value));
    }
    t
}

/// Every cell at heights `0..=height`, with its diameter and the bound for
/// its height. The bound column is empty for `K < 2`.
pub fn partition_table(k: usize, height: u32, strategy: &PartitionStrategy) -> Result<CsvTable> {
    let mut t = CsvTable::new(&PARTITION_HEADER);
    for cell in simplex::enumerate_cells(k, height, strategy)? {
        let bound = simplex::diameter_bound(cell.height(), k).ok();
        t.push(vec![
            cell.height().to_string(),
            cell.index().to_string(),
            fmt_f64(cell.diameter()),
            bound.map(fmt_f64).unwrap_or_default(),
            cell.vertices_json(),
        ]);
    }
    Ok(t)
}
