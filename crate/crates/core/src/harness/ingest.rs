//! Builds a finite-source suite from a CSV file: rows are grouped by a
//! source column, and each group is shuffled and split into training,
//! validation, test, and discarded rows by fixed percentages.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{Embedding, FiniteSource, LossKind, LossProblem, ProblemSuite, Sample};
use crate::rng;

/// Allowed distance of each source's percentages from 100.
pub const PERCENT_TOLERANCE: f64 = 0.01;

/// Percentages of one source's rows assigned to each bucket.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSplit {
    pub source: String,
    pub train: f64,
    pub validate: f64,
    pub test: f64,
    pub discard: f64,
}

impl SourceSplit {
    fn buckets(&self) -> [f64; 4] {
        [self.train, self.validate, self.test, self.discard]
    }
}

/// Key-value description of an ingestion run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSpec {
    /// CSV path; relative paths resolve against the spec file's directory.
    pub path: PathBuf,
    pub source_column: String,
    pub label_column: String,
    /// Feature columns in order; every other column when empty.
    #[serde(default)]
    pub features: Vec<String>,
    /// Feature columns to one-hot encode (categories in sorted order).
    #[serde(default)]
    pub one_hot: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    /// `quadratic` or `ridge-logistic`.
    #[serde(default = "default_loss")]
    pub loss: String,
    #[serde(default)]
    pub regularization: f64,
    /// One entry per source, in the order the suite will use.
    pub split: Vec<SourceSplit>,
}

fn default_loss() -> String {
    "quadratic".into()
}

impl IngestSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: "<string>".into(),
            message: e.to_string(),
        })
    }

    /// Reads a spec file and resolves its data path relative to it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec: IngestSpec = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.into(),
            message: e.to_string(),
        })?;
        if spec.path.is_relative() {
            if let Some(dir) = path.parent() {
                spec.path = dir.join(&spec.path);
            }
        }
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("ingest specs serialize")
    }

    fn loss_kind(&self) -> Result<LossKind> {
        match self.loss.as_str() {
            "quadratic" => Ok(LossKind::Quadratic {
                embedding: Embedding::Features,
            }),
            "ridge-logistic" | "logistic" => Ok(LossKind::RidgeLogistic {
                lambda: self.regularization,
            }),
            other => Err(Error::Ingest(format!("unknown loss `{other}`"))),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.split.is_empty() {
            return Err(Error::Ingest("no sources are listed".into()));
        }
        let mut seen = BTreeSet::new();
        for s in &self.split {
            if !seen.insert(s.source.as_str()) {
                return Err(Error::Ingest(format!("source `{}` is listed twice", s.source)));
            }
            if s.buckets().iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::Ingest(format!("source `{}` has a negative percentage", s.source)));
            }
            let sum: f64 = s.buckets().iter().sum();
            if (sum - 100.0).abs() > PERCENT_TOLERANCE {
                return Err(Error::Ingest(format!(
                    "percentages for `{}` sum to {sum}, not 100",
                    s.source
                )));
            }
        }
        Ok(())
    }
}

/// Row counts of one source's split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitCounts {
    pub source: String,
    pub total: usize,
    pub train: usize,
    pub validate: usize,
    pub test: usize,
    pub discard: usize,
}

/// File row indices (0-based, header excluded) of one source's buckets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitRows {
    pub train: Vec<usize>,
    pub validate: Vec<usize>,
    pub test: Vec<usize>,
    pub discard: Vec<usize>,
}

/// Result of [`ingest_csv`].
#[derive(Debug)]
pub struct Ingested {
    /// Finite sources from the training buckets; no true mixture.
    pub suite: ProblemSuite,
    pub counts: Vec<SplitCounts>,
    pub rows: Vec<SplitRows>,
    /// Test rows pooled across sources.
    pub test: Vec<Sample>,
    /// Names of the encoded feature columns.
    pub feature_names: Vec<String>,
}

/// `floor(p/100 · n)` for the first three buckets; the rest is discarded.
pub fn split_counts(total: usize, split: &SourceSplit) -> [usize; 4] {
    let take = |p: f64| ((p * total as f64) / 100.0 + 1e-9).floor() as usize;
    let train = take(split.train).min(total);
    let validate = take(split.validate).min(total - train);
    let test = take(split.test).min(total - train - validate);
    [train, validate, test, total - train - validate - test]
}

enum Column {
    Numeric(usize),
    OneHot(usize, Vec<String>),
}

/// Reads, encodes, and splits the rows described by `spec`.
pub fn ingest_csv(spec: &IngestSpec) -> Result<Ingested> {
    spec.validate()?;
    let loss_kind = spec.loss_kind()?;
    let mut reader = csv::Reader::from_path(&spec.path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::Ingest(format!("cannot open {}: {e}", spec.path.display())),
        _ => Error::Csv(e),
    })?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Ingest(format!("missing column `{name}`")))
    };
    let source_col = find(&spec.source_column)?;
    let label_col = find(&spec.label_column)?;
    let feature_names: Vec<String> = if spec.features.is_empty() {
        headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != source_col && *i != label_col)
            .map(|(_, h)| h.to_string())
            .collect()
    } else {
        spec.features.clone()
    };
    for name in &spec.one_hot {
        if !feature_names.contains(name) {
            return Err(Error::Ingest(format!("one-hot column `{name}` is not a feature")));
        }
    }
    let records: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;

    let mut columns = Vec::new();
    let mut encoded_names = Vec::new();
    for name in &feature_names {
        let idx = find(name)?;
        if spec.one_hot.contains(name) {
            let cats: BTreeSet<String> = records.iter().map(|r| r[idx].to_string()).collect();
            let cats: Vec<String> = cats.into_iter().collect();
            encoded_names.extend(cats.iter().map(|c| format!("{name}={c}")));
            columns.push(Column::OneHot(idx, cats));
        } else {
            encoded_names.push(name.clone());
            columns.push(Column::Numeric(idx));
        }
    }
    let binary = matches!(loss_kind, LossKind::RidgeLogistic { .. });
    let parse = |row: usize, col: usize, text: &str| -> Result<f64> {
        text.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
            Error::Ingest(format!(
                "row {}: column `{}` holds non-numeric value `{text}`",
                row + 1,
                &headers[col]
            ))
        })
    };

    let source_pos: HashMap<&str, usize> = spec.split.iter().enumerate().map(|(i, s)| (s.source.as_str(), i)).collect();
    let mut by_source: Vec<Vec<usize>> = vec![Vec::new(); spec.split.len()];
    let mut samples = Vec::with_capacity(records.len());
    for (r, record) in records.iter().enumerate() {
        let name = &record[source_col];
        let &s = source_pos
            .get(name)
            .ok_or_else(|| Error::Ingest(format!("row {}: source `{name}` has no split entry", r + 1)))?;
        by_source[s].push(r);
        let mut x = Vec::with_capacity(encoded_names.len());
        for c in &columns {
            match c {
                Column::Numeric(idx) => x.push(parse(r, *idx, &record[*idx])?),
                Column::OneHot(idx, cats) => x.extend(cats.iter().map(|cat| f64::from(u8::from(cat == &record[*idx])))),
            }
        }
        let mut y = parse(r, label_col, &record[label_col])?;
        if binary {
            y = if y > 0.0 { 1.0 } else { -1.0 };
        }
        samples.push(Sample { x, y });
    }

    let mut counts = Vec::new();
    let mut rows = Vec::new();
    let mut train_sets = Vec::new();
    let (mut validation, mut test) = (Vec::new(), Vec::new());
    for (split, mut idx) in spec.split.iter().zip(by_source) {
        if idx.is_empty() {
            return Err(Error::Ingest(format!("source `{}` has no rows", split.source)));
        }
        let mut stream = rng::derived_stream(spec.seed, &[rng::label_tag("split"), rng::label_tag(&split.source)]);
        idx.shuffle(&mut stream);
        let [a, b, c, d] = split_counts(idx.len(), split);
        if a == 0 {
            return Err(Error::Ingest(format!("source `{}` gets no training rows", split.source)));
        }
        let parts = SplitRows {
            train: idx[..a].to_vec(),
            validate: idx[a..a + b].to_vec(),
            test: idx[a + b..a + b + c].to_vec(),
            discard: idx[a + b + c..].to_vec(),
        };
        train_sets.push(FiniteSource::new(parts.train.iter().map(|&i| samples[i].clone()).collect())?);
        validation.extend(parts.validate.iter().map(|&i| samples[i].clone()));
        test.extend(parts.test.iter().map(|&i| samples[i].clone()));
        counts.push(SplitCounts {
            source: split.source.clone(),
            total: idx.len(),
            train: a,
            validate: b,
            test: c,
            discard: d,
        });
        rows.push(parts);
    }
    if validation.is_empty() {
        return Err(Error::Ingest("the validation buckets are all empty".into()));
    }
    let loss = LossProblem::new(loss_kind, encoded_names.len())?;
    let name = spec
        .path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "ingested".into());
    let suite = ProblemSuite::from_finite(name, train_sets, validation, loss, spec.seed)?;
    Ok(Ingested {
        suite,
        counts,
        rows,
        test,
        feature_names: encoded_names,
    })
}

/// Writes a CSV with columns `source,x1,x2,y`: `n` rows per listed source,
/// interleaved, with Gaussian features shifted per source and a 0/1 label.
pub fn write_fixture_csv(path: impl AsRef<Path>, sources: &[(&str, usize)], seed: u64) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let mut stream = rng::stream(seed);
    let mut left: BTreeMap<usize, usize> = sources.iter().enumerate().map(|(i, (_, n))| (i, *n)).collect();
    writeln!(out, "source,x1,x2,y").map_err(|e| Error::io(path, e))?;
    while !left.is_empty() {
        let keys: Vec<usize> = left.keys().copied().collect();
        for i in keys {
            let shift = i as f64;
            let x1: f64 = stream.random::<f64>() * 2.0 - 1.0 + shift;
            let x2: f64 = stream.random::<f64>() * 2.0 - 1.0 - shift;
            let y = u8::from(x1 + 0.5 * x2 + stream.random::<f64>() - 0.5 > 0.0);
            writeln!(out, "{},{x1},{x2},{y}", sources[i].0).map_err(|e| Error::io(path, e))?;
            let n = left.get_mut(&i).expect("key present");
            *n -= 1;
            if *n == 0 {
                left.remove(&i);
            }
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}
