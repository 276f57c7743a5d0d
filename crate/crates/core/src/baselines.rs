//! Reference training policies: a fixed mixture, or the validation data
//! itself, trained with the whole budget from the zero model.

use std::fmt;

use crate::error::{Error, Result};
use crate::problems::{Counting, MixtureSampler, ProblemSuite, TrainedModel, ValidationSampler};
use crate::rng;
use crate::sgd::{self, StepSchedule, TraceSpec};
use crate::simplex::MixtureWeights;
use crate::treesearch::SearchResult;

/// Which fixed policy to train with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineKind {
    /// The true mixture `α*`.
    Genie,
    /// Equal weight on every source.
    Uniform,
    /// Draws with replacement from the validation set.
    Validation,
    /// One source only (1-based index).
    OnlySource(usize),
}

impl BaselineKind {
    /// Parses `genie`, `uniform`, `validation`, or `only:<i>`.
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "genie" => Ok(BaselineKind::Genie),
            "uniform" => Ok(BaselineKind::Uniform),
            "validation" => Ok(BaselineKind::Validation),
            other => {
                let i = other
                    .strip_prefix("only:")
                    .and_then(|i| i.parse::<usize>().ok())
                    .ok_or_else(|| Error::param(format!("unknown baseline `{other}`")))?;
                if i == 0 {
                    return Err(Error::param("source indices start at 1"));
                }
                Ok(BaselineKind::OnlySource(i))
            }
        }
    }

    /// The mixture the policy trains on, or `None` for validation training.
    pub fn mixture(&self, suite: &ProblemSuite) -> Result<Option<MixtureWeights>> {
        match *self {
            BaselineKind::Genie => suite
                .alpha_star()
                .cloned()
                .map(Some)
                .ok_or_else(|| Error::Unsupported("genie needs a suite with a known true mixture".into())),
            BaselineKind::Uniform => MixtureWeights::uniform(suite.k()).map(Some),
            BaselineKind::Validation => Ok(None),
            BaselineKind::OnlySource(i) => {
                if i == 0 || i > suite.k() {
                    return Err(Error::param(format!("source {i} is outside 1..={}", suite.k())));
                }
                MixtureWeights::vertex(suite.k(), i - 1).map(Some)
            }
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaselineKind::Genie => f.write_str("genie"),
            BaselineKind::Uniform => f.write_str("uniform"),
            BaselineKind::Validation => f.write_str("validation"),
            BaselineKind::OnlySource(i) => write!(f, "only:{i}"),
        }
    }
}

/// What any training policy produced.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub label: String,
    /// Mixture trained on last; `None` for validation training.
    pub mixture: Option<MixtureWeights>,
    pub model: TrainedModel,
    /// Final tree height for searches.
    pub height: Option<u32>,
    pub total_steps: u64,
    /// Draws made at the training mixture oracle.
    pub oracle_draws: u64,
}

impl RunOutcome {
    pub fn from_search(label: impl Into<String>, result: &SearchResult) -> Self {
        RunOutcome {
            label: label.into(),
            mixture: Some(result.mixture.clone()),
            model: result.model.clone(),
            height: Some(result.tree_height),
            total_steps: result.total_steps,
            oracle_draws: result.oracle_draws,
        }
    }
}

/// Trains for exactly `budget` steps from the zero model with the stream
/// `rng::stream(seed)`.
pub fn run_baseline(
    kind: BaselineKind,
    suite: &ProblemSuite,
    budget: u64,
    schedule: &StepSchedule,
    seed: u64,
) -> Result<RunOutcome> {
    if budget == 0 {
        return Err(Error::param("budget must be at least one step"));
    }
    let mixture = kind.mixture(suite)?;
    let w0 = vec![0.0; suite.model_dim()];
    let mut stream = rng::stream(seed);
    let (run, draws) = match &mixture {
        Some(alpha) => {
            let mut sampler = Counting::new(MixtureSampler::new(suite, alpha)?);
            let run = sgd::run_sgd_with(suite.loss(), &mut sampler, &w0, budget, schedule, &mut stream, TraceSpec::Off, 0)?;
            (run, sampler.count())
        }
        None => {
            let mut sampler = ValidationSampler::new(suite);
            let run = sgd::run_sgd_with(suite.loss(), &mut sampler, &w0, budget, schedule, &mut stream, TraceSpec::Off, 0)?;
            (run, 0)
        }
    };
    Ok(RunOutcome {
        label: kind.to_string(),
        mixture,
        model: run.model,
        height: None,
        total_steps: run.steps,
        oracle_draws: draws,
    })
}
