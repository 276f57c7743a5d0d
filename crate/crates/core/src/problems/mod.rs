//! Convex loss families, training sources, and problem suites.
//!
//! A [`ProblemSuite`] bundles `K` training sources, a fixed validation set,
//! a loss, and the curvature and noise constants the search relies on. The
//! suite is the only way to reach data: [`MixtureSampler`] draws from a
//! mixture of sources and [`ProblemSuite::validation_loss`] scores models
//! that SGD has actually trained.

mod config;
mod constants;
mod sampler;
mod source;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use config::{ConditionalConfig, OracleSettings, SourceConfig, SuiteConfig};
pub use constants::ProblemConstants;
pub use sampler::{Counting, MixtureSampler, Sampler, ValidationSampler};
pub use source::{FiniteSource, GaussianSource, LinearConditional, Source};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{self, Stream};
use crate::simplex::MixtureWeights;

/// An observed sample. Latent features never leave the generator.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
}

/// What the quadratic loss measures distance to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Embedding {
    /// `φ(z) = x`.
    #[default]
    Features,
    /// `φ(z) = (x, y)`: the label makes the latent feature visible to the loss.
    FeaturesLabel,
}

/// Loss family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossKind {
    /// `f(w; z) = ½‖w − φ(z)‖²`.
    Quadratic { embedding: Embedding },
    /// `f(w; z) = log(1 + exp(−y⟨w, x⟩)) + (λ/2)‖w‖²` with `y ∈ {−1, +1}`.
    RidgeLogistic { lambda: f64 },
}

/// A loss family bound to a feature dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossProblem {
    kind: LossKind,
    dim_x: usize,
}

impl LossProblem {
    pub fn new(kind: LossKind, dim_x: usize) -> Result<Self> {
        if dim_x == 0 {
            return Err(Error::InvalidSuite("feature dimension must be positive".into()));
        }
        if let LossKind::RidgeLogistic { lambda } = kind {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(Error::InvalidSuite(format!(
                    "ridge-logistic needs a positive regularization, got {lambda}"
                )));
            }
        }
        Ok(LossProblem { kind, dim_x })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self.kind, LossKind::Quadratic { .. })
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    /// Length of the model vector `w`.
    pub fn model_dim(&self) -> usize {
        match self.kind {
            LossKind::Quadratic {
                embedding: Embedding::FeaturesLabel,
            } => self.dim_x + 1,
            _ => self.dim_x,
        }
    }

    fn check(&self, w: &[f64], z: &Sample) -> Result<()> {
        if w.len() != self.model_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.model_dim(),
                got: w.len(),
            });
        }
        if z.x.len() != self.dim_x {
            return Err(Error::DimensionMismatch {
                expected: self.dim_x,
                got: z.x.len(),
            });
        }
        Ok(())
    }

    /// `φ(z)` component `j` for the quadratic loss.
    fn embed(z: &Sample, j: usize) -> f64 {
        if j < z.x.len() {
            z.x[j]
        } else {
            z.y
        }
    }

    pub fn loss(&self, w: &[f64], z: &Sample) -> Result<f64> {
        self.check(w, z)?;
        Ok(self.loss_unchecked(w, z))
    }

    pub(crate) fn loss_unchecked(&self, w: &[f64], z: &Sample) -> f64 {
        match self.kind {
            LossKind::Quadratic { .. } => {
                0.5 * w
                    .iter()
                    .enumerate()
                    .map(|(j, wj)| (wj - Self::embed(z, j)).powi(2))
                    .sum::<f64>()
            }
            LossKind::RidgeLogistic { lambda } => {
                let margin = z.y * linalg::dot(w, &z.x);
                softplus(-margin) + 0.5 * lambda * linalg::norm2_sq(w)
            }
        }
    }

    /// Gradient of `f(·; z)` at `w`.
    pub fn sample_grad(&self, w: &[f64], z: &Sample) -> Result<Vec<f64>> {
        self.check(w, z)?;
        let mut g = vec![0.0; w.len()];
        self.grad_into(w, z, &mut g);
        Ok(g)
    }

    /// Gradient into a caller buffer of length `model_dim`; dimensions are
    /// the caller's responsibility.
    pub(crate) fn grad_into(&self, w: &[f64], z: &Sample, out: &mut [f64]) {
        match self.kind {
            LossKind::Quadratic { .. } => {
                for (j, (o, wj)) in out.iter_mut().zip(w).enumerate() {
                    *o = wj - Self::embed(z, j);
                }
            }
            LossKind::RidgeLogistic { lambda } => {
                let margin = z.y * linalg::dot(w, &z.x);
                let s = sigmoid(-margin);
                for ((o, wj), xj) in out.iter_mut().zip(w).zip(&z.x) {
                    *o = -z.y * xj * s + lambda * wj;
                }
            }
        }
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// A value that is either exact or a Monte Carlo / long-SGD estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub exact: bool,
    /// Samples or SGD steps spent producing the value; zero when exact.
    pub budget: u64,
}

impl<T> Estimate<T> {
    fn exact(value: T) -> Self {
        Estimate {
            value,
            exact: true,
            budget: 0,
        }
    }
}

/// A model produced by at least one SGD step. Only the `sgd` module can
/// build one, which is what lets the validation oracle refuse raw vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    weights: Vec<f64>,
    steps: u64,
}

impl TrainedModel {
    pub(crate) fn new(weights: Vec<f64>, steps: u64) -> Self {
        debug_assert!(steps >= 1);
        TrainedModel { weights, steps }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// SGD steps along the whole warm-start chain that produced the model.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }
}

/// First and second moments of the quadratic embedding.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Moments {
    pub mean: Vec<f64>,
    /// `E‖φ(z)‖²`.
    pub second: f64,
}

impl Moments {
    fn of_rows(rows: &[Sample], dim: usize) -> Moments {
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        let mut second = 0.0;
        for z in rows {
            for (j, m) in mean.iter_mut().enumerate() {
                let v = LossProblem::embed(z, j);
                *m += v;
                second += v * v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        Moments {
            mean,
            second: second / n,
        }
    }

    fn of_gaussian(src: &GaussianSource, embedding: Embedding) -> Moments {
        let dx = src.conditional().dim_x();
        let m = src.mean();
        let cov = src.cov();
        let mut mean = m[..dx].to_vec();
        let mut second = (0..dx).map(|i| cov[i][i] + m[i] * m[i]).sum::<f64>();
        if embedding == Embedding::FeaturesLabel {
            let g = src.conditional().stacked();
            let my = linalg::dot(&g, m) + src.conditional().c;
            let var_y = (0..g.len())
                .map(|i| g[i] * linalg::dot(&cov[i], &g))
                .sum::<f64>()
                + src.conditional().noise_sd.powi(2);
            mean.push(my);
            second += var_y + my * my;
        }
        Moments { mean, second }
    }

    fn mix(parts: &[Moments], alpha: &[f64]) -> Moments {
        let dim = parts[0].mean.len();
        let mut mean = vec![0.0; dim];
        let mut second = 0.0;
        for (p, &a) in parts.iter().zip(alpha) {
            for (m, v) in mean.iter_mut().zip(&p.mean) {
                *m += a * v;
            }
            second += a * p.second;
        }
        Moments { mean, second }
    }

    /// `tr Cov = E‖φ‖² − ‖Eφ‖²`, floored at zero against rounding.
    pub fn trace_cov(&self) -> f64 {
        (self.second - linalg::norm2_sq(&self.mean)).max(0.0)
    }

    /// `E ½‖w − φ(z)‖²`.
    pub fn loss(&self, w: &[f64]) -> f64 {
        0.5 * linalg::dist2_sq(w, &self.mean) + 0.5 * self.trace_cov()
    }
}

/// Training sources, validation data, loss, and constants for one problem.
#[derive(Debug)]
pub struct ProblemSuite {
    name: String,
    seed: u64,
    sources: Vec<Source>,
    conditional: Option<Arc<LinearConditional>>,
    binarize: bool,
    validation: Vec<Sample>,
    alpha_star: Option<MixtureWeights>,
    loss: LossProblem,
    constants: ProblemConstants,
    oracle: OracleSettings,
    source_moments: Option<Vec<Moments>>,
    validation_moments: Option<Moments>,
    test_moments: Option<Moments>,
    test_pool: Vec<Sample>,
    training_draws: AtomicU64,
}

impl ProblemSuite {
    /// Builds a Gaussian suite from a configuration. The validation set is
    /// drawn from the `alpha_star` mixture with a stream derived from `seed`.
    pub fn synthetic(config: &SuiteConfig, seed: u64) -> Result<Self> {
        config::build_synthetic(config, seed)
    }

    /// Builds a suite over stored rows. There is no known true mixture.
    pub fn from_finite(
        name: impl Into<String>,
        sources: Vec<FiniteSource>,
        validation: Vec<Sample>,
        loss: LossProblem,
        seed: u64,
    ) -> Result<Self> {
        let sources = sources.into_iter().map(Source::Finite).collect();
        Self::assemble(
            name.into(),
            seed,
            sources,
            None,
            validation,
            None,
            loss,
            OracleSettings::default(),
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        name: String,
        seed: u64,
        sources: Vec<Source>,
        conditional: Option<Arc<LinearConditional>>,
        validation: Vec<Sample>,
        alpha_star: Option<MixtureWeights>,
        loss: LossProblem,
        oracle: OracleSettings,
    ) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::InvalidSuite("a suite needs at least one source".into()));
        }
        if validation.is_empty() {
            return Err(Error::InvalidSuite("the validation set is empty".into()));
        }
        for s in &sources {
            if s.dim_x() != loss.dim_x() {
                return Err(Error::DimensionMismatch {
                    expected: loss.dim_x(),
                    got: s.dim_x(),
                });
            }
        }
        if let Some(bad) = validation.iter().find(|z| z.x.len() != loss.dim_x()) {
            return Err(Error::DimensionMismatch {
                expected: loss.dim_x(),
                got: bad.x.len(),
            });
        }
        if let Some(a) = &alpha_star {
            if a.k() != sources.len() {
                return Err(Error::InvalidSuite(format!(
                    "alpha_star has {} entries for {} sources",
                    a.k(),
                    sources.len()
                )));
            }
        }
        let binarize = !loss.is_quadratic();
        if binarize {
            let bad_label = |z: &Sample| z.y != 1.0 && z.y != -1.0;
            let finite_rows = sources.iter().filter_map(|s| match s {
                Source::Finite(f) => Some(f.rows()),
                Source::Gaussian(_) => None,
            });
            if finite_rows.flatten().any(bad_label) {
                return Err(Error::InvalidSuite("ridge-logistic labels must be -1 or +1".into()));
            }
        }
        let mut suite = ProblemSuite {
            name,
            seed,
            sources,
            conditional,
            binarize,
            validation,
            alpha_star,
            loss,
            constants: ProblemConstants::placeholder(),
            oracle,
            source_moments: None,
            validation_moments: None,
            test_moments: None,
            test_pool: Vec::new(),
            training_draws: AtomicU64::new(0),
        };
        if binarize {
            for z in &mut suite.validation {
                z.y = if z.y >= 0.0 { 1.0 } else { -1.0 };
            }
        }
        if let LossKind::Quadratic { embedding } = loss.kind() {
            let dim = loss.model_dim();
            let parts: Vec<Moments> = suite
                .sources
                .iter()
                .map(|s| match s {
                    Source::Gaussian(g) => Moments::of_gaussian(g, embedding),
                    Source::Finite(f) => Moments::of_rows(f.rows(), dim),
                })
                .collect();
            let val = Moments::of_rows(&suite.validation, dim);
            suite.test_moments = Some(match &suite.alpha_star {
                Some(a) => Moments::mix(&parts, a.as_slice()),
                None => val.clone(),
            });
            suite.source_moments = Some(parts);
            suite.validation_moments = Some(val);
        } else if let Some(a) = suite.alpha_star.clone() {
            let mut stream = rng::derived_stream(seed, &[rng::label_tag("test-pool")]);
            let pool = {
                let mut sampler = MixtureSampler::uncounted(&suite, &a)?;
                (0..suite.oracle.mc_samples)
                    .map(|_| {
                        let mut z = Sample::default();
                        sampler.draw_into(&mut stream, &mut z);
                        z
                    })
                    .collect()
            };
            suite.test_pool = pool;
        }
        suite.constants = constants::compute(&suite)?;
        Ok(suite)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of training sources `K`.
    pub fn k(&self) -> usize {
        self.sources.len()
    }

    pub fn sources(&self) -> &[Source] {
        &self.sources
    }

    /// The label law shared by all Gaussian sources, if any.
    pub fn conditional(&self) -> Option<&Arc<LinearConditional>> {
        self.conditional.as_ref()
    }

    pub fn validation(&self) -> &[Sample] {
        &self.validation
    }

    pub fn alpha_star(&self) -> Option<&MixtureWeights> {
        self.alpha_star.as_ref()
    }

    pub fn loss(&self) -> &LossProblem {
        &self.loss
    }

    pub fn constants(&self) -> &ProblemConstants {
        &self.constants
    }

    pub fn oracle_settings(&self) -> &OracleSettings {
        &self.oracle
    }

    pub fn model_dim(&self) -> usize {
        self.loss.model_dim()
    }

    /// Draws through the training mixture oracle since construction.
    pub fn training_draws(&self) -> u64 {
        self.training_draws.load(Ordering::Relaxed)
    }

    pub(crate) fn record_draws(&self, n: u64) {
        self.training_draws.fetch_add(n, Ordering::Relaxed);
    }

    pub(crate) fn binarize(&self) -> bool {
        self.binarize
    }

    pub(crate) fn source_moments(&self) -> Option<&[Moments]> {
        self.source_moments.as_deref()
    }

    pub(crate) fn test_moments(&self) -> Option<&Moments> {
        self.test_moments.as_ref()
    }

    pub(crate) fn validation_moments(&self) -> Option<&Moments> {
        self.validation_moments.as_ref()
    }

    pub(crate) fn check_alpha(&self, alpha: &MixtureWeights) -> Result<()> {
        if alpha.k() != self.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                got: alpha.k(),
            });
        }
        Ok(())
    }

    fn check_model(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.model_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.model_dim(),
                got: w.len(),
            });
        }
        Ok(())
    }

    /// One sample from the `alpha` mixture: a source index drawn from
    /// `Multinomial(alpha)`, then a sample from that source.
    pub fn draw_sample(&self, alpha: &MixtureWeights, stream: &mut Stream) -> Result<Sample> {
        let mut sampler = MixtureSampler::new(self, alpha)?;
        let mut z = Sample::default();
        sampler.draw_into(stream, &mut z);
        Ok(z)
    }

    /// Gradient of the per-sample loss.
    pub fn sample_grad(&self, w: &[f64], z: &Sample) -> Result<Vec<f64>> {
        self.loss.sample_grad(w, z)
    }

    /// Mixture embedding mean `m(α)` (quadratic suites).
    pub fn mixture_mean(&self, alpha: &MixtureWeights) -> Result<Vec<f64>> {
        self.check_alpha(alpha)?;
        let parts = self.quadratic_moments("mixture_mean")?;
        Ok(Moments::mix(parts, alpha.as_slice()).mean)
    }

    /// `tr Cov_α` of the embedding (quadratic suites).
    pub fn mixture_trace_cov(&self, alpha: &MixtureWeights) -> Result<f64> {
        self.check_alpha(alpha)?;
        let parts = self.quadratic_moments("mixture_trace_cov")?;
        Ok(Moments::mix(parts, alpha.as_slice()).trace_cov())
    }

    fn quadratic_moments(&self, op: &str) -> Result<&[Moments]> {
        self.source_moments
            .as_deref()
            .ok_or_else(|| Error::Unsupported(format!("{op} needs a quadratic suite")))
    }

    /// `F_α(w) = E_{z∼p_α} f(w; z)`: closed form for the quadratic loss,
    /// Monte Carlo over `oracle.mc_samples` draws otherwise.
    pub fn averaged_loss(&self, alpha: &MixtureWeights, w: &[f64]) -> Result<Estimate<f64>> {
        self.check_alpha(alpha)?;
        self.check_model(w)?;
        if let Some(parts) = self.source_moments.as_deref() {
            return Ok(Estimate::exact(Moments::mix(parts, alpha.as_slice()).loss(w)));
        }
        let n = self.oracle.mc_samples;
        let mut stream = rng::derived_stream(self.seed, &[rng::label_tag("averaged-loss")]);
        let mut sampler = MixtureSampler::uncounted(self, alpha)?;
        let mut z = Sample::default();
        let mut total = 0.0;
        for _ in 0..n {
            sampler.draw_into(&mut stream, &mut z);
            total += self.loss.loss_unchecked(w, &z);
        }
        Ok(Estimate {
            value: total / n as f64,
            exact: false,
            budget: n as u64,
        })
    }

    /// Mean loss over the validation set.
    pub fn validation_loss(&self, model: &TrainedModel) -> Result<f64> {
        self.validation_loss_unchecked(model.weights())
    }

    /// Validation loss of an arbitrary vector. Search code never calls this;
    /// it exists for verification harnesses that need the raw objective.
    pub fn validation_loss_unchecked(&self, w: &[f64]) -> Result<f64> {
        self.check_model(w)?;
        let total: f64 = self.validation.iter().map(|z| self.loss.loss_unchecked(w, z)).sum();
        Ok(total / self.validation.len() as f64)
    }

    /// `F^te(w)`: the population loss under `α*` when it is known, the
    /// validation loss otherwise. Quadratic values are exact.
    pub fn test_loss(&self, w: &[f64]) -> Result<Estimate<f64>> {
        self.check_model(w)?;
        if let Some(m) = &self.test_moments {
            return Ok(Estimate::exact(m.loss(w)));
        }
        if self.test_pool.is_empty() {
            return Ok(Estimate::exact(self.validation_loss_unchecked(w)?));
        }
        let total: f64 = self.test_pool.iter().map(|z| self.loss.loss_unchecked(w, z)).sum();
        Ok(Estimate {
            value: total / self.test_pool.len() as f64,
            exact: false,
            budget: self.test_pool.len() as u64,
        })
    }

    /// Minimizer of `F^te` and its value.
    pub fn test_optimum(&self) -> Result<Estimate<(Vec<f64>, f64)>> {
        if let Some(m) = &self.test_moments {
            return Ok(Estimate::exact((m.mean.clone(), 0.5 * m.trace_cov())));
        }
        let alpha = self.alpha_star.clone();
        let w = match alpha {
            Some(a) => self.optimal_model(&a)?,
            None => crate::sgd::validation_oracle(self)?,
        };
        let value = self.test_loss(&w.value)?;
        Ok(Estimate {
            value: (w.value, value.value),
            exact: false,
            budget: w.budget,
        })
    }

    /// `w*(α) = argmin F_α`: the mixture mean for the quadratic loss, a
    /// seed-averaged long SGD run otherwise.
    pub fn optimal_model(&self, alpha: &MixtureWeights) -> Result<Estimate<Vec<f64>>> {
        self.check_alpha(alpha)?;
        if let Some(parts) = self.source_moments.as_deref() {
            return Ok(Estimate::exact(Moments::mix(parts, alpha.as_slice()).mean));
        }
        crate::sgd::optimum_oracle(self, alpha)
    }
}
