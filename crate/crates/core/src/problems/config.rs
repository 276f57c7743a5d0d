//! Suite configuration files and the built-in synthetic suites.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::sampler::{draw_from, source_index};
use crate::problems::{
    Embedding, GaussianSource, LinearConditional, LossKind, LossProblem, ProblemSuite, Sample, Source,
};
use crate::rng;
use crate::simplex::MixtureWeights;

/// Label law `y = aᵀx + bᵀu + c + noise_sd·ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionalConfig {
    pub a: Vec<f64>,
    #[serde(default)]
    pub b: Vec<f64>,
    #[serde(default)]
    pub c: f64,
    pub noise_sd: f64,
}

/// One Gaussian source over the stacked vector `(x, u)`. Give either a full
/// `cov` or an isotropic `variance`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub mean: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
}

/// Budgets for the estimators used when no closed form exists.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSettings {
    /// Fresh samples per Monte Carlo loss estimate.
    pub mc_samples: usize,
    /// SGD steps per run of the `w*(α)` oracle.
    pub optimum_steps: u64,
    /// Independent runs averaged by the `w*(α)` oracle.
    pub optimum_seeds: u32,
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings {
            mc_samples: 20_000,
            optimum_steps: 1_000_000,
            optimum_seeds: 5,
        }
    }
}

/// Key-value description of a synthetic suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub k: usize,
    pub dim_x: usize,
    #[serde(default)]
    pub dim_u: usize,
    /// `quadratic` or `ridge-logistic`.
    #[serde(default = "default_loss")]
    pub loss: String,
    #[serde(default)]
    pub embedding: Embedding,
    #[serde(default)]
    pub regularization: f64,
    pub alpha_star: Vec<f64>,
    pub validation_size: usize,
    #[serde(default)]
    pub seed: u64,
    pub conditional: ConditionalConfig,
    pub sources: Vec<SourceConfig>,
    #[serde(default)]
    pub oracle: OracleSettings,
}

fn default_name() -> String {
    "suite".into()
}

fn default_loss() -> String {
    "quadratic".into()
}

impl SuiteConfig {
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
        toml::to_string(self).expect("suite configs serialize")
    }

    pub fn build(&self) -> Result<ProblemSuite> {
        ProblemSuite::synthetic(self, self.seed)
    }

    pub fn loss_kind(&self) -> Result<LossKind> {
        match self.loss.as_str() {
            "quadratic" => Ok(LossKind::Quadratic {
                embedding: self.embedding,
            }),
            "ridge-logistic" | "logistic" => Ok(LossKind::RidgeLogistic {
                lambda: self.regularization,
            }),
            other => Err(Error::InvalidSuite(format!("unknown loss `{other}`"))),
        }
    }

    /// Two scalar sources with means 0 and 1, unit variances, and an even
    /// true mixture.
    pub fn scalar_quadratic() -> Self {
        SuiteConfig {
            name: "scalar".into(),
            k: 2,
            dim_x: 1,
            dim_u: 0,
            loss: default_loss(),
            embedding: Embedding::Features,
            regularization: 0.0,
            alpha_star: vec![0.5, 0.5],
            validation_size: 500,
            seed: 1,
            conditional: ConditionalConfig {
                a: vec![1.0],
                b: vec![],
                c: 0.0,
                noise_sd: 1.0,
            },
            sources: vec![isotropic(vec![0.0], 1.0), isotropic(vec![1.0], 1.0)],
            oracle: OracleSettings::default(),
        }
    }

    /// Three correlated sources in the plane.
    pub fn planar_quadratic() -> Self {
        SuiteConfig {
            name: "planar".into(),
            k: 3,
            dim_x: 2,
            dim_u: 0,
            loss: default_loss(),
            embedding: Embedding::Features,
            regularization: 0.0,
            alpha_star: vec![0.3, 0.5, 0.2],
            validation_size: 500,
            seed: 2,
            conditional: ConditionalConfig {
                a: vec![1.0, -1.0],
                b: vec![],
                c: 0.0,
                noise_sd: 0.5,
            },
            sources: vec![
                full(vec![0.0, 0.0], vec![vec![1.0, 0.3], vec![0.3, 0.5]]),
                full(vec![2.0, 0.0], vec![vec![0.5, -0.2], vec![-0.2, 1.0]]),
                full(vec![0.0, 1.5], vec![vec![0.8, 0.0], vec![0.0, 0.8]]),
            ],
            oracle: OracleSettings::default(),
        }
    }

    /// Three sources whose observed feature looks alike while the latent
    /// feature, and its correlation with the observed one, differs by source.
    /// The loss embeds `(x, y)`, so the latent shift reaches the objective
    /// only through the shared label law.
    pub fn latent_quadratic() -> Self {
        SuiteConfig {
            name: "latent".into(),
            k: 3,
            dim_x: 1,
            dim_u: 1,
            loss: default_loss(),
            embedding: Embedding::FeaturesLabel,
            regularization: 0.0,
            alpha_star: vec![0.3, 0.5, 0.2],
            validation_size: 500,
            seed: 3,
            conditional: ConditionalConfig {
                a: vec![1.0],
                b: vec![2.0],
                c: 0.0,
                noise_sd: 0.5,
            },
            sources: vec![
                full(vec![0.0, 1.0], vec![vec![1.0, 0.8], vec![0.8, 1.0]]),
                full(vec![0.0, -1.0], vec![vec![1.0, -0.5], vec![-0.5, 1.0]]),
                full(vec![0.5, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            ],
            oracle: OracleSettings::default(),
        }
    }

    /// A single scalar source with mean 1 and unit variance.
    pub fn noisy_scalar() -> Self {
        SuiteConfig {
            name: "noisy-scalar".into(),
            k: 1,
            alpha_star: vec![1.0],
            sources: vec![isotropic(vec![1.0], 1.0)],
            ..Self::scalar_quadratic()
        }
    }

    /// A single scalar source that always emits 1.
    pub fn zero_noise_scalar() -> Self {
        SuiteConfig {
            name: "zero-noise-scalar".into(),
            sources: vec![isotropic(vec![1.0], 0.0)],
            conditional: ConditionalConfig {
                a: vec![1.0],
                b: vec![],
                c: 0.0,
                noise_sd: 0.0,
            },
            ..Self::noisy_scalar()
        }
    }

    /// The latent suite with a binarized label and a ridge-logistic loss.
    pub fn latent_logistic() -> Self {
        SuiteConfig {
            name: "latent-logistic".into(),
            dim_x: 2,
            loss: "ridge-logistic".into(),
            embedding: Embedding::Features,
            regularization: 0.1,
            conditional: ConditionalConfig {
                a: vec![1.0, 0.0],
                b: vec![2.0],
                c: 0.0,
                noise_sd: 0.5,
            },
            sources: vec![
                full(
                    vec![0.0, 1.0, 1.0],
                    vec![vec![1.0, 0.0, 0.8], vec![0.0, 0.0, 0.0], vec![0.8, 0.0, 1.0]],
                ),
                full(
                    vec![0.0, 1.0, -1.0],
                    vec![vec![1.0, 0.0, -0.5], vec![0.0, 0.0, 0.0], vec![-0.5, 0.0, 1.0]],
                ),
                full(
                    vec![0.5, 1.0, 0.0],
                    vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]],
                ),
            ],
            ..Self::latent_quadratic()
        }
    }

    /// Built-in suite by name.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "scalar" => Ok(Self::scalar_quadratic()),
            "planar" => Ok(Self::planar_quadratic()),
            "latent" => Ok(Self::latent_quadratic()),
            "noisy-scalar" => Ok(Self::noisy_scalar()),
            "zero-noise-scalar" => Ok(Self::zero_noise_scalar()),
            "latent-logistic" => Ok(Self::latent_logistic()),
            other => Err(Error::InvalidSuite(format!("no built-in suite named `{other}`"))),
        }
    }

    /// A file path, or `builtin:<name>`.
    pub fn resolve(spec: &str) -> Result<Self> {
        match spec.strip_prefix("builtin:") {
            Some(name) => Self::builtin(name),
            None => Self::load(spec),
        }
    }
}

fn isotropic(mean: Vec<f64>, variance: f64) -> SourceConfig {
    SourceConfig {
        mean,
        cov: None,
        variance: Some(variance),
    }
}

fn full(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> SourceConfig {
    SourceConfig {
        mean,
        cov: Some(cov),
        variance: None,
    }
}

pub(crate) fn build_synthetic(config: &SuiteConfig, seed: u64) -> Result<ProblemSuite> {
    if config.k == 0 {
        return Err(Error::InvalidSuite("K must be at least 1".into()));
    }
    if config.sources.len() != config.k {
        return Err(Error::InvalidSuite(format!(
            "K = {} but {} sources are configured",
            config.k,
            config.sources.len()
        )));
    }
    if config.validation_size == 0 {
        return Err(Error::InvalidSuite("validation_size must be positive".into()));
    }
    if config.alpha_star.len() != config.k {
        return Err(Error::InvalidSuite(format!(
            "alpha_star has {} entries for K = {}",
            config.alpha_star.len(),
            config.k
        )));
    }
    let alpha_star = MixtureWeights::new(&config.alpha_star)?;
    let c = &config.conditional;
    if c.a.len() != config.dim_x || c.b.len() != config.dim_u {
        return Err(Error::InvalidSuite(format!(
            "conditional expects {} observed and {} latent coefficients",
            config.dim_x, config.dim_u
        )));
    }
    let conditional = Arc::new(LinearConditional::new(c.a.clone(), c.b.clone(), c.c, c.noise_sd)?);
    let n = config.dim_x + config.dim_u;
    let sources = config
        .sources
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let cov = match (&s.cov, s.variance) {
                (Some(cov), None) => cov.clone(),
                (None, Some(v)) => (0..n)
                    .map(|r| (0..n).map(|col| if r == col { v } else { 0.0 }).collect())
                    .collect(),
                _ => {
                    return Err(Error::InvalidSuite(format!(
                        "source {} needs exactly one of `cov` or `variance`",
                        i + 1
                    )))
                }
            };
            GaussianSource::new(s.mean.clone(), cov, Arc::clone(&conditional)).map(Source::Gaussian)
        })
        .collect::<Result<Vec<_>>>()?;
    let loss = LossProblem::new(config.loss_kind()?, config.dim_x)?;

    let index = source_index(&alpha_star)?;
    let mut stream = rng::derived_stream(seed, &[rng::label_tag("validation")]);
    let mut latent = Vec::new();
    let validation = (0..config.validation_size)
        .map(|_| {
            let mut z = Sample::default();
            draw_from(&sources, &index, false, &mut stream, &mut latent, &mut z);
            z
        })
        .collect();

    ProblemSuite::assemble(
        config.name.clone(),
        seed,
        sources,
        Some(conditional),
        validation,
        Some(alpha_star),
        loss,
        config.oracle.clone(),
    )
}
