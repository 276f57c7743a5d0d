//! Training sources and the shared label mechanism.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::problems::Sample;

/// Label law shared by every source: `y = aᵀx + bᵀu + c + s·ε`, `ε ~ N(0,1)`.
///
/// Suites hand the same `Arc` to every source and to the validation
/// generator, so the conditional law of `y` given `(x, u)` cannot drift
/// between them.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearConditional {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: f64,
    pub noise_sd: f64,
}

impl LinearConditional {
    pub fn new(a: Vec<f64>, b: Vec<f64>, c: f64, noise_sd: f64) -> Result<Self> {
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(Error::InvalidSuite(format!("noise_sd must be finite and >= 0, got {noise_sd}")));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) || !c.is_finite() {
            return Err(Error::InvalidSuite("conditional coefficients must be finite".into()));
        }
        Ok(LinearConditional { a, b, c, noise_sd })
    }

    pub fn dim_x(&self) -> usize {
        self.a.len()
    }

    pub fn dim_u(&self) -> usize {
        self.b.len()
    }

    /// Noise-free part of the label.
    pub fn mean(&self, x: &[f64], u: &[f64]) -> f64 {
        linalg::dot(&self.a, x) + linalg::dot(&self.b, u) + self.c
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: &[f64], u: &[f64], rng: &mut R) -> f64 {
        let eps: f64 = rng.sample(StandardNormal);
        self.mean(x, u) + self.noise_sd * eps
    }

    /// Coefficients on the stacked vector `(x, u)`.
    pub(crate) fn stacked(&self) -> Vec<f64> {
        self.a.iter().chain(&self.b).copied().collect()
    }
}

/// A source whose `(x, u)` is jointly Gaussian.
#[derive(Clone, Debug)]
pub struct GaussianSource {
    mean: Vec<f64>,
    cov: Matrix,
    factor: Matrix,
    dim_x: usize,
    conditional: Arc<LinearConditional>,
}

impl GaussianSource {
    /// `mean` and `cov` describe the stacked vector `(x, u)`.
    pub fn new(mean: Vec<f64>, cov: Matrix, conditional: Arc<LinearConditional>) -> Result<Self> {
        let dim_x = conditional.dim_x();
        let n = dim_x + conditional.dim_u();
        if mean.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: mean.len(),
            });
        }
        if cov.len() != n || cov.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidSuite(format!("covariance must be {n}x{n}")));
        }
        if mean.iter().chain(cov.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSuite("source parameters must be finite".into()));
        }
        let factor = linalg::psd_factor(&cov, 1e-12).map_err(Error::InvalidSuite)?;
        Ok(GaussianSource {
            mean,
            cov,
            factor,
            dim_x,
            conditional,
        })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix {
        &self.cov
    }

    pub fn conditional(&self) -> &Arc<LinearConditional> {
        &self.conditional
    }

    /// Draws `(x, u)` into `latent` and the observed sample into `out`.
    pub(crate) fn fill<R: Rng + ?Sized>(&self, rng: &mut R, latent: &mut Vec<f64>, out: &mut Sample) {
        let n = self.mean.len();
        latent.clear();
        latent.extend((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        // In place z = m + L ε, bottom row first since L is lower triangular.
        for i in (0..n).rev() {
            let mut v = self.mean[i];
            for k in 0..=i {
                v += self.factor[i][k] * latent[k];
            }
            latent[i] = v;
        }
        let (x, u) = latent.split_at(self.dim_x);
        out.x.clear();
        out.x.extend_from_slice(x);
        out.y = self.conditional.sample(x, u, rng);
    }
}

/// A source backed by stored rows, sampled uniformly with replacement.
#[derive(Clone, Debug)]
pub struct FiniteSource {
    rows: Vec<Sample>,
}

impl FiniteSource {
    pub fn new(rows: Vec<Sample>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InvalidSuite("finite source has no rows".into()));
        };
        let d = first.x.len();
        if let Some(bad) = rows.iter().find(|r| r.x.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.x.len(),
            });
        }
        Ok(FiniteSource { rows })
    }

    pub fn rows(&self) -> &[Sample] {
        &self.rows
    }

    pub(crate) fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Sample) {
        let row = &self.rows[rng.random_range(0..self.rows.len())];
        out.x.clear();
        out.x.extend_from_slice(&row.x);
        out.y = row.y;
    }
}

/// One training source.
#[derive(Clone, Debug)]
pub enum Source {
    Gaussian(GaussianSource),
    Finite(FiniteSource),
}

impl Source {
    pub fn dim_x(&self) -> usize {
        match self {
            Source::Gaussian(g) => g.dim_x,
            Source::Finite(f) => f.rows[0].x.len(),
        }
    }

    pub(crate) fn fill<R: Rng + ?Sized>(&self, rng: &mut R, latent: &mut Vec<f64>, out: &mut Sample) {
        match self {
            Source::Gaussian(g) => g.fill(rng, latent, out),
            Source::Finite(f) => f.fill(rng, out),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn cond() -> Arc<LinearConditional> {
        Arc::new(LinearConditional::new(vec![1.0], vec![2.0], 0.5, 0.0).unwrap())
    }

    #[test]
    fn rejects_non_psd_covariance() {
        let err = GaussianSource::new(vec![0.0, 0.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]], cond());
        assert!(matches!(err, Err(Error::InvalidSuite(_))));
    }

    #[test]
    fn rejects_wrong_mean_length() {
        let err = GaussianSource::new(vec![0.0], vec![vec![1.0]], cond());
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn noiseless_label_follows_conditional() {
        let src = GaussianSource::new(vec![1.0, -1.0], vec![vec![1.0, 0.3], vec![0.3, 2.0]], cond()).unwrap();
        let mut r = rng::stream(1);
        let mut latent = Vec::new();
        let mut s = Sample::default();
        for _ in 0..100 {
            src.fill(&mut r, &mut latent, &mut s);
            let expected = latent[0] + 2.0 * latent[1] + 0.5;
            assert!((s.y - expected).abs() < 1e-12);
            assert_eq!(s.x, vec![latent[0]]);
        }
    }

    #[test]
    fn gaussian_moments() {
        let cov = vec![vec![2.0, 0.6], vec![0.6, 1.0]];
        let src = GaussianSource::new(vec![1.0, -2.0], cov.clone(), cond()).unwrap();
        let mut r = rng::stream(2);
        let mut latent = Vec::new();
        let mut s = Sample::default();
        let n = 200_000;
        let (mut m0, mut m1, mut c01) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            src.fill(&mut r, &mut latent, &mut s);
            m0 += latent[0];
            m1 += latent[1];
            c01 += (latent[0] - 1.0) * (latent[1] + 2.0);
        }
        let nf = n as f64;
        assert!((m0 / nf - 1.0).abs() < 0.02);
        assert!((m1 / nf + 2.0).abs() < 0.02);
        assert!((c01 / nf - 0.6).abs() < 0.03);
    }

    #[test]
    fn finite_source_rejects_empty_and_ragged() {
        assert!(FiniteSource::new(vec![]).is_err());
        let rows = vec![
            Sample { x: vec![1.0], y: 0.0 },
            Sample { x: vec![1.0, 2.0], y: 0.0 },
        ];
        assert!(FiniteSource::new(rows).is_err());
    }
}
