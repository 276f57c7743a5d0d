//! Sample streams feeding SGD.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::problems::{ProblemSuite, Sample, Source};
use crate::rng::Stream;
use crate::simplex::MixtureWeights;

/// Something SGD can pull samples from.
pub trait Sampler {
    fn draw_into(&mut self, stream: &mut Stream, out: &mut Sample);
}

pub(crate) fn source_index(alpha: &MixtureWeights) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(alpha.as_slice()).map_err(|e| Error::InvalidMixture(e.to_string()))
}

/// Draws a source index, then a sample from that source.
pub(crate) fn draw_from<R: Rng + ?Sized>(
    sources: &[Source],
    index: &WeightedIndex<f64>,
    binarize: bool,
    rng: &mut R,
    latent: &mut Vec<f64>,
    out: &mut Sample,
) {
    let i = index.sample(rng);
    sources[i].fill(rng, latent, out);
    if binarize {
        out.y = if out.y >= 0.0 { 1.0 } else { -1.0 };
    }
}

/// The training mixture oracle for one fixed `α`.
///
/// Draws are added to the suite's training tally when the sampler is
/// dropped, so the tally stays exact without per-draw contention.
pub struct MixtureSampler<'a> {
    suite: &'a ProblemSuite,
    index: WeightedIndex<f64>,
    latent: Vec<f64>,
    counted: bool,
    pending: u64,
}

impl<'a> MixtureSampler<'a> {
    pub fn new(suite: &'a ProblemSuite, alpha: &MixtureWeights) -> Result<Self> {
        let mut s = Self::uncounted(suite, alpha)?;
        s.counted = true;
        Ok(s)
    }

    /// A sampler whose draws do not count as training-oracle queries. Used
    /// by ground-truth oracles, never by the search or the baselines.
    pub(crate) fn uncounted(suite: &'a ProblemSuite, alpha: &MixtureWeights) -> Result<Self> {
        suite.check_alpha(alpha)?;
        Ok(MixtureSampler {
            suite,
            index: source_index(alpha)?,
            latent: Vec::new(),
            counted: false,
            pending: 0,
        })
    }
}

impl Sampler for MixtureSampler<'_> {
    fn draw_into(&mut self, stream: &mut Stream, out: &mut Sample) {
        draw_from(
            self.suite.sources(),
            &self.index,
            self.suite.binarize(),
            stream,
            &mut self.latent,
            out,
        );
        self.pending += 1;
    }
}

impl Drop for MixtureSampler<'_> {
    fn drop(&mut self) {
        if self.counted && self.pending > 0 {
            self.suite.record_draws(self.pending);
        }
    }
}

/// Uniform draws with replacement from the suite's validation set.
pub struct ValidationSampler<'a> {
    rows: &'a [Sample],
}

impl<'a> ValidationSampler<'a> {
    pub fn new(suite: &'a ProblemSuite) -> Self {
        ValidationSampler {
            rows: suite.validation(),
        }
    }
}

impl Sampler for ValidationSampler<'_> {
    fn draw_into(&mut self, stream: &mut Stream, out: &mut Sample) {
        let row = &self.rows[stream.random_range(0..self.rows.len())];
        out.x.clear();
        out.x.extend_from_slice(&row.x);
        out.y = row.y;
    }
}

/// Wraps a sampler and counts its draws.
pub struct Counting<S> {
    inner: S,
    count: u64,
}

impl<S: Sampler> Counting<S> {
    pub fn new(inner: S) -> Self {
        Counting { inner, count: 0 }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn into_inner(self) -> S {
        self.inner
    }
}

impl<S: Sampler> Sampler for Counting<S> {
    fn draw_into(&mut self, stream: &mut Stream, out: &mut Sample) {
        self.count += 1;
        self.inner.draw_into(stream, out);
    }
}

impl<S: Sampler + ?Sized> Sampler for &mut S {
    fn draw_into(&mut self, stream: &mut Stream, out: &mut Sample) {
        (**self).draw_into(stream, out);
    }
}
