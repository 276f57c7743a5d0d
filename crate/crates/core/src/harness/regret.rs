//! Simple regret `G(α) − min G` with `G(α) = F^te(w*(α))`, and the
//! summaries the experiment runner reports.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::problems::{Estimate, ProblemSuite};
use crate::simplex::MixtureWeights;

/// Grid resolution per coordinate used to seed the minimum search on
/// quadratic suites with `K ≤ 4`.
pub const QUADRATIC_GRID: u32 = 64;
/// Grid resolution used when every grid point costs a long SGD run.
pub const ESTIMATED_GRID: u32 = 4;
/// Target Frank-Wolfe gap for the polished quadratic minimum.
pub const POLISH_GAP: f64 = 1e-9;

/// `G` and its minimum over the simplex for one suite.
///
/// Quadratic suites get a closed-form `G`, a grid search, and projected
/// gradient polish certified by the Frank-Wolfe gap. Other suites evaluate
/// `G` through the long-SGD optimum oracle on a coarse grid.
#[derive(Debug)]
pub struct RegretOracle<'s> {
    suite: &'s ProblemSuite,
    argmin: MixtureWeights,
    min_value: f64,
    /// Upper bound on `G(argmin) − min G`.
    certified_error: f64,
    exact: bool,
    budget: u64,
    model_min: OnceLock<Result<Estimate<(Vec<f64>, f64)>, String>>,
}

impl<'s> RegretOracle<'s> {
    pub fn new(suite: &'s ProblemSuite) -> Result<Self> {
        if suite.loss().is_quadratic() {
            Self::quadratic(suite)
        } else {
            Self::estimated(suite, ESTIMATED_GRID)
        }
    }

    /// Oracle for a non-quadratic suite with grid step `1/resolution`.
    pub fn estimated(suite: &'s ProblemSuite, resolution: u32) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::param("grid resolution must be positive"));
        }
        let mut candidates = grid(suite.k(), resolution);
        if let Some(a) = suite.alpha_star() {
            candidates.push(a.clone());
        }
        let mut best: Option<(MixtureWeights, f64)> = None;
        let mut budget = 0;
        for alpha in candidates {
            let g = g_value(suite, &alpha)?;
            budget += g.budget;
            if best.as_ref().is_none_or(|(_, v)| g.value < *v) {
                best = Some((alpha, g.value));
            }
        }
        let (argmin, min_value) = best.expect("the grid is never empty");
        Ok(RegretOracle {
            suite,
            argmin,
            min_value,
            certified_error: f64::INFINITY,
            exact: false,
            budget,
            model_min: OnceLock::new(),
        })
    }

    fn quadratic(suite: &'s ProblemSuite) -> Result<Self> {
        let k = suite.k();
        let (target, _) = suite.test_optimum()?.value;
        let means: Vec<Vec<f64>> = (0..k)
            .map(|i| suite.mixture_mean(&MixtureWeights::vertex(k, i)?))
            .collect::<Result<_>>()?;
        // On the simplex m(α) − m_te = Σ αᵢ (Mᵢ − m_te).
        let shifted: Vec<Vec<f64>> = means
            .iter()
            .map(|m| m.iter().zip(&target).map(|(a, b)| a - b).collect())
            .collect();
        let objective = |alpha: &[f64]| 0.5 * norm_sq(&combine(&shifted, alpha));

        let start = if k <= 4 {
            grid(k, QUADRATIC_GRID)
                .into_iter()
                .map(MixtureWeights::into_vec)
                .min_by(|a, b| objective(a).total_cmp(&objective(b)))
                .expect("the grid is never empty")
        } else {
            (0..k)
                .map(|i| {
                    let mut e = vec![0.0; k];
                    e[i] = 1.0;
                    e
                })
                .chain(std::iter::once(vec![1.0 / k as f64; k]))
                .min_by(|a, b| objective(a).total_cmp(&objective(b)))
                .expect("K >= 1")
        };
        let (alpha, gap) = polish(&shifted, start);
        let argmin = MixtureWeights::from_convex(alpha);
        let min_value = g_value(suite, &argmin)?.value;
        Ok(RegretOracle {
            suite,
            argmin,
            min_value,
            certified_error: gap,
            exact: true,
            budget: 0,
            model_min: OnceLock::new(),
        })
    }

    pub fn suite(&self) -> &'s ProblemSuite {
        self.suite
    }

    /// The minimizing mixture found.
    pub fn argmin(&self) -> &MixtureWeights {
        &self.argmin
    }

    /// `min G` as found (an upper bound within [`Self::certified_error`]).
    pub fn min_value(&self) -> f64 {
        self.min_value
    }

    /// Bound on how far [`Self::min_value`] may sit above the true minimum;
    /// infinite for grid-only estimates.
    pub fn certified_error(&self) -> f64 {
        self.certified_error
    }

    /// `G(α) = F^te(w*(α))`.
    pub fn g(&self, alpha: &MixtureWeights) -> Result<Estimate<f64>> {
        g_value(self.suite, alpha)
    }

    /// `G(α) − min G`. Quadratic values are clamped at zero when they fall
    /// below it by no more than the certified error.
    pub fn simple_regret(&self, alpha: &MixtureWeights) -> Result<Estimate<f64>> {
        let g = self.g(alpha)?;
        let mut value = g.value - self.min_value;
        if self.exact && value < 0.0 && -value <= self.certified_error + 1e-12 {
            value = 0.0;
        }
        Ok(Estimate {
            value,
            exact: self.exact && g.exact,
            budget: self.budget + g.budget,
        })
    }

    /// `F^te(w) − min_w F^te(w)` for a trained model.
    pub fn model_regret(&self, w: &[f64]) -> Result<Estimate<f64>> {
        let min = self
            .model_min
            .get_or_init(|| self.suite.test_optimum().map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| Error::Unsupported(format!("test optimum unavailable: {e}")))?;
        let f = self.suite.test_loss(w)?;
        Ok(Estimate {
            value: f.value - min.value.1,
            exact: f.exact && min.exact,
            budget: f.budget + min.budget,
        })
    }
}

/// One-off [`RegretOracle::simple_regret`].
pub fn simple_regret(suite: &ProblemSuite, alpha: &MixtureWeights) -> Result<Estimate<f64>> {
    RegretOracle::new(suite)?.simple_regret(alpha)
}

fn g_value(suite: &ProblemSuite, alpha: &MixtureWeights) -> Result<Estimate<f64>> {
    let w = suite.optimal_model(alpha)?;
    let f = suite.test_loss(&w.value)?;
    Ok(Estimate {
        value: f.value,
        exact: w.exact && f.exact,
        budget: w.budget + f.budget,
    })
}

/// All mixtures whose coordinates are multiples of `1/resolution`.
pub fn grid(k: usize, resolution: u32) -> Vec<MixtureWeights> {
    let mut out = Vec::new();
    let mut counts = vec![0u32; k];
    fill_grid(&mut counts, 0, resolution, resolution, &mut out);
    out
}

fn fill_grid(counts: &mut [u32], i: usize, left: u32, total: u32, out: &mut Vec<MixtureWeights>) {
    if i + 1 == counts.len() {
        counts[i] = left;
        let v = counts.iter().map(|&c| f64::from(c) / f64::from(total)).collect();
        out.push(MixtureWeights::from_convex(v));
        return;
    }
    for c in 0..=left {
        counts[i] = c;
        fill_grid(counts, i + 1, left - c, total, out);
    }
}

fn combine(vectors: &[Vec<f64>], alpha: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; vectors[0].len()];
    for (v, a) in vectors.iter().zip(alpha) {
        for (o, x) in out.iter_mut().zip(v) {
            *o += a * x;
        }
    }
    out
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Gradient `Aᵀ(Aα)` of `½‖Aα‖²` and its Frank-Wolfe gap at `alpha`.
fn grad_and_gap(a: &[Vec<f64>], alpha: &[f64]) -> (Vec<f64>, f64) {
    let r = combine(a, alpha);
    let g: Vec<f64> = a.iter().map(|col| col.iter().zip(&r).map(|(x, y)| x * y).sum()).collect();
    let inner: f64 = g.iter().zip(alpha).map(|(x, y)| x * y).sum();
    let lowest = g.iter().copied().fold(f64::INFINITY, f64::min);
    (g, (inner - lowest).max(0.0))
}

/// Accelerated projected gradient on `½‖Aα‖²` over the simplex. Returns the
/// best iterate and its Frank-Wolfe gap, which bounds its suboptimality.
fn polish(a: &[Vec<f64>], start: Vec<f64>) -> (Vec<f64>, f64) {
    let lip: f64 = a.iter().map(|c| norm_sq(c)).sum::<f64>().max(1e-300);
    let (_, mut best_gap) = grad_and_gap(a, &start);
    let mut best = start.clone();
    let mut x = start.clone();
    let mut y = start;
    let mut t = 1.0f64;
    for _ in 0..200_000 {
        if best_gap <= POLISH_GAP {
            break;
        }
        let (g, _) = grad_and_gap(a, &y);
        let step: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| yi - gi / lip).collect();
        let next = project_simplex(&step);
        let (_, gap) = grad_and_gap(a, &next);
        if gap < best_gap {
            best_gap = gap;
            best = next.clone();
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = next
            .iter()
            .zip(&x)
            .map(|(n, o)| n + (t - 1.0) / t_next * (n - o))
            .collect();
        x = next;
        t = t_next;
    }
    (best, best_gap)
}

/// Euclidean projection onto the probability simplex.
pub(crate) fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cumulative += s;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if s - candidate > 0.0 {
            theta = candidate;
        }
    }
    let mut out: Vec<f64> = v.iter().map(|x| (x - theta).max(0.0)).collect();
    let sum: f64 = out.iter().sum();
    for o in &mut out {
        *o /= sum;
    }
    out
}

/// Median and quartiles with linear interpolation between order statistics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// `q`-quantile of `values` (ignoring NaN), interpolating linearly.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        Some(Quartiles {
            q1: quantile(values, 0.25)?,
            median: quantile(values, 0.5)?,
            q3: quantile(values, 0.75)?,
        })
    }
}

/// Regrets of one algorithm at one budget across replicas.
#[derive(Clone, Debug, PartialEq)]
pub struct RegretReport {
    pub algorithm: String,
    pub lambda: u64,
    /// SGD steps per node (`λ`) for tree searches.
    pub node_steps: Option<u64>,
    pub seeds: Vec<u64>,
    /// Simple regret per replica; NaN where undefined or failed.
    pub regrets: Vec<f64>,
    /// Model regret per replica; NaN where failed.
    pub model_regrets: Vec<f64>,
    pub heights: Vec<Option<u32>>,
    pub total_steps: Vec<u64>,
    /// `(seed, message)` for replicas that errored.
    pub failures: Vec<(u64, String)>,
}

impl RegretReport {
    pub fn regret_quartiles(&self) -> Option<Quartiles> {
        Quartiles::of(&self.regrets)
    }

    pub fn model_regret_quartiles(&self) -> Option<Quartiles> {
        Quartiles::of(&self.model_regrets)
    }

    pub fn median_height(&self) -> Option<f64> {
        let h: Vec<f64> = self.heights.iter().flatten().map(|&h| f64::from(h)).collect();
        quantile(&h, 0.5)
    }
}
