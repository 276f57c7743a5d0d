//! Monte Carlo checks of the smoothness inequality and the SGD
//! concentration bound on quadratic suites.

use rand::Rng;
use rayon::prelude::*;

use super::output::{fmt_f64, CsvTable};
use super::regret::quantile;
use crate::error::{Error, Result};
use crate::problems::{MixtureSampler, ProblemSuite};
use crate::rng::{self, Stream};
use crate::sgd::{self, ConcentrationBound, StepSchedule, TraceSpec};
use crate::simplex::MixtureWeights;

/// Header of the smoothness CSV.
pub const SMOOTHNESS_HEADER: [&str; 7] = ["pair", "alpha1_json", "alpha2_json", "w_dist", "w_bound", "g_diff", "g_bound"];
/// Header of the concentration CSV.
pub const CONCENTRATION_HEADER: [&str; 7] = [
    "t",
    "empirical_mean_dsq",
    "empirical_p99_dsq",
    "bound_term_G",
    "bound_term_diam",
    "bound_term_mart",
    "bound_total",
];

/// A mixture drawn uniformly from the simplex.
pub fn random_mixture(k: usize, stream: &mut Stream) -> MixtureWeights {
    let raw: Vec<f64> = (0..k).map(|_| -(1.0 - stream.random::<f64>()).ln()).collect();
    let s: f64 = raw.iter().sum();
    MixtureWeights::from_convex(raw.iter().map(|x| x / s).collect())
}

/// One checked pair.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothnessPair {
    pub alpha1: MixtureWeights,
    pub alpha2: MixtureWeights,
    /// `‖w*(α₁) − w*(α₂)‖₂`.
    pub w_dist: f64,
    /// `(2σ/μ)‖α₁ − α₂‖₁`.
    pub w_bound: f64,
    /// `|G(α₁) − G(α₂)|`.
    pub g_diff: f64,
    /// `L·‖w*(α₁) − w*(α₂)‖₂`.
    pub g_bound: f64,
}

/// Outcome of [`verify_smoothness`].
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothnessReport {
    pub pairs: Vec<SmoothnessPair>,
    pub model_violations: usize,
    pub value_violations: usize,
    /// Largest `w_dist / w_bound` (0 when both sides vanish).
    pub max_model_ratio: f64,
    /// Largest `g_diff / g_bound`.
    pub max_value_ratio: f64,
}

impl SmoothnessReport {
    pub fn passed(&self) -> bool {
        self.model_violations == 0 && self.value_violations == 0
    }

    pub fn table(&self) -> CsvTable {
        let mut t = CsvTable::new(&SMOOTHNESS_HEADER);
        for (i, p) in self.pairs.iter().enumerate() {
            t.push(vec![
                i.to_string(),
                p.alpha1.to_json(),
                p.alpha2.to_json(),
                fmt_f64(p.w_dist),
                fmt_f64(p.w_bound),
                fmt_f64(p.g_diff),
                fmt_f64(p.g_bound),
            ]);
        }
        t
    }
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else {
        lhs / rhs
    }
}

/// Checks `‖w*(α₁) − w*(α₂)‖ ≤ (2σ/μ)‖α₁ − α₂‖₁` and
/// `|G(α₁) − G(α₂)| ≤ L‖w*(α₁) − w*(α₂)‖` on uniformly random pairs.
pub fn verify_smoothness(suite: &ProblemSuite, pairs: usize, seed: u64) -> Result<SmoothnessReport> {
    if !suite.loss().is_quadratic() {
        return Err(Error::Unsupported("smoothness checks need closed-form optima".into()));
    }
    let c = suite.constants();
    let mut stream = rng::derived_stream(seed, &[rng::label_tag("smoothness")]);
    let mut report = SmoothnessReport {
        pairs: Vec::with_capacity(pairs),
        model_violations: 0,
        value_violations: 0,
        max_model_ratio: 0.0,
        max_value_ratio: 0.0,
    };
    for _ in 0..pairs {
        let a1 = random_mixture(suite.k(), &mut stream);
        let a2 = random_mixture(suite.k(), &mut stream);
        let w1 = suite.optimal_model(&a1)?.value;
        let w2 = suite.optimal_model(&a2)?.value;
        let w_dist = w1.iter().zip(&w2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let w_bound = 2.0 * c.sigma / c.mu * a1.l1_distance(&a2);
        let g_diff = (suite.test_loss(&w1)?.value - suite.test_loss(&w2)?.value).abs();
        let g_bound = c.lipschitz * w_dist;
        report.model_violations += usize::from(w_dist > w_bound);
        report.value_violations += usize::from(g_diff > g_bound);
        report.max_model_ratio = report.max_model_ratio.max(ratio(w_dist, w_bound));
        report.max_value_ratio = report.max_value_ratio.max(ratio(g_diff, g_bound));
        report.pairs.push(SmoothnessPair {
            alpha1: a1,
            alpha2: a2,
            w_dist,
            w_bound,
            g_diff,
            g_bound,
        });
    }
    Ok(report)
}

/// Settings of [`verify_concentration`].
#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationSettings {
    /// Steps per run, `T`.
    pub steps: u64,
    /// Budget `Λ` entering `E` and the bound; at least `T + 1`.
    pub lambda: f64,
    pub replicas: usize,
    /// Recursion depth of the bound.
    pub k: u32,
    pub seed: u64,
    /// Steps at which to record `d_t²`; every decade up to `T` when empty.
    pub checkpoints: Vec<u64>,
    /// Overrides the schedule's `E`. The bound assumes the default, so it is
    /// not reported when this is set.
    pub e_override: Option<f64>,
}

impl ConcentrationSettings {
    pub fn new(steps: u64, lambda: f64, replicas: usize, k: u32, seed: u64) -> Self {
        ConcentrationSettings {
            steps,
            lambda,
            replicas,
            k,
            seed,
            checkpoints: Vec::new(),
            e_override: None,
        }
    }
}

/// Statistics of `d_t²` at one checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointStats {
    pub t: u64,
    pub mean: f64,
    pub median: f64,
    pub p99: f64,
    pub bound: Option<ConcentrationBound>,
    /// Replicas with `d_t²` above the bound total.
    pub violations: usize,
    /// Violations tolerated: the failure probability `(t+1)/Λ⁸` plus three
    /// binomial standard deviations, in counts.
    pub allowed: usize,
}

/// Outcome of [`verify_concentration`].
#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationReport {
    pub alpha: MixtureWeights,
    pub d0sq: f64,
    pub e: f64,
    pub checkpoints: Vec<CheckpointStats>,
}

impl ConcentrationReport {
    pub fn passed(&self) -> bool {
        self.checkpoints.iter().all(|c| c.violations <= c.allowed)
    }

    /// Least-squares slope of `log median d_t²` against `log t` over the
    /// checkpoints in `[lo, hi]`.
    pub fn median_slope(&self, lo: u64, hi: u64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .checkpoints
            .iter()
            .filter(|c| c.t >= lo && c.t <= hi && c.t > 0 && c.median > 0.0)
            .map(|c| ((c.t as f64).ln(), c.median.ln()))
            .collect();
        log_log_slope(&pts)
    }

    pub fn table(&self) -> CsvTable {
        let mut t = CsvTable::new(&CONCENTRATION_HEADER);
        let opt = |b: &Option<ConcentrationBound>, f: fn(&ConcentrationBound) -> f64| {
            b.as_ref().map(|b| fmt_f64(f(b))).unwrap_or_default()
        };
        for c in &self.checkpoints {
            t.push(vec![
                c.t.to_string(),
                fmt_f64(c.mean),
                fmt_f64(c.p99),
                opt(&c.bound, |b| b.term_g),
                opt(&c.bound, |b| b.term_diameter),
                opt(&c.bound, |b| b.term_martingale),
                opt(&c.bound, |b| b.total),
            ]);
        }
        t
    }
}

/// Least-squares slope through `(x, y)` points; `None` below two points.
pub fn log_log_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Runs `replicas` traced SGD runs from the zero model on the true mixture
/// (uniform when unknown) with the theoretical schedule, and compares the
/// spread of `d_t² = ‖w_t − w*‖²` with the bound at each checkpoint.
pub fn verify_concentration(suite: &ProblemSuite, settings: &ConcentrationSettings) -> Result<ConcentrationReport> {
    if !suite.loss().is_quadratic() {
        return Err(Error::Unsupported("concentration checks need closed-form optima".into()));
    }
    if settings.lambda < settings.steps as f64 + 1.0 {
        return Err(Error::param(format!(
            "Lambda = {} is below T + 1 = {}",
            settings.lambda,
            settings.steps + 1
        )));
    }
    if settings.replicas == 0 {
        return Err(Error::param("at least one replica is needed"));
    }
    let c = suite.constants();
    let alpha = match suite.alpha_star() {
        Some(a) => a.clone(),
        None => MixtureWeights::uniform(suite.k())?,
    };
    let w_star = suite.optimal_model(&alpha)?.value;
    let w0 = vec![0.0; suite.model_dim()];
    let d0sq: f64 = w_star.iter().map(|x| x * x).sum();
    let e = match settings.e_override {
        Some(e) => e,
        None => sgd::compute_e(c.kappa, settings.lambda)?,
    };
    let schedule = StepSchedule::theoretical(c.mu, e)?;
    let mut checkpoints = settings.checkpoints.clone();
    if checkpoints.is_empty() {
        let mut t = 1;
        while t <= settings.steps {
            checkpoints.push(t);
            t *= 10;
        }
    }
    checkpoints.sort_unstable();
    checkpoints.dedup();
    if checkpoints.last().is_some_and(|&t| t > settings.steps) {
        return Err(Error::param("checkpoints must not exceed T"));
    }

    let traces: Vec<Vec<f64>> = (0..settings.replicas)
        .into_par_iter()
        .map(|r| {
            let mut stream = rng::derived_stream(settings.seed, &[rng::label_tag("concentration"), r as u64]);
            let mut sampler = MixtureSampler::new(suite, &alpha)?;
            let trace = TraceSpec::At {
                w_star: &w_star,
                steps: &checkpoints,
            };
            let run = sgd::run_sgd_with(suite.loss(), &mut sampler, &w0, settings.steps, &schedule, &mut stream, trace, 0)?;
            Ok(run.trace.expect("traced run").dsq)
        })
        .collect::<Result<_>>()?;

    let n = settings.replicas as f64;
    let mut stats = Vec::with_capacity(checkpoints.len());
    for (j, &t) in checkpoints.iter().enumerate() {
        let values: Vec<f64> = traces.iter().map(|tr| tr[j]).collect();
        let bound = match settings.e_override {
            Some(_) => None,
            None => Some(sgd::concentration_bound(d0sq, c, None, t, settings.lambda, settings.k)?),
        };
        let violations = bound.as_ref().map_or(0, |b| values.iter().filter(|&&v| v > b.total).count());
        let p = ((t as f64 + 1.0) / settings.lambda.powi(8)).min(1.0);
        let allowed = (n * p + 3.0 * (n * p * (1.0 - p)).sqrt()).floor() as usize;
        stats.push(CheckpointStats {
            t,
            mean: values.iter().sum::<f64>() / n,
            median: quantile(&values, 0.5).expect("replicas > 0"),
            p99: quantile(&values, 0.99).expect("replicas > 0"),
            bound,
            violations,
            allowed,
        });
    }
    Ok(ConcentrationReport {
        alpha,
        d0sq,
        e,
        checkpoints: stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::SuiteConfig;

    #[test]
    fn reflexive_pair_has_zero_ratio() {
        assert_eq!(ratio(0.0, 0.0), 0.0);
        assert_eq!(ratio(1.0, 4.0), 0.25);
    }

    #[test]
    fn scalar_vertex_pair() {
        let suite = SuiteConfig::scalar_quadratic().build().unwrap();
        let c = suite.constants();
        let e1 = MixtureWeights::vertex(2, 0).unwrap();
        let e2 = MixtureWeights::vertex(2, 1).unwrap();
        let w1 = suite.optimal_model(&e1).unwrap().value;
        let w2 = suite.optimal_model(&e2).unwrap().value;
        assert!(((w1[0] - w2[0]).abs() - 1.0).abs() < 1e-12);
        assert!(1.0 <= 4.0 * c.sigma / c.mu);
    }

    #[test]
    fn smoothness_holds_on_default_suites() {
        for config in [SuiteConfig::scalar_quadratic(), SuiteConfig::planar_quadratic(), SuiteConfig::latent_quadratic()] {
            let suite = config.build().unwrap();
            let r = verify_smoothness(&suite, 300, 5).unwrap();
            assert!(r.passed(), "{}: {:?}", suite.name(), (r.max_model_ratio, r.max_value_ratio));
            assert_eq!(r.table().rows.len(), 300);
        }
    }

    #[test]
    fn smoothness_rejects_logistic() {
        let suite = SuiteConfig::latent_logistic().build().unwrap();
        assert!(matches!(verify_smoothness(&suite, 1, 0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn zero_noise_trace_stays_below_bound() {
        let suite = SuiteConfig::zero_noise_scalar().build().unwrap();
        let mut s = ConcentrationSettings::new(10_000, 10_001.0, 3, 0, 2);
        s.checkpoints = vec![0, 10, 100, 1000, 10_000];
        let r = verify_concentration(&suite, &s).unwrap();
        assert!(r.passed());
        for c in &r.checkpoints {
            assert_eq!(c.violations, 0);
            assert_eq!(c.allowed, 0);
            assert!(c.p99 <= c.bound.as_ref().unwrap().total);
        }
        let b0 = r.checkpoints[0].bound.as_ref().unwrap();
        let expect = (b0.e * r.d0sq).max(0.0) / (1.0 + b0.e);
        assert!((b0.term_g - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn small_e_gives_inverse_t_rate() {
        let suite = SuiteConfig::noisy_scalar().build().unwrap();
        let mut s = ConcentrationSettings::new(20_000, 20_001.0, 200, 0, 9);
        s.checkpoints = vec![200, 500, 1000, 2000, 5000, 10_000, 20_000];
        s.e_override = Some(8.0);
        let r = verify_concentration(&suite, &s).unwrap();
        let slope = r.median_slope(200, 20_000).unwrap();
        assert!((-1.25..=-0.75).contains(&slope), "slope {slope}");
        assert!(r.checkpoints.iter().all(|c| c.bound.is_none()));
    }

    #[test]
    fn argument_checks() {
        let suite = SuiteConfig::noisy_scalar().build().unwrap();
        assert!(verify_concentration(&suite, &ConcentrationSettings::new(100, 50.0, 1, 0, 0)).is_err());
        assert!(verify_concentration(&suite, &ConcentrationSettings::new(100, 1000.0, 0, 0, 0)).is_err());
    }

    #[test]
    fn slope_of_a_power_law() {
        let pts: Vec<(f64, f64)> = [1.0f64, 10.0, 100.0].iter().map(|t| (t.ln(), (3.0 / t).ln())).collect();
        assert!((log_log_slope(&pts).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(log_log_slope(&pts[..1]), None);
    }
}
