//! Plain (unprojected) SGD, the step-size schedules, the high-probability
//! last-iterate bound, and the per-node budget formula.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::{
    Estimate, LossProblem, MixtureSampler, ProblemConstants, ProblemSuite, Sample, Sampler, TrainedModel,
    ValidationSampler,
};
use crate::rng::{self, Stream};
use crate::simplex::MixtureWeights;

/// Step-size rule. Steps are indexed from zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSchedule {
    /// `η_t = 2 / (μ (t + E))`.
    Theoretical { mu: f64, e: f64 },
    /// `η_t = eta`.
    Practical { eta: f64 },
}

impl StepSchedule {
    pub fn theoretical(mu: f64, e: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) || !(e > 0.0 && e.is_finite()) {
            return Err(Error::param(format!("theoretical schedule needs mu > 0 and E > 0, got {mu}, {e}")));
        }
        Ok(StepSchedule::Theoretical { mu, e })
    }

    pub fn practical(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::param(format!("step size must be positive, got {eta}")));
        }
        Ok(StepSchedule::Practical { eta })
    }

    pub fn step_size(&self, t: u64) -> f64 {
        match *self {
            StepSchedule::Theoretical { mu, e } => 2.0 / (mu * (t as f64 + e)),
            StepSchedule::Practical { eta } => eta,
        }
    }

    /// Every step multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        match *self {
            StepSchedule::Theoretical { mu, e } => Self::theoretical(mu / factor, e),
            StepSchedule::Practical { eta } => Self::practical(eta * factor),
        }
    }
}

/// Shorthand for [`StepSchedule::step_size`].
pub fn step_size(t: u64, schedule: &StepSchedule) -> f64 {
    schedule.step_size(t)
}

/// Schedule as written on the command line: `theoretical` or `practical:<eta>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScheduleSpec {
    Theoretical,
    Practical(f64),
}

impl ScheduleSpec {
    pub fn parse(text: &str) -> Result<Self> {
        if text == "theoretical" {
            return Ok(ScheduleSpec::Theoretical);
        }
        let eta = text
            .strip_prefix("practical:")
            .ok_or_else(|| Error::param(format!("schedule must be `theoretical` or `practical:<eta>`, got `{text}`")))?;
        let eta: f64 = eta
            .parse()
            .map_err(|_| Error::param(format!("bad step size `{eta}`")))?;
        StepSchedule::practical(eta)?;
        Ok(ScheduleSpec::Practical(eta))
    }

    /// The theoretical schedule takes `μ` from `constants` and `E` from
    /// [`compute_e`] at budget `lambda`.
    pub fn resolve(&self, constants: &ProblemConstants, lambda: f64) -> Result<StepSchedule> {
        match *self {
            ScheduleSpec::Theoretical => StepSchedule::theoretical(constants.mu, compute_e(constants.kappa, lambda)?),
            ScheduleSpec::Practical(eta) => StepSchedule::practical(eta),
        }
    }
}

impl std::fmt::Display for ScheduleSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScheduleSpec::Theoretical => f.write_str("theoretical"),
            ScheduleSpec::Practical(eta) => write!(f, "practical:{eta}"),
        }
    }
}

/// `E = 4096 κ² · 8 ln Λ`.
pub fn compute_e(kappa: f64, lambda: f64) -> Result<f64> {
    if !(kappa >= 1.0 && kappa.is_finite()) {
        return Err(Error::param(format!("kappa must be >= 1, got {kappa}")));
    }
    if !(lambda > 1.0 && lambda.is_finite()) {
        return Err(Error::param(format!("Lambda must exceed 1, got {lambda}")));
    }
    Ok(4096.0 * kappa * kappa * 8.0 * lambda.ln())
}

/// Which squared distances `‖w_t − w*‖²` to record.
#[derive(Clone, Copy, Debug, Default)]
pub enum TraceSpec<'a> {
    #[default]
    Off,
    /// Every `t` in `0..=T`.
    Full { w_star: &'a [f64] },
    /// Only the listed step indices (sorted, each `<= T`).
    At { w_star: &'a [f64], steps: &'a [u64] },
}

/// Recorded squared distances to the reference model.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub steps: Vec<u64>,
    pub dsq: Vec<f64>,
}

/// Result of one SGD run.
#[derive(Clone, Debug, PartialEq)]
pub struct SgdRun {
    pub model: TrainedModel,
    /// Steps taken in this run (the requested `T`).
    pub steps: u64,
    /// The initial iterate `w_0`.
    pub start: Vec<f64>,
    pub trace: Option<Trace>,
}

impl SgdRun {
    pub fn final_model(&self) -> &[f64] {
        self.model.weights()
    }
}

/// `T` steps of `w ← w − η_t ∇f(w; z_t)` with `z_t` from `sampler`.
///
/// `prior_steps` is the length of the warm-start chain that produced `w0`;
/// the returned model records `prior_steps + T`.
pub fn run_sgd_with<S: Sampler + ?Sized>(
    loss: &LossProblem,
    sampler: &mut S,
    w0: &[f64],
    t_steps: u64,
    schedule: &StepSchedule,
    stream: &mut Stream,
    trace: TraceSpec<'_>,
    prior_steps: u64,
) -> Result<SgdRun> {
    if t_steps == 0 {
        return Err(Error::param("SGD needs at least one step"));
    }
    if w0.len() != loss.model_dim() {
        return Err(Error::DimensionMismatch {
            expected: loss.model_dim(),
            got: w0.len(),
        });
    }
    let (w_star, checkpoints): (Option<&[f64]>, Option<&[u64]>) = match trace {
        TraceSpec::Off => (None, None),
        TraceSpec::Full { w_star } => (Some(w_star), None),
        TraceSpec::At { w_star, steps } => {
            if steps.windows(2).any(|p| p[0] >= p[1]) || steps.last().is_some_and(|&s| s > t_steps) {
                return Err(Error::param("trace checkpoints must be increasing and at most T"));
            }
            (Some(w_star), Some(steps))
        }
    };
    if let Some(ws) = w_star {
        if ws.len() != w0.len() {
            return Err(Error::DimensionMismatch {
                expected: w0.len(),
                got: ws.len(),
            });
        }
    }
    let mut rec = w_star.map(|_| Trace {
        steps: Vec::new(),
        dsq: Vec::new(),
    });
    let mut next_cp = 0usize;
    let mut record = |t: u64, w: &[f64], rec: &mut Option<Trace>| {
        let (Some(r), Some(ws)) = (rec.as_mut(), w_star) else {
            return;
        };
        let wanted = match checkpoints {
            None => true,
            Some(cps) => {
                if next_cp < cps.len() && cps[next_cp] == t {
                    next_cp += 1;
                    true
                } else {
                    false
                }
            }
        };
        if wanted {
            r.steps.push(t);
            r.dsq.push(linalg::dist2_sq(w, ws));
        }
    };

    let mut w = w0.to_vec();
    let mut grad = vec![0.0; w.len()];
    let mut z = Sample::default();
    record(0, &w, &mut rec);
    for t in 0..t_steps {
        sampler.draw_into(stream, &mut z);
        loss.grad_into(&w, &z, &mut grad);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { step: t });
        }
        let eta = schedule.step_size(t);
        for (wi, gi) in w.iter_mut().zip(&grad) {
            *wi -= eta * gi;
        }
        record(t + 1, &w, &mut rec);
    }
    Ok(SgdRun {
        model: TrainedModel::new(w, prior_steps + t_steps),
        steps: t_steps,
        start: w0.to_vec(),
        trace: rec,
    })
}

/// SGD on the `alpha` mixture from `w0`. With `w_star`, records the full
/// trace `‖w_t − w*‖²` for `t = 0..=T`.
pub fn run_sgd(
    suite: &ProblemSuite,
    alpha: &MixtureWeights,
    w0: &[f64],
    t_steps: u64,
    schedule: &StepSchedule,
    stream: &mut Stream,
    w_star: Option<&[f64]>,
) -> Result<SgdRun> {
    let mut sampler = MixtureSampler::new(suite, alpha)?;
    let trace = match w_star {
        Some(w_star) => TraceSpec::Full { w_star },
        None => TraceSpec::Off,
    };
    run_sgd_with(suite.loss(), &mut sampler, w0, t_steps, schedule, stream, trace, 0)
}

/// Continues training from an already trained model.
pub fn continue_sgd(
    suite: &ProblemSuite,
    alpha: &MixtureWeights,
    start: &TrainedModel,
    t_steps: u64,
    schedule: &StepSchedule,
    stream: &mut Stream,
) -> Result<SgdRun> {
    let mut sampler = MixtureSampler::new(suite, alpha)?;
    run_sgd_with(
        suite.loss(),
        &mut sampler,
        start.weights(),
        t_steps,
        schedule,
        stream,
        TraceSpec::Off,
        start.steps(),
    )
}

fn oracle_schedule(constants: &ProblemConstants) -> Result<StepSchedule> {
    StepSchedule::theoretical(constants.mu, 8.0 * constants.kappa)
}

fn averaged_runs<'a, F>(suite: &'a ProblemSuite, label: &str, mut make: F) -> Result<Estimate<Vec<f64>>>
where
    F: FnMut() -> Result<Box<dyn Sampler + 'a>>,
{
    let settings = suite.oracle_settings();
    let schedule = oracle_schedule(suite.constants())?;
    let seeds = settings.optimum_seeds.max(1);
    let w0 = vec![0.0; suite.model_dim()];
    let mut mean = vec![0.0; w0.len()];
    for i in 0..seeds {
        let mut stream = rng::derived_stream(suite.seed(), &[rng::label_tag(label), u64::from(i)]);
        let mut sampler = make()?;
        let run = run_sgd_with(
            suite.loss(),
            sampler.as_mut(),
            &w0,
            settings.optimum_steps.max(1),
            &schedule,
            &mut stream,
            TraceSpec::Off,
            0,
        )?;
        for (m, w) in mean.iter_mut().zip(run.final_model()) {
            *m += w / f64::from(seeds);
        }
    }
    Ok(Estimate {
        value: mean,
        exact: false,
        budget: settings.optimum_steps.max(1) * u64::from(seeds),
    })
}

/// Seed-averaged long SGD estimate of `w*(α)`. Draws are not charged to the
/// suite's training tally.
pub(crate) fn optimum_oracle(suite: &ProblemSuite, alpha: &MixtureWeights) -> Result<Estimate<Vec<f64>>> {
    averaged_runs(suite, "optimum", || Ok(Box::new(MixtureSampler::uncounted(suite, alpha)?)))
}

/// Seed-averaged long SGD estimate of the validation-loss minimizer.
pub(crate) fn validation_oracle(suite: &ProblemSuite) -> Result<Estimate<Vec<f64>>> {
    averaged_runs(suite, "validation-optimum", || Ok(Box::new(ValidationSampler::new(suite))))
}

/// Term-by-term high-probability bound on `‖w_t − w*‖²`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationBound {
    pub t: u64,
    pub lambda: f64,
    pub k: u32,
    pub e: f64,
    pub d: f64,
    pub term_g: f64,
    pub term_diameter: f64,
    pub term_martingale: f64,
    pub total: f64,
}

/// Worst-case growth of `max_s ‖w_s − w*‖` over the first `t` steps of the
/// theoretical schedule when nothing keeps the iterates bounded.
///
/// With `η_s = 2/(μ(s+E))`, `‖∇f(w)‖ ≤ β‖w − w*‖ + ‖∇f(w*)‖` gives
/// `r_{s+1} ≤ (1 + aη'_s) r_s + b η'_s` with `η'_s = 1/(s+E)`; the product
/// and sum are bounded by the exponential and log forms below.
pub fn default_diameter(d0: f64, constants: &ProblemConstants, e: f64, t: u64) -> f64 {
    let a = 2.0 * 2f64.sqrt() * constants.kappa.powf(1.5);
    let b = 2.0 * (2.0 * constants.gcal).sqrt() / constants.mu;
    let ratio = (t as f64 + e) / e;
    (d0 + b * (1.0 / e + ratio.ln())) * (a / e).exp() * ratio.powf(a)
}

/// The bound at step `t` for budget `lambda` and recursion depth `k`.
/// `d` defaults to [`default_diameter`].
pub fn concentration_bound(
    d0sq: f64,
    constants: &ProblemConstants,
    d: Option<f64>,
    t: u64,
    lambda: f64,
    k: u32,
) -> Result<ConcentrationBound> {
    if !(d0sq >= 0.0 && d0sq.is_finite()) {
        return Err(Error::param("d0^2 must be finite and nonnegative"));
    }
    if lambda < t as f64 + 1.0 {
        return Err(Error::param(format!("Lambda = {lambda} is below t + 1 = {}", t + 1)));
    }
    let e = compute_e(constants.kappa, lambda)?;
    let d = match d {
        Some(d) if d + 1e-12 < d0sq.sqrt() => {
            return Err(Error::param(format!("D = {d} is below d0 = {}", d0sq.sqrt())))
        }
        Some(d) => d,
        None => default_diameter(d0sq.sqrt(), constants, e, t),
    };
    let (mu, beta, gcal) = (constants.mu, constants.beta, constants.gcal);
    let tf = t as f64;
    let log_l8 = 8.0 * lambda.ln();

    let g = (e * d0sq).max(8.0 * gcal / (mu * mu));
    let term_g = g / (tf + e + 1.0);

    let c_tilde = d * (8.0 * beta * beta * d * d + 2.0 * gcal).sqrt();
    let term_diameter = 8.0 * (tf + 1.0) * c_tilde / (mu * (tf + 1.0 + e) * lambda.powi(7));

    let c_hat = c_hat(d0sq, constants, c_tilde, g, e, lambda, k);
    let alpha_next = 1.0 - 0.5f64.powi(k as i32 + 1);
    let term_martingale = 4.0 * (2.0 * log_l8).sqrt() * c_hat.sqrt() / (mu * (tf + e + 1.0).powf(alpha_next));

    Ok(ConcentrationBound {
        t,
        lambda,
        k,
        e,
        d,
        term_g,
        term_diameter,
        term_martingale,
        total: term_g + term_diameter + term_martingale,
    })
}

/// `Ĉ(k)` by the depth-`k` recursion starting from `Ĉ(0) = Č log Λ⁸`.
fn c_hat(d0sq: f64, constants: &ProblemConstants, c_tilde: f64, g: f64, e: f64, lambda: f64, k: u32) -> f64 {
    let (mu, beta, gcal) = (constants.mu, constants.beta, constants.gcal);
    let log_l8 = 8.0 * lambda.ln();
    let c1 = g + 8.0 * c_tilde / (mu * lambda.powi(6));
    let c2 = 4.0 * 2f64.sqrt() / mu;
    let v0 = 8.0 * d0sq * (4.0 * beta * beta * d0sq + gcal) / (1.0 + e);
    let check = [
        v0 / log_l8,
        (32.0 * 2f64.sqrt() * gcal / mu + (2.0 / e).min(1.0)).powi(2),
        (64.0 * beta * beta * c1 * c1 / ((1.0 + e) * log_l8) + 8.0 * gcal * c1 / log_l8).powi(2),
    ]
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max);
    let mut c_hat = check * log_l8;
    for j in 1..=k {
        let alpha = 1.0 - 0.5f64.powi(j as i32);
        let c = 64.0 * beta * beta * c1 * c1 / (e + 1.0).powf(2.0 - alpha)
            + 64.0 * c_hat * c2 * c2 / (mu * mu * (e + 1.0).powf(alpha))
            + 8.0 * gcal * c1 / (e + 1.0).powf(1.0 - alpha)
            + 8.0 * (gcal / mu) * c_hat.sqrt() * c2;
        c_hat = 2f64.powi(j as i32) * c + v0 * (1.0 + e) / (2.0 + e).powf(1.0 - alpha);
    }
    c_hat
}

/// Height-independent per-node SGD budget
/// `((4E + 64√2κK̂ + 16√(EK̂)/(√μΛ³) + 128κ√(log Λ⁸) + 16√(2E log Λ⁸)/√μ) / (ρ√(1+E)))² − E`.
pub fn budget_formula(rho: f64, e: f64, kappa: f64, khat: f64, mu: f64, lambda: f64) -> Result<f64> {
    if !(rho > 0.0 && rho <= 1.0) || !(e >= 0.0) || !(kappa >= 1.0) || !(khat >= 0.0) || !(mu > 0.0) {
        return Err(Error::param("budget formula inputs out of range"));
    }
    if !(lambda > 1.0) {
        return Err(Error::param(format!("Lambda must exceed 1, got {lambda}")));
    }
    Ok(budget_root(rho, e, kappa, khat, mu, lambda).powi(2) - e)
}

fn budget_root(rho: f64, e: f64, kappa: f64, khat: f64, mu: f64, lambda: f64) -> f64 {
    let log_l8 = 8.0 * lambda.ln();
    let inner = 4.0 * e
        + 64.0 * 2f64.sqrt() * kappa * khat
        + 16.0 * (e * khat).sqrt() / (mu.sqrt() * lambda.powi(3))
        + 128.0 * kappa * log_l8.sqrt()
        + 16.0 * (2.0 * e * log_l8).sqrt() / mu.sqrt();
    inner / (rho * (1.0 + e).sqrt())
}

/// [`budget_formula`] with `E = compute_e(κ, Λ)` and `ρ` from `constants`.
pub fn theoretical_budget(constants: &ProblemConstants, lambda: f64, khat: f64) -> Result<f64> {
    let e = compute_e(constants.kappa, lambda)?;
    budget_formula(constants.rho, e, constants.kappa, khat, constants.mu, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{Counting, SuiteConfig};

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn e_values() {
        assert!(close(compute_e(1.0, std::f64::consts::E).unwrap(), 32768.0, 1e-12));
        assert!(close(compute_e(2.0, std::f64::consts::E).unwrap(), 131072.0, 1e-12));
        assert!(compute_e(1.0, 1.0).is_err());
        assert!(compute_e(0.5, 10.0).is_err());
    }

    #[test]
    fn step_sizes() {
        let s = StepSchedule::theoretical(2.0, 2.0).unwrap();
        assert_eq!(step_size(0, &s), 0.5);
        let s = StepSchedule::theoretical(1.0, 2.0).unwrap();
        assert_eq!(step_size(2, &s), 0.5);
        for t in 0..100 {
            assert!(step_size(t + 1, &s) < step_size(t, &s));
        }
        assert_eq!(StepSchedule::practical(0.1).unwrap().step_size(7), 0.1);
        assert!(StepSchedule::practical(0.0).is_err());
        assert!(StepSchedule::theoretical(1.0, 0.0).is_err());
        let scaled = s.scaled(0.1).unwrap();
        assert!(close(scaled.step_size(3), 0.1 * s.step_size(3), 1e-15));
    }

    #[test]
    fn schedule_spec_parsing() {
        assert_eq!(ScheduleSpec::parse("theoretical").unwrap(), ScheduleSpec::Theoretical);
        assert_eq!(ScheduleSpec::parse("practical:0.05").unwrap(), ScheduleSpec::Practical(0.05));
        assert!(ScheduleSpec::parse("practical:-1").is_err());
        assert!(ScheduleSpec::parse("fast").is_err());
        assert_eq!(ScheduleSpec::Practical(0.05).to_string(), "practical:0.05");
    }

    #[test]
    fn one_step_by_hand() {
        let suite = SuiteConfig::zero_noise_scalar().build().unwrap();
        let schedule = StepSchedule::theoretical(1.0, 4.0).unwrap();
        let alpha = MixtureWeights::new(&[1.0]).unwrap();
        let run = run_sgd(&suite, &alpha, &[0.0], 1, &schedule, &mut rng::stream(0), Some(&[1.0])).unwrap();
        assert_eq!(run.final_model(), &[0.5]);
        assert_eq!(run.trace.unwrap().dsq, vec![1.0, 0.25]);
        assert_eq!(run.model.steps(), 1);
    }

    #[test]
    fn zero_steps_rejected() {
        let suite = SuiteConfig::zero_noise_scalar().build().unwrap();
        let alpha = MixtureWeights::new(&[1.0]).unwrap();
        let s = StepSchedule::practical(0.1).unwrap();
        assert!(run_sgd(&suite, &alpha, &[0.0], 0, &s, &mut rng::stream(0), None).is_err());
        assert!(run_sgd(&suite, &alpha, &[0.0, 0.0], 1, &s, &mut rng::stream(0), None).is_err());
    }

    #[test]
    fn deterministic_and_counted() {
        let suite = SuiteConfig::planar_quadratic().build().unwrap();
        let alpha = MixtureWeights::new(&[0.2, 0.3, 0.5]).unwrap();
        let s = StepSchedule::practical(0.05).unwrap();
        let a = run_sgd(&suite, &alpha, &[0.0, 0.0], 500, &s, &mut rng::stream(9), None).unwrap();
        let b = run_sgd(&suite, &alpha, &[0.0, 0.0], 500, &s, &mut rng::stream(9), None).unwrap();
        assert_eq!(a, b);
        assert_eq!(suite.training_draws(), 1000);
        let mut counting = Counting::new(MixtureSampler::new(&suite, &alpha).unwrap());
        run_sgd_with(suite.loss(), &mut counting, &[0.0, 0.0], 321, &s, &mut rng::stream(1), TraceSpec::Off, 0)
            .unwrap();
        assert_eq!(counting.count(), 321);
    }

    #[test]
    fn divergence_reports_step() {
        let suite = SuiteConfig::noisy_scalar().build().unwrap();
        let alpha = MixtureWeights::new(&[1.0]).unwrap();
        let s = StepSchedule::practical(1e155).unwrap();
        let err = run_sgd(&suite, &alpha, &[0.0], 100, &s, &mut rng::stream(3), None).unwrap_err();
        assert!(matches!(err, Error::Divergence { step } if step > 0 && step < 100));
    }

    #[test]
    fn checkpoint_trace_matches_full_trace() {
        let suite = SuiteConfig::noisy_scalar().build().unwrap();
        let alpha = MixtureWeights::new(&[1.0]).unwrap();
        let s = StepSchedule::theoretical(1.0, 10.0).unwrap();
        let full = run_sgd(&suite, &alpha, &[0.0], 100, &s, &mut rng::stream(4), Some(&[1.0])).unwrap();
        let mut sampler = MixtureSampler::new(&suite, &alpha).unwrap();
        let cps = [0, 10, 100];
        let part = run_sgd_with(
            suite.loss(),
            &mut sampler,
            &[0.0],
            100,
            &s,
            &mut rng::stream(4),
            TraceSpec::At { w_star: &[1.0], steps: &cps },
            0,
        )
        .unwrap();
        let full = full.trace.unwrap();
        let part = part.trace.unwrap();
        assert_eq!(full.dsq.len(), 101);
        assert_eq!(part.steps, cps.to_vec());
        for (i, &t) in cps.iter().enumerate() {
            assert_eq!(part.dsq[i], full.dsq[t as usize]);
        }
    }

    fn constants(gcal: f64) -> ProblemConstants {
        ProblemConstants::derive(2, 1.0, 1.0, 1.0, gcal, 1.0, true).unwrap()
    }

    #[test]
    fn bound_vanishes_without_noise_or_distance() {
        let b = concentration_bound(0.0, &constants(0.0), Some(0.0), 10, 100.0, 0).unwrap();
        assert_eq!(b.term_g, 0.0);
        assert_eq!(b.term_diameter, 0.0);
        assert!((b.total - b.term_g - b.term_diameter - b.term_martingale).abs() == 0.0);
    }

    #[test]
    fn bound_term_g_at_zero() {
        let c = constants(2.0);
        let b = concentration_bound(3.0, &c, None, 0, 1e4, 0).unwrap();
        let e = compute_e(1.0, 1e4).unwrap();
        assert!(close(b.term_g, (e * 3.0).max(16.0) / (1.0 + e), 1e-14));
        assert!(concentration_bound(3.0, &c, None, 10, 5.0, 0).is_err());
        assert!(concentration_bound(4.0, &c, Some(1.0), 0, 10.0, 0).is_err());
    }

    #[test]
    fn martingale_exponent_k0() {
        // With k = 0 the martingale term scales as (t + E + 1)^(-1/2).
        let c = constants(1.0);
        let lambda = 1e12;
        let e = compute_e(1.0, lambda).unwrap();
        let b1 = concentration_bound(1.0, &c, Some(5.0), 0, lambda, 0).unwrap();
        let b2 = concentration_bound(1.0, &c, Some(5.0), 1_000_000, lambda, 0).unwrap();
        let ratio = ((1_000_000.0 + e + 1.0) / (e + 1.0)).sqrt();
        assert!(close(b1.term_martingale / b2.term_martingale, ratio, 1e-12));
    }

    #[test]
    fn deeper_recursion_changes_exponent() {
        let c = constants(1.0);
        let b0 = concentration_bound(1.0, &c, Some(2.0), 1000, 1e6, 0).unwrap();
        let b2 = concentration_bound(1.0, &c, Some(2.0), 1000, 1e6, 2).unwrap();
        assert_eq!(b0.k, 0);
        assert_eq!(b2.k, 2);
        assert!(b2.term_martingale.is_finite() && b2.term_martingale > 0.0);
        assert_eq!(b0.term_g, b2.term_g);
    }

    #[test]
    fn bound_nonincreasing_beyond_e() {
        let c = constants(1.0);
        let lambda = 1e9;
        let e = compute_e(1.0, lambda).unwrap() as u64;
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let t = e + i * e / 5;
            let b = concentration_bound(1.0, &c, Some(3.0), t, lambda, 0).unwrap();
            assert!(b.total <= prev);
            prev = b.total;
        }
    }

    #[test]
    fn default_diameter_dominates_start() {
        let c = constants(1.0);
        let e = compute_e(1.0, 1e5).unwrap();
        assert!(default_diameter(2.0, &c, e, 0) >= 2.0);
        assert!(default_diameter(2.0, &c, e, 1000) >= default_diameter(2.0, &c, e, 10));
    }

    #[test]
    fn budget_limit_value() {
        let v = budget_formula(1.0, 1e-300, 1.0, 0.0, 1.0, std::f64::consts::E).unwrap();
        assert!(close(v, 131072.0, 1e-9));
    }

    #[test]
    fn budget_plus_e_is_a_square() {
        for &(rho, e, kappa, khat, mu, lambda) in &[
            (0.75, 1e3, 1.0, 0.5, 1.0, 1e4),
            (0.9, 5e5, 3.0, 2.0, 0.5, 1e6),
            (0.5, 10.0, 1.5, 0.0, 2.0, 50.0),
        ] {
            let v = budget_formula(rho, e, kappa, khat, mu, lambda).unwrap();
            let root = budget_root(rho, e, kappa, khat, mu, lambda);
            assert!(close(v + e, root * root, 1e-6));
        }
        let c = constants(1.0);
        let a = theoretical_budget(&c, 1e5, 1.0).unwrap();
        let e = compute_e(1.0, 1e5).unwrap();
        assert_eq!(a, budget_formula(c.rho, e, 1.0, 1.0, 1.0, 1e5).unwrap());
    }
}
