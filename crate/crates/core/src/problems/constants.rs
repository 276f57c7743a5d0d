//! Curvature, noise, and smoothness constants of a suite.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::{LossKind, Moments, ProblemSuite, Source};

/// Constants the search and the SGD bound consume.
///
/// `nu2` and `rho2` control how fast the search trusts deeper cells: a cell
/// at height `h` gets the optimism bonus `2·nu2·rho2^h`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProblemConstants {
    /// Strong convexity of the averaged loss.
    pub mu: f64,
    /// Smoothness of the per-sample loss.
    pub beta: f64,
    /// Lipschitz constant of the test loss over the working region.
    pub lipschitz: f64,
    /// Bound on `E‖∇f(w*(α); z)‖²` over all mixtures.
    pub gcal: f64,
    pub kappa: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub rho: f64,
    pub rho2: f64,
    pub sigma: f64,
    /// Diameter of the set of mixture optima `{w*(α)}`.
    pub region_diameter: f64,
    /// True when every constant is a closed-form certificate rather than a
    /// conservative estimate.
    pub exact: bool,
}

impl ProblemConstants {
    /// Fills in `kappa`, `sigma`, `nu1`, `nu2`, `rho`, `rho2` from the base
    /// constants for a simplex with `k` vertices.
    pub fn derive(
        k: usize,
        mu: f64,
        beta: f64,
        lipschitz: f64,
        gcal: f64,
        region_diameter: f64,
        exact: bool,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("K must be at least 1"));
        }
        if !(mu > 0.0 && mu.is_finite()) || !(beta >= mu && beta.is_finite()) {
            return Err(Error::param(format!("need 0 < mu <= beta, got mu={mu}, beta={beta}")));
        }
        if !(lipschitz >= 0.0 && gcal >= 0.0 && region_diameter >= 0.0) {
            return Err(Error::param("L, G and the region diameter must be nonnegative"));
        }
        let kf = k as f64;
        let sigma = (beta * beta * region_diameter * region_diameter + gcal).sqrt();
        let nu1 = (4.0 * sigma * (2.0 * kf).sqrt() / (3f64.sqrt() * mu)).powi(2);
        // A single-source simplex is never split, so the decay rate is moot;
        // K - 1 is floored at one to keep rho inside (0, 1).
        let rho = (3f64.sqrt() / 2.0).powf(2.0 / (kf - 1.0).max(1.0));
        Ok(ProblemConstants {
            mu,
            beta,
            lipschitz,
            gcal,
            kappa: beta / mu,
            nu1,
            nu2: lipschitz * nu1.sqrt(),
            rho,
            rho2: rho.sqrt(),
            sigma,
            region_diameter,
            exact,
        })
    }

    pub(crate) fn placeholder() -> Self {
        ProblemConstants {
            mu: 1.0,
            beta: 1.0,
            lipschitz: 0.0,
            gcal: 0.0,
            kappa: 1.0,
            nu1: 0.0,
            nu2: 0.0,
            rho: 0.75,
            rho2: 0.75f64.sqrt(),
            sigma: 0.0,
            region_diameter: 0.0,
            exact: false,
        }
    }

    /// `(name, value)` pairs in manifest order.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("mu", self.mu),
            ("beta", self.beta),
            ("L", self.lipschitz),
            ("G", self.gcal),
            ("kappa", self.kappa),
            ("sigma", self.sigma),
            ("nu1", self.nu1),
            ("nu2", self.nu2),
            ("rho", self.rho),
            ("rho2", self.rho2),
        ]
    }
}

pub(crate) fn compute(suite: &ProblemSuite) -> Result<ProblemConstants> {
    match suite.loss().kind() {
        LossKind::Quadratic { .. } => quadratic(suite),
        LossKind::RidgeLogistic { lambda } => logistic(suite, lambda),
    }
}

fn quadratic(suite: &ProblemSuite) -> Result<ProblemConstants> {
    let parts = suite.source_moments().expect("quadratic suites carry moments");
    let gcal = max_trace_cov(parts);
    let means: Vec<&[f64]> = parts.iter().map(|p| p.mean.as_slice()).collect();
    let region_diameter = diameter(&means);
    let origin = vec![0.0; suite.model_dim()];
    let mut points = means.clone();
    points.push(&origin);
    if let Some(v) = suite.validation_moments() {
        points.push(&v.mean);
    }
    if let Some(t) = suite.test_moments() {
        points.push(&t.mean);
    }
    let lipschitz = diameter(&points) + gcal.sqrt();
    ProblemConstants::derive(suite.k(), 1.0, 1.0, lipschitz, gcal, region_diameter, true)
}

fn logistic(suite: &ProblemSuite, lambda: f64) -> Result<ProblemConstants> {
    let mut radius = suite
        .validation()
        .iter()
        .map(|z| linalg::norm2_sq(&z.x).sqrt())
        .fold(0.0, f64::max);
    for s in suite.sources() {
        let r = match s {
            Source::Finite(f) => f.rows().iter().map(|z| linalg::norm2_sq(&z.x).sqrt()).fold(0.0, f64::max),
            Source::Gaussian(g) => {
                let dx = g.conditional().dim_x();
                let spread: f64 = (0..dx).map(|i| g.cov()[i][i]).sum();
                linalg::norm2_sq(&g.mean()[..dx]).sqrt() + 6.0 * spread.sqrt()
            }
        };
        radius = radius.max(r);
    }
    // λ/2 ‖w*‖² <= F(w*) <= F(0) = ln 2.
    let w_radius = (2.0 * std::f64::consts::LN_2 / lambda).sqrt();
    let lipschitz = radius + lambda * w_radius;
    let beta = radius * radius / 4.0 + lambda;
    ProblemConstants::derive(
        suite.k(),
        lambda,
        beta,
        lipschitz,
        lipschitz * lipschitz,
        2.0 * w_radius,
        false,
    )
}

fn diameter(points: &[&[f64]]) -> f64 {
    let mut best = 0.0_f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max(linalg::dist2_sq(a, b));
        }
    }
    best.sqrt()
}

/// Certified upper bound on `max_α tr Cov_α`.
///
/// `tr Cov_α = Σ αᵢ Sᵢ − ‖Σ αᵢ Mᵢ‖²` is concave in `α`, so Frank-Wolfe with
/// exact line search converges, and value plus duality gap bounds the
/// maximum from above at every iterate.
pub(crate) fn max_trace_cov(parts: &[Moments]) -> f64 {
    let k = parts.len();
    let value = |alpha: &[f64]| Moments::mix(parts, alpha).trace_cov();
    let mut alpha = vec![0.0; k];
    let start = (0..k)
        .max_by(|&i, &j| parts[i].trace_cov().total_cmp(&parts[j].trace_cov()))
        .unwrap();
    alpha[start] = 1.0;
    let scale = parts.iter().map(|p| p.second.abs()).fold(1.0, f64::max);
    let mut upper = f64::INFINITY;
    for _ in 0..10_000 {
        let mixed = Moments::mix(parts, &alpha);
        let h = mixed.trace_cov();
        let grad: Vec<f64> = parts
            .iter()
            .map(|p| p.second - 2.0 * linalg::dot(&p.mean, &mixed.mean))
            .collect();
        let at: f64 = grad.iter().zip(&alpha).map(|(g, a)| g * a).sum();
        let s = (0..k).max_by(|&i, &j| grad[i].total_cmp(&grad[j])).unwrap();
        let gap = (grad[s] - at).max(0.0);
        upper = upper.min(h + gap);
        if gap <= 1e-13 * scale {
            break;
        }
        let curvature = linalg::dist2_sq(&parts[s].mean, &mixed.mean);
        let step = if curvature > 0.0 {
            (gap / (2.0 * curvature)).min(1.0)
        } else {
            1.0
        };
        for (i, a) in alpha.iter_mut().enumerate() {
            *a = (1.0 - step) * *a + if i == s { step } else { 0.0 };
        }
    }
    upper.max(value(&alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(mean: Vec<f64>, var: f64) -> Moments {
        let second = var + linalg::norm2_sq(&mean);
        Moments { mean, second }
    }

    #[test]
    fn max_trace_cov_two_scalars() {
        // Means 0 and 1, unit variances: tr Cov_a = 1 + a(1-a), max 1.25 at a = 1/2.
        let g = max_trace_cov(&[m(vec![0.0], 1.0), m(vec![1.0], 1.0)]);
        assert!((g - 1.25).abs() < 1e-10, "{g}");
        assert!(g >= 1.25 - 1e-15);
    }

    #[test]
    fn max_trace_cov_is_an_upper_bound_on_a_grid() {
        let parts = [
            m(vec![0.0, 0.0], 0.3),
            m(vec![2.0, 0.0], 1.0),
            m(vec![0.0, 1.5], 0.1),
        ];
        let g = max_trace_cov(&parts);
        let mut best = 0.0f64;
        let n = 200;
        for i in 0..=n {
            for j in 0..=n - i {
                let a = [i as f64 / n as f64, j as f64 / n as f64, (n - i - j) as f64 / n as f64];
                best = best.max(Moments::mix(&parts, &a).trace_cov());
            }
        }
        assert!(g >= best - 1e-12);
        assert!(g - best < 1e-3);
    }

    #[test]
    fn derive_relations() {
        let c = ProblemConstants::derive(2, 1.0, 1.0, 2.0, 1.25, 1.0, true).unwrap();
        assert!((c.rho - 0.75).abs() < 1e-15);
        assert_eq!(c.nu2, c.lipschitz * c.nu1.sqrt());
        assert_eq!(c.rho2, c.rho.sqrt());
        assert!((c.sigma - 1.5).abs() < 1e-12);
        let single = ProblemConstants::derive(1, 1.0, 1.0, 1.0, 1.0, 0.0, true).unwrap();
        assert!(single.rho > 0.0 && single.rho < 1.0);
        assert!(ProblemConstants::derive(2, 0.0, 1.0, 1.0, 1.0, 0.0, true).is_err());
        assert!(ProblemConstants::derive(2, 2.0, 1.0, 1.0, 1.0, 0.0, true).is_err());
    }
}
