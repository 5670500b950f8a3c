//! Weighted least-squares fit of the error-function threshold model
//! `P(ε) = ½[1 + erf((ε − ε_c)/(√2 s))]`.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use super::{CurvePoint, ThresholdCurve, Z95};
use crate::error::{Error, Result};

/// Points with fewer trials are left out of the fit.
pub const MIN_POINT_TRIALS: u64 = 50;

const MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFit {
    /// Drive at which the model crosses P = ½.
    pub epsilon_c: f64,
    /// Gaussian width parameter of the model.
    pub s: f64,
    /// Inverse slope at P = ½, `s·√(2π)`.
    pub width: f64,
    pub epsilon_c_stderr: f64,
    pub s_stderr: f64,
    /// Weighted sum of squared residuals.
    pub residual: f64,
    pub points_used: usize,
    pub iterations: usize,
    /// The width collapsed below any resolvable scale (step-like data).
    pub degenerate: bool,
}

pub fn model(epsilon: f64, epsilon_c: f64, s: f64) -> f64 {
    0.5 * (1.0 + erf((epsilon - epsilon_c) / (std::f64::consts::SQRT_2 * s)))
}

struct Obs {
    eps: f64,
    p: f64,
    sqrt_w: f64,
}

pub fn fit_threshold(curve: &ThresholdCurve) -> Result<ThresholdFit> {
    let obs: Vec<Obs> = curve
        .entries
        .iter()
        .filter(|e| e.n_total >= MIN_POINT_TRIALS)
        .map(|e| Obs {
            eps: e.epsilon,
            p: e.p_hat,
            sqrt_w: 2.0 * Z95 / (e.ci_hi - e.ci_lo),
        })
        .collect();
    if obs.len() < 3 {
        return Err(Error::InsufficientCoverage(format!(
            "{} points with at least {MIN_POINT_TRIALS} trials",
            obs.len()
        )));
    }
    let lowest = obs.iter().map(|o| o.p).fold(f64::INFINITY, f64::min);
    let highest = obs.iter().map(|o| o.p).fold(f64::NEG_INFINITY, f64::max);
    if !(lowest < 0.2 && highest > 0.8) {
        return Err(Error::InsufficientCoverage(format!(
            "probabilities span only [{lowest:.3}, {highest:.3}], need < 0.2 and > 0.8"
        )));
    }

    let span = obs.last().unwrap().eps - obs[0].eps;
    let min_spacing = obs
        .windows(2)
        .map(|w| w[1].eps - w[0].eps)
        .fold(f64::INFINITY, f64::min);
    let mut ec = crossing(&curve.entries, 0.5).unwrap_or(obs[obs.len() / 2].eps);
    let spread = match (crossing(&curve.entries, 0.16), crossing(&curve.entries, 0.84)) {
        (Some(a), Some(b)) if b > a => 0.5 * (b - a),
        _ => 0.5 * min_spacing,
    };
    let mut u = spread.max(1e-6 * span).ln();
    let mut chi2 = chi_square(&obs, ec, u.exp());
    let mut lambda = 1e-3;
    let floor = 1e-9 * span;

    for iter in 1..=MAX_ITER {
        let (a, g) = normal_equations(&obs, ec, u.exp());
        let m = [
            [a[0][0] * (1.0 + lambda), a[0][1]],
            [a[1][0], a[1][1] * (1.0 + lambda)],
        ];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let (d_ec, d_u) = if det.abs() > 0.0 && det.is_finite() {
            (
                -(m[1][1] * g[0] - m[0][1] * g[1]) / det,
                -(m[0][0] * g[1] - m[1][0] * g[0]) / det,
            )
        } else {
            (0.0, -1.0)
        };
        let trial = chi_square(&obs, ec + d_ec, (u + d_u).exp());
        if trial <= chi2 {
            let small = d_ec.abs() <= 1e-15 * ec.abs().max(u.exp()) && d_u.abs() <= 1e-13;
            let stalled = chi2 - trial <= 1e-15 * chi2.max(1e-300) && small;
            ec += d_ec;
            u += d_u;
            chi2 = trial;
            lambda = (lambda / 10.0).max(1e-12);
            if u.exp() < floor {
                return Ok(finish(&obs, ec, u.exp(), chi2, iter, true));
            }
            if small || stalled || chi2 == 0.0 {
                return Ok(finish(&obs, ec, u.exp(), chi2, iter, false));
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e14 {
                // No downhill direction left: a minimum to working precision.
                return Ok(finish(&obs, ec, u.exp(), chi2, iter, u.exp() < floor));
            }
        }
    }
    Err(Error::FitFailure {
        iterations: MAX_ITER,
        residual: chi2,
    })
}

fn finish(obs: &[Obs], ec: f64, s: f64, chi2: f64, iterations: usize, degenerate: bool) -> ThresholdFit {
    let (a, _) = normal_equations(obs, ec, s);
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let (se_ec, se_u) = if det > 0.0 && det.is_finite() {
        ((a[1][1] / det).sqrt(), (a[0][0] / det).sqrt())
    } else {
        (f64::NAN, f64::NAN)
    };
    ThresholdFit {
        epsilon_c: ec,
        s,
        width: s * (2.0 * std::f64::consts::PI).sqrt(),
        epsilon_c_stderr: se_ec,
        s_stderr: s * se_u,
        residual: chi2,
        points_used: obs.len(),
        iterations,
        degenerate,
    }
}

fn chi_square(obs: &[Obs], ec: f64, s: f64) -> f64 {
    obs.iter()
        .map(|o| {
            let r = o.sqrt_w * (model(o.eps, ec, s) - o.p);
            r * r
        })
        .sum()
}

/// `JᵀJ` and `Jᵀr` in the parameters `(ε_c, ln s)`.
fn normal_equations(obs: &[Obs], ec: f64, s: f64) -> ([[f64; 2]; 2], [f64; 2]) {
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let mut a = [[0.0; 2]; 2];
    let mut g = [0.0; 2];
    for o in obs {
        let z = (o.eps - ec) / s;
        let pdf = norm * (-0.5 * z * z).exp();
        let r = o.sqrt_w * (model(o.eps, ec, s) - o.p);
        let j0 = -o.sqrt_w * pdf / s;
        let j1 = -o.sqrt_w * pdf * z;
        a[0][0] += j0 * j0;
        a[0][1] += j0 * j1;
        a[1][1] += j1 * j1;
        g[0] += j0 * r;
        g[1] += j1 * r;
    }
    a[1][0] = a[0][1];
    (a, g)
}

/// Linear interpolation of the first upward crossing of `level`.
fn crossing(entries: &[CurvePoint], level: f64) -> Option<f64> {
    entries.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        (a.p_hat < level && b.p_hat >= level)
            .then(|| a.epsilon + (level - a.p_hat) / (b.p_hat - a.p_hat) * (b.epsilon - a.epsilon))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::threshold::wilson_p;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Binomial, Distribution};

    fn point(eps: f64, p: f64, n: u64) -> CurvePoint {
        let (ci_lo, ci_hi) = wilson_p(p, n, Z95);
        CurvePoint {
            epsilon: eps,
            n_locked: (p * n as f64).round() as u64,
            n_total: n,
            n_failed: 0,
            p_hat: p,
            ci_lo,
            ci_hi,
        }
    }

    fn grid() -> Vec<f64> {
        (0..13).map(|i| 0.017 + 0.0005 * i as f64).collect()
    }

    #[test]
    fn recovers_exact_model() {
        let entries = grid()
            .into_iter()
            .map(|e| point(e, model(e, 0.02, 0.001), 5000))
            .collect();
        let fit = fit_threshold(&ThresholdCurve { entries, fit: None }).unwrap();
        assert!((fit.epsilon_c - 0.02).abs() < 1e-10, "{fit:?}");
        assert!((fit.s - 0.001).abs() < 1e-10, "{fit:?}");
        assert!(!fit.degenerate);
        let slope = 1.0 / fit.width;
        let numeric = (model(0.02 + 1e-7, fit.epsilon_c, fit.s) - model(0.02 - 1e-7, fit.epsilon_c, fit.s)) / 2e-7;
        assert!((slope / numeric - 1.0).abs() < 1e-6);
    }

    #[test]
    fn binomial_noise_within_three_standard_errors() {
        let seeds = 40;
        let mut inside = 0;
        for seed in 0..seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let entries = grid()
                .into_iter()
                .map(|e| {
                    let n = 5000;
                    let k = Binomial::new(n, model(e, 0.02, 0.001)).unwrap().sample(&mut rng);
                    CurvePoint::new(e, k, n)
                })
                .collect();
            let fit = fit_threshold(&ThresholdCurve { entries, fit: None }).unwrap();
            if (fit.epsilon_c - 0.02).abs() < 3.0 * fit.epsilon_c_stderr {
                inside += 1;
            }
        }
        assert!(inside as f64 >= 0.95 * seeds as f64, "{inside}/{seeds}");
    }

    #[test]
    fn step_data_collapses_width() {
        let g = grid();
        let entries = g
            .iter()
            .map(|&e| point(e, if e < 0.0201 { 0.0 } else { 1.0 }, 2000))
            .collect();
        let fit = fit_threshold(&ThresholdCurve { entries, fit: None }).unwrap();
        assert!(fit.width < 0.0005, "{fit:?}");
        assert!(fit.epsilon_c > 0.02 && fit.epsilon_c < 0.0205);
    }

    #[test]
    fn rejects_curves_missing_a_side() {
        let entries = grid()
            .into_iter()
            .map(|e| point(e, 0.1 * model(e, 0.02, 0.001), 5000))
            .collect();
        assert!(matches!(
            fit_threshold(&ThresholdCurve { entries, fit: None }),
            Err(Error::InsufficientCoverage(_))
        ));
        // Sparse points are dropped before the coverage check.
        let entries = grid()
            .into_iter()
            .map(|e| point(e, model(e, 0.02, 0.001), 10))
            .collect();
        assert!(fit_threshold(&ThresholdCurve { entries, fit: None }).is_err());
    }
}
