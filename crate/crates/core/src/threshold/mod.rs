//! Locking probability under fluctuating initial conditions.
//!
//! Thermal or zero-point fluctuations set only the oscillator state at the
//! start of the chirp; each trajectory is then deterministic. A threshold
//! curve is therefore a Monte Carlo average of the trajectory classifier
//! over a Gaussian cloud of initial states.

mod deterministic;
mod fit;
mod sweep;

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{classify, ChirpProfile, Lock, OscState, Rk4};
use crate::error::{Error, Result};
use crate::units::DimensionlessParams;

pub use deterministic::{
    alpha_scaling, critical_epsilon, critical_epsilons, initial_with_mismatch, kappa_estimate,
    AlphaScaling, KappaCell, KappaEstimate, BISECTION_REL_TOL,
};
pub use fit::{fit_threshold, ThresholdFit, MIN_POINT_TRIALS};
pub use sweep::{
    predicted_width_eps, predicted_width_volts, probability_from_average, SweepRow,
    TemperatureSweep, DEVICE_KAPPA,
};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Samples exceeding this failure fraction abort an estimate.
pub const MAX_FAILURE_FRACTION: f64 = 1e-3;

/// Gaussian cloud of initial states. Each quadrature has variance
/// `variance_scale` in model units; 1 is the bath at the temperature used to
/// build the units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialDistribution {
    pub variance_scale: f64,
    pub seed: u64,
}

impl InitialDistribution {
    pub fn new(variance_scale: f64, seed: u64) -> Result<Self> {
        if !(variance_scale > 0.0 && variance_scale.is_finite()) {
            return Err(Error::invalid(
                "variance_scale",
                format!("must be finite and > 0, got {variance_scale}"),
            ));
        }
        Ok(InitialDistribution {
            variance_scale,
            seed,
        })
    }

    pub fn vacuum(seed: u64) -> Self {
        InitialDistribution {
            variance_scale: 1.0,
            seed,
        }
    }

    /// Bath at effective temperature `t_eff` plus injected white noise at
    /// `t_noise`, in units normalized to `t_ref`.
    pub fn from_temperatures(t_eff: f64, t_noise: f64, t_ref: f64, seed: u64) -> Result<Self> {
        Self::new((t_eff + t_noise) / t_ref, seed)
    }

    pub fn sigma(&self) -> f64 {
        self.variance_scale.sqrt()
    }

    /// Sample `k`, a pure function of `(seed, k)`: ChaCha8 keyed by the seed
    /// with `k` selecting the stream.
    pub fn sample(&self, k: u64, tau: f64) -> OscState {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k);
        let s = self.sigma();
        let q: f64 = StandardNormal.sample(&mut rng);
        let j: f64 = StandardNormal.sample(&mut rng);
        OscState::new(s * q, s * j, tau)
    }
}

/// One point of a locking-probability curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epsilon: f64,
    pub n_locked: u64,
    pub n_total: u64,
    /// Trajectories excluded after a numerical failure.
    pub n_failed: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl CurvePoint {
    pub fn new(epsilon: f64, n_locked: u64, n_total: u64) -> Self {
        let p_hat = if n_total == 0 {
            0.0
        } else {
            n_locked as f64 / n_total as f64
        };
        let (ci_lo, ci_hi) = wilson_interval(n_locked, n_total, Z95);
        CurvePoint {
            epsilon,
            n_locked,
            n_total,
            n_failed: 0,
            p_hat,
            ci_lo,
            ci_hi,
        }
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    wilson_p(k as f64 / n as f64, n, z)
}

pub(crate) fn wilson_p(p: f64, n: u64, z: f64) -> (f64, f64) {
    let n = n as f64;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = (center - half).clamp(0.0, 1.0).min(p);
    let hi = (center + half).clamp(0.0, 1.0).max(p);
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ThresholdCurve {
    pub entries: Vec<CurvePoint>,
    pub fit: Option<ThresholdFit>,
}

impl ThresholdCurve {
    pub const CSV_HEADER: &'static str = "epsilon,n_locked,n_total,p_hat,ci_lo,ci_hi";

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for e in &self.entries {
            writeln!(
                w,
                "{:e},{},{},{:e},{:e},{:e}",
                e.epsilon, e.n_locked, e.n_total, e.p_hat, e.ci_lo, e.ci_hi
            )?;
        }
        Ok(())
    }

    pub fn fitted(mut self) -> Result<Self> {
        self.fit = Some(fit_threshold(&self)?);
        Ok(self)
    }
}

/// Monte Carlo estimator of the locking probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    /// Model constants; the drive amplitude is supplied per estimate.
    pub model: DimensionlessParams,
    pub chirp: ChirpProfile,
    pub distribution: InitialDistribution,
    pub rk: Rk4,
    pub trajectories: usize,
}

/// Samples handed to a worker at once.
const WORK_ITEM: u64 = 64;

impl MonteCarlo {
    /// Default Monte Carlo step: the coarsest RK4 step accepted, whose
    /// classifications agree with the default step (see tests).
    pub fn default_rk() -> Rk4 {
        Rk4 {
            dtau: Rk4::MAX_DTAU,
            damping: 0.0,
        }
    }

    pub fn new(
        model: DimensionlessParams,
        chirp: ChirpProfile,
        distribution: InitialDistribution,
        trajectories: usize,
    ) -> Self {
        MonteCarlo {
            model,
            chirp,
            distribution,
            rk: Self::default_rk(),
            trajectories,
        }
    }

    /// Locking probability at drive `epsilon` from `trajectories` samples
    /// drawn from streams `[0, trajectories)`.
    pub fn locking_probability(&self, epsilon: f64) -> Result<CurvePoint> {
        self.estimate(epsilon, 0)
    }

    /// Locking probability on each point of a strictly increasing grid. Grid
    /// point `i` uses sample streams offset by `i · 2³²`, so points are
    /// statistically independent.
    pub fn threshold_scan(&self, grid: &[f64]) -> Result<ThresholdCurve> {
        if grid.len() < 6 {
            return Err(Error::invalid("grid", "needs at least 6 points"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("grid", "must be strictly increasing"));
        }
        let entries = grid
            .iter()
            .enumerate()
            .map(|(i, &e)| self.estimate(e, (i as u64) << 32))
            .collect::<Result<Vec<_>>>()?;
        Ok(ThresholdCurve { entries, fit: None })
    }

    fn estimate(&self, epsilon: f64, stream_offset: u64) -> Result<CurvePoint> {
        if self.trajectories == 0 {
            return Err(Error::invalid("trajectories", "must be >= 1"));
        }
        self.model.with_epsilon(epsilon).validate()?;
        self.rk.validate()?;
        let dp = self.model.with_epsilon(epsilon);
        let n = self.trajectories as u64;
        let items = n.div_ceil(WORK_ITEM);
        let (locked, failed) = (0..items)
            .into_par_iter()
            .map(|item| -> Result<(u64, u64)> {
                let lo = item * WORK_ITEM;
                let hi = (lo + WORK_ITEM).min(n);
                let starts: Vec<_> = (lo..hi)
                    .map(|k| {
                        self.distribution
                            .sample(stream_offset + k, self.chirp.tau_start)
                    })
                    .collect();
                let ends = self.rk.run_batch(&starts, self.chirp.tau_end, &dp, &self.chirp)?;
                let mut counts = (0, 0);
                for end in ends {
                    match end {
                        Ok(s) if classify(&s, &dp, &self.chirp) == Lock::Locked => counts.0 += 1,
                        Ok(_) => {}
                        Err(Error::NumericalBlowup { .. }) => counts.1 += 1,
                        Err(e) => return Err(e),
                    }
                }
                Ok(counts)
            })
            .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
        if failed as f64 > MAX_FAILURE_FRACTION * n as f64 {
            return Err(Error::TooManyFailures {
                epsilon,
                failed: failed as usize,
                total: n as usize,
            });
        }
        let mut point = CurvePoint::new(epsilon, locked, n - failed);
        point.n_failed = failed;
        Ok(point)
    }

    /// Scans `center ± half_width` and fits. If the fitted threshold is off
    /// centre or the curve is too wide for the window, the scan is repeated
    /// around the fit (or over twice the window when the curve never left
    /// 0 or 1), up to `attempts` scans in all.
    pub fn adaptive_fit(
        &self,
        center: f64,
        half_width: f64,
        points: usize,
        attempts: usize,
    ) -> Result<ThresholdCurve> {
        let (mut center, mut half) = (center, half_width);
        let mut last = Error::invalid("attempts", "must be >= 1");
        for _ in 0..attempts {
            let curve = self.threshold_scan(&Self::grid(center, half, points))?;
            match curve.fitted() {
                Ok(c) => {
                    let fit = c.fit.unwrap();
                    if (fit.epsilon_c - center).abs() < 0.5 * half && fit.s < 0.7 * half {
                        return Ok(c);
                    }
                    last = Error::InsufficientCoverage(format!(
                        "fit at {} not centred in scan {center} ± {half}",
                        fit.epsilon_c
                    ));
                    center = fit.epsilon_c;
                    half = half.max(3.0 * fit.s);
                }
                Err(e @ Error::InsufficientCoverage(_)) => {
                    half *= 2.0;
                    last = e;
                }
                Err(e) => return Err(e),
            }
        }
        Err(last)
    }

    /// Evenly spaced grid of `points` drives spanning `center ± half_width`.
    pub fn grid(center: f64, half_width: f64, points: usize) -> Vec<f64> {
        let step = 2.0 * half_width / (points - 1) as f64;
        (0..points)
            .map(|i| (center - half_width + i as f64 * step).max(0.0))
            .collect()
    }
}
