//! Threshold width against bath temperature and injected noise.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{critical_epsilon, InitialDistribution, MonteCarlo, ThresholdFit};
use crate::dynamics::{ChirpProfile, OscState, Rk4};
use crate::error::{Error, Result};
use crate::units::{
    effective_temperature, normalization, voltage_unit, DimensionlessParams, PhysicalParams,
    BOLTZMANN,
};

/// Shift prefactor quoted for the measured device.
pub const DEVICE_KAPPA: f64 = 0.245;

/// `ΔV_c = 2κ√(2π L α k_B T_eff)` in volts.
pub fn predicted_width_volts(p: &PhysicalParams, kappa: f64) -> Result<f64> {
    p.validate()?;
    check_kappa(kappa)?;
    let t_eff = effective_temperature(p.temperature, p.omega)?;
    Ok(2.0 * kappa * (2.0 * PI * p.inductance * p.chirp_rate * BOLTZMANN * t_eff).sqrt())
}

/// Dimensionless width `2κ√(2πα̃)·σ` for initial quadrature spread `sigma`.
pub fn predicted_width_eps(dp: &DimensionlessParams, sigma: f64, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("sigma", "must be finite and >= 0"));
    }
    if !(dp.alpha_tilde > 0.0) {
        return Err(Error::invalid("alpha_tilde", "must be > 0"));
    }
    Ok(2.0 * kappa * (2.0 * PI * dp.alpha_tilde).sqrt() * sigma)
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("kappa", format!("must be finite and > 0, got {kappa}")))
    }
}

/// Locking probability from a time-averaged output voltage `v_bar`, given
/// the averages `v_l` of never-locking and `v_h` of always-locking sweeps.
pub fn probability_from_average(v_bar: f64, v_l: f64, v_h: f64) -> Result<f64> {
    if !(v_h > v_l) {
        return Err(Error::invalid("v_h", format!("must exceed v_l ({v_h} <= {v_l})")));
    }
    Ok(((v_bar - v_l) / (v_h - v_l)).clamp(0.0, 1.0))
}

/// Monte Carlo threshold widths across bath temperatures.
///
/// Trajectories run at the fixed model constants `model`; temperature only
/// sets the variance of the initial cloud, in units of the zero-point
/// temperature `ħω/2k_B` of `circuit`. Widths are carried to the circuit's
/// chirp rate with the `√α̃` law and converted to volts with the zero-point
/// voltage unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSweep {
    pub circuit: PhysicalParams,
    pub model: DimensionlessParams,
    pub chirp: ChirpProfile,
    pub rk: Rk4,
    pub trajectories: usize,
    /// Drives per threshold scan.
    pub points: usize,
    /// Prefactor used to scale width² to kelvin.
    pub kappa: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Bath temperature, kelvin.
    pub temperature: f64,
    /// Injected noise temperature, kelvin.
    pub noise_temperature: f64,
    pub t_eff: f64,
    pub variance_scale: f64,
    pub epsilon_c: f64,
    /// Width in model units at the simulated chirp rate.
    pub width_eps: f64,
    pub width_eps_stderr: f64,
    /// Width at the circuit's chirp rate, volts.
    pub width_volts: f64,
    /// `width_volts² / (8κ²π L α k_B)`, kelvin.
    pub scaled_width_sq: f64,
    pub fit: ThresholdFit,
}

impl TemperatureSweep {
    /// Formula behind [`SweepRow::scaled_width_sq`].
    pub const SCALE_EXPRESSION: &'static str =
        "width_volts^2 / (8 * kappa^2 * pi * inductance * chirp_rate * k_B)";

    const ATTEMPTS: usize = 4;

    pub fn validate(&self) -> Result<()> {
        self.circuit.validate()?;
        check_kappa(self.kappa)?;
        self.rk.validate()?;
        if self.points < 6 {
            return Err(Error::invalid("points", "needs at least 6"));
        }
        if self.trajectories == 0 {
            return Err(Error::invalid("trajectories", "must be >= 1"));
        }
        Ok(())
    }

    /// Temperature of unit initial variance.
    pub fn reference_temperature(&self) -> f64 {
        self.circuit.zero_point_temperature()
    }

    /// Rows for every bath temperature with no injected noise.
    pub fn run(&self, temperatures: &[f64]) -> Result<Vec<SweepRow>> {
        let cases: Vec<_> = temperatures.iter().map(|&t| (t, 0.0)).collect();
        self.run_cases(&cases)
    }

    /// Rows at bath temperature `temperature` for each injected noise
    /// temperature, whose variance adds to the bath's.
    pub fn run_noise(&self, temperature: f64, noise: &[f64]) -> Result<Vec<SweepRow>> {
        let cases: Vec<_> = noise.iter().map(|&n| (temperature, n)).collect();
        self.run_cases(&cases)
    }

    fn run_cases(&self, cases: &[(f64, f64)]) -> Result<Vec<SweepRow>> {
        self.validate()?;
        if cases.is_empty() {
            return Err(Error::invalid("temperatures", "must not be empty"));
        }
        if let Some(&(_, n)) = cases.iter().find(|c| !(c.1 >= 0.0 && c.1.is_finite())) {
            return Err(Error::invalid("noise_temperature", format!("must be >= 0, got {n}")));
        }
        let center = critical_epsilon(
            OscState::new(0.0, 0.0, self.chirp.tau_start),
            &self.model,
            &self.chirp,
            &self.rk,
            super::BISECTION_REL_TOL,
        )?;
        cases
            .iter()
            .enumerate()
            .map(|(i, &(t, n))| self.row(t, n, center, self.seed.wrapping_add(i as u64)))
            .collect()
    }

    fn row(&self, temperature: f64, noise: f64, center: f64, seed: u64) -> Result<SweepRow> {
        let t_ref = self.reference_temperature();
        let t_eff = effective_temperature(temperature, self.circuit.omega)?;
        let dist = InitialDistribution::from_temperatures(t_eff, noise, t_ref, seed)?;
        let mc = MonteCarlo {
            model: self.model,
            chirp: self.chirp,
            distribution: dist,
            rk: self.rk,
            trajectories: self.trajectories,
        };
        let s_guess = predicted_width_eps(&self.model, dist.sigma(), self.kappa)? / (2.0 * PI).sqrt();
        let curve = mc.adaptive_fit(center, 3.0 * s_guess, self.points, Self::ATTEMPTS)?;
        let fit = curve.fit.unwrap();
        Ok(self.finish_row(temperature, noise, t_eff, dist, fit))
    }

    fn finish_row(
        &self,
        temperature: f64,
        noise: f64,
        t_eff: f64,
        dist: InitialDistribution,
        fit: ThresholdFit,
    ) -> SweepRow {
        let c = &self.circuit;
        let rate_scale = (c.chirp_rate / (c.omega * c.omega) / self.model.alpha_tilde).sqrt();
        let unit = voltage_unit(c, &normalization(c, self.reference_temperature()));
        let width_volts = fit.width * rate_scale * unit;
        let scaled = width_volts * width_volts
            / (8.0 * self.kappa * self.kappa * PI * c.inductance * c.chirp_rate * BOLTZMANN);
        SweepRow {
            temperature,
            noise_temperature: noise,
            t_eff,
            variance_scale: dist.variance_scale,
            epsilon_c: fit.epsilon_c,
            width_eps: fit.width,
            width_eps_stderr: fit.s_stderr * (2.0 * PI).sqrt(),
            width_volts,
            scaled_width_sq: scaled,
            fit,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_follows_effective_temperature() {
        let p = PhysicalParams::six_ghz();
        let w = |t: f64| predicted_width_volts(&p.with_temperature(t), DEVICE_KAPPA).unwrap();
        let te = |t: f64| effective_temperature(t, p.omega).unwrap();
        for (a, b) in [(0.0, 0.05), (0.02, 1.0), (0.3, 3.0)] {
            let ratio = w(a) / w(b);
            assert!((ratio - (te(a) / te(b)).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn width_scales_with_root_chirp() {
        let p = PhysicalParams::six_ghz();
        let mut q = p;
        q.chirp_rate *= 4.0;
        let r = predicted_width_volts(&q, 0.3).unwrap() / predicted_width_volts(&p, 0.3).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
        let dp = DimensionlessParams::reference(10);
        let r = predicted_width_eps(&dp.with_alpha_tilde(4e-6), 1.0, 0.3).unwrap()
            / predicted_width_eps(&dp, 1.0, 0.3).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_temperature_width_pin() {
        // Oracle: the closed formula from raw CODATA values, written out.
        let kb = 1.380649e-23;
        let hbar = 6.62607015e-34 / (2.0 * std::f64::consts::PI);
        let omega = 2.0 * std::f64::consts::PI * 5.987e9;
        let t_eff = hbar * omega / (2.0 * kb);
        let alpha = 2.0 * std::f64::consts::PI * 50.6e12;
        let oracle = 2.0 * 0.245 * (2.0 * std::f64::consts::PI * 2.3e-9 * alpha * kb * t_eff).sqrt();
        let w = predicted_width_volts(&PhysicalParams::six_ghz(), DEVICE_KAPPA).unwrap();
        assert!((w / oracle - 1.0).abs() < 1e-12);
        // Regression pin.
        assert!((w - 1.4792e-9).abs() < 1e-13, "{w:e}");
    }

    #[test]
    fn dimensionless_and_volt_forms_agree() {
        // Δε·(L q0 ω²) at σ = 1 and the native α̃ must give the volt formula.
        let p = PhysicalParams::six_ghz().with_temperature(0.05);
        let dp = crate::units::reduce(&p, 0.0).unwrap();
        let unit = voltage_unit(&p, &dp.scale.unwrap());
        let eps = predicted_width_eps(&dp, 1.0, 0.3).unwrap();
        let volts = predicted_width_volts(&p, 0.3).unwrap();
        assert!((eps * unit / volts - 1.0).abs() < 1e-12);
    }

    #[test]
    fn average_to_probability() {
        assert_eq!(probability_from_average(1.0, 1.0, 3.0).unwrap(), 0.0);
        assert_eq!(probability_from_average(3.0, 1.0, 3.0).unwrap(), 1.0);
        assert_eq!(probability_from_average(2.0, 1.0, 3.0).unwrap(), 0.5);
        assert_eq!(probability_from_average(9.0, 1.0, 3.0).unwrap(), 1.0);
        assert_eq!(probability_from_average(-9.0, 1.0, 3.0).unwrap(), 0.0);
        assert!(probability_from_average(2.0, 3.0, 3.0).is_err());
    }
}
