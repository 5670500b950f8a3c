//! Physical constants and the map from circuit parameters to the
//! dimensionless oscillator model.
//!
//! Charge is measured in units of `q0 = j0 / ω` and current in units of
//! `j0 = sqrt(k_B T_eff / L)`, where `T_eff` is the bath temperature
//! corrected for zero-point motion. Time is `τ = ω t`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planck constant, J s (exact).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Boltzmann constant, J/K (exact).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Elementary charge, C (exact).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Reduced flux quantum ħ/2e, Wb.
pub const REDUCED_FLUX_QUANTUM: f64 = HBAR / (2.0 * ELEMENTARY_CHARGE);

/// Dimensionful description of the resonator circuit and its bath.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Total inductance, H.
    pub inductance: f64,
    /// Junction critical current, A.
    pub critical_current: f64,
    /// Linear resonance frequency, rad/s.
    pub omega: f64,
    /// Loaded quality factor.
    pub quality: f64,
    pub quality_internal: Option<f64>,
    pub quality_external: Option<f64>,
    /// Bath temperature, K.
    pub temperature: f64,
    /// Angular chirp rate, rad/s².
    pub chirp_rate: f64,
    /// Critical power for bifurcation, W. Calibration record only.
    pub critical_power: Option<f64>,
}

impl PhysicalParams {
    /// Circuit in the units used by configuration files: nH, μA, GHz, mK,
    /// and a frequency chirp in MHz/μs.
    pub fn from_lab_units(
        inductance_nh: f64,
        critical_current_ua: f64,
        resonance_ghz: f64,
        quality: f64,
        temperature_mk: f64,
        chirp_mhz_per_us: f64,
    ) -> Self {
        PhysicalParams {
            inductance: inductance_nh * 1e-9,
            critical_current: critical_current_ua * 1e-6,
            omega: 2.0 * PI * resonance_ghz * 1e9,
            quality,
            quality_internal: None,
            quality_external: None,
            temperature: temperature_mk * 1e-3,
            chirp_rate: chirp_rate_from_mhz_per_us(chirp_mhz_per_us),
            critical_power: None,
        }
    }

    /// The 5.987 GHz junction-embedded resonator, at T = 0 and a
    /// 50.6 MHz/μs chirp.
    pub fn six_ghz() -> Self {
        PhysicalParams {
            quality_internal: Some(17_200.0),
            quality_external: Some(15_800.0),
            // -123 dBm
            critical_power: Some(1e-3 * 10f64.powf(-12.3)),
            ..Self::from_lab_units(2.3, 1.8, 5.987, 8230.0, 0.0, 50.6)
        }
    }

    /// The 1.6 GHz device. Only the frequency is known for this circuit;
    /// the remaining values are borrowed from [`PhysicalParams::six_ghz`], so
    /// only frequency-scaling results are meaningful.
    pub fn one_point_six_ghz() -> Self {
        PhysicalParams {
            omega: 2.0 * PI * 1.6e9,
            ..Self::six_ghz()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "6GHz" => Some(Self::six_ghz()),
            "1.6GHz" => Some(Self::one_point_six_ghz()),
            _ => None,
        }
    }

    pub fn with_temperature(self, temperature: f64) -> Self {
        PhysicalParams {
            temperature,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("inductance", self.inductance)?;
        positive("critical_current", self.critical_current)?;
        positive("omega", self.omega)?;
        positive("chirp_rate", self.chirp_rate)?;
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid(
                "temperature",
                format!("must be finite and >= 0, got {}", self.temperature),
            ));
        }
        if !(self.quality > 1.0) {
            return Err(Error::invalid(
                "quality",
                format!("must exceed 1, got {}", self.quality),
            ));
        }
        Ok(())
    }

    /// Zero-point temperature ħω/2k_B, K.
    pub fn zero_point_temperature(&self) -> f64 {
        HBAR * self.omega / (2.0 * BOLTZMANN)
    }
}

/// Converts a frequency chirp quoted in MHz/μs into an angular rate, rad/s².
pub fn chirp_rate_from_mhz_per_us(rate: f64) -> f64 {
    2.0 * PI * rate * 1e12
}

/// Charge and current scales of the dimensionless model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    /// Charge unit, C.
    pub q0: f64,
    /// Current unit, A.
    pub j0: f64,
    /// Effective temperature used to build the units, K.
    pub t_eff: f64,
}

/// Constants of the reduced Hamiltonian
/// `H = j²/2 + q²/2 − βq⁴/4 + εq cos φ_d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionlessParams {
    pub beta: f64,
    pub epsilon: f64,
    /// ħω / k_B T_eff; 2 at zero temperature, → 0 classically.
    pub gamma: f64,
    /// α / ω².
    pub alpha_tilde: f64,
    /// Present when the constants were derived from a circuit.
    pub scale: Option<Normalization>,
}

impl DimensionlessParams {
    /// Model constants given directly, without an underlying circuit.
    pub fn new(beta: f64, epsilon: f64, alpha_tilde: f64, gamma: f64) -> Self {
        DimensionlessParams {
            beta,
            epsilon,
            gamma,
            alpha_tilde,
            scale: None,
        }
    }

    /// Simulation point used throughout the numerical experiments:
    /// β = n² × 3.55e-6, α̃ = 1e-6, vacuum fluctuations.
    pub fn reference(n: u32) -> Self {
        let n = f64::from(n);
        Self::new(n * n * REFERENCE_BETA, 0.0246 / n, REFERENCE_ALPHA_TILDE, 2.0)
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        DimensionlessParams { epsilon, ..self }
    }

    pub fn with_beta(self, beta: f64) -> Self {
        DimensionlessParams { beta, ..self }
    }

    pub fn with_alpha_tilde(self, alpha_tilde: f64) -> Self {
        DimensionlessParams {
            alpha_tilde,
            ..self
        }
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        DimensionlessParams { gamma, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        positive("beta", self.beta)?;
        positive("alpha_tilde", self.alpha_tilde)?;
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid(
                "epsilon",
                format!("must be finite and >= 0, got {}", self.epsilon),
            ));
        }
        if !(self.gamma > 0.0 && self.gamma <= 2.0) {
            return Err(Error::invalid(
                "gamma",
                format!("must lie in (0, 2], got {}", self.gamma),
            ));
        }
        Ok(())
    }

    /// Squared amplitude of the phase-locked orbit at time `tau` after the
    /// resonance crossing: the Duffing frequency `1 − 3βA²/8` matches the
    /// drive frequency `1 − α̃τ`.
    pub fn locked_amplitude_sq(&self, tau: f64) -> f64 {
        8.0 * self.alpha_tilde * tau / (3.0 * self.beta)
    }
}

/// Anharmonicity of the measured 6 GHz device.
pub const REFERENCE_BETA: f64 = 3.55e-6;
/// Chirp rate of the simulated sweeps.
pub const REFERENCE_ALPHA_TILDE: f64 = 1e-6;

/// `T_eff = (ħω/2k_B) coth(ħω/2k_B T)`, the temperature whose classical
/// equipartition energy equals the mean oscillator energy including the
/// zero-point contribution. Exactly `ħω/2k_B` at `T = 0`.
pub fn effective_temperature(temperature: f64, omega: f64) -> Result<f64> {
    positive("omega", omega)?;
    if !(temperature >= 0.0 && temperature.is_finite()) {
        return Err(Error::invalid(
            "temperature",
            format!("must be finite and >= 0, got {temperature}"),
        ));
    }
    let zero_point = HBAR * omega / (2.0 * BOLTZMANN);
    if temperature == 0.0 {
        return Ok(zero_point);
    }
    Ok(zero_point / (zero_point / temperature).tanh())
}

/// `γ = ħω / k_B T_eff = 2 tanh(ħω / 2k_B T)`.
pub fn quantumness(temperature: f64, omega: f64) -> Result<f64> {
    effective_temperature(temperature, omega)?;
    if temperature == 0.0 {
        return Ok(2.0);
    }
    Ok(2.0 * (HBAR * omega / (2.0 * BOLTZMANN * temperature)).tanh())
}

/// Normalization built from an explicit effective temperature.
pub fn normalization(p: &PhysicalParams, t_eff: f64) -> Normalization {
    let j0 = (BOLTZMANN * t_eff / p.inductance).sqrt();
    Normalization {
        q0: j0 / p.omega,
        j0,
        t_eff,
    }
}

/// Reduces a circuit driven at `drive_voltage` volts to model constants.
pub fn reduce(p: &PhysicalParams, drive_voltage: f64) -> Result<DimensionlessParams> {
    p.validate()?;
    if !(drive_voltage >= 0.0 && drive_voltage.is_finite()) {
        return Err(Error::invalid(
            "drive_voltage",
            format!("must be finite and >= 0, got {drive_voltage}"),
        ));
    }
    let t_eff = effective_temperature(p.temperature, p.omega)?;
    let scale = normalization(p, t_eff);
    let w2 = p.omega * p.omega;
    let beta = REDUCED_FLUX_QUANTUM * w2 * scale.q0 * scale.q0
        / (6.0 * p.inductance * p.critical_current.powi(3));
    Ok(DimensionlessParams {
        beta,
        epsilon: drive_voltage / voltage_unit(p, &scale),
        gamma: quantumness(p.temperature, p.omega)?,
        alpha_tilde: p.chirp_rate / w2,
        scale: Some(scale),
    })
}

/// Inverse of the drive-amplitude map in [`reduce`].
pub fn drive_voltage(p: &PhysicalParams, epsilon: f64) -> Result<f64> {
    p.validate()?;
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(
            "epsilon",
            format!("must be finite and >= 0, got {epsilon}"),
        ));
    }
    let t_eff = effective_temperature(p.temperature, p.omega)?;
    Ok(epsilon * voltage_unit(p, &normalization(p, t_eff)))
}

/// Volts per unit of dimensionless drive, `L q0 ω²`.
pub fn voltage_unit(p: &PhysicalParams, scale: &Normalization) -> f64 {
    p.inductance * scale.q0 * p.omega * p.omega
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("must be finite and > 0, got {value}"),
        ))
    }
}
