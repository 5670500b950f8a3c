//! Classical trajectories of the chirped Duffing oscillator.
//!
//! The equations of motion are the characteristics of the phase-space
//! transport equation:
//!
//! ```text
//! dq/dτ = j
//! dj/dτ = −q + βq³ − ε cos φ_d(τ) − damping · j
//! ```
//!
//! with drive phase `φ_d(τ) = τ − α̃τ²/2`, so the drive frequency
//! `1 − α̃τ` sweeps down through the linear resonance at `τ = 0`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::DimensionlessParams;

/// Chirp start, in units of the capture time `1/√α̃`, before the crossing.
pub const DEFAULT_START_CAPTURE_TIMES: f64 = 10.0;
/// Chirp end, in units of `1/√α̃`, after the crossing. At α̃ = 1e-6 this is
/// τ = 4215.
pub const DEFAULT_END_CAPTURE_TIMES: f64 = 4.215;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChirpProfile {
    pub alpha_tilde: f64,
    pub tau_start: f64,
    pub tau_end: f64,
}

impl ChirpProfile {
    pub fn new(alpha_tilde: f64, tau_start: f64, tau_end: f64) -> Result<Self> {
        if !(alpha_tilde > 0.0 && alpha_tilde.is_finite()) {
            return Err(Error::invalid(
                "alpha_tilde",
                format!("must be finite and > 0, got {alpha_tilde}"),
            ));
        }
        if !(tau_start < 0.0 && tau_end > 0.0 && tau_start.is_finite() && tau_end.is_finite()) {
            return Err(Error::invalid(
                "tau_start/tau_end",
                format!("need tau_start < 0 < tau_end, got [{tau_start}, {tau_end}]"),
            ));
        }
        Ok(ChirpProfile {
            alpha_tilde,
            tau_start,
            tau_end,
        })
    }

    /// Sweep from `start` capture times before resonance to `end` capture
    /// times after it.
    pub fn in_capture_times(alpha_tilde: f64, start: f64, end: f64) -> Result<Self> {
        let t = 1.0 / alpha_tilde.sqrt();
        Self::new(alpha_tilde, -start * t, end * t)
    }

    pub fn standard(alpha_tilde: f64) -> Result<Self> {
        Self::in_capture_times(
            alpha_tilde,
            DEFAULT_START_CAPTURE_TIMES,
            DEFAULT_END_CAPTURE_TIMES,
        )
    }

    pub fn with_end(self, tau_end: f64) -> Result<Self> {
        Self::new(self.alpha_tilde, self.tau_start, tau_end)
    }

    pub fn with_start(self, tau_start: f64) -> Result<Self> {
        Self::new(self.alpha_tilde, tau_start, self.tau_end)
    }

    /// Same sweep window, measured in capture times `1/√α̃`, at a new rate.
    pub fn rescaled(&self, alpha_tilde: f64) -> Result<Self> {
        let f = (self.alpha_tilde / alpha_tilde).sqrt();
        Self::new(alpha_tilde, self.tau_start * f, self.tau_end * f)
    }

    #[inline]
    pub fn phase(&self, tau: f64) -> f64 {
        tau - 0.5 * self.alpha_tilde * tau * tau
    }

    #[inline]
    pub fn frequency(&self, tau: f64) -> f64 {
        1.0 - self.alpha_tilde * tau
    }

    /// Whether start and stop detunings are at least `lines` linewidths of
    /// a resonator with quality `q` away from resonance.
    pub fn clears_linewidths(&self, q: f64, lines: f64) -> bool {
        let edge = lines / q;
        self.alpha_tilde * -self.tau_start > edge && self.alpha_tilde * self.tau_end > edge
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscState {
    pub q: f64,
    pub j: f64,
    pub tau: f64,
}

impl OscState {
    pub fn new(q: f64, j: f64, tau: f64) -> Self {
        OscState { q, j, tau }
    }

    pub fn amplitude(&self) -> f64 {
        self.q.hypot(self.j)
    }

    pub fn energy(&self, beta: f64) -> f64 {
        0.5 * self.j * self.j + 0.5 * self.q * self.q - 0.25 * beta * self.q.powi(4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Lock {
    Locked,
    Unlocked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub classification: Lock,
    pub final_state: OscState,
    pub final_amplitude: f64,
    /// `(τ, Δφ)` samples when requested.
    pub phase_mismatch_history: Option<Vec<(f64, f64)>>,
}

impl Outcome {
    pub fn is_locked(&self) -> bool {
        self.classification == Lock::Locked
    }
}

/// Right-hand side of the equations of motion.
pub fn derivative(
    s: &OscState,
    dp: &DimensionlessParams,
    chirp: &ChirpProfile,
    damping: f64,
) -> (f64, f64) {
    let drive = dp.epsilon * chirp.phase(s.tau).cos();
    (s.j, force(s.q, s.j, dp.beta, damping) - drive)
}

#[inline(always)]
fn force(q: f64, j: f64, beta: f64, damping: f64) -> f64 {
    -q + beta * q * q * q - damping * j
}

/// Locked iff the final action exceeds half of the adiabatic phase-locked
/// action `A² = 8α̃τ/(3β)`.
pub fn classify(final_state: &OscState, dp: &DimensionlessParams, chirp: &ChirpProfile) -> Lock {
    let cut = 0.5 * 8.0 * chirp.alpha_tilde * chirp.tau_end / (3.0 * dp.beta);
    let a2 = final_state.q * final_state.q + final_state.j * final_state.j;
    if a2 > cut {
        Lock::Locked
    } else {
        Lock::Unlocked
    }
}

/// Oscillator phase minus drive phase, wrapped to (−π, π]. Zero at the
/// origin.
pub fn phase_mismatch(s: &OscState, chirp: &ChirpProfile, tau: f64) -> f64 {
    if s.q == 0.0 && s.j == 0.0 {
        return 0.0;
    }
    wrap_phase((-s.j).atan2(s.q) - chirp.phase(tau))
}

/// Wraps an angle into (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Fixed-step classical fourth-order Runge–Kutta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rk4 {
    pub dtau: f64,
    /// Linear damping rate, `1/Q`. Zero for the conservative model.
    pub damping: f64,
}

impl Default for Rk4 {
    fn default() -> Self {
        Rk4 {
            dtau: 0.01,
            damping: 0.0,
        }
    }
}

impl Rk4 {
    pub const MAX_DTAU: f64 = 0.05;

    pub fn new(dtau: f64) -> Result<Self> {
        let r = Rk4 { dtau, damping: 0.0 };
        r.validate()?;
        Ok(r)
    }

    pub fn with_damping(self, damping: f64) -> Self {
        Rk4 { damping, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dtau > 0.0 && self.dtau <= Self::MAX_DTAU) {
            return Err(Error::StepSize {
                dtau: self.dtau,
                reason: format!("must lie in (0, {}]", Self::MAX_DTAU),
            });
        }
        if !(self.damping >= 0.0 && self.damping.is_finite()) {
            return Err(Error::invalid("damping", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Integrates from `initial.tau` to `chirp.tau_end` and classifies the
    /// final state. `initial.tau` is normally `chirp.tau_start`.
    pub fn integrate(
        &self,
        initial: OscState,
        dp: &DimensionlessParams,
        chirp: &ChirpProfile,
    ) -> Result<Outcome> {
        let end = self.run(initial, chirp.tau_end, dp, chirp, 0, |_| {})?;
        Ok(self.outcome(end, dp, chirp, None))
    }

    /// As [`Rk4::integrate`], also recording `(τ, Δφ)` every `every` steps
    /// (and at both ends).
    pub fn integrate_tracked(
        &self,
        initial: OscState,
        dp: &DimensionlessParams,
        chirp: &ChirpProfile,
        every: usize,
    ) -> Result<Outcome> {
        let mut history = Vec::new();
        let end = self.run(initial, chirp.tau_end, dp, chirp, every, |s| {
            history.push((s.tau, phase_mismatch(s, chirp, s.tau)));
        })?;
        Ok(self.outcome(end, dp, chirp, Some(history)))
    }

    fn outcome(
        &self,
        end: OscState,
        dp: &DimensionlessParams,
        chirp: &ChirpProfile,
        history: Option<Vec<(f64, f64)>>,
    ) -> Outcome {
        Outcome {
            classification: classify(&end, dp, chirp),
            final_amplitude: end.amplitude(),
            final_state: end,
            phase_mismatch_history: history,
        }
    }

    /// Advances `initial` to `tau_target`, calling `observe` with the
    /// initial state, every `every`-th state (if `every > 0`), and the final
    /// state. The step is shrunk uniformly so the last step lands exactly on
    /// `tau_target`; a target before `initial.tau` integrates backwards.
    pub fn run(
        &self,
        initial: OscState,
        tau_target: f64,
        dp: &DimensionlessParams,
        chirp: &ChirpProfile,
        every: usize,
        mut observe: impl FnMut(&OscState),
    ) -> Result<OscState> {
        self.validate()?;
        let span = tau_target - initial.tau;
        let n = (span.abs() / self.dtau).ceil().max(1.0) as u64;
        let h = span / n as f64;
        let (beta, eps, damping) = (dp.beta, dp.epsilon, self.damping);
        let tau0 = initial.tau;
        let (mut q, mut j) = (initial.q, initial.j);
        if !(q.is_finite() && j.is_finite() && tau0.is_finite()) {
            return Err(Error::NumericalBlowup { tau: tau0 });
        }
        observe(&initial);
        // The drive is sampled on the half-step lattice, where the phase has a
        // constant second difference −α̃h²/4. Advance cis(φ_d) by two complex
        // multiplications per sample and re-anchor exactly every block.
        let turn = Phasor::cis(-0.25 * chirp.alpha_tilde * h * h);
        let mut z = Phasor::cis(0.0);
        let mut w = Phasor::cis(0.0);
        for k in 0..n {
            let tau = tau0 + k as f64 * h;
            let tau1 = tau0 + (k + 1) as f64 * h;
            if k % PHASOR_BLOCK == 0 {
                z = Phasor::cis(chirp.phase(tau));
                w = Phasor::cis(0.5 * h - 0.5 * chirp.alpha_tilde * (tau * h + 0.25 * h * h));
            }
            let drive0 = eps * z.re;
            z = z.mul(w);
            w = w.mul(turn);
            let drive_mid = eps * z.re;
            z = z.mul(w);
            w = w.mul(turn);
            let drive1 = eps * z.re;

            let k1q = j;
            let k1j = force(q, j, beta, damping) - drive0;
            let (q2, j2) = (q + 0.5 * h * k1q, j + 0.5 * h * k1j);
            let k2q = j2;
            let k2j = force(q2, j2, beta, damping) - drive_mid;
            let (q3, j3) = (q + 0.5 * h * k2q, j + 0.5 * h * k2j);
            let k3q = j3;
            let k3j = force(q3, j3, beta, damping) - drive_mid;
            let (q4, j4) = (q + h * k3q, j + h * k3j);
            let k4q = j4;
            let k4j = force(q4, j4, beta, damping) - drive1;

            q += h / 6.0 * (k1q + 2.0 * (k2q + k3q) + k4q);
            j += h / 6.0 * (k1j + 2.0 * (k2j + k3j) + k4j);

            if !(q.is_finite() && j.is_finite()) {
                return Err(Error::NumericalBlowup { tau: tau1 });
            }
            if every > 0 && (k + 1) % every as u64 == 0 && k + 1 != n {
                observe(&OscState::new(q, j, tau1));
            }
        }
        let end = OscState::new(q, j, tau_target);
        observe(&end);
        Ok(end)
    }
}

/// Trajectories advanced in lockstep by [`Rk4::run_batch`]. A single RK4
/// trajectory is latency-bound; independent lanes fill the pipeline.
pub const LANES: usize = 8;

impl Rk4 {
    /// Advances every state in `initial` (all at the same `tau`) to
    /// `tau_target`. Each entry of the result is independent: a lane that
    /// blows up reports its own failure time.
    pub fn run_batch(
        &self,
        initial: &[OscState],
        tau_target: f64,
        dp: &DimensionlessParams,
        chirp: &ChirpProfile,
    ) -> Result<Vec<Result<OscState>>> {
        let driven: Vec<_> = initial.iter().map(|s| (*s, dp.epsilon)).collect();
        self.run_batch_driven(&driven, tau_target, dp, chirp)
    }

    /// As [`Rk4::run_batch`], with a separate drive amplitude per state;
    /// `dp.epsilon` is ignored.
    pub fn run_batch_driven(
        &self,
        initial: &[(OscState, f64)],
        tau_target: f64,
        dp: &DimensionlessParams,
        chirp: &ChirpProfile,
    ) -> Result<Vec<Result<OscState>>> {
        self.validate()?;
        let mut out = Vec::with_capacity(initial.len());
        for chunk in initial.chunks(LANES) {
            let tau0 = chunk[0].0.tau;
            if chunk.iter().any(|(s, _)| s.tau != tau0) {
                return Err(Error::invalid(
                    "initial",
                    "batched states must share the same start time",
                ));
            }
            let mut q = [0.0; LANES];
            let mut j = [0.0; LANES];
            let mut eps = [0.0; LANES];
            for (l, (s, e)) in chunk.iter().enumerate() {
                q[l] = s.q;
                j[l] = s.j;
                eps[l] = *e;
            }
            let failed = self.lockstep(&mut q, &mut j, &eps, tau0, tau_target, dp.beta, chirp);
            for l in 0..chunk.len() {
                out.push(match failed[l] {
                    Some(tau) => Err(Error::NumericalBlowup { tau }),
                    None => Ok(OscState::new(q[l], j[l], tau_target)),
                });
            }
        }
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn lockstep(
        &self,
        q: &mut [f64; LANES],
        j: &mut [f64; LANES],
        eps: &[f64; LANES],
        tau0: f64,
        tau_target: f64,
        beta: f64,
        chirp: &ChirpProfile,
    ) -> [Option<f64>; LANES] {
        let mut failed = [None; LANES];
        for l in 0..LANES {
            if !(q[l].is_finite() && j[l].is_finite() && tau0.is_finite()) {
                failed[l] = Some(tau0);
            }
        }
        let span = tau_target - tau0;
        let n = (span.abs() / self.dtau).ceil().max(1.0) as u64;
        let h = span / n as f64;
        let damping = self.damping;
        let turn = Phasor::cis(-0.25 * chirp.alpha_tilde * h * h);
        let mut z = Phasor::cis(0.0);
        let mut w = Phasor::cis(0.0);
        for k in 0..n {
            let tau = tau0 + k as f64 * h;
            if k % PHASOR_BLOCK == 0 {
                z = Phasor::cis(chirp.phase(tau));
                w = Phasor::cis(0.5 * h - 0.5 * chirp.alpha_tilde * (tau * h + 0.25 * h * h));
                // Blowups are rare; checking once per block is enough to
                // name the failure time to within a block.
                for l in 0..LANES {
                    if failed[l].is_none() && !(q[l].is_finite() && j[l].is_finite()) {
                        failed[l] = Some(tau);
                    }
                }
            }
            let c0 = z.re;
            z = z.mul(w);
            w = w.mul(turn);
            let c_mid = z.re;
            z = z.mul(w);
            w = w.mul(turn);
            let c1 = z.re;
            for l in 0..LANES {
                let (ql, jl) = (q[l], j[l]);
                let (drive0, drive_mid, drive1) = (eps[l] * c0, eps[l] * c_mid, eps[l] * c1);
                let k1q = jl;
                let k1j = force(ql, jl, beta, damping) - drive0;
                let (q2, j2) = (ql + 0.5 * h * k1q, jl + 0.5 * h * k1j);
                let k2q = j2;
                let k2j = force(q2, j2, beta, damping) - drive_mid;
                let (q3, j3) = (ql + 0.5 * h * k2q, jl + 0.5 * h * k2j);
                let k3q = j3;
                let k3j = force(q3, j3, beta, damping) - drive_mid;
                let (q4, j4) = (ql + h * k3q, jl + h * k3j);
                let k4q = j4;
                let k4j = force(q4, j4, beta, damping) - drive1;
                q[l] = ql + h / 6.0 * (k1q + 2.0 * (k2q + k3q) + k4q);
                j[l] = jl + h / 6.0 * (k1j + 2.0 * (k2j + k3j) + k4j);
            }
        }
        for l in 0..LANES {
            if failed[l].is_none() && !(q[l].is_finite() && j[l].is_finite()) {
                failed[l] = Some(tau_target);
            }
        }
        failed
    }
}

const PHASOR_BLOCK: u64 = 256;

#[derive(Debug, Clone, Copy)]
struct Phasor {
    re: f64,
    im: f64,
}

impl Phasor {
    fn cis(x: f64) -> Self {
        let (im, re) = x.sin_cos();
        Phasor { re, im }
    }

    #[inline(always)]
    fn mul(self, o: Phasor) -> Phasor {
        Phasor {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }
}
