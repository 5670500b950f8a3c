//! Fourier split-step integration.
//!
//! Each step is a q-shear `f(q, j) → f(q − a·j, j)`, a j-kick
//! `f(q, j) → f(q, j − ΔJ(q))` carrying the quantum term, and a second
//! q-shear. Both are applied as multipliers on one-dimensional real FFTs
//! and are exactly unitary, so norm and `∫f²` change only by round-off.
//!
//! [`Scheme::ExactHarmonic`] uses shears `tan(h/2)·j` and a harmonic kick
//! `−q sin h`, which compose to an exact rotation by `h`; only the quartic,
//! drive and quantum terms carry splitting error. [`Scheme::Standard`] is
//! plain Strang splitting of the free and force flows.

use std::sync::Arc;

use rayon::prelude::*;
use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use serde::{Deserialize, Serialize};

use super::{
    lock_split, negativity, PhaseSpaceGrid, WignerState, MAX_BOUNDARY_MASS, MAX_GAP_MASS,
    MAX_NORM_DRIFT,
};
use crate::dynamics::ChirpProfile;
use crate::error::{Error, Result};
use crate::units::DimensionlessParams;

/// Largest accepted step.
pub const MAX_DTAU: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Scheme {
    #[default]
    ExactHarmonic,
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub tau: f64,
    pub norm: f64,
    pub l2: f64,
    pub min_f: f64,
    pub negative_mass: f64,
    /// `None` while the locked and unlocked populations overlap.
    pub locked_fraction: Option<f64>,
    pub mean_q: f64,
    pub mean_j: f64,
    pub var_q: f64,
    pub var_j: f64,
    pub boundary_mass: f64,
    /// Share of `∫f²` in the top third of j-wavenumbers.
    pub spectral_tail: f64,
}

/// Final state of an evolution with the sampled diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evolution {
    pub state: WignerState,
    pub series: Vec<Diagnostics>,
    pub steps: usize,
    pub dtau: f64,
    pub max_norm_drift: f64,
    pub max_l2_drift: f64,
    pub max_boundary_mass: f64,
    pub max_spectral_tail: f64,
}

struct Tables {
    h: f64,
    half_shear: Vec<Complex<f64>>,
    full_shear: Vec<Complex<f64>>,
    kick: Vec<Complex<f64>>,
}

/// Exponential spectral filter `exp(−strength·(k/k_max)^order)`, applied
/// once per step along each axis. It removes filaments finer than the grid
/// at the cost of exact `∫f²` conservation; `∫f` is untouched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Filter {
    pub order: u32,
    pub strength: f64,
}

impl Filter {
    /// The common `exp(−36 (k/k_max)^36)` choice.
    pub const STANDARD: Filter = Filter {
        order: 36,
        strength: 36.0,
    };

    fn factor(&self, m: usize, n: usize) -> f64 {
        let x = m as f64 / (n / 2) as f64;
        (-self.strength * x.powi(self.order as i32)).exp()
    }
}

/// Split-step propagator for one grid and parameter set.
pub struct SplitStep {
    grid: PhaseSpaceGrid,
    filter: Option<Filter>,
    model: DimensionlessParams,
    chirp: ChirpProfile,
    dtau: f64,
    scheme: Scheme,
    fq: Arc<dyn RealToComplex<f64>>,
    iq: Arc<dyn ComplexToReal<f64>>,
    fj: Arc<dyn RealToComplex<f64>>,
    ij: Arc<dyn ComplexToReal<f64>>,
    tables: Option<Tables>,
    transposed: Vec<f64>,
}

impl SplitStep {
    pub fn new(
        grid: PhaseSpaceGrid,
        model: DimensionlessParams,
        chirp: ChirpProfile,
        dtau: f64,
        scheme: Scheme,
    ) -> Result<Self> {
        check_model(&model)?;
        if !(dtau > 0.0 && dtau <= MAX_DTAU) {
            return Err(Error::StepSize {
                dtau,
                reason: format!("must lie in (0, {MAX_DTAU}]"),
            });
        }
        let mut planner = RealFftPlanner::<f64>::new();
        Ok(SplitStep {
            grid,
            filter: None,
            model,
            chirp,
            dtau,
            scheme,
            fq: planner.plan_fft_forward(grid.n_q),
            iq: planner.plan_fft_inverse(grid.n_q),
            fj: planner.plan_fft_forward(grid.n_j),
            ij: planner.plan_fft_inverse(grid.n_j),
            tables: None,
            transposed: vec![0.0; grid.len()],
        })
    }

    pub fn with_filter(mut self, filter: Option<Filter>) -> Self {
        self.filter = filter;
        self.tables = None;
        self
    }

    pub fn grid(&self) -> &PhaseSpaceGrid {
        &self.grid
    }

    fn tables(&mut self, h: f64) -> &Tables {
        if self.tables.as_ref().map(|t| t.h) != Some(h) {
            self.tables = Some(self.build_tables(h));
        }
        self.tables.as_ref().unwrap()
    }

    fn build_tables(&self, h: f64) -> Tables {
        let g = &self.grid;
        let (kq, kj) = (g.k_q(), g.k_j());
        let a = match self.scheme {
            Scheme::ExactHarmonic => (0.5 * h).tan(),
            Scheme::Standard => 0.5 * h,
        };
        let damp = |m: usize, n: usize, weight: f64| {
            self.filter.map_or(1.0, |f| f.factor(m, n).powf(weight))
        };
        let shear = |a: f64, weight: f64| {
            let mut t = Vec::with_capacity(g.n_j * kq.len());
            for r in 0..g.n_j {
                let j = g.j(r);
                t.extend(
                    kq.iter()
                        .enumerate()
                        .map(|(m, &k)| unit(-k * j * a) * damp(m, g.n_q, weight)),
                );
                *t.last_mut().unwrap() = Complex::new(damp(g.n_q / 2, g.n_q, weight), 0.0);
            }
            t
        };
        let beta = self.model.beta;
        let quantum = h * self.model.gamma * self.model.gamma * beta / 4.0;
        let mut kick = Vec::with_capacity(g.n_q * kj.len());
        for i in 0..g.n_q {
            let q = g.q(i);
            let shift = match self.scheme {
                Scheme::ExactHarmonic => -h.sin() * q + h * beta * q * q * q,
                Scheme::Standard => h * (-q + beta * q * q * q),
            };
            let c = quantum * q;
            kick.extend(
                kj.iter()
                    .enumerate()
                    .map(|(m, &k)| unit(-(k * shift + c * k * k * k)) * damp(m, g.n_j, 1.0)),
            );
            *kick.last_mut().unwrap() = Complex::new(damp(g.n_j / 2, g.n_j, 1.0), 0.0);
        }
        Tables {
            h,
            half_shear: shear(a, 0.5),
            full_shear: shear(2.0 * a, 1.0),
            kick,
        }
    }

    /// Advances by one step of the configured size.
    pub fn step(&mut self, state: &mut WignerState) -> Result<()> {
        self.check_state(state)?;
        let h = self.dtau;
        self.tables(h);
        self.shear(state, false);
        self.kick(state, h);
        self.shear(state, false);
        state.tau += h;
        state.gamma = self.model.gamma;
        Ok(())
    }

    /// Steps to `tau_target` with a uniform step no larger than the
    /// configured one, sampling diagnostics every `every` steps and at the
    /// end. Aborts if `∫f` drifts by more than [`MAX_NORM_DRIFT`] or the
    /// boundary band collects more than [`MAX_BOUNDARY_MASS`].
    pub fn evolve(
        &mut self,
        mut state: WignerState,
        tau_target: f64,
        every: usize,
        mut observe: impl FnMut(&WignerState, &Diagnostics),
    ) -> Result<Evolution> {
        self.check_state(&state)?;
        if !(tau_target > state.tau) {
            return Err(Error::invalid(
                "tau_target",
                format!("{tau_target} must exceed the state time {}", state.tau),
            ));
        }
        self.grid.check_orbit(&self.model, tau_target)?;
        let span = tau_target - state.tau;
        let steps = (span / self.dtau).ceil() as usize;
        let h = span / steps as f64;
        let tau0 = state.tau;
        let every = every.max(1);
        self.tables(h);

        let norm0 = state.norm();
        let l2_0 = state.l2();
        let mut out = Evolution {
            state: state.clone(),
            series: Vec::new(),
            steps,
            dtau: h,
            max_norm_drift: 0.0,
            max_l2_drift: 0.0,
            max_boundary_mass: 0.0,
            max_spectral_tail: 0.0,
        };
        let first = self.diagnostics(&state);
        observe(&state, &first);
        self.record(&mut out, first, norm0, l2_0)?;

        self.shear(&mut state, false);
        for s in 1..=steps {
            self.kick(&mut state, h);
            state.tau = tau0 + s as f64 * h;
            if s == steps || s % every == 0 {
                self.shear(&mut state, false);
                state.gamma = self.model.gamma;
                let d = self.diagnostics(&state);
                observe(&state, &d);
                self.record(&mut out, d, norm0, l2_0)?;
                if s < steps {
                    self.shear(&mut state, false);
                }
            } else {
                self.shear(&mut state, true);
            }
        }
        state.tau = tau_target;
        out.state = state;
        Ok(out)
    }

    fn record(&self, out: &mut Evolution, d: Diagnostics, norm0: f64, l2_0: f64) -> Result<()> {
        let drift = (d.norm - norm0).abs();
        out.max_norm_drift = out.max_norm_drift.max(drift);
        out.max_l2_drift = out.max_l2_drift.max((d.l2 / l2_0 - 1.0).abs());
        out.max_boundary_mass = out.max_boundary_mass.max(d.boundary_mass);
        out.max_spectral_tail = out.max_spectral_tail.max(d.spectral_tail);
        out.series.push(d);
        if drift > MAX_NORM_DRIFT || !d.norm.is_finite() {
            return Err(Error::NormDrift { drift, tau: d.tau });
        }
        if d.boundary_mass > MAX_BOUNDARY_MASS {
            return Err(Error::Grid(format!(
                "boundary mass {:.3e} exceeds {MAX_BOUNDARY_MASS:e} at tau = {}",
                d.boundary_mass, d.tau
            )));
        }
        Ok(())
    }

    fn check_state(&self, state: &WignerState) -> Result<()> {
        if state.grid != self.grid {
            return Err(Error::Grid("state grid differs from the solver grid".into()));
        }
        Ok(())
    }

    pub fn diagnostics(&self, state: &WignerState) -> Diagnostics {
        let m = state.moments();
        let (min_f, negative_mass) = negativity(state);
        let locked_fraction = lock_split(state, &self.model)
            .ok()
            .and_then(|(outside, gap)| (gap <= MAX_GAP_MASS).then(|| outside / state.norm()));
        Diagnostics {
            tau: state.tau,
            norm: state.norm(),
            l2: state.l2(),
            min_f,
            negative_mass,
            locked_fraction,
            mean_q: m.mean_q,
            mean_j: m.mean_j,
            var_q: m.var_q,
            var_j: m.var_j,
            boundary_mass: state.boundary_mass(),
            spectral_tail: self.spectral_tail(state),
        }
    }

    fn spectral_tail(&self, state: &WignerState) -> f64 {
        let n = self.grid.n_j;
        let cut = n / 3;
        let (mut tail, mut total) = (0.0, 0.0);
        let mut buf = vec![0.0; n];
        let mut spec = self.fj.make_output_vec();
        let mut scratch = self.fj.make_scratch_vec();
        for row in state.f.chunks(n) {
            buf.copy_from_slice(row);
            self.fj
                .process_with_scratch(&mut buf, &mut spec, &mut scratch)
                .expect("transform length matches grid");
            for (m, c) in spec.iter().enumerate() {
                let w = if m == 0 || m == n / 2 { 1.0 } else { 2.0 } * c.norm_sqr();
                total += w;
                if m > cut {
                    tail += w;
                }
            }
        }
        if total > 0.0 {
            tail / total
        } else {
            0.0
        }
    }

    /// `f(q, j) → f(q − a·j, j)` with `a` the half or full shear.
    fn shear(&mut self, state: &mut WignerState, full: bool) {
        let (n_q, n_j) = (self.grid.n_q, self.grid.n_j);
        transpose(&state.f, &mut self.transposed, n_q, n_j);
        let t = self.tables.as_ref().expect("tables built before stepping");
        let table = if full { &t.full_shear } else { &t.half_shear };
        let width = n_q / 2 + 1;
        let (fwd, inv) = (&self.fq, &self.iq);
        let scale = 1.0 / n_q as f64;
        self.transposed
            .par_chunks_mut(n_q)
            .zip(table.par_chunks(width))
            .for_each_init(
                || (fwd.make_output_vec(), fwd.make_scratch_vec()),
                |(spec, scratch), (row, mult)| {
                    apply(row, mult, None, spec, scratch, fwd, inv, scale);
                },
            );
        transpose(&self.transposed, &mut state.f, n_j, n_q);
    }

    /// `f(q, j) → f(q, j − ΔJ(q))` with the quantum multiplier.
    fn kick(&mut self, state: &mut WignerState, h: f64) {
        let n_j = self.grid.n_j;
        let mid = state.tau + 0.5 * h;
        let drive = h * self.model.epsilon * self.chirp.phase(mid).cos();
        let kj = self.grid.k_j();
        let mut shift: Vec<Complex<f64>> = kj.iter().map(|&k| unit(k * drive)).collect();
        *shift.last_mut().unwrap() = Complex::new(1.0, 0.0);
        let t = self.tables.as_ref().expect("tables built before stepping");
        let width = n_j / 2 + 1;
        let (fwd, inv) = (&self.fj, &self.ij);
        let scale = 1.0 / n_j as f64;
        let shift = &shift;
        state
            .f
            .par_chunks_mut(n_j)
            .zip(t.kick.par_chunks(width))
            .for_each_init(
                || (fwd.make_output_vec(), fwd.make_scratch_vec()),
                |(spec, scratch), (row, mult)| {
                    apply(row, mult, Some(shift), spec, scratch, fwd, inv, scale);
                },
            );
    }
}

/// Like [`DimensionlessParams::validate`] but admits the harmonic limit
/// `β = 0` and the classical limit `γ = 0`.
fn check_model(m: &DimensionlessParams) -> Result<()> {
    let ok = |x: f64| x.is_finite() && x >= 0.0;
    if !ok(m.beta) {
        return Err(Error::invalid("beta", format!("must be finite and >= 0, got {}", m.beta)));
    }
    if !(m.alpha_tilde > 0.0 && m.alpha_tilde.is_finite()) {
        return Err(Error::invalid("alpha_tilde", "must be finite and > 0"));
    }
    if !ok(m.epsilon) {
        return Err(Error::invalid("epsilon", "must be finite and >= 0"));
    }
    if !(ok(m.gamma) && m.gamma <= 2.0) {
        return Err(Error::invalid("gamma", format!("must lie in [0, 2], got {}", m.gamma)));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn apply(
    row: &mut [f64],
    mult: &[Complex<f64>],
    extra: Option<&[Complex<f64>]>,
    spec: &mut [Complex<f64>],
    scratch: &mut [Complex<f64>],
    fwd: &Arc<dyn RealToComplex<f64>>,
    inv: &Arc<dyn ComplexToReal<f64>>,
    scale: f64,
) {
    fwd.process_with_scratch(row, spec, scratch)
        .expect("transform length matches grid");
    match extra {
        Some(e) => {
            for ((c, m), x) in spec.iter_mut().zip(mult).zip(e) {
                *c *= m * x * scale;
            }
        }
        None => {
            for (c, m) in spec.iter_mut().zip(mult) {
                *c *= m * scale;
            }
        }
    }
    // DC and Nyquist multipliers are 1, so these stay real up to round-off
    // in the scaling; clear it so the inverse accepts them.
    spec[0].im = 0.0;
    spec.last_mut().unwrap().im = 0.0;
    inv.process_with_scratch(spec, row, scratch)
        .expect("transform length matches grid");
}

fn unit(phase: f64) -> Complex<f64> {
    let (s, c) = phase.sin_cos();
    Complex::new(c, s)
}

/// `dst[c * rows + r] = src[r * cols + c]`.
fn transpose(src: &[f64], dst: &mut [f64], rows: usize, cols: usize) {
    const B: usize = 32;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}
