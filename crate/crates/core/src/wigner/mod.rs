//! Phase-space (Wigner) evolution of the chirped Duffing oscillator.
//!
//! The Wigner function obeys
//! `∂f/∂τ + j ∂f/∂q − [(q − βq³) + ε cos φ_d] ∂f/∂j = (γ²βq/4) ∂³f/∂j³`.
//! For a quartic potential the third-derivative term is the complete
//! quantum correction, and `γ → 0` recovers classical Liouville flow.

mod snapshot;
mod solver;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::dynamics::ChirpProfile;
use crate::error::{Error, Result};
use crate::units::DimensionlessParams;

pub use snapshot::{export_snapshot, import_snapshot, write_csv, Snapshot};
pub use solver::{Diagnostics, Evolution, Filter, Scheme, SplitStep, MAX_DTAU};

/// Cells at the box edge whose mass is watched for leakage.
pub const BOUNDARY_CELLS: usize = 3;
/// Largest tolerated mass in the boundary band.
pub const MAX_BOUNDARY_MASS: f64 = 1e-4;
/// Largest tolerated drift of `∫f` before an evolution aborts.
pub const MAX_NORM_DRIFT: f64 = 1e-4;
/// Box half-width in units of the locked amplitude at the end of the run.
pub const BOX_MARGIN: f64 = 1.6;

/// Periodic grid on `[−q_half, q_half) × [−j_half, j_half)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceGrid {
    pub n_q: usize,
    pub n_j: usize,
    pub q_half: f64,
    pub j_half: f64,
}

impl PhaseSpaceGrid {
    pub fn new(n_q: usize, n_j: usize, q_half: f64, j_half: f64) -> Result<Self> {
        for (name, n) in [("n_q", n_q), ("n_j", n_j)] {
            if n < 64 || !n.is_power_of_two() {
                return Err(Error::Grid(format!("{name} = {n} must be a power of two >= 64")));
            }
        }
        for (name, h) in [("q_half", q_half), ("j_half", j_half)] {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Grid(format!("{name} = {h} must be finite and > 0")));
            }
        }
        Ok(PhaseSpaceGrid {
            n_q,
            n_j,
            q_half,
            j_half,
        })
    }

    /// Square `n × n` box just large enough for the locked orbit at
    /// `tau_end` and for a vacuum-width cloud.
    pub fn for_run(n: usize, model: &DimensionlessParams, tau_end: f64) -> Result<Self> {
        let half = (BOX_MARGIN * model.locked_amplitude_sq(tau_end.max(0.0)).sqrt()).max(8.0);
        Self::new(n, n, half, half)
    }

    pub fn dq(&self) -> f64 {
        2.0 * self.q_half / self.n_q as f64
    }

    pub fn dj(&self) -> f64 {
        2.0 * self.j_half / self.n_j as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dq() * self.dj()
    }

    pub fn q(&self, i: usize) -> f64 {
        -self.q_half + i as f64 * self.dq()
    }

    pub fn j(&self, i: usize) -> f64 {
        -self.j_half + i as f64 * self.dj()
    }

    /// Non-negative wavenumbers `k_m = π m / half`, `m = 0..=n/2`, of the
    /// real-input transform along q.
    pub fn k_q(&self) -> Vec<f64> {
        wavenumbers(self.n_q, self.q_half)
    }

    pub fn k_j(&self) -> Vec<f64> {
        wavenumbers(self.n_j, self.j_half)
    }

    pub fn len(&self) -> usize {
        self.n_q * self.n_j
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks the box against the locked orbit at time `tau`.
    pub fn check_orbit(&self, model: &DimensionlessParams, tau: f64) -> Result<()> {
        if model.beta == 0.0 {
            return Ok(());
        }
        let need = BOX_MARGIN * model.locked_amplitude_sq(tau.max(0.0)).sqrt();
        if self.q_half < need || self.j_half < need {
            return Err(Error::Grid(format!(
                "box half-widths ({}, {}) below {BOX_MARGIN} x locked amplitude {need} at tau = {tau}",
                self.q_half, self.j_half
            )));
        }
        Ok(())
    }
}

fn wavenumbers(n: usize, half: f64) -> Vec<f64> {
    (0..=n / 2)
        .map(|m| std::f64::consts::PI * m as f64 / half)
        .collect()
}

/// Wigner function sampled on a grid, stored q-major: `f[iq * n_j + ij]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerState {
    pub grid: PhaseSpaceGrid,
    pub f: Vec<f64>,
    pub tau: f64,
    /// Quantumness the state was prepared or last evolved with.
    pub gamma: f64,
}

impl WignerState {
    pub fn at(&self, iq: usize, ij: usize) -> f64 {
        self.f[iq * self.grid.n_j + ij]
    }

    /// `∫f dq dj`.
    pub fn norm(&self) -> f64 {
        self.f.iter().sum::<f64>() * self.grid.cell_area()
    }

    /// `∫f² dq dj`.
    pub fn l2(&self) -> f64 {
        self.f.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_area()
    }

    /// `(⟨q⟩, ⟨j⟩)` normalized by the current norm.
    pub fn centroid(&self) -> (f64, f64) {
        let m = self.moments();
        (m.mean_q, m.mean_j)
    }

    pub(crate) fn moments(&self) -> Moments {
        let g = &self.grid;
        let (mut s0, mut sq, mut sj, mut sqq, mut sjj) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for iq in 0..g.n_q {
            let q = g.q(iq);
            let row = &self.f[iq * g.n_j..(iq + 1) * g.n_j];
            let (mut r0, mut rj, mut rjj) = (0.0, 0.0, 0.0);
            for (ij, &v) in row.iter().enumerate() {
                let j = g.j(ij);
                r0 += v;
                rj += v * j;
                rjj += v * j * j;
            }
            s0 += r0;
            sq += r0 * q;
            sqq += r0 * q * q;
            sj += rj;
            sjj += rjj;
        }
        let mean_q = sq / s0;
        let mean_j = sj / s0;
        Moments {
            mean_q,
            mean_j,
            var_q: sqq / s0 - mean_q * mean_q,
            var_j: sjj / s0 - mean_j * mean_j,
        }
    }

    /// Mass within [`BOUNDARY_CELLS`] cells of any edge of the box.
    pub fn boundary_mass(&self) -> f64 {
        let g = &self.grid;
        let b = BOUNDARY_CELLS;
        let mut total = 0.0;
        for iq in 0..g.n_q {
            let row = &self.f[iq * g.n_j..(iq + 1) * g.n_j];
            if iq < b || iq >= g.n_q - b {
                total += row.iter().map(|v| v.abs()).sum::<f64>();
            } else {
                total += row[..b].iter().chain(&row[g.n_j - b..]).map(|v| v.abs()).sum::<f64>();
            }
        }
        total * g.cell_area()
    }
}

pub(crate) struct Moments {
    pub mean_q: f64,
    pub mean_j: f64,
    pub var_q: f64,
    pub var_j: f64,
}

/// Gaussian `exp(−((q−q_c)² + (j−j_c)²)/γ)/(πγ)`, the coherent state of
/// quantumness `gamma` centred on `center`.
pub fn coherent_state(
    grid: PhaseSpaceGrid,
    gamma: f64,
    center: (f64, f64),
    tau: f64,
) -> Result<WignerState> {
    if !(gamma > 0.0 && gamma <= 2.0) {
        return Err(Error::invalid("gamma_init", format!("must lie in (0, 2], got {gamma}")));
    }
    // Mass of each 1-D marginal beyond the box edges.
    let tail = |c: f64, half: f64| {
        let s = gamma.sqrt();
        0.5 * (erfc((half - c) / s) + erfc((half + c) / s))
    };
    let outside = tail(center.0, grid.q_half) + tail(center.1, grid.j_half);
    if outside > 1e-8 {
        return Err(Error::Grid(format!(
            "Gaussian tail mass {outside:e} outside the box exceeds 1e-8"
        )));
    }
    let mut f = vec![0.0; grid.len()];
    let norm = 1.0 / (std::f64::consts::PI * gamma);
    for iq in 0..grid.n_q {
        let dq = grid.q(iq) - center.0;
        for ij in 0..grid.n_j {
            let dj = grid.j(ij) - center.1;
            f[iq * grid.n_j + ij] = norm * (-(dq * dq + dj * dj) / gamma).exp();
        }
    }
    Ok(WignerState {
        grid,
        f,
        tau,
        gamma,
    })
}

/// Ground state of quantumness `gamma_init`, centred at the origin. At
/// `gamma_init = 2` each quadrature has unit variance.
pub fn ground_state(grid: PhaseSpaceGrid, gamma_init: f64, tau: f64) -> Result<WignerState> {
    coherent_state(grid, gamma_init, (0.0, 0.0), tau)
}

/// Band around the lock cut, in cells, that must be nearly empty before
/// populations count as separated.
pub const SEPARATION_GAP_CELLS: f64 = 3.0;
/// Largest mass tolerated inside the separation band.
pub const MAX_GAP_MASS: f64 = 1e-2;

/// Mass outside the origin-centred disc `q² + j² ≤ 4α̃τ/(3β)`, the same cut
/// the trajectory classifier applies.
pub fn locked_fraction(state: &WignerState, model: &DimensionlessParams) -> Result<f64> {
    let (outside, gap) = lock_split(state, model)?;
    if gap > MAX_GAP_MASS {
        return Err(Error::NotSeparated(format!(
            "mass {gap:.3e} within {SEPARATION_GAP_CELLS} cells of the lock cut at tau = {}",
            state.tau
        )));
    }
    Ok(outside / state.norm())
}

/// Mass outside the lock cut and mass in the band around it.
pub(crate) fn lock_split(state: &WignerState, model: &DimensionlessParams) -> Result<(f64, f64)> {
    if !(state.tau > 0.0) {
        return Err(Error::NotSeparated(format!(
            "no locked orbit before resonance (tau = {})",
            state.tau
        )));
    }
    let g = &state.grid;
    let r_cut = (0.5 * model.locked_amplitude_sq(state.tau)).sqrt();
    let half_gap = 0.5 * SEPARATION_GAP_CELLS * g.dq().max(g.dj());
    if r_cut <= half_gap {
        return Err(Error::NotSeparated(format!(
            "lock cut {r_cut} is within {SEPARATION_GAP_CELLS} cells of the origin"
        )));
    }
    let (lo2, hi2) = ((r_cut - half_gap).powi(2), (r_cut + half_gap).powi(2));
    let cut2 = r_cut * r_cut;
    let (mut outside, mut gap) = (0.0, 0.0);
    for iq in 0..g.n_q {
        let q2 = g.q(iq).powi(2);
        for ij in 0..g.n_j {
            let r2 = q2 + g.j(ij).powi(2);
            let v = state.f[iq * g.n_j + ij];
            if r2 > cut2 {
                outside += v;
            }
            if r2 >= lo2 && r2 <= hi2 {
                gap += v.abs();
            }
        }
    }
    Ok((outside * g.cell_area(), gap * g.cell_area()))
}

/// `(min f, ∫|min(f, 0)| dq dj)`.
pub fn negativity(state: &WignerState) -> (f64, f64) {
    let min = state.f.iter().cloned().fold(f64::INFINITY, f64::min);
    let neg = state.f.iter().filter(|&&v| v < 0.0).fold(0.0, |acc, v| acc - v);
    (min, neg * state.grid.cell_area())
}

/// Named parameter sets for phase-space runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    N10,
    N7,
    N5,
    /// The n = 5 constants evolved with `γ = 10⁻⁴`.
    Classical,
}

/// End of the phase-space runs.
pub const PRESET_TAU_END: f64 = 4215.0;
/// Quantumness of the classical preset.
pub const CLASSICAL_GAMMA: f64 = 1e-4;

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::N10, Preset::N7, Preset::N5, Preset::Classical];

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "n10" => Some(Preset::N10),
            "n7" => Some(Preset::N7),
            "n5" => Some(Preset::N5),
            "classical" => Some(Preset::Classical),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::N10 => "n10",
            Preset::N7 => "n7",
            Preset::N5 => "n5",
            Preset::Classical => "classical",
        }
    }

    pub fn model(&self) -> DimensionlessParams {
        match self {
            Preset::N10 => DimensionlessParams::reference(10),
            Preset::N7 => DimensionlessParams::reference(7),
            Preset::N5 => DimensionlessParams::reference(5),
            Preset::Classical => DimensionlessParams::reference(5).with_gamma(CLASSICAL_GAMMA),
        }
    }

    pub fn chirp(&self) -> ChirpProfile {
        ChirpProfile::standard(self.model().alpha_tilde)
            .and_then(|c| c.with_end(PRESET_TAU_END))
            .expect("preset chirp is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, half: f64) -> PhaseSpaceGrid {
        PhaseSpaceGrid::new(n, n, half, half).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(PhaseSpaceGrid::new(32, 64, 5.0, 5.0).is_err());
        assert!(PhaseSpaceGrid::new(96, 64, 5.0, 5.0).is_err());
        assert!(PhaseSpaceGrid::new(64, 64, 0.0, 5.0).is_err());
        let g = grid(128, 8.0);
        assert_eq!(g.dq(), 0.125);
        assert_eq!(g.q(0), -8.0);
        assert_eq!(g.k_q().len(), 65);
        assert!((g.k_q()[64] - std::f64::consts::PI / 0.125).abs() < 1e-12);
    }

    #[test]
    fn vacuum_moments_and_norm() {
        let s = ground_state(grid(128, 10.0), 2.0, 0.0).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-8);
        let m = s.moments();
        assert!((m.var_q - 1.0).abs() < 1e-6 && (m.var_j - 1.0).abs() < 1e-6);
        assert!(m.mean_q.abs() < 1e-12 && m.mean_j.abs() < 1e-12);
        let (min, neg) = negativity(&s);
        assert!(min >= -1e-12 && neg <= 1e-12);
        for gamma in [0.05, 0.5, 1.3] {
            let s = ground_state(grid(256, 10.0), gamma, 0.0).unwrap();
            assert!((s.norm() - 1.0).abs() < 1e-8, "{gamma}");
        }
    }

    #[test]
    fn small_box_is_rejected() {
        assert!(matches!(ground_state(grid(64, 3.0), 2.0, 0.0), Err(Error::Grid(_))));
        assert!(ground_state(grid(64, 3.0), 0.0, 0.0).is_err());
        assert!(ground_state(grid(64, 3.0), 2.5, 0.0).is_err());
    }

    #[test]
    fn locked_fraction_limits() {
        let dp = Preset::N10.model();
        let tau = PRESET_TAU_END;
        let g = PhaseSpaceGrid::for_run(128, &dp, tau).unwrap();
        let vac = ground_state(g, 2.0, tau).unwrap();
        // Oracle: Rayleigh tail exp(−r²/2) of the unit-variance vacuum.
        let r2 = 0.5 * dp.locked_amplitude_sq(tau);
        let tail = (-0.5 * r2).exp();
        assert!((locked_fraction(&vac, &dp).unwrap() / tail - 1.0).abs() < 0.02);
        let a = dp.locked_amplitude_sq(tau).sqrt();
        let on_orbit = coherent_state(g, 0.1, (0.0, -a), tau).unwrap();
        assert!((locked_fraction(&on_orbit, &dp).unwrap() - 1.0).abs() < 1e-10);
        let straddling = coherent_state(g, 1.0, ((0.5f64).sqrt() * a, 0.0), tau).unwrap();
        assert!(matches!(locked_fraction(&straddling, &dp), Err(Error::NotSeparated(_))));
        let early = ground_state(g, 2.0, -10.0).unwrap();
        assert!(locked_fraction(&early, &dp).is_err());
    }

    #[test]
    fn boundary_band() {
        let g = grid(64, 8.0);
        let centred = ground_state(g, 2.0, 0.0).unwrap();
        assert!(centred.boundary_mass() < 1e-10);
        let mut edge = centred.clone();
        edge.f.iter_mut().for_each(|v| *v = 1.0 / (16.0 * 16.0));
        let band = 1.0 - (58.0f64 / 64.0).powi(2);
        assert!((edge.boundary_mass() - band).abs() < 1e-12);
    }

    #[test]
    fn presets() {
        for p in Preset::ALL {
            assert_eq!(Preset::parse(p.name()), Some(p));
            assert_eq!(p.chirp().tau_end, PRESET_TAU_END);
        }
        assert_eq!(Preset::Classical.model().gamma, CLASSICAL_GAMMA);
        assert_eq!(Preset::N5.model().gamma, 2.0);
    }
}
