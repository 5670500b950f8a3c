//! Capture thresholds of single, noise-free trajectories.

use serde::{Deserialize, Serialize};

use crate::dynamics::{classify, ChirpProfile, Lock, OscState, Rk4};
use crate::error::{Error, Result};
use crate::units::DimensionlessParams;

/// Relative bracket width at which bisection stops.
pub const BISECTION_REL_TOL: f64 = 1e-4;

/// Zero-state threshold scale `α̃^{3/4}/√β` times the coefficient measured
/// for the default sweep window. Only used to seed brackets.
fn threshold_guess(model: &DimensionlessParams, chirp: &ChirpProfile) -> f64 {
    1.25 * chirp.alpha_tilde.powf(0.75) / model.beta.sqrt()
}

/// Lowest drive that phase-locks a trajectory started from `initial`.
pub fn critical_epsilon(
    initial: OscState,
    model: &DimensionlessParams,
    chirp: &ChirpProfile,
    rk: &Rk4,
    rel_tol: f64,
) -> Result<f64> {
    Ok(critical_epsilons(&[initial], model, chirp, rk, rel_tol)?[0])
}

/// Bisects the capture threshold of every start state at once, advancing
/// all pending trajectories together.
pub fn critical_epsilons(
    cells: &[OscState],
    model: &DimensionlessParams,
    chirp: &ChirpProfile,
    rk: &Rk4,
    rel_tol: f64,
) -> Result<Vec<f64>> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::invalid("rel_tol", "must lie in (0, 1)"));
    }
    let locked = |trials: &[(OscState, f64)]| -> Result<Vec<bool>> {
        rk.run_batch_driven(trials, chirp.tau_end, model, chirp)?
            .into_iter()
            .map(|r| r.map(|s| classify(&s, model, chirp) == Lock::Locked))
            .collect()
    };
    let name = |i: usize| {
        let c = &cells[i];
        format!("cell {i} (q = {}, j = {})", c.q, c.j)
    };

    let mut lo = vec![0.0; cells.len()];
    let zero: Vec<_> = cells.iter().map(|c| (*c, 0.0)).collect();
    for (i, l) in locked(&zero)?.into_iter().enumerate() {
        if l {
            return Err(Error::Bracket {
                lo: 0.0,
                hi: 0.0,
                cell: format!("{}: locks without drive", name(i)),
            });
        }
    }
    let mut hi = vec![2.0 * threshold_guess(model, chirp); cells.len()];
    let mut pending: Vec<usize> = (0..cells.len()).collect();
    for _ in 0..12 {
        if pending.is_empty() {
            break;
        }
        let trials: Vec<_> = pending.iter().map(|&i| (cells[i], hi[i])).collect();
        let res = locked(&trials)?;
        let mut next = Vec::new();
        for (&i, l) in pending.iter().zip(res) {
            if !l {
                lo[i] = hi[i];
                hi[i] *= 2.0;
                next.push(i);
            }
        }
        pending = next;
    }
    if let Some(&i) = pending.first() {
        return Err(Error::Bracket {
            lo: lo[i],
            hi: hi[i],
            cell: format!("{}: never locks", name(i)),
        });
    }

    loop {
        let open: Vec<usize> = (0..cells.len())
            .filter(|&i| hi[i] - lo[i] > rel_tol * hi[i])
            .collect();
        if open.is_empty() {
            break;
        }
        let trials: Vec<_> = open
            .iter()
            .map(|&i| (cells[i], 0.5 * (lo[i] + hi[i])))
            .collect();
        for (&i, l) in open.iter().zip(locked(&trials)?) {
            let mid = 0.5 * (lo[i] + hi[i]);
            if l {
                hi[i] = mid;
            } else {
                lo[i] = mid;
            }
        }
    }
    Ok(lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect())
}

/// Start state of amplitude `a0` whose phase leads the drive by `dphi` at
/// the start of the sweep.
pub fn initial_with_mismatch(a0: f64, dphi: f64, chirp: &ChirpProfile) -> OscState {
    let phase = chirp.phase(chirp.tau_start) + dphi;
    OscState::new(a0 * phase.cos(), -a0 * phase.sin(), chirp.tau_start)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaCell {
    pub a0: f64,
    pub dphi: f64,
    pub epsilon_c: f64,
}

/// Linear threshold-shift model
/// `ε̃_c(A₀, Δφ) = ε_c − κ'·A₀·cos(Δφ − δ)` fitted over a grid of start
/// states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaEstimate {
    /// Threshold of the state at rest.
    pub epsilon_c0: f64,
    /// Intercept of the fit.
    pub epsilon_c: f64,
    /// Shift per unit start amplitude, κ'.
    pub raw: f64,
    /// Mismatch δ of maximal threshold reduction. The free oscillation
    /// slips against the chirp between the start and the capture, so δ
    /// depends on where the sweep begins.
    pub phase_offset: f64,
    /// κ'/√α̃.
    pub per_root_alpha: f64,
    /// κ'/(2√α̃): the coefficient for which the Gaussian average of the
    /// shift model gives the width `2κ√(2πα̃)σ`.
    pub shift_route: f64,
    pub cells: Vec<KappaCell>,
    /// Largest |ε̃_c − model| over the grid.
    pub max_residual: f64,
    /// `max_residual / (κ' · max A₀)`.
    pub relative_residual: f64,
}

pub fn kappa_estimate(
    model: &DimensionlessParams,
    chirp: &ChirpProfile,
    rk: &Rk4,
    a0_grid: &[f64],
    dphi_grid: &[f64],
) -> Result<KappaEstimate> {
    let locked_amp = model.locked_amplitude_sq(chirp.tau_end).sqrt();
    if a0_grid.is_empty() || a0_grid.iter().any(|&a| !(a > 0.0 && a <= 0.25 * locked_amp)) {
        return Err(Error::invalid(
            "a0_grid",
            format!("amplitudes must lie in (0, {}]", 0.25 * locked_amp),
        ));
    }
    if dphi_grid.len() < 4 {
        return Err(Error::invalid("dphi_grid", "needs at least 4 phases"));
    }

    let mut states = vec![OscState::new(0.0, 0.0, chirp.tau_start)];
    let mut labels = vec![(0.0, 0.0)];
    for &a0 in a0_grid {
        for &dphi in dphi_grid {
            states.push(initial_with_mismatch(a0, dphi, chirp));
            labels.push((a0, dphi));
        }
    }
    let thresholds = critical_epsilons(&states, model, chirp, rk, BISECTION_REL_TOL).map_err(
        |e| match e {
            Error::Bracket { lo, hi, cell } => {
                let idx: usize = cell
                    .strip_prefix("cell ")
                    .and_then(|r| r.split(' ').next())
                    .and_then(|n| n.parse().ok())
                    .unwrap_or(0);
                let (a0, dphi) = labels[idx];
                Error::Bracket {
                    lo,
                    hi,
                    cell: format!("A0 = {a0}, dphi = {dphi} ({cell})"),
                }
            }
            e => e,
        },
    )?;
    let cells: Vec<KappaCell> = labels
        .iter()
        .zip(&thresholds)
        .map(|(&(a0, dphi), &epsilon_c)| KappaCell {
            a0,
            dphi,
            epsilon_c,
        })
        .collect();

    // ε̃ = c0 − a·A₀cosΔφ − b·A₀sinΔφ
    let rows: Vec<[f64; 3]> = cells
        .iter()
        .map(|c| [1.0, -c.a0 * c.dphi.cos(), -c.a0 * c.dphi.sin()])
        .collect();
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for (r, c) in rows.iter().zip(&cells) {
        for i in 0..3 {
            aty[i] += r[i] * c.epsilon_c;
            for k in 0..3 {
                ata[i][k] += r[i] * r[k];
            }
        }
    }
    let [c0, a, b] = solve3(ata, aty).ok_or_else(|| {
        Error::invalid("dphi_grid", "phases do not determine the shift direction")
    })?;
    let raw = a.hypot(b);
    let max_residual = rows
        .iter()
        .zip(&cells)
        .map(|(r, c)| (c0 + a * r[1] + b * r[2] - c.epsilon_c).abs())
        .fold(0.0, f64::max);
    let a0_max = a0_grid.iter().cloned().fold(0.0, f64::max);
    let root = chirp.alpha_tilde.sqrt();
    Ok(KappaEstimate {
        epsilon_c0: cells[0].epsilon_c,
        epsilon_c: c0,
        raw,
        phase_offset: b.atan2(a),
        per_root_alpha: raw / root,
        shift_route: raw / (2.0 * root),
        cells,
        max_residual,
        relative_residual: max_residual / (raw * a0_max),
    })
}

#[allow(clippy::needless_range_loop)]
fn solve3(mut m: [[f64; 3]; 3], mut y: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        y.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            y[row] -= f * y[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (y[row] - tail) / m[row][row];
    }
    Some(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaScaling {
    /// `(α̃, ε_c)` pairs.
    pub points: Vec<(f64, f64)>,
    /// Slope of ln ε_c against ln α̃.
    pub exponent: f64,
    /// `ε_c / α̃^exponent` at the fit.
    pub prefactor: f64,
}

/// Zero-state thresholds across chirp rates. `template` fixes the sweep
/// window in capture times; it is rescaled to each rate.
pub fn alpha_scaling(
    alphas: &[f64],
    model: &DimensionlessParams,
    template: &ChirpProfile,
    rk: &Rk4,
) -> Result<AlphaScaling> {
    if alphas.len() < 4 {
        return Err(Error::invalid("alphas", "needs at least 4 chirp rates"));
    }
    let (min, max) = alphas
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    if !(max >= 10.0 * min) {
        return Err(Error::invalid("alphas", "must span at least one decade"));
    }
    let points = alphas
        .iter()
        .map(|&a| {
            let chirp = template.rescaled(a)?;
            let m = model.with_alpha_tilde(a);
            let e = critical_epsilon(
                OscState::new(0.0, 0.0, chirp.tau_start),
                &m,
                &chirp,
                rk,
                BISECTION_REL_TOL,
            )?;
            Ok((a, e))
        })
        .collect::<Result<Vec<_>>>()?;
    let (slope, intercept) = log_log_fit(&points);
    Ok(AlphaScaling {
        points,
        exponent: slope,
        prefactor: intercept.exp(),
    })
}

pub(crate) fn log_log_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn setup(n: u32) -> (DimensionlessParams, ChirpProfile, Rk4) {
        let dp = DimensionlessParams::reference(n);
        let chirp = ChirpProfile::standard(dp.alpha_tilde).unwrap();
        (dp, chirp, Rk4::new(0.05).unwrap())
    }

    #[test]
    fn bisection_brackets_the_transition() {
        let (dp, chirp, rk) = setup(10);
        let start = OscState::new(0.0, 0.0, chirp.tau_start);
        let ec = critical_epsilon(start, &dp, &chirp, &rk, BISECTION_REL_TOL).unwrap();
        let run = |e: f64| rk.integrate(start, &dp.with_epsilon(e), &chirp).unwrap().classification;
        assert_eq!(run(ec * (1.0 - 2e-4)), Lock::Unlocked);
        assert_eq!(run(ec * (1.0 + 2e-4)), Lock::Locked);
    }

    #[test]
    fn zero_drive_lock_is_a_bracket_error() {
        let (dp, chirp, rk) = setup(10);
        let big = dp.locked_amplitude_sq(chirp.tau_end).sqrt() * 2.0;
        let r = critical_epsilon(OscState::new(big, 0.0, chirp.tau_start), &dp, &chirp, &rk, 1e-3);
        assert!(matches!(r, Err(Error::Bracket { .. })));
    }

    #[test]
    fn rest_state_threshold_is_phase_independent() {
        let (_, chirp, _) = setup(10);
        for k in 0..4 {
            let s = initial_with_mismatch(0.0, k as f64, &chirp);
            assert_eq!((s.q, s.j), (0.0, 0.0));
        }
    }

    #[test]
    fn kappa_model_structure() {
        let (dp, chirp, rk) = setup(10);
        let phases: Vec<f64> = (0..8).map(|k| k as f64 * PI / 4.0).collect();
        let est = kappa_estimate(&dp, &chirp, &rk, &[0.2], &phases).unwrap();
        assert!(est.raw > 0.0);
        // Quadrature to the most favourable mismatch: shift nearly vanishes.
        let quad = [est.phase_offset + PI / 2.0, est.phase_offset - PI / 2.0];
        let along = kappa_estimate(&dp, &chirp, &rk, &[0.2], &[
            est.phase_offset,
            quad[0],
            est.phase_offset + PI,
            quad[1],
        ])
        .unwrap();
        let shift = |c: &KappaCell| c.epsilon_c - along.epsilon_c0;
        let full = shift(&along.cells[1]).abs();
        assert!(shift(&along.cells[2]).abs() < 0.1 * full);
        assert!(shift(&along.cells[4]).abs() < 0.1 * full);
        assert!(est.relative_residual < 0.1);
    }

    #[test]
    fn kappa_rejects_large_amplitudes() {
        let (dp, chirp, rk) = setup(10);
        let phases = [0.0, 1.0, 2.0, 3.0];
        assert!(kappa_estimate(&dp, &chirp, &rk, &[100.0], &phases).is_err());
        assert!(kappa_estimate(&dp, &chirp, &rk, &[0.1], &phases[..2]).is_err());
    }

    #[test]
    fn log_slope_ignores_common_factor() {
        let pts = vec![(1e-7, 3e-3), (1e-6, 1.7e-2), (1e-5, 0.1), (1e-4, 0.55)];
        let doubled: Vec<_> = pts.iter().map(|&(a, e)| (a, 2.0 * e)).collect();
        let (s1, _) = log_log_fit(&pts);
        let (s2, _) = log_log_fit(&doubled);
        assert!((s1 - s2).abs() < 1e-12);
    }

    #[test]
    fn alpha_scaling_validation() {
        let (dp, chirp, rk) = setup(10);
        assert!(alpha_scaling(&[1e-6, 2e-6, 3e-6], &dp, &chirp, &rk).is_err());
        assert!(alpha_scaling(&[1e-6, 2e-6, 3e-6, 4e-6], &dp, &chirp, &rk).is_err());
    }
}
