//! Threshold shift against initial amplitude and phase (takes a few minutes).
use autoresonance::dynamics::ChirpProfile;
use autoresonance::threshold::{kappa_estimate, MonteCarlo};
use autoresonance::units::DimensionlessParams;

fn main() -> autoresonance::Result<()> {
    let dp = DimensionlessParams::reference(1);
    let chirp = ChirpProfile::standard(dp.alpha_tilde)?;
    let phases: Vec<f64> = (0..8).map(|k| k as f64 * std::f64::consts::FRAC_PI_4).collect();
    let est = kappa_estimate(&dp, &chirp, &MonteCarlo::default_rk(), &[0.25, 0.5, 1.0], &phases)?;
    println!("a0,dphi,epsilon_c");
    for c in &est.cells {
        println!("{},{:.4},{:.6}", c.a0, c.dphi, c.epsilon_c);
    }
    println!("eps_c(rest) = {:.6}", est.epsilon_c0);
    println!("kappa' = {:.3e}  phase offset = {:.3} rad", est.raw, est.phase_offset);
    println!("kappa' / (2 sqrt alpha) = {:.3}", est.shift_route);
    println!("kappa' / sqrt alpha     = {:.3}", est.per_root_alpha);
    println!("relative residual = {:.3}", est.relative_residual);
    Ok(())
}
