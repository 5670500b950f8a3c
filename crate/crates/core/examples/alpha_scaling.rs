//! Zero-state threshold against chirp rate and the fitted power law.
use autoresonance::dynamics::ChirpProfile;
use autoresonance::threshold::{alpha_scaling, MonteCarlo};
use autoresonance::units::DimensionlessParams;

fn main() -> autoresonance::Result<()> {
    let dp = DimensionlessParams::reference(1);
    let template = ChirpProfile::standard(dp.alpha_tilde)?;
    let alphas = [0.25e-6, 0.5e-6, 1e-6, 2e-6, 4e-6];
    let fit = alpha_scaling(&alphas, &dp, &template, &MonteCarlo::default_rk())?;
    for (a, e) in &fit.points {
        println!("alpha = {a:.2e}  eps_c = {e:.5}");
    }
    println!("eps_c = {:.3} * alpha^{:.4}", fit.prefactor, fit.exponent);
    Ok(())
}
