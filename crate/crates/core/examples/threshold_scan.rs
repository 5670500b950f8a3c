//! Monte Carlo locking probability around the zero-state threshold, with an
//! erf fit. Trajectories per point default to 400; pass a number to change it.
use autoresonance::dynamics::{ChirpProfile, OscState};
use autoresonance::threshold::{
    critical_epsilon, InitialDistribution, MonteCarlo, BISECTION_REL_TOL,
};
use autoresonance::units::DimensionlessParams;

fn main() -> autoresonance::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(400, |s| s.parse().expect("count"));
    let dp = DimensionlessParams::reference(1);
    let chirp = ChirpProfile::standard(dp.alpha_tilde)?;
    let mc = MonteCarlo::new(dp, chirp, InitialDistribution::vacuum(7), n);
    let center = critical_epsilon(
        OscState::new(0.0, 0.0, chirp.tau_start),
        &dp,
        &chirp,
        &mc.rk,
        BISECTION_REL_TOL,
    )?;
    println!("deterministic threshold from rest: {center:.5}");
    let curve = mc.threshold_scan(&MonteCarlo::grid(center, 0.002, 9))?.fitted()?;
    let mut out = std::io::stdout();
    curve.write_csv(&mut out).expect("stdout");
    if let Some(fit) = curve.fit {
        println!(
            "fit: eps_c = {:.5} +- {:.1e}, s = {:.2e}, width = {:.2e}",
            fit.epsilon_c, fit.epsilon_c_stderr, fit.s, fit.width
        );
    }
    Ok(())
}
