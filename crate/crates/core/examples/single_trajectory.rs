//! One trajectory through the chirp from rest, above and below threshold.
//!
//! Prints amplitude and phase mismatch every 500 τ. Pass a drive to override
//! the two defaults: `cargo run --example single_trajectory -- 0.03`.
use autoresonance::dynamics::{classify, phase_mismatch, ChirpProfile, OscState, Rk4};
use autoresonance::units::DimensionlessParams;

fn main() -> autoresonance::Result<()> {
    let drives: Vec<f64> = match std::env::args().nth(1) {
        Some(s) => vec![s.parse().expect("drive must be a number")],
        None => vec![0.018, 0.024],
    };
    let chirp = ChirpProfile::standard(1e-6)?;
    let rk = Rk4::new(0.05)?;
    for eps in drives {
        let dp = DimensionlessParams::reference(1).with_epsilon(eps);
        println!("epsilon = {eps}");
        let end = rk.run(
            OscState::new(0.0, 0.0, chirp.tau_start),
            chirp.tau_end,
            &dp,
            &chirp,
            10_000,
            |s| {
                println!(
                    "  tau {:9.1}  A {:8.3}  dphi {:+.3}",
                    s.tau,
                    s.amplitude(),
                    phase_mismatch(s, &chirp, s.tau)
                )
            },
        )?;
        println!(
            "  -> {:?}, A = {:.2}, A_locked = {:.2}",
            classify(&end, &dp, &chirp),
            end.amplitude(),
            dp.locked_amplitude_sq(chirp.tau_end).sqrt()
        );
    }
    Ok(())
}
