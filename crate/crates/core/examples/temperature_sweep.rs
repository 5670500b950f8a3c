//! Threshold width against temperature for the 6 GHz circuit, reduced to the
//! width² scale that approaches T_eff. The scale uses the shift prefactor
//! measured first from the deterministic thresholds. A short sweep with 300
//! trajectories per point; expect a few percent of noise.
use autoresonance::dynamics::ChirpProfile;
use autoresonance::threshold::{kappa_estimate, MonteCarlo, TemperatureSweep};
use autoresonance::units::{DimensionlessParams, PhysicalParams};

fn main() -> autoresonance::Result<()> {
    let model = DimensionlessParams::reference(1);
    let chirp = ChirpProfile::standard(model.alpha_tilde)?;
    let phases: Vec<f64> = (0..8).map(|k| k as f64 * std::f64::consts::FRAC_PI_4).collect();
    let kappa = kappa_estimate(&model, &chirp, &MonteCarlo::default_rk(), &[0.25, 0.5, 1.0], &phases)?
        .shift_route;
    println!("measured kappa = {kappa:.3}");
    let sweep = TemperatureSweep {
        circuit: PhysicalParams::six_ghz(),
        model,
        chirp,
        rk: MonteCarlo::default_rk(),
        trajectories: 300,
        points: 11,
        kappa,
        seed: 11,
    };
    println!("{}", TemperatureSweep::SCALE_EXPRESSION);
    println!("T [mK], T_eff [mK], width [nV], scaled width^2 [mK]");
    for row in sweep.run(&[0.0, 0.1, 0.3, 1.0])? {
        println!(
            "{:6.0}, {:6.1}, {:6.3}, {:6.1}",
            row.temperature * 1e3,
            row.t_eff * 1e3,
            row.width_volts * 1e9,
            row.scaled_width_sq * 1e3
        );
    }
    Ok(())
}
