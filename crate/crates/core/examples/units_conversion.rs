//! Reduce the two circuit presets to model constants at a few temperatures.
use autoresonance::units::{
    drive_voltage, effective_temperature, normalization, reduce, voltage_unit, PhysicalParams,
};

fn main() -> autoresonance::Result<()> {
    for name in ["6GHz", "1.6GHz"] {
        let base = PhysicalParams::preset(name).expect("known preset");
        println!("{name}: zero-point temperature {:.1} mK", base.zero_point_temperature() * 1e3);
        for t in [0.0, 0.05, 0.2, 1.0] {
            let p = base.with_temperature(t);
            let t_eff = effective_temperature(t, p.omega)?;
            let dp = reduce(&p, 27e-9)?;
            let unit = voltage_unit(&p, &normalization(&p, t_eff));
            println!(
                "  T = {:6.1} mK  T_eff = {:6.1} mK  beta = {:.3e}  alpha = {:.3e}  eps(27 nV) = {:.4}  1 eps = {:.3e} V",
                t * 1e3,
                t_eff * 1e3,
                dp.beta,
                dp.alpha_tilde,
                dp.epsilon,
                unit
            );
        }
        let p = base.with_temperature(0.0);
        println!("  eps = 0.0205 is {:.2} nV", drive_voltage(&p, 0.0205)? * 1e9);
    }
    Ok(())
}
