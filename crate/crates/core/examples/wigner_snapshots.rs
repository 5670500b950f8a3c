//! Evolve the n = 10 Wigner preset from the vacuum on a coarse grid and
//! write snapshots as CSV into a temporary directory. Pass `--until τ` to
//! stop early; the full chirp takes several minutes.
use autoresonance::wigner::{
    ground_state, write_csv, PhaseSpaceGrid, Preset, Scheme, SplitStep,
};

fn main() -> autoresonance::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let preset = Preset::N10;
    let model = preset.model();
    let chirp = preset.chirp();
    let until = match args.iter().position(|a| a == "--until") {
        Some(i) => args[i + 1].parse().expect("until must be a number"),
        None => chirp.tau_end,
    };
    let grid = PhaseSpaceGrid::for_run(256, &model, chirp.tau_end)?;
    let dtau = 0.1;
    let mut solver = SplitStep::new(grid, model, chirp, dtau, Scheme::ExactHarmonic)?;
    let dir = std::env::temp_dir().join("wigner_snapshots");
    std::fs::create_dir_all(&dir).expect("create output dir");
    let every = (2000.0 / dtau) as usize;
    let start = ground_state(grid, 2.0, chirp.tau_start)?;
    let run = solver.evolve(start, until, every, |state, d| {
        let path = dir.join(format!("tau_{:.0}.csv", state.tau));
        let file = std::io::BufWriter::new(std::fs::File::create(&path).expect("create"));
        write_csv(state, 2, file).expect("write");
        println!(
            "tau {:8.1}  negative mass {:.2e}  locked {:?}  -> {}",
            d.tau,
            d.negative_mass,
            d.locked_fraction,
            path.display()
        );
    })?;
    println!(
        "{} steps, norm drift {:.1e}, L2 drift {:.1e}",
        run.steps, run.max_norm_drift, run.max_l2_drift
    );
    Ok(())
}
