//! Drive the orchestration layer from a TOML string, as the binary does.
use autoresonance::config::parse_config;
use autoresonance::run::{run, Experiment, RunOptions};

const CONFIG: &str = r#"
[dimensionless]
beta = 3.55e-6
alpha_tilde = 1e-6
epsilon = 0.024

[experiment]
dtau = 0.05
every = 2000
"#;

fn main() -> autoresonance::Result<()> {
    let cfg = parse_config(CONFIG)?;
    let out = std::env::temp_dir().join(format!("autoresonance-run-{}", std::process::id()));
    let opts = RunOptions {
        seed: Some(1),
        workers: Some(1),
        out: Some(out.clone()),
    };
    let manifest = run(Experiment::Trajectory, &cfg, &opts)?;
    for o in &manifest.outputs {
        println!("{}  {:>8} bytes  {}", o.sha256, o.bytes, o.file);
    }
    println!("written to {}", out.display());
    Ok(())
}
