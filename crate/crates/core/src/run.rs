//! Experiment orchestration: runs one experiment from a [`RunConfig`] and
//! writes CSV tables, a JSON sidecar and a manifest into an output
//! directory.
//!
//! The manifest is written last. It lists every other file with its
//! SHA-256 and records whether the run completed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::dynamics::{classify, phase_mismatch, OscState, Rk4};
use crate::error::{Error, Result};
use crate::threshold::{
    alpha_scaling, critical_epsilon, initial_with_mismatch, kappa_estimate, predicted_width_eps,
    predicted_width_volts, InitialDistribution, MonteCarlo, TemperatureSweep, BISECTION_REL_TOL,
};
use crate::units::{
    effective_temperature, normalization, quantumness, voltage_unit, DimensionlessParams,
};
use crate::wigner::{
    export_snapshot, ground_state, write_csv, Filter, PhaseSpaceGrid, Preset, Scheme, SplitStep,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST: &str = "manifest.json";

/// Default Wigner step.
pub const WIGNER_DTAU: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Convert,
    Trajectory,
    Scan,
    Kappa,
    AlphaScaling,
    TempSweep,
    Wigner,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Convert => "convert",
            Experiment::Trajectory => "trajectory",
            Experiment::Scan => "scan",
            Experiment::Kappa => "kappa",
            Experiment::AlphaScaling => "alpha-scaling",
            Experiment::TempSweep => "temp-sweep",
            Experiment::Wigner => "wigner",
        }
    }

    fn stem(&self) -> String {
        self.name().replace('-', "_")
    }
}

/// Overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: Experiment,
    pub status: String,
    pub error: Option<String>,
    pub version: String,
    pub seed: u64,
    pub workers: usize,
    pub started: String,
    pub finished: String,
    pub config: RunConfig,
    pub outputs: Vec<OutputRecord>,
}

struct Outputs {
    dir: PathBuf,
    csv: bool,
    records: Vec<OutputRecord>,
}

impl Outputs {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.records.push(OutputRecord {
            file: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    fn csv(&mut self, name: &str, text: &str) -> Result<()> {
        if self.csv {
            self.write(name, text.as_bytes())?;
        }
        Ok(())
    }

    fn file(&mut self, name: &str) -> Result<()> {
        let path = self.dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.records.push(OutputRecord {
            file: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }
}

struct Context<'a> {
    cfg: &'a RunConfig,
    seed: u64,
    out: Outputs,
}

/// Runs `experiment` and returns its manifest. On failure the manifest is
/// still written, marked failed, and the error is returned.
pub fn run(experiment: Experiment, cfg: &RunConfig, opts: &RunOptions) -> Result<RunManifest> {
    let dir = opts
        .out
        .clone()
        .or_else(|| cfg.output.directory.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    prepare_dir(&dir)?;
    let seed = opts.seed.or(cfg.experiment.seed).unwrap_or_else(fresh_seed);
    let workers = opts
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(Error::Config(vec!["--workers must be >= 1".into()]));
    }
    let mut cfg = cfg.clone();
    cfg.experiment.seed = Some(seed);
    let started = now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(vec![format!("worker pool: {e}")]))?;
    let mut ctx = Context {
        cfg: &cfg,
        seed,
        out: Outputs {
            dir: dir.clone(),
            csv: cfg.output.csv,
            records: Vec::new(),
        },
    };
    let result = pool.install(|| dispatch(experiment, &mut ctx));
    let manifest = RunManifest {
        experiment,
        status: if result.is_ok() { "complete" } else { "failed" }.into(),
        error: result.as_ref().err().map(|e| e.to_string()),
        version: VERSION.into(),
        seed,
        workers,
        started,
        finished: now(),
        config: cfg.clone(),
        outputs: std::mem::take(&mut ctx.out.records),
    };
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    result.map(|_| manifest)
}

/// Creates `dir`, which must be absent or empty so that the manifest can
/// account for every file in it.
fn prepare_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        let mut entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        if entries.next().is_some() {
            return Err(Error::Config(vec![format!(
                "output directory {} is not empty",
                dir.display()
            )]));
        }
        Ok(())
    } else {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
    }
}

fn fresh_seed() -> u64 {
    let t = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .unwrap_or_default();
    t.as_nanos() as u64 ^ (std::process::id() as u64) << 32
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

fn dispatch(experiment: Experiment, ctx: &mut Context) -> Result<()> {
    let results = match experiment {
        Experiment::Convert => convert(ctx)?,
        Experiment::Trajectory => trajectory(ctx)?,
        Experiment::Scan => scan(ctx)?,
        Experiment::Kappa => kappa(ctx)?,
        Experiment::AlphaScaling => alpha(ctx)?,
        Experiment::TempSweep => temp_sweep(ctx)?,
        Experiment::Wigner => wigner(ctx)?,
    };
    let sidecar = json!({
        "experiment": experiment.name(),
        "version": VERSION,
        "seed": ctx.seed,
        "config": ctx.cfg,
        "results": results,
    });
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    ctx.out.write(&format!("{}.json", experiment.stem()), text.as_bytes())
}

fn rk(ctx: &Context, default: f64) -> Result<Rk4> {
    Rk4::new(ctx.cfg.experiment.dtau.unwrap_or(default))
}

fn convert(ctx: &mut Context) -> Result<Value> {
    let p = ctx.cfg.circuit().ok_or_else(|| {
        Error::Config(vec!["convert needs a [circuit] section".into()])
    })?;
    let (dp, _) = ctx.cfg.dimensionless()?;
    let t_eff = effective_temperature(p.temperature, p.omega)?;
    let scale = normalization(p, t_eff);
    let unit = voltage_unit(p, &scale);
    let rows = [
        ("t_eff_K", t_eff),
        ("zero_point_K", p.zero_point_temperature()),
        ("gamma", quantumness(p.temperature, p.omega)?),
        ("beta", dp.beta),
        ("alpha_tilde", dp.alpha_tilde),
        ("epsilon", dp.epsilon),
        ("q0_C", scale.q0),
        ("j0_A", scale.j0),
        ("volts_per_epsilon", unit),
        ("predicted_width_V", predicted_width_volts(p, ctx.cfg.experiment.kappa)?),
    ];
    let mut csv = String::from("quantity,value\n");
    for (k, v) in rows {
        writeln!(csv, "{k},{v:e}").unwrap();
    }
    ctx.out.csv("convert.csv", &csv)?;
    Ok(json!({
        "circuit": p,
        "dimensionless": dp,
        "kappa": ctx.cfg.experiment.kappa,
        "values": rows.iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
    }))
}

fn trajectory(ctx: &mut Context) -> Result<Value> {
    let (dp, _) = ctx.cfg.dimensionless()?;
    let chirp = ctx.cfg.chirp.profile(dp.alpha_tilde)?;
    let e = &ctx.cfg.experiment;
    let rk = rk(ctx, Rk4::default().dtau)?;
    let start = OscState::new(e.q0, e.j0, chirp.tau_start);
    let mut csv = String::from("tau,q,j,amplitude,phase_mismatch\n");
    let mut row = |s: &OscState| {
        writeln!(
            csv,
            "{:e},{:e},{:e},{:e},{:e}",
            s.tau,
            s.q,
            s.j,
            s.amplitude(),
            phase_mismatch(s, &chirp, s.tau)
        )
        .unwrap();
    };
    let end = rk.run(start, chirp.tau_end, &dp, &chirp, e.every.max(1), &mut row)?;
    ctx.out.csv("trajectory.csv", &csv)?;
    Ok(json!({
        "model": dp,
        "chirp": chirp,
        "dtau": rk.dtau,
        "classification": classify(&end, &dp, &chirp),
        "final_state": end,
        "final_amplitude": end.amplitude(),
        "locked_amplitude": dp.locked_amplitude_sq(chirp.tau_end).sqrt(),
    }))
}

fn scan(ctx: &mut Context) -> Result<Value> {
    let (dp, variance) = ctx.cfg.dimensionless()?;
    let chirp = ctx.cfg.chirp.profile(dp.alpha_tilde)?;
    let e = &ctx.cfg.experiment;
    let dist = InitialDistribution::new(variance, ctx.seed)?;
    let mut mc = MonteCarlo::new(dp, chirp, dist, e.trajectories);
    if let Some(h) = e.dtau {
        mc.rk = Rk4::new(h)?;
    }
    let grid = match (e.epsilon_min, e.epsilon_max) {
        (Some(a), Some(b)) => {
            let step = (b - a) / (e.points - 1) as f64;
            (0..e.points).map(|i| a + i as f64 * step).collect()
        }
        _ => {
            let start = OscState::new(0.0, 0.0, chirp.tau_start);
            let center = critical_epsilon(start, &dp, &chirp, &mc.rk, BISECTION_REL_TOL)?;
            let s = predicted_width_eps(&dp, dist.sigma(), e.kappa)?
                / (2.0 * std::f64::consts::PI).sqrt();
            MonteCarlo::grid(center, (4.0 * s).max(0.02 * center), e.points)
        }
    };
    let curve = mc.threshold_scan(&grid)?.fitted()?;
    let mut csv = Vec::new();
    curve.write_csv(&mut csv).map_err(|e| Error::io("scan.csv", e))?;
    ctx.out.csv("scan.csv", std::str::from_utf8(&csv).unwrap())?;
    Ok(json!({
        "model": dp,
        "chirp": chirp,
        "variance_scale": variance,
        "trajectories": e.trajectories,
        "dtau": mc.rk.dtau,
        "fit": curve.fit,
        "failed_trajectories": curve.entries.iter().map(|p| p.n_failed).sum::<u64>(),
    }))
}

fn kappa(ctx: &mut Context) -> Result<Value> {
    let (dp, _) = ctx.cfg.dimensionless()?;
    let chirp = ctx.cfg.chirp.profile(dp.alpha_tilde)?;
    let e = &ctx.cfg.experiment;
    let rk = rk(ctx, MonteCarlo::default_rk().dtau)?;
    let phases: Vec<f64> = (0..e.phases)
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 / e.phases as f64)
        .collect();
    let est = kappa_estimate(&dp, &chirp, &rk, &e.a0, &phases)?;
    let mut csv = String::from("a0,dphi,epsilon_c\n");
    for c in &est.cells {
        writeln!(csv, "{:e},{:e},{:e}", c.a0, c.dphi, c.epsilon_c).unwrap();
    }
    ctx.out.csv("kappa.csv", &csv)?;
    let check = initial_with_mismatch(1.0, 0.0, &chirp);
    Ok(json!({
        "model": dp,
        "chirp": chirp,
        "dtau": rk.dtau,
        "epsilon_c0": est.epsilon_c0,
        "epsilon_c": est.epsilon_c,
        "kappa_raw": est.raw,
        "kappa_per_root_alpha": est.per_root_alpha,
        "kappa_shift_route": est.shift_route,
        "phase_offset": est.phase_offset,
        "max_residual": est.max_residual,
        "relative_residual": est.relative_residual,
        "phase_reference": { "tau": chirp.tau_start, "unit_state_at_zero_mismatch": check },
    }))
}

fn alpha(ctx: &mut Context) -> Result<Value> {
    let (dp, _) = ctx.cfg.dimensionless()?;
    let template = ctx.cfg.chirp.profile(dp.alpha_tilde)?;
    let rk = rk(ctx, MonteCarlo::default_rk().dtau)?;
    let fit = alpha_scaling(&ctx.cfg.experiment.alpha_tilde_list, &dp, &template, &rk)?;
    let mut csv = String::from("alpha_tilde,epsilon_c\n");
    for (a, e) in &fit.points {
        writeln!(csv, "{a:e},{e:e}").unwrap();
    }
    ctx.out.csv("alpha_scaling.csv", &csv)?;
    Ok(json!({
        "model": dp,
        "template": template,
        "dtau": rk.dtau,
        "exponent": fit.exponent,
        "prefactor": fit.prefactor,
    }))
}

fn temp_sweep(ctx: &mut Context) -> Result<Value> {
    let p = *ctx.cfg.circuit().ok_or_else(|| {
        Error::Config(vec!["temp-sweep needs a [circuit] section".into()])
    })?;
    let e = &ctx.cfg.experiment;
    let model = DimensionlessParams::new(e.sim_beta, 0.0, e.sim_alpha_tilde, 2.0);
    model.validate()?;
    let sweep = TemperatureSweep {
        circuit: p,
        model,
        chirp: ctx.cfg.chirp.profile(e.sim_alpha_tilde)?,
        rk: rk(ctx, MonteCarlo::default_rk().dtau)?,
        trajectories: e.trajectories,
        points: e.points,
        kappa: e.kappa,
        seed: ctx.seed,
    };
    let temps: Vec<f64> = e.temperatures_mk.iter().map(|t| t * 1e-3).collect();
    let mut rows = sweep.run(&temps)?;
    if !e.noise_mk.is_empty() {
        let noise: Vec<f64> = e.noise_mk.iter().map(|t| t * 1e-3).collect();
        let shifted = TemperatureSweep {
            seed: ctx.seed.wrapping_add(temps.len() as u64),
            ..sweep
        };
        rows.extend(shifted.run_noise(p.temperature, &noise)?);
    }
    let mut csv = String::from(
        "temperature_mK,noise_mK,t_eff_mK,variance_scale,epsilon_c,width_eps,width_eps_stderr,width_volts,scaled_width_sq_mK\n",
    );
    for r in &rows {
        writeln!(
            csv,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.temperature * 1e3,
            r.noise_temperature * 1e3,
            r.t_eff * 1e3,
            r.variance_scale,
            r.epsilon_c,
            r.width_eps,
            r.width_eps_stderr,
            r.width_volts,
            r.scaled_width_sq * 1e3
        )
        .unwrap();
    }
    ctx.out.csv("temp_sweep.csv", &csv)?;
    Ok(json!({
        "scale_expression": TemperatureSweep::SCALE_EXPRESSION,
        "kappa": e.kappa,
        "reference_temperature_K": sweep.reference_temperature(),
        "sweep": sweep,
        "rows": rows,
    }))
}

fn wigner(ctx: &mut Context) -> Result<Value> {
    let e = &ctx.cfg.experiment;
    let name = e.preset.clone().unwrap_or_else(|| "n5".into());
    let preset = Preset::parse(&name)
        .ok_or_else(|| Error::Config(vec![format!("unknown preset `{name}`")]))?;
    let model = preset.model();
    let chirp = preset.chirp();
    let until = e.until.unwrap_or(chirp.tau_end);
    let dtau = e.dtau.unwrap_or(WIGNER_DTAU);
    let mut problems = Vec::new();
    if !(dtau > 0.0 && dtau <= crate::wigner::MAX_DTAU) {
        problems.push(format!("dtau must lie in (0, {}], got {dtau}", crate::wigner::MAX_DTAU));
    }
    if !(until > chirp.tau_start && until <= chirp.tau_end) {
        problems.push(format!(
            "until must lie in ({}, {}], got {until}",
            chirp.tau_start, chirp.tau_end
        ));
    }
    if matches!(e.snapshot_every, Some(t) if !(t > 0.0)) {
        problems.push("snapshot_every must be positive".into());
    }
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    let grid = PhaseSpaceGrid::for_run(e.grid, &model, until)?;
    let filter = e.filter.then_some(Filter::STANDARD);
    let mut solver =
        SplitStep::new(grid, model, chirp, dtau, Scheme::ExactHarmonic)?.with_filter(filter);
    let every = e
        .snapshot_every
        .map(|t| ((t / dtau).round() as usize).max(1))
        .unwrap_or(usize::MAX);
    let start = ground_state(grid, 2.0, chirp.tau_start)?;
    let stride = (grid.n_q / 256).max(1);
    let mut written = Vec::new();
    let mut failure = None;
    let dir = ctx.out.dir.clone();
    let csv_on = ctx.out.csv;
    let evolution = solver.evolve(start, until, every, |state, _| {
        if failure.is_some() {
            return;
        }
        let stem = format!("wigner_tau{:+07.0}", state.tau);
        let bin = format!("{stem}.bin");
        if let Err(err) = export_snapshot(state, &model, dir.join(&bin)) {
            failure = Some(err);
            return;
        }
        written.push(bin);
        if csv_on {
            let name = format!("{stem}.csv");
            let path = dir.join(&name);
            let res = std::fs::File::create(&path)
                .map(std::io::BufWriter::new)
                .and_then(|w| write_csv(state, stride, w));
            match res {
                Ok(()) => written.push(name),
                Err(err) => failure = Some(Error::io(path, err)),
            }
        }
    });
    for name in &written {
        ctx.out.file(name)?;
    }
    if let Some(err) = failure {
        return Err(err);
    }
    let evolution = evolution?;
    let mut csv = String::from(
        "tau,norm,l2,min_f,negative_mass,locked_fraction,mean_q,mean_j,var_q,var_j,boundary_mass,spectral_tail\n",
    );
    for d in &evolution.series {
        writeln!(
            csv,
            "{:e},{:e},{:e},{:e},{:e},{},{:e},{:e},{:e},{:e},{:e},{:e}",
            d.tau,
            d.norm,
            d.l2,
            d.min_f,
            d.negative_mass,
            d.locked_fraction.map_or(String::new(), |v| format!("{v:e}")),
            d.mean_q,
            d.mean_j,
            d.var_q,
            d.var_j,
            d.boundary_mass,
            d.spectral_tail
        )
        .unwrap();
    }
    ctx.out.csv("wigner_diagnostics.csv", &csv)?;
    let last = evolution.series.last().copied();
    Ok(json!({
        "preset": preset.name(),
        "model": model,
        "chirp": chirp,
        "grid": grid,
        "filter": filter,
        "dtau": evolution.dtau,
        "steps": evolution.steps,
        "final": last,
        "max_norm_drift": evolution.max_norm_drift,
        "max_l2_drift": evolution.max_l2_drift,
        "max_boundary_mass": evolution.max_boundary_mass,
        "max_spectral_tail": evolution.max_spectral_tail,
    }))
}
