//! Run configuration files.
//!
//! A configuration is TOML with a `[circuit]` or a `[dimensionless]` section
//! (never both), and optional `[chirp]`, `[experiment]` and `[output]`
//! sections. Validation reports every problem found, not just the first.
//!
//! ```toml
//! [circuit]
//! preset = "6GHz"          # optional; the keys below override it
//! temperature_mK = 15
//! chirp_MHz_per_us = 50.6
//!
//! [experiment]
//! trajectories = 2000
//! seed = 7
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{ChirpProfile, DEFAULT_END_CAPTURE_TIMES, DEFAULT_START_CAPTURE_TIMES};
use crate::error::{Error, Result};
use crate::units::{chirp_rate_from_mhz_per_us, DimensionlessParams, PhysicalParams};

/// Either a circuit to be reduced or explicit model constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSection {
    Circuit(PhysicalParams),
    Dimensionless {
        beta: f64,
        gamma: f64,
        alpha_tilde: f64,
        /// Initial-state variance per quadrature, in model units.
        variance_scale: f64,
        epsilon: Option<f64>,
    },
}

/// Sweep window; `None` selects the default position in capture times.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChirpSection {
    pub tau_start: Option<f64>,
    pub tau_end: Option<f64>,
}

impl ChirpSection {
    pub fn profile(&self, alpha_tilde: f64) -> Result<ChirpProfile> {
        let root = alpha_tilde.sqrt();
        ChirpProfile::new(
            alpha_tilde,
            self.tau_start.unwrap_or(-DEFAULT_START_CAPTURE_TIMES / root),
            self.tau_end.unwrap_or(DEFAULT_END_CAPTURE_TIMES / root),
        )
    }
}

/// Settings for the individual experiments. Each experiment reads only the
/// keys it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSection {
    pub seed: Option<u64>,
    /// Monte Carlo samples per drive value.
    pub trajectories: usize,
    /// Drive in model units, or ...
    pub epsilon: Option<f64>,
    /// ... drive in nV at the resonator (circuit configurations only).
    pub drive_nv: Option<f64>,
    pub q0: f64,
    pub j0: f64,
    pub dtau: Option<f64>,
    /// Trajectory output cadence in steps.
    pub every: usize,
    pub epsilon_min: Option<f64>,
    pub epsilon_max: Option<f64>,
    pub points: usize,
    pub a0: Vec<f64>,
    pub phases: usize,
    pub alpha_tilde_list: Vec<f64>,
    pub temperatures_mk: Vec<f64>,
    pub noise_mk: Vec<f64>,
    pub kappa: f64,
    /// Model constants used for temperature sweeps.
    pub sim_beta: f64,
    pub sim_alpha_tilde: f64,
    pub preset: Option<String>,
    pub grid: usize,
    pub until: Option<f64>,
    /// Wigner snapshot cadence in τ.
    pub snapshot_every: Option<f64>,
    /// Apply [`crate::wigner::Filter::STANDARD`] during Wigner runs.
    pub filter: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            seed: None,
            trajectories: 2000,
            epsilon: None,
            drive_nv: None,
            q0: 0.0,
            j0: 0.0,
            dtau: None,
            every: 100,
            epsilon_min: None,
            epsilon_max: None,
            points: 13,
            a0: vec![0.25, 0.5, 1.0],
            phases: 8,
            alpha_tilde_list: vec![0.25e-6, 0.5e-6, 1e-6, 2e-6, 4e-6],
            temperatures_mk: vec![0.0, 15.0, 50.0, 100.0, 200.0, 500.0, 1000.0],
            noise_mk: Vec::new(),
            kappa: crate::threshold::DEVICE_KAPPA,
            sim_beta: crate::units::REFERENCE_BETA,
            sim_alpha_tilde: crate::units::REFERENCE_ALPHA_TILDE,
            preset: None,
            grid: 512,
            until: None,
            snapshot_every: None,
            filter: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSection {
    pub directory: Option<PathBuf>,
    /// Write CSV tables. The JSON sidecar and manifest are always written.
    pub csv: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: None,
            csv: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelSection,
    pub chirp: ChirpSection,
    pub experiment: ExperimentSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    /// The 6 GHz circuit with every default.
    fn default() -> Self {
        RunConfig {
            model: ModelSection::Circuit(PhysicalParams::six_ghz()),
            chirp: ChirpSection::default(),
            experiment: ExperimentSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_config(&text)
    }

    pub fn circuit(&self) -> Option<&PhysicalParams> {
        match &self.model {
            ModelSection::Circuit(p) => Some(p),
            ModelSection::Dimensionless { .. } => None,
        }
    }

    /// Model constants at the configured drive (zero if none given), and
    /// the initial variance in model units.
    pub fn dimensionless(&self) -> Result<(DimensionlessParams, f64)> {
        let e = &self.experiment;
        match &self.model {
            ModelSection::Circuit(p) => {
                let volts = e.drive_nv.map(|v| v * 1e-9).unwrap_or(0.0);
                let mut dp = crate::units::reduce(p, volts)?;
                if let Some(eps) = e.epsilon {
                    dp = dp.with_epsilon(eps);
                }
                Ok((dp, 1.0))
            }
            ModelSection::Dimensionless {
                beta,
                gamma,
                alpha_tilde,
                variance_scale,
                epsilon,
            } => {
                let eps = e.epsilon.or(*epsilon).unwrap_or(0.0);
                let dp = DimensionlessParams::new(*beta, eps, *alpha_tilde, *gamma);
                dp.validate()?;
                Ok((dp, *variance_scale))
            }
        }
    }
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let root: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
    let mut errors = Vec::new();
    for key in root.keys() {
        if !["circuit", "dimensionless", "chirp", "experiment", "output"].contains(&key.as_str()) {
            errors.push(format!("unknown section [{key}]"));
        }
    }
    let mut cfg = RunConfig::default();

    let circuit = root.get("circuit");
    let dimensionless = root.get("dimensionless");
    match (circuit, dimensionless) {
        (Some(_), Some(_)) => errors.push(
            "sections [circuit] and [dimensionless] are mutually exclusive; keep one".into(),
        ),
        (Some(v), None) => {
            if let Some(p) = Section::new("circuit", v, &mut errors).and_then(|s| s.circuit()) {
                cfg.model = ModelSection::Circuit(p);
            }
        }
        (None, Some(v)) => {
            if let Some(m) = Section::new("dimensionless", v, &mut errors).and_then(|s| s.dimensionless()) {
                cfg.model = m;
            }
        }
        (None, None) => {}
    }
    if let Some(v) = root.get("chirp") {
        if let Some(mut s) = Section::new("chirp", v, &mut errors) {
            cfg.chirp.tau_start = s.auto_f64("tau_start");
            cfg.chirp.tau_end = s.auto_f64("tau_end");
            s.finish(&[]);
        }
    }
    if let Some(v) = root.get("experiment") {
        if let Some(s) = Section::new("experiment", v, &mut errors) {
            cfg.experiment = s.experiment();
        }
    }
    if let Some(v) = root.get("output") {
        if let Some(mut s) = Section::new("output", v, &mut errors) {
            let d = OutputSection::default();
            cfg.output = OutputSection {
                directory: s.string("directory").map(PathBuf::from),
                csv: s.bool("csv").unwrap_or(d.csv),
            };
            s.finish(&[]);
        }
    }
    validate(&cfg, &mut errors);
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errors))
    }
}

fn validate(cfg: &RunConfig, errors: &mut Vec<String>) {
    let alpha = match &cfg.model {
        ModelSection::Circuit(p) => {
            if let Err(e) = p.validate() {
                errors.push(format!("[circuit] {e}"));
            }
            p.chirp_rate / (p.omega * p.omega)
        }
        ModelSection::Dimensionless {
            beta,
            gamma,
            alpha_tilde,
            variance_scale,
            epsilon,
        } => {
            let dp = DimensionlessParams::new(*beta, epsilon.unwrap_or(0.0), *alpha_tilde, *gamma);
            if let Err(e) = dp.validate() {
                errors.push(format!("[dimensionless] {e}"));
            }
            if !(*variance_scale > 0.0 && variance_scale.is_finite()) {
                errors.push("[dimensionless] variance_scale must be finite and > 0".into());
            }
            *alpha_tilde
        }
    };
    if alpha > 0.0 && alpha.is_finite() {
        if let Err(e) = cfg.chirp.profile(alpha) {
            errors.push(format!("[chirp] {e}"));
        }
    }
    let e = &cfg.experiment;
    if e.trajectories == 0 {
        errors.push("[experiment] trajectories must be >= 1".into());
    }
    if e.points < 6 {
        errors.push("[experiment] points must be >= 6".into());
    }
    if let (Some(a), Some(b)) = (e.epsilon_min, e.epsilon_max) {
        if !(b > a && a >= 0.0) {
            errors.push("[experiment] need 0 <= epsilon_min < epsilon_max".into());
        }
    }
    if e.epsilon.is_some() && e.drive_nv.is_some() {
        errors.push("[experiment] give either epsilon or drive_nV, not both".into());
    }
    if e.drive_nv.is_some() && cfg.circuit().is_none() {
        errors.push("[experiment] drive_nV needs a [circuit] section".into());
    }
    if let Some(p) = &e.preset {
        if crate::wigner::Preset::parse(p).is_none() {
            errors.push(format!("[experiment] preset `{p}` is not one of n10, n7, n5, classical"));
        }
    }
    if !(e.kappa > 0.0 && e.kappa.is_finite()) {
        errors.push("[experiment] kappa must be finite and > 0".into());
    }
}

/// Known unit-carrying keys, by stem. A key with a known stem but another
/// suffix is reported as a unit mismatch.
const UNIT_KEYS: &[(&str, &[&str])] = &[
    ("inductance", &["inductance_nH"]),
    ("critical_current", &["critical_current_uA"]),
    ("resonance", &["resonance_GHz"]),
    ("temperature", &["temperature_mK"]),
    ("temperatures", &["temperatures_mK"]),
    ("noise", &["noise_mK"]),
    ("chirp", &["chirp_MHz_per_us", "chirp_Hz_per_s"]),
    ("critical_power", &["critical_power_dBm"]),
    ("drive", &["drive_nV"]),
];

struct Section<'a> {
    name: &'static str,
    table: &'a toml::Table,
    used: BTreeSet<&'a str>,
    errors: &'a mut Vec<String>,
}

impl<'a> Section<'a> {
    fn new(name: &'static str, value: &'a toml::Value, errors: &'a mut Vec<String>) -> Option<Self> {
        match value.as_table() {
            Some(table) => Some(Section {
                name,
                table,
                used: BTreeSet::new(),
                errors,
            }),
            None => {
                errors.push(format!("[{name}] must be a table"));
                None
            }
        }
    }

    fn get(&mut self, key: &'a str) -> Option<&'a toml::Value> {
        self.used.insert(key);
        self.table.get(key)
    }

    fn err(&mut self, key: &str, what: &str) {
        self.errors.push(format!("[{}] `{key}` {what}", self.name));
    }

    fn f64(&mut self, key: &'a str) -> Option<f64> {
        match self.get(key)? {
            toml::Value::Float(x) => Some(*x),
            toml::Value::Integer(i) => Some(*i as f64),
            _ => {
                self.err(key, "must be a number");
                None
            }
        }
    }

    /// A number or the string "auto" (returned as `None`).
    fn auto_f64(&mut self, key: &'a str) -> Option<f64> {
        match self.table.get(key) {
            Some(toml::Value::String(s)) if s == "auto" => {
                self.used.insert(key);
                None
            }
            _ => self.f64(key),
        }
    }

    fn uint(&mut self, key: &'a str) -> Option<u64> {
        match self.get(key)? {
            toml::Value::Integer(i) if *i >= 0 => Some(*i as u64),
            _ => {
                self.err(key, "must be a non-negative integer");
                None
            }
        }
    }

    fn string(&mut self, key: &'a str) -> Option<String> {
        match self.get(key)? {
            toml::Value::String(s) => Some(s.clone()),
            _ => {
                self.err(key, "must be a string");
                None
            }
        }
    }

    fn bool(&mut self, key: &'a str) -> Option<bool> {
        match self.get(key)? {
            toml::Value::Boolean(b) => Some(*b),
            _ => {
                self.err(key, "must be true or false");
                None
            }
        }
    }

    fn list(&mut self, key: &'a str) -> Option<Vec<f64>> {
        let arr = match self.get(key)? {
            toml::Value::Array(a) => a,
            _ => {
                self.err(key, "must be an array of numbers");
                return None;
            }
        };
        let out: Option<Vec<f64>> = arr
            .iter()
            .map(|v| match v {
                toml::Value::Float(x) => Some(*x),
                toml::Value::Integer(i) => Some(*i as f64),
                _ => None,
            })
            .collect();
        if out.is_none() {
            self.err(key, "must be an array of numbers");
        }
        out
    }

    /// Reports keys that were never read.
    fn finish(self, _: &[&str]) {
        for key in self.table.keys() {
            if self.used.contains(key.as_str()) {
                continue;
            }
            let expected = UNIT_KEYS.iter().find(|(stem, _)| {
                key == stem || key.strip_prefix(stem).is_some_and(|r| r.starts_with('_'))
            });
            match expected {
                Some((_, want)) if want.iter().any(|w| self.used.contains(w)) => {
                    self.errors.push(format!(
                        "[{}] `{key}` has the wrong unit suffix; expected {}",
                        self.name,
                        want.iter().map(|w| format!("`{w}`")).collect::<Vec<_>>().join(" or ")
                    ))
                }
                _ => self.errors.push(format!("[{}] unknown key `{key}`", self.name)),
            }
        }
    }

    fn circuit(mut self) -> Option<PhysicalParams> {
        let mut p = PhysicalParams::six_ghz();
        if let Some(name) = self.string("preset") {
            match PhysicalParams::preset(&name) {
                Some(q) => p = q,
                None => self.err("preset", "must be \"6GHz\" or \"1.6GHz\""),
            }
        }
        if let Some(v) = self.f64("inductance_nH") {
            p.inductance = v * 1e-9;
        }
        if let Some(v) = self.f64("critical_current_uA") {
            p.critical_current = v * 1e-6;
        }
        if let Some(v) = self.f64("resonance_GHz") {
            p.omega = 2.0 * std::f64::consts::PI * v * 1e9;
        }
        if let Some(v) = self.f64("quality") {
            p.quality = v;
        }
        if let Some(v) = self.f64("quality_internal") {
            p.quality_internal = Some(v);
        }
        if let Some(v) = self.f64("quality_external") {
            p.quality_external = Some(v);
        }
        if let Some(v) = self.f64("temperature_mK") {
            p.temperature = v * 1e-3;
        }
        let mhz = self.f64("chirp_MHz_per_us");
        let hz = self.f64("chirp_Hz_per_s");
        match (mhz, hz) {
            (Some(_), Some(_)) => self.err("chirp_Hz_per_s", "conflicts with `chirp_MHz_per_us`"),
            (Some(v), None) => p.chirp_rate = chirp_rate_from_mhz_per_us(v),
            (None, Some(v)) => p.chirp_rate = 2.0 * std::f64::consts::PI * v,
            (None, None) => {}
        }
        if let Some(v) = self.f64("critical_power_dBm") {
            p.critical_power = Some(1e-3 * 10f64.powf(v / 10.0));
        }
        self.finish(&[]);
        Some(p)
    }

    fn dimensionless(mut self) -> Option<ModelSection> {
        let beta = self.f64("beta");
        let alpha = self.f64("alpha_tilde");
        let gamma = self.f64("gamma").unwrap_or(2.0);
        let variance_scale = self.f64("variance_scale").unwrap_or(1.0);
        let epsilon = self.f64("epsilon");
        if beta.is_none() {
            self.err("beta", "is required");
        }
        if alpha.is_none() {
            self.err("alpha_tilde", "is required");
        }
        self.finish(&[]);
        Some(ModelSection::Dimensionless {
            beta: beta?,
            gamma,
            alpha_tilde: alpha?,
            variance_scale,
            epsilon,
        })
    }

    fn experiment(mut self) -> ExperimentSection {
        let d = ExperimentSection::default();
        let count = |s: &mut Self, k: &'a str, default: usize| {
            s.uint(k).map(|v| v as usize).unwrap_or(default)
        };
        let e = ExperimentSection {
            seed: self.uint("seed"),
            trajectories: count(&mut self, "trajectories", d.trajectories),
            epsilon: self.f64("epsilon"),
            drive_nv: self.f64("drive_nV"),
            q0: self.f64("q0").unwrap_or(d.q0),
            j0: self.f64("j0").unwrap_or(d.j0),
            dtau: self.f64("dtau"),
            every: count(&mut self, "every", d.every),
            epsilon_min: self.f64("epsilon_min"),
            epsilon_max: self.f64("epsilon_max"),
            points: count(&mut self, "points", d.points),
            a0: self.list("a0").unwrap_or(d.a0),
            phases: count(&mut self, "phases", d.phases),
            alpha_tilde_list: self.list("alpha_tilde_list").unwrap_or(d.alpha_tilde_list),
            temperatures_mk: self.list("temperatures_mK").unwrap_or(d.temperatures_mk),
            noise_mk: self.list("noise_mK").unwrap_or(d.noise_mk),
            kappa: self.f64("kappa").unwrap_or(d.kappa),
            sim_beta: self.f64("sim_beta").unwrap_or(d.sim_beta),
            sim_alpha_tilde: self.f64("sim_alpha_tilde").unwrap_or(d.sim_alpha_tilde),
            preset: self.string("preset"),
            grid: count(&mut self, "grid", d.grid),
            until: self.f64("until"),
            snapshot_every: self.f64("snapshot_every"),
            filter: self.bool("filter").unwrap_or(d.filter),
        };
        self.finish(&[]);
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn messages(text: &str) -> Vec<String> {
        match parse_config(text) {
            Err(Error::Config(m)) => m,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn minimal_circuit_config() {
        let cfg = parse_config("[circuit]\npreset = \"6GHz\"\n").unwrap();
        assert_eq!(cfg.model, ModelSection::Circuit(PhysicalParams::six_ghz()));
        assert_eq!(cfg.experiment, ExperimentSection::default());
        let echo = serde_json::to_string(&cfg).unwrap();
        assert!(echo.contains("\"trajectories\":2000"));
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
    }

    #[test]
    fn chirp_key_sets_angular_rate() {
        let cfg = parse_config("[circuit]\nchirp_MHz_per_us = 50.6\nresonance_GHz = 5.987\n").unwrap();
        let p = cfg.circuit().unwrap();
        let w = 2.0 * std::f64::consts::PI * 5.987e9;
        let want = 2.0 * std::f64::consts::PI * 50.6e12 / (w * w);
        let (dp, _) = cfg.dimensionless().unwrap();
        assert!((dp.alpha_tilde / want - 1.0).abs() < 1e-12);
        assert!((p.chirp_rate - 2.0 * std::f64::consts::PI * 50.6e12).abs() < 1.0);
    }

    #[test]
    fn si_prefixed_keys_are_exact() {
        let cfg = parse_config(
            "[circuit]\ninductance_nH = 2.3\ncritical_current_uA = 1.8\ntemperature_mK = 15\n",
        )
        .unwrap();
        let p = cfg.circuit().unwrap();
        assert_eq!(p.inductance, 2.3 * 1e-9);
        assert_eq!(p.critical_current, 1.8 * 1e-6);
        assert_eq!(p.temperature, 15.0 * 1e-3);
    }

    #[test]
    fn both_model_sections_are_rejected() {
        let m = messages("[circuit]\nquality = 100\n[dimensionless]\nbeta = 1e-5\nalpha_tilde = 1e-6\n");
        assert!(m.iter().any(|s| s.contains("[circuit]") && s.contains("[dimensionless]")));
    }

    #[test]
    fn all_errors_are_collected() {
        let m = messages(
            "[circuit]\ninductance_H = 2e-9\ntemprature_mK = 4\n\
             [experiment]\npoints = 3\ntrajectories = \"many\"\n[plots]\n",
        );
        assert!(m.iter().any(|s| s.contains("`inductance_H`") && s.contains("inductance_nH")), "{m:?}");
        assert!(m.iter().any(|s| s.contains("unknown key `temprature_mK`")), "{m:?}");
        assert!(m.iter().any(|s| s.contains("points")), "{m:?}");
        assert!(m.iter().any(|s| s.contains("trajectories")), "{m:?}");
        assert!(m.iter().any(|s| s.contains("[plots]")), "{m:?}");
        assert!(m.len() >= 5);
    }

    #[test]
    fn dimensionless_section() {
        let cfg = parse_config(
            "[dimensionless]\nbeta = 3.55e-6\nalpha_tilde = 1e-6\nvariance_scale = 4\n\
             [chirp]\ntau_start = -20000\ntau_end = \"auto\"\n[experiment]\nepsilon = 0.02\n",
        )
        .unwrap();
        let (dp, var) = cfg.dimensionless().unwrap();
        assert_eq!((dp.beta, dp.epsilon, dp.gamma, var), (3.55e-6, 0.02, 2.0, 4.0));
        let c = cfg.chirp.profile(dp.alpha_tilde).unwrap();
        assert_eq!(c.tau_start, -20000.0);
        assert!((c.tau_end - 4215.0).abs() < 1e-9);
        let m = messages("[dimensionless]\ngamma = 3\n");
        assert!(m.iter().any(|s| s.contains("beta")));
        assert!(m.iter().any(|s| s.contains("alpha_tilde")));
    }

    #[test]
    fn bad_chirp_window() {
        let m = messages("[dimensionless]\nbeta = 1e-5\nalpha_tilde = 1e-6\n[chirp]\ntau_start = 10\n");
        assert!(m.iter().any(|s| s.starts_with("[chirp]")), "{m:?}");
    }
}
