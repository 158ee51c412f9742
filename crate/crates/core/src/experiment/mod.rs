//! Reproducible batch experiments.
//!
//! Each experiment reads an [`ExperimentConfig`] (TOML), writes CSV and
//! structured-text outputs into one directory, and finishes with a
//! `manifest.toml` describing the run. Data files depend only on the
//! configuration, so reruns produce byte-identical files; only the manifest
//! records wall time.
//!
//! Configuration schema (every section and key is optional):
//!
//! ```toml
//! experiment = "quarter-frequency"   # must match the subcommand if given
//! seed = 7
//! out = "runs/quarter"               # overridden by --out
//!
//! [mesh]
//! h = 0.015625
//!
//! [solver]
//! tol = 1e-10
//! max_sweeps = 100000
//! schedule = "lexicographic"          # or "red-black"
//! parallel = false                    # red-black sweeps only
//!
//! [quarter_frequency]
//! m = 2
//! radius = 1.0
//! degree = 2                          # lateral data Σ v_i sin(kθ) r^k
//! sheets = [[1.0, 0.0], [-1.0, 0.0]]  # the vectors v_i; [] means zero data
//! monotone_slack = 0.05
//!
//! [cylinder_singularity]
//! s_min = 0.0                         # 0 selects the automatic threshold
//!
//! [excess_decay]
//! q0 = [2]
//! q1 = [1, 1]
//! lambda = 0.01
//! rho = 0.5
//! levels = 4
//! resolution = 0.0833333333
//! small_excess_limit = 0.1
//!
//! [cone_census]
//! max_q = 3
//! max_n = 2
//! max_slots = 4
//! max_mult = 3
//! gaps = true
//! ```

mod census;
mod cylinder;
mod excess;
mod quarter;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dirichlet::{MinimizeOptions, Schedule};
use crate::parallel::Execution;

pub use census::{tally_decompositions, DecompositionTally};
use census::run_cone_census;
use cylinder::run_cylinder_singularity;
use excess::run_excess_decay;
use quarter::run_quarter_frequency;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    QuarterFrequency,
    CylinderSingularity,
    ExcessDecay,
    ConeCensus,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::QuarterFrequency => "quarter-frequency",
            ExperimentKind::CylinderSingularity => "cylinder-singularity",
            ExperimentKind::ExcessDecay => "excess-decay",
            ExperimentKind::ConeCensus => "cone-census",
        }
    }

    /// Mesh spacing used when the config does not set one.
    pub fn default_h(self) -> f64 {
        match self {
            ExperimentKind::QuarterFrequency => 1.0 / 64.0,
            ExperimentKind::CylinderSingularity => 1.0 / 12.0,
            ExperimentKind::ExcessDecay | ExperimentKind::ConeCensus => 1.0 / 12.0,
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            ExperimentKind::QuarterFrequency,
            ExperimentKind::CylinderSingularity,
            ExperimentKind::ExcessDecay,
            ExperimentKind::ConeCensus,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| format!("unknown experiment {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub h: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleName {
    #[default]
    Lexicographic,
    RedBlack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_sweeps: usize,
    pub schedule: ScheduleName,
    pub parallel: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = MinimizeOptions::default();
        SolverConfig { tol: d.tol, max_sweeps: d.max_sweeps, schedule: ScheduleName::Lexicographic, parallel: false }
    }
}

impl SolverConfig {
    pub fn options(&self) -> MinimizeOptions {
        MinimizeOptions {
            tol: self.tol,
            max_sweeps: self.max_sweeps,
            schedule: match self.schedule {
                ScheduleName::Lexicographic => Schedule::Lexicographic,
                ScheduleName::RedBlack => Schedule::RedBlack,
            },
            exec: if self.parallel { Execution::Parallel } else { Execution::Sequential },
            warm_start: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuarterConfig {
    pub m: usize,
    pub radius: f64,
    pub degree: i32,
    pub sheets: Vec<Vec<f64>>,
    pub monotone_slack: f64,
}

impl Default for QuarterConfig {
    fn default() -> Self {
        QuarterConfig { m: 2, radius: 1.0, degree: 2, sheets: vec![vec![1.0, 0.0], vec![-1.0, 0.0]], monotone_slack: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CylinderConfig {
    /// Separation threshold; zero or negative picks the automatic one.
    pub s_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExcessConfig {
    pub q0: Vec<u32>,
    pub q1: Vec<u32>,
    pub lambda: f64,
    pub rho: f64,
    pub levels: usize,
    pub resolution: f64,
    pub small_excess_limit: f64,
}

impl Default for ExcessConfig {
    fn default() -> Self {
        ExcessConfig {
            q0: vec![2],
            q1: vec![1, 1],
            lambda: 0.01,
            rho: 0.5,
            levels: 4,
            resolution: 1.0 / 12.0,
            small_excess_limit: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CensusConfig {
    pub max_q: u32,
    pub max_n: usize,
    pub max_slots: usize,
    pub max_mult: u32,
    pub gaps: bool,
}

impl Default for CensusConfig {
    fn default() -> Self {
        CensusConfig { max_q: 3, max_n: 2, max_slots: 4, max_mult: 3, gaps: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentKind>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub mesh: MeshConfig,
    pub solver: SolverConfig,
    pub quarter_frequency: QuarterConfig,
    pub cylinder_singularity: CylinderConfig,
    pub excess_decay: ExcessConfig,
    pub cone_census: CensusConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: None,
            seed: 0,
            out: None,
            mesh: MeshConfig::default(),
            solver: SolverConfig::default(),
            quarter_frequency: QuarterConfig::default(),
            cylinder_singularity: CylinderConfig::default(),
            excess_decay: ExcessConfig::default(),
            cone_census: CensusConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn h(&self, kind: ExperimentKind) -> f64 {
        self.mesh.h.unwrap_or_else(|| kind.default_h())
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if let Some(h) = self.mesh.h {
            if !(h > 0.0 && h.is_finite()) {
                return bad("mesh.h must be positive");
            }
        }
        if !(self.solver.tol > 0.0) {
            return bad("solver.tol must be positive");
        }
        if self.solver.max_sweeps == 0 {
            return bad("solver.max_sweeps must be positive");
        }
        let e = &self.excess_decay;
        if !(e.rho > 0.0 && e.rho < 1.0) {
            return bad("excess_decay.rho must lie in (0, 1)");
        }
        if !(e.resolution > 0.0 && e.resolution < 1.0) {
            return bad("excess_decay.resolution must lie in (0, 1)");
        }
        if !(e.lambda >= 0.0 && e.lambda.is_finite()) {
            return bad("excess_decay.lambda must be nonnegative");
        }
        let q = &self.quarter_frequency;
        if q.sheets.windows(2).any(|w| w[0].len() != w[1].len()) || q.sheets.iter().any(Vec::is_empty) {
            return bad("quarter_frequency.sheets must be nonempty vectors of one length");
        }
        if !(q.monotone_slack >= 0.0) {
            return bad("quarter_frequency.monotone_slack must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl ExperimentError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Success,
    InvariantViolated,
    NotConverged,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Success => 0,
            RunStatus::InvariantViolated => 3,
            RunStatus::NotConverged => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Success => "success",
            RunStatus::InvariantViolated => "invariant-violated",
            RunStatus::NotConverged => "not-converged",
        }
    }
}

/// Outcome of one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub kind: ExperimentKind,
    pub status: RunStatus,
    /// Named checks and whether they held.
    pub checks: Vec<(String, bool)>,
    pub files: Vec<String>,
}

/// Per-run settings that do not belong in the committed config.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out: PathBuf,
    pub oracle_mode: bool,
    pub threads: Option<usize>,
}

/// Collects output files and checks while an experiment runs.
pub(crate) struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
    checks: Vec<(String, bool)>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, ExperimentError> {
        fs::create_dir_all(dir).map_err(|source| ExperimentError::Io { path: dir.to_path_buf(), source })?;
        Ok(Outputs { dir: dir.to_path_buf(), files: Vec::new(), checks: Vec::new() })
    }

    pub(crate) fn write(&mut self, name: &str, contents: &str) -> Result<(), ExperimentError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| ExperimentError::Io { path, source })?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub(crate) fn check(&mut self, name: &str, ok: bool) -> bool {
        self.checks.push((name.to_string(), ok));
        ok
    }

    fn finish(self, kind: ExperimentKind, status: RunStatus) -> RunSummary {
        let status = if status == RunStatus::Success && self.checks.iter().any(|c| !c.1) {
            RunStatus::InvariantViolated
        } else {
            status
        };
        RunSummary { kind, status, checks: self.checks, files: self.files }
    }
}

/// A report as `key value` lines, in insertion order.
#[derive(Debug, Default)]
pub(crate) struct Report(String);

impl Report {
    pub(crate) fn line(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.0, "{key} {value}");
    }

    pub(crate) fn verdict(&mut self, key: &str, ok: bool) {
        self.line(key, if ok { "PASS" } else { "FAIL" });
    }

    pub(crate) fn text(&self) -> &str {
        &self.0
    }
}

/// Runs one experiment and writes its outputs plus `manifest.toml`.
pub fn run(kind: ExperimentKind, cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary, ExperimentError> {
    if let Some(k) = cfg.experiment {
        if k != kind {
            return Err(ExperimentError::Config(format!(
                "config is for {} but {} was requested",
                k.as_str(),
                kind.as_str()
            )));
        }
    }
    cfg.validate()?;
    let started = Instant::now();
    let mut out = Outputs::new(&opts.out)?;
    let status = match kind {
        ExperimentKind::QuarterFrequency => run_quarter_frequency(cfg, opts.oracle_mode, &mut out)?,
        ExperimentKind::CylinderSingularity => run_cylinder_singularity(cfg, opts.oracle_mode, &mut out)?,
        ExperimentKind::ExcessDecay => run_excess_decay(cfg, &mut out)?,
        ExperimentKind::ConeCensus => run_cone_census(cfg, &mut out)?,
    };
    let elapsed = started.elapsed().as_secs_f64();
    let mut summary = out.finish(kind, status);
    let manifest = manifest(kind, cfg, opts, &summary, elapsed);
    let path = opts.out.join("manifest.toml");
    fs::write(&path, manifest).map_err(|source| ExperimentError::Io { path, source })?;
    summary.files.push("manifest.toml".to_string());
    Ok(summary)
}

fn manifest(kind: ExperimentKind, cfg: &ExperimentConfig, opts: &RunOptions, s: &RunSummary, elapsed: f64) -> String {
    let mut m = String::new();
    let _ = writeln!(m, "experiment = {:?}", kind.as_str());
    let _ = writeln!(m, "status = {:?}", s.status.as_str());
    let _ = writeln!(m, "exit_code = {}", s.status.exit_code());
    let _ = writeln!(m, "oracle_mode = {}", opts.oracle_mode);
    match opts.threads {
        Some(t) => {
            let _ = writeln!(m, "threads = {t}");
        }
        None => {
            let _ = writeln!(m, "threads = \"default\"");
        }
    }
    let _ = writeln!(m, "wall_time_seconds = {elapsed:.3}");
    let files: Vec<String> = s.files.iter().map(|f| format!("{f:?}")).collect();
    let _ = writeln!(m, "files = [{}]", files.join(", "));
    let _ = writeln!(m, "\n[versions]");
    let _ = writeln!(m, "qlab-core = {:?}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "parallel-feature = {}", cfg!(feature = "parallel"));
    let _ = writeln!(m, "\n[checks]");
    for (name, ok) in &s.checks {
        let _ = writeln!(m, "{name} = {ok}");
    }
    let _ = writeln!(m, "\n[config]");
    for line in cfg.to_toml().lines() {
        if line.starts_with('[') && line.ends_with(']') {
            let _ = writeln!(m, "[config.{}", &line[1..]);
        } else {
            let _ = writeln!(m, "{line}");
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_and_defaults() {
        let cfg = ExperimentConfig::from_toml("seed = 3\n[mesh]\nh = 0.125\n").unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.h(ExperimentKind::QuarterFrequency), 0.125);
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        let d = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(d.h(ExperimentKind::QuarterFrequency), 1.0 / 64.0);
    }

    #[test]
    fn config_errors() {
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
        assert!(ExperimentConfig::from_toml("[mesh]\nh = -1.0").is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"nope\"").is_err());
        let cfg = ExperimentConfig::from_toml("experiment = \"cone-census\"").unwrap();
        assert_eq!(cfg.experiment, Some(ExperimentKind::ConeCensus));
    }

    #[test]
    fn manifest_embeds_config_as_toml() {
        let cfg = ExperimentConfig::default();
        let opts = RunOptions { out: PathBuf::from("x"), oracle_mode: false, threads: Some(2) };
        let s = RunSummary { kind: ExperimentKind::ConeCensus, status: RunStatus::Success, checks: vec![("a".into(), true)], files: vec![] };
        let text = manifest(ExperimentKind::ConeCensus, &cfg, &opts, &s, 1.0);
        let parsed: toml::Value = toml::from_str(&text).unwrap();
        assert_eq!(parsed["config"]["cone_census"]["max_q"].as_integer(), Some(3));
        assert_eq!(parsed["checks"]["a"].as_bool(), Some(true));
    }
}
