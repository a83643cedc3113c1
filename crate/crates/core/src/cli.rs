//! Batch driver behind the `schrodinger-measures` binary.
//!
//! Runs come from command-line flags or from a TOML file (`--config`). Both
//! are flattened into string settings and normalized by the same code, so a
//! flag and the matching TOML key (`z-grid` / `z_grid`) behave identically.
//!
//! Exit status: 0 on success, 1 on domain errors, 2 on configuration
//! errors. Errors are printed to stderr as one JSON object.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::dynamics::{self, DynamicsError};
use crate::measures::{ClassBound, MetricConfig, SignedMeasure, DEFAULT_METRIC_TERMS, METRIC_CONVENTION};
use crate::oracle::{self, OracleError, OracleModel, OracleParams};
use crate::potentials;
use crate::reflectionless::{self, BorelWindow, ReflectionlessError};
use crate::schrodinger::{SolverConfig, C64};
use crate::weyl::{self, Side, WeylConfig, WeylError, DEFAULT_Y_SCHEDULE};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    MFunction,
    Reflectionless,
    ShiftTrace,
    Omega,
    OracleTrain,
    OraclePredict,
    Drcheck,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::MFunction,
        Command::Reflectionless,
        Command::ShiftTrace,
        Command::Omega,
        Command::OracleTrain,
        Command::OraclePredict,
        Command::Drcheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::MFunction => "m-function",
            Command::Reflectionless => "reflectionless",
            Command::ShiftTrace => "shift-trace",
            Command::Omega => "omega",
            Command::OracleTrain => "oracle-train",
            Command::OraclePredict => "oracle-predict",
            Command::Drcheck => "drcheck",
        }
    }

    pub fn parse(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Linear grid `lo:hi:count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        (0..self.count)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.count - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialSource {
    Builtin(String),
    File(PathBuf),
}

impl PotentialSource {
    /// One measure, or every measure of a JSON array.
    pub fn load_all(&self) -> Result<Vec<SignedMeasure>, String> {
        match self {
            PotentialSource::Builtin(name) => {
                potentials::builtin(name).map(|m| vec![m]).ok_or_else(|| format!("unknown builtin {name}"))
            }
            PotentialSource::File(p) => {
                let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                let value: serde_json::Value =
                    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?;
                let parse = |v: serde_json::Value| {
                    serde_json::from_value::<SignedMeasure>(v).map_err(|e| format!("{}: {e}", p.display()))
                };
                match value {
                    serde_json::Value::Array(items) => items.into_iter().map(parse).collect(),
                    v => parse(v).map(|m| vec![m]),
                }
            }
        }
    }

    pub fn load(&self) -> Result<SignedMeasure, String> {
        let mut all = self.load_all()?;
        if all.len() != 1 {
            return Err(format!("expected one potential, found {}", all.len()));
        }
        Ok(all.remove(0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SideSelection {
    Plus,
    Minus,
    Both,
}

impl SideSelection {
    fn sides(self) -> &'static [Side] {
        match self {
            SideSelection::Plus => &[Side::Plus],
            SideSelection::Minus => &[Side::Minus],
            SideSelection::Both => &[Side::Plus, Side::Minus],
        }
    }
}

/// Fully normalized run description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub subcommand: Command,
    pub potential: Option<PotentialSource>,
    pub reference: Option<PotentialSource>,
    pub model: Option<PathBuf>,
    pub out: PathBuf,
    pub z_grid: Grid,
    pub eta: f64,
    pub side: SideSelection,
    pub window: (f64, f64),
    pub points: usize,
    pub x: f64,
    pub tol: f64,
    pub metric_terms: usize,
    pub metric_convention: String,
    pub y_schedule: Vec<f64>,
    pub x_grid: Grid,
    pub omega_window: f64,
    pub cluster_tol: f64,
    pub max_clusters: usize,
    pub shifts: Grid,
    pub past: Option<f64>,
    pub future: (f64, f64),
    pub delta: Option<f64>,
    pub epsilon: f64,
    pub class_bound: f64,
    pub x_max: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub reason: String,
}

const KEYS: [&str; 27] = [
    "subcommand",
    "potential",
    "reference",
    "model",
    "out",
    "z_grid",
    "eta",
    "side",
    "window",
    "points",
    "x",
    "tol",
    "metric_n",
    "metric_convention",
    "y_schedule",
    "x_grid",
    "omega_window",
    "cluster_tol",
    "max_clusters",
    "shifts",
    "past",
    "future",
    "delta",
    "epsilon",
    "class_bound",
    "x_max",
    "samples",
];

struct Reader<'a> {
    raw: &'a BTreeMap<String, String>,
    errors: Vec<FieldError>,
}

impl Reader<'_> {
    fn fail(&mut self, field: &str, reason: impl Into<String>) {
        self.errors.push(FieldError { field: field.to_string(), reason: reason.into() });
    }

    fn get<T>(&mut self, key: &str, default: T, parse: impl Fn(&str) -> Result<T, String>) -> T {
        match self.raw.get(key) {
            None => default,
            Some(s) => parse(s).unwrap_or_else(|e| {
                self.fail(key, e);
                default
            }),
        }
    }

    fn opt<T>(&mut self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Option<T> {
        let s = self.raw.get(key)?;
        match parse(s) {
            Ok(v) => Some(v),
            Err(e) => {
                self.fail(key, e);
                None
            }
        }
    }
}

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: {s:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not finite: {s:?}"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

fn count(s: &str) -> Result<usize, String> {
    let v: usize = s.trim().parse().map_err(|_| format!("not a nonnegative integer: {s:?}"))?;
    if v == 0 {
        Err("must be at least 1".into())
    } else {
        Ok(v)
    }
}

fn interval(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 2 {
        return Err(format!("expected lo:hi, got {s:?}"));
    }
    let (lo, hi) = (number(parts[0])?, number(parts[1])?);
    if lo < hi {
        Ok((lo, hi))
    } else {
        Err(format!("needs lo < hi, got {s:?}"))
    }
}

fn grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected lo:hi:count, got {s:?}"));
    }
    let g = Grid { lo: number(parts[0])?, hi: number(parts[1])?, count: count(parts[2])? };
    if g.count > 1 && !(g.lo < g.hi) {
        return Err(format!("needs lo < hi for more than one point, got {s:?}"));
    }
    Ok(g)
}

fn source(s: &str) -> Result<PotentialSource, String> {
    if let Some(name) = s.strip_prefix("builtin:") {
        if potentials::builtin(name).is_none() {
            return Err(format!("unknown builtin {name:?}; known: {}", potentials::BUILTIN_NAMES.join(", ")));
        }
        return Ok(PotentialSource::Builtin(name.to_string()));
    }
    existing(s).map(PotentialSource::File)
}

fn existing(s: &str) -> Result<PathBuf, String> {
    let p = PathBuf::from(s);
    if p.is_file() {
        Ok(p)
    } else {
        Err(format!("file not found: {s}"))
    }
}

fn schedule(s: &str) -> Result<Vec<f64>, String> {
    let ys = s.split(',').map(positive).collect::<Result<Vec<_>, _>>()?;
    if ys.len() < 2 || ys.windows(2).any(|w| w[1] >= w[0]) {
        return Err("needs at least two strictly decreasing values".into());
    }
    Ok(ys)
}

/// Normalizes string settings (keys in snake_case) into a [`RunConfig`],
/// collecting every problem.
pub fn normalize(raw: &BTreeMap<String, String>) -> Result<RunConfig, Vec<FieldError>> {
    let mut r = Reader { raw, errors: Vec::new() };
    for key in raw.keys() {
        if !KEYS.contains(&key.as_str()) {
            r.fail(key, "unknown field");
        }
    }
    let names: Vec<&str> = Command::ALL.iter().map(|c| c.name()).collect();
    let subcommand = match raw.get("subcommand") {
        None => {
            r.fail("subcommand", format!("missing; valid subcommands: {}", names.join(", ")));
            None
        }
        Some(s) => {
            let c = Command::parse(s);
            if c.is_none() {
                r.fail("subcommand", format!("unknown {s:?}; valid subcommands: {}", names.join(", ")));
            }
            c
        }
    };
    let potential = r.opt("potential", source);
    let reference = r.opt("reference", source);
    let model = r.opt("model", existing);
    let metric_convention = r.get("metric_convention", METRIC_CONVENTION.to_string(), |s| {
        if s == METRIC_CONVENTION {
            Ok(s.to_string())
        } else {
            Err(format!("unsupported convention {s:?}; this build uses {METRIC_CONVENTION}"))
        }
    });
    let cfg = RunConfig {
        subcommand: subcommand.unwrap_or(Command::MFunction),
        potential,
        reference,
        model,
        out: r.get("out", PathBuf::from("out"), |s| Ok(PathBuf::from(s))),
        z_grid: r.get("z_grid", Grid { lo: -2.0, hi: 2.0, count: 5 }, grid),
        eta: r.get("eta", 1.0, positive),
        side: r.get("side", SideSelection::Both, |s| match s {
            "plus" => Ok(SideSelection::Plus),
            "minus" => Ok(SideSelection::Minus),
            "both" => Ok(SideSelection::Both),
            _ => Err(format!("expected plus, minus or both, got {s:?}")),
        }),
        window: r.get("window", (0.1, 5.0), interval),
        points: r.get("points", 20, count),
        x: r.get("x", 0.0, number),
        tol: r.get("tol", 1e-10, positive),
        metric_terms: r.get("metric_n", DEFAULT_METRIC_TERMS, count),
        metric_convention,
        y_schedule: r.get("y_schedule", DEFAULT_Y_SCHEDULE.to_vec(), schedule),
        x_grid: r.get("x_grid", Grid { lo: 0.0, hi: 20.0, count: 21 }, grid),
        omega_window: r.get("omega_window", dynamics::DEFAULT_WINDOW, positive),
        cluster_tol: r.get("cluster_tol", 0.05, positive),
        max_clusters: r.get("max_clusters", 256, count),
        shifts: r.get("shifts", Grid { lo: 0.0, hi: 0.0, count: 1 }, grid),
        past: r.opt("past", positive),
        future: r.get("future", (0.0, 1.0), interval),
        delta: r.opt("delta", positive),
        epsilon: r.get("epsilon", 0.05, positive),
        class_bound: r.get("class_bound", 1.0, positive),
        x_max: r.get("x_max", 100.0, positive),
        samples: r.get("samples", 101, count),
    };
    if let Some(c) = subcommand {
        if !raw.contains_key("potential") {
            r.fail("potential", format!("required by {}", c.name()));
        }
        if c == Command::OraclePredict && cfg.model.is_none() && !raw.contains_key("model") {
            r.fail("model", "required by oracle-predict");
        }
        if c == Command::Drcheck && cfg.samples < 2 {
            r.fail("samples", "drcheck needs at least 2 samples");
        }
        if let (Some(d), true) = (cfg.delta, c == Command::OracleTrain) {
            if d > cfg.epsilon {
                r.fail("delta", "must not exceed epsilon");
            }
        }
    }
    if r.errors.is_empty() {
        Ok(cfg)
    } else {
        Err(r.errors)
    }
}

fn toml_to_string(v: &toml::Value) -> Option<String> {
    Some(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        toml::Value::Array(items) => items.iter().map(toml_to_string).collect::<Option<Vec<_>>>()?.join(","),
        _ => return None,
    })
}

/// Reads and normalizes a TOML run file. Relative paths in the file are
/// resolved against the file's directory.
pub fn validate_config(path: &Path) -> Result<RunConfig, Vec<FieldError>> {
    let err = |reason: String| vec![FieldError { field: "config".into(), reason }];
    let text = fs::read_to_string(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| err(e.message().to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut raw = BTreeMap::new();
    let mut errors = Vec::new();
    for (k, v) in &table {
        let key = k.replace('-', "_");
        match toml_to_string(v) {
            Some(mut s) => {
                let is_path = matches!(key.as_str(), "potential" | "reference" | "model" | "out");
                if is_path && !s.starts_with("builtin:") && Path::new(&s).is_relative() {
                    s = base.join(&s).to_string_lossy().into_owned();
                }
                raw.insert(key, s);
            }
            None => errors.push(FieldError { field: key, reason: "unsupported value type".into() }),
        }
    }
    match normalize(&raw) {
        Ok(cfg) if errors.is_empty() => Ok(cfg),
        Ok(_) => Err(errors),
        Err(mut e) => {
            errors.append(&mut e);
            Err(errors)
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "schrodinger-measures", version, about = "Spectral diagnostics for Schrödinger operators with measure potentials")]
pub struct Cli {
    /// Run from a TOML file instead of a subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// With --config: print the normalized configuration and exit.
    #[arg(long, requires = "config")]
    pub check: bool,
    #[command(subcommand)]
    pub command: Option<CliCommand>,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// m±(x, z) on a line of energies z = t + i·eta.
    MFunction(Opts),
    /// Reflectionless defect |m₊ + conj m₋| over an energy window.
    Reflectionless(Opts),
    /// Metric distance of the shifts S_x μ to a reference.
    ShiftTrace(Opts),
    /// ω-limit estimate by metric clustering of windowed shifts.
    Omega(Opts),
    /// Build (or calibrate and build) a past-to-future oracle.
    OracleTrain(Opts),
    /// Predict the future window of S_x μ from its past.
    OraclePredict(Opts),
    /// Distance-to-zero trace with a decay verdict.
    Drcheck(Opts),
}

/// Shared options; each subcommand reads the ones it needs.
#[derive(Debug, Args, Default)]
pub struct Opts {
    /// Potential JSON file, or builtin:<name>.
    #[arg(long, allow_hyphen_values = true)]
    pub potential: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub out: Option<String>,
    /// Real parts of z as lo:hi:count.
    #[arg(long = "z-grid", allow_hyphen_values = true)]
    pub z_grid: Option<String>,
    /// Energy window lo:hi.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub tol: Option<String>,
    #[arg(long = "metric-N", allow_hyphen_values = true)]
    pub metric_n: Option<String>,
    /// Imaginary part of z for m-function.
    #[arg(long, allow_hyphen_values = true)]
    pub eta: Option<String>,
    /// plus, minus or both.
    #[arg(long, allow_hyphen_values = true)]
    pub side: Option<String>,
    /// Grid points in the energy window.
    #[arg(long, allow_hyphen_values = true)]
    pub points: Option<String>,
    /// Evaluation point (or shift for oracle-predict).
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,
    /// Comma-separated decreasing y values.
    #[arg(long = "y-schedule", allow_hyphen_values = true)]
    pub y_schedule: Option<String>,
    /// Shifts as lo:hi:count.
    #[arg(long = "x-grid", allow_hyphen_values = true)]
    pub x_grid: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub reference: Option<String>,
    #[arg(long = "omega-window", allow_hyphen_values = true)]
    pub omega_window: Option<String>,
    #[arg(long = "cluster-tol", allow_hyphen_values = true)]
    pub cluster_tol: Option<String>,
    #[arg(long = "max-clusters", allow_hyphen_values = true)]
    pub max_clusters: Option<String>,
    /// Training shifts as lo:hi:count.
    #[arg(long, allow_hyphen_values = true)]
    pub shifts: Option<String>,
    /// Past window length L.
    #[arg(long, allow_hyphen_values = true)]
    pub past: Option<String>,
    /// Future window a:b.
    #[arg(long, allow_hyphen_values = true)]
    pub future: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub epsilon: Option<String>,
    #[arg(long = "class-bound", allow_hyphen_values = true)]
    pub class_bound: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub model: Option<String>,
    #[arg(long = "x-max", allow_hyphen_values = true)]
    pub x_max: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub samples: Option<String>,
}

impl Opts {
    fn into_map(self, subcommand: &str) -> BTreeMap<String, String> {
        let pairs = [
            ("potential", self.potential),
            ("out", self.out),
            ("z_grid", self.z_grid),
            ("window", self.window),
            ("tol", self.tol),
            ("metric_n", self.metric_n),
            ("eta", self.eta),
            ("side", self.side),
            ("points", self.points),
            ("x", self.x),
            ("y_schedule", self.y_schedule),
            ("x_grid", self.x_grid),
            ("reference", self.reference),
            ("omega_window", self.omega_window),
            ("cluster_tol", self.cluster_tol),
            ("max_clusters", self.max_clusters),
            ("shifts", self.shifts),
            ("past", self.past),
            ("future", self.future),
            ("delta", self.delta),
            ("epsilon", self.epsilon),
            ("class_bound", self.class_bound),
            ("model", self.model),
            ("x_max", self.x_max),
            ("samples", self.samples),
        ];
        let mut m: BTreeMap<String, String> = pairs
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
            .collect();
        m.insert("subcommand".into(), subcommand.into());
        m
    }
}

impl CliCommand {
    fn split(self) -> (Command, Opts) {
        match self {
            CliCommand::MFunction(o) => (Command::MFunction, o),
            CliCommand::Reflectionless(o) => (Command::Reflectionless, o),
            CliCommand::ShiftTrace(o) => (Command::ShiftTrace, o),
            CliCommand::Omega(o) => (Command::Omega, o),
            CliCommand::OracleTrain(o) => (Command::OracleTrain, o),
            CliCommand::OraclePredict(o) => (Command::OraclePredict, o),
            CliCommand::Drcheck(o) => (Command::Drcheck, o),
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(Vec<FieldError>),
    Domain { code: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Domain { .. } => 1,
        }
    }

    pub fn to_json(&self) -> String {
        match self {
            CliError::Config(fields) => json!({ "error": "config", "fields": fields }).to_string(),
            CliError::Domain { code, message } => json!({ "error": code, "message": message }).to_string(),
        }
    }

    fn domain(code: &str, message: impl ToString) -> Self {
        CliError::Domain { code: code.to_string(), message: message.to_string() }
    }
}

impl From<WeylError> for CliError {
    fn from(e: WeylError) -> Self {
        let code = match e {
            WeylError::NotConverged { .. } => "not_converged",
            WeylError::Pole { .. } => "pole",
            _ => "weyl",
        };
        CliError::domain(code, e)
    }
}

impl From<ReflectionlessError> for CliError {
    fn from(e: ReflectionlessError) -> Self {
        match e {
            ReflectionlessError::Weyl(w) => w.into(),
            e => CliError::domain("reflectionless", e),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Reflectionless(r) => r.into(),
            e => CliError::domain("dynamics", e),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        CliError::domain(e.code(), e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::domain("io", e)
    }
}

/// Metadata comment carried by every CSV output.
pub fn csv_banner() -> String {
    format!("# schrodinger-measures {VERSION} metric={METRIC_CONVENTION}\n")
}

fn write_csv(
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
) -> Result<PathBuf, CliError> {
    let mut buf = csv_banner().into_bytes();
    body(&mut buf)?;
    let path = dir.join(name);
    fs::write(&path, buf)?;
    Ok(path)
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    fs::write(&path, s)?;
    Ok(path)
}

fn load(src: &Option<PotentialSource>, field: &str) -> Result<SignedMeasure, CliError> {
    let src = src.as_ref().ok_or_else(|| {
        CliError::Config(vec![FieldError { field: field.into(), reason: "required".into() }])
    })?;
    src.load()
        .map_err(|reason| CliError::Config(vec![FieldError { field: field.into(), reason }]))
}

/// Executes a run and returns the files written.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(&cfg.out)?;
    let out = cfg.out.as_path();
    let solver = SolverConfig::default();
    let wcfg = WeylConfig { tol: cfg.tol, solver, ..WeylConfig::default() };
    let metric = MetricConfig::new(cfg.metric_terms);
    match cfg.subcommand {
        Command::MFunction => {
            let mu = load(&cfg.potential, "potential")?;
            let jobs: Vec<(C64, Side)> = cfg
                .z_grid
                .points()
                .into_iter()
                .flat_map(|t| cfg.side.sides().iter().map(move |&s| (C64::new(t, cfg.eta), s)))
                .collect();
            let samples = jobs
                .par_iter()
                .map(|&(z, s)| weyl::m_halfline(&mu, cfg.x, z, s, &wcfg))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(vec![write_csv(out, "m_function.csv", |w| weyl::write_samples_csv(w, &samples))?])
        }
        Command::Reflectionless => {
            let mu = load(&cfg.potential, "potential")?;
            let window = BorelWindow::interval(cfg.window.0, cfg.window.1, cfg.points)?;
            let report = reflectionless::reflectionless_defect(&mu, cfg.x, &window, &cfg.y_schedule, &wcfg)?;
            let csv = write_csv(out, "reflectionless.csv", |w| report.write_csv(w))?;
            let summary = json!({
                "x": cfg.x,
                "window": [cfg.window.0, cfg.window.1],
                "y_schedule": cfg.y_schedule,
                "max_defect": report.max_defect,
                "mean_defect": report.mean_defect,
                "nonconverged": report.nonconverged,
                "threshold": reflectionless::VERDICT_THRESHOLD,
                "reflectionless_on_grid": report.verdict(),
                "evidence": "grid",
            });
            Ok(vec![csv, write_json(out, "reflectionless.json", &summary)?])
        }
        Command::ShiftTrace => {
            let mu = load(&cfg.potential, "potential")?;
            let reference = match &cfg.reference {
                Some(_) => load(&cfg.reference, "reference")?,
                None => SignedMeasure::zero(),
            };
            let trace = dynamics::shift_trace(&mu, &cfg.x_grid.points(), &reference, &metric)?;
            Ok(vec![write_csv(out, "shift_trace.csv", |w| trace.write_csv(w))?])
        }
        Command::Omega => {
            let mu = load(&cfg.potential, "potential")?;
            let xs = cfg.x_grid.points();
            let est = dynamics::omega_limit_estimate(
                &mu,
                &xs,
                cfg.omega_window,
                cfg.cluster_tol,
                &metric,
                cfg.max_clusters,
            )?;
            let csv = write_csv(out, "omega_assignment.csv", |w| {
                use std::io::Write;
                writeln!(w, "x,cluster")?;
                for (x, c) in xs.iter().zip(&est.assignment) {
                    writeln!(w, "{x},{c}")?;
                }
                Ok(())
            })?;
            let path = out.join("omega_representatives.json");
            fs::write(&path, est.representatives_json() + "\n")?;
            Ok(vec![csv, path])
        }
        Command::OracleTrain => {
            let family = cfg
                .potential
                .as_ref()
                .expect("validated")
                .load_all()
                .map_err(|reason| CliError::Config(vec![FieldError { field: "potential".into(), reason }]))?;
            let class_bound = ClassBound::new(cfg.class_bound)
                .map_err(|e| CliError::Config(vec![FieldError { field: "class_bound".into(), reason: e.to_string() }]))?;
            let shifts = cfg.shifts.points();
            let mut written = Vec::new();
            let params = match (cfg.past, cfg.delta) {
                (Some(l), Some(d)) => {
                    let mut p = OracleParams::new(l, cfg.future, d, cfg.epsilon, class_bound)?;
                    p.metric_terms = cfg.metric_terms;
                    p
                }
                _ => {
                    let cal = oracle::calibrate(&family, &shifts, cfg.epsilon, cfg.future, class_bound)?;
                    let tried: Vec<_> = cal
                        .tried
                        .iter()
                        .map(|&(l, d, e)| json!({ "past": l, "delta": d, "error": finite_or_null(e) }))
                        .collect();
                    written.push(write_json(
                        out,
                        "calibration.json",
                        &json!({
                            "past": cal.params.past_len,
                            "delta": cal.params.delta,
                            "epsilon": cal.params.epsilon,
                            "achieved_error": cal.achieved_error,
                            "tried": tried,
                        }),
                    )?);
                    cal.params
                }
            };
            let samples: Vec<SignedMeasure> = family
                .iter()
                .flat_map(|m| shifts.iter().map(move |&s| m.shift(s)))
                .collect();
            let model = oracle::build_oracle(&samples, params)?;
            let path = out.join("oracle_model.json");
            fs::write(&path, model.to_json() + "\n")?;
            written.push(path);
            Ok(written)
        }
        Command::OraclePredict => {
            let model_path = cfg.model.as_ref().expect("validated");
            let text = fs::read_to_string(model_path)?;
            let model = OracleModel::from_json(&text)?;
            let mu = load(&cfg.potential, "potential")?;
            let shifted = mu.shift(cfg.x);
            let p = oracle::predict(&model, &model.params.past_of(&shifted))?;
            let value = json!({
                "x": cfg.x,
                "future_window": [model.params.future.0, model.params.future.1],
                "prediction": p.future,
                "min_distance": p.min_distance,
                "coverage_flag": p.coverage_flag,
                "centers": p.weights.indices(),
                "weights": p.weights.weights(),
            });
            Ok(vec![write_json(out, "prediction.json", &value)?])
        }
        Command::Drcheck => {
            let mu = load(&cfg.potential, "potential")?;
            let r = dynamics::denisov_rakhmanov_check(&mu, cfg.x_max, cfg.samples, &metric)?;
            let csv = write_csv(out, "drcheck.csv", |w| r.trace.write_csv(w))?;
            let summary = json!({
                "x_max": cfg.x_max,
                "tail_mean": r.tail_mean,
                "threshold": dynamics::DR_THRESHOLD,
                "convergent": r.convergent,
            });
            Ok(vec![csv, write_json(out, "drcheck.json", &summary)?])
        }
    }
}

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        serde_json::Value::Null
    }
}

/// Entry point: parses `args`, runs, and returns the exit status. Normal
/// output goes to `stdout`, error JSON to `stderr`.
pub fn main_with_args<I, T>(args: I, stdout: &mut impl std::io::Write, stderr: &mut impl std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let err = CliError::Config(vec![FieldError { field: "arguments".into(), reason: e.kind().to_string() }]);
            let _ = writeln!(stderr, "{}", err.to_json());
            let _ = write!(stderr, "{}", e.render());
            return 2;
        }
    };
    let cfg = match (cli.config, cli.command) {
        (Some(_), Some(_)) => Err(CliError::Config(vec![FieldError {
            field: "config".into(),
            reason: "use either --config or a subcommand".into(),
        }])),
        (Some(path), None) => validate_config(&path).map_err(CliError::Config),
        (None, Some(cmd)) => {
            let (c, opts) = cmd.split();
            normalize(&opts.into_map(c.name())).map_err(CliError::Config)
        }
        (None, None) => Err(CliError::Config(vec![FieldError {
            field: "subcommand".into(),
            reason: format!(
                "missing; valid subcommands: {}",
                Command::ALL.map(|c| c.name()).join(", ")
            ),
        }])),
    };
    let result = cfg.and_then(|cfg| {
        if cli.check {
            let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&cfg).expect("serializable"));
            return Ok(Vec::new());
        }
        run(&cfg)
    });
    match result {
        Ok(files) => {
            let mut listing = String::new();
            for f in files {
                let _ = writeln!(listing, "{}", f.display());
            }
            let _ = write!(stdout, "{listing}");
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.to_json());
            e.exit_code()
        }
    }
}
