//! The `nlgamma` command line.
//!
//! Every run resolves one typed configuration out of three layers: built-in
//! defaults, the section of `--config` named after the command, and flags.
//! The resolved configuration is written to `config.toml` in the output
//! directory, so `nlgamma --config OUT/config.toml <command>` repeats a run.
//! Numeric output goes to CSV files next to it, and `summary.toml` records
//! the outcome. Exit status: 0 on success or PASS, 1 when an experiment (or
//! a descent) does not succeed, 2 on usage and configuration errors.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::domain::{Domain, Shape};
use crate::energies::{self, CapillarityKind, EnergyBreakdown, EnergySpec, Functional, LambdaSchedule};
use crate::error::Error;
use crate::field::{ExteriorDatum, ScalarField};
use crate::kernels::{frac_perimeter_with, KernelSpec, Part};
use crate::lab::{self, Experiment, ExperimentName, SweepReport, Verdict};
use crate::minimize::{self, MinimizeConfig, Objective, Seed, Status};
use crate::set::GeometricSet;
use crate::waterwave::write_multiplier_csv;

pub const CACHE_ENV: &str = "NLGAMMA_CACHE_DIR";

#[derive(Parser, Debug)]
#[command(name = "nlgamma", version, about = "Nonlocal perimeters, phase-coexistence energies and Gamma-limit sweeps")]
struct Cli {
    /// Directory receiving CSV output, config.toml and summary.toml.
    #[arg(long, global = true, default_value = "nlgamma-out")]
    out: PathBuf,
    /// Worker threads for the numerical kernels.
    #[arg(long, global = true)]
    threads: Option<NonZeroUsize>,
    /// Directory for cached pair-weight tables.
    #[arg(long, global = true, env = CACHE_ENV)]
    cache_dir: Option<PathBuf>,
    /// TOML file with one section per command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Fractional perimeter of a set relative to a container.
    Perimeter(PerimeterArgs),
    /// One functional evaluated on a set or a field.
    Energy(EnergyArgs),
    /// Projected gradient descent of a differentiable functional.
    Minimize(MinimizeArgs),
    /// One named experiment with its verdict.
    Sweep(SweepArgs),
    /// Tabulated water-wave multiplier.
    Multiplier(MultiplierArgs),
    /// All (or some) experiments at their default settings.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandName {
    Perimeter,
    Energy,
    Minimize,
    Sweep,
    Multiplier,
    Report,
}

impl CommandName {
    pub const ALL: [CommandName; 6] = [
        CommandName::Perimeter,
        CommandName::Energy,
        CommandName::Minimize,
        CommandName::Sweep,
        CommandName::Multiplier,
        CommandName::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CommandName::Perimeter => "perimeter",
            CommandName::Energy => "energy",
            CommandName::Minimize => "minimize",
            CommandName::Sweep => "sweep",
            CommandName::Multiplier => "multiplier",
            CommandName::Report => "report",
        }
    }
}

impl fmt::Display for CommandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What one invocation runs and where.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: CommandName,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub cache_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Creates the output directory and checks that it accepts files.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.threads == Some(0) {
            return Err(CliError::Config("thread count must be at least 1".into()));
        }
        fs::create_dir_all(&self.out)
            .map_err(|e| CliError::Config(format!("output directory {}: {e}", self.out.display())))?;
        let probe = self.out.join(".nlgamma-probe");
        fs::write(&probe, b"")
            .and_then(|_| fs::remove_file(&probe))
            .map_err(|e| CliError::Config(format!("output directory {} is not writable: {e}", self.out.display())))
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config files or parameters; exit status 2.
    Config(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

// ---------------------------------------------------------------------------
// Shorthand grammar for sets and containers.

fn numbers(body: &str, what: &str) -> CliResult<Vec<f64>> {
    body.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| config_err(format!("{what}: `{t}` is not a number")))
        })
        .collect()
}

fn box_bounds(body: &str, what: &str) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let v = numbers(body, what)?;
    if v.is_empty() || v.len() % 2 != 0 || v.len() > 6 {
        return Err(config_err(format!("{what}: a box takes lo,hi pairs for 1 to 3 axes")));
    }
    Ok((v.iter().step_by(2).copied().collect(), v.iter().skip(1).step_by(2).copied().collect()))
}

fn ball_parts(body: &str, what: &str) -> CliResult<(Vec<f64>, f64)> {
    let mut v = numbers(body, what)?;
    if !(2..=4).contains(&v.len()) {
        return Err(config_err(format!("{what}: a ball takes 1 to 3 center coordinates and a radius")));
    }
    let r = v.pop().unwrap();
    Ok((v, r))
}

/// `halfspace` (`{x₁ > 0}`), `halfspace:c` (`{x₁ > c}`), `box:lo1,hi1[,...]`,
/// `ball:c1[,...],r`, `full` or `empty`.
pub fn parse_set(text: &str) -> CliResult<GeometricSet> {
    let what = "--set";
    let (head, body) = text.split_once(':').unwrap_or((text, ""));
    match (head, body.is_empty()) {
        ("halfspace", true) => Ok(GeometricSet::half_space(&[-1.0], 0.0)),
        ("halfspace", false) => {
            let c = numbers(body, what)?;
            match c.as_slice() {
                [c] => Ok(GeometricSet::half_space(&[-1.0], -c)),
                _ => Err(config_err("--set: halfspace takes one offset")),
            }
        }
        ("box", false) => {
            let (lo, hi) = box_bounds(body, what)?;
            Ok(GeometricSet::boxed(&lo, &hi))
        }
        ("ball", false) => {
            let (c, r) = ball_parts(body, what)?;
            Ok(GeometricSet::ball(&c, r))
        }
        ("full", true) => Ok(GeometricSet::Full),
        ("empty", true) => Ok(GeometricSet::Empty),
        _ => Err(config_err(format!("--set: cannot read `{text}`"))),
    }
}

/// `box:lo1,hi1[,...]` or `ball:c1[,...],r`.
pub fn parse_shape(text: &str) -> CliResult<Shape> {
    let what = "--omega";
    match text.split_once(':') {
        Some(("box", body)) => {
            let (lo, hi) = box_bounds(body, what)?;
            Ok(Shape::Box { lo, hi })
        }
        Some(("ball", body)) => {
            let (center, radius) = ball_parts(body, what)?;
            Ok(Shape::Ball { center, radius })
        }
        _ => Err(config_err(format!("--omega: cannot read `{text}`"))),
    }
}

fn default_cells(dim: usize) -> usize {
    match dim {
        1 => 256,
        2 => 64,
        _ => 16,
    }
}

/// Container from the flags; cells default by dimension and the margin to a
/// quarter diameter.
fn domain_from_flags(shape: Shape, cells: Option<&[usize]>, margin: Option<f64>) -> CliResult<Domain> {
    let n = shape.dim();
    let cells = match cells {
        Some(&[c]) => vec![c; n],
        Some(c) => c.to_vec(),
        None => vec![default_cells(n); n],
    };
    let d = Domain::new(shape, cells, 0.0)?;
    let margin = margin.unwrap_or(0.25 * d.diameter());
    Ok(d.with_margin(margin)?)
}

fn parse_list<T: std::str::FromStr>(text: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    text.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|e| format!("`{t}`: {e}")))
        .collect()
}

fn f64_list(text: &str) -> Result<Vec<f64>, String> {
    parse_list(text)
}

// ---------------------------------------------------------------------------
// Configuration layers.

/// Recursive merge; tables combine key by key, other values are replaced.
fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            // A tagged table of another kind is a new value, not a patch.
            (Some(Value::Table(b)), Value::Table(o)) if b.get("kind").is_none() || o.get("kind").is_none() || b.get("kind") == o.get("kind") => {
                merge(b, o)
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> CliResult<Value> {
    Value::try_from(v).map_err(|e| config_err(format!("cannot encode configuration: {e}")))
}

fn to_table<T: Serialize>(v: &T) -> CliResult<Table> {
    match to_value(v)? {
        Value::Table(t) => Ok(t),
        _ => Err(config_err("configuration is not a table")),
    }
}

/// Section `command` of the file; other sections must name commands.
fn file_section(path: Option<&Path>, command: CommandName) -> CliResult<Table> {
    let Some(path) = path else {
        return Ok(Table::new());
    };
    let text = fs::read_to_string(path).map_err(|e| config_err(format!("config {}: {e}", path.display())))?;
    let mut root: Table = text
        .parse()
        .map_err(|e| config_err(format!("config {}: {e}", path.display())))?;
    if let Some(k) = root.keys().find(|k| !CommandName::ALL.iter().any(|c| c.name() == k.as_str())) {
        return Err(config_err(format!("config {}: unknown section `{k}`", path.display())));
    }
    match root.remove(command.name()) {
        None => Ok(Table::new()),
        Some(Value::Table(t)) => Ok(t),
        Some(_) => Err(config_err(format!("config {}: `{command}` must be a table", path.display()))),
    }
}

/// Decodes through TOML text so that errors name the offending key.
fn resolve<T: DeserializeOwned>(command: CommandName, table: Table) -> CliResult<T> {
    let text = toml::to_string(&table).map_err(|e| config_err(format!("cannot encode configuration: {e}")))?;
    toml::from_str(&text).map_err(|e| config_err(format!("[{command}] {}", e.message())))
}

/// Puts `v` at the dotted `path`, creating tables on the way.
fn set_key(t: &mut Table, path: &[&str], v: Value) {
    let (last, init) = path.split_last().expect("nonempty key path");
    let mut cur = t;
    for k in init {
        let entry = cur.entry(k.to_string()).or_insert_with(|| Value::Table(Table::new()));
        if !entry.is_table() {
            *entry = Value::Table(Table::new());
        }
        cur = entry.as_table_mut().unwrap();
    }
    cur.insert(last.to_string(), v);
}

fn set_opt<T: Serialize>(t: &mut Table, path: &[&str], v: &Option<T>) -> CliResult<()> {
    if let Some(v) = v {
        set_key(t, path, to_value(v)?);
    }
    Ok(())
}

/// Flags describing a container.
#[derive(Args, Debug, Clone, Default)]
struct OmegaFlags {
    /// Container: `box:lo1,hi1[,...]` or `ball:c1[,...],r`.
    #[arg(long)]
    omega: Option<String>,
    /// Cells per axis; one value applies to every axis.
    #[arg(long, value_delimiter = ',')]
    cells: Option<Vec<usize>>,
    /// Width of the materialized exterior layer.
    #[arg(long)]
    margin: Option<f64>,
}

impl OmegaFlags {
    fn apply(&self, t: &mut Table, key: &str) -> CliResult<()> {
        if let Some(text) = &self.omega {
            let d = domain_from_flags(parse_shape(text)?, self.cells.as_deref(), self.margin)?;
            set_key(t, &[key], to_value(&d)?);
            return Ok(());
        }
        if let Some(c) = &self.cells {
            let n = match t.get(key).and_then(|o| o.get("cells")).and_then(Value::as_array) {
                Some(a) => a.len(),
                None => c.len(),
            };
            let cells = if c.len() == 1 { vec![c[0]; n] } else { c.clone() };
            set_key(t, &[key, "cells"], to_value(&cells)?);
        }
        set_opt(t, &[key, "margin"], &self.margin)
    }
}

fn apply_set(t: &mut Table, key: &str, text: &Option<String>) -> CliResult<()> {
    if let Some(text) = text {
        set_key(t, &[key], to_value(&parse_set(text)?)?);
    }
    Ok(())
}

/// Flags for the fields of an [`EnergySpec`].
#[derive(Args, Debug, Clone, Default)]
struct SpecFlags {
    /// Functional tag such as `MM`, `F_full`, `J_eps_s` or `G_SHARP`.
    #[arg(long)]
    functional: Option<Functional>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    /// Line tension coefficient.
    #[arg(long)]
    c: Option<f64>,
    /// Fixed boundary weight; without it the weight is `e^{k/eps}`.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    truncation: Option<f64>,
}

impl SpecFlags {
    fn apply(&self, t: &mut Table) -> CliResult<()> {
        set_opt(t, &["spec", "functional"], &self.functional)?;
        set_opt(t, &["spec", "eps"], &self.eps)?;
        set_opt(t, &["spec", "s"], &self.s)?;
        set_opt(t, &["spec", "sigma"], &self.sigma)?;
        set_opt(t, &["spec", "k"], &self.k)?;
        set_opt(t, &["spec", "c"], &self.c)?;
        set_opt(t, &["spec", "lambda"], &self.lambda.map(|value| LambdaSchedule::Fixed { value }))?;
        set_opt(t, &["spec", "truncation"], &self.truncation)
    }
}

/// Defaults of the `spec` section below file and flags.
fn spec_defaults() -> Table {
    let mut t = Table::new();
    set_key(&mut t, &["spec", "eps"], Value::Float(1.0));
    set_key(&mut t, &["spec", "s"], Value::Float(0.25));
    t
}

/// Output files and printed lines of one run.
#[derive(Debug, Default)]
struct Outcome {
    code: i32,
    outputs: Vec<String>,
    lines: Vec<String>,
    result: Table,
}

impl Outcome {
    fn put<T: Serialize>(&mut self, key: &str, v: T) -> CliResult<()> {
        self.result.insert(key.into(), to_value(&v)?);
        Ok(())
    }
}

fn create(out: &Path, name: &str, outcome: &mut Outcome) -> CliResult<BufWriter<fs::File>> {
    outcome.outputs.push(name.into());
    let f = fs::File::create(out.join(name)).map_err(|e| config_err(format!("{}: {e}", out.join(name).display())))?;
    Ok(BufWriter::new(f))
}

// ---------------------------------------------------------------------------
// perimeter

#[derive(Args, Debug, Clone)]
struct PerimeterArgs {
    /// Set: `halfspace[:c]`, `box:...`, `ball:...`, `full` or `empty`.
    #[arg(long)]
    set: Option<String>,
    #[command(flatten)]
    omega: OmegaFlags,
    #[arg(long)]
    s: Option<f64>,
    /// `interior`, `exterior` or `full`.
    #[arg(long)]
    part: Option<Part>,
    #[arg(long)]
    truncation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerimeterConfig {
    pub s: f64,
    #[serde(default = "interior")]
    pub part: Part,
    #[serde(default)]
    pub truncation: Option<f64>,
    pub set: GeometricSet,
    pub omega: Domain,
}

fn interior() -> Part {
    Part::Interior
}

impl PerimeterArgs {
    fn layer(&self) -> CliResult<Table> {
        let mut t = Table::new();
        apply_set(&mut t, "set", &self.set)?;
        self.omega.apply(&mut t, "omega")?;
        set_opt(&mut t, &["s"], &self.s)?;
        set_opt(&mut t, &["part"], &self.part)?;
        set_opt(&mut t, &["truncation"], &self.truncation)?;
        Ok(t)
    }
}

fn run_perimeter(cfg: &PerimeterConfig, run: &RunConfig) -> CliResult<Outcome> {
    let mut spec = KernelSpec::indicator(cfg.s).with_cache(run.cache_dir.clone());
    spec.truncation = cfg.truncation;
    let value = frac_perimeter_with(&cfg.set, &cfg.omega, &spec, cfg.part)?;
    let mut o = Outcome::default();
    let mut w = create(&run.out, "perimeter.csv", &mut o)?;
    writeln!(w, "s,part,perimeter,scaled_perimeter")?;
    writeln!(w, "{},{},{},{}", cfg.s, to_value(&cfg.part)?.as_str().unwrap_or(""), value, (0.5 - cfg.s) * value)?;
    w.flush()?;
    o.lines.push(format!("{value}"));
    o.put("perimeter", value)?;
    Ok(o)
}

// ---------------------------------------------------------------------------
// energy

/// Where the evaluated field comes from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSource {
    /// The well zeros on and off `set`.
    #[default]
    Indicator,
    /// The optimal-profile recovery field of `set` at `spec.eps`.
    Recovery,
    /// A field file; its values are placed on `omega`.
    File { path: PathBuf },
}

fn parse_field_source(text: &str) -> Result<FieldSource, String> {
    match text {
        "indicator" => Ok(FieldSource::Indicator),
        "recovery" => Ok(FieldSource::Recovery),
        _ => match text.strip_prefix("file:") {
            Some(p) if !p.is_empty() => Ok(FieldSource::File { path: p.into() }),
            _ => Err(format!("`{text}`: expected indicator, recovery or file:PATH")),
        },
    }
}

#[derive(Args, Debug, Clone)]
struct EnergyArgs {
    #[command(flatten)]
    spec: SpecFlags,
    #[arg(long)]
    set: Option<String>,
    #[command(flatten)]
    omega: OmegaFlags,
    /// `indicator`, `recovery` or `file:PATH`.
    #[arg(long, value_parser = parse_field_source)]
    field: Option<FieldSource>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    #[serde(default)]
    pub set: Option<GeometricSet>,
    #[serde(default)]
    pub field: FieldSource,
    pub spec: EnergySpec,
    pub omega: Domain,
}

impl EnergyArgs {
    fn layer(&self) -> CliResult<Table> {
        let mut t = Table::new();
        self.spec.apply(&mut t)?;
        apply_set(&mut t, "set", &self.set)?;
        self.omega.apply(&mut t, "omega")?;
        set_opt(&mut t, &["field"], &self.field)?;
        Ok(t)
    }
}

/// Value of a functional: a breakdown for field functionals, a number for
/// the set functionals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EnergyValue {
    Field(EnergyBreakdown),
    Set(f64),
}

impl EnergyValue {
    pub fn total(&self) -> f64 {
        match self {
            EnergyValue::Field(b) => b.total,
            EnergyValue::Set(v) => *v,
        }
    }
}

fn require_set(set: &Option<GeometricSet>, tag: Functional) -> CliResult<&GeometricSet> {
    set.as_ref().ok_or_else(|| config_err(format!("[energy] `set` is required for {tag}")))
}

/// The exterior datum of `set` with the well zeros as phases.
fn well_datum(set: &GeometricSet, spec: &EnergySpec) -> ExteriorDatum {
    let (a, b) = spec.well.zeros();
    ExteriorDatum::Set {
        set: set.clone(),
        inside: b,
        outside: a,
    }
}

fn energy_field(cfg: &EnergyConfig) -> CliResult<ScalarField> {
    let spec = &cfg.spec;
    let range = minimize::range_for_well(&spec.well);
    let datum = cfg.set.as_ref().map(|e| well_datum(e, spec));
    match &cfg.field {
        FieldSource::Indicator => {
            let e = require_set(&cfg.set, spec.functional)?;
            Ok(minimize::seed_field(&Seed::Voxelized { set: e.clone() }, &cfg.omega, datum, &spec.well, range)?)
        }
        FieldSource::Recovery => {
            let e = require_set(&cfg.set, spec.functional)?;
            Ok(minimize::recovery_sequence(e, spec.eps, &spec.well, &cfg.omega)?)
        }
        FieldSource::File { path } => {
            let f = fs::File::open(path).map_err(|e| config_err(format!("field {}: {e}", path.display())))?;
            let u = ScalarField::read_from(f)?;
            Ok(ScalarField::new(cfg.omega.clone(), u.values().to_vec(), datum, u.range())?)
        }
    }
}

/// Evaluates the configured functional.
pub fn evaluate_energy(cfg: &EnergyConfig, cache_dir: Option<PathBuf>) -> CliResult<EnergyValue> {
    let spec = &cfg.spec;
    spec.validate()?;
    let omega = &cfg.omega;
    let tag = spec.functional;
    let value = match tag {
        Functional::CapillaryLocal => energies::capillarity(require_set(&cfg.set, tag)?, omega, spec.sigma, CapillarityKind::Local, spec.s)?,
        Functional::CapillaryFrac => {
            energies::capillarity(require_set(&cfg.set, tag)?, omega, spec.sigma, CapillarityKind::Fractional, spec.s)?
        }
        Functional::GSharp => energies::g_sharp(require_set(&cfg.set, tag)?, omega, spec.sigma, spec.c)?,
        Functional::PhiLine => {
            let e = require_set(&cfg.set, tag)?;
            let phases = spec.well.zeros();
            let u = ScalarField::from_fn(omega.clone(), None, crate::field::ValueRange::Symmetric, |p| {
                if e.contains(p) {
                    1.0
                } else {
                    -1.0
                }
            })?;
            let v: Vec<f64> = energies::boundary_faces(omega)
                .iter()
                .map(|f| if e.contains(&f.center) { phases.1 } else { phases.0 })
                .collect();
            energies::phi_line_tension(&u, &v, omega, spec.sigma, spec.c, &spec.well, phases)?
        }
        _ => {
            let u = energy_field(cfg)?;
            let obj = Objective::for_field(spec, &u, cache_dir)?;
            return Ok(EnergyValue::Field(obj.evaluate(u.values())?));
        }
    };
    Ok(EnergyValue::Set(value))
}

fn run_energy(cfg: &EnergyConfig, run: &RunConfig) -> CliResult<Outcome> {
    let value = evaluate_energy(cfg, run.cache_dir.clone())?;
    let mut o = Outcome::default();
    let mut w = create(&run.out, "energy.csv", &mut o)?;
    writeln!(w, "{}", EnergyBreakdown::CSV_HEADER)?;
    match value {
        EnergyValue::Field(b) => {
            writeln!(w, "{}", b.csv_row(&cfg.spec))?;
            o.put("kinetic", b.kinetic)?;
            o.put("potential", b.potential)?;
            o.put("boundary", b.boundary)?;
        }
        EnergyValue::Set(v) => {
            let s = &cfg.spec;
            writeln!(w, "{},{},{},{},{},,,,{}", s.functional, s.eps, s.s, s.sigma, s.k, v)?;
        }
    }
    w.flush()?;
    o.lines.push(format!("{}", value.total()));
    o.put("total", value.total())?;
    Ok(o)
}

// ---------------------------------------------------------------------------
// minimize

fn parse_seed(text: &str) -> Result<Seed, String> {
    let (head, body) = text.split_once(':').unwrap_or((text, ""));
    let nums = || f64_list(body);
    match head {
        "constant" => match nums()?.as_slice() {
            [value] => Ok(Seed::Constant { value: *value }),
            _ => Err("constant:VALUE".into()),
        },
        "linear" => match nums()?.as_slice() {
            [from, to] => Ok(Seed::Linear { from: *from, to: *to }),
            _ => Err("linear:FROM,TO".into()),
        },
        "voxelized" if body.is_empty() => Err("voxelized seeds follow `set`; omit --seed".into()),
        _ => Err(format!("`{text}`: expected constant:V or linear:A,B")),
    }
}

#[derive(Args, Debug, Clone)]
struct MinimizeArgs {
    #[command(flatten)]
    spec: SpecFlags,
    /// Set whose indicator gives the exterior datum and the default seed.
    #[arg(long)]
    set: Option<String>,
    #[command(flatten)]
    omega: OmegaFlags,
    /// `constant:V` or `linear:A,B`; defaults to the voxelized set.
    #[arg(long, value_parser = parse_seed)]
    seed: Option<Seed>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Adds a small odd perturbation to the seed.
    #[arg(long)]
    odd_perturbation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimizeRunConfig {
    #[serde(default)]
    pub set: Option<GeometricSet>,
    /// Defaults to the indicator of `set` with the well zeros as phases.
    #[serde(default)]
    pub exterior: Option<ExteriorDatum>,
    /// Defaults to the voxelized `set`.
    #[serde(default)]
    pub seed: Option<Seed>,
    pub spec: EnergySpec,
    pub omega: Domain,
    #[serde(default)]
    pub descent: MinimizeConfig,
}

impl MinimizeRunConfig {
    /// Fills the defaults that depend on other fields.
    fn resolved(mut self) -> CliResult<Self> {
        if self.exterior.is_none() {
            self.exterior = self.set.as_ref().map(|e| well_datum(e, &self.spec));
        }
        if self.seed.is_none() {
            let e = self
                .set
                .clone()
                .ok_or_else(|| config_err("[minimize] either `set` or `seed` is required"))?;
            self.seed = Some(Seed::Voxelized { set: e });
        }
        Ok(self)
    }
}

impl MinimizeArgs {
    fn layer(&self) -> CliResult<Table> {
        let mut t = Table::new();
        self.spec.apply(&mut t)?;
        apply_set(&mut t, "set", &self.set)?;
        self.omega.apply(&mut t, "omega")?;
        set_opt(&mut t, &["seed"], &self.seed)?;
        set_opt(&mut t, &["descent", "max_iterations"], &self.max_iterations)?;
        set_opt(&mut t, &["descent", "tolerance"], &self.tolerance)?;
        if self.odd_perturbation {
            set_key(&mut t, &["descent", "odd_perturbation"], Value::Boolean(true));
        }
        Ok(t)
    }
}

/// One line per cell of the container: coordinates and value.
fn write_field_csv(u: &ScalarField, mut w: impl Write) -> CliResult<()> {
    let n = u.dim();
    let axes: Vec<String> = (1..=n).map(|k| format!("x{k}")).collect();
    writeln!(w, "{},u", axes.join(","))?;
    for i in u.interior_cells() {
        let p = u.grid().center(i);
        let xs: Vec<String> = p[..n].iter().map(|x| x.to_string()).collect();
        writeln!(w, "{},{}", xs.join(","), u.values()[i])?;
    }
    Ok(())
}

fn run_minimize(cfg: &MinimizeRunConfig, run: &RunConfig) -> CliResult<Outcome> {
    let spec = &cfg.spec;
    let range = minimize::range_for_well(&spec.well);
    let seed = cfg.seed.as_ref().expect("resolved seed");
    let u0 = minimize::seed_field(seed, &cfg.omega, cfg.exterior.clone(), &spec.well, range)?;
    let obj = Objective::new(spec, &cfg.omega, cfg.exterior.as_ref(), run.cache_dir.clone())?;
    let m = minimize::minimize_with(&obj, &u0, &cfg.descent)?;
    let mut o = Outcome::default();
    let mut w = create(&run.out, "trace.csv", &mut o)?;
    m.write_trace(&mut w)?;
    w.flush()?;
    let mut w = create(&run.out, "energy.csv", &mut o)?;
    writeln!(w, "{}", EnergyBreakdown::CSV_HEADER)?;
    writeln!(w, "{}", m.energy.csv_row(spec))?;
    w.flush()?;
    let mut w = create(&run.out, "field.csv", &mut o)?;
    write_field_csv(&m.field, &mut w)?;
    w.flush()?;
    let mut w = create(&run.out, "field.bin", &mut o)?;
    m.field.write_to(&mut w)?;
    w.flush()?;
    let last = m.trace.last();
    o.code = if m.status == Status::Converged { 0 } else { 1 };
    o.lines.push(format!(
        "{} status={} iterations={}",
        m.energy.total,
        to_value(&m.status)?.as_str().unwrap_or(""),
        last.map_or(0, |t| t.iter)
    ));
    o.put("total", m.energy.total)?;
    o.put("status", m.status)?;
    o.put("iterations", last.map_or(0, |t| t.iter))?;
    o.put("gradient_norm", last.map_or(f64::NAN, |t| t.gradient_norm))?;
    Ok(o)
}

// ---------------------------------------------------------------------------
// sweep and report

#[derive(Args, Debug, Clone)]
struct SweepArgs {
    /// Experiment name such as `BBM_LIMIT`.
    #[arg(long)]
    experiment: Option<ExperimentName>,
    /// Sweep grid, comma separated.
    #[arg(long, value_delimiter = ',')]
    parameters: Option<Vec<f64>>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Fractional order for the experiments that sweep another parameter.
    #[arg(long)]
    s: Option<f64>,
}

impl SweepArgs {
    fn layer(&self) -> CliResult<Table> {
        let mut t = Table::new();
        set_opt(&mut t, &["name"], &self.experiment)?;
        set_opt(&mut t, &["parameters"], &self.parameters)?;
        set_opt(&mut t, &["tolerance"], &self.tolerance)?;
        set_opt(&mut t, &["options", "s"], &self.s)?;
        Ok(t)
    }
}

/// Preset of the experiment named by `file` or `flags` (flags win).
fn sweep_defaults(file: &Table, flags: &Table) -> CliResult<Table> {
    let name = flags
        .get("name")
        .or_else(|| file.get("name"))
        .ok_or_else(|| config_err("sweep needs --experiment or `name` in [sweep]"))?;
    let name: ExperimentName = name
        .as_str()
        .ok_or_else(|| config_err("[sweep] `name` must be a string"))?
        .parse()
        .map_err(|e: Error| config_err(format!("[sweep] {e}")))?;
    to_table(&lab::preset(name))
}

fn write_report(report: &SweepReport, out: &Path, name: &str, o: &mut Outcome) -> CliResult<()> {
    let mut w = create(out, name, o)?;
    report.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn report_summary(r: &SweepReport) -> CliResult<Value> {
    let mut t = Table::new();
    t.insert("verdict".into(), to_value(&r.verdict.to_string())?);
    t.insert("target".into(), to_value(&r.target)?);
    if let Some(e) = r.extrapolation {
        t.insert("limit".into(), to_value(&e.affine)?);
    }
    if let Some(f) = r.fit {
        t.insert("slope".into(), to_value(&f.slope)?);
    }
    let mut checks = Table::new();
    for c in &r.checks {
        let mut ct = Table::new();
        ct.insert("passed".into(), Value::Boolean(c.passed));
        ct.insert("detail".into(), Value::String(c.detail.clone()));
        checks.insert(c.name.clone(), Value::Table(ct));
    }
    t.insert("checks".into(), Value::Table(checks));
    Ok(Value::Table(t))
}

fn run_sweep(exp: &Experiment, run: &RunConfig) -> CliResult<Outcome> {
    let report = lab::run(exp)?;
    let mut o = Outcome::default();
    write_report(&report, &run.out, "sweep.csv", &mut o)?;
    o.lines.push(report.verdict_line());
    for c in &report.checks {
        o.lines.push(format!("  {} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail));
    }
    o.code = if report.verdict == Verdict::Pass { 0 } else { 1 };
    o.result.insert("experiment".into(), report_summary(&report)?);
    Ok(o)
}

#[derive(Args, Debug, Clone)]
struct ReportArgs {
    /// Experiment names, comma separated; all by default.
    #[arg(long, value_delimiter = ',')]
    experiments: Option<Vec<ExperimentName>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    pub experiments: Vec<ExperimentName>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            experiments: ExperimentName::ALL.to_vec(),
        }
    }
}

fn run_report(cfg: &ReportConfig, run: &RunConfig) -> CliResult<Outcome> {
    let mut o = Outcome::default();
    let mut rows = Vec::new();
    let mut all_pass = true;
    for &name in &cfg.experiments {
        let report = lab::run(&lab::preset(name))?;
        write_report(&report, &run.out, &format!("{name}.csv"), &mut o)?;
        o.lines.push(report.verdict_line());
        all_pass &= report.verdict == Verdict::Pass;
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        rows.push(format!(
            "{},{},{},{},{},{}",
            name,
            report.verdict,
            report.target,
            report.extrapolation.map_or(String::new(), |e| e.affine.to_string()),
            report.fit.map_or(String::new(), |f| f.slope.to_string()),
            failed.join(";")
        ));
        o.result.insert(name.to_string(), report_summary(&report)?);
    }
    let mut w = create(&run.out, "report.csv", &mut o)?;
    writeln!(w, "experiment,verdict,target,limit,slope,failed_checks")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    w.flush()?;
    o.code = if all_pass { 0 } else { 1 };
    Ok(o)
}

// ---------------------------------------------------------------------------
// multiplier

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultiplierConfig {
    pub s: Vec<f64>,
    pub xi_min: f64,
    pub xi_max: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl Default for MultiplierConfig {
    fn default() -> Self {
        MultiplierConfig {
            s: vec![0.5],
            xi_min: 0.01,
            xi_max: 50.0,
            points: 500,
            spacing: Spacing::Log,
        }
    }
}

impl MultiplierConfig {
    pub fn frequencies(&self) -> CliResult<Vec<f64>> {
        let (a, b, n) = (self.xi_min, self.xi_max, self.points);
        if !(a > 0.0 && b > a && b.is_finite()) || n < 2 {
            return Err(config_err("[multiplier] needs 0 < xi_min < xi_max and points >= 2"));
        }
        let t = |i: usize| i as f64 / (n - 1) as f64;
        Ok(match self.spacing {
            Spacing::Linear => (0..n).map(|i| a + t(i) * (b - a)).collect(),
            Spacing::Log => (0..n).map(|i| a * (b / a).powf(t(i))).collect(),
        })
    }
}

#[derive(Args, Debug, Clone)]
struct MultiplierArgs {
    /// Orders, comma separated.
    #[arg(long, value_delimiter = ',')]
    s: Option<Vec<f64>>,
    #[arg(long)]
    xi_min: Option<f64>,
    #[arg(long)]
    xi_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    spacing: Option<Spacing>,
}

impl MultiplierArgs {
    fn layer(&self) -> CliResult<Table> {
        let mut t = Table::new();
        set_opt(&mut t, &["s"], &self.s)?;
        set_opt(&mut t, &["xi_min"], &self.xi_min)?;
        set_opt(&mut t, &["xi_max"], &self.xi_max)?;
        set_opt(&mut t, &["points"], &self.points)?;
        set_opt(&mut t, &["spacing"], &self.spacing)?;
        Ok(t)
    }
}

fn run_multiplier(cfg: &MultiplierConfig, run: &RunConfig) -> CliResult<Outcome> {
    if let Some(&s) = cfg.s.iter().find(|&&s| !(s > 0.0 && s < 1.0)) {
        return Err(config_err(format!("[multiplier] order {s} not in (0, 1)")));
    }
    let xi = cfg.frequencies()?;
    let mut o = Outcome::default();
    let mut w = create(&run.out, "multiplier.csv", &mut o)?;
    write_multiplier_csv(&mut w, &cfg.s, &xi)?;
    w.flush()?;
    o.lines.push(format!("{} rows", cfg.s.len() * xi.len()));
    o.put("rows", (cfg.s.len() * xi.len()) as i64)?;
    Ok(o)
}

// ---------------------------------------------------------------------------
// dispatch

fn layered<T: DeserializeOwned>(command: CommandName, defaults: Table, file: Table, flags: Table) -> CliResult<T> {
    let mut t = defaults;
    merge(&mut t, file);
    merge(&mut t, flags);
    resolve(command, t)
}

fn command_name(cmd: &Cmd) -> CommandName {
    match cmd {
        Cmd::Perimeter(_) => CommandName::Perimeter,
        Cmd::Energy(_) => CommandName::Energy,
        Cmd::Minimize(_) => CommandName::Minimize,
        Cmd::Sweep(_) => CommandName::Sweep,
        Cmd::Multiplier(_) => CommandName::Multiplier,
        Cmd::Report(_) => CommandName::Report,
    }
}

/// Resolves the configuration, records it and runs the command.
fn dispatch(cmd: &Cmd, run: &RunConfig) -> CliResult<Outcome> {
    let name = run.command;
    let file = file_section(run.config.as_deref(), name)?;
    macro_rules! go {
        ($ty:ty, $defaults:expr, $flags:expr, $run:expr) => {{
            let cfg: $ty = layered(name, $defaults, file, $flags)?;
            write_effective(run, &cfg)?;
            $run(&cfg, run)
        }};
    }
    match cmd {
        Cmd::Perimeter(a) => go!(PerimeterConfig, Table::new(), a.layer()?, run_perimeter),
        Cmd::Energy(a) => go!(EnergyConfig, spec_defaults(), a.layer()?, run_energy),
        Cmd::Minimize(a) => {
            let cfg: MinimizeRunConfig = layered(name, spec_defaults(), file, a.layer()?)?;
            let cfg = cfg.resolved()?;
            write_effective(run, &cfg)?;
            run_minimize(&cfg, run)
        }
        Cmd::Sweep(a) => {
            let flags = a.layer()?;
            let defaults = sweep_defaults(&file, &flags)?;
            go!(Experiment, defaults, flags, run_sweep)
        }
        Cmd::Multiplier(a) => go!(MultiplierConfig, Table::new(), a.layer()?, run_multiplier),
        Cmd::Report(a) => {
            let mut flags = Table::new();
            set_opt(&mut flags, &["experiments"], &a.experiments)?;
            go!(ReportConfig, Table::new(), flags, run_report)
        }
    }
}

fn write_effective<T: Serialize>(run: &RunConfig, cfg: &T) -> CliResult<()> {
    let mut root = Table::new();
    root.insert(run.command.name().into(), to_value(cfg)?);
    let text = toml::to_string(&root).map_err(|e| config_err(format!("cannot encode configuration: {e}")))?;
    fs::write(run.out.join("config.toml"), text)?;
    Ok(())
}

fn write_summary(run: &RunConfig, o: &Outcome) -> CliResult<()> {
    let mut t = Table::new();
    t.insert("command".into(), Value::String(run.command.name().into()));
    t.insert("exit_code".into(), Value::Integer(o.code.into()));
    if let Some(n) = run.threads {
        t.insert("threads".into(), Value::Integer(n as i64));
    }
    let mut outputs = vec!["config.toml".to_string()];
    outputs.extend(o.outputs.iter().cloned());
    t.insert("outputs".into(), to_value(&outputs)?);
    t.insert("result".into(), Value::Table(o.result.clone()));
    let text = toml::to_string(&t).map_err(|e| config_err(format!("cannot encode summary: {e}")))?;
    fs::write(run.out.join("summary.toml"), text)?;
    Ok(())
}

fn execute(cli: Cli) -> CliResult<i32> {
    let run = RunConfig {
        command: command_name(&cli.command),
        config: cli.config.clone(),
        out: cli.out.clone(),
        threads: cli.threads.map(NonZeroUsize::get),
        cache_dir: cli.cache_dir.clone(),
    };
    run.validate()?;
    let outcome = match run.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| config_err(format!("thread pool: {e}")))?
            .install(|| dispatch(&cli.command, &run))?,
        None => dispatch(&cli.command, &run)?,
    };
    write_summary(&run, &outcome)?;
    for l in &outcome.lines {
        println!("{l}");
    }
    Ok(outcome.code)
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
