//! Job configuration: one JSON document, with command-line flags layered on top.

use std::path::{Path, PathBuf};

use permadyn::lmg::LmgParams;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    LmgTheory,
    LmgFinite,
    Ground,
    Floquet,
    OracleCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::LmgTheory => "lmg-theory",
            Command::LmgFinite => "lmg-finite",
            Command::Ground => "ground",
            Command::Floquet => "floquet",
            Command::OracleCheck => "oracle-check",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[clap(rename_all = "snake_case")]
pub enum SweepParam {
    Coupling,
    Field,
    CollectiveRate,
    LocalRate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: SweepParam,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Sweep {
    /// Linearly spaced values, `min` alone for a single point.
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let span = self.max - self.min;
        (0..self.points)
            .map(|i| self.min + span * i as f64 / (self.points - 1) as f64)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub cg_target: f64,
    pub max_iterations: Option<usize>,
    pub matrix_free: bool,
    pub check_uniqueness: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = permadyn::dicke::SolverOptions::default();
        Self {
            tolerance: d.tolerance,
            cg_target: d.cg_target,
            max_iterations: d.max_iterations,
            matrix_free: d.matrix_free,
            check_uniqueness: d.check_uniqueness,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeanFieldConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_time: f64,
    /// Fixed transient instead of the Jacobian-based estimate.
    pub transient: Option<f64>,
}

impl Default for MeanFieldConfig {
    fn default() -> Self {
        let d = permadyn::meanfield::MeanFieldSettings::default();
        Self {
            rtol: d.tolerances.rtol,
            atol: d.tolerances.atol,
            max_time: d.max_time,
            transient: d.transient_override,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JobConfig {
    /// Must match the subcommand when present in a file.
    pub command: Option<Command>,
    pub coupling: f64,
    pub field: f64,
    pub collective_rate: f64,
    pub local_rate: f64,
    /// Starting Bloch vector of mean-field runs.
    pub initial: [f64; 3],
    pub sweep: Option<Sweep>,
    /// Unit counts for the finite-size commands.
    pub n: Vec<usize>,
    pub solver: SolverConfig,
    pub meanfield: MeanFieldConfig,
    /// Pass threshold of `oracle-check`.
    pub oracle_tolerance: f64,
    /// Distance from 1 that identifies the trivial Floquet multiplier.
    pub floquet_tolerance: f64,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub format: Option<Format>,
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
}

impl Default for JobConfig {
    fn default() -> Self {
        Self {
            command: None,
            coupling: 3.0,
            field: 0.0,
            collective_rate: 2.0,
            local_rate: 1.0,
            initial: [0.3, 0.0, 0.8],
            sweep: None,
            n: Vec::new(),
            solver: SolverConfig::default(),
            meanfield: MeanFieldConfig::default(),
            oracle_tolerance: 1e-8,
            floquet_tolerance: permadyn::floquet::DEFAULT_TOL_UNIT,
            out: None,
            format: None,
            threads: None,
        }
    }
}

/// Flag overrides; every field mirrors a JSON key.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    /// JSON job file; flags below override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file; `.json` selects JSON, anything else CSV. Stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for row-level parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Directory of solver checkpoints reused and refreshed by `lmg-finite`.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub coupling: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub field: Option<f64>,
    #[arg(long)]
    pub collective_rate: Option<f64>,
    #[arg(long)]
    pub local_rate: Option<f64>,
    /// Starting Bloch vector `x,y,z`.
    #[arg(long, value_delimiter = ',', num_args = 3, allow_negative_numbers = true)]
    pub initial: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub sweep_param: Option<SweepParam>,
    #[arg(long, allow_negative_numbers = true)]
    pub sweep_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub sweep_max: Option<f64>,
    #[arg(long)]
    pub sweep_points: Option<usize>,
    /// Comma-separated unit counts.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub cg_target: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub matrix_free: bool,
    #[arg(long)]
    pub check_uniqueness: bool,
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long)]
    pub atol: Option<f64>,
    #[arg(long)]
    pub max_time: Option<f64>,
    #[arg(long)]
    pub transient: Option<f64>,
    #[arg(long)]
    pub oracle_tolerance: Option<f64>,
    #[arg(long)]
    pub floquet_tolerance: Option<f64>,
}

pub fn load(path: &Path) -> Result<JobConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
}

/// File (or defaults) with flags applied, validated for `command`.
pub fn resolve(command: Command, o: &Overrides) -> Result<JobConfig, String> {
    let mut c = match &o.config {
        Some(p) => load(p)?,
        None => JobConfig::default(),
    };
    if let Some(file_cmd) = c.command {
        if file_cmd != command {
            return Err(format!("config is for `{}`, not `{}`", file_cmd.name(), command.name()));
        }
    }
    c.command = Some(command);
    macro_rules! set {
        ($($src:ident => $($dst:ident).+),* $(,)?) => {
            $(if let Some(v) = o.$src.clone() { c.$($dst).+ = v; })*
        };
    }
    set!(
        coupling => coupling,
        field => field,
        collective_rate => collective_rate,
        local_rate => local_rate,
        n => n,
        tolerance => solver.tolerance,
        cg_target => solver.cg_target,
        rtol => meanfield.rtol,
        atol => meanfield.atol,
        max_time => meanfield.max_time,
        oracle_tolerance => oracle_tolerance,
        floquet_tolerance => floquet_tolerance,
    );
    if let Some(v) = o.initial.as_ref() {
        c.initial = [v[0], v[1], v[2]];
    }
    if o.max_iterations.is_some() {
        c.solver.max_iterations = o.max_iterations;
    }
    if o.transient.is_some() {
        c.meanfield.transient = o.transient;
    }
    c.solver.matrix_free |= o.matrix_free;
    c.solver.check_uniqueness |= o.check_uniqueness;
    if o.out.is_some() {
        c.out = o.out.clone();
    }
    if o.format.is_some() {
        c.format = o.format;
    }
    if o.threads.is_some() {
        c.threads = o.threads;
    }
    if o.sweep_param.is_some() || o.sweep_min.is_some() || o.sweep_max.is_some() || o.sweep_points.is_some() {
        let base = c.sweep;
        let param = o.sweep_param.or(base.map(|s| s.param)).ok_or("sweep needs --sweep-param")?;
        let min = o.sweep_min.or(base.map(|s| s.min)).ok_or("sweep needs --sweep-min")?;
        let max = o.sweep_max.or(base.map(|s| s.max)).unwrap_or(min);
        let points = o.sweep_points.or(base.map(|s| s.points)).unwrap_or(1);
        c.sweep = Some(Sweep { param, min, max, points });
    }
    if command == Command::OracleCheck && c.n.is_empty() {
        c.n = vec![2, 3, 4];
    }
    validate(command, &c)?;
    Ok(c)
}

fn validate(command: Command, c: &JobConfig) -> Result<(), String> {
    if let Some(s) = &c.sweep {
        if !s.min.is_finite() || !s.max.is_finite() {
            return Err("sweep bounds must be finite".into());
        }
        if s.points == 0 {
            return Err("sweep needs at least one point".into());
        }
    }
    for p in c.points() {
        match command {
            Command::Ground => {
                if !(p.coupling < 0.0 && p.coupling.is_finite() && p.field.is_finite()) {
                    return Err(format!("ground needs a finite coupling below zero, got {}", p.coupling));
                }
            }
            _ => p.validate().map_err(|e| e.to_string())?,
        }
    }
    let finite = matches!(command, Command::LmgFinite | Command::Ground | Command::OracleCheck);
    if finite && c.n.is_empty() {
        return Err(format!("`{}` needs at least one unit count (n)", command.name()));
    }
    if c.n.iter().any(|&n| n == 0) {
        return Err("unit counts must be positive".into());
    }
    if command == Command::Ground && c.n.iter().any(|n| n % 2 != 0) {
        return Err("ground needs even unit counts".into());
    }
    if command == Command::OracleCheck && c.n.iter().any(|&n| n > permadyn::oracle::MAX_UNITS) {
        return Err(format!("oracle-check handles at most {} units", permadyn::oracle::MAX_UNITS));
    }
    let positive = [
        ("tolerance", c.solver.tolerance),
        ("cg_target", c.solver.cg_target),
        ("rtol", c.meanfield.rtol),
        ("atol", c.meanfield.atol),
        ("max_time", c.meanfield.max_time),
        ("oracle_tolerance", c.oracle_tolerance),
        ("floquet_tolerance", c.floquet_tolerance),
    ];
    for (name, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            return Err(format!("{name} must be positive and finite, got {v}"));
        }
    }
    if c.initial.iter().any(|v| !v.is_finite()) || c.initial.iter().map(|v| v * v).sum::<f64>() > 1.0 {
        return Err("initial Bloch vector must lie in the unit ball".into());
    }
    if c.threads == Some(0) {
        return Err("threads must be positive".into());
    }
    Ok(())
}

impl JobConfig {
    pub fn base_params(&self) -> LmgParams {
        LmgParams {
            coupling: self.coupling,
            field: self.field,
            collective_rate: self.collective_rate,
            local_rate: self.local_rate,
        }
    }

    /// Parameter sets along the sweep, or the base point alone.
    pub fn points(&self) -> Vec<LmgParams> {
        let base = self.base_params();
        match &self.sweep {
            None => vec![base],
            Some(s) => s
                .values()
                .into_iter()
                .map(|v| {
                    let mut p = base;
                    match s.param {
                        SweepParam::Coupling => p.coupling = v,
                        SweepParam::Field => p.field = v,
                        SweepParam::CollectiveRate => p.collective_rate = v,
                        SweepParam::LocalRate => p.local_rate = v,
                    }
                    p
                })
                .collect(),
        }
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or(match &self.out {
            Some(p) if p.extension().is_some_and(|e| e == "json") => Format::Json,
            _ => Format::Csv,
        })
    }

    /// Canonical JSON of everything that determines the results.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
