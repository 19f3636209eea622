//! Experiment driver behind the `haarspec` binary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use haarspec::freeconv::{bulk_density, BulkSpectrum};
use haarspec::montecarlo::{empirical_bulk, measurement_count, run_trials_with, write_trial_dump, TrialOptions};
use haarspec::theory::{find_delta_transition, predict, rho_opt};
use haarspec::{Error, Model, QuadratureSettings, Table, TrimmingFunction};

pub mod format;

use format::fmt_g;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    TheoryCurve,
    Simulate,
    BulkDensity,
    PhaseTransition,
    OptimalSweep,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::TheoryCurve => "theory-curve",
            Command::Simulate => "simulate",
            Command::BulkDensity => "bulk-density",
            Command::PhaseTransition => "phase-transition",
            Command::OptimalSweep => "optimal-sweep",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        <Command as ValueEnum>::from_str(s, false).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser, Default)]
#[command(name = "haarspec", version, about = "Spectral initialization under sub-sampled Haar sensing")]
pub struct Args {
    /// Command to run; may also come from the config file.
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// Flat `key = value` file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// mm, lal, opt, opt-eps, const or table
    #[arg(long)]
    pub trimmer: Option<String>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Level of the constant trimmer.
    #[arg(long)]
    pub level: Option<f64>,
    /// Two-column CSV `y,t` for the table trimmer.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, conflicts_with = "delta_grid")]
    pub delta: Option<f64>,
    /// `A:STEP:B` or a comma-separated list.
    #[arg(long)]
    pub delta_grid: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `A:STEP:B` or a comma-separated list.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// JSON-lines file receiving one record per Monte-Carlo trial.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    /// Worker threads for Monte-Carlo trials and density grids (1 = serial).
    /// Does not affect results and is not echoed.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    NoResult(String),
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::NoResult(_) => 2,
            CliError::Solver(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(s) | CliError::NoResult(s) | CliError::Solver(s) => s,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::NoTransition(..) | Error::NoMinimum(_) => CliError::NoResult(msg),
            Error::Solver(_) | Error::Integrand { .. } => CliError::Solver(msg),
            _ => CliError::Input(msg),
        }
    }
}

fn input<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Input(msg.into()))
}

/// Parses `A:STEP:B` (inclusive, tolerant to rounding) or `x1,x2,...`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let num = |s: &str| -> Result<f64, CliError> {
        s.trim().parse::<f64>().map_err(|_| CliError::Input(format!("bad number `{s}` in grid `{spec}`")))
    };
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return input(format!("grid `{spec}` must be A:STEP:B"));
        }
        let (a, h, b) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(h > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
            return input(format!("grid `{spec}` needs STEP > 0 and B >= A"));
        }
        let k = ((b - a) / h + 1e-9).floor() as usize;
        if k > 10_000_000 {
            return input(format!("grid `{spec}` is too large"));
        }
        Ok((0..=k).map(|i| a + i as f64 * h).collect())
    } else {
        let v: Vec<f64> = spec.split(',').filter(|s| !s.trim().is_empty()).map(num).collect::<Result<_, _>>()?;
        if v.is_empty() {
            return input(format!("grid `{spec}` is empty"));
        }
        Ok(v)
    }
}

/// Reads `key = value` lines; `#` starts a comment, blank lines are ignored.
/// A previous CSV or JSON output is also accepted: its echoed header lines
/// are read and everything else is skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    if let Some(lines) = echoed_header(text) {
        let mut map = BTreeMap::new();
        for l in lines {
            if let Some((k, v)) = l.split_once('=') {
                let k = k.trim().replace('_', "-");
                if KNOWN_KEYS.contains(&k.as_str()) {
                    map.insert(k, v.trim().to_string());
                }
            }
        }
        return Ok(map);
    }
    let mut map = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return input(format!("config line {}: expected `key = value`", k + 1));
        };
        map.insert(key.trim().replace('_', "-"), value.trim().to_string());
    }
    Ok(map)
}

/// Header lines of a rendered [`Output`], if `text` is one.
fn echoed_header(text: &str) -> Option<Vec<String>> {
    if text.trim_start().starts_with('{') {
        let v: serde_json::Value = serde_json::from_str(text).ok()?;
        let h = v.get("header")?.as_array()?;
        return h.iter().map(|x| x.as_str().map(String::from)).collect();
    }
    let first = text.lines().next()?;
    first.strip_prefix("# command =")?;
    Some(text.lines().map_while(|l| l.strip_prefix("# ")).map(String::from).collect())
}

/// Fully resolved experiment; [`Config::echo`] reproduces it.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub command: Command,
    pub trimmer: String,
    pub eps: Option<f64>,
    pub level: Option<f64>,
    pub table: Option<PathBuf>,
    pub delta: Option<f64>,
    pub delta_grid: Option<String>,
    pub n: Option<usize>,
    pub trials: usize,
    pub seed: u64,
    pub grid: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub dump: Option<PathBuf>,
}

const KNOWN_KEYS: [&str; 14] = [
    "command", "trimmer", "eps", "level", "table", "delta", "delta-grid", "n", "trials", "seed", "grid", "out",
    "format", "dump",
];

impl Config {
    pub fn resolve(args: &Args) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", p.display())))?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        if let Some(k) = file.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return input(format!("unknown config key `{k}`"));
        }
        fn parsed<T: std::str::FromStr>(file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, CliError> {
            match file.get(key) {
                None => Ok(None),
                Some(v) => v.parse::<T>().map(Some).map_err(|_| CliError::Input(format!("bad value `{v}` for `{key}`"))),
            }
        }
        let command = match (args.command, file.get("command")) {
            (Some(c), _) => c,
            (None, Some(s)) => Command::parse(s).ok_or_else(|| CliError::Input(format!("unknown command `{s}`")))?,
            (None, None) => return input("no command given"),
        };
        let format = match (args.format, file.get("format").map(String::as_str)) {
            (Some(f), _) => f,
            (None, Some("csv")) | (None, None) => Format::Csv,
            (None, Some("json")) => Format::Json,
            (None, Some(s)) => return input(format!("unknown format `{s}`")),
        };
        // a single delta on the command line overrides a grid from the file and vice versa
        let (delta, delta_grid) = if args.delta.is_some() || args.delta_grid.is_some() {
            (args.delta, args.delta_grid.clone())
        } else {
            (parsed(&file, "delta")?, file.get("delta-grid").cloned())
        };
        Ok(Config {
            command,
            trimmer: args.trimmer.clone().or_else(|| file.get("trimmer").cloned()).unwrap_or_else(|| "mm".into()),
            eps: args.eps.or(parsed(&file, "eps")?),
            level: args.level.or(parsed(&file, "level")?),
            table: args.table.clone().or_else(|| file.get("table").map(PathBuf::from)),
            delta,
            delta_grid,
            n: args.n.or(parsed(&file, "n")?),
            trials: args.trials.or(parsed(&file, "trials")?).unwrap_or(20),
            seed: args.seed.or(parsed(&file, "seed")?).unwrap_or(0),
            grid: args.grid.clone().or_else(|| file.get("grid").cloned()),
            out: args.out.clone().or_else(|| file.get("out").map(PathBuf::from)),
            format,
            dump: args.dump.clone().or_else(|| file.get("dump").map(PathBuf::from)),
        })
    }

    /// `key = value` lines accepted back by `--config`.
    pub fn echo(&self) -> Vec<String> {
        let mut v = vec![format!("command = {}", self.command.as_str()), format!("trimmer = {}", self.trimmer)];
        let mut opt = |k: &str, x: Option<String>| {
            if let Some(x) = x {
                v.push(format!("{k} = {x}"));
            }
        };
        opt("eps", self.eps.map(|x| x.to_string()));
        opt("level", self.level.map(|x| x.to_string()));
        opt("table", self.table.as_ref().map(|p| p.display().to_string()));
        opt("delta", self.delta.map(|x| x.to_string()));
        opt("delta-grid", self.delta_grid.clone());
        opt("n", self.n.map(|x| x.to_string()));
        opt("trials", Some(self.trials.to_string()));
        opt("seed", Some(self.seed.to_string()));
        opt("grid", self.grid.clone());
        opt("format", Some(match self.format {
            Format::Csv => "csv".into(),
            Format::Json => "json".into(),
        }));
        v
    }

    fn deltas(&self) -> Result<Vec<f64>, CliError> {
        match (&self.delta, &self.delta_grid) {
            (Some(d), _) => Ok(vec![*d]),
            (None, Some(g)) => parse_grid(g),
            (None, None) => input("--delta or --delta-grid is required"),
        }
    }

    fn single_delta(&self) -> Result<f64, CliError> {
        match self.delta {
            Some(d) => Ok(d),
            None => input("--delta is required"),
        }
    }

    /// Trimmer as used by the simulator at sampling ratio `delta`.
    pub fn trimmer_at(&self, delta: f64) -> Result<TrimmingFunction, CliError> {
        if self.trimmer == "table" {
            let Some(p) = &self.table else {
                return input("trimmer `table` needs --table PATH");
            };
            return Ok(TrimmingFunction::table("table", Table::load(p)?));
        }
        let param = match self.trimmer.as_str() {
            "opt-eps" => self.eps,
            "const" => self.level,
            _ => None,
        };
        Ok(TrimmingFunction::from_id(&self.trimmer, delta, param)?)
    }
}

/// Result of a command: header lines, column names and rows of cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub header: Vec<String>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => fmt_g(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Num(x) => fmt_g(*x)
                .parse::<f64>()
                .ok()
                .and_then(serde_json::Number::from_f64)
                .map_or(serde_json::Value::Null, serde_json::Value::Number),
            Cell::Int(i) => serde_json::Value::from(*i),
            Cell::Text(s) => serde_json::Value::from(s.clone()),
            Cell::Empty => serde_json::Value::Null,
        }
    }
}

impl Output {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut s = String::new();
                for h in &self.header {
                    let _ = writeln!(s, "# {h}");
                }
                let _ = writeln!(s, "{}", self.columns.join(","));
                for r in &self.rows {
                    let cells: Vec<String> = r.iter().map(Cell::csv).collect();
                    let _ = writeln!(s, "{}", cells.join(","));
                }
                s
            }
            Format::Json => {
                let rows: Vec<serde_json::Value> = self
                    .rows
                    .iter()
                    .map(|r| {
                        let obj: serde_json::Map<String, serde_json::Value> =
                            self.columns.iter().zip(r).map(|(c, v)| (c.to_string(), v.json())).collect();
                        serde_json::Value::Object(obj)
                    })
                    .collect();
                let v = serde_json::json!({ "header": self.header, "columns": self.columns, "rows": rows });
                let mut s = serde_json::to_string_pretty(&v).expect("json values are serializable");
                s.push('\n');
                s
            }
        }
    }

    /// Column `name` of every row as numbers (`NaN` for non-numeric cells).
    pub fn column(&self, name: &str) -> Vec<f64> {
        let Some(k) = self.columns.iter().position(|c| *c == name) else {
            return Vec::new();
        };
        self.rows
            .iter()
            .map(|r| match &r[k] {
                Cell::Num(x) => *x,
                Cell::Int(i) => *i as f64,
                _ => f64::NAN,
            })
            .collect()
    }
}

fn header_for(cfg: &Config) -> Vec<String> {
    cfg.echo()
}

fn theory_model(t: TrimmingFunction, delta: f64) -> haarspec::Result<Model> {
    Model::for_theory(t, delta, QuadratureSettings::default())
}

pub fn cmd_theory_curve(cfg: &Config) -> Result<Output, CliError> {
    let deltas = cfg.deltas()?;
    if let Some(d) = deltas.iter().find(|d| !(**d > 1.0)) {
        return input(format!("delta grid must lie in (1, inf), got {d}"));
    }
    let mut rows = Vec::new();
    let mut failures = 0;
    for &delta in &deltas {
        let pred = cfg.trimmer_at(delta).and_then(|t| theory_model(t, delta).and_then(|m| predict(&m)).map_err(CliError::from));
        match pred {
            Ok(p) => rows.push(vec![
                Cell::Num(delta),
                Cell::Num(p.tau_r),
                p.theta_star.map_or(Cell::Empty, Cell::Num),
                Cell::Num(p.lambda1_limit),
                Cell::Num(p.rho2_limit),
                Cell::Text(p.regime.as_str().into()),
                Cell::Num(p.lambda1_original()),
            ]),
            Err(CliError::Input(msg)) => return input(msg),
            Err(e) => {
                failures += 1;
                let reason = e.message().replace(',', ";");
                rows.push(vec![
                    Cell::Num(delta),
                    Cell::Num(f64::NAN),
                    Cell::Empty,
                    Cell::Num(f64::NAN),
                    Cell::Num(f64::NAN),
                    Cell::Text(format!("failed: {reason}")),
                    Cell::Num(f64::NAN),
                ]);
            }
        }
    }
    if failures == deltas.len() {
        return Err(CliError::Solver("theory failed for every delta".into()));
    }
    Ok(Output {
        header: header_for(cfg),
        columns: vec!["delta", "tau_r", "theta_star", "lambda1_limit", "rho2_limit", "regime", "lambda1_original"],
        rows,
    })
}

pub fn cmd_simulate(cfg: &Config, parallel: bool) -> Result<Output, CliError> {
    let deltas = cfg.deltas()?;
    let n = cfg.n.unwrap_or(1000);
    let mut rows = Vec::new();
    let mut all = Vec::new();
    for &delta in &deltas {
        let t = cfg.trimmer_at(delta)?;
        let m = Model::with_defaults(t.clone(), delta)?;
        let opts = TrialOptions { parallel, random_signal: false };
        let s = run_trials_with(&m, n, cfg.trials, cfg.seed, &opts)?;
        let (rho2, lam) = match theory_model(t, delta).and_then(|tm| predict(&tm)) {
            Ok(p) => (p.rho2_limit, p.lambda1_original()),
            Err(_) => (f64::NAN, f64::NAN),
        };
        rows.push(vec![
            Cell::Num(delta),
            Cell::Int(n as u64),
            Cell::Int(cfg.trials as u64),
            Cell::Num(s.overlap_mean),
            Cell::Num(s.overlap_std),
            Cell::Num(s.lambda1_mean),
            Cell::Num(s.lambda1_std),
            Cell::Num(rho2),
            Cell::Num(lam),
            Cell::Int(s.m as u64),
            Cell::Num(s.a_m_mean),
        ]);
        all.push(s);
    }
    if let Some(p) = &cfg.dump {
        let mut merged = all[0].clone();
        merged.results = all.iter().flat_map(|s| s.results.clone()).collect();
        write_trial_dump(&merged, p)?;
    }
    Ok(Output {
        header: header_for(cfg),
        columns: vec![
            "delta", "n", "trials", "overlap_mean", "overlap_std", "lambda1_mean", "lambda1_std", "rho2_theory",
            "lambda1_theory", "m", "a_m_mean",
        ],
        rows,
    })
}

/// Histogram of the nonzero eigenvalues with bins centred on the grid points
/// (edges at midpoints), normalized by `m` and the bin width so that it
/// estimates the continuous density.
pub fn histogram_on_grid(eigs: &[f64], m: usize, grid: &[f64]) -> Vec<f64> {
    let k = grid.len();
    if k == 0 {
        return Vec::new();
    }
    let half = |i: usize, j: usize| 0.5 * (grid[i] + grid[j]);
    let edges: Vec<f64> = (0..=k)
        .map(|i| {
            if k == 1 {
                return if i == 0 { grid[0] - 0.5 } else { grid[0] + 0.5 };
            }
            match i {
                0 => grid[0] - 0.5 * (grid[1] - grid[0]),
                i if i == k => grid[k - 1] + 0.5 * (grid[k - 1] - grid[k - 2]),
                i => half(i - 1, i),
            }
        })
        .collect();
    let mut counts = vec![0usize; k];
    for &e in eigs.iter().filter(|&&e| e > 1e-10) {
        if e < edges[0] || e >= edges[k] {
            continue;
        }
        let j = edges.partition_point(|&x| x <= e) - 1;
        counts[j.min(k - 1)] += 1;
    }
    counts.iter().enumerate().map(|(i, &c)| c as f64 / (m as f64 * (edges[i + 1] - edges[i]))).collect()
}

pub fn cmd_bulk_density(cfg: &Config) -> Result<Output, CliError> {
    let delta = cfg.single_delta()?;
    let Some(g) = &cfg.grid else {
        return input("--grid is required");
    };
    let grid = parse_grid(g)?;
    let model = theory_model(cfg.trimmer_at(delta)?, delta)?;
    let b: BulkSpectrum = bulk_density(&model, &grid)?;
    let mut header = header_for(cfg);
    header.push(format!("lambda_l = {}", fmt_g(b.lambda_l)));
    header.push(format!("lambda_r = {}", fmt_g(b.lambda_r)));
    header.push(format!("tau_l = {}", fmt_g(b.tau_l)));
    header.push(format!("tau_r = {}", fmt_g(b.tau_r)));
    header.push(format!("zero_atom = {}", fmt_g(1.0 - 1.0 / delta)));
    let empirical = match cfg.n {
        Some(n) => {
            let m = measurement_count(delta, n);
            let eig = empirical_bulk(m, &model, cfg.seed)?;
            header.push(format!("empirical_m = {m}"));
            header.push("empirical_bins = centred on grid points, edges at midpoints, count/(m*width)".into());
            Some(histogram_on_grid(&eig, m, &grid))
        }
        None => None,
    };
    let mut columns = vec!["x", "rho", "converged"];
    if empirical.is_some() {
        columns.push("empirical_density");
    }
    let rows = (0..grid.len())
        .map(|i| {
            let mut r = vec![Cell::Num(b.grid[i]), Cell::Num(b.density[i]), Cell::Int(b.converged[i] as u64)];
            if let Some(e) = &empirical {
                r.push(Cell::Num(e[i]));
            }
            r
        })
        .collect();
    Ok(Output { header, columns, rows })
}

pub fn cmd_phase_transition(cfg: &Config) -> Result<Output, CliError> {
    let range = match &cfg.delta_grid {
        Some(g) => {
            let v = parse_grid(g)?;
            (v[0], v[v.len() - 1])
        }
        None => (1.1, 10.0),
    };
    let family = |d: f64| cfg.trimmer_at(d).map_err(|e| Error::Domain(e.message().to_string()));
    let t = find_delta_transition(family, range, QuadratureSettings::default())?;
    let mut header = header_for(cfg);
    header.push(format!("range = {}:{}", fmt_g(range.0), fmt_g(range.1)));
    Ok(Output {
        header,
        columns: vec!["delta_t", "bracket_lo", "bracket_hi", "iterations"],
        rows: vec![vec![
            Cell::Num(t.delta_t),
            Cell::Num(t.bracket.0),
            Cell::Num(t.bracket.1),
            Cell::Int(t.iterations as u64),
        ]],
    })
}

pub fn cmd_optimal_sweep(cfg: &Config) -> Result<Output, CliError> {
    let Some(g) = &cfg.grid else {
        return input("--grid (epsilon values) is required");
    };
    let eps = parse_grid(g)?;
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return input(format!("epsilon grid must lie in (0, 1), got {e}"));
    }
    let deltas = cfg.deltas()?;
    let mut rows = Vec::new();
    let mut header = header_for(cfg);
    for &delta in &deltas {
        let opt = rho_opt(delta)?;
        let mut gaps = Vec::new();
        for &e in &eps {
            let m = theory_model(TrimmingFunction::opt_eps(delta, e)?, delta)?;
            let r = predict(&m)?.rho2_limit;
            gaps.push(opt - r);
            rows.push(vec![Cell::Num(e), Cell::Num(delta), Cell::Num(r), Cell::Num(opt), Cell::Num(opt - r)]);
        }
        let monotone = gaps.windows(2).all(|w| w[1] <= w[0] + 1e-9);
        header.push(format!("gap_monotone(delta={}) = {monotone}", fmt_g(delta)));
    }
    Ok(Output { header, columns: vec!["epsilon", "delta", "rho2_eps", "rho2_opt", "gap"], rows })
}

/// Runs the configured command; returns the rendered output.
pub fn execute(cfg: &Config, threads: Option<usize>) -> Result<String, CliError> {
    let parallel = threads != Some(1);
    let out = match cfg.command {
        Command::TheoryCurve => cmd_theory_curve(cfg)?,
        Command::Simulate => cmd_simulate(cfg, parallel)?,
        Command::BulkDensity => cmd_bulk_density(cfg)?,
        Command::PhaseTransition => cmd_phase_transition(cfg)?,
        Command::OptimalSweep => cmd_optimal_sweep(cfg)?,
    };
    Ok(out.render(cfg.format))
}

fn run_inner(args: &Args) -> Result<(), CliError> {
    let cfg = Config::resolve(args)?;
    let text = match args.threads {
        Some(k) if k >= 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| CliError::Input(format!("cannot start {k} threads: {e}")))?;
            pool.install(|| execute(&cfg, Some(k)))?
        }
        Some(_) => return input("--threads must be at least 1"),
        None => execute(&cfg, None)?,
    };
    match &cfg.out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run_inner(&args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("haarspec: {}", e.message());
            e.exit_code()
        }
    }
}
