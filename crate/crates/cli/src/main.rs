//! `l0qubo` command-line tool.
//!
//! Exit status: 0 on success, 2 for invalid configuration or input
//! documents, 3 for I/O failures.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use l0qubo::harness::{
    run_experiment, write_csv, write_jsonl, CompiledInstance, ExperimentConfig, QuantizerConfig, SolverKind,
};
use l0qubo::qubo::{read_qubo, write_qubo, BuildParams, VariableRegistry};
use l0qubo::scenarios::{InstanceData, InstanceDocument};
use l0qubo::solvers::{solve_exhaustive, solve_sa, AnnealSchedule, DEFAULT_MAX_BITS};
use l0qubo::Error;

const SOLVE_SCHEMA_VERSION: u32 = 1;
const SIDECAR_SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "l0qubo", version, about = "Sparse recovery through QUBO-compiled l0 regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a success-rate sweep and write the CSV report.
    Experiment(CommonArgs),
    /// Solve one stored instance and print the result as JSON.
    Solve(CommonArgs),
    /// Write the QUBO of one instance plus a registry sidecar.
    ExportQubo(CommonArgs),
    /// Decode an externally produced assignment.
    Decode(DecodeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Exhaustive,
    Sa,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Exhaustive => SolverKind::Exhaustive,
            SolverArg::Sa => SolverKind::Sa,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// JSON configuration document.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    /// Output path; stdout when absent (export-qubo requires it).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct DecodeArgs {
    /// Registry sidecar written by export-qubo.
    #[arg(long)]
    config: PathBuf,
    /// Assignment: 0/1 values separated by whitespace or commas, or a JSON
    /// array of 0/1 or booleans.
    #[arg(long)]
    assignment: PathBuf,
    /// QUBO file to report the energy against.
    #[arg(long)]
    qubo: Option<PathBuf>,
    #[arg(long, default_value_t = 0.02)]
    threshold: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn default_svd_columns() -> usize {
    2
}

fn default_threshold() -> f64 {
    0.02
}

fn default_max_bits() -> usize {
    DEFAULT_MAX_BITS
}

/// Settings for `solve` and `export-qubo`. The instance is given inline or
/// as a path to an instance document, relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveConfig {
    schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    instance: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    instance_path: Option<PathBuf>,
    #[serde(default)]
    quantizer: QuantizerConfig,
    #[serde(default)]
    build: BuildParams<f64>,
    #[serde(default)]
    anneal: AnnealSchedule,
    #[serde(default)]
    solver: SolverKind,
    #[serde(default = "default_max_bits")]
    max_exhaustive_bits: usize,
    #[serde(default = "default_svd_columns")]
    svd_columns: usize,
    #[serde(default = "default_threshold")]
    threshold: f64,
}

impl SolveConfig {
    fn validate(&self) -> l0qubo::Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.schema_version != SOLVE_SCHEMA_VERSION {
            return bad(format!(
                "schema_version: unsupported version {}, expected {SOLVE_SCHEMA_VERSION}",
                self.schema_version
            ));
        }
        if self.instance.is_some() == self.instance_path.is_some() {
            return bad("exactly one of `instance` and `instance_path` is required".into());
        }
        self.quantizer.build().map_err(|e| Error::InvalidInput(format!("quantizer: {e}")))?;
        self.build.validate().map_err(|e| Error::InvalidInput(format!("build: {e}")))?;
        self.anneal.validate().map_err(|e| Error::InvalidInput(format!("anneal: {e}")))?;
        if self.svd_columns == 0 {
            return bad("svd_columns: must be at least 1".into());
        }
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            return bad("threshold: must be finite and non-negative".into());
        }
        Ok(())
    }

    fn load_instance(&self, config_path: &Path) -> l0qubo::Result<InstanceData<f64>> {
        match (&self.instance, &self.instance_path) {
            (Some(v), _) => {
                let doc: InstanceDocument<f64> = InstanceDocument::from_json(&v.to_string())
                    .map_err(|e| Error::InvalidInput(format!("instance: {e}")))?;
                Ok(doc.instance)
            }
            (None, Some(p)) => {
                let path = config_path.parent().map(|d| d.join(p)).unwrap_or_else(|| p.clone());
                let text = fs::read_to_string(&path)?;
                InstanceDocument::from_json(&text)
                    .map(|d| d.instance)
                    .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
            }
            (None, None) => Err(Error::InvalidInput("no instance given".into())),
        }
    }
}

/// Registry sidecar of an exported QUBO.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    schema_version: u32,
    gamma0: f64,
    registry: VariableRegistry<f64>,
}

enum Failure {
    Config(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => Failure::Io(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

/// Writes through a temporary file in the destination directory, then
/// renames it into place.
fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> l0qubo::Result<()>) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let io_err = |e: &dyn std::fmt::Display| Failure::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| io_err(&e))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        body(&mut w).map_err(|e| io_err(&e))?;
        w.flush().map_err(|e| io_err(&e))?;
    }
    tmp.as_file().sync_all().map_err(|e| io_err(&e))?;
    tmp.persist(path).map_err(|e| io_err(&e.error))?;
    Ok(())
}

fn emit(out: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> l0qubo::Result<()>) -> Result<(), Failure> {
    match out {
        Some(p) => write_atomic(p, body),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)?;
            Ok(())
        }
    }
}

fn print_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Failure> {
    emit(out, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

fn cmd_experiment(args: &CommonArgs) -> Result<(), Failure> {
    let text = read_text(&args.config)?;
    let mut cfg: ExperimentConfig = parse_json(&args.config, &text)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(s) = args.solver {
        cfg.solver = s.into();
    }
    if let Some(out) = &args.out {
        cfg.output.csv = Some(out.clone());
    }
    cfg.validate().map_err(|e| Failure::Config(format!("{}: {e}", args.config.display())))?;
    if args.print_config {
        return print_json(&cfg, None);
    }
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    let result = run_experiment(&cfg)?;
    let failures: usize = result.records.iter().map(|r| r.invariant_failures.len()).sum();
    if failures > 0 {
        eprintln!("warning: {failures} per-trial invariant checks failed; see the JSONL records");
    }
    emit(cfg.output.csv.as_deref(), |w| write_csv(&result.curve, w))?;
    if let Some(path) = &cfg.output.jsonl {
        write_atomic(path, |w| write_jsonl(&result.records, w))?;
    }
    Ok(())
}

fn load_solve(args: &CommonArgs) -> Result<SolveConfig, Failure> {
    let text = read_text(&args.config)?;
    let mut cfg: SolveConfig = parse_json(&args.config, &text)?;
    if let Some(seed) = args.seed {
        cfg.anneal.seed = seed;
    }
    if let Some(s) = args.solver {
        cfg.solver = s.into();
    }
    cfg.validate().map_err(|e| Failure::Config(format!("{}: {e}", args.config.display())))?;
    Ok(cfg)
}

fn compile(cfg: &SolveConfig, config_path: &Path) -> Result<CompiledInstance, Failure> {
    let data = cfg.load_instance(config_path)?;
    let q = cfg.quantizer.build()?;
    for w in cfg.build.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(CompiledInstance::compile(&data, &q, &cfg.build, cfg.svd_columns)?)
}

#[derive(Serialize)]
struct SolveOutput {
    solver: SolverKind,
    seed: Option<u64>,
    num_vars: usize,
    energy: f64,
    violations: usize,
    objective: f64,
    penalized_objective: f64,
    signal: Vec<num_complex::Complex<f64>>,
    support: Vec<usize>,
    decoded: l0qubo::DecodedSignal<f64>,
    read_energies: Vec<f64>,
}

fn cmd_solve(args: &CommonArgs) -> Result<(), Failure> {
    let cfg = load_solve(args)?;
    if args.print_config {
        return print_json(&cfg, None);
    }
    let compiled = compile(&cfg, &args.config)?;
    let sol = match cfg.solver {
        SolverKind::Exhaustive => solve_exhaustive(&compiled.model, cfg.max_exhaustive_bits)?,
        SolverKind::Sa => solve_sa(&compiled.model, &cfg.anneal)?,
    };
    let report = compiled.report(&sol.best, cfg.threshold)?;
    let out = SolveOutput {
        solver: cfg.solver,
        seed: (cfg.solver == SolverKind::Sa).then_some(cfg.anneal.seed),
        num_vars: compiled.model.num_vars(),
        energy: report.energy,
        violations: report.violations,
        objective: report.objective,
        penalized_objective: sol.best_energy,
        signal: report.signal,
        support: report.support,
        decoded: report.decoded,
        read_energies: sol.read_energies,
    };
    print_json(&out, args.out.as_deref())
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".registry.json");
    out.with_file_name(name)
}

fn cmd_export(args: &CommonArgs) -> Result<(), Failure> {
    let cfg = load_solve(args)?;
    if args.print_config {
        return print_json(&cfg, None);
    }
    let out = args.out.as_deref().ok_or_else(|| Failure::Config("export-qubo needs --out".into()))?;
    let compiled = compile(&cfg, &args.config)?;
    write_atomic(out, |w| write_qubo(&compiled.model, None, w))?;
    let sidecar =
        Sidecar { schema_version: SIDECAR_SCHEMA_VERSION, gamma0: compiled.gamma0, registry: compiled.registry };
    print_json(&sidecar, Some(&sidecar_path(out)))?;
    eprintln!("wrote {} variables to {}", compiled.model.num_vars(), out.display());
    Ok(())
}

fn parse_assignment(path: &Path, text: &str) -> Result<Vec<bool>, Failure> {
    let bad = |m: String| Failure::Config(format!("{}: {m}", path.display()));
    let trimmed = text.trim();
    if trimmed.starts_with('[') {
        let values: Vec<serde_json::Value> = serde_json::from_str(trimmed).map_err(|e| bad(e.to_string()))?;
        return values
            .iter()
            .enumerate()
            .map(|(i, v)| match v {
                serde_json::Value::Bool(b) => Ok(*b),
                serde_json::Value::Number(n) if n.as_u64() == Some(0) => Ok(false),
                serde_json::Value::Number(n) if n.as_u64() == Some(1) => Ok(true),
                other => Err(bad(format!("entry {i} is `{other}`, expected 0, 1 or a boolean"))),
            })
            .collect();
    }
    trimmed
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .enumerate()
        .map(|(i, t)| match t {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(bad(format!("entry {i} is `{other}`, expected 0 or 1"))),
        })
        .collect()
}

#[derive(Serialize)]
struct DecodeOutput {
    energy: Option<f64>,
    violations: usize,
    signal: Vec<num_complex::Complex<f64>>,
    support: Vec<usize>,
    decoded: l0qubo::DecodedSignal<f64>,
}

fn cmd_decode(args: &DecodeArgs) -> Result<(), Failure> {
    let text = read_text(&args.config)?;
    let sidecar: Sidecar = parse_json(&args.config, &text)?;
    if sidecar.schema_version != SIDECAR_SCHEMA_VERSION {
        return Err(Failure::Config(format!(
            "{}: unsupported sidecar schema_version {}",
            args.config.display(),
            sidecar.schema_version
        )));
    }
    if !(args.threshold.is_finite() && args.threshold >= 0.0) {
        return Err(Failure::Config("--threshold must be finite and non-negative".into()));
    }
    let bits = parse_assignment(&args.assignment, &read_text(&args.assignment)?)?;
    let reg = &sidecar.registry;
    let decoded = l0qubo::qubo::decode_solution(reg, &bits)?;
    let violations = l0qubo::qubo::constraint_violations(reg, &bits)?.len();
    let energy = match &args.qubo {
        Some(p) => {
            let text = read_text(p)?;
            let (model, _) = read_qubo::<f64, _>(text.as_bytes())?;
            Some(model.energy(&bits)?)
        }
        None => None,
    };
    let signal = decoded.complex_column(0);
    let out = DecodeOutput {
        energy,
        violations,
        support: l0qubo::model::complex_support(&signal, args.threshold)?,
        signal,
        decoded,
    };
    print_json(&out, args.out.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Experiment(a) => cmd_experiment(a),
        Command::Solve(a) => cmd_solve(a),
        Command::ExportQubo(a) => cmd_export(a),
        Command::Decode(a) => cmd_decode(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
