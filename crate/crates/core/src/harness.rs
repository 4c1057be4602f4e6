//! Trial orchestration: instance generation, every reconstruction method,
//! support scoring, loss monitors and success-curve aggregation.
//!
//! The harness runs in `f64`. Trials are independent and run on the rayon
//! pool; records are collected in `(k, trial)` order so every aggregate is
//! a deterministic fold.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{l1_svd_pipeline, lasso_cd, omp, BaselineConfig};
use crate::error::{dimension, invalid, Result};
use crate::model::{
    complex_support, realify_for_complex_signal, realify_for_real_signal, stack_complex, support, ComplexMatrix,
    Quantizer, RealMatrix, SparseSignal,
};
use crate::qubo::{
    build_group_l0_qubo, build_l0_qubo, constraint_violations, decode_solution, evaluate_group_l0_objective,
    evaluate_l0_objective, evaluate_l0_objective_real, BuildParams, DecodedSignal, GroupLayout, Layout, QuboModel,
    VariableRegistry,
};
use crate::scenarios::{
    gen_multishot, gen_single_instance, gen_sparse_signal, steering_matrix_arcsin, steering_matrix_uniform,
    svd_preprocess, DoaGrid, GenConfig, GridKind, InstanceData, ValueDistribution,
};
use crate::solvers::{derive_seed, solve_exhaustive, solve_sa, AnnealSchedule, SolveResult, DEFAULT_MAX_BITS};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: &str =
    "sweep_k,method,success_rate,trials,failures,L_z_mean,L_q_mean,L_s_mean,Lp_s_mean,mean_wall_ms";

const SOLVER_STREAM: u64 = 0x5EED_0F50_17E5;

/// Identity tolerance for the δ decomposition and for `Lp(s) = L(s)`.
pub const IDENTITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Single,
    Multishot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Exhaustive,
    #[default]
    Sa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// QUBO-compiled l0 on a single observation.
    Qubo,
    Omp,
    Lasso,
    /// Group-l0 QUBO on the leading singular vectors.
    L0Svd,
    /// Group LASSO on the leading singular vectors.
    L1Svd,
    /// LASSO on the entry-wise mean of the shots.
    LassoAvg,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Qubo => "qubo",
            Method::Omp => "omp",
            Method::Lasso => "lasso",
            Method::L0Svd => "l0_svd",
            Method::L1Svd => "l1_svd",
            Method::LassoAvg => "lasso_avg",
        }
    }

    pub fn defaults(scenario: ScenarioKind) -> Vec<Method> {
        match scenario {
            ScenarioKind::Single => vec![Method::Qubo, Method::Omp, Method::Lasso],
            ScenarioKind::Multishot => vec![Method::L0Svd, Method::L1Svd, Method::LassoAvg],
        }
    }

    pub fn applies_to(self, scenario: ScenarioKind) -> bool {
        Method::defaults(scenario).contains(&self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemConfig {
    /// Azimuth grid size (signal length).
    pub m: usize,
    /// Sensors.
    pub n: usize,
    pub grid: GridKind,
    /// Element spacing over wavelength.
    pub spacing: f64,
    pub values: ValueDistribution,
    pub sigma: f64,
    pub shots: usize,
    pub rho: f64,
    /// Leading singular vectors kept in the multishot scenario.
    pub svd_columns: usize,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            m: 32,
            n: 8,
            grid: GridKind::Arcsin,
            spacing: 0.5,
            values: ValueDistribution::Uniform,
            sigma: 0.0,
            shots: 16,
            rho: 0.1,
            svd_columns: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantizerConfig {
    pub bits: usize,
    /// Leading weight −1/2 instead of 1/2.
    pub signed: bool,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        Self { bits: 4, signed: false }
    }
}

impl QuantizerConfig {
    pub fn build(&self) -> Result<Quantizer<f64>> {
        if self.signed {
            Quantizer::signed(self.bits)
        } else {
            Quantizer::unsigned(self.bits)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Nonzero counts, in output order.
    pub k: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn default_trials() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub jsonl: Option<PathBuf>,
}

fn default_threshold() -> f64 {
    0.02
}

fn default_max_bits() -> usize {
    DEFAULT_MAX_BITS
}

/// Full description of an experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub scenario: ScenarioKind,
    pub sweep: SweepConfig,
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub quantizer: QuantizerConfig,
    #[serde(default)]
    pub build: BuildParams<f64>,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default)]
    pub anneal: AnnealSchedule,
    #[serde(default)]
    pub solver: SolverKind,
    #[serde(default = "default_max_bits")]
    pub max_exhaustive_bits: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub seed: u64,
    /// Methods to run; unset means every method of the scenario.
    #[serde(default)]
    pub methods: Option<Vec<Method>>,
    /// Measure per-method wall time; off by default so reports are
    /// reproducible byte for byte.
    #[serde(default)]
    pub report_wall_time: bool,
    #[serde(default)]
    pub output: OutputConfig,
}

fn field_err(field: &str, msg: impl std::fmt::Display) -> crate::Error {
    invalid(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    /// Config with every optional section at its default.
    pub fn new(scenario: ScenarioKind, k: Vec<usize>, trials: usize) -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            scenario,
            sweep: SweepConfig { k, trials },
            problem: ProblemConfig::default(),
            quantizer: QuantizerConfig::default(),
            build: BuildParams::default(),
            baseline: BaselineConfig::default(),
            anneal: AnnealSchedule::default(),
            solver: SolverKind::default(),
            max_exhaustive_bits: DEFAULT_MAX_BITS,
            threshold: default_threshold(),
            seed: 0,
            methods: None,
            report_wall_time: false,
            output: OutputConfig::default(),
        }
    }

    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(field_err(
                "schema_version",
                format!("unsupported version {}, expected {CONFIG_SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.sweep.k.is_empty() {
            return Err(field_err("sweep.k", "needs at least one nonzero count"));
        }
        if self.sweep.trials == 0 {
            return Err(field_err("sweep.trials", "must be at least 1"));
        }
        let p = &self.problem;
        if p.m == 0 || p.n == 0 {
            return Err(field_err("problem", "m and n must be positive"));
        }
        if let Some(&k) = self.sweep.k.iter().find(|&&k| k > p.m) {
            return Err(field_err("sweep.k", format!("{k} exceeds problem.m = {}", p.m)));
        }
        if !(p.spacing.is_finite() && p.spacing > 0.0) {
            return Err(field_err("problem.spacing", "must be positive"));
        }
        if !(p.sigma.is_finite() && p.sigma >= 0.0) {
            return Err(field_err("problem.sigma", "must be finite and non-negative"));
        }
        if !(p.rho.is_finite() && p.rho >= 0.0) {
            return Err(field_err("problem.rho", "must be finite and non-negative"));
        }
        if p.shots == 0 {
            return Err(field_err("problem.shots", "must be at least 1"));
        }
        if self.scenario == ScenarioKind::Multishot && (p.svd_columns == 0 || p.svd_columns > p.n.min(p.shots)) {
            return Err(field_err("problem.svd_columns", format!("must be in 1..={}", p.n.min(p.shots))));
        }
        if let ValueDistribution::GridExact { bits } = p.values {
            if bits == 0 || bits > Quantizer::<f64>::MAX_BITS {
                return Err(field_err("problem.values.bits", format!("must be in 1..={}", Quantizer::<f64>::MAX_BITS)));
            }
        }
        self.quantizer().map_err(|e| field_err("quantizer", e))?;
        self.build.validate().map_err(|e| field_err("build", e))?;
        self.baseline.validate().map_err(|e| field_err("baseline", e))?;
        self.anneal.validate().map_err(|e| field_err("anneal", e))?;
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            return Err(field_err("threshold", "must be finite and non-negative"));
        }
        if let Some(methods) = &self.methods {
            if methods.is_empty() {
                return Err(field_err("methods", "needs at least one method"));
            }
            for (i, m) in methods.iter().enumerate() {
                if !m.applies_to(self.scenario) {
                    return Err(field_err("methods", format!("`{}` does not apply to this scenario", m.name())));
                }
                if methods[..i].contains(m) {
                    return Err(field_err("methods", format!("`{}` listed twice", m.name())));
                }
            }
        }
        Ok(())
    }

    pub fn methods(&self) -> Vec<Method> {
        self.methods.clone().unwrap_or_else(|| Method::defaults(self.scenario))
    }

    pub fn quantizer(&self) -> Result<Quantizer<f64>> {
        self.quantizer.build()
    }

    pub fn grid(&self) -> DoaGrid {
        DoaGrid { sensors: self.problem.n, grid_size: self.problem.m, spacing: self.problem.spacing, kind: self.problem.grid }
    }

    /// Observation operator for the configured grid.
    pub fn operator(&self) -> Result<ComplexMatrix<f64>> {
        let g = self.grid();
        if g.kind == GridKind::Arcsin && g.spacing == 0.5 {
            steering_matrix_arcsin(g.sensors, g.grid_size)
        } else {
            steering_matrix_uniform(&g)
        }
    }

    /// Human-readable notes about questionable but legal settings.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = self.grid().warnings();
        w.extend(self.build.warnings());
        w
    }
}

/// `(instance seed, solver seed)` of one trial, a stable function of the
/// master seed, the sweep value and the trial index only.
pub fn trial_seeds(master: u64, k: usize, trial: usize) -> (u64, u64) {
    let instance = derive_seed(derive_seed(master, k as u64), trial as u64);
    (instance, derive_seed(instance, SOLVER_STREAM))
}

/// 1 iff the above-threshold support of `recon` equals the exact support of
/// the truth.
pub fn success_score(truth: &SparseSignal<f64>, recon: &[f64], threshold: f64) -> Result<u8> {
    if recon.len() != truth.len() {
        return Err(dimension(format!("reconstruction has {} entries, truth has {}", recon.len(), truth.len())));
    }
    Ok(u8::from(support(recon, threshold)? == truth.support()))
}

/// Complex variant: an entry counts when either part exceeds the threshold.
pub fn complex_success_score(truth: &SparseSignal<f64>, recon: &[Complex<f64>], threshold: f64) -> Result<u8> {
    if recon.len() != truth.len() {
        return Err(dimension(format!("reconstruction has {} entries, truth has {}", recon.len(), truth.len())));
    }
    Ok(u8::from(complex_support(recon, threshold)? == truth.support()))
}

/// Split of `δ = L₀(s) − L₀(z)` for `x = Az + n`, `e = s − z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaDiagnostic {
    pub delta_direct: f64,
    /// `(1/2γ₀)‖Ae‖²`
    pub fidelity_term: f64,
    /// `‖e + z‖₀ − ‖z‖₀`
    pub l0_term: f64,
    /// `−(1/γ₀) Re⟨Ae, n⟩`
    pub noise_term: f64,
}

impl DeltaDiagnostic {
    pub fn decomposition_error(&self) -> f64 {
        self.delta_direct - (self.fidelity_term + self.l0_term + self.noise_term)
    }
}

pub fn delta_diagnostic(
    a: &ComplexMatrix<f64>,
    z: &[f64],
    s: &[f64],
    noise: &[Complex<f64>],
    gamma0: f64,
) -> Result<DeltaDiagnostic> {
    if z.len() != a.cols() || s.len() != a.cols() || noise.len() != a.rows() {
        return Err(dimension("delta diagnostic needs signals of operator width and noise of operator height"));
    }
    let az = a.mul_real_vec(z)?;
    let x: Vec<Complex<f64>> = az.iter().zip(noise).map(|(p, q)| p + q).collect();
    let lift = |v: &[f64]| v.iter().map(|&r| Complex::new(r, 0.0)).collect::<Vec<_>>();
    let direct = evaluate_l0_objective(a, &x, &lift(s), gamma0)? - evaluate_l0_objective(a, &x, &lift(z), gamma0)?;

    let e: Vec<f64> = s.iter().zip(z).map(|(p, q)| p - q).collect();
    let ae = a.mul_real_vec(&e)?;
    let fidelity = ae.iter().map(|c| c.norm_sqr()).sum::<f64>() / (2.0 * gamma0);
    let nnz = |v: &[f64]| v.iter().filter(|&&t| t != 0.0).count() as f64;
    let coupling: f64 = ae.iter().zip(noise).map(|(p, q)| p.re * q.re + p.im * q.im).sum();
    Ok(DeltaDiagnostic {
        delta_direct: direct,
        fidelity_term: fidelity,
        l0_term: nnz(s) - nnz(z),
        noise_term: -coupling / gamma0,
    })
}

/// Objective values at the truth `z`, its quantization `q`, the
/// reconstruction `s`, and the penalized QUBO energy at the solver's bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossMonitors {
    pub l_z: f64,
    pub l_q: f64,
    pub l_s: f64,
    pub lp_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub success: u8,
    /// Evaluated reconstruction as `[re, im]` pairs.
    pub reconstruction: Vec<Complex<f64>>,
    pub support: Vec<usize>,
    pub losses: Option<LossMonitors>,
    /// QUBO methods: number of violated chain identities.
    pub violations: Option<usize>,
    pub energy: Option<f64>,
    pub wall_ms: Option<f64>,
    pub error: Option<String>,
}

impl MethodOutcome {
    fn failed(method: Method, err: impl std::fmt::Display) -> Self {
        Self {
            method,
            success: 0,
            reconstruction: Vec::new(),
            support: Vec::new(),
            losses: None,
            violations: None,
            energy: None,
            wall_ms: None,
            error: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub sweep_k: usize,
    pub trial: usize,
    pub instance_seed: u64,
    pub solver_seed: u64,
    pub truth_support: Vec<usize>,
    pub methods: Vec<MethodOutcome>,
    /// Single scenario, QUBO method only.
    pub delta: Option<DeltaDiagnostic>,
    /// Multishot scenario: every shot kept the support of the original.
    pub shot_supports_match: Option<bool>,
    /// Per-trial consistency checks that did not hold.
    pub invariant_failures: Vec<String>,
}

impl TrialRecord {
    pub fn outcome(&self, method: Method) -> Option<&MethodOutcome> {
        self.methods.iter().find(|o| o.method == method)
    }
}

/// Shared per-experiment state: operator, its lifts and the quantizer.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub operator: ComplexMatrix<f64>,
    pub quantizer: Quantizer<f64>,
    lifted_complex: RealMatrix<f64>,
}

fn to_complex(v: &[f64]) -> Vec<Complex<f64>> {
    v.iter().map(|&r| Complex::new(r, 0.0)).collect()
}

fn timed<R>(report: bool, f: impl FnOnce() -> R) -> (R, Option<f64>) {
    if report {
        let t = Instant::now();
        let r = f();
        (r, Some(t.elapsed().as_secs_f64() * 1e3))
    } else {
        (f(), None)
    }
}

fn fidelity(a: &RealMatrix<f64>, x: &[f64], z: &[f64], gamma0: f64) -> Result<f64> {
    let az = a.mul_vec(z)?;
    Ok(x.iter().zip(&az).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / (2.0 * gamma0))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|e| e * e).sum::<f64>().sqrt()
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let operator = config.operator()?;
        let quantizer = config.quantizer()?;
        let lifted_complex = realify_for_complex_signal(&operator);
        Ok(Self { config, operator, quantizer, lifted_complex })
    }

    fn solve(&self, model: &QuboModel<f64>, seed: u64) -> Result<SolveResult<f64>> {
        match self.config.solver {
            SolverKind::Exhaustive => solve_exhaustive(model, self.config.max_exhaustive_bits),
            SolverKind::Sa => solve_sa(model, &AnnealSchedule { seed, ..self.config.anneal }),
        }
    }

    fn gen_config(&self, k: usize, seed: u64) -> GenConfig {
        let p = &self.config.problem;
        GenConfig { m: p.m, n: p.n, k, values: p.values, sigma: p.sigma, shots: p.shots, rho: p.rho, seed }
    }

    fn empty_record(&self, k: usize, trial: usize) -> TrialRecord {
        let (instance_seed, solver_seed) = trial_seeds(self.config.seed, k, trial);
        TrialRecord {
            sweep_k: k,
            trial,
            instance_seed,
            solver_seed,
            truth_support: Vec::new(),
            methods: Vec::new(),
            delta: None,
            shot_supports_match: None,
            invariant_failures: Vec::new(),
        }
    }

    fn fail_all(&self, mut rec: TrialRecord, err: crate::Error) -> TrialRecord {
        rec.methods = self.config.methods().into_iter().map(|m| MethodOutcome::failed(m, &err)).collect();
        rec
    }

    pub fn run_trial(&self, k: usize, trial: usize) -> TrialRecord {
        match self.config.scenario {
            ScenarioKind::Single => self.run_single_trial(k, trial),
            ScenarioKind::Multishot => self.run_multishot_trial(k, trial),
        }
    }

    /// One observation: QUBO l0, OMP and LASSO on the same lifted data.
    pub fn run_single_trial(&self, k: usize, trial: usize) -> TrialRecord {
        let mut rec = self.empty_record(k, trial);
        let mut rng = ChaCha8Rng::seed_from_u64(rec.instance_seed);
        let generated = gen_sparse_signal::<f64, _>(&self.gen_config(k, rec.instance_seed), &mut rng)
            .and_then(|z| gen_single_instance(&self.operator, &z, self.config.problem.sigma, &mut rng));
        let inst = match generated {
            Ok(i) => i,
            Err(e) => return self.fail_all(rec, e),
        };
        let z = inst.truth().values().to_vec();
        rec.truth_support = inst.truth().support();
        let (ar, xr) = match realify_for_real_signal(&self.operator, inst.observation()) {
            Ok(p) => p,
            Err(e) => return self.fail_all(rec, e),
        };
        let gamma0 = self.config.build.gamma0;
        let q: Vec<f64> = z.iter().map(|&v| self.quantizer.round(v)).collect();
        let base = (|| -> Result<(f64, f64)> {
            let l_z = evaluate_l0_objective_real(&ar, &xr, &z, gamma0)?;
            let l_q = evaluate_l0_objective_real(&ar, &xr, &q, gamma0)?;
            // quantization moves the fidelity by at most the bound below
            let r: Vec<f64> = q.iter().zip(&z).map(|(a, b)| a - b).collect();
            let ar_r = norm(&ar.mul_vec(&r)?);
            let res_z = (2.0 * gamma0 * fidelity(&ar, &xr, &z, gamma0)?).sqrt();
            let bound = (ar_r * ar_r + 2.0 * ar_r * res_z) / (2.0 * gamma0);
            let change = (fidelity(&ar, &xr, &q, gamma0)? - fidelity(&ar, &xr, &z, gamma0)?).abs();
            if change > bound * (1.0 + 1e-12) + 1e-12 {
                return Err(invalid(format!("quantization fidelity change {change} exceeds bound {bound}")));
            }
            Ok((l_z, l_q))
        })();
        let (l_z, l_q) = match base {
            Ok(v) => v,
            Err(e) => {
                rec.invariant_failures.push(e.to_string());
                (f64::NAN, f64::NAN)
            }
        };
        let report = self.config.report_wall_time;
        let threshold = self.config.threshold;

        for method in self.config.methods() {
            let (outcome, wall) = timed(report, || -> Result<MethodOutcome> {
                let (s, lp, violations) = match method {
                    Method::Qubo => {
                        let (model, reg) = build_l0_qubo(&ar, &xr, &self.quantizer, &self.config.build)?;
                        let sol = self.solve(&model, rec.solver_seed)?;
                        let s = decode_solution(&reg, &sol.best)?.column(0);
                        let v = constraint_violations(&reg, &sol.best)?.len();
                        (s, Some(sol.best_energy), Some(v))
                    }
                    Method::Omp => (omp(&ar, &xr, &self.config.baseline)?.signal.into_values(), None, None),
                    Method::Lasso => (lasso_cd(&ar, &xr, &self.config.baseline)?.signal.into_values(), None, None),
                    other => return Err(invalid(format!("{} needs the multishot scenario", other.name()))),
                };
                let l_s = evaluate_l0_objective_real(&ar, &xr, &s, gamma0)?;
                Ok(MethodOutcome {
                    method,
                    success: success_score(inst.truth(), &s, threshold)?,
                    support: support(&s, threshold)?,
                    reconstruction: to_complex(&s),
                    losses: Some(LossMonitors { l_z, l_q, l_s, lp_s: lp }),
                    violations,
                    energy: lp,
                    wall_ms: None,
                    error: None,
                })
            });
            let mut outcome = outcome.unwrap_or_else(|e| MethodOutcome::failed(method, e));
            outcome.wall_ms = wall;
            if method == Method::Qubo && outcome.error.is_none() {
                let s: Vec<f64> = outcome.reconstruction.iter().map(|c| c.re).collect();
                self.check_qubo_outcome(&mut rec, &outcome);
                match delta_diagnostic(&self.operator, &z, &s, inst.noise(), gamma0) {
                    Ok(d) => {
                        if d.decomposition_error().abs() > IDENTITY_TOL {
                            rec.invariant_failures.push(format!(
                                "delta decomposition off by {:e}",
                                d.decomposition_error()
                            ));
                        }
                        rec.delta = Some(d);
                    }
                    Err(e) => rec.invariant_failures.push(format!("delta diagnostic: {e}")),
                }
            }
            rec.methods.push(outcome);
        }
        rec
    }

    fn check_qubo_outcome(&self, rec: &mut TrialRecord, o: &MethodOutcome) {
        let (Some(losses), Some(v)) = (o.losses, o.violations) else { return };
        let Some(lp) = losses.lp_s else { return };
        if lp < losses.l_s - IDENTITY_TOL {
            rec.invariant_failures.push(format!("{}: Lp(s) = {lp} below L(s) = {}", o.method.name(), losses.l_s));
        }
        if v == 0 && (lp - losses.l_s).abs() >= IDENTITY_TOL {
            rec.invariant_failures.push(format!(
                "{}: constraints hold but Lp(s) − L(s) = {:e}",
                o.method.name(),
                lp - losses.l_s
            ));
        }
    }

    /// Several shots: group-l0 QUBO and group LASSO on the leading singular
    /// vectors, LASSO on the averaged observation.
    pub fn run_multishot_trial(&self, k: usize, trial: usize) -> TrialRecord {
        let mut rec = self.empty_record(k, trial);
        let p = &self.config.problem;
        let mut rng = ChaCha8Rng::seed_from_u64(rec.instance_seed);
        let generated = gen_sparse_signal::<f64, _>(&self.gen_config(k, rec.instance_seed), &mut rng)
            .and_then(|zeta| gen_multishot(&self.operator, &zeta, p.shots, p.rho, p.sigma, &mut rng));
        let inst = match generated {
            Ok(i) => i,
            Err(e) => return self.fail_all(rec, e),
        };
        let truth = inst.truth();
        rec.truth_support = truth.support();
        rec.shot_supports_match = Some(inst.signals().iter().all(|s| s.support() == rec.truth_support));
        let basis = match svd_preprocess(inst.shots(), p.svd_columns) {
            Ok(b) => b,
            Err(e) => return self.fail_all(rec, e),
        };
        let x_cols: Vec<Vec<f64>> = basis.signal_columns().iter().map(|u| stack_complex(u)).collect();
        let l = x_cols.len();
        let gamma0 = self.config.build.gamma0;
        let m = p.m;

        // truth expressed in the singular basis: u_l = X v_l / σ_l
        let mapped: Vec<Vec<Complex<f64>>> = (0..l)
            .map(|c| {
                let sigma = basis.singular_values[c];
                (0..m)
                    .map(|i| {
                        if sigma == 0.0 {
                            return Complex::new(0.0, 0.0);
                        }
                        let acc: Complex<f64> =
                            inst.signals().iter().zip(&basis.right[c]).map(|(zs, v)| v * zs.values()[i]).sum();
                        acc / sigma
                    })
                    .collect()
            })
            .collect();
        let to_decoded = |cols: &[Vec<Complex<f64>>]| -> DecodedSignal<f64> {
            let mut values = Vec::with_capacity(m * 2 * l);
            for i in 0..m {
                for col in cols {
                    values.push(col[i].re);
                    values.push(col[i].im);
                }
            }
            DecodedSignal { layout: Layout::Group(GroupLayout::ComplexPairs), rows: m, columns: 2 * l, values }
        };
        let z_dec = to_decoded(&mapped);
        let q_dec = DecodedSignal { values: z_dec.values.iter().map(|&v| self.quantizer.round(v)).collect(), ..z_dec.clone() };
        let base = evaluate_group_l0_objective(&self.lifted_complex, &x_cols, &z_dec, gamma0)
            .and_then(|lz| Ok((lz, evaluate_group_l0_objective(&self.lifted_complex, &x_cols, &q_dec, gamma0)?)));
        let (l_z, l_q) = match base {
            Ok(v) => v,
            Err(e) => {
                rec.invariant_failures.push(format!("group loss monitors: {e}"));
                (f64::NAN, f64::NAN)
            }
        };
        let report = self.config.report_wall_time;
        let threshold = self.config.threshold;

        for method in self.config.methods() {
            let (outcome, wall) = timed(report, || -> Result<MethodOutcome> {
                match method {
                    Method::L0Svd => {
                        let (model, reg) = build_group_l0_qubo(
                            &self.lifted_complex,
                            &x_cols,
                            &self.quantizer,
                            &self.config.build,
                            GroupLayout::ComplexPairs,
                        )?;
                        let sol = self.solve(&model, rec.solver_seed)?;
                        let decoded = decode_solution(&reg, &sol.best)?;
                        let col = decoded.complex_column(0);
                        let l_s = evaluate_group_l0_objective(&self.lifted_complex, &x_cols, &decoded, gamma0)?;
                        Ok(MethodOutcome {
                            method,
                            success: complex_success_score(truth, &col, threshold)?,
                            support: complex_support(&col, threshold)?,
                            reconstruction: col,
                            losses: Some(LossMonitors { l_z, l_q, l_s, lp_s: Some(sol.best_energy) }),
                            violations: Some(constraint_violations(&reg, &sol.best)?.len()),
                            energy: Some(sol.best_energy),
                            wall_ms: None,
                            error: None,
                        })
                    }
                    Method::L1Svd => {
                        let res = l1_svd_pipeline(&self.operator, inst.shots(), p.svd_columns, &self.config.baseline)?;
                        let l_s = evaluate_group_l0_objective(&self.lifted_complex, &x_cols, &to_decoded(&res.columns), gamma0)?;
                        let col = res.evaluation_column().to_vec();
                        Ok(MethodOutcome {
                            method,
                            success: complex_success_score(truth, &col, threshold)?,
                            support: complex_support(&col, threshold)?,
                            reconstruction: col,
                            losses: Some(LossMonitors { l_z, l_q, l_s, lp_s: None }),
                            violations: None,
                            energy: None,
                            wall_ms: None,
                            error: None,
                        })
                    }
                    Method::LassoAvg => {
                        let (ar, xr) = realify_for_real_signal(&self.operator, &inst.averaged_observation())?;
                        let s = lasso_cd(&ar, &xr, &self.config.baseline)?.signal.into_values();
                        Ok(MethodOutcome {
                            method,
                            success: success_score(truth, &s, threshold)?,
                            support: support(&s, threshold)?,
                            reconstruction: to_complex(&s),
                            losses: None,
                            violations: None,
                            energy: None,
                            wall_ms: None,
                            error: None,
                        })
                    }
                    other => Err(invalid(format!("{} needs the single scenario", other.name()))),
                }
            });
            let mut outcome = outcome.unwrap_or_else(|e| MethodOutcome::failed(method, e));
            outcome.wall_ms = wall;
            if method == Method::L0Svd && outcome.error.is_none() {
                self.check_qubo_outcome(&mut rec, &outcome);
            }
            rec.methods.push(outcome);
        }
        rec
    }

    /// Every `(k, trial)` of the sweep, records in sweep then trial order.
    pub fn run(&self) -> ExperimentResult {
        let jobs: Vec<(usize, usize)> = self
            .config
            .sweep
            .k
            .iter()
            .flat_map(|&k| (0..self.config.sweep.trials).map(move |t| (k, t)))
            .collect();
        let records: Vec<TrialRecord> = jobs.par_iter().map(|&(k, t)| self.run_trial(k, t)).collect();
        let curve = aggregate(&self.config, &records);
        ExperimentResult { curve, records }
    }
}

/// QUBO of a stored instance together with the data needed to score an
/// assignment against it.
#[derive(Debug, Clone)]
pub struct CompiledInstance {
    pub model: QuboModel<f64>,
    pub registry: VariableRegistry<f64>,
    /// Lifted operator the objective is evaluated with.
    pub operator: RealMatrix<f64>,
    /// Lifted observation columns.
    pub observations: Vec<Vec<f64>>,
    pub gamma0: f64,
}

/// Outcome of one assignment, as printed by the command-line tools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub energy: f64,
    pub violations: usize,
    /// Objective at the decoded signal.
    pub objective: f64,
    /// Evaluation column as `[re, im]` pairs.
    pub signal: Vec<Complex<f64>>,
    pub support: Vec<usize>,
    pub decoded: DecodedSignal<f64>,
}

impl CompiledInstance {
    /// Single instances compile the l0 objective of their observation;
    /// multishot instances the group objective on up to `svd_columns`
    /// leading singular vectors of the shots.
    pub fn compile(
        data: &InstanceData<f64>,
        quantizer: &Quantizer<f64>,
        build: &BuildParams<f64>,
        svd_columns: usize,
    ) -> Result<Self> {
        match data {
            InstanceData::Single(inst) => {
                let (operator, x) = realify_for_real_signal(inst.operator(), inst.observation())?;
                let (model, registry) = build_l0_qubo(&operator, &x, quantizer, build)?;
                Ok(Self { model, registry, operator, observations: vec![x], gamma0: build.gamma0 })
            }
            InstanceData::Multishot(inst) => {
                let basis = svd_preprocess(inst.shots(), svd_columns)?;
                let observations: Vec<Vec<f64>> = basis.signal_columns().iter().map(|u| stack_complex(u)).collect();
                let operator = realify_for_complex_signal(inst.operator());
                let (model, registry) =
                    build_group_l0_qubo(&operator, &observations, quantizer, build, GroupLayout::ComplexPairs)?;
                Ok(Self { model, registry, operator, observations, gamma0: build.gamma0 })
            }
        }
    }

    pub fn objective(&self, decoded: &DecodedSignal<f64>) -> Result<f64> {
        match decoded.layout {
            Layout::Group(_) => evaluate_group_l0_objective(&self.operator, &self.observations, decoded, self.gamma0),
            _ => evaluate_l0_objective_real(&self.operator, &self.observations[0], &decoded.column(0), self.gamma0),
        }
    }

    pub fn report(&self, bits: &[bool], threshold: f64) -> Result<SolutionReport> {
        let decoded = decode_solution(&self.registry, bits)?;
        let signal = decoded.complex_column(0);
        Ok(SolutionReport {
            energy: self.model.energy(bits)?,
            violations: constraint_violations(&self.registry, bits)?.len(),
            objective: self.objective(&decoded)?,
            support: complex_support(&signal, threshold)?,
            signal,
            decoded,
        })
    }
}

/// One `(k, method)` row of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub sweep_k: usize,
    pub method: Method,
    pub success_rate: f64,
    pub trials: usize,
    pub failures: usize,
    pub l_z_mean: Option<f64>,
    pub l_q_mean: Option<f64>,
    pub l_s_mean: Option<f64>,
    pub lp_s_mean: Option<f64>,
    pub mean_wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessCurve {
    pub points: Vec<CurvePoint>,
}

impl SuccessCurve {
    pub fn point(&self, k: usize, method: Method) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.sweep_k == k && p.method == method)
    }

    /// Success rates of one method in sweep order.
    pub fn rates(&self, method: Method) -> Vec<(usize, f64)> {
        self.points.iter().filter(|p| p.method == method).map(|p| (p.sweep_k, p.success_rate)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub curve: SuccessCurve,
    pub records: Vec<TrialRecord>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Means over trials in record order; failed method runs count as trials
/// with score 0 and are tallied in `failures`.
pub fn aggregate(cfg: &ExperimentConfig, records: &[TrialRecord]) -> SuccessCurve {
    let mut points = Vec::new();
    for &k in &cfg.sweep.k {
        let at_k: Vec<&TrialRecord> = records.iter().filter(|r| r.sweep_k == k).collect();
        for method in cfg.methods() {
            let outs: Vec<&MethodOutcome> = at_k.iter().filter_map(|r| r.outcome(method)).collect();
            let trials = outs.len();
            let successes: usize = outs.iter().map(|o| o.success as usize).sum();
            let losses: Vec<LossMonitors> = outs.iter().filter_map(|o| o.losses).collect();
            points.push(CurvePoint {
                sweep_k: k,
                method,
                success_rate: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
                trials,
                failures: outs.iter().filter(|o| o.error.is_some()).count(),
                l_z_mean: mean(losses.iter().map(|l| l.l_z)),
                l_q_mean: mean(losses.iter().map(|l| l.l_q)),
                l_s_mean: mean(losses.iter().map(|l| l.l_s)),
                lp_s_mean: mean(losses.iter().filter_map(|l| l.lp_s)),
                mean_wall_ms: mean(outs.iter().filter_map(|o| o.wall_ms)),
            });
        }
    }
    SuccessCurve { points }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    Ok(Experiment::new(cfg.clone())?.run())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_csv<W: Write>(curve: &SuccessCurve, mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for p in &curve.points {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            p.sweep_k,
            p.method.name(),
            p.success_rate,
            p.trials,
            p.failures,
            opt(p.l_z_mean),
            opt(p.l_q_mean),
            opt(p.l_s_mean),
            opt(p.lp_s_mean),
            opt(p.mean_wall_ms)
        )?;
    }
    out.flush()?;
    Ok(())
}

/// One JSON object per line, in record order.
pub fn write_jsonl<W: Write>(records: &[TrialRecord], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}
