//! `mucert` command line: simulate the model zoo, sweep matrix measures
//! over grids, and run the contraction certifiers. Reports are JSON (or
//! CSV tables with `--format csv`); exit codes are 0 for pass/success,
//! 1 for a fail verdict, 2 for usage or configuration errors, and 3 for
//! numerical failures.

use clap::{Args, Parser, Subcommand, ValueEnum};
use mucert::certify::{
    check_entrainment, check_ne, check_so, check_sost, check_st, check_swe, CertificateQuery,
    CertifyError, EntrainOptions, GcsKind, SweOptions, Verdict,
};
use mucert::integrate::{
    flow_distance, format_g17, integrate, IntegrateError, SolverConfig, Trajectory,
};
use mucert::linalg::{coeff_c, coeff_d, BaseNorm, Norm, SquareMatrix};
use mucert::linspace;
use mucert::models::{build_model, model_names, SystemModel};
use mucert::scaling::{
    auto_scaling_mu1, check_interior_contractive, check_nested_contraction, check_partition_mu1,
    check_partition_muinf, construct_scaling_mu1, grid_points, grid_sup_measure,
    nested_family_phosphorelay, nested_family_protein, unique_equilibrium, EntryCheck,
    EquilibriumOptions, Face, GridSpec, IcOptions, Partition, ScalingError,
};
use mucert::variational::{
    chebyshev_points, check_finsler_decay, integrate_variational, FinslerOptions,
    VariationalError,
};
use serde::Deserialize;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_FAIL_VERDICT: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug)]
struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: EXIT_USAGE,
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: EXIT_NUMERICAL,
        }
    }
}

impl From<mucert::models::ModelError> for CliError {
    fn from(e: mucert::models::ModelError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<IntegrateError> for CliError {
    fn from(e: IntegrateError) -> Self {
        match e {
            IntegrateError::BadConfig(_) | IntegrateError::BadSampleTimes => {
                CliError::usage(e.to_string())
            }
            _ => CliError::numerical(e.to_string()),
        }
    }
}

impl From<CertifyError> for CliError {
    fn from(e: CertifyError) -> Self {
        match e {
            CertifyError::BadQuery(_)
            | CertifyError::DegenerateSamples
            | CertifyError::MissingPeriod => CliError::usage(e.to_string()),
            CertifyError::Integrate(inner) => inner.into(),
            CertifyError::Linalg(inner) => CliError::usage(inner.to_string()),
        }
    }
}

impl From<ScalingError> for CliError {
    fn from(e: ScalingError) -> Self {
        match e {
            ScalingError::BadInput(_)
            | ScalingError::BadGrid(_)
            | ScalingError::RegionOutsideDomain
            | ScalingError::TimeVaryingModel
            | ScalingError::BadPartition(_)
            | ScalingError::NonNestedFamily { .. }
            | ScalingError::Model(_) => CliError::usage(e.to_string()),
            ScalingError::Integrate(inner) => inner.into(),
            _ => CliError::numerical(e.to_string()),
        }
    }
}

impl From<VariationalError> for CliError {
    fn from(e: VariationalError) -> Self {
        match e {
            VariationalError::BadInput(_) | VariationalError::TimeVaryingModel => {
                CliError::usage(e.to_string())
            }
            VariationalError::Integrate(inner) => inner.into(),
            VariationalError::Linalg(inner) => CliError::usage(inner.to_string()),
        }
    }
}

impl From<mucert::linalg::LinalgError> for CliError {
    fn from(e: mucert::linalg::LinalgError) -> Self {
        CliError::usage(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum OutFormat {
    Json,
    Csv,
}

#[derive(Parser, Debug)]
#[command(
    name = "mucert",
    version,
    about = "Contraction certificates for ODE models via matrix measures"
)]
struct Cli {
    /// JSON run configuration {model, params, command, options}; explicit
    /// flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Sampling seed (reports are byte-identical for a fixed seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutFormat>,
    /// Worker-thread cap for pair evaluation.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Registry model name (see `list-models`).
    #[arg(long, global = true)]
    model: Option<String>,
    /// Model parameter override `name=json`, repeatable.
    #[arg(long = "param", global = true, value_name = "NAME=JSON")]
    params: Vec<String>,
    #[command(subcommand)]
    command: Option<CommandKind>,
}

#[derive(Subcommand, Debug, Clone)]
enum CommandKind {
    /// List registry model names.
    ListModels,
    /// Integrate a model and emit the trajectory.
    Simulate(SimulateArgs),
    /// Grid supremum of a matrix measure of the Jacobian.
    Measure(MeasureArgs),
    /// Empirical trajectory certificates (sost, so, st, ne, swe).
    Certify(CertifyArgs),
    /// Jacobian-based certifiers: partitions, rescaling, nested regions,
    /// interior contraction.
    Scaling(ScalingArgs),
    /// Entrainment to periodic forcing.
    Entrain(EntrainArgs),
    /// Variational system: tangent propagation and the decay certificate.
    Variational(VariationalArgs),
    /// One-shot reproduction of the periodically forced binding example.
    Fig1(Fig1Args),
}

impl CommandKind {
    fn name(&self) -> &'static str {
        match self {
            CommandKind::ListModels => "list-models",
            CommandKind::Simulate(_) => "simulate",
            CommandKind::Measure(_) => "measure",
            CommandKind::Certify(_) => "certify",
            CommandKind::Scaling(_) => "scaling",
            CommandKind::Entrain(_) => "entrain",
            CommandKind::Variational(_) => "variational",
            CommandKind::Fig1(_) => "fig1",
        }
    }
}

#[derive(Args, Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct NormArgs {
    /// Base norm: l1 | linf.
    #[arg(long)]
    norm: Option<String>,
    /// Diagonal scaling "d1,d2,...".
    #[arg(long)]
    scale_diag: Option<String>,
    /// Full scaling matrix, row-major, rows separated by ';' ("1,1;0,1").
    #[arg(long)]
    scale_matrix: Option<String>,
}

#[derive(Args, Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SimulateArgs {
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    t1: Option<f64>,
    /// Initial state "x1,x2,..." (default: domain center).
    #[arg(long)]
    x0: Option<String>,
    /// Number of dense-output samples.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MeasureArgs {
    #[command(flatten)]
    #[serde(flatten)]
    norm: NormArgs,
    /// Grid points per axis.
    #[arg(long)]
    grid: Option<usize>,
    /// Region override "l1,u1;l2,u2;..." (default: model domain).
    #[arg(long)]
    region: Option<String>,
    /// Jacobian time samples "t1,t2,..." for time-varying models.
    #[arg(long)]
    t_samples: Option<String>,
}

#[derive(Args, Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CertifyArgs {
    /// sost | so | st | ne | swe.
    #[arg(long)]
    kind: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    norm: NormArgs,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Amplification allowance for swe.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    pairs: Option<usize>,
    /// Anchor times "0,0.5" for time-varying models.
    #[arg(long)]
    t1_samples: Option<String>,
    #[arg(long)]
    t2_points: Option<usize>,
    #[arg(long)]
    rate_floor: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ScalingArgs {
    /// partition-mu1 | partition-muinf | construct | nested | ic.
    #[arg(long)]
    mode: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    norm: NormArgs,
    /// 1-based indices "2,3".
    #[arg(long)]
    s0: Option<String>,
    /// 1-based indices "1".
    #[arg(long)]
    sminus: Option<String>,
    /// 1-based coupling map "2:1,3:1" (default: every S0 index to the
    /// first S- index).
    #[arg(long)]
    zmap: Option<String>,
    /// Rescaling parameter; omitted = bisected automatically.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    /// Region override "l1,u1;l2,u2;...".
    #[arg(long)]
    region: Option<String>,
    /// Nested-family shrink parameters "0.2,0.1,0.05".
    #[arg(long)]
    zeta_grid: Option<String>,
    /// Transients "0.5,1,2" (nested entry / ic escape).
    #[arg(long)]
    tau_grid: Option<String>,
    /// Repelling faces "x1-,x2+" (ic mode; default: all).
    #[arg(long)]
    faces: Option<String>,
    #[arg(long)]
    boundary_points: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    horizon: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EntrainArgs {
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Forcing period override (required for time-invariant models).
    #[arg(long)]
    period: Option<f64>,
    #[arg(long)]
    x0_count: Option<usize>,
    /// Extra start "x1,x2,...".
    #[arg(long)]
    x0: Option<String>,
    /// Residual window length (default: two periods).
    #[arg(long)]
    window: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct VariationalArgs {
    /// integrate | finsler.
    #[arg(long)]
    mode: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    norm: NormArgs,
    /// Initial state for integrate mode.
    #[arg(long)]
    x0: Option<String>,
    /// Initial tangent for integrate mode.
    #[arg(long)]
    dx0: Option<String>,
    /// Segment endpoints for finsler mode.
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    b: Option<String>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    r_points: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Fig1Args {
    /// CSV path for the trajectory (default: fig1.csv).
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    model: Option<String>,
    #[serde(default)]
    params: Map<String, Value>,
    command: Option<String>,
    #[serde(default)]
    options: Value,
    seed: Option<u64>,
    format: Option<OutFormat>,
    jobs: Option<usize>,
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

macro_rules! merge_options {
    ($dst:expr, $src:expr, [$($field:ident),* $(,)?]) => {
        $( if $dst.$field.is_none() { $dst.$field = $src.$field.clone(); } )*
    };
}

fn merge_norm(dst: &mut NormArgs, src: &NormArgs) {
    merge_options!(dst, src, [norm, scale_diag, scale_matrix]);
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<FileConfig>(&text)
                .map_err(|e| CliError::usage(format!("config: {e}")))?
        }
        None => FileConfig::default(),
    };

    // Subcommand: CLI wins; otherwise the config's `command` runs.
    let mut command = match cli.command.clone() {
        Some(c) => c,
        None => command_from_config(&config)?,
    };
    // Option-level merge when the config describes the same command.
    if cli.command.is_some() && config.command.as_deref() == Some(command.name()) {
        merge_config_options(&mut command, &config)?;
    }

    let seed = cli.seed.or(config.seed).unwrap_or(0);
    let format = cli.format.or(config.format).unwrap_or(OutFormat::Json);
    let jobs = cli.jobs.or(config.jobs).unwrap_or(1).max(1);
    let out_path = cli.out.or(config.out);

    // Model parameters: config first, CLI overrides per key.
    let mut params = config.params.clone();
    for kv in &cli.params {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--param needs name=json, got `{kv}`")))?;
        let parsed: Value =
            serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        params.insert(key.to_string(), parsed);
    }
    let model_name = cli.model.or(config.model);

    let build = || -> Result<SystemModel, CliError> {
        match &model_name {
            Some(name) => Ok(build_model(name, &params)?),
            None => Err(CliError::usage(
                "a model is required: pass --model NAME (see list-models)",
            )),
        }
    };

    let mut output = Output::new(out_path);
    let code = match command {
        CommandKind::ListModels => {
            match format {
                OutFormat::Json => output.write_json(&json!({ "models": model_names() }))?,
                OutFormat::Csv => {
                    output.write_text(&(model_names().join("\n") + "\n"))?;
                }
            }
            0
        }
        CommandKind::Simulate(args) => run_simulate(&build()?, &args, format, &mut output)?,
        CommandKind::Measure(args) => run_measure(&build()?, &args, format, &mut output)?,
        CommandKind::Certify(args) => {
            run_certify(&build()?, &args, seed, jobs, format, &mut output)?
        }
        CommandKind::Scaling(args) => run_scaling(&build()?, &args, seed, format, &mut output)?,
        CommandKind::Entrain(args) => run_entrain(&build()?, &args, seed, format, &mut output)?,
        CommandKind::Variational(args) => run_variational(&build()?, &args, format, &mut output)?,
        CommandKind::Fig1(args) => run_fig1(&args, &mut output)?,
    };
    Ok(code)
}

fn command_from_config(config: &FileConfig) -> Result<CommandKind, CliError> {
    let name = config.command.as_deref().ok_or_else(|| {
        CliError::usage("no subcommand given and the config has no `command` entry")
    })?;
    let opts = if config.options.is_null() {
        json!({})
    } else {
        config.options.clone()
    };
    let wrap = |e: serde_json::Error| CliError::usage(format!("config options: {e}"));
    Ok(match name {
        "list-models" => CommandKind::ListModels,
        "simulate" => CommandKind::Simulate(serde_json::from_value(opts).map_err(wrap)?),
        "measure" => CommandKind::Measure(serde_json::from_value(opts).map_err(wrap)?),
        "certify" => CommandKind::Certify(serde_json::from_value(opts).map_err(wrap)?),
        "scaling" => CommandKind::Scaling(serde_json::from_value(opts).map_err(wrap)?),
        "entrain" => CommandKind::Entrain(serde_json::from_value(opts).map_err(wrap)?),
        "variational" => CommandKind::Variational(serde_json::from_value(opts).map_err(wrap)?),
        "fig1" => CommandKind::Fig1(serde_json::from_value(opts).map_err(wrap)?),
        other => return Err(CliError::usage(format!("unknown command `{other}`"))),
    })
}

fn merge_config_options(command: &mut CommandKind, config: &FileConfig) -> Result<(), CliError> {
    let from_config = command_from_config(config)?;
    match (command, from_config) {
        (CommandKind::Simulate(dst), CommandKind::Simulate(src)) => {
            merge_options!(dst, &src, [t0, t1, x0, samples, rel_tol, abs_tol]);
        }
        (CommandKind::Measure(dst), CommandKind::Measure(src)) => {
            merge_options!(dst, &src, [grid, region, t_samples]);
            merge_norm(&mut dst.norm, &src.norm);
        }
        (CommandKind::Certify(dst), CommandKind::Certify(src)) => {
            merge_options!(
                dst,
                &src,
                [kind, tau, epsilon, delta, horizon, pairs, t1_samples, t2_points, rate_floor]
            );
            merge_norm(&mut dst.norm, &src.norm);
        }
        (CommandKind::Scaling(dst), CommandKind::Scaling(src)) => {
            merge_options!(
                dst,
                &src,
                [
                    mode,
                    s0,
                    sminus,
                    zmap,
                    epsilon,
                    grid,
                    region,
                    zeta_grid,
                    tau_grid,
                    faces,
                    boundary_points,
                    samples,
                    horizon
                ]
            );
            merge_norm(&mut dst.norm, &src.norm);
        }
        (CommandKind::Entrain(dst), CommandKind::Entrain(src)) => {
            merge_options!(dst, &src, [horizon, tol, period, x0_count, x0, window]);
        }
        (CommandKind::Variational(dst), CommandKind::Variational(src)) => {
            merge_options!(dst, &src, [mode, x0, dx0, a, b, tau, horizon, r_points, samples]);
            merge_norm(&mut dst.norm, &src.norm);
        }
        (CommandKind::Fig1(dst), CommandKind::Fig1(src)) => {
            merge_options!(dst, &src, [csv]);
        }
        _ => {}
    }
    Ok(())
}

struct Output {
    path: Option<PathBuf>,
}

impl Output {
    fn new(path: Option<PathBuf>) -> Self {
        Self { path }
    }

    fn write_text(&mut self, text: &str) -> Result<(), CliError> {
        match &self.path {
            Some(p) => std::fs::write(p, text)
                .map_err(|e| CliError::numerical(format!("cannot write {}: {e}", p.display()))),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn write_json<T: serde::Serialize>(&mut self, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::numerical(format!("serialize: {e}")))?;
        text.push('\n');
        self.write_text(&text)
    }
}

fn parse_f64_list(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("{what}: `{s}` is not a number")))
        })
        .collect()
}

fn parse_state(text: &str, dim: usize, what: &str) -> Result<Vec<f64>, CliError> {
    let v = parse_f64_list(text, what)?;
    if v.len() != dim {
        return Err(CliError::usage(format!(
            "{what}: expected {dim} components, got {}",
            v.len()
        )));
    }
    Ok(v)
}

/// 1-based index list "2,3" into 0-based indices.
fn parse_indices(text: &str, what: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|s| {
            let idx: usize = s
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("{what}: `{s}` is not an index")))?;
            if idx == 0 {
                return Err(CliError::usage(format!("{what}: indices are 1-based")));
            }
            Ok(idx - 1)
        })
        .collect()
}

fn parse_matrix(text: &str) -> Result<SquareMatrix, CliError> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|row| parse_f64_list(row, "scale matrix"))
        .collect::<Result<_, _>>()?;
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    SquareMatrix::from_rows(&refs).map_err(|e| CliError::usage(e.to_string()))
}

fn parse_region(text: &str) -> Result<mucert::models::Domain, CliError> {
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for axis in text.split(';') {
        let lu = parse_f64_list(axis, "region")?;
        if lu.len() != 2 {
            return Err(CliError::usage("region axes must be `lower,upper`"));
        }
        lower.push(lu[0]);
        upper.push(lu[1]);
    }
    mucert::models::Domain::new_box(lower, upper).map_err(|e| CliError::usage(e.to_string()))
}

fn build_norm(args: &NormArgs, dim: usize) -> Result<Norm, CliError> {
    let base = match args.norm.as_deref().unwrap_or("l1") {
        "l1" => BaseNorm::L1,
        "linf" => BaseNorm::LInf,
        other => {
            return Err(CliError::usage(format!(
                "unknown norm `{other}` (l1 | linf)"
            )))
        }
    };
    let scaling = match (&args.scale_diag, &args.scale_matrix) {
        (Some(_), Some(_)) => {
            return Err(CliError::usage(
                "pass either --scale-diag or --scale-matrix, not both",
            ))
        }
        (Some(diag), None) => Some(SquareMatrix::diagonal(&parse_state(
            diag,
            dim,
            "scale diagonal",
        )?)),
        (None, Some(matrix)) => {
            let p = parse_matrix(matrix)?;
            if p.dim() != dim {
                return Err(CliError::usage(format!(
                    "scale matrix is {n}x{n} but the model has {dim} states",
                    n = p.dim()
                )));
            }
            Some(p)
        }
        (None, None) => None,
    };
    let norm = match scaling {
        Some(p) => Norm::scaled(base, p)?,
        None => match base {
            BaseNorm::L1 => Norm::l1(),
            BaseNorm::LInf => Norm::linf(),
        },
    };
    Ok(norm)
}

fn verdict_code(verdict: Verdict) -> u8 {
    if verdict.passed() {
        0
    } else {
        EXIT_FAIL_VERDICT
    }
}

fn run_simulate(
    model: &SystemModel,
    args: &SimulateArgs,
    format: OutFormat,
    output: &mut Output,
) -> Result<u8, CliError> {
    let t0 = args.t0.unwrap_or(0.0);
    let t1 = args.t1.unwrap_or(10.0);
    let x0 = match &args.x0 {
        Some(text) => parse_state(text, model.dim(), "x0")?,
        None => model.domain().center(),
    };
    let samples = args.samples.unwrap_or(201).max(2);
    let mut cfg = SolverConfig::default();
    if let Some(rt) = args.rel_tol {
        cfg.rel_tol = rt;
    }
    if let Some(at) = args.abs_tol {
        cfg.abs_tol = at;
    }
    let times = linspace(t0, t1, samples);
    let traj = integrate(model, t0, &x0, t1, &cfg, &times)?;
    emit_trajectory(&traj, format, output)?;
    Ok(0)
}

fn emit_trajectory(
    traj: &Trajectory,
    format: OutFormat,
    output: &mut Output,
) -> Result<(), CliError> {
    match format {
        OutFormat::Csv => output.write_text(&traj.to_csv_string()),
        OutFormat::Json => output.write_json(&json!({
            "model": traj.model,
            "t0": traj.t0,
            "t1": traj.t1,
            "times": traj.times,
            "states": traj.states,
            "stats": traj.stats,
        })),
    }
}

fn run_measure(
    model: &SystemModel,
    args: &MeasureArgs,
    format: OutFormat,
    output: &mut Output,
) -> Result<u8, CliError> {
    let norm = build_norm(&args.norm, model.dim())?;
    let grid = match args.grid {
        Some(p) => GridSpec::new(p)?,
        None => GridSpec::default_for_dim(model.dim()),
    };
    let region = match &args.region {
        Some(text) => parse_region(text)?,
        None => model.domain().clone(),
    };
    let t_samples = match &args.t_samples {
        Some(text) => parse_f64_list(text, "t samples")?,
        None => Vec::new(),
    };
    let report = grid_sup_measure(model, &norm, &grid, &region, &t_samples)?;
    let code = if report.sup < 0.0 { 0 } else { EXIT_FAIL_VERDICT };
    match format {
        OutFormat::Json => output.write_json(&report)?,
        OutFormat::Csv => {
            // margin table: coordinates, rescaled coefficients, measure
            let n = model.dim();
            let coeff_name = match norm.base() {
                BaseNorm::L1 => "c",
                BaseNorm::LInf => "d",
            };
            let mut text = String::new();
            for i in 1..=n {
                text.push_str(&format!("x{i},"));
            }
            for i in 1..=n {
                text.push_str(&format!("{coeff_name}{i},"));
            }
            text.push_str("mu\n");
            let t = t_samples.first().copied().unwrap_or(0.0);
            for point in grid_points(&region, &grid) {
                let j = model.jacobian(t, &point);
                let jt = match norm.scaling_matrix() {
                    Some(p) => p.mul(&j).mul(&p.inverse()?),
                    None => j.clone(),
                };
                for v in &point {
                    text.push_str(&format_g17(*v));
                    text.push(',');
                }
                for i in 0..n {
                    let coeff = match norm.base() {
                        BaseNorm::L1 => coeff_c(&jt, i)?,
                        BaseNorm::LInf => coeff_d(&jt, i)?,
                    };
                    text.push_str(&format_g17(coeff));
                    text.push(',');
                }
                text.push_str(&format_g17(norm.measure(&j)?));
                text.push('\n');
            }
            output.write_text(&text)?;
        }
    }
    Ok(code)
}

fn run_certify(
    model: &SystemModel,
    args: &CertifyArgs,
    seed: u64,
    jobs: usize,
    format: OutFormat,
    output: &mut Output,
) -> Result<u8, CliError> {
    let kind_name = args.kind.as_deref().unwrap_or("sost");
    let norm = build_norm(&args.norm, model.dim())?;

    if kind_name == "swe" {
        let mut opts = SweOptions::new(args.delta.unwrap_or(0.1), norm);
        opts.horizon = args.horizon.unwrap_or(5.0);
        opts.pair_samples = args.pairs.unwrap_or(32);
        opts.seed = seed;
        opts.jobs = jobs;
        if let Some(text) = &args.t1_samples {
            opts.t0_samples = parse_f64_list(text, "t1 samples")?;
        }
        let report = check_swe(model, &opts)?;
        match format {
            OutFormat::Json => output.write_json(&report)?,
            OutFormat::Csv => output.write_text(&format!(
                "tau0,gronwall_tau0,lipschitz\n{},{},{}\n",
                format_g17(report.tau0),
                format_g17(report.gronwall_tau0),
                format_g17(report.lipschitz)
            ))?,
        }
        return Ok(verdict_code(report.verdict));
    }

    let kind = match kind_name {
        "sost" => GcsKind::Sost,
        "so" => GcsKind::So,
        "st" => GcsKind::St,
        "ne" => GcsKind::Ne,
        other => {
            return Err(CliError::usage(format!(
                "unknown certificate kind `{other}` (sost | so | st | ne | swe)"
            )))
        }
    };
    let mut q = CertificateQuery::new(kind, norm.clone());
    q.seed = seed;
    q.jobs = jobs;
    if let Some(tau) = args.tau {
        q.tau = tau;
    }
    if let Some(eps) = args.epsilon {
        q.epsilon = eps;
    }
    if let Some(h) = args.horizon {
        q.horizon = h;
    }
    if let Some(p) = args.pairs {
        q.pair_samples = p;
    }
    if let Some(tp) = args.t2_points {
        q.t2_points = tp;
    }
    if let Some(rf) = args.rate_floor {
        q.rate_floor = rf;
    }
    if let Some(text) = &args.t1_samples {
        q.t1_samples = parse_f64_list(text, "t1 samples")?;
    }
    let report = match kind {
        GcsKind::Sost => check_sost(model, &q),
        GcsKind::So => check_so(model, &q),
        GcsKind::St => check_st(model, &q),
        GcsKind::Ne => check_ne(model, &q),
    }?;
    match format {
        OutFormat::Json => output.write_json(&report)?,
        OutFormat::Csv => {
            // distance trace of the worst pair
            let witness = report
                .witness
                .as_ref()
                .ok_or_else(|| CliError::numerical("no witness pair to trace"))?;
            let times = linspace(witness.t1, witness.t1 + q.horizon + report.tau, 201);
            let series = flow_distance(
                model,
                witness.t1,
                &witness.a,
                &witness.b,
                &norm,
                *times.last().unwrap(),
                &q.solver,
                &times,
            )?;
            let mut text = String::from("t,distance\n");
            for (t, d) in series.times.iter().zip(series.distances.iter()) {
                text.push_str(&format!("{},{}\n", format_g17(*t), format_g17(*d)));
            }
            output.write_text(&text)?;
        }
    }
    Ok(verdict_code(report.verdict))
}

fn build_partition(args: &ScalingArgs) -> Result<Partition, CliError> {
    let s0 = parse_indices(
        args.s0
            .as_deref()
            .ok_or_else(|| CliError::usage("partition modes need --s0"))?,
        "--s0",
    )?;
    let sminus = parse_indices(
        args.sminus
            .as_deref()
            .ok_or_else(|| CliError::usage("partition modes need --sminus"))?,
        "--sminus",
    )?;
    let zmap: BTreeMap<usize, usize> = match &args.zmap {
        Some(text) => {
            let mut map = BTreeMap::new();
            for entry in text.split(',') {
                let (from, to) = entry
                    .split_once(':')
                    .ok_or_else(|| CliError::usage("--zmap entries are `i:z`"))?;
                let from = parse_indices(from, "--zmap")?[0];
                let to = parse_indices(to, "--zmap")?[0];
                map.insert(from, to);
            }
            map
        }
        None => {
            let z = *sminus
                .first()
                .ok_or_else(|| CliError::usage("--sminus is empty"))?;
            s0.iter().map(|&i| (i, z)).collect()
        }
    };
    Partition::new(s0, sminus, zmap).map_err(|e| CliError::usage(e.to_string()))
}

fn parse_faces(text: &str) -> Result<Vec<Face>, CliError> {
    text.split(',')
        .map(|raw| {
            let raw = raw.trim();
            let (body, upper) = match raw.strip_suffix('+') {
                Some(b) => (b, true),
                None => match raw.strip_suffix('-') {
                    Some(b) => (b, false),
                    None => {
                        return Err(CliError::usage(format!(
                            "face `{raw}` must end in + (upper) or - (lower)"
                        )))
                    }
                },
            };
            let axis_text = body.strip_prefix('x').unwrap_or(body);
            let axis: usize = axis_text
                .parse()
                .map_err(|_| CliError::usage(format!("face `{raw}`: bad axis")))?;
            if axis == 0 {
                return Err(CliError::usage("face axes are 1-based (x1-, x2+, ...)"));
            }
            Ok(Face {
                axis: axis - 1,
                upper,
            })
        })
        .collect()
}

fn run_scaling(
    model: &SystemModel,
    args: &ScalingArgs,
    seed: u64,
    format: OutFormat,
    output: &mut Output,
) -> Result<u8, CliError> {
    let mode = args.mode.as_deref().unwrap_or("partition-mu1");
    let grid = match args.grid {
        Some(p) => GridSpec::new(p)?,
        None => GridSpec::default_for_dim(model.dim()),
    };
    let region = match &args.region {
        Some(text) => Some(parse_region(text)?),
        None => None,
    };
    match mode {
        "partition-mu1" | "partition-muinf" => {
            let partition = build_partition(args)?;
            let report = if mode == "partition-mu1" {
                check_partition_mu1(model, &grid, &partition, region.as_ref())?
            } else {
                check_partition_muinf(model, &grid, &partition, region.as_ref())?
            };
            match format {
                OutFormat::Json => output.write_json(&report)?,
                OutFormat::Csv => output.write_text(&partition_margin_csv(
                    model,
                    &grid,
                    region.as_ref(),
                    mode == "partition-mu1",
                )?)?,
            }
            Ok(verdict_code(report.verdict))
        }
        "construct" => {
            let partition = build_partition(args)?;
            let result = match args.epsilon {
                Some(eps) => {
                    let d = construct_scaling_mu1(&partition, eps, model.dim())?;
                    let norm = Norm::scaled_l1(d.clone())?;
                    let sup = grid_sup_measure(
                        model,
                        &norm,
                        &grid,
                        region.as_ref().unwrap_or_else(|| model.domain()),
                        &[0.0],
                    )?;
                    let partition_report =
                        check_partition_mu1(model, &grid, &partition, region.as_ref())?;
                    mucert::scaling::ScalingResult {
                        d: (0..model.dim()).map(|i| d.get(i, i)).collect(),
                        epsilon_used: eps,
                        grid_sup_mu: sup.sup,
                        verdict: Verdict::from_bool(sup.sup < 0.0),
                        partition: partition_report,
                    }
                }
                None => auto_scaling_mu1(model, &grid, &partition, region.as_ref())?,
            };
            match format {
                OutFormat::Json => output.write_json(&result)?,
                OutFormat::Csv => {
                    let mut text = String::from("epsilon,grid_sup_mu");
                    for i in 1..=result.d.len() {
                        text.push_str(&format!(",d{i}"));
                    }
                    text.push('\n');
                    text.push_str(&format_g17(result.epsilon_used));
                    text.push(',');
                    text.push_str(&format_g17(result.grid_sup_mu));
                    for v in &result.d {
                        text.push(',');
                        text.push_str(&format_g17(*v));
                    }
                    text.push('\n');
                    output.write_text(&text)?;
                }
            }
            Ok(verdict_code(result.verdict))
        }
        "nested" => {
            let zeta_grid = match &args.zeta_grid {
                Some(text) => parse_f64_list(text, "zeta grid")?,
                None => vec![0.2, 0.1, 0.05],
            };
            let family = match model.name() {
                "protein_synthesis" => {
                    let alphas = model_param_vec(model, "alphas")?;
                    let r = model_param_f64(model, "r")?;
                    nested_family_protein(&alphas, r, zeta_grid)?
                }
                "phosphorelay" | "rfm" => {
                    let ps =
                        model_param_vec(model, "ps").unwrap_or_else(|_| vec![1.0; model.dim()]);
                    nested_family_phosphorelay(&ps, zeta_grid)?
                }
                other => {
                    return Err(CliError::usage(format!(
                        "no built-in region family for `{other}` \
                         (protein_synthesis, phosphorelay, rfm)"
                    )))
                }
            };
            let mut entry = EntryCheck {
                seed,
                ..EntryCheck::default()
            };
            if let Some(text) = &args.tau_grid {
                entry.tau_grid = parse_f64_list(text, "tau grid")?;
            }
            if let Some(s) = args.samples {
                entry.samples = s;
            }
            if let Some(h) = args.horizon {
                entry.horizon = h;
            }
            let report = check_nested_contraction(model, &family, &grid, &entry)?;
            match format {
                OutFormat::Json => output.write_json(&report)?,
                OutFormat::Csv => {
                    let mut text = String::from("zeta,grid_sup_mu,entry_time,norm_deviation\n");
                    for z in &report.per_zeta {
                        text.push_str(&format!(
                            "{},{},{},{}\n",
                            format_g17(z.zeta),
                            format_g17(z.grid_sup_mu),
                            z.entry_time.map_or("never".to_string(), format_g17),
                            format_g17(z.norm_deviation)
                        ));
                    }
                    output.write_text(&text)?;
                }
            }
            Ok(verdict_code(report.verdict))
        }
        "ic" => {
            let norm = build_norm(&args.norm, model.dim())?;
            let mut opts = IcOptions::default();
            if let Some(text) = &args.faces {
                opts.faces = Some(parse_faces(text)?);
            }
            if let Some(text) = &args.tau_grid {
                opts.tau_grid = parse_f64_list(text, "tau grid")?;
            }
            if let Some(bp) = args.boundary_points {
                opts.boundary_points_per_axis = bp;
            }
            let report = check_interior_contractive(model, &norm, &grid, &opts)?;
            let verdict = report.verdict;
            match format {
                OutFormat::Json => {
                    // attach the attractor when the certificate holds
                    let equilibrium = if verdict.passed() {
                        let eq_opts = EquilibriumOptions {
                            seed,
                            interior_faces: opts.faces.clone(),
                            ..EquilibriumOptions::default()
                        };
                        unique_equilibrium(model, &eq_opts).ok()
                    } else {
                        None
                    };
                    output.write_json(&json!({
                        "ic": report,
                        "equilibrium": equilibrium,
                    }))?;
                }
                OutFormat::Csv => {
                    let mut text = String::from("tau,d\n");
                    for entry in &report.d_table {
                        text.push_str(&format!(
                            "{},{}\n",
                            format_g17(entry.tau),
                            format_g17(entry.d)
                        ));
                    }
                    output.write_text(&text)?;
                }
            }
            Ok(verdict_code(verdict))
        }
        other => Err(CliError::usage(format!(
            "unknown scaling mode `{other}` \
             (partition-mu1 | partition-muinf | construct | nested | ic)"
        ))),
    }
}

fn partition_margin_csv(
    model: &SystemModel,
    grid: &GridSpec,
    region: Option<&mucert::models::Domain>,
    column_form: bool,
) -> Result<String, CliError> {
    let region = region.unwrap_or_else(|| model.domain());
    let n = model.dim();
    let mut text = String::new();
    for i in 1..=n {
        text.push_str(&format!("x{i},"));
    }
    let coeff_name = if column_form { "c" } else { "d" };
    for i in 1..=n {
        text.push_str(&format!("{coeff_name}{i},"));
    }
    text.push_str("mu\n");
    let norm = if column_form { Norm::l1() } else { Norm::linf() };
    for point in grid_points(region, grid) {
        let j = model.jacobian(0.0, &point);
        for v in &point {
            text.push_str(&format_g17(*v));
            text.push(',');
        }
        for i in 0..n {
            let coeff = if column_form {
                coeff_c(&j, i)?
            } else {
                coeff_d(&j, i)?
            };
            text.push_str(&format_g17(coeff));
            text.push(',');
        }
        text.push_str(&format_g17(norm.measure(&j)?));
        text.push('\n');
    }
    Ok(text)
}

fn model_param_f64(model: &SystemModel, key: &str) -> Result<f64, CliError> {
    model
        .params()
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| CliError::usage(format!("model has no `{key}` parameter")))
}

fn model_param_vec(model: &SystemModel, key: &str) -> Result<Vec<f64>, CliError> {
    model
        .params()
        .get(key)
        .and_then(Value::as_array)
        .map(|arr| arr.iter().filter_map(Value::as_f64).collect())
        .ok_or_else(|| CliError::usage(format!("model has no `{key}` parameter")))
}

fn run_entrain(
    model: &SystemModel,
    args: &EntrainArgs,
    seed: u64,
    format: OutFormat,
    output: &mut Output,
) -> Result<u8, CliError> {
    let mut opts = EntrainOptions::new(args.horizon.unwrap_or(30.0), args.tol.unwrap_or(1e-4));
    opts.period = args.period;
    opts.seed = seed;
    if let Some(c) = args.x0_count {
        opts.x0_count = c;
    }
    if let Some(w) = args.window {
        opts.window = w;
    }
    if let Some(text) = &args.x0 {
        opts.extra_x0 = vec![parse_state(text, model.dim(), "x0")?];
    }
    let report = check_entrainment(model, &opts)?;
    match format {
        OutFormat::Json => output.write_json(&report)?,
        OutFormat::Csv => {
            let mut text = String::from("t");
            for i in 1..=model.dim() {
                text.push_str(&format!(",x{i}"));
            }
            text.push('\n');
            for sample in &report.orbit {
                text.push_str(&format_g17(sample.t));
                for v in &sample.x {
                    text.push(',');
                    text.push_str(&format_g17(*v));
                }
                text.push('\n');
            }
            output.write_text(&text)?;
        }
    }
    Ok(verdict_code(report.verdict))
}

fn run_variational(
    model: &SystemModel,
    args: &VariationalArgs,
    format: OutFormat,
    output: &mut Output,
) -> Result<u8, CliError> {
    let mode = args.mode.as_deref().unwrap_or("integrate");
    let norm = build_norm(&args.norm, model.dim())?;
    match mode {
        "integrate" => {
            let x0 = match &args.x0 {
                Some(text) => parse_state(text, model.dim(), "x0")?,
                None => model.domain().center(),
            };
            let dx0 = match &args.dx0 {
                Some(text) => parse_state(text, model.dim(), "dx0")?,
                None => vec![1.0; model.dim()],
            };
            let horizon = args.horizon.unwrap_or(10.0);
            let samples = args.samples.unwrap_or(201).max(2);
            let times = linspace(0.0, horizon, samples);
            let series = integrate_variational(
                model,
                &x0,
                &dx0,
                horizon,
                &SolverConfig::default(),
                &times,
            )?;
            match format {
                OutFormat::Csv => {
                    let mut buf = Vec::new();
                    series.write_csv(&norm, &mut buf)?;
                    output.write_text(&String::from_utf8_lossy(&buf))?;
                }
                OutFormat::Json => output.write_json(&json!({
                    "times": series.times,
                    "x": series.x,
                    "dx": series.dx,
                    "stats": series.stats,
                }))?,
            }
            Ok(0)
        }
        "finsler" => {
            let a = parse_state(
                args.a
                    .as_deref()
                    .ok_or_else(|| CliError::usage("finsler mode needs --a and --b"))?,
                model.dim(),
                "a",
            )?;
            let b = parse_state(
                args.b
                    .as_deref()
                    .ok_or_else(|| CliError::usage("finsler mode needs --a and --b"))?,
                model.dim(),
                "b",
            )?;
            let mut opts = FinslerOptions::new(args.tau.unwrap_or(0.5));
            if let Some(h) = args.horizon {
                opts.horizon = h;
            }
            if let Some(rp) = args.r_points {
                opts.r_samples = chebyshev_points(rp.max(2));
            }
            let report = check_finsler_decay(model, &a, &b, &norm, &opts)?;
            match format {
                OutFormat::Json => output.write_json(&report)?,
                OutFormat::Csv => output.write_text(&format!(
                    "rate,worst_margin,r_worst\n{},{},{}\n",
                    format_g17(report.rate),
                    format_g17(report.worst_margin),
                    format_g17(report.r_worst)
                ))?,
            }
            Ok(verdict_code(report.verdict))
        }
        other => Err(CliError::usage(format!(
            "unknown variational mode `{other}` (integrate | finsler)"
        ))),
    }
}

/// One-shot reproduction of the periodically forced irreversible-binding
/// run: `delta = 2, k2 = 1, z_T = 4, e_T = 3, u(t) = 2 + sin(2 pi t)`,
/// start `(2, 1/4)`, horizon 30. Writes the `t,x1,x2` trajectory CSV and
/// prints the entrainment report.
fn run_fig1(args: &Fig1Args, output: &mut Output) -> Result<u8, CliError> {
    let mut params = Map::new();
    params.insert(
        "u".into(),
        json!({"kind": "sinusoid", "offset": 2.0, "amplitude": 1.0, "period": 1.0}),
    );
    let model = build_model("irreversible_binding", &params)?;
    let x0 = vec![2.0, 0.25];
    let cfg = SolverConfig::default();
    let times = linspace(0.0, 30.0, 3001);
    let traj = integrate(&model, 0.0, &x0, 30.0, &cfg, &times)?;

    let csv_path = args
        .csv
        .clone()
        .unwrap_or_else(|| PathBuf::from("fig1.csv"));
    std::fs::write(&csv_path, traj.to_csv_string())
        .map_err(|e| CliError::numerical(format!("cannot write {}: {e}", csv_path.display())))?;

    let mut opts = EntrainOptions::new(30.0, 1e-4);
    opts.window = 4.0;
    opts.x0_count = 3;
    opts.extra_x0 = vec![x0];
    let report = check_entrainment(&model, &opts)?;

    let x2_final = traj.states.last().unwrap()[1];
    let saturated = (x2_final - 3.0).abs() < 1e-3;
    output.write_json(&json!({
        "csv": csv_path.display().to_string(),
        "x2_final": x2_final,
        "x2_saturated": saturated,
        "entrainment": report,
    }))?;
    let pass = report.verdict.passed() && saturated;
    Ok(if pass { 0 } else { EXIT_FAIL_VERDICT })
}
