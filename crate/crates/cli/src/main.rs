//! `robin`: prune outliers from measurement files and run synthetic experiments.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use robin::error::GraphError;
use robin::graph::{build_graph, write_edge_list, SubsetBudget};
use robin::harness::io::{fit_unit_cube, instance_json, parse_measurement_file, parse_points};
use robin::harness::{
    bench, evaluate, generate, prune, records_to_csv, run_experiment, run_pipeline, Estimate,
    ExperimentSpec, GroundTruth, Instance, PipelineConfig, PipelineOutput, PointSource, RunMetrics,
    RunRecord, SolverKind, SuccessThresholds,
};
use robin::invariants::{MeasurementSet, NoiseBound, ProblemKind};
use robin::select::{InlierSelection, SelectionMode};

#[derive(Parser)]
#[command(
    name = "robin",
    version,
    about = "Graph-theoretic outlier pruning for robust estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select inliers from a measurement file and print the selection as JSON.
    Prune(PruneArgs),
    /// Single rotation averaging: prune, then estimate the rotation.
    Rotavg(PipelineArgs),
    /// Point cloud registration: prune, then estimate (R, t).
    Register(RegisterArgs),
    /// Cross-ratio pruning of 2D-3D correspondences.
    Crossratio(PipelineArgs),
    /// Monte Carlo sweep over outlier rates, one row per run.
    Bench(BenchArgs),
    /// Export the compatibility graph of a measurement file as an edge list.
    Graph(GraphArgs),
    /// Write a synthetic instance as a measurement file.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Clique,
    Kcore,
    None,
}

impl From<Mode> for SelectionMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Clique => SelectionMode::MaxClique,
            Mode::Kcore => SelectionMode::MaxKCore,
            Mode::None => SelectionMode::Unpruned,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Gnc,
    ClosedForm,
}

impl From<Solver> for SolverKind {
    fn from(s: Solver) -> Self {
        match s {
            Solver::Gnc => SolverKind::Gnc,
            Solver::ClosedForm => SolverKind::ClosedForm,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Problem {
    Rotavg,
    Registration,
    #[value(name = "registration_normals", alias = "registration-normals")]
    RegistrationNormals,
    Crossratio,
}

impl From<Problem> for ProblemKind {
    fn from(p: Problem) -> Self {
        match p {
            Problem::Rotavg => ProblemKind::RotationAveraging,
            Problem::Registration => ProblemKind::Registration,
            Problem::RegistrationNormals => ProblemKind::RegistrationNormals,
            Problem::Crossratio => ProblemKind::CrossRatio,
        }
    }
}

#[derive(Args, Clone)]
struct SelectArgs {
    #[arg(long, value_enum, default_value = "clique")]
    mode: Mode,
    /// Maximum number of invariant subsets to test, or "unlimited".
    #[arg(long, value_parser = parse_budget)]
    budget: Option<Budget>,
    /// Stop the clique search after this many milliseconds.
    #[arg(long)]
    time_budget_ms: Option<u64>,
}

#[derive(Clone, Copy)]
enum Budget {
    Unlimited,
    Max(u64),
}

fn parse_budget(s: &str) -> std::result::Result<Budget, String> {
    if s == "unlimited" {
        return Ok(Budget::Unlimited);
    }
    match s.parse::<u64>() {
        Ok(0) => Err("budget must be positive".into()),
        Ok(k) => Ok(Budget::Max(k)),
        Err(_) => Err(format!(
            "expected a positive integer or \"unlimited\", got '{s}'"
        )),
    }
}

impl SelectArgs {
    fn subset_budget(&self, seed: u64) -> SubsetBudget {
        match self.budget {
            None => SubsetBudget::default().with_seed(seed),
            Some(Budget::Unlimited) => SubsetBudget::unlimited(),
            Some(Budget::Max(k)) => SubsetBudget::bounded(k, seed).expect("budget is positive"),
        }
    }

    fn time_budget(&self) -> Option<Duration> {
        self.time_budget_ms.map(Duration::from_millis)
    }
}

/// Noise bounds in the units of the measurements: radians for rotations and
/// normals, length units for points, pixels for image points.
#[derive(Args, Clone, Default)]
struct BoundArgs {
    /// Noise bound β (overrides the file or generator default).
    #[arg(long)]
    beta: Option<f64>,
    /// Normal noise bound in radians.
    #[arg(long)]
    beta_normal: Option<f64>,
}

#[derive(Args, Clone)]
struct OutArgs {
    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PruneArgs {
    /// Measurement file (JSON).
    input: PathBuf,
    #[command(flatten)]
    select: SelectArgs,
    #[command(flatten)]
    bounds: BoundArgs,
    /// Seed for subset sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct GraphArgs {
    /// Measurement file (JSON).
    input: PathBuf,
    #[arg(long, value_parser = parse_budget)]
    budget: Option<Budget>,
    #[command(flatten)]
    bounds: BoundArgs,
    /// Seed for subset sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

/// Synthetic instance settings; unset values take the experiment defaults.
#[derive(Args, Clone)]
struct GenArgs {
    /// Number of measurements.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    outlier_rate: f64,
    /// Inlier noise standard deviation, in the units of β.
    #[arg(long)]
    sigma: Option<f64>,
    /// Normal noise standard deviation in radians.
    #[arg(long)]
    sigma_normal: Option<f64>,
    #[command(flatten)]
    bounds: BoundArgs,
    /// Seed of the first run; run k uses seed + k.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Source cloud for registration, lines of `x y z [nx ny nz]`.
    #[arg(long)]
    points_file: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ReportArgs {
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write 0 for the timing columns so output is reproducible.
    #[arg(long)]
    no_timing: bool,
    /// Largest rotation error in degrees counted as a success.
    #[arg(long, default_value_t = 15.0)]
    success_rot_deg: f64,
    /// Largest translation error counted as a success.
    #[arg(long, default_value_t = 0.30)]
    success_trans: f64,
    #[command(flatten)]
    out: OutArgs,
}

impl ReportArgs {
    fn thresholds(&self) -> SuccessThresholds {
        SuccessThresholds {
            rotation_deg: self.success_rot_deg,
            translation: self.success_trans,
        }
    }
}

#[derive(Args)]
struct PipelineArgs {
    /// Measurement file; without it synthetic instances are generated.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Number of synthetic runs.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[command(flatten)]
    select: SelectArgs,
    #[arg(long, value_enum, default_value = "gnc")]
    solver: Solver,
    #[command(flatten)]
    gen: GenArgs,
    #[command(flatten)]
    report: ReportArgs,
}

#[derive(Args)]
struct RegisterArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Generate point-with-normal measurements.
    #[arg(long)]
    normals: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    problem: Problem,
    #[arg(long, default_value_t = 20)]
    runs: usize,
    /// Comma-separated outlier rates.
    #[arg(long, value_delimiter = ',', default_value = "0.0,0.5,0.9")]
    outlier_rates: Vec<f64>,
    #[command(flatten)]
    select: SelectArgs,
    #[arg(long, value_enum, default_value = "gnc")]
    solver: Solver,
    #[command(flatten)]
    gen: GenArgs,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    no_timing: bool,
    #[arg(long, default_value_t = 15.0)]
    success_rot_deg: f64,
    #[arg(long, default_value_t = 0.30)]
    success_trans: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    problem: Problem,
    #[command(flatten)]
    gen: GenArgs,
    #[command(flatten)]
    out: OutArgs,
}

enum CliError {
    /// Bad flags or input files; exit code 2.
    Input(String),
    /// Failure writing output; exit code 1.
    Io(String),
}

type Result<T> = std::result::Result<T, CliError>;

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn emit(out: &OutArgs, text: &str) -> Result<()> {
    match &out.out {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn with_bounds(m: MeasurementSet, b: &BoundArgs) -> Result<MeasurementSet> {
    let bound = |x: Option<f64>, old: NoiseBound| -> Result<NoiseBound> {
        x.map_or(Ok(old), |x| NoiseBound::new(x).map_err(input_err))
    };
    Ok(match m {
        MeasurementSet::RotationSamples {
            samples,
            bound: old,
        } => MeasurementSet::RotationSamples {
            samples,
            bound: bound(b.beta, old)?,
        },
        MeasurementSet::PointPairs { pairs, bound: old } => MeasurementSet::PointPairs {
            pairs,
            bound: bound(b.beta, old)?,
        },
        MeasurementSet::PointNormalPairs {
            pairs,
            point_bound,
            normal_bound,
        } => MeasurementSet::PointNormalPairs {
            pairs,
            point_bound: bound(b.beta, point_bound)?,
            normal_bound: bound(b.beta_normal, normal_bound)?,
        },
        MeasurementSet::Camera2D3D {
            correspondences,
            bound: old,
        } => MeasurementSet::Camera2D3D {
            correspondences,
            bound: bound(b.beta, old)?,
        },
    })
}

fn selection_json(s: &InlierSelection) -> Value {
    json!({
        "mode": s.mode.name(),
        "exact": s.exact,
        "clique_number": s.clique_number,
        "size": s.len(),
        "vertices": s.vertices,
    })
}

fn run_prune(a: &PruneArgs) -> Result<()> {
    let file = parse_measurement_file(&read_text(&a.input)?).map_err(input_err)?;
    let m = with_bounds(file.measurements, &a.bounds)?;
    let (selection, graph) = prune(
        &m,
        a.select.mode.into(),
        &a.select.subset_budget(a.seed),
        a.select.time_budget(),
    );
    let mut v = selection_json(&selection);
    v["problem"] = json!(m.kind().name());
    v["n_measurements"] = json!(m.len());
    v["graph_sampled"] = json!(graph.is_some_and(|g| g.sampled()));
    emit(&a.out, &pretty(&v))
}

fn run_graph(a: &GraphArgs) -> Result<()> {
    let file = parse_measurement_file(&read_text(&a.input)?).map_err(input_err)?;
    let m = with_bounds(file.measurements, &a.bounds)?;
    let select = SelectArgs {
        mode: Mode::Clique,
        budget: a.budget,
        time_budget_ms: None,
    };
    let g = build_graph(&m, &select.subset_budget(a.seed)).map_err(|e| match e {
        GraphError::TooFewMeasurements { .. } => input_err(e),
        e => CliError::Io(e.to_string()),
    })?;
    emit(&a.out, &write_edge_list(&g))
}

fn experiment_spec(problem: ProblemKind, g: &GenArgs) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::defaults(problem);
    if let Some(n) = g.n {
        spec.n_measurements = n;
    }
    spec.outlier_rate = g.outlier_rate;
    if let Some(s) = g.sigma {
        spec.noise_sigma = s;
    }
    if let Some(s) = g.sigma_normal {
        spec.normal_noise_sigma = s;
    }
    if let Some(b) = g.bounds.beta {
        spec.noise_bound = b;
    }
    if let Some(b) = g.bounds.beta_normal {
        spec.normal_noise_bound = b;
    }
    spec.rng_seed = g.seed;
    if let Some(path) = &g.points_file {
        let mut points = parse_points(&read_text(path)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        fit_unit_cube(&mut points);
        if g.n.is_none() {
            spec.n_measurements = points.len();
        }
        if spec.n_measurements > points.len() {
            return Err(CliError::Input(format!(
                "{} holds {} points, {} measurements requested",
                path.display(),
                points.len(),
                spec.n_measurements
            )));
        }
        spec.source = PointSource::Cloud(Arc::new(points));
    }
    spec.validate().map_err(input_err)?;
    Ok(spec)
}

fn estimate_json(e: &Estimate) -> Value {
    match e {
        Estimate::Rotation(r) => json!({ "rotation": r.to_row_major() }),
        Estimate::Transform(x) => json!({
            "rotation": x.rotation.to_row_major(),
            "translation": [x.translation.x, x.translation.y, x.translation.z],
        }),
        Estimate::NotApplicable => Value::Null,
        Estimate::Failed(msg) => json!({ "failed": msg }),
    }
}

/// JSON numbers cannot be NaN; a missing error is written as null.
fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn metrics_json(m: &RunMetrics, success: Option<bool>, timing: bool) -> Value {
    let mut v = json!({
        "rot_err_deg": finite(m.rotation_error_deg),
        "trans_err": finite(m.translation_error),
        "inliers_preserved_pct": m.inliers_preserved_pct,
        "outliers_rejected_pct": m.outliers_rejected_pct,
        "inlier_rate_pct": m.inlier_rate_in_selection_pct,
        "success": success,
    });
    if timing {
        v["prune_ms"] = json!(m.prune_time_ms);
        v["solve_ms"] = json!(m.solve_time_ms);
    }
    v
}

fn run_json(
    m: &MeasurementSet,
    cfg: &PipelineConfig,
    out: &PipelineOutput,
    scored: Option<(&Instance, &SuccessThresholds)>,
    timing: bool,
) -> Value {
    let mut v = json!({
        "problem": m.kind().name(),
        "n_measurements": m.len(),
        "solver": cfg.solver.name(),
        "selection": selection_json(&out.selection),
        "graph_sampled": out.graph_sampled,
        "estimate": estimate_json(&out.estimate),
        "gnc_converged": out.gnc_converged,
    });
    if timing {
        v["prune_ms"] = json!(out.prune_time.as_secs_f64() * 1e3);
        v["solve_ms"] = json!(out.solve_time.as_secs_f64() * 1e3);
    }
    if let Some((instance, th)) = scored {
        let metrics = evaluate(instance, out);
        v["metrics"] = metrics_json(&metrics, th.judge(m.kind(), &metrics), timing);
    }
    v
}

fn pipeline_config(a: &PipelineArgs) -> PipelineConfig {
    PipelineConfig {
        mode: a.select.mode.into(),
        solver: a.solver.into(),
        budget: a.select.subset_budget(a.gen.seed),
        time_budget: a.select.time_budget(),
    }
}

fn run_pipeline_file(a: &PipelineArgs, path: &Path, accepts: &[ProblemKind]) -> Result<()> {
    let file = parse_measurement_file(&read_text(path)?).map_err(input_err)?;
    let m = with_bounds(file.measurements, &a.gen.bounds)?;
    if !accepts.contains(&m.kind()) {
        return Err(CliError::Input(format!(
            "{}: holds {} measurements, expected {}",
            path.display(),
            m.kind().name(),
            accepts
                .iter()
                .map(|k| k.name())
                .collect::<Vec<_>>()
                .join(" or ")
        )));
    }
    let cfg = pipeline_config(a);
    let out = run_pipeline(&m, &cfg);
    let th = a.report.thresholds();
    let timing = !a.report.no_timing;
    let instance = file.inlier_mask.map(|mask| Instance {
        measurements: m.clone(),
        inlier_mask: mask,
        ground_truth: file.ground_truth.unwrap_or(GroundTruth::None),
    });
    match a.report.format {
        Format::Json => {
            let v = run_json(&m, &cfg, &out, instance.as_ref().map(|i| (i, &th)), timing);
            emit(&a.report.out, &pretty(&v))
        }
        Format::Csv => {
            let instance = instance.ok_or_else(|| {
                CliError::Input(format!(
                    "{}: CSV output needs an \"inliers\" field to score against",
                    path.display()
                ))
            })?;
            let record = RunRecord {
                problem: m.kind(),
                mode: cfg.mode,
                solver: cfg.solver,
                outlier_rate: instance.inlier_mask.iter().filter(|&&x| !x).count() as f64
                    / m.len() as f64,
                seed: 0,
                metrics: evaluate(&instance, &out),
            };
            emit(&a.report.out, &records_to_csv(&[record], &th, timing))
        }
    }
}

fn run_pipeline_synthetic(a: &PipelineArgs, problem: ProblemKind) -> Result<()> {
    let mut spec = experiment_spec(problem, &a.gen)?;
    spec.n_runs = a.runs;
    spec.mode = a.select.mode.into();
    spec.solver = a.solver.into();
    spec.budget = a.select.subset_budget(a.gen.seed);
    spec.time_budget = a.select.time_budget();
    spec.validate().map_err(input_err)?;
    let th = a.report.thresholds();
    let timing = !a.report.no_timing;
    match a.report.format {
        Format::Csv => {
            let records = run_experiment(&spec).map_err(input_err)?;
            emit(&a.report.out, &records_to_csv(&records, &th, timing))
        }
        Format::Json => {
            let cfg = PipelineConfig::from_spec(&spec);
            let runs: Vec<Value> = (0..spec.n_runs as u64)
                .map(|k| {
                    let seed = spec.rng_seed.wrapping_add(k);
                    let instance = generate(&spec, seed);
                    let out = run_pipeline(&instance.measurements, &cfg);
                    let mut v = run_json(
                        &instance.measurements,
                        &cfg,
                        &out,
                        Some((&instance, &th)),
                        timing,
                    );
                    v["seed"] = json!(seed);
                    v["outlier_rate"] = json!(spec.outlier_rate);
                    v
                })
                .collect();
            emit(&a.report.out, &pretty(&Value::Array(runs)))
        }
    }
}

fn run_problem(a: &PipelineArgs, problem: ProblemKind, accepts: &[ProblemKind]) -> Result<()> {
    match &a.input {
        Some(path) => run_pipeline_file(a, path, accepts),
        None => run_pipeline_synthetic(a, problem),
    }
}

fn run_bench(a: &BenchArgs) -> Result<()> {
    let mut spec = experiment_spec(a.problem.into(), &a.gen)?;
    spec.n_runs = a.runs;
    spec.mode = a.select.mode.into();
    spec.solver = a.solver.into();
    spec.budget = a.select.subset_budget(a.gen.seed);
    spec.time_budget = a.select.time_budget();
    spec.validate().map_err(input_err)?;
    let records = bench(&spec, &a.outlier_rates).map_err(input_err)?;
    let th = SuccessThresholds {
        rotation_deg: a.success_rot_deg,
        translation: a.success_trans,
    };
    let timing = !a.no_timing;
    let text = match a.format {
        Format::Csv => records_to_csv(&records, &th, timing),
        Format::Json => {
            let rows: Vec<Value> = records
                .iter()
                .map(|r| {
                    let mut v = metrics_json(&r.metrics, th.judge(r.problem, &r.metrics), timing);
                    v["problem"] = json!(r.problem.name());
                    v["mode"] = json!(r.mode.name());
                    v["solver"] = json!(r.solver.name());
                    v["outlier_rate"] = json!(r.outlier_rate);
                    v["seed"] = json!(r.seed);
                    v
                })
                .collect();
            pretty(&Value::Array(rows))
        }
    };
    emit(&a.out, &text)
}

fn run_generate(a: &GenerateArgs) -> Result<()> {
    let spec = experiment_spec(a.problem.into(), &a.gen)?;
    let instance = generate(&spec, spec.rng_seed);
    emit(&a.out, &pretty(&instance_json(&instance)))
}

fn run(cli: &Cli) -> Result<()> {
    use ProblemKind::*;
    match &cli.command {
        Command::Prune(a) => run_prune(a),
        Command::Graph(a) => run_graph(a),
        Command::Rotavg(a) => run_problem(a, RotationAveraging, &[RotationAveraging]),
        Command::Register(a) => {
            let problem = if a.normals {
                RegistrationNormals
            } else {
                Registration
            };
            run_problem(&a.pipeline, problem, &[Registration, RegistrationNormals])
        }
        Command::Crossratio(a) => run_problem(a, CrossRatio, &[CrossRatio]),
        Command::Bench(a) => run_bench(a),
        Command::Generate(a) => run_generate(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
