use std::time::{Duration, Instant};

use super::{ExperimentSpec, SolverKind};
use crate::error::GraphError;
use crate::estimate::{
    gnc_tls, horn_registration, point_normal_registration, rotation_mean_chordal, GncConfig,
    PnConfig, PointNormalProblem, PointRegistrationProblem, RotationAveragingProblem, WeightVector,
};
use crate::geometry::{RigidTransform, Rotation};
use crate::graph::{build_graph, CompatGraph, SubsetBudget};
use crate::invariants::MeasurementSet;
use crate::select::{
    core_decomposition, max_clique_from, max_kcore_from, InlierSelection, SelectionMode,
};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub mode: SelectionMode,
    pub solver: SolverKind,
    pub budget: SubsetBudget,
    pub time_budget: Option<Duration>,
}

impl PipelineConfig {
    pub fn from_spec(spec: &ExperimentSpec) -> Self {
        PipelineConfig {
            mode: spec.mode,
            solver: spec.solver,
            budget: spec.budget,
            time_budget: spec.time_budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Estimate {
    Rotation(Rotation),
    Transform(RigidTransform),
    /// The problem has no downstream estimator.
    NotApplicable,
    /// The solver could not produce an estimate from the selection.
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub selection: InlierSelection,
    pub estimate: Estimate,
    pub prune_time: Duration,
    pub solve_time: Duration,
    /// Whether the graph was built from a sample of subsets.
    pub graph_sampled: bool,
    /// Set when GNC ran.
    pub gnc_converged: Option<bool>,
}

/// Builds the compatibility graph and selects inliers from it. When there
/// are fewer measurements than the invariant needs, every index is returned.
pub fn run_robin(
    measurements: &MeasurementSet,
    mode: SelectionMode,
    budget: &SubsetBudget,
    time_budget: Option<Duration>,
) -> InlierSelection {
    prune(measurements, mode, budget, time_budget).0
}

/// [`run_robin`] that also returns the graph it selected from, if one was built.
pub fn prune(
    measurements: &MeasurementSet,
    mode: SelectionMode,
    budget: &SubsetBudget,
    time_budget: Option<Duration>,
) -> (InlierSelection, Option<CompatGraph>) {
    let n = measurements.len();
    if mode == SelectionMode::Unpruned {
        return (InlierSelection::all(n), None);
    }
    let graph = match build_graph(measurements, budget) {
        Ok(g) => g,
        Err(GraphError::TooFewMeasurements { .. }) => return (InlierSelection::all(n), None),
        Err(e) => unreachable!("graph build on validated measurements failed: {e}"),
    };
    let cores = core_decomposition(&graph);
    let selection = match mode {
        SelectionMode::MaxClique => max_clique_from(&graph, &cores, time_budget),
        _ => max_kcore_from(&cores),
    };
    (selection, Some(graph))
}

/// Threshold ζ used by GNC for each problem.
///
/// Rotations and points use β in residual units. Point-normal residuals are
/// normalized by both noise bounds, so an inlier has r² ≤ 2 and ζ = √2.
pub fn gnc_config_for(measurements: &MeasurementSet) -> GncConfig {
    match measurements {
        MeasurementSet::RotationSamples { bound, .. }
        | MeasurementSet::PointPairs { bound, .. } => GncConfig::new(bound.value()),
        MeasurementSet::PointNormalPairs { .. } => GncConfig::new(std::f64::consts::SQRT_2),
        MeasurementSet::Camera2D3D { bound, .. } => GncConfig::new(bound.value()),
    }
}

/// η = 1/β², κ = 1/β_n² (ρ = 1).
pub fn pn_config_for(n: usize, point_bound: f64, normal_bound: f64) -> PnConfig {
    PnConfig::uniform(n, point_bound, normal_bound, 1.0).expect("noise bounds are positive")
}

/// Runs the downstream estimator on the selected measurements.
pub fn solve(
    measurements: &MeasurementSet,
    selection: &[usize],
    solver: SolverKind,
) -> (Estimate, Option<bool>) {
    let failed = |e: crate::error::SolveError| (Estimate::Failed(e.to_string()), None);
    let picked = measurements.subset(selection);
    let gnc = gnc_config_for(&picked);
    let n = picked.len();
    if n == 0 {
        return (Estimate::Failed("empty selection".into()), None);
    }
    match (&picked, solver) {
        (MeasurementSet::RotationSamples { samples, .. }, SolverKind::ClosedForm) => {
            match rotation_mean_chordal(samples, &WeightVector::ones(n)) {
                Ok(r) => (Estimate::Rotation(r), None),
                Err(e) => failed(e),
            }
        }
        (MeasurementSet::RotationSamples { samples, .. }, SolverKind::Gnc) => {
            match gnc_tls(&RotationAveragingProblem { samples }, &gnc) {
                Ok(out) => (Estimate::Rotation(out.estimate), Some(out.converged)),
                Err(e) => failed(e),
            }
        }
        (MeasurementSet::PointPairs { pairs, .. }, SolverKind::ClosedForm) => {
            match horn_registration(pairs, &WeightVector::ones(n)) {
                Ok(x) => (Estimate::Transform(x), None),
                Err(e) => failed(e),
            }
        }
        (MeasurementSet::PointPairs { pairs, .. }, SolverKind::Gnc) => {
            match gnc_tls(&PointRegistrationProblem { pairs }, &gnc) {
                Ok(out) => (Estimate::Transform(out.estimate), Some(out.converged)),
                Err(e) => failed(e),
            }
        }
        (
            MeasurementSet::PointNormalPairs {
                pairs,
                point_bound,
                normal_bound,
            },
            solver,
        ) => {
            let cfg = pn_config_for(n, point_bound.value(), normal_bound.value());
            if solver == SolverKind::ClosedForm {
                match point_normal_registration(pairs, &WeightVector::ones(n), &cfg) {
                    Ok(x) => (Estimate::Transform(x), None),
                    Err(e) => failed(e),
                }
            } else {
                match gnc_tls(&PointNormalProblem { pairs, cfg }, &gnc) {
                    Ok(out) => (Estimate::Transform(out.estimate), Some(out.converged)),
                    Err(e) => failed(e),
                }
            }
        }
        (MeasurementSet::Camera2D3D { .. }, _) => (Estimate::NotApplicable, None),
    }
}

/// Prune, then solve on the selection.
pub fn run_pipeline(measurements: &MeasurementSet, cfg: &PipelineConfig) -> PipelineOutput {
    let start = Instant::now();
    let (selection, graph) = prune(measurements, cfg.mode, &cfg.budget, cfg.time_budget);
    let prune_time = start.elapsed();
    let start = Instant::now();
    let (estimate, gnc_converged) = solve(measurements, &selection.vertices, cfg.solver);
    let solve_time = start.elapsed();
    PipelineOutput {
        selection,
        estimate,
        prune_time,
        solve_time,
        graph_sampled: graph.is_some_and(|g| g.sampled()),
        gnc_converged,
    }
}
