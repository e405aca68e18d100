//! Experiment harness: synthetic generators, the prune → solve pipeline,
//! metrics, Monte Carlo sweeps, and file formats.

pub mod gen;
pub mod io;
mod metrics;
mod pipeline;

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Duration;

use nalgebra::Vector3;

pub use gen::{gen_all_to_all, gen_crossratio, gen_registration, gen_rotavg, generate};
pub use metrics::{
    bench, evaluate, records_to_csv, run_experiment, RunMetrics, RunRecord, SuccessThresholds,
    CSV_HEADER,
};
pub use pipeline::{
    gnc_config_for, pn_config_for, prune, run_pipeline, run_robin, solve, Estimate, PipelineConfig,
    PipelineOutput,
};

use crate::error::InputError;
use crate::geometry::{RigidTransform, Rotation, UnitVector3};
use crate::graph::SubsetBudget;
use crate::invariants::{MeasurementSet, ProblemKind};
use crate::select::SelectionMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Gnc,
    ClosedForm,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Gnc => "gnc",
            SolverKind::ClosedForm => "closed-form",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "gnc" => Some(SolverKind::Gnc),
            "closed-form" | "closed_form" => Some(SolverKind::ClosedForm),
            _ => None,
        }
    }
}

/// A source point, optionally with its surface normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourcePoint {
    pub p: Vector3<f64>,
    pub normal: Option<UnitVector3>,
}

/// Where registration source points come from.
#[derive(Debug, Clone, PartialEq)]
pub enum PointSource {
    /// Uniform samples in [0, 1]³.
    UniformCube,
    /// A fixed cloud; the first `n_measurements` points are used.
    Cloud(Arc<Vec<SourcePoint>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub problem: ProblemKind,
    pub n_measurements: usize,
    pub outlier_rate: f64,
    pub noise_sigma: f64,
    /// β of the measurements; radians, length units or pixels.
    pub noise_bound: f64,
    /// Angular noise of normals, radians.
    pub normal_noise_sigma: f64,
    pub normal_noise_bound: f64,
    pub n_runs: usize,
    pub rng_seed: u64,
    pub mode: SelectionMode,
    pub solver: SolverKind,
    pub budget: SubsetBudget,
    pub time_budget: Option<Duration>,
    pub source: PointSource,
}

impl ExperimentSpec {
    /// Default settings of each synthetic experiment.
    ///
    /// Rotation averaging: N = 1000, σ = 5°, β = 7.5°. Registration: N = 1000,
    /// σ = 0.01, β = 5.54σ, with normal noise of the same magnitude in
    /// radians. Cross ratio: N = 100, σ = 0.1 px, β = 0.25 px.
    pub fn defaults(problem: ProblemKind) -> Self {
        let (n, sigma, beta) = match problem {
            ProblemKind::RotationAveraging => (1000, 5f64.to_radians(), 7.5f64.to_radians()),
            ProblemKind::Registration | ProblemKind::RegistrationNormals => {
                (1000, 0.01, 5.54 * 0.01)
            }
            ProblemKind::CrossRatio => (100, 0.1, 0.25),
        };
        ExperimentSpec {
            problem,
            n_measurements: n,
            outlier_rate: 0.5,
            noise_sigma: sigma,
            noise_bound: beta,
            normal_noise_sigma: 0.01,
            normal_noise_bound: 5.54 * 0.01,
            n_runs: 1,
            rng_seed: 0,
            mode: SelectionMode::MaxClique,
            solver: SolverKind::Gnc,
            budget: SubsetBudget::default(),
            time_budget: None,
            source: PointSource::UniformCube,
        }
    }

    pub fn validate(&self) -> Result<(), InputError> {
        let bad = |s: String| Err(InputError::Spec(s));
        if self.n_measurements == 0 {
            return bad("at least one measurement is required".into());
        }
        if !(0.0..1.0).contains(&self.outlier_rate) {
            return bad(format!(
                "outlier rate {} is outside [0, 1)",
                self.outlier_rate
            ));
        }
        if self.n_runs == 0 {
            return bad("at least one run is required".into());
        }
        if !(self.noise_bound > 0.0 && self.noise_bound.is_finite()) {
            return bad(format!("noise bound {} must be positive", self.noise_bound));
        }
        if !(self.normal_noise_bound > 0.0 && self.normal_noise_bound.is_finite()) {
            return bad(format!(
                "normal noise bound {} must be positive",
                self.normal_noise_bound
            ));
        }
        if !(self.noise_sigma >= 0.0) || !(self.normal_noise_sigma >= 0.0) {
            return bad("noise standard deviations must be non-negative".into());
        }
        if self.problem == ProblemKind::RotationAveraging && self.noise_bound > PI {
            return bad("rotation noise bound must not exceed π".into());
        }
        if let PointSource::Cloud(c) = &self.source {
            if c.is_empty() {
                return bad("point cloud is empty".into());
            }
            if self.problem == ProblemKind::RegistrationNormals
                && c.iter().any(|p| p.normal.is_none())
            {
                return bad("registration with normals needs a normal for every point".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruth {
    Rotation(Rotation),
    Transform(RigidTransform),
    /// Problems with no state to estimate (cross ratio).
    None,
}

/// A generated problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub measurements: MeasurementSet,
    pub inlier_mask: Vec<bool>,
    pub ground_truth: GroundTruth,
}

impl Instance {
    pub fn inlier_indices(&self) -> Vec<usize> {
        self.inlier_mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| i)
            .collect()
    }
}
