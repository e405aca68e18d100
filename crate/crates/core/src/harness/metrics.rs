use std::fmt::Write;

use rayon::prelude::*;

use super::pipeline::{run_pipeline, Estimate, PipelineConfig, PipelineOutput};
use super::{generate, ExperimentSpec, GroundTruth, Instance, SolverKind};
use crate::error::InputError;
use crate::geometry::geodesic_distance;
use crate::invariants::ProblemKind;
use crate::select::SelectionMode;

pub const CSV_HEADER: &str = "problem,mode,solver,outlier_rate,seed,rot_err_deg,trans_err,\
inliers_preserved_pct,outliers_rejected_pct,inlier_rate_pct,prune_ms,solve_ms,success";

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    /// NaN when there is no rotation estimate.
    pub rotation_error_deg: f64,
    /// NaN when there is no translation estimate.
    pub translation_error: f64,
    pub inliers_preserved_pct: f64,
    pub outliers_rejected_pct: f64,
    pub inlier_rate_in_selection_pct: f64,
    pub prune_time_ms: f64,
    pub solve_time_ms: f64,
    pub selection_size: usize,
}

/// Scores a pipeline run against the instance it was run on.
///
/// With no planted inliers (or outliers) the preserved (rejected) percentage
/// is 100. An empty selection has an inlier rate of 0.
pub fn evaluate(instance: &Instance, output: &PipelineOutput) -> RunMetrics {
    let mask = &instance.inlier_mask;
    let n_in = mask.iter().filter(|&&m| m).count();
    let n_out = mask.len() - n_in;
    let sel = &output.selection.vertices;
    let kept_in = sel.iter().filter(|&&i| mask[i]).count();
    let kept_out = sel.len() - kept_in;
    let pct = |num: usize, den: usize, empty: f64| {
        if den == 0 {
            empty
        } else {
            100.0 * num as f64 / den as f64
        }
    };

    let (rotation_error_deg, translation_error) = match (&output.estimate, &instance.ground_truth) {
        (Estimate::Rotation(r), GroundTruth::Rotation(t)) => {
            (geodesic_distance(r, t).to_degrees(), f64::NAN)
        }
        (Estimate::Transform(x), GroundTruth::Transform(t)) => (
            geodesic_distance(&x.rotation, &t.rotation).to_degrees(),
            (x.translation - t.translation).norm(),
        ),
        _ => (f64::NAN, f64::NAN),
    };
    RunMetrics {
        rotation_error_deg,
        translation_error,
        inliers_preserved_pct: pct(kept_in, n_in, 100.0),
        outliers_rejected_pct: pct(n_out - kept_out, n_out, 100.0),
        inlier_rate_in_selection_pct: pct(kept_in, sel.len(), 0.0),
        prune_time_ms: output.prune_time.as_secs_f64() * 1e3,
        solve_time_ms: output.solve_time.as_secs_f64() * 1e3,
        selection_size: sel.len(),
    }
}

/// Rotation and translation limits for a successful run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessThresholds {
    pub rotation_deg: f64,
    pub translation: f64,
}

impl Default for SuccessThresholds {
    fn default() -> Self {
        SuccessThresholds {
            rotation_deg: 15.0,
            translation: 0.30,
        }
    }
}

impl SuccessThresholds {
    /// None for problems without an estimate. A missing estimate fails.
    pub fn judge(&self, problem: ProblemKind, m: &RunMetrics) -> Option<bool> {
        let rot_ok = m.rotation_error_deg <= self.rotation_deg;
        match problem {
            ProblemKind::CrossRatio => None,
            ProblemKind::RotationAveraging => Some(rot_ok),
            _ => Some(rot_ok && m.translation_error <= self.translation),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub problem: ProblemKind,
    pub mode: SelectionMode,
    pub solver: SolverKind,
    pub outlier_rate: f64,
    pub seed: u64,
    pub metrics: RunMetrics,
}

/// Runs `spec.n_runs` independent instances with seeds rng_seed, rng_seed + 1, ...
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<RunRecord>, InputError> {
    spec.validate()?;
    let cfg = PipelineConfig::from_spec(spec);
    let records = (0..spec.n_runs as u64)
        .into_par_iter()
        .map(|k| {
            let seed = spec.rng_seed.wrapping_add(k);
            let instance = generate(spec, seed);
            let output = run_pipeline(&instance.measurements, &cfg);
            RunRecord {
                problem: spec.problem,
                mode: spec.mode,
                solver: spec.solver,
                outlier_rate: spec.outlier_rate,
                seed,
                metrics: evaluate(&instance, &output),
            }
        })
        .collect();
    Ok(records)
}

/// Monte Carlo sweep over outlier rates; rows sorted by (rate, seed).
pub fn bench(spec: &ExperimentSpec, outlier_rates: &[f64]) -> Result<Vec<RunRecord>, InputError> {
    let mut records = Vec::new();
    for &rate in outlier_rates {
        let mut s = spec.clone();
        s.outlier_rate = rate;
        records.extend(run_experiment(&s)?);
    }
    records.sort_by(|a, b| {
        a.outlier_rate
            .total_cmp(&b.outlier_rate)
            .then(a.seed.cmp(&b.seed))
    });
    Ok(records)
}

fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.6}")
    }
}

/// CSV with [`CSV_HEADER`]. Without `timing` the time columns are written as
/// 0 so that repeated runs produce identical files.
pub fn records_to_csv(
    records: &[RunRecord],
    thresholds: &SuccessThresholds,
    timing: bool,
) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let m = &r.metrics;
        let (prune, solve) = if timing {
            (fmt_f(m.prune_time_ms), fmt_f(m.solve_time_ms))
        } else {
            ("0".into(), "0".into())
        };
        let success = match thresholds.judge(r.problem, m) {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.problem.name(),
            r.mode.name(),
            r.solver.name(),
            r.outlier_rate,
            r.seed,
            fmt_f(m.rotation_error_deg),
            fmt_f(m.translation_error),
            fmt_f(m.inliers_preserved_pct),
            fmt_f(m.outliers_rejected_pct),
            fmt_f(m.inlier_rate_in_selection_pct),
            prune,
            solve,
            success
        )
        .expect("writing to a String");
    }
    out
}
