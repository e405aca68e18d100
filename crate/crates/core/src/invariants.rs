//! Measurement types and the compatibility tests built on their invariants.
//!
//! Every test is sound: a subset made only of inliers (noise norm ≤ β) always
//! passes. A failing test proves the subset holds at least one outlier.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::InvariantError;
use crate::geometry::{geodesic_distance, Rotation, UnitVector3};

/// Maximum noise norm β of an inlier. Radians for rotations and normals,
/// length units for points, pixels for image observations.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct NoiseBound(f64);

impl NoiseBound {
    pub fn new(beta: f64) -> Result<Self, InvariantError> {
        if beta > 0.0 && beta.is_finite() {
            Ok(NoiseBound(beta))
        } else {
            Err(InvariantError::InvalidNoiseBound(beta))
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointPair {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointNormalPair {
    pub a: Vector3<f64>,
    pub ma: UnitVector3,
    pub b: Vector3<f64>,
    pub nb: UnitVector3,
}

/// A 3D point (camera frame, p_z > 0) and its observed pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence2D3D {
    pub p: Vector3<f64>,
    pub y: Vector2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    #[serde(rename = "rotavg")]
    RotationAveraging,
    Registration,
    RegistrationNormals,
    #[serde(rename = "crossratio")]
    CrossRatio,
}

impl ProblemKind {
    /// Invariant arity n.
    pub fn arity(&self) -> usize {
        match self {
            ProblemKind::CrossRatio => 4,
            _ => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::RotationAveraging => "rotavg",
            ProblemKind::Registration => "registration",
            ProblemKind::RegistrationNormals => "registration_normals",
            ProblemKind::CrossRatio => "crossratio",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "rotavg" => Some(ProblemKind::RotationAveraging),
            "registration" => Some(ProblemKind::Registration),
            "registration_normals" => Some(ProblemKind::RegistrationNormals),
            "crossratio" => Some(ProblemKind::CrossRatio),
            _ => None,
        }
    }
}

/// A collection of measurements of one problem type plus its noise bound(s).
#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementSet {
    RotationSamples {
        samples: Vec<Rotation>,
        bound: NoiseBound,
    },
    PointPairs {
        pairs: Vec<PointPair>,
        bound: NoiseBound,
    },
    PointNormalPairs {
        pairs: Vec<PointNormalPair>,
        point_bound: NoiseBound,
        normal_bound: NoiseBound,
    },
    Camera2D3D {
        correspondences: Vec<Correspondence2D3D>,
        bound: NoiseBound,
    },
}

impl MeasurementSet {
    pub fn rotations(samples: Vec<Rotation>, bound: NoiseBound) -> Result<Self, InvariantError> {
        non_empty(samples.len())?;
        Ok(MeasurementSet::RotationSamples { samples, bound })
    }

    pub fn point_pairs(pairs: Vec<PointPair>, bound: NoiseBound) -> Result<Self, InvariantError> {
        non_empty(pairs.len())?;
        if pairs
            .iter()
            .any(|p| !(p.a.iter().chain(p.b.iter()).all(|x| x.is_finite())))
        {
            return Err(InvariantError::InvalidMeasurements(
                "non-finite point coordinate".into(),
            ));
        }
        Ok(MeasurementSet::PointPairs { pairs, bound })
    }

    pub fn point_normal_pairs(
        pairs: Vec<PointNormalPair>,
        point_bound: NoiseBound,
        normal_bound: NoiseBound,
    ) -> Result<Self, InvariantError> {
        non_empty(pairs.len())?;
        Ok(MeasurementSet::PointNormalPairs {
            pairs,
            point_bound,
            normal_bound,
        })
    }

    pub fn camera_2d3d(
        correspondences: Vec<Correspondence2D3D>,
        bound: NoiseBound,
    ) -> Result<Self, InvariantError> {
        non_empty(correspondences.len())?;
        if let Some(i) = correspondences.iter().position(|c| !(c.p.z > 0.0)) {
            return Err(InvariantError::InvalidMeasurements(format!(
                "correspondence {i}: 3D point must have p_z > 0"
            )));
        }
        Ok(MeasurementSet::Camera2D3D {
            correspondences,
            bound,
        })
    }

    pub fn len(&self) -> usize {
        match self {
            MeasurementSet::RotationSamples { samples, .. } => samples.len(),
            MeasurementSet::PointPairs { pairs, .. } => pairs.len(),
            MeasurementSet::PointNormalPairs { pairs, .. } => pairs.len(),
            MeasurementSet::Camera2D3D {
                correspondences, ..
            } => correspondences.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ProblemKind {
        match self {
            MeasurementSet::RotationSamples { .. } => ProblemKind::RotationAveraging,
            MeasurementSet::PointPairs { .. } => ProblemKind::Registration,
            MeasurementSet::PointNormalPairs { .. } => ProblemKind::RegistrationNormals,
            MeasurementSet::Camera2D3D { .. } => ProblemKind::CrossRatio,
        }
    }

    pub fn arity(&self) -> usize {
        self.kind().arity()
    }

    /// Keeps only the measurements at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> MeasurementSet {
        fn pick<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
            idx.iter().map(|&i| v[i].clone()).collect()
        }
        match self {
            MeasurementSet::RotationSamples { samples, bound } => MeasurementSet::RotationSamples {
                samples: pick(samples, indices),
                bound: *bound,
            },
            MeasurementSet::PointPairs { pairs, bound } => MeasurementSet::PointPairs {
                pairs: pick(pairs, indices),
                bound: *bound,
            },
            MeasurementSet::PointNormalPairs {
                pairs,
                point_bound,
                normal_bound,
            } => MeasurementSet::PointNormalPairs {
                pairs: pick(pairs, indices),
                point_bound: *point_bound,
                normal_bound: *normal_bound,
            },
            MeasurementSet::Camera2D3D {
                correspondences,
                bound,
            } => MeasurementSet::Camera2D3D {
                correspondences: pick(correspondences, indices),
                bound: *bound,
            },
        }
    }

    /// Runs the compatibility test on one subset of size `self.arity()`.
    ///
    /// Indices are used in the order given. Subsets of 2D-3D correspondences
    /// whose 3D points are degenerate (not collinear, coincident) carry no
    /// invariant and pass.
    pub fn subset_compatible(&self, idx: &[usize]) -> bool {
        assert_eq!(idx.len(), self.arity(), "subset size must match arity");
        match self {
            MeasurementSet::RotationSamples { samples, bound } => {
                rotation_pair_compatible(&samples[idx[0]], &samples[idx[1]], *bound)
            }
            MeasurementSet::PointPairs { pairs, bound } => {
                let (pi, pj) = (&pairs[idx[0]], &pairs[idx[1]]);
                point_pair_compatible(&pi.a, &pj.a, &pi.b, &pj.b, *bound)
            }
            MeasurementSet::PointNormalPairs {
                pairs,
                point_bound,
                normal_bound,
            } => point_normal_pair_compatible(
                &pairs[idx[0]],
                &pairs[idx[1]],
                *point_bound,
                *normal_bound,
            ),
            MeasurementSet::Camera2D3D {
                correspondences: c,
                bound,
            } => {
                let (c1, c2, c3, c4) = (&c[idx[0]], &c[idx[1]], &c[idx[2]], &c[idx[3]]);
                match cross_ratio_3d(&c1.p, &c2.p, &c3.p, &c4.p) {
                    Ok(tau) => cross_ratio_compatible(&c1.y, &c2.y, &c3.y, &c4.y, tau, *bound),
                    Err(_) => true,
                }
            }
        }
    }
}

fn non_empty(n: usize) -> Result<(), InvariantError> {
    if n == 0 {
        Err(InvariantError::InvalidMeasurements(
            "at least one measurement is required".into(),
        ))
    } else {
        Ok(())
    }
}

/// Two rotation samples of the same unknown are compatible iff their relative
/// rotation angle is at most 2β.
pub fn rotation_pair_compatible(r_i: &Rotation, r_j: &Rotation, bound: NoiseBound) -> bool {
    geodesic_distance(r_i, r_j) <= 2.0 * bound.value()
}

/// Pairwise distances must agree across the two clouds up to 2β.
pub fn point_pair_compatible(
    a_i: &Vector3<f64>,
    a_j: &Vector3<f64>,
    b_i: &Vector3<f64>,
    b_j: &Vector3<f64>,
    bound: NoiseBound,
) -> bool {
    distances_compatible((a_j - a_i).norm(), (b_j - b_i).norm(), bound.value())
}

#[inline]
pub(crate) fn distances_compatible(da: f64, db: f64, beta: f64) -> bool {
    (db - da).abs() <= 2.0 * beta
}

pub fn point_normal_pair_compatible(
    pair_i: &PointNormalPair,
    pair_j: &PointNormalPair,
    point_bound: NoiseBound,
    normal_bound: NoiseBound,
) -> bool {
    point_pair_compatible(&pair_i.a, &pair_j.a, &pair_i.b, &pair_j.b, point_bound)
        && normal_angles_compatible(
            pair_i.ma.dot(&pair_j.ma),
            pair_i.nb.dot(&pair_j.nb),
            NormalThreshold::new(normal_bound),
        )
}

/// cos(2β_n), computed once per measurement set.
#[derive(Debug, Clone, Copy)]
pub struct NormalThreshold {
    cos_2beta: f64,
    vacuous: bool,
}

impl NormalThreshold {
    pub fn new(bound: NoiseBound) -> Self {
        let two_beta = 2.0 * bound.value();
        NormalThreshold {
            cos_2beta: two_beta.cos(),
            vacuous: two_beta >= PI,
        }
    }
}

/// |arccos(c_b) − arccos(c_a)| ≤ 2β_n without trigonometric calls.
///
/// Uses 2cos(2β)·c_a·c_b + 1 − c_a² − c_b² ≥ cos²(2β), which is only valid once
/// cos(2β) − c_a·c_b > 0; otherwise the condition already holds.
pub fn normal_angles_compatible(c_a: f64, c_b: f64, threshold: NormalThreshold) -> bool {
    if threshold.vacuous {
        return true;
    }
    let c_a = c_a.clamp(-1.0, 1.0);
    let c_b = c_b.clamp(-1.0, 1.0);
    let c = threshold.cos_2beta;
    if c - c_a * c_b <= 0.0 {
        return true;
    }
    2.0 * c * c_a * c_b + 1.0 - c_a * c_a - c_b * c_b >= c * c
}

/// Perspective normalization [p_x/p_z, p_y/p_z].
pub fn vee_projection(p: &Vector3<f64>) -> Vector2<f64> {
    Vector2::new(p.x / p.z, p.y / p.z)
}

/// Collinearity residual allowed after the line fit, scaled by max(1, extent).
pub const COLLINEARITY_TOLERANCE: f64 = 1e-6;

/// Minimum distance accepted in a cross-ratio denominator.
pub const CROSS_RATIO_MIN_DISTANCE: f64 = 1e-12;

/// Largest perpendicular distance of `points` from their total-least-squares
/// line, and the extent of the points along it.
pub fn line_fit_residual(points: &[Vector3<f64>]) -> (f64, f64) {
    if points.len() < 2 {
        return (0.0, 0.0);
    }
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vector3::zeros(), |acc, p| acc + p) / n;
    let cov = points.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p - centroid;
        acc + d * d.transpose()
    });
    let eig = SymmetricEigen::new(cov);
    let k = eig.eigenvalues.imax();
    let dir = eig.eigenvectors.column(k).into_owned();
    let mut residual: f64 = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        let d = p - centroid;
        let s = d.dot(&dir);
        residual = residual.max((d - s * dir).norm());
        lo = lo.min(s);
        hi = hi.max(s);
    }
    (residual, hi - lo)
}

pub fn points_collinear(points: &[Vector3<f64>]) -> bool {
    let (residual, extent) = line_fit_residual(points);
    residual < COLLINEARITY_TOLERANCE * extent.max(1.0)
}

/// Cross ratio of four collinear 3D points after perspective normalization.
pub fn cross_ratio_3d(
    p1: &Vector3<f64>,
    p2: &Vector3<f64>,
    p3: &Vector3<f64>,
    p4: &Vector3<f64>,
) -> Result<f64, InvariantError> {
    if [p1, p2, p3, p4].iter().any(|p| !(p.z > 0.0)) {
        return Err(InvariantError::DegenerateSubset("point behind the camera"));
    }
    if !points_collinear(&[*p1, *p2, *p3, *p4]) {
        return Err(InvariantError::DegenerateSubset("points are not collinear"));
    }
    let v = [
        vee_projection(p1),
        vee_projection(p2),
        vee_projection(p3),
        vee_projection(p4),
    ];
    cross_ratio_from_distances(
        (v[0] - v[1]).norm(),
        (v[2] - v[3]).norm(),
        (v[0] - v[2]).norm(),
        (v[1] - v[3]).norm(),
    )
}

/// τ = d12·d34 / (d13·d24).
pub(crate) fn cross_ratio_from_distances(
    d12: f64,
    d34: f64,
    d13: f64,
    d24: f64,
) -> Result<f64, InvariantError> {
    if !(d13 >= CROSS_RATIO_MIN_DISTANCE && d24 >= CROSS_RATIO_MIN_DISTANCE) {
        return Err(InvariantError::DegenerateSubset(
            "coincident points in cross-ratio denominator",
        ));
    }
    Ok(d12 * d34 / (d13 * d24))
}

/// Pixel-space bounds (L, U) that any inlier quadruple's cross ratio lies in.
///
/// L drops to 0 when a numerator factor is non-positive and U rises to +∞ when
/// a denominator factor is non-positive.
pub fn cross_ratio_bounds(
    y1: &Vector2<f64>,
    y2: &Vector2<f64>,
    y3: &Vector2<f64>,
    y4: &Vector2<f64>,
    bound: NoiseBound,
) -> (f64, f64) {
    cross_ratio_bounds_from_distances(
        (y1 - y2).norm(),
        (y3 - y4).norm(),
        (y1 - y3).norm(),
        (y2 - y4).norm(),
        bound.value(),
    )
}

#[inline]
pub(crate) fn cross_ratio_bounds_from_distances(
    y12: f64,
    y34: f64,
    y13: f64,
    y24: f64,
    beta: f64,
) -> (f64, f64) {
    let two_beta = 2.0 * beta;
    let (n1, n2) = (y12 - two_beta, y34 - two_beta);
    let lower = if n1 <= 0.0 || n2 <= 0.0 {
        0.0
    } else {
        n1 * n2 / ((y13 + two_beta) * (y24 + two_beta))
    };
    let (d1, d2) = (y13 - two_beta, y24 - two_beta);
    let upper = if d1 <= 0.0 || d2 <= 0.0 {
        f64::INFINITY
    } else {
        (y12 + two_beta) * (y34 + two_beta) / (d1 * d2)
    };
    (lower, upper)
}

/// Passes iff L < τ < U.
pub fn cross_ratio_compatible(
    y1: &Vector2<f64>,
    y2: &Vector2<f64>,
    y3: &Vector2<f64>,
    y4: &Vector2<f64>,
    tau: f64,
    bound: NoiseBound,
) -> bool {
    let (lower, upper) = cross_ratio_bounds(y1, y2, y3, y4, bound);
    lower < tau && tau < upper
}
