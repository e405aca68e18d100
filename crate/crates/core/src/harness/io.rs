//! Measurement files (JSON) and point clouds (whitespace text).
//!
//! A measurement file looks like
//! `{"problem": "registration", "beta": 0.05, "measurements": [{"a": [..], "b": [..]}, ...]}`.
//! Rotations are row-major 9-element arrays; point pairs are `{"a","b"}`;
//! point-normal pairs add unit normals `"ma"` and `"nb"` and need
//! `"beta_normal"`; 2D-3D correspondences are `{"p": [x,y,z], "y": [u,v]}`.
//! Optional `"ground_truth"` (`{"rotation": [9], "translation": [3]}`) and
//! `"inliers"` (one boolean per measurement) enable evaluation.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde_json::{json, Map, Value};

use super::{GroundTruth, Instance, SourcePoint};
use crate::error::InputError;
use crate::geometry::{project_to_so3, RigidTransform, Rotation, UnitVector3};
use crate::invariants::{
    Correspondence2D3D, MeasurementSet, NoiseBound, PointNormalPair, PointPair, ProblemKind,
};

/// Rotations and normals read from files may deviate from exact by this much
/// before being re-normalized.
pub const INPUT_TOLERANCE: f64 = 1e-6;

/// A parsed measurement file.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementFile {
    pub measurements: MeasurementSet,
    pub ground_truth: Option<GroundTruth>,
    pub inlier_mask: Option<Vec<bool>>,
}

fn field_err(path: impl Into<String>, reason: impl Into<String>) -> InputError {
    InputError::Field {
        path: path.into(),
        reason: reason.into(),
    }
}

fn numbers<const K: usize>(v: &Value, path: &str) -> Result<[f64; K], InputError> {
    let arr = v
        .as_array()
        .ok_or_else(|| field_err(path, format!("expected an array of {K} numbers")))?;
    if arr.len() != K {
        return Err(field_err(
            path,
            format!("expected {K} numbers, found {}", arr.len()),
        ));
    }
    let mut out = [0.0; K];
    for (k, (slot, x)) in out.iter_mut().zip(arr).enumerate() {
        *slot = x
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| field_err(format!("{path}[{k}]"), "expected a finite number"))?;
    }
    Ok(out)
}

fn member<'a>(obj: &'a Value, key: &str, path: &str) -> Result<&'a Value, InputError> {
    obj.get(key)
        .ok_or_else(|| field_err(format!("{path}.{key}"), "missing field"))
}

fn vec3(obj: &Value, key: &str, path: &str) -> Result<Vector3<f64>, InputError> {
    let p = format!("{path}.{key}");
    Ok(Vector3::from(numbers::<3>(member(obj, key, path)?, &p)?))
}

fn unit3(obj: &Value, key: &str, path: &str) -> Result<UnitVector3, InputError> {
    let v = vec3(obj, key, path)?;
    if (v.norm() - 1.0).abs() > INPUT_TOLERANCE {
        return Err(field_err(
            format!("{path}.{key}"),
            format!("expected a unit vector, norm is {}", v.norm()),
        ));
    }
    UnitVector3::new_normalize(v).map_err(|e| field_err(format!("{path}.{key}"), e.to_string()))
}

fn rotation(v: &Value, path: &str) -> Result<Rotation, InputError> {
    let m = numbers::<9>(v, path)?;
    let m = Matrix3::from_row_slice(&m);
    Rotation::from_matrix_with_tolerance(m, INPUT_TOLERANCE)
        .and_then(|r| project_to_so3(r.matrix()))
        .map_err(|e| field_err(path, e.to_string()))
}

fn positive(root: &Value, key: &str) -> Result<NoiseBound, InputError> {
    let x = root
        .get(key)
        .ok_or_else(|| field_err(key, "missing field"))?
        .as_f64()
        .ok_or_else(|| field_err(key, "expected a number"))?;
    NoiseBound::new(x).map_err(|e| field_err(key, e.to_string()))
}

pub fn parse_measurement_file(text: &str) -> Result<MeasurementFile, InputError> {
    let root: Value = serde_json::from_str(text).map_err(|e| InputError::Json(e.to_string()))?;
    if !root.is_object() {
        return Err(field_err("$", "expected a JSON object"));
    }
    let name = member(&root, "problem", "$")
        .map_err(|_| field_err("problem", "missing field"))?
        .as_str()
        .ok_or_else(|| field_err("problem", "expected a string"))?;
    let problem = ProblemKind::from_name(name).ok_or_else(|| {
        field_err(
            "problem",
            format!(
                "unknown problem '{name}' (rotavg, registration, registration_normals, crossratio)"
            ),
        )
    })?;
    let beta = positive(&root, "beta")?;
    let items = root
        .get("measurements")
        .ok_or_else(|| field_err("measurements", "missing field"))?
        .as_array()
        .ok_or_else(|| field_err("measurements", "expected an array"))?;
    if items.is_empty() {
        return Err(field_err(
            "measurements",
            "at least one measurement is required",
        ));
    }
    let path = |i: usize| format!("measurements[{i}]");

    let measurements = match problem {
        ProblemKind::RotationAveraging => {
            let samples = items
                .iter()
                .enumerate()
                .map(|(i, v)| rotation(v, &path(i)))
                .collect::<Result<Vec<_>, _>>()?;
            MeasurementSet::rotations(samples, beta)
        }
        ProblemKind::Registration => {
            let pairs = items
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    Ok(PointPair {
                        a: vec3(v, "a", &path(i))?,
                        b: vec3(v, "b", &path(i))?,
                    })
                })
                .collect::<Result<Vec<_>, InputError>>()?;
            MeasurementSet::point_pairs(pairs, beta)
        }
        ProblemKind::RegistrationNormals => {
            let beta_normal = positive(&root, "beta_normal")?;
            let pairs = items
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    Ok(PointNormalPair {
                        a: vec3(v, "a", &path(i))?,
                        ma: unit3(v, "ma", &path(i))?,
                        b: vec3(v, "b", &path(i))?,
                        nb: unit3(v, "nb", &path(i))?,
                    })
                })
                .collect::<Result<Vec<_>, InputError>>()?;
            MeasurementSet::point_normal_pairs(pairs, beta, beta_normal)
        }
        ProblemKind::CrossRatio => {
            let corr = items
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let p = vec3(v, "p", &path(i))?;
                    if !(p.z > 0.0) {
                        return Err(field_err(
                            format!("{}.p", path(i)),
                            "point must be in front of the camera (z > 0)",
                        ));
                    }
                    let y = numbers::<2>(member(v, "y", &path(i))?, &format!("{}.y", path(i)))?;
                    Ok(Correspondence2D3D {
                        p,
                        y: Vector2::from(y),
                    })
                })
                .collect::<Result<Vec<_>, InputError>>()?;
            MeasurementSet::camera_2d3d(corr, beta)
        }
    }
    .map_err(|e| field_err("measurements", e.to_string()))?;

    let ground_truth = match root.get("ground_truth") {
        None | Some(Value::Null) => None,
        Some(gt) => Some(parse_ground_truth(gt, problem)?),
    };
    let inlier_mask = match root.get("inliers") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let arr = v
                .as_array()
                .ok_or_else(|| field_err("inliers", "expected an array of booleans"))?;
            if arr.len() != items.len() {
                return Err(field_err(
                    "inliers",
                    format!("{} entries for {} measurements", arr.len(), items.len()),
                ));
            }
            Some(
                arr.iter()
                    .enumerate()
                    .map(|(i, b)| {
                        b.as_bool()
                            .ok_or_else(|| field_err(format!("inliers[{i}]"), "expected a boolean"))
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            )
        }
    };
    Ok(MeasurementFile {
        measurements,
        ground_truth,
        inlier_mask,
    })
}

fn parse_ground_truth(gt: &Value, problem: ProblemKind) -> Result<GroundTruth, InputError> {
    let r = rotation(
        member(gt, "rotation", "ground_truth")?,
        "ground_truth.rotation",
    );
    match problem {
        ProblemKind::RotationAveraging => Ok(GroundTruth::Rotation(r?)),
        ProblemKind::Registration | ProblemKind::RegistrationNormals => {
            let t = vec3(gt, "translation", "ground_truth")?;
            Ok(GroundTruth::Transform(RigidTransform::new(r?, t)))
        }
        ProblemKind::CrossRatio => Ok(GroundTruth::None),
    }
}

fn arr(v: impl IntoIterator<Item = f64>) -> Value {
    Value::Array(v.into_iter().map(Value::from).collect())
}

/// Serializes measurements, and optionally the ground truth and inlier mask,
/// in the format read by [`parse_measurement_file`].
pub fn measurement_file_json(
    measurements: &MeasurementSet,
    ground_truth: Option<&GroundTruth>,
    inlier_mask: Option<&[bool]>,
) -> Value {
    let mut root = Map::new();
    root.insert("problem".into(), json!(measurements.kind().name()));
    let items: Vec<Value> = match measurements {
        MeasurementSet::RotationSamples { samples, bound } => {
            root.insert("beta".into(), json!(bound.value()));
            samples.iter().map(|r| arr(r.to_row_major())).collect()
        }
        MeasurementSet::PointPairs { pairs, bound } => {
            root.insert("beta".into(), json!(bound.value()));
            pairs
                .iter()
                .map(|p| json!({"a": arr(p.a.iter().copied()), "b": arr(p.b.iter().copied())}))
                .collect()
        }
        MeasurementSet::PointNormalPairs {
            pairs,
            point_bound,
            normal_bound,
        } => {
            root.insert("beta".into(), json!(point_bound.value()));
            root.insert("beta_normal".into(), json!(normal_bound.value()));
            pairs
                .iter()
                .map(|p| {
                    json!({
                        "a": arr(p.a.iter().copied()),
                        "ma": arr(p.ma.as_vector().iter().copied()),
                        "b": arr(p.b.iter().copied()),
                        "nb": arr(p.nb.as_vector().iter().copied()),
                    })
                })
                .collect()
        }
        MeasurementSet::Camera2D3D {
            correspondences,
            bound,
        } => {
            root.insert("beta".into(), json!(bound.value()));
            correspondences
                .iter()
                .map(|c| json!({"p": arr(c.p.iter().copied()), "y": arr(c.y.iter().copied())}))
                .collect()
        }
    };
    root.insert("measurements".into(), Value::Array(items));
    match ground_truth {
        Some(GroundTruth::Rotation(r)) => {
            root.insert(
                "ground_truth".into(),
                json!({"rotation": arr(r.to_row_major())}),
            );
        }
        Some(GroundTruth::Transform(x)) => {
            root.insert(
                "ground_truth".into(),
                json!({
                    "rotation": arr(x.rotation.to_row_major()),
                    "translation": arr(x.translation.iter().copied()),
                }),
            );
        }
        _ => {}
    }
    if let Some(mask) = inlier_mask {
        root.insert("inliers".into(), json!(mask));
    }
    Value::Object(root)
}

pub fn instance_json(instance: &Instance) -> Value {
    measurement_file_json(
        &instance.measurements,
        Some(&instance.ground_truth),
        Some(&instance.inlier_mask),
    )
}

/// Parses `x y z [nx ny nz]` lines. Blank lines and `#` comments are skipped.
pub fn parse_points(text: &str) -> Result<Vec<SourcePoint>, InputError> {
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| InputError::Line {
            line: lineno + 1,
            reason,
        };
        let vals = line
            .split_whitespace()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| err(format!("'{f}' is not a finite number")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let p = match vals.len() {
            3 => SourcePoint {
                p: Vector3::new(vals[0], vals[1], vals[2]),
                normal: None,
            },
            6 => {
                let n = Vector3::new(vals[3], vals[4], vals[5]);
                SourcePoint {
                    p: Vector3::new(vals[0], vals[1], vals[2]),
                    normal: Some(
                        UnitVector3::new_normalize(n)
                            .map_err(|_| err("normal has zero length".into()))?,
                    ),
                }
            }
            k => return Err(err(format!("expected 3 or 6 values, found {k}"))),
        };
        points.push(p);
    }
    if points.is_empty() {
        return Err(InputError::Line {
            line: 0,
            reason: "no points found".into(),
        });
    }
    Ok(points)
}

/// Translates and uniformly scales a cloud so it fits in [0, 1]³.
pub fn fit_unit_cube(points: &mut [SourcePoint]) {
    let Some(first) = points.first() else {
        return;
    };
    let (mut lo, mut hi) = (first.p, first.p);
    for s in points.iter() {
        lo = lo.inf(&s.p);
        hi = hi.sup(&s.p);
    }
    let extent = (hi - lo).max();
    let scale = if extent > 0.0 { 1.0 / extent } else { 1.0 };
    for s in points.iter_mut() {
        s.p = (s.p - lo) * scale;
    }
}
