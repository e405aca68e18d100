//! Synthetic problem generators. Every generator is a pure function of its
//! spec and seed.

use nalgebra::{UnitQuaternion, Vector2, Vector3};
use rand::{seq::index, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, UnitBall, UnitSphere};

use super::{ExperimentSpec, GroundTruth, Instance, PointSource, SourcePoint};
use crate::geometry::{RigidTransform, Rotation, UnitVector3};
use crate::invariants::{
    vee_projection, Correspondence2D3D, MeasurementSet, NoiseBound, PointNormalPair, PointPair,
};

pub const IMAGE_WIDTH: f64 = 640.0;
pub const IMAGE_HEIGHT: f64 = 480.0;
pub const FOCAL_LENGTH: f64 = 500.0;
pub const PRINCIPAL_POINT: (f64, f64) = (320.0, 240.0);
/// Outlier points of the registration problem are uniform in a ball of this radius.
pub const OUTLIER_RADIUS: f64 = 5.0;
/// Minimum pixel distance between the endpoints of a cross-ratio segment.
pub const MIN_SEGMENT_PIXELS: f64 = 100.0;
pub const DEPTH_RANGE: (f64, f64) = (2.0, 10.0);

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Haar-uniform rotation from a normalized Gaussian quaternion.
pub fn random_rotation<R: Rng>(rng: &mut R) -> Rotation {
    let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]));
    Rotation::from_matrix_unchecked(*q.to_rotation_matrix().matrix())
}

pub fn random_unit_vector<R: Rng>(rng: &mut R) -> Vector3<f64> {
    Vector3::from(UnitSphere.sample(rng))
}

/// N(0, σ²) resampled until |x| ≤ bound.
pub fn truncated_normal<R: Rng>(rng: &mut R, sigma: f64, bound: f64) -> f64 {
    loop {
        let x = sigma * rng.sample::<f64, _>(StandardNormal);
        if x.abs() <= bound {
            return x;
        }
    }
}

/// N(0, σ²I) in 3D resampled until the norm is ≤ bound.
pub fn truncated_normal_3d<R: Rng>(rng: &mut R, sigma: f64, bound: f64) -> Vector3<f64> {
    loop {
        let e = sigma * Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        if e.norm() <= bound {
            return e;
        }
    }
}

fn truncated_normal_2d<R: Rng>(rng: &mut R, sigma: f64, bound: f64) -> Vector2<f64> {
    loop {
        let e = sigma * Vector2::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        if e.norm() <= bound {
            return e;
        }
    }
}

/// Inlier mask with exactly round(N·(1 − rate)) inliers; outliers are at
/// random positions.
fn outlier_mask<R: Rng>(rng: &mut R, n: usize, rate: f64) -> Vec<bool> {
    let n_in = ((n as f64) * (1.0 - rate)).round() as usize;
    let n_out = n - n_in.min(n);
    let mut inlier = vec![true; n];
    for i in index::sample(rng, n, n_out).iter() {
        inlier[i] = false;
    }
    inlier
}

fn bound(x: f64) -> NoiseBound {
    NoiseBound::new(x).expect("experiment spec is validated")
}

/// Inliers R°·Exp(θ_i u_i) with θ_i ~ N(0, σ²) truncated to |θ_i| ≤ β;
/// outliers uniform on SO(3).
pub fn gen_rotavg(spec: &ExperimentSpec, seed: u64) -> Instance {
    let mut rng = rng_for(seed);
    let truth = random_rotation(&mut rng);
    let mask = outlier_mask(&mut rng, spec.n_measurements, spec.outlier_rate);
    let samples = mask
        .iter()
        .map(|&inlier| {
            if inlier {
                let theta = truncated_normal(&mut rng, spec.noise_sigma, spec.noise_bound);
                let u = random_unit_vector(&mut rng);
                truth * Rotation::exp(&(theta * u))
            } else {
                random_rotation(&mut rng)
            }
        })
        .collect();
    Instance {
        measurements: MeasurementSet::rotations(samples, bound(spec.noise_bound))
            .expect("at least one measurement"),
        inlier_mask: mask,
        ground_truth: GroundTruth::Rotation(truth),
    }
}

fn source_points<R: Rng>(rng: &mut R, spec: &ExperimentSpec) -> Vec<SourcePoint> {
    match &spec.source {
        PointSource::UniformCube => (0..spec.n_measurements)
            .map(|_| SourcePoint {
                p: Vector3::from_fn(|_, _| rng.random::<f64>()),
                normal: None,
            })
            .collect(),
        PointSource::Cloud(cloud) => cloud.iter().take(spec.n_measurements).cloned().collect(),
    }
}

fn random_transform<R: Rng>(rng: &mut R) -> RigidTransform {
    let rotation = random_rotation(rng);
    let t: [f64; 3] = UnitBall.sample(rng);
    RigidTransform::new(rotation, Vector3::from(t))
}

/// b_i = R a_i + t + ε_i with ‖ε_i‖ ≤ β; outlier b_i uniform in a ball of
/// radius 5. With normals, inlier normals are rotated by R and perturbed by
/// an angle N(0, σ_n²) truncated to β_n; outlier normals are random.
pub fn gen_registration(spec: &ExperimentSpec, seed: u64, with_normals: bool) -> Instance {
    let mut rng = rng_for(seed);
    let source = source_points(&mut rng, spec);
    let truth = random_transform(&mut rng);
    let mask = outlier_mask(&mut rng, source.len(), spec.outlier_rate);
    let mut pairs = Vec::with_capacity(source.len());
    let mut normal_pairs = Vec::with_capacity(source.len());
    for (s, &inlier) in source.iter().zip(&mask) {
        let b = if inlier {
            truth.apply(&s.p) + truncated_normal_3d(&mut rng, spec.noise_sigma, spec.noise_bound)
        } else {
            OUTLIER_RADIUS * Vector3::from(UnitBall.sample(&mut rng))
        };
        pairs.push(PointPair { a: s.p, b });
        if with_normals {
            let ma = match s.normal {
                Some(n) => n,
                None => {
                    UnitVector3::new_normalize(random_unit_vector(&mut rng)).expect("unit sample")
                }
            };
            let nb = if inlier {
                let angle =
                    truncated_normal(&mut rng, spec.normal_noise_sigma, spec.normal_noise_bound);
                let axis = random_unit_vector(&mut rng);
                ma.rotated(&(Rotation::exp(&(angle * axis)) * truth.rotation))
            } else {
                UnitVector3::new_normalize(random_unit_vector(&mut rng)).expect("unit sample")
            };
            normal_pairs.push(PointNormalPair { a: s.p, ma, b, nb });
        }
    }
    let measurements = if with_normals {
        MeasurementSet::point_normal_pairs(
            normal_pairs,
            bound(spec.noise_bound),
            bound(spec.normal_noise_bound),
        )
    } else {
        MeasurementSet::point_pairs(pairs, bound(spec.noise_bound))
    }
    .expect("at least one measurement");
    Instance {
        measurements,
        inlier_mask: mask,
        ground_truth: GroundTruth::Transform(truth),
    }
}

/// All-to-all correspondences between a source cloud and its transformed,
/// partially discarded copy.
///
/// The target keeps max(1, round(overlap·N_src)) transformed points chosen at random;
/// every (source, target) combination becomes a pair, and a pair is an inlier
/// iff the target point is the transformed source point.
pub fn gen_all_to_all(spec: &ExperimentSpec, seed: u64, overlap: f64) -> Instance {
    let mut rng = rng_for(seed);
    let source = source_points(&mut rng, spec);
    let truth = random_transform(&mut rng);
    let n_src = source.len();
    let n_keep = (((n_src as f64) * overlap.clamp(0.0, 1.0)).round() as usize).clamp(1, n_src);
    let mut kept: Vec<usize> = index::sample(&mut rng, n_src, n_keep).into_vec();
    kept.sort_unstable();
    let target: Vec<(usize, Vector3<f64>)> = kept
        .iter()
        .map(|&i| {
            let e = truncated_normal_3d(&mut rng, spec.noise_sigma, spec.noise_bound);
            (i, truth.apply(&source[i].p) + e)
        })
        .collect();
    let mut pairs = Vec::with_capacity(n_src * target.len());
    let mut mask = Vec::with_capacity(n_src * target.len());
    for (i, s) in source.iter().enumerate() {
        for &(j, b) in &target {
            pairs.push(PointPair { a: s.p, b });
            mask.push(i == j);
        }
    }
    Instance {
        measurements: MeasurementSet::point_pairs(pairs, bound(spec.noise_bound))
            .expect("at least one pair"),
        inlier_mask: mask,
        ground_truth: GroundTruth::Transform(truth),
    }
}

pub fn project(p: &Vector3<f64>) -> Vector2<f64> {
    Vector2::new(PRINCIPAL_POINT.0, PRINCIPAL_POINT.1) + FOCAL_LENGTH * vee_projection(p)
}

fn back_project(pixel: &Vector2<f64>, depth: f64) -> Vector3<f64> {
    Vector3::new(
        (pixel.x - PRINCIPAL_POINT.0) / FOCAL_LENGTH * depth,
        (pixel.y - PRINCIPAL_POINT.1) / FOCAL_LENGTH * depth,
        depth,
    )
}

fn random_pixel<R: Rng>(rng: &mut R) -> Vector2<f64> {
    Vector2::new(
        rng.random_range(0.0..IMAGE_WIDTH),
        rng.random_range(0.0..IMAGE_HEIGHT),
    )
}

/// Points on a random 3D segment that projects inside a 640×480 image,
/// observed with pixel noise of norm ≤ β; outlier pixels are uniform in the
/// image.
pub fn gen_crossratio(spec: &ExperimentSpec, seed: u64) -> Instance {
    let mut rng = rng_for(seed);
    let (u1, u2) = loop {
        let (u1, u2) = (random_pixel(&mut rng), random_pixel(&mut rng));
        if (u1 - u2).norm() >= MIN_SEGMENT_PIXELS {
            break (u1, u2);
        }
    };
    let p1 = back_project(&u1, rng.random_range(DEPTH_RANGE.0..DEPTH_RANGE.1));
    let p2 = back_project(&u2, rng.random_range(DEPTH_RANGE.0..DEPTH_RANGE.1));
    let mask = outlier_mask(&mut rng, spec.n_measurements, spec.outlier_rate);
    let correspondences = mask
        .iter()
        .map(|&inlier| {
            let p = p1 + rng.random::<f64>() * (p2 - p1);
            let y = if inlier {
                project(&p) + truncated_normal_2d(&mut rng, spec.noise_sigma, spec.noise_bound)
            } else {
                random_pixel(&mut rng)
            };
            Correspondence2D3D { p, y }
        })
        .collect();
    Instance {
        measurements: MeasurementSet::camera_2d3d(correspondences, bound(spec.noise_bound))
            .expect("points lie in front of the camera"),
        inlier_mask: mask,
        ground_truth: GroundTruth::None,
    }
}

/// Dispatches on `spec.problem`.
pub fn generate(spec: &ExperimentSpec, seed: u64) -> Instance {
    use crate::invariants::ProblemKind::*;
    match spec.problem {
        RotationAveraging => gen_rotavg(spec, seed),
        Registration => gen_registration(spec, seed, false),
        RegistrationNormals => gen_registration(spec, seed, true),
        CrossRatio => gen_crossratio(spec, seed),
    }
}
