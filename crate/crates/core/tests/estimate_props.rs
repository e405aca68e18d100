use std::f64::consts::PI;

use nalgebra::Vector3;
use proptest::prelude::*;
use robin::estimate::{
    chordal_objective, gnc_tls, horn_registration, point_normal_objective,
    point_normal_registration, rotation_mean_chordal, tls_cost, tls_weight, GncConfig, PnConfig,
    PointRegistrationProblem, RotationAveragingProblem, WeightVector, WeightedLeastSquares,
};
use robin::geometry::{exp_so3, geodesic_distance, RigidTransform, Rotation, UnitVector3};
use robin::harness::{generate, ExperimentSpec};
use robin::invariants::{MeasurementSet, PointNormalPair, PointPair, ProblemKind};

fn arb_vec(scale: f64) -> impl Strategy<Value = Vector3<f64>> {
    (-scale..scale, -scale..scale, -scale..scale).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn arb_rotation() -> impl Strategy<Value = Rotation> {
    (
        arb_vec(1.0).prop_filter("non-zero", |v| v.norm() > 0.1),
        0.0..PI,
    )
        .prop_map(|(u, a)| exp_so3(&(u.normalize() * a)))
}

fn arb_transform() -> impl Strategy<Value = RigidTransform> {
    (arb_rotation(), arb_vec(2.0)).prop_map(|(r, t)| RigidTransform::new(r, t))
}

fn arb_cloud(n: usize) -> impl Strategy<Value = Vec<Vector3<f64>>> {
    prop::collection::vec(arb_vec(1.0), n)
}

fn close(a: &RigidTransform, b: &RigidTransform, tol: f64) -> bool {
    geodesic_distance(&a.rotation, &b.rotation) < tol
        && (a.translation - b.translation).norm() < tol
}

proptest! {
    #[test]
    fn horn_recovers_noiseless_transforms(x in arb_transform(), a in arb_cloud(8)) {
        let pairs: Vec<PointPair> = a.iter().map(|p| PointPair { a: *p, b: x.apply(p) }).collect();
        let est = horn_registration(&pairs, &WeightVector::ones(8)).unwrap();
        prop_assert!(close(&est, &x, 1e-6));
    }

    #[test]
    fn horn_is_equivariant(
        a in arb_cloud(10), b in arb_cloud(10), g in arb_transform(),
        w in prop::collection::vec(0.1..1.0f64, 10),
    ) {
        let w = WeightVector::new(w).unwrap();
        let pairs: Vec<PointPair> = a.iter().zip(&b).map(|(a, b)| PointPair { a: *a, b: *b }).collect();
        let moved: Vec<PointPair> = pairs.iter().map(|p| PointPair { a: p.a, b: g.apply(&p.b) }).collect();
        let x = horn_registration(&pairs, &w).unwrap();
        let y = horn_registration(&moved, &w).unwrap();
        prop_assert!(close(&y, &g.compose(&x), 1e-6));
    }

    #[test]
    fn point_normal_solution_recovers_noiseless_transforms(
        x in arb_transform(), a in arb_cloud(6), n in arb_cloud(6),
    ) {
        prop_assume!(n.iter().all(|v| v.norm() > 0.1));
        let pairs: Vec<PointNormalPair> = a
            .iter()
            .zip(&n)
            .map(|(p, m)| {
                let ma = UnitVector3::new_normalize(*m).unwrap();
                PointNormalPair { a: *p, ma, b: x.apply(p), nb: ma.rotated(&x.rotation) }
            })
            .collect();
        let cfg = PnConfig::uniform(6, 0.05, 0.05, 1.0).unwrap();
        let est = point_normal_registration(&pairs, &WeightVector::ones(6), &cfg).unwrap();
        prop_assert!(close(&est, &x, 1e-6));
    }

    #[test]
    fn point_normal_solution_is_not_beaten_nearby(
        a in arb_cloud(6), b in arb_cloud(6), n in arb_cloud(12), step in arb_vec(0.05), dt in arb_vec(0.05),
    ) {
        prop_assume!(n.iter().all(|v| v.norm() > 0.1));
        let unit = |v: &Vector3<f64>| UnitVector3::new_normalize(*v).unwrap();
        let pairs: Vec<PointNormalPair> = (0..6)
            .map(|i| PointNormalPair { a: a[i], ma: unit(&n[i]), b: b[i], nb: unit(&n[i + 6]) })
            .collect();
        let cfg = PnConfig::uniform(6, 0.1, 0.2, 1.0).unwrap();
        let w = [1.0; 6];
        let est = point_normal_registration(&pairs, &WeightVector::ones(6), &cfg).unwrap();
        let other = RigidTransform::new(est.rotation * exp_so3(&step), est.translation + dt);
        let f = |x: &RigidTransform| point_normal_objective(&pairs, &w, &cfg, x);
        prop_assert!(f(&est) <= f(&other) + 1e-9 * f(&est).max(1.0));
    }

    #[test]
    fn chordal_mean_is_left_equivariant(
        samples in prop::collection::vec(arb_rotation(), 3..12), g in arb_rotation(),
    ) {
        let w = WeightVector::ones(samples.len());
        let moved: Vec<Rotation> = samples.iter().map(|r| g * *r).collect();
        let (Ok(m), Ok(gm)) = (rotation_mean_chordal(&samples, &w), rotation_mean_chordal(&moved, &w)) else {
            return Ok(());
        };
        prop_assert!(geodesic_distance(&gm, &(g * m)) < 1e-6);
        let f = chordal_objective(&samples, w.as_slice(), &m);
        prop_assert!(f <= chordal_objective(&samples, w.as_slice(), &g) + 1e-9);
    }

    #[test]
    fn tls_weights_are_in_unit_range_and_monotone(
        r1 in 0.0..4.0f64, r2 in 0.0..4.0f64, eps2 in 0.01..2.0f64, mu in 1e-6..1e6f64,
    ) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let (wl, wh) = (tls_weight(lo, eps2, mu), tls_weight(hi, eps2, mu));
        prop_assert!((0.0..=1.0).contains(&wl) && (0.0..=1.0).contains(&wh));
        prop_assert!(wh <= wl + 1e-12);
    }

    #[test]
    fn weights_outside_unit_range_are_rejected(x in prop_oneof![-10.0..-1e-9f64, 1.0 + 1e-9..10.0f64]) {
        prop_assert!(WeightVector::new(vec![0.5, x]).is_err());
    }
}

fn tls_of<P: WeightedLeastSquares>(p: &P, cfg: &GncConfig, x: &P::Estimate) -> f64 {
    tls_cost(&p.residuals(x), cfg).unwrap()
}

#[test]
fn gnc_does_not_raise_the_tls_cost_of_least_squares() {
    for seed in 0..40 {
        for problem in [ProblemKind::RotationAveraging, ProblemKind::Registration] {
            let mut spec = ExperimentSpec::defaults(problem);
            spec.n_measurements = 100;
            spec.outlier_rate = 0.2 + 0.015 * seed as f64;
            let instance = generate(&spec, seed);
            let ones = WeightVector::ones(100);
            let (gnc, ls) = match &instance.measurements {
                MeasurementSet::RotationSamples { samples, bound } => {
                    let p = RotationAveragingProblem { samples };
                    let cfg = GncConfig::new(bound.value());
                    let out = gnc_tls(&p, &cfg).unwrap();
                    let ls = p.solve_weighted(&ones).unwrap();
                    (tls_of(&p, &cfg, &out.estimate), tls_of(&p, &cfg, &ls))
                }
                MeasurementSet::PointPairs { pairs, bound } => {
                    let p = PointRegistrationProblem { pairs };
                    let cfg = GncConfig::new(bound.value());
                    let out = gnc_tls(&p, &cfg).unwrap();
                    let ls = p.solve_weighted(&ones).unwrap();
                    (tls_of(&p, &cfg, &out.estimate), tls_of(&p, &cfg, &ls))
                }
                _ => unreachable!(),
            };
            assert!(gnc <= ls + 1e-9, "{problem:?} seed {seed}: {gnc} > {ls}");
        }
    }
}
