use log::warn;
use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;

use super::subsets::{next_combination, unrank_combination, SubsetPlan};
use super::{BitMatrix, CompatGraph, SubsetBudget};
use crate::error::GraphError;
use crate::invariants::{
    cross_ratio_3d, cross_ratio_bounds_from_distances, cross_ratio_compatible,
    cross_ratio_from_distances, points_collinear, vee_projection, MeasurementSet, NoiseBound,
};

/// Distance tables are precomputed for 2D-3D sets up to this size.
const DISTANCE_TABLE_LIMIT: usize = 2048;

/// Tests every planned n-subset and joins all members of each passing subset.
///
/// Edges are OR-aggregated: (i, j) is present if i and j share at least one
/// passing subset. The result depends only on the measurements and the budget.
pub fn build_graph(
    measurements: &MeasurementSet,
    budget: &SubsetBudget,
) -> Result<CompatGraph, GraphError> {
    let n = measurements.len();
    let arity = measurements.arity();
    if n < arity {
        return Err(GraphError::TooFewMeasurements {
            have: n,
            need: arity,
        });
    }
    let plan = SubsetPlan::new(n, arity, budget);
    if plan.is_sampled() {
        warn!(
            "testing a random sample of {} subsets of size {arity} out of {n} measurements",
            budget.max_subsets().unwrap_or(0)
        );
    }
    let sampled = plan.is_sampled();

    let graph = match measurements {
        MeasurementSet::Camera2D3D { .. } => {
            let tester = CrossRatioTester::new(measurements);
            let test = |idx: &[usize]| tester.test(idx);
            build_from_plan(n, arity, &plan, &test, sampled)
        }
        _ => {
            let test = |idx: &[usize]| measurements.subset_compatible(idx);
            if arity == 2 && !sampled {
                build_pairwise_rows(n, &test)
            } else {
                build_from_plan(n, arity, &plan, &test, sampled)
            }
        }
    };
    Ok(graph)
}

/// Row-wise exhaustive pair test; avoids an N×N bit matrix.
fn build_pairwise_rows<F>(n: usize, test: &F) -> CompatGraph
where
    F: Fn(&[usize]) -> bool + Sync,
{
    let upper: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .filter(|&j| test(&[i, j]))
                .map(|j| j as u32)
                .collect()
        })
        .collect();
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (i, row) in upper.iter().enumerate() {
        for &j in row {
            adj[j as usize].push(i as u32);
        }
    }
    // lower-triangle entries were pushed in increasing i, so appending the
    // upper row keeps each list sorted
    for (i, row) in upper.into_iter().enumerate() {
        adj[i].extend(row);
    }
    CompatGraph::from_sorted_adjacency(adj, false)
}

fn build_from_plan<F>(
    n: usize,
    arity: usize,
    plan: &SubsetPlan,
    test: &F,
    sampled: bool,
) -> CompatGraph
where
    F: Fn(&[usize]) -> bool + Sync,
{
    let merge = |mut a: BitMatrix, b: BitMatrix| {
        a.union_with(&b);
        a
    };
    let bits = match plan {
        SubsetPlan::Exhaustive => (0..=n - arity)
            .into_par_iter()
            .fold(
                || BitMatrix::new(n),
                |mut acc, first| {
                    visit_with_first(n, arity, first, |subset| {
                        // OR semantics: a subset whose edges already exist adds nothing
                        if !acc.is_clique(subset) && test(subset) {
                            acc.set_clique(subset);
                        }
                    });
                    acc
                },
            )
            .reduce(|| BitMatrix::new(n), merge),
        SubsetPlan::Sampled(ranks) => ranks
            .par_chunks(4096)
            .fold(
                || BitMatrix::new(n),
                |mut acc, chunk| {
                    let mut subset = vec![0; arity];
                    for &r in chunk {
                        unrank_combination(n, arity, r, &mut subset);
                        if !acc.is_clique(&subset) && test(&subset) {
                            acc.set_clique(&subset);
                        }
                    }
                    acc
                },
            )
            .reduce(|| BitMatrix::new(n), merge),
    };
    CompatGraph::from_bits(&bits, sampled)
}

/// Calls `f` on every sorted subset whose smallest element is `first`, in
/// lexicographic order.
fn visit_with_first<G: FnMut(&[usize])>(n: usize, arity: usize, first: usize, mut f: G) {
    let mut subset = vec![0; arity];
    subset[0] = first;
    if arity == 1 {
        f(&subset);
        return;
    }
    let rest_n = n - first - 1;
    let mut rest: Vec<usize> = (0..arity - 1).collect();
    loop {
        for (slot, &r) in subset[1..].iter_mut().zip(&rest) {
            *slot = first + 1 + r;
        }
        f(&subset);
        if !next_combination(&mut rest, rest_n) {
            break;
        }
    }
}

/// Cross-ratio test with precomputed projections and, for moderate sizes,
/// pairwise distance tables.
struct CrossRatioTester {
    n: usize,
    bound: NoiseBound,
    vee: Vec<Vector2<f64>>,
    pix: Vec<Vector2<f64>>,
    points: Vec<Vector3<f64>>,
    all_collinear: bool,
    vee_dist: Option<Vec<f64>>,
    pix_dist: Option<Vec<f64>>,
}

impl CrossRatioTester {
    fn new(m: &MeasurementSet) -> Self {
        let (corr, bound): (_, NoiseBound) = match m {
            MeasurementSet::Camera2D3D {
                correspondences,
                bound,
            } => (correspondences, *bound),
            _ => unreachable!("cross-ratio tester built for a 2D-3D set"),
        };
        let n = corr.len();
        let points: Vec<_> = corr.iter().map(|c| c.p).collect();
        let vee: Vec<_> = points.iter().map(vee_projection).collect();
        let pix: Vec<_> = corr.iter().map(|c| c.y).collect();
        let all_collinear = points_collinear(&points);
        let table = |v: &[Vector2<f64>]| {
            let mut d = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    d[i * n + j] = (v[i] - v[j]).norm();
                }
            }
            d
        };
        let (vee_dist, pix_dist) = if n <= DISTANCE_TABLE_LIMIT {
            (Some(table(&vee)), Some(table(&pix)))
        } else {
            (None, None)
        };
        CrossRatioTester {
            n,
            bound,
            vee,
            pix,
            points,
            all_collinear,
            vee_dist,
            pix_dist,
        }
    }

    fn test(&self, idx: &[usize]) -> bool {
        let (a, b, c, d) = (idx[0], idx[1], idx[2], idx[3]);
        if !self.all_collinear {
            let p = &self.points;
            return match cross_ratio_3d(&p[a], &p[b], &p[c], &p[d]) {
                Ok(tau) => cross_ratio_compatible(
                    &self.pix[a],
                    &self.pix[b],
                    &self.pix[c],
                    &self.pix[d],
                    tau,
                    self.bound,
                ),
                Err(_) => true,
            };
        }
        let (tau, bounds) = match (&self.vee_dist, &self.pix_dist) {
            (Some(vd), Some(pd)) => {
                let n = self.n;
                let tau = cross_ratio_from_distances(
                    vd[a * n + b],
                    vd[c * n + d],
                    vd[a * n + c],
                    vd[b * n + d],
                );
                let bounds = cross_ratio_bounds_from_distances(
                    pd[a * n + b],
                    pd[c * n + d],
                    pd[a * n + c],
                    pd[b * n + d],
                    self.bound.value(),
                );
                (tau, bounds)
            }
            _ => {
                let (v, y) = (&self.vee, &self.pix);
                let tau = cross_ratio_from_distances(
                    (v[a] - v[b]).norm(),
                    (v[c] - v[d]).norm(),
                    (v[a] - v[c]).norm(),
                    (v[b] - v[d]).norm(),
                );
                let bounds = cross_ratio_bounds_from_distances(
                    (y[a] - y[b]).norm(),
                    (y[c] - y[d]).norm(),
                    (y[a] - y[c]).norm(),
                    (y[b] - y[d]).norm(),
                    self.bound.value(),
                );
                (tau, bounds)
            }
        };
        match tau {
            Ok(tau) => bounds.0 < tau && tau < bounds.1,
            Err(_) => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rotation;
    use crate::graph::enumerate_subsets;
    use crate::invariants::{Correspondence2D3D, PointPair};

    fn nb(b: f64) -> NoiseBound {
        NoiseBound::new(b).unwrap()
    }

    #[test]
    fn identity_point_pairs_give_complete_graph() {
        let pairs: Vec<_> = (0..10)
            .map(|i| {
                let p = Vector3::new(i as f64, (i * i) as f64 * 0.1, -(i as f64));
                PointPair { a: p, b: p }
            })
            .collect();
        let m = MeasurementSet::point_pairs(pairs, nb(1e-3)).unwrap();
        let g = build_graph(&m, &SubsetBudget::unlimited()).unwrap();
        assert_eq!(g.edge_count(), 45);
        assert!(!g.sampled());
    }

    #[test]
    fn too_few_measurements() {
        let c = Correspondence2D3D {
            p: Vector3::new(0.0, 0.0, 1.0),
            y: Vector2::zeros(),
        };
        let m = MeasurementSet::camera_2d3d(vec![c; 3], nb(0.25)).unwrap();
        assert_eq!(
            build_graph(&m, &SubsetBudget::default()),
            Err(GraphError::TooFewMeasurements { have: 3, need: 4 })
        );
    }

    fn camera_line(n: usize) -> MeasurementSet {
        let a = Vector3::new(-1.0, 0.5, 4.0);
        let b = Vector3::new(1.5, -0.3, 7.0);
        let corr = (0..n)
            .map(|i| {
                let s = (i as f64 + 0.37 * (i % 3) as f64) / n as f64;
                let p = a + s * (b - a);
                let y = Vector2::new(320.0, 240.0) + 500.0 * vee_projection(&p);
                Correspondence2D3D { p, y }
            })
            .collect();
        MeasurementSet::camera_2d3d(corr, nb(0.25)).unwrap()
    }

    #[test]
    fn noiseless_collinear_six_give_k6() {
        let m = camera_line(6);
        let g = build_graph(&m, &SubsetBudget::unlimited()).unwrap();
        assert_eq!(g.edge_count(), 15);
        // every one of the C(6,4) subsets passes on its own
        for s in enumerate_subsets(6, 4, &SubsetBudget::unlimited()) {
            assert!(m.subset_compatible(&s));
        }
    }

    #[test]
    fn fast_cross_ratio_path_matches_reference_test() {
        let mut m = camera_line(12);
        if let MeasurementSet::Camera2D3D {
            correspondences, ..
        } = &mut m
        {
            correspondences[3].y += Vector2::new(40.0, -25.0);
            correspondences[8].y = Vector2::new(10.0, 400.0);
        }
        let tester = CrossRatioTester::new(&m);
        assert!(tester.all_collinear);
        for s in enumerate_subsets(12, 4, &SubsetBudget::unlimited()) {
            assert_eq!(tester.test(&s), m.subset_compatible(&s), "{s:?}");
        }
    }

    #[test]
    fn rotation_outlier_is_isolated() {
        let samples = vec![
            Rotation::identity(),
            Rotation::identity(),
            Rotation::identity(),
            Rotation::exp(&Vector3::new(2.0, -1.0, 0.5)),
        ];
        let m = MeasurementSet::rotations(samples, nb(0.1)).unwrap();
        let g = build_graph(&m, &SubsetBudget::unlimited()).unwrap();
        assert_eq!(g.degree(3), 0);
        assert!(g.is_clique(&[0, 1, 2]));
    }

    #[test]
    fn sampled_build_is_flagged_and_deterministic() {
        let m = camera_line(30);
        let budget = SubsetBudget::bounded(2_000, 11).unwrap();
        let g1 = build_graph(&m, &budget).unwrap();
        let g2 = build_graph(&m, &budget).unwrap();
        assert!(g1.sampled());
        assert_eq!(g1, g2);
    }
}
