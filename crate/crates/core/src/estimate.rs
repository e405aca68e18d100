//! Estimators run after pruning: weighted closed-form registration, chordal
//! rotation averaging, and a GNC-TLS wrapper that robustifies any of them.

use nalgebra::{Matrix3, Vector3, SVD};

use crate::error::SolveError;
use crate::geometry::{
    geodesic_distance, orthogonal_factor, project_to_so3, RigidTransform, Rotation, RANK_TOLERANCE,
};
use crate::invariants::{PointNormalPair, PointPair};

/// Per-measurement weights in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self, SolveError> {
        if let Some((i, x)) = w
            .iter()
            .enumerate()
            .find(|(_, x)| !(0.0..=1.0).contains(*x))
        {
            return Err(SolveError::InvalidWeights(format!(
                "weight {i} is {x}, expected a value in [0, 1]"
            )));
        }
        Ok(WeightVector(w))
    }

    pub fn ones(n: usize) -> Self {
        WeightVector(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Point and normal weights for the point-with-normal objective
/// Σ η_i‖b_i − R a_i − t‖² + κ_i‖n_i − R m_i‖².
#[derive(Debug, Clone, PartialEq)]
pub struct PnConfig {
    pub eta: Vec<f64>,
    pub kappa: Vec<f64>,
}

impl PnConfig {
    /// η_i = 1/α², κ_i = ρ/β_n² for every pair.
    pub fn uniform(n: usize, alpha: f64, beta_normal: f64, rho: f64) -> Result<Self, SolveError> {
        if !(alpha > 0.0 && beta_normal > 0.0 && rho >= 0.0) {
            return Err(SolveError::InvalidConfig(format!(
                "need α > 0, β_n > 0, ρ ≥ 0 (got {alpha}, {beta_normal}, {rho})"
            )));
        }
        Ok(PnConfig {
            eta: vec![1.0 / (alpha * alpha); n],
            kappa: vec![rho / (beta_normal * beta_normal); n],
        })
    }

    fn validate(&self, n: usize) -> Result<(), SolveError> {
        if self.eta.len() != n || self.kappa.len() != n {
            return Err(SolveError::InvalidConfig(format!(
                "{n} pairs but {} point weights and {} normal weights",
                self.eta.len(),
                self.kappa.len()
            )));
        }
        if self.eta.iter().any(|&e| !(e > 0.0)) || self.kappa.iter().any(|&k| !(k >= 0.0)) {
            return Err(SolveError::InvalidConfig(
                "point weights must be positive and normal weights non-negative".into(),
            ));
        }
        Ok(())
    }
}

fn check_len(n: usize, weights: &WeightVector) -> Result<(), SolveError> {
    if weights.len() != n {
        return Err(SolveError::InvalidWeights(format!(
            "{} weights for {n} measurements",
            weights.len()
        )));
    }
    Ok(())
}

/// Weighted centroids of the point pairs, or None if the weights sum to zero.
fn centroids<'a>(
    points: impl Iterator<Item = (&'a Vector3<f64>, &'a Vector3<f64>, f64)>,
) -> Option<(Vector3<f64>, Vector3<f64>, f64)> {
    let (mut a, mut b, mut total) = (Vector3::zeros(), Vector3::zeros(), 0.0);
    for (pa, pb, w) in points {
        a += w * pa;
        b += w * pb;
        total += w;
    }
    (total > 0.0).then(|| (a / total, b / total, total))
}

/// Rotation maximizing tr(Rᵀ M). Fails unless M has rank at least 2.
fn wahba(m: &Matrix3<f64>) -> Result<Rotation, SolveError> {
    let svd = SVD::new(*m, true, true);
    let s = svd.singular_values;
    if !(s[0] > 0.0) || !(s[1] > RANK_TOLERANCE * s[0]) {
        return Err(SolveError::DegenerateGeometry(format!(
            "cross-covariance has rank below 2 (singular values {:.3e}, {:.3e}, {:.3e})",
            s[0], s[1], s[2]
        )));
    }
    Ok(Rotation::from_matrix_unchecked(orthogonal_factor(&svd)))
}

/// Weighted least-squares rigid registration b ≈ R a + t in closed form.
pub fn horn_registration(
    pairs: &[PointPair],
    weights: &WeightVector,
) -> Result<RigidTransform, SolveError> {
    check_len(pairs.len(), weights)?;
    let w = weights.as_slice();
    let support = w.iter().filter(|&&x| x > 0.0).count();
    if support < 3 {
        return Err(SolveError::DegenerateGeometry(format!(
            "need at least 3 pairs with positive weight, have {support}"
        )));
    }
    let (a_bar, b_bar, _) =
        centroids(pairs.iter().zip(w).map(|(p, &w)| (&p.a, &p.b, w))).expect("positive support");
    let mut m = Matrix3::zeros();
    for (p, &wi) in pairs.iter().zip(w) {
        m += wi * (p.b - b_bar) * (p.a - a_bar).transpose();
    }
    let rotation = wahba(&m)?;
    let translation = b_bar - rotation.rotate(&a_bar);
    Ok(RigidTransform::new(rotation, translation))
}

/// Closed-form global minimizer of the weighted point-with-normal objective.
/// The effective weights are w_i·η_i and w_i·κ_i; the translation uses point
/// terms only.
pub fn point_normal_registration(
    pairs: &[PointNormalPair],
    weights: &WeightVector,
    cfg: &PnConfig,
) -> Result<RigidTransform, SolveError> {
    check_len(pairs.len(), weights)?;
    cfg.validate(pairs.len())?;
    let w = weights.as_slice();
    let eta: Vec<f64> = w.iter().zip(&cfg.eta).map(|(w, e)| w * e).collect();
    let (a_bar, b_bar, _) = centroids(pairs.iter().zip(&eta).map(|(p, &e)| (&p.a, &p.b, e)))
        .ok_or_else(|| {
            SolveError::DegenerateGeometry("no pair has positive point weight".into())
        })?;
    let mut m = Matrix3::zeros();
    for ((p, &e), (&wi, &k)) in pairs.iter().zip(&eta).zip(w.iter().zip(&cfg.kappa)) {
        m += e * (p.b - b_bar) * (p.a - a_bar).transpose();
        m += wi * k * p.nb.as_vector() * p.ma.as_vector().transpose();
    }
    let rotation = wahba(&m)?;
    let translation = b_bar - rotation.rotate(&a_bar);
    Ok(RigidTransform::new(rotation, translation))
}

/// Σ η_i‖b_i − R a_i − t‖² + κ_i‖n_i − R m_i‖², weighted by `weights`.
pub fn point_normal_objective(
    pairs: &[PointNormalPair],
    weights: &[f64],
    cfg: &PnConfig,
    x: &RigidTransform,
) -> f64 {
    pairs
        .iter()
        .enumerate()
        .map(|(i, p)| weights[i] * point_normal_residual_sq(p, cfg.eta[i], cfg.kappa[i], x))
        .sum()
}

fn point_normal_residual_sq(p: &PointNormalPair, eta: f64, kappa: f64, x: &RigidTransform) -> f64 {
    let dp = p.b - x.apply(&p.a);
    let dn = p.nb.as_vector() - x.rotation.rotate(p.ma.as_vector());
    eta * dp.norm_squared() + kappa * dn.norm_squared()
}

/// Σ w_i‖b_i − R a_i − t‖².
pub fn registration_objective(pairs: &[PointPair], weights: &[f64], x: &RigidTransform) -> f64 {
    pairs
        .iter()
        .zip(weights)
        .map(|(p, w)| w * (p.b - x.apply(&p.a)).norm_squared())
        .sum()
}

/// Weighted chordal mean: the projection of Σ w_i R_i onto SO(3), which
/// minimizes Σ w_i‖R − R_i‖²_F.
pub fn rotation_mean_chordal(
    samples: &[Rotation],
    weights: &WeightVector,
) -> Result<Rotation, SolveError> {
    check_len(samples.len(), weights)?;
    let w = weights.as_slice();
    if !(w.iter().sum::<f64>() > 0.0) {
        return Err(SolveError::InvalidWeights("weights sum to zero".into()));
    }
    let sum = samples
        .iter()
        .zip(w)
        .fold(Matrix3::zeros(), |acc, (r, &wi)| acc + wi * r.matrix());
    Ok(project_to_so3(&sum)?)
}

/// Σ w_i‖R − R_i‖²_F.
pub fn chordal_objective(samples: &[Rotation], weights: &[f64], r: &Rotation) -> f64 {
    samples
        .iter()
        .zip(weights)
        .map(|(s, w)| w * (r.matrix() - s.matrix()).norm_squared())
        .sum()
}

/// Residual of one rotation sample: its geodesic distance to the estimate.
pub fn rotavg_residual(estimate: &Rotation, sample: &Rotation) -> f64 {
    geodesic_distance(estimate, sample)
}

/// A weighted least-squares problem that GNC can robustify.
pub trait WeightedLeastSquares {
    type Estimate: Clone;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn solve_weighted(&self, weights: &WeightVector) -> Result<Self::Estimate, SolveError>;

    /// Non-negative residual r_i of every measurement.
    fn residuals(&self, estimate: &Self::Estimate) -> Vec<f64>;
}

/// Inlier thresholds ζ_i, in residual units.
#[derive(Debug, Clone, PartialEq)]
pub enum Zeta {
    Global(f64),
    PerMeasurement(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GncConfig {
    pub zeta: Zeta,
    pub c_bar: f64,
    pub mu_update_factor: f64,
    pub max_iterations: usize,
    pub convergence_tol: f64,
}

impl GncConfig {
    pub fn new(zeta: f64) -> Self {
        GncConfig {
            zeta: Zeta::Global(zeta),
            c_bar: 1.0,
            mu_update_factor: 1.4,
            max_iterations: 100,
            convergence_tol: 1e-6,
        }
    }

    fn thresholds_sq(&self, n: usize) -> Result<Vec<f64>, SolveError> {
        let zeta = match &self.zeta {
            Zeta::Global(z) => vec![*z; n],
            Zeta::PerMeasurement(z) if z.len() == n => z.clone(),
            Zeta::PerMeasurement(z) => {
                return Err(SolveError::InvalidConfig(format!(
                    "{} thresholds for {n} measurements",
                    z.len()
                )))
            }
        };
        if zeta.iter().any(|&z| !(z > 0.0 && z.is_finite())) {
            return Err(SolveError::InvalidConfig("ζ must be positive".into()));
        }
        if !(self.c_bar > 0.0) || !(self.mu_update_factor > 1.0) {
            return Err(SolveError::InvalidConfig(
                "need c̄ > 0 and a μ update factor above 1".into(),
            ));
        }
        Ok(zeta
            .iter()
            .map(|z| self.c_bar * self.c_bar * z * z)
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct GncOutcome<E> {
    pub estimate: E,
    pub weights: WeightVector,
    pub iterations: usize,
    /// False if the iteration cap was reached or a refit failed.
    pub converged: bool,
}

/// TLS weight for residual² `r2`, threshold² `eps2` and surrogate parameter μ.
pub fn tls_weight(r2: f64, eps2: f64, mu: f64) -> f64 {
    if r2 <= mu / (mu + 1.0) * eps2 {
        1.0
    } else if r2 >= (mu + 1.0) / mu * eps2 {
        0.0
    } else {
        ((eps2 * mu * (mu + 1.0) / r2).sqrt() - mu).clamp(0.0, 1.0)
    }
}

/// Σ min{r_i²/ζ_i², c̄²}.
pub fn tls_cost(residuals: &[f64], cfg: &GncConfig) -> Result<f64, SolveError> {
    let eps2 = cfg.thresholds_sq(residuals.len())?;
    let c2 = cfg.c_bar * cfg.c_bar;
    Ok(residuals
        .iter()
        .zip(&eps2)
        .map(|(r, e)| (r * r * c2 / e).min(c2))
        .sum())
}

/// Graduated non-convexity for truncated least squares.
pub fn gnc_tls<P: WeightedLeastSquares>(
    problem: &P,
    cfg: &GncConfig,
) -> Result<GncOutcome<P::Estimate>, SolveError> {
    let n = problem.len();
    let eps2 = cfg.thresholds_sq(n)?;
    let mut weights = WeightVector::ones(n);
    let mut estimate = problem.solve_weighted(&weights)?;
    let mut residuals = problem.residuals(&estimate);

    let eps2_mean = eps2.iter().sum::<f64>() / n as f64;
    let max_r2 = residuals.iter().map(|r| r * r).fold(0.0, f64::max);
    let denom = 2.0 * max_r2 - eps2_mean;
    // every residual already inside the threshold: the problem is convex
    let mut mu = if denom > 0.0 {
        (eps2_mean / denom).max(1e-6)
    } else {
        1e12
    };

    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let next: Vec<f64> = residuals
            .iter()
            .zip(&eps2)
            .map(|(r, &e)| tls_weight(r * r, e, mu))
            .collect();
        let change = next
            .iter()
            .zip(weights.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let next = WeightVector(next);
        match problem.solve_weighted(&next) {
            Ok(e) => estimate = e,
            Err(err) => {
                log::debug!("GNC refit failed at iteration {iterations}: {err}");
                break;
            }
        }
        weights = next;
        residuals = problem.residuals(&estimate);
        mu *= cfg.mu_update_factor;
        if change < cfg.convergence_tol {
            converged = true;
            break;
        }
    }
    Ok(GncOutcome {
        estimate,
        weights,
        iterations,
        converged,
    })
}

pub struct RotationAveragingProblem<'a> {
    pub samples: &'a [Rotation],
}

impl WeightedLeastSquares for RotationAveragingProblem<'_> {
    type Estimate = Rotation;

    fn len(&self) -> usize {
        self.samples.len()
    }

    fn solve_weighted(&self, weights: &WeightVector) -> Result<Rotation, SolveError> {
        rotation_mean_chordal(self.samples, weights)
    }

    fn residuals(&self, estimate: &Rotation) -> Vec<f64> {
        self.samples
            .iter()
            .map(|s| rotavg_residual(estimate, s))
            .collect()
    }
}

pub struct PointRegistrationProblem<'a> {
    pub pairs: &'a [PointPair],
}

impl WeightedLeastSquares for PointRegistrationProblem<'_> {
    type Estimate = RigidTransform;

    fn len(&self) -> usize {
        self.pairs.len()
    }

    fn solve_weighted(&self, weights: &WeightVector) -> Result<RigidTransform, SolveError> {
        horn_registration(self.pairs, weights)
    }

    fn residuals(&self, x: &RigidTransform) -> Vec<f64> {
        self.pairs
            .iter()
            .map(|p| (p.b - x.apply(&p.a)).norm())
            .collect()
    }
}

/// Residual r_i = sqrt(η_i‖Δp‖² + κ_i‖Δn‖²).
pub struct PointNormalProblem<'a> {
    pub pairs: &'a [PointNormalPair],
    pub cfg: PnConfig,
}

impl WeightedLeastSquares for PointNormalProblem<'_> {
    type Estimate = RigidTransform;

    fn len(&self) -> usize {
        self.pairs.len()
    }

    fn solve_weighted(&self, weights: &WeightVector) -> Result<RigidTransform, SolveError> {
        point_normal_registration(self.pairs, weights, &self.cfg)
    }

    fn residuals(&self, x: &RigidTransform) -> Vec<f64> {
        self.pairs
            .iter()
            .enumerate()
            .map(|(i, p)| point_normal_residual_sq(p, self.cfg.eta[i], self.cfg.kappa[i], x).sqrt())
            .collect()
    }
}
