//! Diagnostics: objective gap, client heterogeneity, model divergence,
//! Bregman divergence, communication counts, and the closed-form gap bounds
//! of Local SGD and its stagewise variant.

use thiserror::Error;

use crate::engine::ClientFleet;
use crate::linalg;
use crate::objectives::Objective;
use crate::scalar::Scalar;
use crate::schedules::StagePlan;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("objective has no known optimum")]
    OptimumUnknown,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("Bregman divergence needs a convex objective")]
    NotConvex,
}

fn check_dim<F: Scalar>(obj: &dyn Objective<F>, x: &[F]) -> Result<(), MetricsError> {
    if x.len() == obj.dim() {
        Ok(())
    } else {
        Err(MetricsError::DimensionMismatch { expected: obj.dim(), got: x.len() })
    }
}

/// `f(x) − f*`
pub fn objective_gap<F: Scalar>(obj: &dyn Objective<F>, x: &[F]) -> Result<F, MetricsError> {
    check_dim(obj, x)?;
    let opt = obj.optimum().ok_or(MetricsError::OptimumUnknown)?;
    Ok(obj.value(x) - opt.value)
}

/// `(1/N) Σ ‖∇f_i(x) − ∇f(x)‖²`; equals `ζ*` at the optimum.
pub fn zeta_at<F: Scalar>(obj: &(impl Objective<F> + ?Sized), x: &[F]) -> F {
    let n = obj.num_clients();
    let d = obj.dim();
    let mut grads = vec![vec![F::zero(); d]; n];
    for (i, g) in grads.iter_mut().enumerate() {
        obj.client_gradient(i, x, g);
    }
    let mut mean = vec![F::zero(); d];
    linalg::mean_of(&grads, &mut mean);
    grads.iter().map(|g| linalg::dist_sq(g, &mean)).sum::<F>() / F::from_usize_lossy(n)
}

/// `(1/N) Σ ‖x̂ − x^i‖²` over the fleet's current states.
pub fn divergence<F: Scalar>(fleet: &ClientFleet<F>) -> F {
    fleet.divergence()
}

/// Inputs of the closed-form gap bounds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundInputs<F> {
    pub eta: F,
    pub iterations: usize,
    pub num_clients: usize,
    pub sigma2: F,
    /// `‖x₀ − x*‖²`
    pub dist0_sq: F,
    pub eta1: F,
    pub stages: usize,
    pub mu: Option<F>,
}

/// Local SGD on a convex objective: `3‖x₀ − x*‖²/(4ηT) + ησ²/N`.
pub fn local_sgd_gap_bound<F: Scalar>(b: &BoundInputs<F>) -> F {
    let t = F::from_usize_lossy(b.iterations);
    let n = F::from_usize_lossy(b.num_clients);
    F::lit(3.0) * b.dist0_sq / (F::lit(4.0) * b.eta * t) + b.eta * b.sigma2 / n
}

/// The learning rate minimizing [`local_sgd_gap_bound`]: `√(3N‖x₀ − x*‖²/(4σ²T))`.
pub fn local_sgd_optimal_eta<F: Scalar>(b: &BoundInputs<F>) -> F {
    let t = F::from_usize_lossy(b.iterations);
    let n = F::from_usize_lossy(b.num_clients);
    (F::lit(3.0) * n * b.dist0_sq / (F::lit(4.0) * b.sigma2 * t)).sqrt()
}

/// Stagewise method on a strongly convex objective after `S` stages:
/// `9η₁σ²/(2^S N)`.
pub fn stagewise_gap_bound<F: Scalar>(b: &BoundInputs<F>) -> F {
    let n = F::from_usize_lossy(b.num_clients);
    F::lit(9.0) * b.eta1 * b.sigma2 / (F::lit(2.0).powi(b.stages as i32) * n)
}

/// `D_f(x, y) = f(x) − f(y) − ⟨∇f(y), x − y⟩`
pub fn bregman_divergence<F: Scalar>(obj: &dyn Objective<F>, x: &[F], y: &[F]) -> Result<F, MetricsError> {
    if !obj.constants().is_convex() {
        return Err(MetricsError::NotConvex);
    }
    check_dim(obj, x)?;
    check_dim(obj, y)?;
    let mut g = vec![F::zero(); y.len()];
    let fy = obj.value_and_gradient(y, &mut g);
    let diff: Vec<F> = x.iter().zip(y).map(|(&a, &b)| a - b).collect();
    Ok(obj.value(x) - fy - linalg::dot(&g, &diff))
}

/// Averaging events a plan performs: `Σ_s ⌊T_s / k_s⌋`.
pub fn comm_rounds<F: Scalar>(plan: &StagePlan<F>) -> u64 {
    plan.stages.iter().map(|s| (s.iterations / s.k_eff) as u64).sum()
}

/// `Σ_s T_s / k_s` with the unfloored periods.
pub fn comm_rounds_real<F: Scalar>(plan: &StagePlan<F>) -> F {
    plan.stages.iter().map(|s| F::from_usize_lossy(s.iterations) / s.k_real).sum()
}
