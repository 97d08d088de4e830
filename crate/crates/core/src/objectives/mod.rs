//! Gradient/value oracles.
//!
//! An [`Objective`] is the finite-sum problem `f(x) = (1/N) Σ_i f_i(x)` seen by a
//! fleet of `N` clients. Client `i` only ever sees `f_i`, through exact
//! ([`Objective::client_gradient`]) or sampled ([`Objective::stochastic_gradient`])
//! gradients.

mod logistic;
mod pl;
mod prox;
mod quadratic;

pub use logistic::{logistic_objective, LogisticObjective};
pub use pl::{pl_objective, PlObjective, PL_MU};
pub use prox::{prox_wrap, ProxObjective};
pub use quadratic::{quadratic_objective, random_quadratic, QuadraticObjective};

use thiserror::Error;

use crate::linalg;
use crate::rng::ClientRng;
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum ObjectiveError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("example {index} has label {label}; expected -1 or +1")]
    InvalidLabel { index: usize, label: f64 },
    #[error("regularization must be non-negative, got {0}")]
    NegativeLambda(f64),
    #[error("noise variance must be non-negative, got {0}")]
    NegativeVariance(f64),
    #[error("proximal parameter gamma must be positive, got {0}")]
    NonPositiveGamma(f64),
    #[error("at least one client is required")]
    NoClients,
    #[error("shard {0} is empty or references an example out of range")]
    BadShard(usize),
    #[error("invalid constants: {0}")]
    InvalidConstants(String),
}

/// Declared problem constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveConstants<F> {
    /// Smoothness constant `L` of every client objective.
    pub lipschitz: F,
    /// Strong-convexity (or PL) constant.
    pub mu: Option<F>,
    /// Weak-convexity constant; `None` for convex objectives.
    pub rho: Option<F>,
    /// Bound on `E‖∇f(x, ξ) − ∇f_i(x)‖²` for a single-sample gradient.
    pub sigma2: F,
    /// `(1/N) Σ ‖∇f_i(x*)‖²`, when known.
    pub zeta_star: Option<F>,
}

impl<F: Scalar> ObjectiveConstants<F> {
    pub fn validate(&self) -> Result<(), ObjectiveError> {
        let bad = |m: &str| Err(ObjectiveError::InvalidConstants(m.to_string()));
        if !(self.lipschitz >= F::zero()) {
            return bad("L must be non-negative");
        }
        if !(self.sigma2 >= F::zero()) {
            return bad("sigma2 must be non-negative");
        }
        if let Some(mu) = self.mu {
            if !(mu > F::zero()) {
                return bad("mu must be positive");
            }
        }
        if let Some(rho) = self.rho {
            if !(rho > F::zero()) || rho > self.lipschitz {
                return bad("rho must satisfy 0 < rho <= L");
            }
        }
        if let Some(z) = self.zeta_star {
            if !(z >= F::zero()) {
                return bad("zeta_star must be non-negative");
            }
        }
        Ok(())
    }

    pub fn is_convex(&self) -> bool {
        self.rho.is_none()
    }
}

/// Known minimizer and minimum value.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum<F> {
    pub point: Vec<F>,
    pub value: F,
}

pub trait Objective<F: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    fn num_clients(&self) -> usize;

    fn client_value(&self, client: usize, x: &[F]) -> F;

    /// Writes `∇f_i(x)` into `out`.
    fn client_gradient(&self, client: usize, x: &[F], out: &mut [F]);

    /// Writes an unbiased estimate of `∇f_i(x)` built from `batch_size` samples.
    fn stochastic_gradient(
        &self,
        client: usize,
        x: &[F],
        batch_size: usize,
        rng: &mut ClientRng,
        out: &mut [F],
    );

    fn constants(&self) -> &ObjectiveConstants<F>;

    fn optimum(&self) -> Option<&Optimum<F>> {
        None
    }

    fn value(&self, x: &[F]) -> F {
        let n = self.num_clients();
        let total: F = (0..n).map(|i| self.client_value(i, x)).sum();
        total / F::from_usize_lossy(n)
    }

    fn full_gradient(&self, x: &[F], out: &mut [F]) {
        let n = self.num_clients();
        let mut buf = vec![F::zero(); self.dim()];
        out.iter_mut().for_each(|v| *v = F::zero());
        for i in 0..n {
            self.client_gradient(i, x, &mut buf);
            linalg::axpy(F::one(), &buf, out);
        }
        linalg::scale(F::one() / F::from_usize_lossy(n), out);
    }

    /// `f(x)` and `∇f(x)` together; implementations may share work.
    fn value_and_gradient(&self, x: &[F], out: &mut [F]) -> F {
        self.full_gradient(x, out);
        self.value(x)
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<(), ObjectiveError> {
    if expected == got {
        Ok(())
    } else {
        Err(ObjectiveError::DimensionMismatch { expected, got })
    }
}

/// `f(x)` with a dimension check.
pub fn objective_value<F: Scalar>(obj: &dyn Objective<F>, x: &[F]) -> Result<F, ObjectiveError> {
    check_dim(obj.dim(), x.len())?;
    Ok(obj.value(x))
}

/// `∇f(x)` with a dimension check.
pub fn full_gradient<F: Scalar>(obj: &dyn Objective<F>, x: &[F]) -> Result<Vec<F>, ObjectiveError> {
    check_dim(obj.dim(), x.len())?;
    let mut g = vec![F::zero(); obj.dim()];
    obj.full_gradient(x, &mut g);
    Ok(g)
}

/// Monte-Carlo estimate of the single-sample gradient noise
/// `(1/N) Σ_i E‖∇f(x, ξ) − ∇f_i(x)‖²` at `x`, using `draws` samples per client.
pub fn estimate_sigma2<F: Scalar>(obj: &dyn Objective<F>, x: &[F], draws: usize, seed: u64) -> F {
    let d = obj.dim();
    let n = obj.num_clients();
    let mut exact = vec![F::zero(); d];
    let mut sample = vec![F::zero(); d];
    let mut total = F::zero();
    for i in 0..n {
        obj.client_gradient(i, x, &mut exact);
        let mut rng = crate::rng::client_rng(seed, i as u64, 0);
        for _ in 0..draws {
            obj.stochastic_gradient(i, x, 1, &mut rng, &mut sample);
            total += linalg::dist_sq(&sample, &exact);
        }
    }
    total / F::from_usize_lossy(n * draws.max(1))
}
