use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{Objective, ObjectiveConstants, ObjectiveError, Optimum};
use crate::data::{Dataset, Example};
use crate::linalg;
use crate::rng::ClientRng;
use crate::scalar::Scalar;

/// `log(1 + exp(z))` without overflow.
#[inline]
fn softplus<F: Scalar>(z: F) -> F {
    z.max(F::zero()) + (-z.abs()).exp().ln_1p()
}

/// `1 / (1 + exp(−z))` without overflow.
#[inline]
fn sigmoid<F: Scalar>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

/// L2-regularized logistic regression over labels in {−1, +1}:
/// `(1/n) Σ log(1 + exp(−y_i x_iᵀθ)) + (λ/2)‖θ‖²`, with the examples split
/// across client shards.
#[derive(Debug, Clone)]
pub struct LogisticObjective<F> {
    dataset: Arc<Dataset<F>>,
    lambda: F,
    shards: Vec<Vec<usize>>,
    constants: ObjectiveConstants<F>,
    optimum: Option<Optimum<F>>,
}

/// Builds the single-client logistic objective on `dataset`.
pub fn logistic_objective<F: Scalar>(dataset: Dataset<F>, lambda: F) -> Result<LogisticObjective<F>, ObjectiveError> {
    LogisticObjective::new(Arc::new(dataset), lambda)
}

impl<F: Scalar> LogisticObjective<F> {
    pub fn new(dataset: Arc<Dataset<F>>, lambda: F) -> Result<Self, ObjectiveError> {
        if dataset.is_empty() {
            return Err(ObjectiveError::EmptyDataset);
        }
        if !(lambda >= F::zero()) {
            return Err(ObjectiveError::NegativeLambda(lambda.as_f64()));
        }
        for (index, e) in dataset.examples.iter().enumerate() {
            if e.label != F::one() && e.label != -F::one() {
                return Err(ObjectiveError::InvalidLabel { index, label: e.label.as_f64() });
            }
        }
        let max_norm = dataset.examples.iter().map(Example::norm_sq).fold(F::zero(), F::max);
        let constants = ObjectiveConstants {
            lipschitz: max_norm / F::lit(4.0) + lambda,
            mu: (lambda > F::zero()).then_some(lambda),
            rho: None,
            sigma2: F::zero(),
            zeta_star: None,
        };
        let shards = vec![(0..dataset.len()).collect()];
        Ok(Self { dataset, lambda, shards, constants, optimum: None })
    }

    /// Re-splits the examples across clients. The global objective becomes the
    /// mean of the per-shard objectives.
    pub fn with_shards(mut self, shards: Vec<Vec<usize>>) -> Result<Self, ObjectiveError> {
        if shards.is_empty() {
            return Err(ObjectiveError::NoClients);
        }
        let n = self.dataset.len();
        for (i, s) in shards.iter().enumerate() {
            if s.is_empty() || s.iter().any(|&j| j >= n) {
                return Err(ObjectiveError::BadShard(i));
            }
        }
        self.shards = shards;
        self.optimum = None;
        self.constants.zeta_star = None;
        Ok(self)
    }

    pub fn with_sigma2(mut self, sigma2: F) -> Self {
        self.constants.sigma2 = sigma2;
        self
    }

    /// Attaches a known optimum and the client variance measured there.
    pub fn with_optimum(mut self, optimum: Optimum<F>) -> Self {
        self.constants.zeta_star = Some(crate::metrics::zeta_at(&self, &optimum.point));
        self.optimum = Some(optimum);
        self
    }

    pub fn dataset(&self) -> &Dataset<F> {
        &self.dataset
    }

    pub fn lambda(&self) -> F {
        self.lambda
    }

    pub fn shards(&self) -> &[Vec<usize>] {
        &self.shards
    }

    #[inline]
    fn example_loss(&self, e: &Example<F>, theta: &[F]) -> F {
        softplus(-e.label * e.dot(theta))
    }

    /// Adds `scale · ∇ loss_e(θ)` to `out` and returns the loss.
    #[inline]
    fn add_example_gradient(&self, e: &Example<F>, theta: &[F], scale: F, out: &mut [F]) -> F {
        let margin = e.label * e.dot(theta);
        let coef = -e.label * sigmoid(-margin) * scale;
        for &(j, v) in &e.features {
            out[j as usize] += coef * v;
        }
        softplus(-margin)
    }

    fn shard_value_and_gradient(&self, client: usize, theta: &[F], out: &mut [F]) -> F {
        let shard = &self.shards[client];
        out.iter_mut().for_each(|v| *v = F::zero());
        let w = F::one() / F::from_usize_lossy(shard.len());
        let mut loss = F::zero();
        for &i in shard {
            loss += self.add_example_gradient(&self.dataset.examples[i], theta, w, out);
        }
        linalg::axpy(self.lambda, theta, out);
        loss * w + self.lambda * linalg::norm_sq(theta) / F::lit(2.0)
    }

    /// Minimizes the objective with damped Newton steps (dense Hessian, f64),
    /// stopping once `‖∇f‖ < tol` or after `max_iter` iterations.
    /// Returns the optimum and the final gradient norm.
    pub fn solve_optimum(&self, tol: f64, max_iter: usize) -> (Optimum<F>, f64) {
        let d = self.dataset.num_features;
        let lambda = self.lambda.as_f64();
        let mut theta = DVector::<f64>::zeros(d);
        let to_f = |v: &DVector<f64>| v.iter().map(|&x| F::lit(x)).collect::<Vec<F>>();
        let eval = |theta: &DVector<f64>| -> (f64, DVector<f64>) {
            let t: Vec<F> = to_f(theta);
            let mut g = vec![F::zero(); d];
            let v = self.value_and_gradient(&t, &mut g);
            (v.as_f64(), DVector::from_iterator(d, g.iter().map(|x| x.as_f64())))
        };
        let (mut value, mut grad) = eval(&theta);
        for _ in 0..max_iter {
            if grad.norm() < tol {
                break;
            }
            let mut hess = DMatrix::<f64>::identity(d, d) * lambda;
            let clients = self.shards.len() as f64;
            for shard in &self.shards {
                let w = 1.0 / (shard.len() as f64 * clients);
                for &i in shard {
                    let e = &self.dataset.examples[i];
                    let z: f64 = e.features.iter().map(|&(j, v)| v.as_f64() * theta[j as usize]).sum();
                    let s = 1.0 / (1.0 + (-z).exp());
                    let c = w * s * (1.0 - s);
                    for &(a, va) in &e.features {
                        for &(b, vb) in &e.features {
                            hess[(a as usize, b as usize)] += c * va.as_f64() * vb.as_f64();
                        }
                    }
                }
            }
            // Tiny ridge keeps the factorization alive when lambda = 0 and a feature never fires.
            for j in 0..d {
                hess[(j, j)] += 1e-14;
            }
            let step = match hess.cholesky() {
                Some(ch) => ch.solve(&grad),
                None => grad.clone(),
            };
            let slope = grad.dot(&step);
            let mut t = 1.0;
            loop {
                let candidate = &theta - &step * t;
                let (v, g) = eval(&candidate);
                if v <= value - 1e-4 * t * slope || t < 1e-12 {
                    theta = candidate;
                    value = v;
                    grad = g;
                    break;
                }
                t *= 0.5;
            }
        }
        let point = to_f(&theta);
        let opt_value = self.value(&point);
        (Optimum { point, value: opt_value }, grad.norm())
    }
}

impl<F: Scalar> Objective<F> for LogisticObjective<F> {
    fn dim(&self) -> usize {
        self.dataset.num_features
    }

    fn num_clients(&self) -> usize {
        self.shards.len()
    }

    fn client_value(&self, client: usize, theta: &[F]) -> F {
        let shard = &self.shards[client];
        let loss: F = shard.iter().map(|&i| self.example_loss(&self.dataset.examples[i], theta)).sum();
        loss / F::from_usize_lossy(shard.len()) + self.lambda * linalg::norm_sq(theta) / F::lit(2.0)
    }

    fn client_gradient(&self, client: usize, theta: &[F], out: &mut [F]) {
        self.shard_value_and_gradient(client, theta, out);
    }

    fn stochastic_gradient(&self, client: usize, theta: &[F], batch_size: usize, rng: &mut ClientRng, out: &mut [F]) {
        let shard = &self.shards[client];
        let b = batch_size.max(1);
        out.iter_mut().for_each(|v| *v = F::zero());
        let w = F::one() / F::from_usize_lossy(b);
        for _ in 0..b {
            let i = shard[rng.random_range(0..shard.len())];
            self.add_example_gradient(&self.dataset.examples[i], theta, w, out);
        }
        linalg::axpy(self.lambda, theta, out);
    }

    fn constants(&self) -> &ObjectiveConstants<F> {
        &self.constants
    }

    fn optimum(&self) -> Option<&Optimum<F>> {
        self.optimum.as_ref()
    }

    fn value_and_gradient(&self, theta: &[F], out: &mut [F]) -> F {
        let mut buf = vec![F::zero(); self.dim()];
        out.iter_mut().for_each(|v| *v = F::zero());
        let mut value = F::zero();
        for i in 0..self.shards.len() {
            value += self.shard_value_and_gradient(i, theta, &mut buf);
            linalg::axpy(F::one(), &buf, out);
        }
        let n = F::from_usize_lossy(self.shards.len());
        linalg::scale(F::one() / n, out);
        value / n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(rows: &[(Vec<f64>, f64)], lambda: f64) -> LogisticObjective<f64> {
        logistic_objective(Dataset::from_dense(rows), lambda).unwrap()
    }

    #[test]
    fn symmetric_labels_cancel() {
        let obj = tiny(&[(vec![1.0], 1.0), (vec![1.0], -1.0)], 0.0);
        assert!((obj.value(&[0.0]) - std::f64::consts::LN_2).abs() < 1e-15);
        let mut g = [1.0];
        obj.full_gradient(&[0.0], &mut g);
        assert_eq!(g, [0.0]);
    }

    #[test]
    fn closed_form_gradient_at_origin() {
        let obj = tiny(&[(vec![2.0], 1.0)], 0.0);
        let mut g = [0.0];
        obj.full_gradient(&[0.0], &mut g);
        assert!((g[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn constants_follow_lambda() {
        let rows: Vec<_> = (0..4).map(|i| (vec![1.0, i as f64], if i % 2 == 0 { 1.0 } else { -1.0 })).collect();
        let obj = tiny(&rows, 1.0 / 4.0);
        assert_eq!(obj.constants().mu, Some(0.25));
        assert!((obj.constants().lipschitz - (10.0 / 4.0 + 0.25)).abs() < 1e-15);
        assert_eq!(tiny(&rows, 0.0).constants().mu, None);
    }

    #[test]
    fn rejects_bad_inputs() {
        let empty = Dataset::<f64> { examples: vec![], num_features: 1 };
        assert_eq!(logistic_objective(empty, 0.0).unwrap_err(), ObjectiveError::EmptyDataset);
        let bad = Dataset::from_dense(&[(vec![1.0], 0.0)]);
        assert!(matches!(logistic_objective(bad, 0.0), Err(ObjectiveError::InvalidLabel { .. })));
        let ok = Dataset::from_dense(&[(vec![1.0], 1.0)]);
        assert!(matches!(logistic_objective(ok, -1.0), Err(ObjectiveError::NegativeLambda(_))));
    }

    #[test]
    fn extreme_margins_stay_finite() {
        let obj = tiny(&[(vec![1.0], 1.0), (vec![1.0], -1.0)], 0.0);
        assert!(obj.value(&[1e4]).is_finite());
        let mut g = [0.0];
        obj.full_gradient(&[-1e4], &mut g);
        assert!(g[0].is_finite());
    }

    #[test]
    fn newton_oracle_reaches_stationarity() {
        let rows: Vec<_> = (0..50)
            .map(|i| {
                let x = (i as f64 * 0.37).sin();
                (vec![1.0, x, x * x], if (i * 13) % 5 < 2 { 1.0 } else { -1.0 })
            })
            .collect();
        let obj = tiny(&rows, 1.0 / 50.0);
        let (opt, gnorm) = obj.solve_optimum(1e-10, 100);
        assert!(gnorm < 1e-10);
        let mut g = vec![0.0; 3];
        obj.full_gradient(&opt.point, &mut g);
        assert!(linalg::norm_sq(&g).sqrt() < 1e-10);
    }
}
