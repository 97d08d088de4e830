use rand_distr::{Distribution, StandardNormal};

use super::{Objective, ObjectiveConstants, Optimum};
use crate::rng::ClientRng;
use crate::scalar::Scalar;

/// PL constant of `x² + 3 sin²(x)`: the minimum over `x ≠ 0` of
/// `f'(x)² / (2 f(x))`, attained near `|x| ≈ 2.2017`.
pub const PL_MU: f64 = 0.175_530_985_879_731_7;

/// The scalar function `f(x) = x² + 3 sin²(x)`, replicated on every client.
///
/// Non-convex, 8-smooth (`|f''| ≤ 8`), 4-weakly convex (`f'' ≥ −4`) and PL with
/// constant [`PL_MU`]. The unique minimizer is `x* = 0` with `f* = 0`.
#[derive(Debug, Clone)]
pub struct PlObjective<F> {
    clients: usize,
    constants: ObjectiveConstants<F>,
    optimum: Optimum<F>,
    noise_std: F,
}

pub fn pl_objective<F: Scalar>() -> PlObjective<F> {
    PlObjective::new(1, F::zero())
}

impl<F: Scalar> PlObjective<F> {
    /// `clients` identical replicas; stochastic gradients add `N(0, sigma2)`.
    pub fn new(clients: usize, sigma2: F) -> Self {
        let clients = clients.max(1);
        let sigma2 = sigma2.max(F::zero());
        Self {
            clients,
            constants: ObjectiveConstants {
                lipschitz: F::lit(8.0),
                mu: Some(F::lit(PL_MU)),
                rho: Some(F::lit(4.0)),
                sigma2,
                zeta_star: Some(F::zero()),
            },
            optimum: Optimum { point: vec![F::zero()], value: F::zero() },
            noise_std: sigma2.sqrt(),
        }
    }

    #[inline]
    pub fn eval(x: F) -> F {
        let s = x.sin();
        x * x + F::lit(3.0) * s * s
    }

    #[inline]
    pub fn derivative(x: F) -> F {
        F::lit(2.0) * x + F::lit(3.0) * (F::lit(2.0) * x).sin()
    }
}

impl<F: Scalar> Objective<F> for PlObjective<F> {
    fn dim(&self) -> usize {
        1
    }

    fn num_clients(&self) -> usize {
        self.clients
    }

    fn client_value(&self, _client: usize, x: &[F]) -> F {
        Self::eval(x[0])
    }

    fn client_gradient(&self, _client: usize, x: &[F], out: &mut [F]) {
        out[0] = Self::derivative(x[0]);
    }

    fn stochastic_gradient(&self, client: usize, x: &[F], batch_size: usize, rng: &mut ClientRng, out: &mut [F]) {
        self.client_gradient(client, x, out);
        if self.noise_std > F::zero() {
            let z: f64 = StandardNormal.sample(rng);
            out[0] += self.noise_std / F::from_usize_lossy(batch_size.max(1)).sqrt() * F::lit(z);
        }
    }

    fn constants(&self) -> &ObjectiveConstants<F> {
        &self.constants
    }

    fn optimum(&self) -> Option<&Optimum<F>> {
        Some(&self.optimum)
    }

    fn value(&self, x: &[F]) -> F {
        Self::eval(x[0])
    }

    fn full_gradient(&self, x: &[F], out: &mut [F]) {
        out[0] = Self::derivative(x[0]);
    }
}
