use super::{check_dim, Objective, ObjectiveConstants, ObjectiveError};
use crate::linalg;
use crate::rng::ClientRng;
use crate::scalar::Scalar;

/// `f(x) + ‖x − center‖² / (2γ)`: the per-stage objective of the non-convex
/// stagewise method. Every client's objective receives the same quadratic term.
pub struct ProxObjective<'a, F: Scalar> {
    inner: &'a dyn Objective<F>,
    center: Vec<F>,
    gamma: F,
    inv_gamma: F,
    constants: ObjectiveConstants<F>,
}

pub fn prox_wrap<'a, F: Scalar>(
    inner: &'a dyn Objective<F>,
    center: Vec<F>,
    gamma: F,
) -> Result<ProxObjective<'a, F>, ObjectiveError> {
    if !(gamma > F::zero()) {
        return Err(ObjectiveError::NonPositiveGamma(gamma.as_f64()));
    }
    check_dim(inner.dim(), center.len())?;
    let inv_gamma = F::one() / gamma;
    let base = inner.constants();
    let mu = match base.rho {
        Some(rho) if inv_gamma > rho => Some(inv_gamma - rho),
        Some(_) => None,
        None => Some(base.mu.unwrap_or(F::zero()) + inv_gamma),
    };
    let constants = ObjectiveConstants {
        lipschitz: base.lipschitz + inv_gamma,
        mu,
        rho: None,
        sigma2: base.sigma2,
        zeta_star: None,
    };
    Ok(ProxObjective { inner, center, gamma, inv_gamma, constants })
}

impl<F: Scalar> ProxObjective<'_, F> {
    pub fn gamma(&self) -> F {
        self.gamma
    }

    pub fn center(&self) -> &[F] {
        &self.center
    }

    /// `L_γ = L + 1/γ`
    pub fn l_gamma(&self) -> F {
        self.constants.lipschitz
    }

    #[inline]
    fn penalty(&self, x: &[F]) -> F {
        linalg::dist_sq(x, &self.center) * self.inv_gamma / F::lit(2.0)
    }

    #[inline]
    fn add_pull(&self, x: &[F], out: &mut [F]) {
        for ((o, &xi), &ci) in out.iter_mut().zip(x).zip(&self.center) {
            *o += (xi - ci) * self.inv_gamma;
        }
    }
}

impl<F: Scalar> Objective<F> for ProxObjective<'_, F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn num_clients(&self) -> usize {
        self.inner.num_clients()
    }

    fn client_value(&self, client: usize, x: &[F]) -> F {
        self.inner.client_value(client, x) + self.penalty(x)
    }

    fn client_gradient(&self, client: usize, x: &[F], out: &mut [F]) {
        self.inner.client_gradient(client, x, out);
        self.add_pull(x, out);
    }

    fn stochastic_gradient(&self, client: usize, x: &[F], batch_size: usize, rng: &mut ClientRng, out: &mut [F]) {
        self.inner.stochastic_gradient(client, x, batch_size, rng, out);
        self.add_pull(x, out);
    }

    fn constants(&self) -> &ObjectiveConstants<F> {
        &self.constants
    }

    fn value(&self, x: &[F]) -> F {
        self.inner.value(x) + self.penalty(x)
    }

    fn full_gradient(&self, x: &[F], out: &mut [F]) {
        self.inner.full_gradient(x, out);
        self.add_pull(x, out);
    }

    fn value_and_gradient(&self, x: &[F], out: &mut [F]) -> F {
        let v = self.inner.value_and_gradient(x, out);
        self.add_pull(x, out);
        v + self.penalty(x)
    }
}
