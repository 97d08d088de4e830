use rand_distr::{Distribution, StandardNormal};

use super::{check_dim, Objective, ObjectiveConstants, ObjectiveError, Optimum};
use crate::linalg;
use crate::rng::ClientRng;
use crate::scalar::Scalar;

/// Client `i` holds `f_i(x) = ½‖x − c_i‖²`; stochastic gradients add isotropic
/// Gaussian noise with `E‖noise‖² = σ²` per sample.
#[derive(Debug, Clone)]
pub struct QuadraticObjective<F> {
    centers: Vec<Vec<F>>,
    constants: ObjectiveConstants<F>,
    optimum: Optimum<F>,
    noise_std: F,
}

pub fn quadratic_objective<F: Scalar>(centers: Vec<Vec<F>>, sigma2: F) -> Result<QuadraticObjective<F>, ObjectiveError> {
    QuadraticObjective::new(centers, sigma2)
}

/// Centres `c + spread·u_i` with `c` and every `u_i` drawn from `N(0, I)`.
/// `spread = 0` gives identical clients.
pub fn random_quadratic<F: Scalar>(
    clients: usize,
    dim: usize,
    spread: F,
    sigma2: F,
    seed: u64,
) -> Result<QuadraticObjective<F>, ObjectiveError> {
    let mut rng = crate::rng::seeded(seed);
    let mut normal = || F::lit(StandardNormal.sample(&mut rng));
    let base: Vec<F> = (0..dim).map(|_| normal()).collect();
    let centers = (0..clients).map(|_| base.iter().map(|&b| b + spread * normal()).collect()).collect();
    QuadraticObjective::new(centers, sigma2)
}

impl<F: Scalar> QuadraticObjective<F> {
    pub fn new(centers: Vec<Vec<F>>, sigma2: F) -> Result<Self, ObjectiveError> {
        let first = centers.first().ok_or(ObjectiveError::NoClients)?;
        let dim = first.len();
        if dim == 0 {
            return Err(ObjectiveError::DimensionMismatch { expected: 1, got: 0 });
        }
        for c in &centers {
            check_dim(dim, c.len())?;
        }
        if !(sigma2 >= F::zero()) {
            return Err(ObjectiveError::NegativeVariance(sigma2.as_f64()));
        }
        let mut mean = vec![F::zero(); dim];
        linalg::mean_of(&centers, &mut mean);
        let n = F::from_usize_lossy(centers.len());
        let half = F::lit(0.5);
        let value = centers.iter().map(|c| half * linalg::dist_sq(&mean, c)).sum::<F>() / n;
        let zeta_star = centers.iter().map(|c| linalg::dist_sq(&mean, c)).sum::<F>() / n;
        let constants = ObjectiveConstants {
            lipschitz: F::one(),
            mu: Some(F::one()),
            rho: None,
            sigma2,
            zeta_star: Some(zeta_star),
        };
        let noise_std = (sigma2 / F::from_usize_lossy(dim)).sqrt();
        Ok(Self { centers, constants, optimum: Optimum { point: mean, value }, noise_std })
    }

    pub fn centers(&self) -> &[Vec<F>] {
        &self.centers
    }

    /// Per-coordinate noise variance of a single-sample gradient.
    pub fn coordinate_variance(&self) -> F {
        self.noise_std * self.noise_std
    }
}

impl<F: Scalar> Objective<F> for QuadraticObjective<F> {
    fn dim(&self) -> usize {
        self.centers[0].len()
    }

    fn num_clients(&self) -> usize {
        self.centers.len()
    }

    fn client_value(&self, client: usize, x: &[F]) -> F {
        F::lit(0.5) * linalg::dist_sq(x, &self.centers[client])
    }

    fn client_gradient(&self, client: usize, x: &[F], out: &mut [F]) {
        for ((o, &xi), &ci) in out.iter_mut().zip(x).zip(&self.centers[client]) {
            *o = xi - ci;
        }
    }

    fn stochastic_gradient(&self, client: usize, x: &[F], batch_size: usize, rng: &mut ClientRng, out: &mut [F]) {
        self.client_gradient(client, x, out);
        if self.noise_std > F::zero() {
            // Mean of `batch_size` independent Gaussians, drawn as one scaled Gaussian.
            let std = self.noise_std / F::from_usize_lossy(batch_size.max(1)).sqrt();
            for o in out.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *o += std * F::lit(z);
            }
        }
    }

    fn constants(&self) -> &ObjectiveConstants<F> {
        &self.constants
    }

    fn optimum(&self) -> Option<&Optimum<F>> {
        Some(&self.optimum)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::client_rng;

    #[test]
    fn zero_spread_means_identical_clients() {
        let q = random_quadratic(4, 3, 0.0f64, 1.0, 9).unwrap();
        assert_eq!(q.constants().zeta_star, Some(0.0));
        let h = random_quadratic(4, 3, 1.0f64, 1.0, 9).unwrap();
        assert!(h.constants().zeta_star.unwrap() > 0.0);
        assert_eq!(q.centers()[0], q.centers()[3]);
    }

    #[test]
    fn optimum_is_mean_of_centers() {
        let q = quadratic_objective(vec![vec![1.0], vec![-1.0]], 0.0).unwrap();
        let opt = q.optimum().unwrap();
        assert_eq!(opt.point, vec![0.0]);
        assert_eq!(opt.value, 0.5);
        assert_eq!(q.constants().zeta_star, Some(1.0));
        assert_eq!(q.value(&[0.0]), 0.5);
        let mut g = [0.0];
        q.client_gradient(0, &[0.0], &mut g);
        assert_eq!(g, [-1.0]);
        q.client_gradient(1, &[0.0], &mut g);
        assert_eq!(g, [1.0]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let err = quadratic_objective(vec![vec![1.0], vec![1.0, 2.0]], 0.0).unwrap_err();
        assert!(matches!(err, ObjectiveError::DimensionMismatch { .. }));
        assert!(quadratic_objective::<f64>(vec![], 0.0).is_err());
        assert!(quadratic_objective(vec![vec![1.0]], -0.1).is_err());
    }

    #[test]
    fn noise_energy_matches_sigma2() {
        let q = quadratic_objective(vec![vec![0.0f64; 4]], 0.25).unwrap();
        assert!((q.coordinate_variance() - 0.0625).abs() < 1e-15);
        let x = [0.0; 4];
        let mut g = [0.0; 4];
        let draws = 10_000;
        let mut energy = 0.0;
        for t in 0..draws {
            let mut rng = client_rng(11, 0, t);
            q.stochastic_gradient(0, &x, 1, &mut rng, &mut g);
            energy += linalg::norm_sq(&g);
        }
        let mean = energy / draws as f64;
        assert!((mean - 0.25).abs() < 0.05 * 0.25, "mean energy {mean}");
    }
}
