#![allow(dead_code)]

use rand::Rng;
use stlsgd_core::data::{two_class, TwoClassSpec};
use stlsgd_core::linalg;
use stlsgd_core::objectives::LogisticObjective;
use stlsgd_core::rng::seeded;
use stlsgd_core::{Dataset, Objective};

pub fn small_logistic(lambda_scale: f64, clients: usize) -> LogisticObjective<f64> {
    let data: Dataset<f64> = two_class(&TwoClassSpec { examples: 300, features: 12, seed: 5, ..Default::default() });
    let n = data.len();
    let shards: Vec<Vec<usize>> = (0..clients).map(|c| (c..n).step_by(clients).collect()).collect();
    LogisticObjective::new(std::sync::Arc::new(data), lambda_scale / n as f64)
        .unwrap()
        .with_shards(shards)
        .unwrap()
}

pub fn random_point(rng: &mut impl Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Central finite-difference gradient with step `1e-6 (1 + ‖x‖)`.
pub fn fd_gradient(obj: &dyn Objective<f64>, x: &[f64]) -> Vec<f64> {
    let h = 1e-6 * (1.0 + linalg::norm_sq(x).sqrt());
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|j| {
            xp[j] = x[j] + h;
            let up = obj.value(&xp);
            xp[j] = x[j] - h;
            let down = obj.value(&xp);
            xp[j] = x[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest relative error `‖g_fd − g‖ / ‖g‖` over `points` random points.
pub fn worst_fd_error(obj: &dyn Objective<f64>, points: usize, scale: f64, seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let x = random_point(&mut rng, obj.dim(), scale);
        let mut g = vec![0.0; obj.dim()];
        obj.full_gradient(&x, &mut g);
        let fd = fd_gradient(obj, &x);
        let err = linalg::dist_sq(&fd, &g).sqrt() / linalg::norm_sq(&g).sqrt();
        worst = worst.max(err);
    }
    worst
}
