mod common;

use common::{random_point, small_logistic, worst_fd_error};
use stlsgd_core::linalg;
use stlsgd_core::metrics::{bregman_divergence, zeta_at};
use stlsgd_core::objectives::{objective_value, pl_objective, prox_wrap, quadratic_objective, PlObjective};
use stlsgd_core::rng::{client_rng, seeded};
use stlsgd_core::Objective;

fn noisy_quadratic() -> stlsgd_core::QuadraticObjective64 {
    let mut rng = seeded(17);
    let centers = (0..4).map(|_| random_point(&mut rng, 5, 2.0)).collect();
    quadratic_objective(centers, 0.5).unwrap()
}

#[test]
fn gradients_match_finite_differences() {
    let logistic = small_logistic(1.0, 3);
    assert!(worst_fd_error(&logistic, 100, 1.0, 1) < 1e-5);
    assert!(worst_fd_error(&noisy_quadratic(), 100, 3.0, 2) < 1e-5);
    assert!(worst_fd_error(&pl_objective::<f64>(), 100, 5.0, 3) < 1e-5);
    let f = pl_objective::<f64>();
    let prox = prox_wrap(&f, vec![0.4], 0.125).unwrap();
    assert!(worst_fd_error(&prox, 100, 5.0, 4) < 1e-5);
}

#[test]
fn value_checks_dimension() {
    let q = quadratic_objective(vec![vec![1.0], vec![-1.0]], 0.0).unwrap();
    assert_eq!(objective_value(&q, &[0.0]).unwrap(), 0.5);
    assert!(objective_value(&q, &[0.0, 1.0]).is_err());
    assert_eq!(objective_value(&pl_objective::<f64>(), &[0.0]).unwrap(), 0.0);
    let logistic = small_logistic(0.0, 1);
    let origin = vec![0.0; logistic.dim()];
    assert!((objective_value(&logistic, &origin).unwrap() - std::f64::consts::LN_2).abs() < 1e-13);
}

#[test]
fn gradients_are_lipschitz_with_declared_constant() {
    let objectives: Vec<Box<dyn Objective<f64>>> =
        vec![Box::new(small_logistic(1.0, 2)), Box::new(noisy_quadratic()), Box::new(pl_objective::<f64>())];
    let mut rng = seeded(9);
    for obj in &objectives {
        let l = obj.constants().lipschitz;
        for _ in 0..200 {
            let x = random_point(&mut rng, obj.dim(), 3.0);
            let y = random_point(&mut rng, obj.dim(), 3.0);
            let (mut gx, mut gy) = (vec![0.0; obj.dim()], vec![0.0; obj.dim()]);
            obj.full_gradient(&x, &mut gx);
            obj.full_gradient(&y, &mut gy);
            assert!(linalg::dist_sq(&gx, &gy).sqrt() <= l * linalg::dist_sq(&x, &y).sqrt() * (1.0 + 1e-12));
        }
    }
}

/// Mean of `draws` stochastic gradients per coordinate must sit within three
/// standard errors of the exact client gradient.
fn assert_unbiased(obj: &dyn Objective<f64>, x: &[f64], draws: u64) {
    let d = obj.dim();
    for client in 0..obj.num_clients() {
        let mut exact = vec![0.0; d];
        obj.client_gradient(client, x, &mut exact);
        let (mut sum, mut sum_sq) = (vec![0.0; d], vec![0.0; d]);
        let mut g = vec![0.0; d];
        for t in 0..draws {
            let mut rng = client_rng(21, client as u64, t);
            obj.stochastic_gradient(client, x, 1, &mut rng, &mut g);
            for j in 0..d {
                sum[j] += g[j];
                sum_sq[j] += g[j] * g[j];
            }
        }
        let n = draws as f64;
        for j in 0..d {
            let mean = sum[j] / n;
            let var = (sum_sq[j] / n - mean * mean).max(0.0);
            let se = (var / n).sqrt();
            assert!(
                (mean - exact[j]).abs() <= 3.0 * se + 1e-12,
                "client {client} coord {j}: mean {mean} exact {} se {se}",
                exact[j]
            );
        }
    }
}

#[test]
fn stochastic_gradients_are_unbiased() {
    let logistic = small_logistic(1.0, 2);
    let x = random_point(&mut seeded(3), logistic.dim(), 0.5);
    assert_unbiased(&logistic, &x, 100_000);
    let q = noisy_quadratic();
    assert_unbiased(&q, &[0.3, -0.2, 1.0, 0.0, 2.0], 100_000);
    let pl = PlObjective::<f64>::new(2, 0.3);
    assert_unbiased(&pl, &[1.3], 100_000);
}

#[test]
fn prox_wrapper_is_strongly_convex_on_chords() {
    let f = pl_objective::<f64>();
    let rho = f.constants().rho.unwrap();
    let mut rng = seeded(44);
    let mut violations = 0;
    for _ in 0..1000 {
        let center = random_point(&mut rng, 1, 5.0);
        let prox = prox_wrap(&f, center, 1.0 / (2.0 * rho)).unwrap();
        let x = random_point(&mut rng, 1, 6.0);
        let y = random_point(&mut rng, 1, 6.0);
        let mut g = [0.0];
        let fx = prox.value_and_gradient(&x, &mut g);
        let lower = fx + g[0] * (y[0] - x[0]) + rho / 2.0 * (y[0] - x[0]).powi(2);
        if prox.value(&y) < lower - 1e-9 {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn identical_shards_have_no_heterogeneity() {
    let q = quadratic_objective(vec![vec![1.0, -2.0]; 6], 1.0).unwrap();
    assert_eq!(q.constants().zeta_star, Some(0.0));
    let mut rng = seeded(1);
    for _ in 0..20 {
        let x = random_point(&mut rng, 2, 4.0);
        assert_eq!(zeta_at(&q, &x), 0.0);
    }
}

#[test]
fn bregman_is_nonnegative_and_controls_gradient_gap() {
    let objectives: Vec<Box<dyn Objective<f64>>> = vec![Box::new(noisy_quadratic()), Box::new(small_logistic(1.0, 2))];
    let mut rng = seeded(12);
    for obj in &objectives {
        let l = obj.constants().lipschitz;
        for _ in 0..1000 {
            let x = random_point(&mut rng, obj.dim(), 2.0);
            let y = random_point(&mut rng, obj.dim(), 2.0);
            let d = bregman_divergence(obj.as_ref(), &x, &y).unwrap();
            assert!(d >= -1e-12);
            let (mut gx, mut gy) = (vec![0.0; obj.dim()], vec![0.0; obj.dim()]);
            obj.full_gradient(&x, &mut gx);
            obj.full_gradient(&y, &mut gy);
            assert!(linalg::dist_sq(&gx, &gy) <= 2.0 * l * d + 1e-10);
        }
    }
}

#[test]
fn f32_objectives_agree_with_f64() {
    let f64_obj = quadratic_objective(vec![vec![1.0f64, 2.0], vec![-1.0, 0.5]], 0.0).unwrap();
    let f32_obj = quadratic_objective(vec![vec![1.0f32, 2.0], vec![-1.0, 0.5]], 0.0).unwrap();
    let v64 = f64_obj.value(&[0.25, -0.5]);
    let v32 = f32_obj.value(&[0.25, -0.5]);
    assert!((v64 - v32 as f64).abs() < 1e-6);
}
