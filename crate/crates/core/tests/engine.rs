mod common;

use common::random_point;
use proptest::prelude::*;
use stlsgd_core::engine::{average_models, local_sgd, run_stagewise, EngineError, EvalCadence, ReturnMode, StagewiseOptions};
use stlsgd_core::linalg;
use stlsgd_core::metrics::comm_rounds;
use stlsgd_core::objectives::{pl_objective, quadratic_objective, QuadraticObjective};
use stlsgd_core::rng::{client_rng, seeded};
use stlsgd_core::schedules::{initial_k, plan_stl_sc, StagePlan};
use stlsgd_core::{ClientFleet, LocalSgdConfig, Objective};

fn half_square(clients: usize) -> QuadraticObjective<f64> {
    quadratic_objective(vec![vec![0.0]; clients], 0.0).unwrap()
}

fn noisy(clients: usize, dim: usize, sigma2: f64, spread: f64, seed: u64) -> QuadraticObjective<f64> {
    let mut rng = seeded(seed);
    let centers = (0..clients).map(|_| random_point(&mut rng, dim, spread.max(1e-300))).collect();
    quadratic_objective(centers, sigma2).unwrap()
}

#[test]
fn hand_computed_descent() {
    let obj = half_square(2);
    let mut fleet = ClientFleet::new(2, &[1.0], 0).unwrap();
    let mut cfg = LocalSgdConfig::new(0.5, 2, 1);
    cfg.return_index = Some(1);
    let out = local_sgd(&obj, &[1.0], &cfg, &mut fleet).unwrap();
    assert_eq!(out.x_tilde, vec![0.5]);
    assert_eq!(out.comm_rounds, 2);
    assert_eq!(fleet.states(), &[vec![0.25], vec![0.25]]);

    cfg.return_mode = ReturnMode::LastIterate;
    let mut fleet = ClientFleet::new(2, &[1.0], 0).unwrap();
    assert_eq!(local_sgd(&obj, &[1.0], &cfg, &mut fleet).unwrap().x_tilde, vec![0.25]);
}

#[test]
fn single_round_when_k_equals_t() {
    let obj = noisy(3, 2, 1.0, 1.0, 1);
    let mut fleet = ClientFleet::new(3, &[0.0, 0.0], 4).unwrap();
    let out = local_sgd(&obj, &[0.0, 0.0], &LocalSgdConfig::new(0.1, 37, 37), &mut fleet).unwrap();
    assert_eq!(out.comm_rounds, 1);
}

#[test]
fn averaging_two_diverged_clients() {
    // Clients at 1 pulled toward centres -1 and 3 with eta = 0.5 land on 0 and 2.
    let obj = quadratic_objective(vec![vec![-1.0], vec![3.0]], 0.0).unwrap();
    let mut fleet = ClientFleet::new(2, &[1.0], 0).unwrap();
    let mut cfg = LocalSgdConfig::new(0.5, 1, 2);
    cfg.return_mode = ReturnMode::LastIterate;
    local_sgd(&obj, &[1.0], &cfg, &mut fleet).unwrap();
    assert_eq!(fleet.states(), &[vec![0.0], vec![2.0]]);
    assert_eq!(average_models(&mut fleet), vec![1.0]);
    assert_eq!(fleet.states(), &[vec![1.0], vec![1.0]]);
}

#[test]
fn input_errors() {
    let obj = half_square(2);
    let mut fleet = ClientFleet::new(2, &[1.0], 0).unwrap();
    let cfg = LocalSgdConfig::new(0.1, 0, 1);
    assert_eq!(local_sgd(&obj, &[1.0], &cfg, &mut fleet).unwrap_err(), EngineError::NoIterations);
    let cfg = LocalSgdConfig::new(0.1, 5, 1);
    assert!(matches!(local_sgd(&obj, &[1.0, 2.0], &cfg, &mut fleet), Err(EngineError::DimensionMismatch { .. })));
    let mut three = ClientFleet::new(3, &[1.0], 0).unwrap();
    assert!(matches!(local_sgd(&obj, &[1.0], &cfg, &mut three), Err(EngineError::ClientCountMismatch { .. })));
    let cfg = LocalSgdConfig { return_index: Some(5), ..LocalSgdConfig::new(0.1, 5, 1) };
    assert!(matches!(local_sgd(&obj, &[1.0], &cfg, &mut fleet), Err(EngineError::BadReturnIndex { .. })));
}

#[test]
fn divergence_is_reported_with_context() {
    let obj = half_square(2);
    let mut fleet = ClientFleet::new(2, &[1.0], 0).unwrap();
    let cfg = LocalSgdConfig::new(1e155, 50, 5);
    match local_sgd(&obj, &[1.0], &cfg, &mut fleet) {
        Err(EngineError::Diverged { k, stage, .. }) => assert_eq!((k, stage), (5, 1)),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn synchronous_steps_equal_minibatch_sgd() {
    let (n, d, eta, seed) = (6usize, 4usize, 0.05, 99u64);
    let obj = noisy(n, d, 2.0, 1.5, 3);
    let x0 = vec![2.0, -1.0, 0.5, 3.0];
    let steps = 1000;
    let mut fleet = ClientFleet::new(n, &x0, seed).unwrap();
    let mut reference = x0.clone();
    let mut cfg = LocalSgdConfig::new(eta, 1, 1);
    cfg.return_mode = ReturnMode::LastIterate;
    cfg.eval = EvalCadence::Never;
    let mut x = x0.clone();
    let mut g = vec![0.0; d];
    for t in 1..=steps as u64 {
        x = local_sgd(&obj, &x, &cfg, &mut fleet).unwrap().x_tilde;
        let mut avg = vec![0.0; d];
        for i in 0..n {
            let mut rng = client_rng(seed, i as u64, t);
            obj.stochastic_gradient(i, &reference, 1, &mut rng, &mut g);
            linalg::axpy(1.0 / n as f64, &g, &mut avg);
        }
        linalg::axpy(-eta, &avg, &mut reference);
        let diff = linalg::dist_sq(&x, &reference).sqrt();
        assert!(diff < 1e-12, "step {t}: {diff}");
    }
}

#[test]
fn parallel_and_sequential_runs_are_identical() {
    let obj = noisy(8, 16, 1.0, 2.0, 5);
    let x0 = vec![1.0; 16];
    let mut cfg = LocalSgdConfig::new(0.05, 400, 7);
    cfg.batch_size = 3;
    cfg.eval = EvalCadence::Iterations(10);
    let mut seq = ClientFleet::new(8, &x0, 1234).unwrap();
    let a = local_sgd(&obj, &x0, &cfg, &mut seq).unwrap();
    cfg.parallel = true;
    let mut par = ClientFleet::new(8, &x0, 1234).unwrap();
    let b = local_sgd(&obj, &x0, &cfg, &mut par).unwrap();
    assert_eq!(a.x_tilde, b.x_tilde);
    assert_eq!(a.trace, b.trace);
    assert_eq!(seq.states(), par.states());
}

#[test]
fn divergence_shrinks_with_learning_rate() {
    let (n, d) = (4usize, 10usize);
    let running_mean = |eta: f64, seed: u64| {
        let obj = noisy(n, d, 1.0, 1.0, seed);
        let c = obj.constants();
        let k = initial_k(false, eta, c.lipschitz, n, c.sigma2, c.zeta_star.unwrap()).unwrap();
        let k = (k.floor() as usize).max(1).max(4);
        let x0 = vec![3.0; d];
        let mut fleet = ClientFleet::new(n, &x0, seed).unwrap();
        let mut cfg = LocalSgdConfig::new(eta, 4000, k);
        cfg.eval = EvalCadence::Iterations(1);
        let out = local_sgd(&obj, &x0, &cfg, &mut fleet).unwrap();
        let divs: Vec<f64> = out.trace.records.iter().filter_map(|r| r.divergence).collect();
        divs.iter().sum::<f64>() / divs.len() as f64
    };
    for seed in 0..5 {
        let big = running_mean(0.02, seed);
        let small = running_mean(0.01, seed);
        assert!(big.is_finite() && small.is_finite());
        assert!(small < big, "seed {seed}: {small} !< {big}");
    }
}

#[test]
fn one_stage_plan_matches_local_sgd() {
    let obj = noisy(3, 4, 0.5, 1.0, 8);
    let x1 = vec![1.0, 2.0, 3.0, 4.0];
    let plan = plan_stl_sc(0.1, 50, 5.0, 1, true).unwrap();
    let mut f1 = ClientFleet::new(3, &x1, 77).unwrap();
    let staged = run_stagewise(&obj, &x1, &plan, &mut f1, &StagewiseOptions::default()).unwrap();
    let mut f2 = ClientFleet::new(3, &x1, 77).unwrap();
    let single = local_sgd(&obj, &x1, &LocalSgdConfig::new(0.1, 50, 5), &mut f2).unwrap();
    assert_eq!(staged.x_final, single.x_tilde);
    assert_eq!(staged.trace, single.trace);
    assert_eq!(staged.stage_iterates, vec![x1, single.x_tilde.clone()]);
}

#[test]
fn stage_rounds_add_up() {
    let obj = noisy(2, 2, 1.0, 1.0, 1);
    let plan: StagePlan<f64> = plan_stl_sc(0.1, 60, 4.0, 3, true).unwrap();
    assert_eq!(plan.stages.iter().map(|s| (s.iterations, s.k_eff)).collect::<Vec<_>>(), vec![(60, 4), (120, 8), (240, 16)]);
    let mut fleet = ClientFleet::new(2, &[0.0, 0.0], 3).unwrap();
    let out = run_stagewise(&obj, &[0.0, 0.0], &plan, &mut fleet, &StagewiseOptions::default()).unwrap();
    assert_eq!(out.comm_rounds, 45);
    assert_eq!(comm_rounds(&plan), 45);
    assert_eq!(out.trace.last().unwrap().comm_rounds, 45);
    assert_eq!(out.stage_iterates.len(), 4);
    let stages: Vec<usize> = out.trace.records.iter().map(|r| r.stage).collect();
    assert!(stages.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn prox_requires_weak_convexity() {
    let convex = noisy(1, 1, 0.0, 1.0, 1);
    let plan = plan_stl_sc(0.1, 10, 1.0, 2, true).unwrap();
    let opts = StagewiseOptions { prox_gamma: Some(0.1), ..Default::default() };
    let mut fleet = ClientFleet::new(1, &[0.0], 0).unwrap();
    assert!(matches!(run_stagewise(&convex, &[0.0], &plan, &mut fleet, &opts), Err(EngineError::ProxMisconfigured { .. })));

    let pl = pl_objective::<f64>();
    let too_weak = StagewiseOptions { prox_gamma: Some(0.25), ..Default::default() };
    assert!(matches!(run_stagewise(&pl, &[1.0], &plan, &mut fleet, &too_weak), Err(EngineError::ProxMisconfigured { .. })));
    let ok = StagewiseOptions { prox_gamma: Some(1.0 / 8.0), ..Default::default() };
    let out = run_stagewise(&pl, &[1.0], &plan, &mut fleet, &ok).unwrap();
    assert!(out.trace.records.iter().all(|r| r.gap.is_some()));
}

#[test]
fn trace_time_and_rounds_are_monotone() {
    let obj = noisy(4, 3, 1.0, 1.0, 2);
    let plan = plan_stl_sc(0.2, 30, 1.5, 4, false).unwrap();
    let mut fleet = ClientFleet::new(4, &[1.0; 3], 8).unwrap();
    let opts = StagewiseOptions { eval: EvalCadence::Iterations(7), ..Default::default() };
    let out = run_stagewise(&obj, &[1.0; 3], &plan, &mut fleet, &opts).unwrap();
    for w in out.trace.records.windows(2) {
        assert!(w[1].t > w[0].t);
        assert!(w[1].comm_rounds >= w[0].comm_rounds);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]
    #[test]
    fn consensus_after_every_average(n in 1usize..9, t in 1usize..300, k in 1usize..40, seed: u64) {
        let obj = noisy(n, 3, 1.0, 2.0, seed);
        let x0 = vec![0.5; 3];
        let mut fleet = ClientFleet::new(n, &x0, seed).unwrap();
        let mut cfg = LocalSgdConfig::new(0.05, t, k);
        cfg.eval = EvalCadence::CommRounds(1);
        let out = local_sgd(&obj, &x0, &cfg, &mut fleet).unwrap();
        prop_assert_eq!(out.comm_rounds, (t / k) as u64);
        for r in &out.trace.records {
            if r.t % k as u64 == 0 {
                prop_assert_eq!(r.divergence, Some(0.0));
            }
        }
    }
}
