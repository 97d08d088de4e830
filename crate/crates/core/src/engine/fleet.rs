use rayon::prelude::*;

use super::EngineError;
use crate::linalg;
use crate::objectives::Objective;
use crate::rng::client_rng;
use crate::scalar::Scalar;

/// `N` simulated clients: one local iterate each plus the seed that keys their
/// random streams. `clock` counts global iterations so streams never repeat
/// across stages.
#[derive(Debug, Clone)]
pub struct ClientFleet<F> {
    states: Vec<Vec<F>>,
    scratch: Vec<Vec<F>>,
    seed: u64,
    clock: u64,
}

impl<F: Scalar> ClientFleet<F> {
    pub fn new(num_clients: usize, x0: &[F], seed: u64) -> Result<Self, EngineError> {
        if num_clients == 0 {
            return Err(EngineError::NoClients);
        }
        Ok(Self::from_states(vec![x0.to_vec(); num_clients], seed))
    }

    /// Fleet with explicit per-client states. Panics on an empty or ragged set.
    pub fn from_states(states: Vec<Vec<F>>, seed: u64) -> Self {
        assert!(!states.is_empty(), "fleet needs at least one client");
        let dim = states[0].len();
        assert!(states.iter().all(|s| s.len() == dim), "client states differ in dimension");
        let scratch = vec![vec![F::zero(); dim]; states.len()];
        Self { states, scratch, seed, clock: 0 }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn states(&self) -> &[Vec<F>] {
        &self.states
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Global iterations taken so far.
    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn reset_to(&mut self, x: &[F]) {
        for s in &mut self.states {
            s.copy_from_slice(x);
        }
    }

    /// Current mean iterate `x̂`, without touching the states.
    pub fn mean(&self) -> Vec<F> {
        let mut out = vec![F::zero(); self.dim()];
        linalg::mean_of(&self.states, &mut out);
        out
    }

    /// `(1/N) Σ ‖x̂ − x^i‖²`
    pub fn divergence(&self) -> F {
        let mean = self.mean();
        let total: F = self.states.iter().map(|s| linalg::dist_sq(&mean, s)).sum();
        total / F::from_usize_lossy(self.len())
    }

    /// Runs `schedule.len()` local steps on every client without communication;
    /// step `j` uses `(lr, batch) = schedule[j]` and the stream keyed by clock
    /// value `clock + 1 + j`. Returns false if any client state became non-finite.
    pub(crate) fn run_segment(&mut self, obj: &dyn Objective<F>, schedule: &[(F, usize)], parallel: bool) -> bool {
        let (seed, t0) = (self.seed, self.clock);
        self.clock += schedule.len() as u64;
        let update = |(i, (x, g)): (usize, (&mut Vec<F>, &mut Vec<F>))| {
            for (j, &(lr, batch)) in schedule.iter().enumerate() {
                let mut rng = client_rng(seed, i as u64, t0 + 1 + j as u64);
                obj.stochastic_gradient(i, x, batch, &mut rng, g);
                linalg::axpy(-lr, g, x);
            }
            linalg::all_finite(x)
        };
        if parallel && self.states.len() > 1 {
            self.states
                .par_iter_mut()
                .zip(self.scratch.par_iter_mut())
                .enumerate()
                .map(update)
                .reduce(|| true, |a, b| a && b)
        } else {
            self.states.iter_mut().zip(self.scratch.iter_mut()).enumerate().map(update).fold(true, |a, b| a && b)
        }
    }

    /// Replaces every state by the uniform average and returns it.
    pub fn average(&mut self) -> Vec<F> {
        let mean = self.mean();
        self.reset_to(&mean);
        mean
    }
}

/// Averages the fleet in place (client order 0..N) and returns the consensus model.
pub fn average_models<F: Scalar>(fleet: &mut ClientFleet<F>) -> Vec<F> {
    fleet.average()
}
