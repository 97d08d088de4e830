use rand::Rng;

use super::local_sgd::{check_inputs, run_local, BatchState, RunState};
use super::{ClientFleet, EngineError, EvalCadence, LocalSgdConfig, ReturnMode, RunTrace};
use crate::objectives::{prox_wrap, Objective};
use crate::rng::ClientRng;
use crate::scalar::Scalar;
use crate::schedules::StagePlan;

/// Settings shared by every stage of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct StagewiseOptions<F> {
    /// When set, stage `s` minimizes `f + ‖x − x_s‖²/(2γ)` instead of `f`.
    pub prox_gamma: Option<F>,
    pub batch_size: usize,
    pub return_mode: ReturnMode,
    pub eval: EvalCadence,
    pub parallel: bool,
}

impl<F> Default for StagewiseOptions<F> {
    fn default() -> Self {
        Self {
            prox_gamma: None,
            batch_size: 1,
            return_mode: ReturnMode::RandomIterate,
            eval: EvalCadence::CommRounds(1),
            parallel: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StagewiseOutput<F> {
    pub x_final: Vec<F>,
    pub trace: RunTrace<F>,
    /// `x_1, …, x_{S+1}`.
    pub stage_iterates: Vec<Vec<F>>,
    pub comm_rounds: u64,
}

/// Runs Local SGD once per stage of `plan`, each stage starting from the
/// previous stage's return value. Metrics are always measured on `obj`, also
/// when the stages optimize a proximal objective.
pub fn run_stagewise<F: Scalar>(
    obj: &dyn Objective<F>,
    x1: &[F],
    plan: &StagePlan<F>,
    fleet: &mut ClientFleet<F>,
    opts: &StagewiseOptions<F>,
) -> Result<StagewiseOutput<F>, EngineError> {
    check_inputs(obj, x1, fleet)?;
    if plan.stages.is_empty() {
        return Err(EngineError::EmptyPlan);
    }
    if let Some(gamma) = opts.prox_gamma {
        let rho = obj.constants().rho;
        let ok = gamma > F::zero() && rho.is_some_and(|r| F::one() / gamma > r);
        if !ok {
            return Err(EngineError::ProxMisconfigured { gamma: gamma.as_f64(), rho: rho.map(Scalar::as_f64) });
        }
    }

    let batch_size = plan.batch_size.unwrap_or(opts.batch_size);
    let mut state = RunState {
        comm_rounds: 0,
        stage: 1,
        batch: BatchState::new(batch_size, plan.batch_growth),
        trace: RunTrace::new(),
    };
    let mut x = x1.to_vec();
    let mut stage_iterates = vec![x.clone()];

    for (s, stage) in plan.stages.iter().enumerate() {
        state.stage = s + 1;
        let cfg = LocalSgdConfig {
            eta: stage.eta,
            iterations: stage.iterations,
            period: stage.k_eff,
            batch_size,
            return_mode: opts.return_mode,
            return_index: None,
            eval: opts.eval,
            lr_decay: plan.lr_decay,
            batch_growth: plan.batch_growth,
            parallel: opts.parallel,
        };
        let (next, _, _) = match opts.prox_gamma {
            Some(gamma) => {
                let wrapped = prox_wrap(obj, x.clone(), gamma)?;
                run_local(&wrapped, obj, &x, &cfg, fleet, &mut state)?
            }
            None => run_local(obj, obj, &x, &cfg, fleet, &mut state)?,
        };
        x = next;
        stage_iterates.push(x.clone());
    }

    Ok(StagewiseOutput { x_final: x, trace: state.trace, stage_iterates, comm_rounds: state.comm_rounds })
}

/// Draws `s ∈ {1, …, S}` with probability `s / (1 + 2 + … + S)`.
pub fn sample_stage_index(stages: usize, rng: &mut ClientRng) -> usize {
    assert!(stages >= 1, "need at least one stage");
    let total = stages * (stages + 1) / 2;
    let r = rng.random_range(0..total);
    // Smallest s with s(s+1)/2 > r.
    let mut s = 1;
    let mut cum = 1;
    while cum <= r {
        s += 1;
        cum += s;
    }
    s
}

impl<F: Scalar> StagewiseOutput<F> {
    /// Stage start `x_s` for `s` drawn by [`sample_stage_index`] over the `S`
    /// stages of the run.
    pub fn sampled_stage_iterate(&self, rng: &mut ClientRng) -> (usize, &[F]) {
        let stages = self.stage_iterates.len() - 1;
        let s = sample_stage_index(stages, rng);
        (s, &self.stage_iterates[s - 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn single_stage_always_one() {
        let mut rng = seeded(1);
        assert!((0..100).all(|_| sample_stage_index(1, &mut rng) == 1));
    }

    #[test]
    fn stage_weights_proportional_to_index() {
        let mut rng = seeded(2);
        let draws = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..draws {
            counts[sample_stage_index(2, &mut rng)] += 1;
        }
        let p1 = counts[1] as f64 / draws as f64;
        let p2 = counts[2] as f64 / draws as f64;
        assert!((p1 - 1.0 / 3.0).abs() < 0.01 && (p2 - 2.0 / 3.0).abs() < 0.01);

        let mut hits = 0;
        for _ in 0..draws {
            hits += usize::from(sample_stage_index(4, &mut rng) == 4);
        }
        assert!((hits as f64 / draws as f64 - 0.4).abs() < 0.01);
    }
}
