use rand::Rng;

use super::{ClientFleet, EngineError, RunTrace, TraceRecord};
use crate::linalg;
use crate::objectives::Objective;
use crate::rng::control_rng;
use crate::scalar::Scalar;
use crate::schedules::{decaying_lr, BatchGrowth};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReturnMode {
    /// `x̂_t` for an index `t ∈ {0, …, T−1}` fixed before the run.
    RandomIterate,
    /// `x̂_T`.
    LastIterate,
}

/// When the averaged iterate is evaluated. Run start and every stage end are
/// always recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalCadence {
    /// Every `n` global iterations.
    Iterations(usize),
    /// After every `m`-th averaging event.
    CommRounds(usize),
    Never,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSgdConfig<F> {
    pub eta: F,
    pub iterations: usize,
    /// Communication period `k`.
    pub period: usize,
    pub batch_size: usize,
    pub return_mode: ReturnMode,
    pub return_index: Option<usize>,
    pub eval: EvalCadence,
    /// `α` in `η_t = η/(1 + α t)`, with `t` the global iteration count.
    pub lr_decay: Option<F>,
    pub batch_growth: Option<BatchGrowth>,
    /// Step clients on the rayon pool. Results do not depend on this flag.
    pub parallel: bool,
}

impl<F: Scalar> LocalSgdConfig<F> {
    pub fn new(eta: F, iterations: usize, period: usize) -> Self {
        Self {
            eta,
            iterations,
            period,
            batch_size: 1,
            return_mode: ReturnMode::RandomIterate,
            return_index: None,
            eval: EvalCadence::CommRounds(1),
            lr_decay: None,
            batch_growth: None,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LocalSgdOutput<F> {
    pub x_tilde: Vec<F>,
    pub trace: RunTrace<F>,
    pub comm_rounds: u64,
    /// The index `t̂` whose average was returned (random-iterate mode).
    pub return_index: Option<usize>,
}

/// Per-client mini-batch size, possibly growing once per local epoch.
#[derive(Debug, Clone)]
pub(crate) struct BatchState {
    size: f64,
    progress: usize,
    growth: Option<BatchGrowth>,
}

impl BatchState {
    pub(crate) fn new(batch_size: usize, growth: Option<BatchGrowth>) -> Self {
        let size = growth.map_or(batch_size, |g| g.initial).max(1) as f64;
        Self { size, progress: 0, growth }
    }

    fn current(&self) -> usize {
        self.size.floor() as usize
    }

    /// Accounts for one step and grows the batch at epoch boundaries.
    fn consumed(&mut self, batch: usize) {
        let Some(g) = self.growth else { return };
        self.progress += batch;
        while self.progress >= g.epoch_examples {
            self.progress -= g.epoch_examples;
            if self.current() <= g.cap {
                self.size *= g.factor;
            }
        }
    }
}

/// Mutable bookkeeping that spans the stages of one run.
pub(crate) struct RunState<F> {
    pub comm_rounds: u64,
    pub stage: usize,
    pub batch: BatchState,
    pub trace: RunTrace<F>,
}

pub(crate) fn record<F: Scalar>(
    metric: &dyn Objective<F>,
    fleet: &ClientFleet<F>,
    state: &mut RunState<F>,
    eta: F,
    k: usize,
) -> Result<(), EngineError> {
    let x = fleet.mean();
    let mut g = vec![F::zero(); x.len()];
    let value = metric.value_and_gradient(&x, &mut g);
    if !value.is_finite() || !linalg::all_finite(&g) {
        return Err(diverged(fleet, eta, k, state.stage));
    }
    state.trace.push(TraceRecord {
        t: fleet.clock(),
        comm_rounds: state.comm_rounds,
        gap: metric.optimum().map(|o| value - o.value),
        grad_norm_sq: Some(linalg::norm_sq(&g)),
        divergence: Some(fleet.divergence()),
        eta,
        k,
        stage: state.stage,
    });
    Ok(())
}

fn diverged<F: Scalar>(fleet: &ClientFleet<F>, eta: F, k: usize, stage: usize) -> EngineError {
    EngineError::Diverged { t: fleet.clock(), eta: eta.as_f64(), k, stage }
}

pub(crate) fn check_inputs<F: Scalar>(
    obj: &dyn Objective<F>,
    x0: &[F],
    fleet: &ClientFleet<F>,
) -> Result<(), EngineError> {
    if x0.len() != obj.dim() {
        return Err(EngineError::DimensionMismatch { expected: obj.dim(), got: x0.len() });
    }
    if fleet.dim() != obj.dim() {
        return Err(EngineError::DimensionMismatch { expected: obj.dim(), got: fleet.dim() });
    }
    if fleet.len() != obj.num_clients() {
        return Err(EngineError::ClientCountMismatch { fleet: fleet.len(), objective: obj.num_clients() });
    }
    Ok(())
}

/// Core loop: steps are taken on `step_obj`, metrics are measured on `metric`.
pub(crate) fn run_local<F: Scalar>(
    step_obj: &dyn Objective<F>,
    metric: &dyn Objective<F>,
    x0: &[F],
    cfg: &LocalSgdConfig<F>,
    fleet: &mut ClientFleet<F>,
    state: &mut RunState<F>,
) -> Result<(Vec<F>, Option<usize>, u64), EngineError> {
    if cfg.iterations == 0 {
        return Err(EngineError::NoIterations);
    }
    if cfg.period == 0 {
        return Err(EngineError::ZeroPeriod);
    }
    let (t_total, k) = (cfg.iterations, cfg.period);
    let return_index = match cfg.return_mode {
        ReturnMode::LastIterate => None,
        ReturnMode::RandomIterate => Some(match cfg.return_index {
            Some(i) if i < t_total => i,
            Some(i) => return Err(EngineError::BadReturnIndex { index: i, iterations: t_total }),
            None => control_rng(fleet.seed(), fleet.clock()).random_range(0..t_total),
        }),
    };

    fleet.reset_to(x0);
    if fleet.clock() == 0 && cfg.eval != EvalCadence::Never {
        record(metric, fleet, state, cfg.eta, k)?;
    }
    let mut chosen = (return_index == Some(0)).then(|| x0.to_vec());
    let rounds_before = state.comm_rounds;
    let mut lr = cfg.eta;
    let mut schedule = Vec::new();
    let mut t = 0;

    while t < t_total {
        // Advance to the next point where something other than a local step happens.
        let mut stop = ((t / k + 1) * k).min(t_total);
        if let Some(r) = return_index.filter(|&r| r > t) {
            stop = stop.min(r);
        }
        if let EvalCadence::Iterations(n) = cfg.eval {
            let n = n.max(1) as u64;
            let next = (fleet.clock() / n + 1) * n - fleet.clock();
            stop = stop.min(t + next as usize);
        }
        schedule.clear();
        for j in 0..(stop - t) as u64 {
            lr = match cfg.lr_decay {
                Some(alpha) => decaying_lr(cfg.eta, alpha, fleet.clock() + j),
                None => cfg.eta,
            };
            let batch = state.batch.current();
            schedule.push((lr, batch));
            state.batch.consumed(batch);
        }
        if !fleet.run_segment(step_obj, &schedule, cfg.parallel) {
            return Err(diverged(fleet, lr, k, state.stage));
        }
        t = stop;
        let averaged = t % k == 0;
        if averaged {
            fleet.average();
            state.comm_rounds += 1;
        }
        if return_index == Some(t) {
            chosen = Some(fleet.mean());
        }
        let due = match cfg.eval {
            EvalCadence::Iterations(n) => fleet.clock() % n.max(1) as u64 == 0,
            EvalCadence::CommRounds(m) => averaged && state.comm_rounds % m.max(1) as u64 == 0,
            EvalCadence::Never => false,
        };
        if due {
            record(metric, fleet, state, lr, k)?;
        }
    }
    if cfg.eval != EvalCadence::Never {
        record(metric, fleet, state, lr, k)?;
    }
    let x_tilde = chosen.unwrap_or_else(|| fleet.mean());
    if !linalg::all_finite(&x_tilde) {
        return Err(diverged(fleet, lr, k, state.stage));
    }
    Ok((x_tilde, return_index, state.comm_rounds - rounds_before))
}

/// Local SGD from `x0` on every client of `fleet`.
///
/// Each of the `T` iterations takes one stochastic step per client; whenever
/// `t mod k = 0` the client models are replaced by their average. Returns the
/// averaged iterate at the pre-drawn index (random-iterate mode) or at `T`.
pub fn local_sgd<F: Scalar>(
    obj: &dyn Objective<F>,
    x0: &[F],
    cfg: &LocalSgdConfig<F>,
    fleet: &mut ClientFleet<F>,
) -> Result<LocalSgdOutput<F>, EngineError> {
    check_inputs(obj, x0, fleet)?;
    let mut state = RunState {
        comm_rounds: 0,
        stage: 1,
        batch: BatchState::new(cfg.batch_size, cfg.batch_growth),
        trace: RunTrace::new(),
    };
    let (x_tilde, return_index, comm_rounds) = run_local(obj, obj, x0, cfg, fleet, &mut state)?;
    Ok(LocalSgdOutput { x_tilde, trace: state.trace, comm_rounds, return_index })
}
