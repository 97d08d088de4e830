//! Stage plans: per-stage `(η_s, T_s, k_s)` for the stagewise methods and the
//! single-stage configurations of the baselines.

use std::fmt;

use log::warn;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("at least one stage is required")]
    NoStages,
    #[error("stage {0} has too many iterations to represent")]
    Overflow(usize),
    #[error("non-IID communication period is undefined with sigma2 = 0 and zeta_star > 0; set k explicitly")]
    DegenerateNoise,
    #[error("option must be 1 or 2, got {0}")]
    InvalidOption(u8),
    #[error("baseline {kind} requires {param}")]
    MissingParameter { kind: BaselineKind, param: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    StronglyConvex,
    NonConvexOption1,
    NonConvexOption2,
    Baseline(BaselineKind),
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::StronglyConvex => write!(f, "sc"),
            Regime::NonConvexOption1 => write!(f, "nc-opt1"),
            Regime::NonConvexOption2 => write!(f, "nc-opt2"),
            Regime::Baseline(kind) => write!(f, "baseline-{kind}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NcOption {
    /// Geometric schedule, same as the strongly convex plan.
    One,
    /// `η_s = η₁/s`, `T_s = s·T₁`, linear (IID) or `√s` (non-IID) period growth.
    Two,
}

impl TryFrom<u8> for NcOption {
    type Error = ScheduleError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(NcOption::One),
            2 => Ok(NcOption::Two),
            other => Err(ScheduleError::InvalidOption(other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Sync,
    LocalFixedK,
    LbSgd,
    CrPsgd,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::Sync => "sync",
            BaselineKind::LocalFixedK => "local-fixed-k",
            BaselineKind::LbSgd => "lb-sgd",
            BaselineKind::CrPsgd => "cr-psgd",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage<F> {
    pub eta: F,
    pub iterations: usize,
    /// Real-valued period from the growth recurrence.
    pub k_real: F,
    /// `max{⌊k_real⌋, 1}`, the period actually used.
    pub k_eff: usize,
}

impl<F: Scalar> Stage<F> {
    fn new(eta: F, iterations: usize, k_real: F) -> Self {
        let k_eff = k_real.floor().to_usize().unwrap_or(1).max(1);
        Self { eta, iterations, k_real, k_eff }
    }
}

/// Per-client mini-batch that grows geometrically once per local epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchGrowth {
    pub initial: usize,
    pub factor: f64,
    /// Growth stops once the batch exceeds this size.
    pub cap: usize,
    /// Examples a client must consume to finish one epoch.
    pub epoch_examples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StagePlan<F> {
    pub stages: Vec<Stage<F>>,
    pub regime: Regime,
    pub iid: bool,
    /// Per-iteration decay `η_t = η₁ / (1 + α t)` within a stage.
    pub lr_decay: Option<F>,
    /// Per-client batch size that replaces the run default.
    pub batch_size: Option<usize>,
    pub batch_growth: Option<BatchGrowth>,
    pub warnings: Vec<String>,
}

impl<F: Scalar> StagePlan<F> {
    fn new(stages: Vec<Stage<F>>, regime: Regime, iid: bool) -> Self {
        Self { stages, regime, iid, lr_decay: None, batch_size: None, batch_growth: None, warnings: Vec::new() }
    }

    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn total_iterations(&self) -> usize {
        self.stages.iter().map(|s| s.iterations).sum()
    }

    fn soft_warn(&mut self, msg: String) {
        warn!("{msg}");
        self.warnings.push(msg);
    }

    /// Records a warning when `η₁·T₁` is not `target` (e.g. `6/μ`).
    pub fn check_eta_t_product(&mut self, target: F) -> bool {
        let Some(first) = self.stages.first() else { return true };
        let product = first.eta * F::from_usize_lossy(first.iterations);
        let ok = ((product - target) / target).abs() <= F::lit(1e-9);
        if !ok {
            self.soft_warn(format!("eta1*T1 = {product} differs from the prescribed {target}"));
        }
        ok
    }

    /// Records a warning when `η₁` exceeds `bound` (e.g. `1/(6L)`).
    pub fn check_eta_bound(&mut self, bound: F) -> bool {
        let Some(first) = self.stages.first() else { return true };
        let ok = first.eta <= bound;
        if !ok {
            self.soft_warn(format!("eta1 = {} exceeds the prescribed bound {bound}", first.eta));
        }
        ok
    }
}

fn positive<F: Scalar>(name: &str, v: F) -> Result<(), ScheduleError> {
    if v > F::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(ScheduleError::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Largest period admitted by the Local-SGD analysis, before flooring.
///
/// IID: `min{1/(6ηLN), 1/(9ηL)}`. Non-IID: `min{σ/√(6ηLN(σ²+4ζ*)), 1/(9ηL)}`.
/// For the regularized stage objectives pass `L_γ` as `lipschitz`.
pub fn initial_k<F: Scalar>(
    iid: bool,
    eta1: F,
    lipschitz: F,
    num_clients: usize,
    sigma2: F,
    zeta_star: F,
) -> Result<F, ScheduleError> {
    positive("eta1", eta1)?;
    positive("L", lipschitz)?;
    if num_clients == 0 {
        return Err(ScheduleError::InvalidParameter("N must be at least 1".into()));
    }
    if sigma2 < F::zero() || zeta_star < F::zero() {
        return Err(ScheduleError::InvalidParameter("sigma2 and zeta_star must be non-negative".into()));
    }
    let n = F::from_usize_lossy(num_clients);
    let local_cap = F::one() / (F::lit(9.0) * eta1 * lipschitz);
    let six = F::lit(6.0) * eta1 * lipschitz * n;
    let k = if iid {
        F::one() / six
    } else if sigma2 > F::zero() {
        sigma2.sqrt() / (six * (sigma2 + F::lit(4.0) * zeta_star)).sqrt()
    } else if zeta_star > F::zero() {
        return Err(ScheduleError::DegenerateNoise);
    } else {
        // σ → 0 with ζ* = 0: the ratio tends to 1/√(6ηLN).
        F::one() / six.sqrt()
    };
    Ok(k.min(local_cap))
}

/// `k₁ · 2^{j/2}` computed without compounding rounding.
fn sqrt2_power<F: Scalar>(k1: F, j: usize) -> F {
    let whole = k1 * F::lit(2.0).powi((j / 2) as i32);
    if j % 2 == 1 {
        whole * F::lit(std::f64::consts::SQRT_2)
    } else {
        whole
    }
}

fn geometric_stages<F: Scalar>(eta1: F, t1: usize, k1: F, stages: usize, iid: bool) -> Result<Vec<Stage<F>>, ScheduleError> {
    (0..stages)
        .map(|j| {
            let iterations = u32::try_from(j)
                .ok()
                .and_then(|p| 2usize.checked_pow(p))
                .and_then(|m| t1.checked_mul(m))
                .ok_or(ScheduleError::Overflow(j + 1))?;
            let eta = eta1 / F::lit(2.0).powi(j as i32);
            let k = if iid { k1 * F::lit(2.0).powi(j as i32) } else { sqrt2_power(k1, j) };
            Ok(Stage::new(eta, iterations, k))
        })
        .collect()
}

fn check_common<F: Scalar>(eta1: F, t1: usize, k1: F, stages: usize) -> Result<(), ScheduleError> {
    positive("eta1", eta1)?;
    positive("k1", k1)?;
    if t1 == 0 {
        return Err(ScheduleError::InvalidParameter("T1 must be at least 1".into()));
    }
    if stages == 0 {
        return Err(ScheduleError::NoStages);
    }
    Ok(())
}

/// Strongly convex plan: `η` halves, `T` doubles and `k` grows by 2 (IID) or
/// `√2` (non-IID) each stage.
pub fn plan_stl_sc<F: Scalar>(eta1: F, t1: usize, k1: F, stages: usize, iid: bool) -> Result<StagePlan<F>, ScheduleError> {
    check_common(eta1, t1, k1, stages)?;
    Ok(StagePlan::new(geometric_stages(eta1, t1, k1, stages, iid)?, Regime::StronglyConvex, iid))
}

/// Non-convex plan. Option 1 repeats the strongly convex recurrence; option 2
/// grows `T` and `k` linearly (`√s` for non-IID `k`) with `η_s = η₁/s`.
pub fn plan_stl_nc<F: Scalar>(
    eta1: F,
    t1: usize,
    k1: F,
    stages: usize,
    iid: bool,
    option: NcOption,
) -> Result<StagePlan<F>, ScheduleError> {
    check_common(eta1, t1, k1, stages)?;
    match option {
        NcOption::One => Ok(StagePlan::new(geometric_stages(eta1, t1, k1, stages, iid)?, Regime::NonConvexOption1, iid)),
        NcOption::Two => {
            let list = (1..=stages)
                .map(|s| {
                    let iterations = t1.checked_mul(s).ok_or(ScheduleError::Overflow(s))?;
                    let sf = F::from_usize_lossy(s);
                    let k = if iid { k1 * sf } else { k1 * sf.sqrt() };
                    Ok(Stage::new(eta1 / sf, iterations, k))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(StagePlan::new(list, Regime::NonConvexOption2, iid))
        }
    }
}

/// Smallest real stage count `log₂(N(f(x₀) − f*)/(η₁σ²)) + 2` covered by the
/// strongly convex bound. Round up before use.
pub fn stage_count_prescription<F: Scalar>(num_clients: usize, initial_gap: F, eta1: F, sigma2: F) -> F {
    let ratio = F::from_usize_lossy(num_clients) * initial_gap / (eta1 * sigma2);
    ratio.log2() + F::lit(2.0)
}

/// `η₁ / (1 + α t)`
#[inline]
pub fn decaying_lr<F: Scalar>(eta1: F, alpha: F, t: u64) -> F {
    eta1 / (F::one() + alpha * F::lit(t as f64))
}

/// Inputs of [`plan_baseline`]; which fields are required depends on the kind.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineParams<F> {
    pub eta1: F,
    pub iterations: usize,
    /// Decay rate `α` of `η₁/(1 + αt)`.
    pub alpha: Option<F>,
    /// Fixed period for Local SGD.
    pub k: Option<usize>,
    /// Per-client batch (LB-SGD) or initial batch (CR-PSGD).
    pub batch_size: Option<usize>,
    /// CR-PSGD batch growth factor per epoch.
    pub growth: Option<f64>,
    pub batch_cap: usize,
    /// Per-client epoch length in examples (CR-PSGD).
    pub epoch_examples: Option<usize>,
}

impl<F: Scalar> BaselineParams<F> {
    pub fn new(eta1: F, iterations: usize) -> Self {
        Self {
            eta1,
            iterations,
            alpha: None,
            k: None,
            batch_size: None,
            growth: None,
            batch_cap: 512,
            epoch_examples: None,
        }
    }
}

/// Single-stage plans for the baselines.
///
/// * `sync`: `k = 1` with decaying learning rate.
/// * `local-fixed-k`: constant `k` with decaying learning rate.
/// * `lb-sgd`: `k = 1` with an enlarged per-client batch.
/// * `cr-psgd`: `k = 1` with a batch that grows by `ρ_B` every epoch until it exceeds the cap.
pub fn plan_baseline<F: Scalar>(kind: BaselineKind, p: &BaselineParams<F>) -> Result<StagePlan<F>, ScheduleError> {
    positive("eta1", p.eta1)?;
    if p.iterations == 0 {
        return Err(ScheduleError::InvalidParameter("iterations must be at least 1".into()));
    }
    let missing = |param| ScheduleError::MissingParameter { kind, param };
    let mut k = 1usize;
    let mut plan_batch = None;
    let mut growth = None;
    let alpha = p.alpha;
    match kind {
        BaselineKind::Sync => {
            alpha.ok_or(missing("alpha"))?;
        }
        BaselineKind::LocalFixedK => {
            alpha.ok_or(missing("alpha"))?;
            k = p.k.ok_or(missing("k"))?;
            if k == 0 {
                return Err(ScheduleError::InvalidParameter("k must be at least 1".into()));
            }
        }
        BaselineKind::LbSgd => {
            plan_batch = Some(p.batch_size.ok_or(missing("batch_size"))?);
        }
        BaselineKind::CrPsgd => {
            let initial = p.batch_size.ok_or(missing("batch_size"))?;
            let factor = p.growth.ok_or(missing("growth"))?;
            let epoch_examples = p.epoch_examples.ok_or(missing("epoch_examples"))?;
            if !(factor >= 1.0) || initial == 0 || epoch_examples == 0 {
                return Err(ScheduleError::InvalidParameter(
                    "cr-psgd needs batch_size >= 1, growth >= 1 and epoch_examples >= 1".into(),
                ));
            }
            plan_batch = Some(initial);
            growth = Some(BatchGrowth { initial, factor, cap: p.batch_cap, epoch_examples });
        }
    }
    if let Some(a) = alpha {
        if !(a >= F::zero()) {
            return Err(ScheduleError::InvalidParameter("alpha must be non-negative".into()));
        }
    }
    let stage = Stage::new(p.eta1, p.iterations, F::from_usize_lossy(k));
    let mut plan = StagePlan::new(vec![stage], Regime::Baseline(kind), true);
    plan.lr_decay = alpha;
    plan.batch_size = plan_batch;
    plan.batch_growth = growth;
    Ok(plan)
}
