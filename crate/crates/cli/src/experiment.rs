//! Builds the objective, partition and plan for one config and runs it.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use sha2::{Digest, Sha256};
use stlsgd_core::data::{load_libsvm, partition, two_class, DataError, LabelMap, LibsvmOptions, TwoClassSpec};
use stlsgd_core::engine::{run_stagewise, EngineError, EvalCadence, ReturnMode, StagewiseOptions};
use stlsgd_core::objectives::{estimate_sigma2, random_quadratic, LogisticObjective, PlObjective};
use stlsgd_core::schedules::{
    initial_k, plan_baseline, plan_stl_nc, plan_stl_sc, stage_count_prescription, BaselineKind, BaselineParams,
    NcOption, ScheduleError,
};
use stlsgd_core::{ClientFleet, Dataset64, Objective, ObjectiveError, Optimum, PartitionSpec, RunTrace64, StagePlan64};
use thiserror::Error;

use crate::config::{Algorithm, ConfigError, ExperimentConfig, ObjectiveSpec, ReturnChoice};

/// Draws used for the empirical `σ²` estimate at `x₀`.
pub const SIGMA2_DRAWS: usize = 1000;
const OPTIMUM_TOL: f64 = 1e-11;
const OPTIMUM_MAX_ITER: usize = 100;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("dataset: {0}")]
    Data(#[from] DataError),
    #[error("objective: {0}")]
    Objective(#[from] ObjectiveError),
    #[error("schedule: {0}")]
    Schedule(#[from] ScheduleError),
    #[error("engine: {0}")]
    Engine(#[from] EngineError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

impl RunError {
    /// 2 for anything the user can fix in the config, 3 for numerical divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Engine(EngineError::Diverged { .. }) => 3,
            RunError::Engine(EngineError::ProxMisconfigured { .. }) => 2,
            RunError::Config(_) | RunError::Data(_) | RunError::Objective(_) | RunError::Schedule(_) => 2,
            RunError::Engine(_) | RunError::Io(_) => 1,
        }
    }
}

/// One row of the summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRecord {
    pub name: String,
    pub algorithm: Algorithm,
    pub comm_rounds_total: u64,
    /// First cumulative round count whose measured gap is at most the target.
    pub comm_rounds_to_target: Option<u64>,
    pub iterations_total: usize,
    pub final_gap: Option<f64>,
    pub final_grad_norm_sq: Option<f64>,
    pub wall_time_s: f64,
}

pub const SUMMARY_HEADER: &str =
    "name,algorithm,comm_rounds_total,comm_rounds_to_target,iterations_total,final_gap,final_grad_norm_sq,wall_time_s";

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn opt_e(v: Option<f64>) -> String {
    v.map(|v| format!("{v:e}")).unwrap_or_default()
}

impl SummaryRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.3}",
            self.name,
            self.algorithm,
            self.comm_rounds_total,
            opt(self.comm_rounds_to_target),
            self.iterations_total,
            opt_e(self.final_gap),
            opt_e(self.final_grad_norm_sq),
            self.wall_time_s
        )
    }
}

/// Everything produced by one run.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub trace: RunTrace64,
    pub summary: SummaryRecord,
    pub plan: StagePlan64,
    pub x_final: Vec<f64>,
    pub stage_iterates: Vec<Vec<f64>>,
}

/// A constructed problem: the objective plus what the schedule needs to know about it.
pub struct Problem {
    pub objective: Box<dyn Objective<f64>>,
    /// Largest shard size, i.e. examples per client epoch.
    pub epoch_examples: usize,
}

fn cache_key(data: &Dataset64, lambda: f64, shards: &[Vec<usize>]) -> String {
    let mut h = Sha256::new();
    h.update(b"logistic-optimum-v1");
    h.update((data.num_features as u64).to_le_bytes());
    for e in &data.examples {
        h.update(e.label.to_bits().to_le_bytes());
        h.update((e.features.len() as u64).to_le_bytes());
        for &(j, v) in &e.features {
            h.update(j.to_le_bytes());
            h.update(v.to_bits().to_le_bytes());
        }
    }
    h.update(lambda.to_bits().to_le_bytes());
    for s in shards {
        h.update((s.len() as u64).to_le_bytes());
        for &i in s {
            h.update((i as u64).to_le_bytes());
        }
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn read_cached_optimum(path: &Path, dim: usize) -> Option<Optimum<f64>> {
    let text = fs::read_to_string(path).ok()?;
    let mut nums = text.split_whitespace().map(|t| t.parse::<f64>());
    let value = nums.next()?.ok()?;
    let point: Vec<f64> = nums.collect::<Result<_, _>>().ok()?;
    (point.len() == dim).then_some(Optimum { point, value })
}

fn write_cached_optimum(path: &Path, opt: &Optimum<f64>) -> io::Result<()> {
    let mut text = format!("{:e}\n", opt.value);
    for v in &opt.point {
        text.push_str(&format!("{v:e}\n"));
    }
    fs::write(path, text)
}

/// Solves for the logistic optimum, reusing `<dataset>.optimum-<hash>` when present.
fn logistic_optimum(obj: &LogisticObjective<f64>, cache_dir: Option<&Path>) -> Optimum<f64> {
    let cache = cache_dir.map(|base| {
        let key = cache_key(obj.dataset(), obj.lambda(), obj.shards());
        PathBuf::from(format!("{}.optimum-{key}", base.display()))
    });
    if let Some(found) = cache.as_deref().and_then(|p| read_cached_optimum(p, obj.dim())) {
        info!("using cached optimum f* = {:e}", found.value);
        return found;
    }
    let (opt, grad_norm) = obj.solve_optimum(OPTIMUM_TOL, OPTIMUM_MAX_ITER);
    if grad_norm >= OPTIMUM_TOL {
        warn!("optimum solve stopped at |grad f| = {grad_norm:e}");
    }
    info!("solved optimum f* = {:e} (|grad f| = {grad_norm:e})", opt.value);
    if let Some(p) = cache {
        if let Err(e) = write_cached_optimum(&p, &opt) {
            warn!("cannot cache optimum at {}: {e}", p.display());
        }
    }
    opt
}

fn logistic_problem(cfg: &ExperimentConfig, data: Dataset64, cache: Option<&Path>) -> Result<Problem, RunError> {
    let data = Arc::new(data);
    let spec = PartitionSpec { num_clients: cfg.clients, iid_fraction: cfg.iid_fraction, seed: cfg.seed };
    let shards = partition(&data, &spec)?;
    let epoch_examples = shards.iter().map(Vec::len).max().unwrap_or(1);
    let lambda = cfg.lambda.unwrap_or(1.0 / data.len() as f64);
    let obj = LogisticObjective::new(data.clone(), lambda)?.with_shards(shards)?;
    let x0 = vec![cfg.x0; obj.dim()];
    let sigma2 = cfg.sigma2.unwrap_or_else(|| estimate_sigma2(&obj, &x0, SIGMA2_DRAWS, cfg.seed));
    let mut obj = obj.with_sigma2(sigma2);
    let optimum = logistic_optimum(&obj, cache);
    obj = obj.with_optimum(optimum);
    Ok(Problem { objective: Box::new(obj), epoch_examples })
}

/// Constructs the objective described by `cfg`.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<Problem, RunError> {
    match &cfg.objective {
        ObjectiveSpec::Logistic(path) => {
            if !path.exists() {
                return Err(ConfigError::Invalid(format!("dataset {} does not exist", path.display())).into());
            }
            let labels = match cfg.labels {
                Some((positive, negative)) => LabelMap::Pair { positive, negative },
                None => LabelMap::Auto,
            };
            let data = load_libsvm(path, &LibsvmOptions { labels, num_features: cfg.num_features })?;
            logistic_problem(cfg, data, Some(path))
        }
        ObjectiveSpec::Synthetic => {
            let spec = TwoClassSpec {
                examples: cfg.examples,
                features: cfg.features,
                positive_rate: cfg.positive_rate,
                active: cfg.active,
                separation: cfg.separation,
                seed: cfg.data_seed,
            };
            logistic_problem(cfg, two_class(&spec), None)
        }
        ObjectiveSpec::Quadratic => {
            let spread = cfg.spread * (1.0 - cfg.iid_fraction / 100.0);
            let sigma2 = cfg.sigma2.unwrap_or(1.0);
            let obj = random_quadratic(cfg.clients, cfg.dim, spread, sigma2, cfg.data_seed)?;
            Ok(Problem { objective: Box::new(obj), epoch_examples: 1 })
        }
        ObjectiveSpec::Pl => {
            let obj = PlObjective::new(cfg.clients, cfg.sigma2.unwrap_or(0.0));
            Ok(Problem { objective: Box::new(obj), epoch_examples: 1 })
        }
    }
}

/// Turns the config into a stage plan, filling unset values from the prescriptions.
pub fn build_plan(cfg: &ExperimentConfig, problem: &Problem) -> Result<StagePlan64, RunError> {
    let obj = problem.objective.as_ref();
    let c = obj.constants();
    let eta1 = cfg.eta1.expect("validated");
    let iid = cfg.iid_schedule();
    let n = cfg.clients;
    let zeta = c.zeta_star.unwrap_or(0.0);
    let kind = match cfg.algorithm {
        Algorithm::StlSc => {
            let mu = c.mu.ok_or_else(|| ConfigError::Invalid("stl-sc needs a strongly convex objective".into()))?;
            let prescribed_t1 = (6.0 / (mu * eta1)).ceil() as usize;
            let t1 = cfg.t1.unwrap_or(prescribed_t1);
            let k1 = match cfg.k1 {
                Some(k) => k,
                None => initial_k(iid, eta1, c.lipschitz, n, c.sigma2, zeta)?,
            };
            let stages = match cfg.stages {
                Some(s) => s,
                None => {
                    let x0 = vec![cfg.x0; obj.dim()];
                    let f_star = obj.optimum().map(|o| o.value).ok_or_else(|| {
                        ConfigError::Invalid("stage count needs a known optimum; set schedule.stages".into())
                    })?;
                    if !(c.sigma2 > 0.0) {
                        return Err(ConfigError::Invalid("stage count needs sigma2 > 0; set schedule.stages".into()).into());
                    }
                    let gap0 = obj.value(&x0) - f_star;
                    stage_count_prescription(n, gap0, eta1, c.sigma2).ceil().max(1.0) as usize
                }
            };
            let mut plan = plan_stl_sc(eta1, t1, k1, stages, iid)?;
            plan.check_eta_t_product(6.0 / mu);
            return Ok(plan);
        }
        Algorithm::StlNc1 | Algorithm::StlNc2 => {
            let gamma = cfg.gamma.expect("validated");
            let option = if cfg.algorithm == Algorithm::StlNc1 { NcOption::One } else { NcOption::Two };
            let k1 = match cfg.k1 {
                Some(k) => k,
                None => initial_k(iid, eta1, c.lipschitz + 1.0 / gamma, n, c.sigma2, zeta)?,
            };
            return Ok(plan_stl_nc(eta1, cfg.t1.expect("validated"), k1, cfg.stages.expect("validated"), iid, option)?);
        }
        Algorithm::Local => BaselineKind::LocalFixedK,
        Algorithm::Sync => BaselineKind::Sync,
        Algorithm::LbSgd => BaselineKind::LbSgd,
        Algorithm::CrPsgd => BaselineKind::CrPsgd,
    };
    let mut params = BaselineParams::new(eta1, cfg.iterations.expect("validated"));
    params.alpha = cfg.alpha;
    params.k = cfg.k;
    params.batch_size = Some(cfg.batch_size);
    params.growth = cfg.growth;
    params.batch_cap = cfg.batch_cap;
    params.epoch_examples = Some(problem.epoch_examples);
    let mut plan = plan_baseline(kind, &params)?;
    plan.iid = iid;
    Ok(plan)
}

/// Runs one experiment on an already built problem.
pub fn run_problem(cfg: &ExperimentConfig, problem: &Problem) -> Result<ExperimentOutput, RunError> {
    let start = Instant::now();
    let obj = problem.objective.as_ref();
    let plan = build_plan(cfg, problem)?;
    let x0 = vec![cfg.x0; obj.dim()];
    let mut fleet = ClientFleet::new(cfg.clients, &x0, cfg.seed)?;
    let opts = StagewiseOptions {
        prox_gamma: cfg.gamma,
        batch_size: cfg.batch_size,
        return_mode: match cfg.return_mode {
            ReturnChoice::Random => ReturnMode::RandomIterate,
            ReturnChoice::Last => ReturnMode::LastIterate,
        },
        eval: match cfg.eval_every {
            Some(n) => EvalCadence::Iterations(n),
            None => EvalCadence::CommRounds(1),
        },
        parallel: cfg.parallel,
    };
    info!(
        "{}: {} stage(s), {} iterations, {} rounds planned",
        cfg.label(),
        plan.num_stages(),
        plan.total_iterations(),
        stlsgd_core::metrics::comm_rounds(&plan)
    );
    let out = run_stagewise(obj, &x0, &plan, &mut fleet, &opts)?;
    let last = out.trace.last();
    let summary = SummaryRecord {
        name: cfg.label(),
        algorithm: cfg.algorithm,
        comm_rounds_total: out.comm_rounds,
        comm_rounds_to_target: out.trace.rounds_to_gap(cfg.target_gap),
        iterations_total: plan.total_iterations(),
        final_gap: last.and_then(|r| r.gap),
        final_grad_norm_sq: last.and_then(|r| r.grad_norm_sq),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok(ExperimentOutput { trace: out.trace, summary, plan, x_final: out.x_final, stage_iterates: out.stage_iterates })
}

/// Builds and runs `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, RunError> {
    cfg.validate()?;
    let problem = build_problem(cfg)?;
    run_problem(cfg, &problem)
}

/// The plan as a JSON document, written next to each trace.
pub fn plan_json(cfg: &ExperimentConfig, plan: &StagePlan64) -> serde_json::Value {
    let stages: Vec<_> = plan
        .stages
        .iter()
        .map(|s| serde_json::json!({"eta": s.eta, "iterations": s.iterations, "k_real": s.k_real, "k": s.k_eff}))
        .collect();
    serde_json::json!({
        "name": cfg.label(),
        "algorithm": cfg.algorithm.name(),
        "regime": plan.regime.to_string(),
        "seed": cfg.seed,
        "iid": plan.iid,
        "lr_decay": plan.lr_decay,
        "batch_size": plan.batch_size.unwrap_or(cfg.batch_size),
        "batch_growth": plan.batch_growth.map(|g| serde_json::json!({
            "initial": g.initial, "factor": g.factor, "cap": g.cap, "epoch_examples": g.epoch_examples
        })),
        "prox_gamma": cfg.gamma,
        "comm_rounds": stlsgd_core::metrics::comm_rounds(plan),
        "stages": stages,
        "warnings": plan.warnings,
    })
}
