//! Flat `section.key = value` experiment configs.
//!
//! ```text
//! # comments start with '#'
//! run.algorithm = stl-sc
//! objective = logistic:data/a9a
//! [schedule]
//! eta1 = 0.5
//! ```
//!
//! A `[section]` line prefixes the keys that follow it. Unknown keys are errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` is set twice")]
    Duplicate { line: usize, key: String },
    #[error("`{key}`: cannot parse `{value}` ({reason})")]
    BadValue { key: String, value: String, reason: String },
    #[error("{algorithm} requires `{key}`")]
    Missing { algorithm: Algorithm, key: &'static str },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read config {path}: {message}")]
    Read { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    StlSc,
    StlNc1,
    StlNc2,
    Local,
    Sync,
    LbSgd,
    CrPsgd,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::StlSc,
        Algorithm::StlNc1,
        Algorithm::StlNc2,
        Algorithm::Local,
        Algorithm::Sync,
        Algorithm::LbSgd,
        Algorithm::CrPsgd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::StlSc => "stl-sc",
            Algorithm::StlNc1 => "stl-nc-1",
            Algorithm::StlNc2 => "stl-nc-2",
            Algorithm::Local => "local",
            Algorithm::Sync => "sync",
            Algorithm::LbSgd => "lb-sgd",
            Algorithm::CrPsgd => "cr-psgd",
        }
    }

    pub fn is_stagewise(self) -> bool {
        matches!(self, Algorithm::StlSc | Algorithm::StlNc1 | Algorithm::StlNc2)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("expected one of {}", Algorithm::ALL.map(Algorithm::name).join(", ")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveSpec {
    /// Regularized logistic regression on a libsvm file.
    Logistic(PathBuf),
    /// Logistic regression on a generated two-class dataset.
    Synthetic,
    /// Per-client `½‖x − c_i‖²` with Gaussian gradient noise.
    Quadratic,
    /// The one-dimensional PL test function.
    Pl,
}

impl FromStr for ObjectiveSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some(("logistic", path)) if !path.is_empty() => Ok(ObjectiveSpec::Logistic(PathBuf::from(path))),
            None if s == "synthetic" => Ok(ObjectiveSpec::Synthetic),
            None if s == "quadratic" => Ok(ObjectiveSpec::Quadratic),
            None if s == "pl" => Ok(ObjectiveSpec::Pl),
            _ => Err("expected logistic:PATH, synthetic, quadratic or pl".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReturnChoice {
    Random,
    Last,
}

impl FromStr for ReturnChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(ReturnChoice::Random),
            "last" => Ok(ReturnChoice::Last),
            _ => Err("expected random or last".into()),
        }
    }
}

/// One experiment. Optional fields fall back to the prescribed defaults at run time.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: Option<String>,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub target_gap: f64,
    /// Evaluate every this many iterations instead of every communication round.
    pub eval_every: Option<usize>,
    pub return_mode: ReturnChoice,
    pub parallel: bool,
    pub x0: f64,

    pub objective: ObjectiveSpec,
    pub lambda: Option<f64>,
    pub sigma2: Option<f64>,
    /// `(positive, negative)` raw labels for libsvm files.
    pub labels: Option<(f64, f64)>,
    pub num_features: Option<usize>,
    pub examples: usize,
    pub features: usize,
    pub positive_rate: f64,
    /// Mean number of active features per synthetic example.
    pub active: f64,
    pub separation: f64,
    pub data_seed: u64,
    pub dim: usize,
    pub spread: f64,

    pub clients: usize,
    pub iid_fraction: f64,

    pub eta1: Option<f64>,
    pub t1: Option<usize>,
    pub iterations: Option<usize>,
    pub k1: Option<f64>,
    pub k: Option<usize>,
    pub stages: Option<usize>,
    pub batch_size: usize,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub growth: Option<f64>,
    pub batch_cap: usize,
    pub iid: Option<bool>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: None,
            algorithm: Algorithm::StlSc,
            seed: 0,
            target_gap: 1e-4,
            eval_every: None,
            return_mode: ReturnChoice::Random,
            parallel: true,
            x0: 0.0,
            objective: ObjectiveSpec::Synthetic,
            lambda: None,
            sigma2: None,
            labels: None,
            num_features: None,
            examples: 2000,
            features: 40,
            positive_rate: 0.3,
            active: 8.0,
            separation: 0.5,
            data_seed: 0,
            dim: 10,
            spread: 1.0,
            clients: 8,
            iid_fraction: 100.0,
            eta1: None,
            t1: None,
            iterations: None,
            k1: None,
            k: None,
            stages: None,
            batch_size: 1,
            alpha: None,
            gamma: None,
            growth: None,
            batch_cap: 512,
            iid: None,
        }
    }
}

const KEYS: &[&str] = &[
    "run.name",
    "run.algorithm",
    "run.seed",
    "run.target_gap",
    "run.eval_every",
    "run.return",
    "run.parallel",
    "run.x0",
    "objective",
    "objective.lambda",
    "objective.sigma2",
    "objective.labels",
    "objective.num_features",
    "objective.examples",
    "objective.features",
    "objective.positive_rate",
    "objective.active",
    "objective.separation",
    "objective.data_seed",
    "objective.dim",
    "objective.spread",
    "data.clients",
    "data.iid_fraction",
    "schedule.eta1",
    "schedule.t1",
    "schedule.iterations",
    "schedule.k1",
    "schedule.k",
    "schedule.stages",
    "schedule.batch_size",
    "schedule.alpha",
    "schedule.gamma",
    "schedule.growth",
    "schedule.batch_cap",
    "schedule.iid",
];

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    raw.parse().map_err(|e: T::Err| ConfigError::BadValue { key: key.into(), value: raw.into(), reason: e.to_string() })
}

fn label_pair(key: &str, raw: &str) -> Result<(f64, f64), ConfigError> {
    let bad = |reason: &str| ConfigError::BadValue { key: key.into(), value: raw.into(), reason: reason.into() };
    let (p, n) = raw.split_once(',').ok_or_else(|| bad("expected POSITIVE,NEGATIVE"))?;
    let p: f64 = p.trim().parse().map_err(|_| bad("positive label is not a number"))?;
    let n: f64 = n.trim().parse().map_err(|_| bad("negative label is not a number"))?;
    if p == n {
        return Err(bad("labels must differ"));
    }
    Ok((p, n))
}

impl ExperimentConfig {
    /// Parses config text. Relative `logistic:` paths resolve against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, String> = BTreeMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax { line: line_no, text: line.into() })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(ConfigError::Syntax { line: line_no, text: line.into() });
            }
            let key = if section.is_empty() || k.contains('.') { k.to_string() } else { format!("{section}.{k}") };
            if !KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey { line: line_no, key });
            }
            if entries.insert(key.clone(), v.to_string()).is_some() {
                return Err(ConfigError::Duplicate { line: line_no, key });
            }
        }

        let mut cfg = ExperimentConfig::default();
        for (key, raw) in &entries {
            let k = key.as_str();
            match k {
                "run.name" => cfg.name = Some(raw.clone()),
                "run.algorithm" => cfg.algorithm = value(k, raw)?,
                "run.seed" => cfg.seed = value(k, raw)?,
                "run.target_gap" => cfg.target_gap = value(k, raw)?,
                "run.eval_every" => cfg.eval_every = Some(value(k, raw)?),
                "run.return" => cfg.return_mode = value(k, raw)?,
                "run.parallel" => cfg.parallel = value(k, raw)?,
                "run.x0" => cfg.x0 = value(k, raw)?,
                "objective" => {
                    cfg.objective = value(k, raw)?;
                    if let (ObjectiveSpec::Logistic(path), Some(base)) = (&mut cfg.objective, base) {
                        if path.is_relative() {
                            *path = base.join(&*path);
                        }
                    }
                }
                "objective.lambda" => cfg.lambda = Some(value(k, raw)?),
                "objective.sigma2" => cfg.sigma2 = Some(value(k, raw)?),
                "objective.labels" => cfg.labels = Some(label_pair(k, raw)?),
                "objective.num_features" => cfg.num_features = Some(value(k, raw)?),
                "objective.examples" => cfg.examples = value(k, raw)?,
                "objective.features" => cfg.features = value(k, raw)?,
                "objective.positive_rate" => cfg.positive_rate = value(k, raw)?,
                "objective.active" => cfg.active = value(k, raw)?,
                "objective.separation" => cfg.separation = value(k, raw)?,
                "objective.data_seed" => cfg.data_seed = value(k, raw)?,
                "objective.dim" => cfg.dim = value(k, raw)?,
                "objective.spread" => cfg.spread = value(k, raw)?,
                "data.clients" => cfg.clients = value(k, raw)?,
                "data.iid_fraction" => cfg.iid_fraction = value(k, raw)?,
                "schedule.eta1" => cfg.eta1 = Some(value(k, raw)?),
                "schedule.t1" => cfg.t1 = Some(value(k, raw)?),
                "schedule.iterations" => cfg.iterations = Some(value(k, raw)?),
                "schedule.k1" => cfg.k1 = Some(value(k, raw)?),
                "schedule.k" => cfg.k = Some(value(k, raw)?),
                "schedule.stages" => cfg.stages = Some(value(k, raw)?),
                "schedule.batch_size" => cfg.batch_size = value(k, raw)?,
                "schedule.alpha" => cfg.alpha = Some(value(k, raw)?),
                "schedule.gamma" => cfg.gamma = Some(value(k, raw)?),
                "schedule.growth" => cfg.growth = Some(value(k, raw)?),
                "schedule.batch_cap" => cfg.batch_cap = value(k, raw)?,
                "schedule.iid" => cfg.iid = Some(value(k, raw)?),
                _ => unreachable!("key list and match arms disagree on {k}"),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.to_path_buf(), message: e.to_string() })?;
        Self::parse(&text, path.parent())
    }

    /// Label used for output files and the summary table.
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.algorithm.name().to_string())
    }

    /// IID schedule growth unless overridden: only a fully shuffled split counts.
    pub fn iid_schedule(&self) -> bool {
        self.iid.unwrap_or(self.iid_fraction >= 100.0)
    }

    /// Checks algorithm-specific required fields and value ranges.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let a = self.algorithm;
        let missing = |key| ConfigError::Missing { algorithm: a, key };
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.clients == 0 {
            return invalid("data.clients must be at least 1".into());
        }
        if !(0.0..=100.0).contains(&self.iid_fraction) {
            return invalid(format!("data.iid_fraction must be in [0, 100], got {}", self.iid_fraction));
        }
        if !(self.target_gap > 0.0) {
            return invalid(format!("run.target_gap must be positive, got {}", self.target_gap));
        }
        if self.batch_size == 0 {
            return invalid("schedule.batch_size must be at least 1".into());
        }
        if self.eval_every == Some(0) {
            return invalid("run.eval_every must be at least 1".into());
        }
        if self.eta1.is_none() {
            return Err(missing("schedule.eta1"));
        }
        match a {
            Algorithm::StlSc => {}
            Algorithm::StlNc1 | Algorithm::StlNc2 => {
                self.gamma.ok_or(missing("schedule.gamma"))?;
                self.t1.ok_or(missing("schedule.t1"))?;
                self.stages.ok_or(missing("schedule.stages"))?;
            }
            Algorithm::Local | Algorithm::Sync | Algorithm::LbSgd | Algorithm::CrPsgd => {
                self.iterations.ok_or(missing("schedule.iterations"))?;
            }
        }
        match a {
            Algorithm::Local => {
                self.k.ok_or(missing("schedule.k"))?;
                self.alpha.ok_or(missing("schedule.alpha"))?;
            }
            Algorithm::Sync => {
                self.alpha.ok_or(missing("schedule.alpha"))?;
            }
            Algorithm::CrPsgd => {
                self.growth.ok_or(missing("schedule.growth"))?;
            }
            _ => {}
        }
        if a.is_stagewise() && (self.iterations.is_some() || self.k.is_some()) {
            return invalid(format!("{a} takes schedule.t1 and schedule.k1, not schedule.iterations or schedule.k"));
        }
        if !a.is_stagewise() && (self.t1.is_some() || self.k1.is_some() || self.stages.is_some()) {
            return invalid(format!("{a} is single-stage: use schedule.iterations and schedule.k"));
        }
        if self.gamma.is_some() && !matches!(a, Algorithm::StlNc1 | Algorithm::StlNc2) {
            return invalid(format!("schedule.gamma only applies to stl-nc-1 and stl-nc-2, not {a}"));
        }
        Ok(())
    }
}
