//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Unknown keys are rejected,
//! later assignments override earlier ones, and command-line overrides are
//! applied on top of the file with the same syntax.

use std::collections::BTreeSet;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::adversary::{AttackPattern, FabricationParams, WorkerId};
use crate::aggregation::AggregationRule;
use crate::data::DistributionMode;
use crate::defense::MonitorConfig;
use crate::error::{Error, Result};
use crate::model::{MlpArchitecture, TrainSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    Blobs,
    Mnist,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatternKind {
    None,
    Static,
    Pretence,
    Randomized,
}

impl PatternKind {
    pub const ATTACKS: [PatternKind; 3] = [PatternKind::Static, PatternKind::Pretence, PatternKind::Randomized];

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Static => "static",
            Self::Pretence => "pretence",
            Self::Randomized => "randomized",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleKind {
    FedAvg,
    Krum,
    GeoMed,
    Bulyan,
}

/// Everything needed to reproduce one run.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Use-case label; prefixes grid run ids.
    pub name: String,
    pub dataset_kind: DatasetKind,
    /// Directory holding the four standard MNIST IDX files.
    pub dataset_path: PathBuf,
    /// Falls back to `seed` when unset.
    pub dataset_seed: Option<u64>,
    pub dataset_classes: usize,
    pub dataset_dim: usize,
    pub dataset_spread: f64,
    pub train_size: usize,
    pub validation_size: usize,
    pub test_size: usize,
    /// Full layer list; `None` means `[input, 30, classes]`.
    pub layers: Option<Vec<usize>>,
    pub train: TrainSpec,
    pub workers: usize,
    pub distribution: DistributionMode,
    pub per_round: Option<usize>,
    pub pattern: PatternKind,
    pub compromised: BTreeSet<WorkerId>,
    pub start_round: usize,
    pub flip_prob: f64,
    pub fabrication: FabricationParams,
    pub rule: RuleKind,
    pub byzantine_m: usize,
    pub geomed_tol: f64,
    pub geomed_max_iter: usize,
    pub defense_enabled: bool,
    pub monitor: MonitorConfig,
    pub rounds: usize,
    pub seed: u64,
    pub readout_round: usize,
    pub target_accuracy: Option<f64>,
    pub beta: f64,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "blobs".into(),
            dataset_kind: DatasetKind::Blobs,
            dataset_path: PathBuf::from("data/mnist"),
            dataset_seed: None,
            dataset_classes: 10,
            dataset_dim: 20,
            dataset_spread: 0.8,
            train_size: 2000,
            validation_size: 500,
            test_size: 500,
            layers: None,
            train: TrainSpec::default(),
            workers: 10,
            distribution: DistributionMode::FullCopy,
            per_round: None,
            pattern: PatternKind::None,
            compromised: (0..4).collect(),
            start_round: 10,
            flip_prob: 0.5,
            fabrication: FabricationParams::default(),
            rule: RuleKind::FedAvg,
            byzantine_m: 1,
            geomed_tol: 1e-8,
            geomed_max_iter: 1000,
            defense_enabled: false,
            monitor: MonitorConfig::default(),
            rounds: 80,
            seed: 42,
            readout_round: 58,
            target_accuracy: None,
            beta: 2.0,
            out: PathBuf::from("run.csv"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("expected {what}, got `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("expected a boolean, got `{value}`"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str, what: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s, what))
        .collect()
}

fn parse_optional<T: FromStr>(key: &str, value: &str, what: &str) -> Result<Option<T>> {
    match value {
        "none" | "auto" | "all" | "" => Ok(None),
        v => parse(key, v, what).map(Some),
    }
}

fn join<T: Display>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

fn opt<T: Display>(v: &Option<T>, none: &str) -> String {
    v.as_ref().map_or_else(|| none.to_string(), T::to_string)
}

/// Every accepted key, in echo order.
pub const KEYS: &[&str] = &[
    "name",
    "dataset.kind",
    "dataset.path",
    "dataset.seed",
    "dataset.classes",
    "dataset.dim",
    "dataset.spread",
    "dataset.train",
    "dataset.validation",
    "dataset.test",
    "model.layers",
    "train.epochs",
    "train.batch",
    "train.lr",
    "workers.count",
    "workers.distribution",
    "workers.per_round",
    "attack.pattern",
    "attack.compromised",
    "attack.start_round",
    "attack.flip_prob",
    "attack.mu",
    "attack.sigma",
    "aggregation.rule",
    "aggregation.m",
    "aggregation.tol",
    "aggregation.max_iter",
    "defense.enabled",
    "defense.delta",
    "defense.tau",
    "defense.window",
    "defense.strikes",
    "defense.margin",
    "rounds",
    "seed",
    "readout_round",
    "target_accuracy",
    "metrics.beta",
    "out",
];

impl ExperimentConfig {
    /// Reads a config file and applies `overrides` (`key=value` strings) on top.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut config = Self::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)?;
            config.apply_text(&text)?;
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::config(o.as_str(), "override must look like key=value"))?;
            config.set(k.trim(), v.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Parses file contents on top of the current values, without validating.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}", lineno + 1), format!("expected `key = value`, got `{line}`"))
            })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut config = Self::default();
        config.apply_text(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        const UINT: &str = "a non-negative integer";
        const REAL: &str = "a real number";
        match key {
            "name" => self.name = value.to_string(),
            "dataset.kind" => {
                self.dataset_kind = match value {
                    "blobs" => DatasetKind::Blobs,
                    "mnist" => DatasetKind::Mnist,
                    _ => return Err(Error::config(key, format!("expected blobs|mnist, got `{value}`"))),
                }
            }
            "dataset.path" => self.dataset_path = PathBuf::from(value),
            "dataset.seed" => self.dataset_seed = parse_optional(key, value, UINT)?,
            "dataset.classes" => self.dataset_classes = parse(key, value, UINT)?,
            "dataset.dim" => self.dataset_dim = parse(key, value, UINT)?,
            "dataset.spread" => self.dataset_spread = parse(key, value, REAL)?,
            "dataset.train" => self.train_size = parse(key, value, UINT)?,
            "dataset.validation" => self.validation_size = parse(key, value, UINT)?,
            "dataset.test" => self.test_size = parse(key, value, UINT)?,
            "model.layers" => {
                self.layers = match value {
                    "auto" | "" => None,
                    v => Some(parse_list(key, v, "a list of layer widths")?),
                }
            }
            "train.epochs" => self.train.epochs = parse(key, value, UINT)?,
            "train.batch" => self.train.batch_size = parse(key, value, UINT)?,
            "train.lr" => self.train.learning_rate = parse(key, value, REAL)?,
            "workers.count" => self.workers = parse(key, value, UINT)?,
            "workers.distribution" => {
                self.distribution = value.parse().map_err(|e: String| Error::config(key, e))?
            }
            "workers.per_round" => self.per_round = parse_optional(key, value, UINT)?,
            "attack.pattern" => {
                self.pattern = match value {
                    "none" => PatternKind::None,
                    "static" => PatternKind::Static,
                    "pretence" => PatternKind::Pretence,
                    "randomized" => PatternKind::Randomized,
                    _ => {
                        return Err(Error::config(
                            key,
                            format!("expected none|static|pretence|randomized, got `{value}`"),
                        ))
                    }
                }
            }
            "attack.compromised" => {
                self.compromised = parse_list::<WorkerId>(key, value, "a list of worker ids")?
                    .into_iter()
                    .collect()
            }
            "attack.start_round" => self.start_round = parse(key, value, UINT)?,
            "attack.flip_prob" => self.flip_prob = parse(key, value, REAL)?,
            "attack.mu" => self.fabrication.mu = parse(key, value, REAL)?,
            "attack.sigma" => self.fabrication.sigma = parse(key, value, REAL)?,
            "aggregation.rule" => {
                self.rule = match value {
                    "fedavg" => RuleKind::FedAvg,
                    "krum" => RuleKind::Krum,
                    "geomed" => RuleKind::GeoMed,
                    "bulyan" => RuleKind::Bulyan,
                    _ => {
                        return Err(Error::config(
                            key,
                            format!("expected fedavg|krum|geomed|bulyan, got `{value}`"),
                        ))
                    }
                }
            }
            "aggregation.m" => self.byzantine_m = parse(key, value, UINT)?,
            "aggregation.tol" => self.geomed_tol = parse(key, value, REAL)?,
            "aggregation.max_iter" => self.geomed_max_iter = parse(key, value, UINT)?,
            "defense.enabled" => self.defense_enabled = parse_bool(key, value)?,
            "defense.delta" => self.monitor.delta = parse(key, value, UINT)?,
            "defense.tau" => self.monitor.tolerance = parse(key, value, REAL)?,
            "defense.window" => self.monitor.window = parse(key, value, UINT)?,
            "defense.strikes" => self.monitor.strikes_to_exclude = parse(key, value, UINT)?,
            "defense.margin" => self.monitor.peer_margin = parse(key, value, REAL)?,
            "rounds" => self.rounds = parse(key, value, UINT)?,
            "seed" => self.seed = parse(key, value, UINT)?,
            "readout_round" => self.readout_round = parse(key, value, UINT)?,
            "target_accuracy" => self.target_accuracy = parse_optional(key, value, REAL)?,
            "metrics.beta" => self.beta = parse(key, value, REAL)?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// The resolved value of every key, in [`KEYS`] order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let arch = self
            .architecture()
            .map(|a| join(a.layer_sizes()))
            .unwrap_or_else(|_| "invalid".into());
        let kind = match self.dataset_kind {
            DatasetKind::Blobs => "blobs",
            DatasetKind::Mnist => "mnist",
        };
        let rule = match self.rule {
            RuleKind::FedAvg => "fedavg",
            RuleKind::Krum => "krum",
            RuleKind::GeoMed => "geomed",
            RuleKind::Bulyan => "bulyan",
        };
        let values = [
            self.name.clone(),
            kind.into(),
            self.dataset_path.display().to_string(),
            self.data_seed().to_string(),
            self.dataset_classes.to_string(),
            self.dataset_dim.to_string(),
            self.dataset_spread.to_string(),
            self.train_size.to_string(),
            self.validation_size.to_string(),
            self.test_size.to_string(),
            arch,
            self.train.epochs.to_string(),
            self.train.batch_size.to_string(),
            self.train.learning_rate.to_string(),
            self.workers.to_string(),
            self.distribution.to_string(),
            opt(&self.per_round, "all"),
            self.pattern.name().into(),
            join(&self.compromised),
            self.start_round.to_string(),
            self.flip_prob.to_string(),
            self.fabrication.mu.to_string(),
            self.fabrication.sigma.to_string(),
            rule.into(),
            self.byzantine_m.to_string(),
            self.geomed_tol.to_string(),
            self.geomed_max_iter.to_string(),
            self.defense_enabled.to_string(),
            self.monitor.delta.to_string(),
            self.monitor.tolerance.to_string(),
            self.monitor.window.to_string(),
            self.monitor.strikes_to_exclude.to_string(),
            self.monitor.peer_margin.to_string(),
            self.rounds.to_string(),
            self.seed.to_string(),
            self.readout_round.to_string(),
            opt(&self.target_accuracy, "none"),
            self.beta.to_string(),
            self.out.display().to_string(),
        ];
        KEYS.iter().copied().zip(values).collect()
    }

    pub fn data_seed(&self) -> u64 {
        self.dataset_seed.unwrap_or(self.seed)
    }

    fn input_dim_and_classes(&self) -> (usize, usize) {
        match self.dataset_kind {
            DatasetKind::Blobs => (self.dataset_dim, self.dataset_classes),
            DatasetKind::Mnist => (784, 10),
        }
    }

    pub fn architecture(&self) -> Result<MlpArchitecture> {
        let (input, classes) = self.input_dim_and_classes();
        let sizes = self.layers.clone().unwrap_or_else(|| vec![input, 30, classes]);
        MlpArchitecture::new(sizes)
    }

    pub fn attack(&self) -> AttackPattern {
        let compromised = self.compromised.clone();
        match self.pattern {
            PatternKind::None => AttackPattern::None,
            PatternKind::Static => AttackPattern::Static { compromised },
            PatternKind::Pretence => AttackPattern::Pretence {
                compromised,
                start_round: self.start_round,
            },
            PatternKind::Randomized => AttackPattern::Randomized {
                compromised,
                flip_prob: self.flip_prob,
            },
        }
    }

    pub fn aggregation_rule(&self) -> AggregationRule {
        match self.rule {
            RuleKind::FedAvg => AggregationRule::FedAvg,
            RuleKind::Krum => AggregationRule::Krum { m: self.byzantine_m },
            RuleKind::GeoMed => AggregationRule::GeoMed {
                tol: self.geomed_tol,
                max_iter: self.geomed_max_iter,
            },
            RuleKind::Bulyan => AggregationRule::Bulyan { m: self.byzantine_m },
        }
    }

    pub fn monitor(&self) -> Option<MonitorConfig> {
        self.defense_enabled.then_some(self.monitor)
    }

    /// First round that counts toward post-activation detection scores.
    pub fn activation_round(&self) -> usize {
        if self.defense_enabled {
            self.monitor.delta
        } else {
            0
        }
    }

    /// Checks every cross-field constraint and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems: Vec<(String, String)> = Vec::new();
        let mut fail = |k: &str, r: String| problems.push((k.to_string(), r));

        let (input, classes) = self.input_dim_and_classes();
        if self.dataset_kind == DatasetKind::Blobs {
            if self.dataset_classes == 0 {
                fail("dataset.classes", "must be positive".into());
            }
            if self.dataset_dim == 0 {
                fail("dataset.dim", "must be positive".into());
            }
            if !(self.dataset_spread.is_finite() && self.dataset_spread >= 0.0) {
                fail("dataset.spread", "must be finite and non-negative".into());
            }
        }
        for (k, v) in [
            ("dataset.train", self.train_size),
            ("dataset.validation", self.validation_size),
            ("dataset.test", self.test_size),
        ] {
            if v == 0 {
                fail(k, "must be positive".into());
            }
        }
        match self.architecture() {
            Err(e) => fail("model.layers", e.to_string()),
            Ok(a) => {
                if a.input_dim() != input {
                    fail("model.layers", format!("input width {} != data dim {input}", a.input_dim()));
                }
                if a.output_dim() < classes {
                    fail("model.layers", format!("output width {} < {classes} classes", a.output_dim()));
                }
            }
        }
        if self.train.batch_size == 0 {
            fail("train.batch", "must be positive".into());
        }
        if !(self.train.learning_rate.is_finite() && self.train.learning_rate >= 0.0) {
            fail("train.lr", "must be finite and non-negative".into());
        }
        match self.train_size.checked_div(self.workers) {
            None => fail("workers.count", "must be at least 1".into()),
            Some(per_worker) => {
                let shard = match self.distribution {
                    DistributionMode::FullCopy => self.train_size,
                    DistributionMode::EqualShards => per_worker,
                };
                if shard == 0 {
                    fail("workers.count", format!("{} workers cannot share {} rows", self.workers, self.train_size));
                } else if self.train.batch_size > shard {
                    fail("train.batch", format!("batch {} exceeds local dataset size {shard}", self.train.batch_size));
                }
            }
        }
        if self.per_round == Some(0) {
            fail("workers.per_round", "must be at least 1".into());
        }
        if let Some(&w) = self.compromised.iter().find(|&&w| w >= self.workers) {
            fail("attack.compromised", format!("worker {w} does not exist ({} workers)", self.workers));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            fail("attack.flip_prob", "must be in [0, 1]".into());
        }
        if !self.fabrication.mu.is_finite() {
            fail("attack.mu", "must be finite".into());
        }
        if !(self.fabrication.sigma.is_finite() && self.fabrication.sigma > 0.0) {
            fail("attack.sigma", "must be finite and positive".into());
        }
        match self.rule {
            RuleKind::Krum if self.workers < 2 * self.byzantine_m + 3 => {
                fail("aggregation.m", format!("krum needs workers >= 2m + 3, got m = {}", self.byzantine_m))
            }
            RuleKind::Bulyan if self.workers < 4 * self.byzantine_m + 3 => {
                fail("aggregation.m", format!("bulyan needs workers >= 4m + 3, got m = {}", self.byzantine_m))
            }
            RuleKind::GeoMed if !(self.geomed_tol.is_finite() && self.geomed_tol > 0.0) => {
                fail("aggregation.tol", "must be finite and positive".into())
            }
            _ => {}
        }
        if let Err((k, r)) = self.monitor.validate() {
            fail(k, r);
        }
        if let Some(t) = self.target_accuracy {
            if !(0.0..=1.0).contains(&t) {
                fail("target_accuracy", "must be in [0, 1]".into());
            }
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            fail("metrics.beta", "must be finite and non-negative".into());
        }

        match problems.len() {
            0 => Ok(()),
            1 => {
                let (key, reason) = problems.remove(0);
                Err(Error::Config { key, reason })
            }
            _ => Err(Error::Invalid(problems)),
        }
    }
}
