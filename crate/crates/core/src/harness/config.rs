use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::FixedPoolKind;
use crate::datasets::TargetKind;
use crate::error::{Error, Result};
use crate::ndcore::{AdamConfig, PlateauConfig};

/// Units in the default LAF layer.
pub const DEFAULT_LAF_UNITS: usize = 9;

/// Which aggregation sits between the element encoder and the head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelKind {
    Laf { units: usize },
    Fixed(FixedPoolKind),
}

impl ModelKind {
    pub const VALID: &'static str = "laf, laf<r> (e.g. laf3), deepsets9, pna7";

    pub fn laf() -> Self {
        ModelKind::Laf {
            units: DEFAULT_LAF_UNITS,
        }
    }

    /// Width of the pooled representation per input dimension.
    pub fn pool_units(self) -> usize {
        match self {
            ModelKind::Laf { units } => units,
            ModelKind::Fixed(k) => k.units().len(),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Laf { units } if *units == DEFAULT_LAF_UNITS => f.write_str("laf"),
            ModelKind::Laf { units } => write!(f, "laf{}", units),
            ModelKind::Fixed(k) => write!(f, "{}", k),
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown model `{}`; valid values: {}", s, ModelKind::VALID));
        match s {
            "laf" => Ok(ModelKind::laf()),
            _ if s.starts_with("laf") => match s[3..].parse::<usize>() {
                Ok(units) if units >= 1 => Ok(ModelKind::Laf { units }),
                _ => Err(bad()),
            },
            _ => s.parse::<FixedPoolKind>().map(ModelKind::Fixed).map_err(|_| bad()),
        }
    }
}

impl TryFrom<String> for ModelKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModelKind> for String {
    fn from(m: ModelKind) -> String {
        m.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Scalar,
    Mnist,
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scalar" => Ok(Task::Scalar),
            "mnist" => Ok(Task::Mnist),
            _ => Err(Error::Config(format!("unknown task `{}`; valid values: scalar, mnist", s))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Scalar => "scalar",
            Task::Mnist => "mnist",
        })
    }
}

fn default_beta1() -> f64 {
    AdamConfig::default().beta1
}
fn default_beta2() -> f64 {
    AdamConfig::default().beta2
}
fn default_eps() -> f64 {
    AdamConfig::default().eps
}
fn default_mnist_images() -> usize {
    10_000
}

/// Everything needed to reproduce one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub task: Task,
    pub target: TargetKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub train_size: usize,
    pub val_size: usize,
    /// Test sets per sweep point.
    pub test_size: usize,
    /// Largest cardinality seen in training and validation.
    pub train_m: usize,
    /// Test cardinality bounds, ascending.
    pub sweep: Vec<usize>,
    /// MNIST training images the sets draw from.
    #[serde(default = "default_mnist_images")]
    pub mnist_images: usize,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub plateau: PlateauConfig,
}

impl ExperimentConfig {
    /// Laptop-sized defaults: 10000/2000/10000 sets, 30 epochs (10 for MNIST).
    pub fn desk(task: Task, model: ModelKind, target: TargetKind) -> Self {
        ExperimentConfig {
            model,
            task,
            target,
            epochs: match task {
                Task::Scalar => 30,
                Task::Mnist => 10,
            },
            batch_size: 64,
            lr: 1e-3,
            seed: 0,
            train_size: 10_000,
            val_size: 2_000,
            test_size: 10_000,
            train_m: 10,
            sweep: (1..=10).map(|i| 5 * i).collect(),
            mnist_images: default_mnist_images(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
            plateau: PlateauConfig::default(),
        }
    }

    /// Full-size runs: 100000/20000/100000 sets, 100 epochs, all MNIST images.
    pub fn full_scale(task: Task, model: ModelKind, target: TargetKind) -> Self {
        ExperimentConfig {
            epochs: 100,
            train_size: 100_000,
            val_size: 20_000,
            test_size: 100_000,
            mnist_images: 60_000,
            ..Self::desk(task, model, target)
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.epochs == 0 {
            return fail("epochs must be >= 1".into());
        }
        self.validate_allowing_zero_epochs()?;
        Ok(())
    }

    /// Like [`validate`](Self::validate) but accepts `epochs = 0`, which
    /// `train` treats as "evaluate the initial weights".
    pub fn validate_allowing_zero_epochs(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1".into());
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return fail(format!("lr must be positive, got {}", self.lr));
        }
        if self.train_size == 0 || self.val_size == 0 || self.test_size == 0 {
            return fail("train_size, val_size and test_size must be >= 1".into());
        }
        if self.train_m < 2 {
            return fail(format!("train_m must be >= 2, got {}", self.train_m));
        }
        if self.sweep.is_empty() || self.sweep.iter().any(|&m| m < 2) {
            return fail("sweep must be a nonempty list of cardinalities >= 2".into());
        }
        if self.sweep.windows(2).any(|w| w[0] >= w[1]) {
            return fail(format!("sweep must be strictly ascending, got {:?}", self.sweep));
        }
        if let ModelKind::Laf { units: 0 } = self.model {
            return fail("a LAF model needs at least one unit".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return fail("Adam needs 0 <= beta1, beta2 < 1 and eps > 0".into());
        }
        Ok(())
    }

    /// Reads a JSON config file; unknown keys are rejected.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_names() {
        for (s, m) in [
            ("laf", ModelKind::laf()),
            ("laf3", ModelKind::Laf { units: 3 }),
            ("deepsets9", ModelKind::Fixed(FixedPoolKind::Deepsets9)),
            ("pna7", ModelKind::Fixed(FixedPoolKind::Pna7)),
        ] {
            assert_eq!(s.parse::<ModelKind>().unwrap(), m);
            assert_eq!(m.to_string(), s);
        }
        let err = "lstm".parse::<ModelKind>().unwrap_err().to_string();
        assert!(err.contains("deepsets9") && err.contains("pna7"), "{}", err);
        assert!("laf0".parse::<ModelKind>().is_err());
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let cfg = ExperimentConfig::desk(Task::Scalar, ModelKind::laf(), TargetKind::Moment(3));
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&text).unwrap(), cfg);

        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(serde_json::from_value::<ExperimentConfig>(v).is_err());
    }

    #[test]
    fn validation() {
        let ok = ExperimentConfig::desk(Task::Scalar, ModelKind::laf(), TargetKind::Sum);
        ok.validate().unwrap();
        for bad in [
            ExperimentConfig { batch_size: 0, ..ok.clone() },
            ExperimentConfig { epochs: 0, ..ok.clone() },
            ExperimentConfig { sweep: vec![10, 5], ..ok.clone() },
            ExperimentConfig { sweep: vec![], ..ok.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
        ExperimentConfig { epochs: 0, ..ok }.validate_allowing_zero_epochs().unwrap();
    }
}
