use serde::{Deserialize, Serialize};

use crate::datasets::{gen_real_sets, TargetKind};
use crate::error::{Error, Result};
use crate::harness::{build_raw_model, dataset_mae, train, TrainOptions};
use crate::laf::LafParams;
use crate::ndcore::{AdamConfig, PlateauConfig};
use crate::seed::{derive_seed, rng_for};

/// Settings for the multi-unit restart study on raw real-valued sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub target: TargetKind,
    pub unit_counts: Vec<usize>,
    pub restarts: usize,
    /// Largest set size; sizes are uniform on `{2..=max_card}`.
    pub max_card: usize,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl StudyConfig {
    pub fn desk(target: TargetKind, unit_counts: Vec<usize>, restarts: usize) -> Self {
        StudyConfig {
            target,
            unit_counts,
            restarts,
            max_card: 10,
            train_size: 2_000,
            val_size: 500,
            test_size: 2_000,
            epochs: 30,
            batch_size: 64,
            lr: 1e-2,
            seed: 0,
        }
    }
}

/// One trained restart.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub units: usize,
    pub restart: usize,
    pub mae: f64,
    pub laf_params: Vec<LafParams>,
    /// Linear combination rendered as a formula, for `units > 1`.
    pub head: Option<String>,
}

/// Quartile summary of the MAE distribution for one unit count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudySummary {
    pub units: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl StudySummary {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Linear-interpolation quantile of sorted data, `q` in `[0, 1]`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(rows: &[StudyRow]) -> Vec<StudySummary> {
    let mut units: Vec<usize> = rows.iter().map(|r| r.units).collect();
    units.sort_unstable();
    units.dedup();
    units
        .into_iter()
        .map(|u| {
            let mut v: Vec<f64> = rows.iter().filter(|r| r.units == u).map(|r| r.mae).collect();
            v.sort_by(f64::total_cmp);
            StudySummary {
                units: u,
                min: v[0],
                q1: quantile(&v, 0.25),
                median: quantile(&v, 0.5),
                q3: quantile(&v, 0.75),
                max: v[v.len() - 1],
            }
        })
        .collect()
}

fn run_one(cfg: &StudyConfig, data: &StudyData, units: usize, restart: usize) -> Result<StudyRow> {
    let init = derive_seed(cfg.seed, "study-init", (units as u64) << 32 | restart as u64);
    let mut model = build_raw_model(units, &mut rng_for(init, "model", 0))?;
    let opts = TrainOptions {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        adam: AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
        plateau: PlateauConfig::default(),
        seed: derive_seed(init, "shuffle", 0),
    };
    // A restart that blows up counts as a failed restart, not a failed study.
    let mae = match train(&mut model, &data.train, &data.val, &opts) {
        Ok(_) => dataset_mae(&model, &data.test)?,
        Err(Error::Diverged { .. }) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    Ok(StudyRow {
        units,
        restart,
        mae,
        laf_params: model.laf_units()?,
        head: model.head_formula()?,
    })
}

struct StudyData {
    train: Vec<crate::datasets::RealSetSample>,
    val: Vec<crate::datasets::RealSetSample>,
    test: Vec<crate::datasets::RealSetSample>,
}

/// Trains `restarts` independently initialized raw LAF models for every
/// unit count on shared data and reports each one's test MAE. Rows come
/// back ordered by unit count, then restart, regardless of `jobs`.
pub fn restarts_study(cfg: &StudyConfig, jobs: usize) -> Result<Vec<StudyRow>> {
    if cfg.restarts == 0 || cfg.unit_counts.is_empty() || cfg.unit_counts.contains(&0) {
        return Err(Error::Config("need >= 1 restart and unit counts >= 1".into()));
    }
    let data = StudyData {
        train: gen_real_sets(cfg.target, cfg.train_size, cfg.max_card, derive_seed(cfg.seed, "study-train", 0))?,
        val: gen_real_sets(cfg.target, cfg.val_size, cfg.max_card, derive_seed(cfg.seed, "study-val", 0))?,
        test: gen_real_sets(cfg.target, cfg.test_size, cfg.max_card, derive_seed(cfg.seed, "study-test", 0))?,
    };
    let jobs_list: Vec<(usize, usize)> = cfg
        .unit_counts
        .iter()
        .flat_map(|&u| (0..cfg.restarts).map(move |r| (u, r)))
        .collect();
    crate::harness::parallel_map(jobs, &jobs_list, |&(u, r)| run_one(cfg, &data, u, r))
        .into_iter()
        .collect()
}
