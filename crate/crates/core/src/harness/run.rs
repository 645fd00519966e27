use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use crate::datasets::{gen_scalar_train, load_split, mnist_setify, Split};
use crate::error::Result;
use crate::harness::{
    build_mnist_model, build_scalar_model, dataset_hash, evaluate_sweep, evaluate_sweep_with, train, ExperimentConfig,
    RunRecord, SetModel, Task, TrainOptions, TrainOutcome, RECORD_VERSION,
};
use crate::seed::{derive_seed, rng_for};

/// Seeds for the independent random streams of one run.
#[derive(Debug, Clone, Copy)]
pub struct RunSeeds {
    pub train: u64,
    pub val: u64,
    pub test: u64,
    pub init: u64,
    pub shuffle: u64,
}

impl RunSeeds {
    pub fn new(seed: u64) -> Self {
        RunSeeds {
            train: derive_seed(seed, "train-data", 0),
            val: derive_seed(seed, "val-data", 0),
            test: derive_seed(seed, "test-data", 0),
            init: derive_seed(seed, "init", 0),
            shuffle: derive_seed(seed, "shuffle", 0),
        }
    }
}

pub fn train_options(cfg: &ExperimentConfig) -> TrainOptions {
    TrainOptions {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        adam: cfg.adam(),
        plateau: cfg.plateau,
        seed: RunSeeds::new(cfg.seed).shuffle,
    }
}

/// Builds, trains and sweep-evaluates the model described by `cfg`.
/// `mnist_dir` is only read for the MNIST task.
pub fn run_experiment(cfg: &ExperimentConfig, mnist_dir: &Path) -> Result<(RunRecord, SetModel)> {
    cfg.validate_allowing_zero_epochs()?;
    let start = Instant::now();
    let seeds = RunSeeds::new(cfg.seed);
    let train_scalar = gen_scalar_train(cfg.target, cfg.train_size, cfg.train_m, seeds.train)?;
    let val_scalar = gen_scalar_train(cfg.target, cfg.val_size, cfg.train_m, seeds.val)?;
    let mut rng = rng_for(seeds.init, "model", 0);
    let opts = train_options(cfg);

    let (model, outcome, test_mae) = match cfg.task {
        Task::Scalar => {
            let mut model = build_scalar_model(cfg.model, &mut rng);
            let outcome = train(&mut model, &train_scalar, &val_scalar, &opts)?;
            let test_mae = evaluate_sweep(&model, cfg.target, &cfg.sweep, cfg.test_size, seeds.test)?;
            (model, outcome, test_mae)
        }
        Task::Mnist => {
            let train_pool = Arc::new(load_split(mnist_dir, Split::Train)?.truncated(cfg.mnist_images));
            let test_pool = Arc::new(load_split(mnist_dir, Split::Test)?);
            let train_sets = mnist_setify(&train_scalar, &train_pool, seeds.train)?;
            let val_sets = mnist_setify(&val_scalar, &train_pool, seeds.val)?;
            let mut model = build_mnist_model(cfg.model, &mut rng);
            let outcome = train(&mut model, &train_sets, &val_sets, &opts)?;
            let test_mae = evaluate_sweep_with(&model, cfg.target, &cfg.sweep, cfg.test_size, seeds.test, |s, m| {
                mnist_setify(&s, &test_pool, derive_seed(seeds.test, "mnist-test", m as u64))
            })?;
            (model, outcome, test_mae)
        }
    };
    let TrainOutcome {
        losses,
        best_epoch,
        final_lr,
        ..
    } = outcome;
    let record = RunRecord {
        version: RECORD_VERSION,
        config: cfg.clone(),
        losses,
        best_epoch,
        final_lr,
        test_mae,
        laf_params: model.laf_units()?.iter().map(|u| u.to_array()).collect(),
        wall_time_s: start.elapsed().as_secs_f64(),
        dataset_hash: dataset_hash(cfg),
    };
    Ok((record, model))
}
