//! Model construction, training, evaluation sweeps, the restart study and
//! run persistence.

pub mod checks;
mod config;
mod eval;
mod model;
mod record;
mod run;
mod study;
mod train;

pub use config::{ExperimentConfig, ModelKind, Task, DEFAULT_LAF_UNITS};
pub use eval::{
    best_constant, best_constant_mae, evaluate_sweep, evaluate_sweep_with, ConstantPredictor, OraclePredictor,
    Predictor,
};
pub use model::{build_mnist_model, build_raw_model, build_scalar_model, Arch, Example, ModelInput, SetModel, LAF_BLOCK};
pub use record::{
    dataset_hash, load, load_weights, persist, persist_weights, results_csv, RunRecord, CSV_HEADER, RECORD_VERSION,
    RESULTS_FILE, RUN_FILE, WEIGHTS_FILE,
};
pub use run::{run_experiment, train_options, RunSeeds};
pub use study::{quantile, restarts_study, summarize, StudyConfig, StudyRow, StudySummary};
pub use train::{dataset_mae, predict_all, train, Losses, TrainOptions, TrainOutcome, EVAL_CHUNK};

/// Applies `f` to every item on up to `jobs` threads; results keep input order.
pub fn parallel_map<T, R, F>(jobs: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    use rayon::prelude::*;
    if jobs <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}
