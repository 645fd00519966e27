//! Set datasets with ground-truth aggregation targets.

mod mnist;
mod scalar;
mod targets;

pub use mnist::{
    default_data_dir, load_split, mnist_load_idx, mnist_setify, MnistData, MnistSetSample, Split, DATA_DIR_ENV,
    IMAGE_MAGIC, LABEL_MAGIC,
};
pub use scalar::{
    gen_real_sets, gen_scalar_test, gen_scalar_train, read_records, write_records, RealSetSample, ScalarSetSample,
    ScalarTestSet, LABEL_BINS, MAX_ATTEMPTS, MIN_CARD,
};
pub use targets::{target_value, TargetKind};
