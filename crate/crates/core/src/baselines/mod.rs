//! Fixed-aggregator pooling layers (DeepSets-style and PNA-style) and the
//! population-moment helpers they share with the target evaluators.

mod moments;
mod pool;

pub use moments::{sample_moments, SampleMoments};
pub use pool::{fixed_pool_forward, Aggregator, FixedPoolKind};
