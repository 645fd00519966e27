//! Dense tensors, a reverse-mode tape, the layers the set models need, and
//! the Adam / plateau-decay optimizer pieces.

mod batch;
pub mod gradcheck;
mod ops;
pub mod optim;
mod params;
mod tape;
mod tensor;

pub use batch::{SetBatch, Segments};
pub use gradcheck::{grad_check, grad_check_graph, grad_check_refined, ridders_derivative, GradCheckReport};
pub use ops::{mae, sigmoid_scalar};
pub use optim::{plateau_decay, PlateauConfig, PlateauDecay};
pub use params::{adam_step, AdamConfig, ParamSnapshot, ParamStore};
pub use tape::{Gradients, Op, Tape, Var};
pub use tensor::Tensor;

use rand::Rng;

/// Uniform `[-1/√fan_in, 1/√fan_in]` initialization for a dense layer's
/// weights `[fan_in, fan_out]` and bias `[fan_out]`.
pub fn init_dense<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize) -> (Tensor, Tensor) {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let w = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    let b = (0..fan_out).map(|_| rng.random_range(-bound..=bound)).collect();
    (
        Tensor::new(vec![fan_in, fan_out], w).expect("sized by construction"),
        Tensor::vector(b),
    )
}

/// Uniform `[-1, 1]` embedding table `[vocab, dim]`.
pub fn init_embedding<R: Rng + ?Sized>(rng: &mut R, vocab: usize, dim: usize) -> Tensor {
    let v = (0..vocab * dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
    Tensor::new(vec![vocab, dim], v).expect("sized by construction")
}
