use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::{MnistSetSample, RealSetSample, ScalarSetSample};
use crate::error::{Error, Result};
use crate::harness::ModelKind;
use crate::laf::{format_linear, init_params, project_tensor, units_from_tensor, LafParams, NUM_PARAMS};
use crate::ndcore::{init_dense, init_embedding, ParamStore, Segments, SetBatch, Tape, Tensor, Var};

/// Block holding the `[r, 12]` LAF parameters.
pub const LAF_BLOCK: &str = "laf";

const DIGITS: usize = 10;
const EMBED_DIM: usize = 10;
const MNIST_ENCODER: [usize; 4] = [784, 300, 100, 30];
const MNIST_DECODER: [usize; 2] = [1000, 100];

/// Network layout around the aggregation layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    /// Digit embedding, sigmoid, pool, linear head.
    Scalar,
    /// Dense/tanh image encoder ending in a sigmoid, pool, dense/tanh decoder.
    Mnist,
    /// Pool applied directly to values in `[0, 1]`; linear head iff more than one unit.
    Raw,
}

/// A batch of sets in the form a model consumes.
#[derive(Debug, Clone)]
pub enum ModelInput {
    Digits { digits: Vec<usize>, segments: Segments },
    Vectors(SetBatch),
}

impl ModelInput {
    pub fn num_sets(&self) -> usize {
        match self {
            ModelInput::Digits { segments, .. } => segments.num_sets(),
            ModelInput::Vectors(b) => b.num_sets(),
        }
    }
}

/// A labelled set that can be batched for a model.
pub trait Example: Sync {
    fn label(&self) -> f64;
    fn cardinality(&self) -> usize;
    fn to_input(batch: &[&Self]) -> Result<ModelInput>
    where
        Self: Sized;
}

impl Example for ScalarSetSample {
    fn label(&self) -> f64 {
        self.label
    }

    fn cardinality(&self) -> usize {
        self.elements.len()
    }

    fn to_input(batch: &[&Self]) -> Result<ModelInput> {
        let digits = batch
            .iter()
            .flat_map(|s| s.elements.iter().map(|&d| d as usize))
            .collect();
        let segments = Segments::from_lengths(batch.iter().map(|s| s.elements.len()));
        Ok(ModelInput::Digits { digits, segments })
    }
}

impl Example for RealSetSample {
    fn label(&self) -> f64 {
        self.label
    }

    fn cardinality(&self) -> usize {
        self.values.len()
    }

    fn to_input(batch: &[&Self]) -> Result<ModelInput> {
        let sets: Vec<Vec<f64>> = batch.iter().map(|s| s.values.clone()).collect();
        Ok(ModelInput::Vectors(SetBatch::from_scalar_sets(&sets)))
    }
}

impl Example for MnistSetSample {
    fn label(&self) -> f64 {
        self.label
    }

    fn cardinality(&self) -> usize {
        self.image_ids.len()
    }

    fn to_input(batch: &[&Self]) -> Result<ModelInput> {
        let dim = batch.first().map_or(0, |s| s.pool.image_len());
        let mut values = Vec::new();
        for s in batch {
            for img in s.images() {
                values.extend_from_slice(img);
            }
        }
        let segments = Segments::from_lengths(batch.iter().map(|s| s.image_ids.len()));
        let rows = segments.num_elements();
        Ok(ModelInput::Vectors(SetBatch::new(Tensor::new(vec![rows, dim], values)?, segments)?))
    }
}

/// A set-regression network and its trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SetModel {
    pub arch: Arch,
    pub kind: ModelKind,
    pub params: ParamStore,
}

fn insert_dense<R: Rng + ?Sized>(store: &mut ParamStore, rng: &mut R, name: &str, fan_in: usize, fan_out: usize) {
    let (w, b) = init_dense(rng, fan_in, fan_out);
    store.insert(format!("{name}.w"), w);
    store.insert(format!("{name}.b"), b);
}

fn insert_laf<R: Rng + ?Sized>(store: &mut ParamStore, rng: &mut R, units: usize) {
    let v = (0..units).flat_map(|_| init_params(rng).to_array()).collect();
    store.insert(LAF_BLOCK, Tensor::new(vec![units, NUM_PARAMS], v).expect("sized by construction"));
}

fn insert_pool<R: Rng + ?Sized>(store: &mut ParamStore, rng: &mut R, kind: ModelKind) {
    if let ModelKind::Laf { units } = kind {
        insert_laf(store, rng, units);
    }
}

/// Embedding(10,10) → sigmoid → pool → Dense(10·u, 1).
pub fn build_scalar_model<R: Rng + ?Sized>(kind: ModelKind, rng: &mut R) -> SetModel {
    let mut params = ParamStore::new();
    params.insert("embedding", init_embedding(rng, DIGITS, EMBED_DIM));
    insert_pool(&mut params, rng, kind);
    insert_dense(&mut params, rng, "head", EMBED_DIM * kind.pool_units(), 1);
    SetModel {
        arch: Arch::Scalar,
        kind,
        params,
    }
}

/// Dense(784,300) → tanh → Dense(300,100) → tanh → Dense(100,30) → sigmoid
/// → pool → Dense(30·u,1000) → tanh → Dense(1000,100) → tanh → Dense(100,1).
pub fn build_mnist_model<R: Rng + ?Sized>(kind: ModelKind, rng: &mut R) -> SetModel {
    let mut params = ParamStore::new();
    for (i, w) in MNIST_ENCODER.windows(2).enumerate() {
        insert_dense(&mut params, rng, &format!("enc{}", i + 1), w[0], w[1]);
    }
    insert_pool(&mut params, rng, kind);
    let pooled = MNIST_ENCODER[3] * kind.pool_units();
    let widths = [pooled, MNIST_DECODER[0], MNIST_DECODER[1], 1];
    for (i, w) in widths.windows(2).enumerate() {
        insert_dense(&mut params, rng, &format!("dec{}", i + 1), w[0], w[1]);
    }
    SetModel {
        arch: Arch::Mnist,
        kind,
        params,
    }
}

/// `units` LAF units applied directly to scalar sets in `[0, 1]`, followed by
/// a linear layer when `units > 1`.
pub fn build_raw_model<R: Rng + ?Sized>(units: usize, rng: &mut R) -> Result<SetModel> {
    if units == 0 {
        return Err(Error::Config("a LAF model needs at least one unit".into()));
    }
    let mut params = ParamStore::new();
    insert_laf(&mut params, rng, units);
    if units > 1 {
        insert_dense(&mut params, rng, "head", units, 1);
    }
    Ok(SetModel {
        arch: Arch::Raw,
        kind: ModelKind::Laf { units },
        params,
    })
}

impl SetModel {
    pub fn num_params(&self) -> usize {
        self.params.num_params()
    }

    fn dense(&self, tape: &mut Tape, x: Var, name: &str) -> Result<Var> {
        let w = tape.param(&self.params, &format!("{name}.w"))?;
        let b = tape.param(&self.params, &format!("{name}.b"))?;
        tape.dense(x, w, b)
    }

    fn pool(&self, tape: &mut Tape, x: Var, segments: &Segments) -> Result<Var> {
        match self.kind {
            ModelKind::Laf { .. } => {
                let p = tape.param(&self.params, LAF_BLOCK)?;
                tape.laf_layer(x, p, segments)
            }
            ModelKind::Fixed(k) => tape.fixed_pool(x, segments, k),
        }
    }

    /// Records the forward pass; the result has shape `[num_sets, 1]`.
    pub fn forward(&self, tape: &mut Tape, input: &ModelInput) -> Result<Var> {
        match (self.arch, input) {
            (Arch::Scalar, ModelInput::Digits { digits, segments }) => {
                let table = tape.param(&self.params, "embedding")?;
                let e = tape.embedding(table, digits)?;
                let s = tape.sigmoid(e)?;
                let pooled = self.pool(tape, s, segments)?;
                self.dense(tape, pooled, "head")
            }
            (Arch::Mnist, ModelInput::Vectors(batch)) => {
                let x = tape.constant(batch.elements().clone());
                let h = self.dense(tape, x, "enc1")?;
                let h = tape.tanh(h)?;
                let h = self.dense(tape, h, "enc2")?;
                let h = tape.tanh(h)?;
                let h = self.dense(tape, h, "enc3")?;
                let h = tape.sigmoid(h)?;
                let pooled = self.pool(tape, h, batch.segments())?;
                let h = self.dense(tape, pooled, "dec1")?;
                let h = tape.tanh(h)?;
                let h = self.dense(tape, h, "dec2")?;
                let h = tape.tanh(h)?;
                self.dense(tape, h, "dec3")
            }
            (Arch::Raw, ModelInput::Vectors(batch)) => {
                let x = tape.constant(batch.elements().clone());
                let pooled = self.pool(tape, x, batch.segments())?;
                if self.params.contains("head.w") {
                    self.dense(tape, pooled, "head")
                } else {
                    Ok(pooled)
                }
            }
            (arch, _) => Err(Error::Config(format!("input kind does not match the {:?} architecture", arch))),
        }
    }

    /// Predictions for a batch, without touching the parameters.
    pub fn predict(&self, input: &ModelInput) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, input)?;
        Ok(tape.value(out).values().to_vec())
    }

    /// Clamps LAF exponents at 0.
    pub fn project(&mut self) -> Result<()> {
        if self.params.contains(LAF_BLOCK) {
            project_tensor(self.params.value_mut(LAF_BLOCK)?);
        }
        Ok(())
    }

    pub fn laf_units(&self) -> Result<Vec<LafParams>> {
        if !self.params.contains(LAF_BLOCK) {
            return Ok(Vec::new());
        }
        units_from_tensor(self.params.value(LAF_BLOCK)?)
    }

    /// The linear head of a raw multi-unit model, rendered as a formula.
    pub fn head_formula(&self) -> Result<Option<String>> {
        if self.arch != Arch::Raw || !self.params.contains("head.w") {
            return Ok(None);
        }
        let w = self.params.value("head.w")?.values().to_vec();
        let b = self.params.value("head.b")?.values()[0];
        Ok(Some(format_linear(b, &w, "unit")))
    }
}
