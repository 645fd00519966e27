use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{Example, SetModel};
use crate::laf::format_unit;
use crate::ndcore::{mae, AdamConfig, PlateauConfig, PlateauDecay, Tape};
use crate::seed::rng_for;

/// Sets per forward pass when only predictions are needed.
pub const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub plateau: PlateauConfig,
    /// Seeds the per-epoch shuffles.
    pub seed: u64,
}

/// Loss curves; index 0 of both lists is the initial model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Losses {
    /// Entry 0 is the MAE over the training data before any step; entry
    /// `e > 0` is the mean batch loss during epoch `e`.
    pub train: Vec<f64>,
    pub val: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub losses: Losses,
    /// Epoch whose weights were kept (0 means the initial weights).
    pub best_epoch: usize,
    pub best_val: f64,
    pub final_lr: f64,
}

/// Predictions of `model` for `data`, in order.
pub fn predict_all<E: Example>(model: &SetModel, data: &[E]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(data.len());
    for chunk in data.chunks(EVAL_CHUNK) {
        let refs: Vec<&E> = chunk.iter().collect();
        out.extend(model.predict(&E::to_input(&refs)?)?);
    }
    Ok(out)
}

pub fn dataset_mae<E: Example>(model: &SetModel, data: &[E]) -> Result<f64> {
    let pred = predict_all(model, data)?;
    let labels: Vec<f64> = data.iter().map(Example::label).collect();
    mae(&pred, &labels)
}

fn diagnostic<E: Example>(model: &SetModel, batch: &[&E], cause: &Error) -> String {
    let sets: Vec<String> = batch
        .iter()
        .take(8)
        .map(|s| format!("(size {}, label {})", s.cardinality(), s.label()))
        .collect();
    let units: Vec<String> = model
        .laf_units()
        .unwrap_or_default()
        .iter()
        .map(|u| format!("{:?} = {}", u.to_array(), format_unit(u)))
        .collect();
    format!(
        "{cause}; batch of {} sets, first: [{}]; LAF units: [{}]",
        batch.len(),
        sets.join(", "),
        units.join("; ")
    )
}

/// Mini-batch Adam on the MAE with projection after every step, plateau
/// decay on the validation MAE and best-validation checkpointing.
///
/// With `epochs = 0` the model is evaluated and returned unchanged.
pub fn train<E: Example>(model: &mut SetModel, train: &[E], val: &[E], opts: &TrainOptions) -> Result<TrainOutcome> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Empty("training and validation data"));
    }
    if opts.batch_size == 0 {
        return Err(Error::Config("batch_size must be >= 1".into()));
    }
    let mut losses = Losses {
        train: vec![dataset_mae(model, train)?],
        val: vec![dataset_mae(model, val)?],
    };
    let mut best_val = losses.val[0];
    let mut best_epoch = 0;
    let mut best = model.params.snapshot();
    let mut sched = PlateauDecay::new(opts.adam.lr, opts.plateau);
    let mut rng = rng_for(opts.seed, "shuffle", 0);
    let mut order: Vec<usize> = (0..train.len()).collect();
    model.params.zero_grad();

    for epoch in 1..=opts.epochs {
        order.shuffle(&mut rng);
        let adam = AdamConfig {
            lr: sched.lr(),
            ..opts.adam
        };
        let mut total = 0.0;
        for (b, idx) in order.chunks(opts.batch_size).enumerate() {
            let batch: Vec<&E> = idx.iter().map(|&i| &train[i]).collect();
            let labels: Vec<f64> = batch.iter().map(|s| s.label()).collect();
            let step = |model: &mut SetModel| -> Result<f64> {
                let mut tape = Tape::new();
                let pred = model.forward(&mut tape, &E::to_input(&batch)?)?;
                let loss = tape.mae_loss(pred, &labels)?;
                let value = tape.value(loss).values()[0];
                tape.backward(loss)?.accumulate_into(&mut model.params)?;
                model.params.adam_step(&adam)?;
                model.project()?;
                Ok(value)
            };
            match step(model) {
                Ok(v) => total += v * batch.len() as f64,
                Err(e) => {
                    return Err(Error::Diverged {
                        epoch,
                        batch: b,
                        diagnostic: diagnostic(model, &batch, &e),
                    })
                }
            }
        }
        if !model.params.all_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: order.len().div_ceil(opts.batch_size),
                diagnostic: "non-finite parameters after epoch".into(),
            });
        }
        losses.train.push(total / train.len() as f64);
        let v = dataset_mae(model, val)?;
        losses.val.push(v);
        sched.observe(v);
        if v < best_val {
            best_val = v;
            best_epoch = epoch;
            best = model.params.snapshot();
        }
    }
    model.params.restore(&best)?;
    Ok(TrainOutcome {
        losses,
        best_epoch,
        best_val,
        final_lr: sched.lr(),
    })
}
