use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndcore::Tensor;

#[derive(Debug, Clone, PartialEq)]
struct Block {
    values: Tensor,
    grad: Tensor,
    adam_m: Tensor,
    adam_v: Tensor,
}

/// Named trainable parameter blocks with gradient buffers and Adam moments.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    blocks: BTreeMap<String, Block>,
    step_count: u64,
}

/// Serializable snapshot of parameter values (optimizer state excluded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSnapshot(pub BTreeMap<String, Tensor>);

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a block; replaces any existing block with the same name.
    pub fn insert(&mut self, name: impl Into<String>, values: Tensor) {
        let zeros = Tensor::zeros(values.shape());
        self.blocks.insert(
            name.into(),
            Block {
                grad: zeros.clone(),
                adam_m: zeros.clone(),
                adam_v: zeros,
                values,
            },
        );
    }

    fn block(&self, name: &str) -> Result<&Block> {
        self.blocks
            .get(name)
            .ok_or_else(|| Error::UnknownBlock(name.to_string()))
    }

    fn block_mut(&mut self, name: &str) -> Result<&mut Block> {
        self.blocks
            .get_mut(name)
            .ok_or_else(|| Error::UnknownBlock(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.blocks.contains_key(name)
    }

    pub fn value(&self, name: &str) -> Result<&Tensor> {
        Ok(&self.block(name)?.values)
    }

    pub fn value_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        Ok(&mut self.block_mut(name)?.values)
    }

    pub fn grad(&self, name: &str) -> Result<&Tensor> {
        Ok(&self.block(name)?.grad)
    }

    pub fn add_grad(&mut self, name: &str, g: &Tensor) -> Result<()> {
        let block = self.block_mut(name)?;
        if block.grad.shape() != g.shape() {
            return Err(Error::shape(
                "add_grad",
                format!(
                    "block `{}` has shape {:?}, gradient has {:?}",
                    name,
                    block.grad.shape(),
                    g.shape()
                ),
            ));
        }
        block.grad.add_assign(g);
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for b in self.blocks.values_mut() {
            b.grad.values_mut().fill(0.0);
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.blocks.keys().map(String::as_str)
    }

    pub fn num_params(&self) -> usize {
        self.blocks.values().map(|b| b.values.len()).sum()
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn all_finite(&self) -> bool {
        self.blocks.values().all(|b| b.values.is_finite())
    }

    pub fn snapshot(&self) -> ParamSnapshot {
        ParamSnapshot(
            self.blocks
                .iter()
                .map(|(k, b)| (k.clone(), b.values.clone()))
                .collect(),
        )
    }

    /// Overwrites values from a snapshot; every block must already exist with
    /// a matching shape.
    pub fn restore(&mut self, snap: &ParamSnapshot) -> Result<()> {
        for (name, values) in &snap.0 {
            let block = self.block_mut(name)?;
            if block.values.shape() != values.shape() {
                return Err(Error::shape(
                    "restore",
                    format!("block `{}` shape {:?} vs {:?}", name, block.values.shape(), values.shape()),
                ));
            }
            block.values = values.clone();
        }
        Ok(())
    }

    /// Applies one Adam update with bias correction to every block, then
    /// zeroes the gradients and increments the step counter. Fails without
    /// touching anything if a gradient is non-finite.
    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<()> {
        if let Some((name, _)) = self.blocks.iter().find(|(_, b)| !b.grad.is_finite()) {
            return Err(Error::NonFiniteGradient { block: name.clone() });
        }
        let t = (self.step_count + 1) as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for b in self.blocks.values_mut() {
            let g = b.grad.values();
            let m = b.adam_m.values_mut();
            for (mi, gi) in m.iter_mut().zip(g) {
                *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
            }
            let v = b.adam_v.values_mut();
            for (vi, gi) in v.iter_mut().zip(g) {
                *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
            }
            let (m, v) = (b.adam_m.values(), b.adam_v.values());
            for ((w, mi), vi) in b.values.values_mut().iter_mut().zip(m).zip(v) {
                let m_hat = mi / bc1;
                let v_hat = vi / bc2;
                *w -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
            b.grad.values_mut().fill(0.0);
        }
        self.step_count += 1;
        Ok(())
    }
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Free-function form of [`ParamStore::adam_step`].
pub fn adam_step(store: &mut ParamStore, cfg: &AdamConfig) -> Result<()> {
    store.adam_step(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradients_leave_values_unchanged() {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::vector(vec![0.5, -1.25, 3.0]));
        let before = s.value("w").unwrap().clone();
        s.adam_step(&AdamConfig::default()).unwrap();
        assert_eq!(s.value("w").unwrap(), &before);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn one_step_moves_by_lr_times_sign() {
        let cfg = AdamConfig::default();
        for g in [2.5, -0.3] {
            let mut s = ParamStore::new();
            s.insert("w", Tensor::scalar(1.0));
            s.add_grad("w", &Tensor::scalar(g)).unwrap();
            s.adam_step(&cfg).unwrap();
            // m̂ = g, v̂ = g², update = lr·g/(|g| + eps)
            let expected = 1.0 - cfg.lr * g / (g.abs() + cfg.eps);
            let got = s.value("w").unwrap().values()[0];
            assert!((got - expected).abs() < 1e-15);
            assert!((got - (1.0 - cfg.lr * g.signum())).abs() < 1e-10);
            assert_eq!(s.grad("w").unwrap().values(), &[0.0]);
        }
    }

    #[test]
    fn non_finite_gradient_names_block() {
        let mut s = ParamStore::new();
        s.insert("ok", Tensor::scalar(1.0));
        s.insert("bad", Tensor::scalar(1.0));
        s.add_grad("bad", &Tensor::scalar(f64::NAN)).unwrap();
        match s.adam_step(&AdamConfig::default()) {
            Err(Error::NonFiniteGradient { block }) => assert_eq!(block, "bad"),
            other => panic!("unexpected {:?}", other),
        }
        assert_eq!(s.step_count(), 0);
    }

    #[test]
    fn snapshot_restore() {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::vector(vec![1.0, 2.0]));
        let snap = s.snapshot();
        s.value_mut("w").unwrap().values_mut()[0] = 9.0;
        s.restore(&snap).unwrap();
        assert_eq!(s.value("w").unwrap().values(), &[1.0, 2.0]);
    }
}
