//! Tape-based reverse-mode differentiation over [`Tensor`] values.
//!
//! Every operation appends a node holding its output value and the
//! information its vector-Jacobian product needs. [`Tape::backward`] walks
//! the nodes in exact reverse order, summing gradient contributions when a
//! value feeds more than one consumer.

use crate::error::{Error, Result};
use crate::ndcore::{ParamStore, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A differentiable primitive recorded on the tape.
pub trait Op: Send {
    fn name(&self) -> &'static str;

    /// Given the gradient of the loss w.r.t. this op's output, returns the
    /// gradient w.r.t. each input (same order as recorded). `None` means the
    /// input receives no gradient from this op.
    fn backward(
        &self,
        inputs: &[&Tensor],
        output: &Tensor,
        upstream: &Tensor,
    ) -> Result<Vec<Option<Tensor>>>;
}

struct Node {
    value: Tensor,
    inputs: Vec<Var>,
    op: Option<Box<dyn Op>>,
    param: Option<String>,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// A value that never receives gradients.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, None, false)
    }

    /// A free variable that receives gradients but is not tied to a store.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, None, true)
    }

    /// Loads a parameter block; its gradient is routed back by
    /// [`Gradients::accumulate_into`].
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        let value = store.value(name)?.clone();
        Ok(self.push_leaf(value, Some(name.to_string()), true))
    }

    fn push_leaf(&mut self, value: Tensor, param: Option<String>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            inputs: Vec::new(),
            op: None,
            param,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records an op whose forward value has already been computed.
    pub fn push(&mut self, op: Box<dyn Op>, inputs: &[Var], value: Tensor) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                what: format!("output of {}", op.name()),
            });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            inputs: inputs.to_vec(),
            op: Some(op),
            param: None,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Reverse pass from a single-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let root = &self.nodes[loss.0];
        if root.value.len() != 1 {
            return Err(Error::shape(
                "backward",
                format!("loss must have one element, shape is {:?}", root.value.shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::new(root.value.shape().to_vec(), vec![1.0])?);
        let mut visited = Vec::new();

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            let Some(op) = node.op.as_ref() else { continue };
            if !node.requires_grad {
                continue;
            }
            let Some(upstream) = grads[idx].take() else { continue };
            visited.push(Var(idx));
            let inputs: Vec<&Tensor> = node.inputs.iter().map(|v| &self.nodes[v.0].value).collect();
            let input_grads = op.backward(&inputs, &node.value, &upstream)?;
            grads[idx] = Some(upstream);
            for (input, g) in node.inputs.iter().zip(input_grads) {
                let Some(g) = g else { continue };
                if !self.nodes[input.0].requires_grad {
                    continue;
                }
                if !g.is_finite() {
                    return Err(Error::NonFinite {
                        what: format!("gradient flowing out of {}", op.name()),
                    });
                }
                match &mut grads[input.0] {
                    Some(acc) => acc.add_assign(&g),
                    slot @ None => *slot = Some(g),
                }
            }
        }

        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.param.clone().map(|name| (Var(i), name)))
            .collect();
        Ok(Gradients {
            grads,
            params,
            visited,
        })
    }
}

/// Result of [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<(Var, String)>,
    visited: Vec<Var>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Op nodes in the order the reverse pass processed them.
    pub fn visit_order(&self) -> &[Var] {
        &self.visited
    }

    /// Adds every parameter gradient into the store's gradient buffers.
    pub fn accumulate_into(&self, store: &mut ParamStore) -> Result<()> {
        for (v, name) in &self.params {
            if let Some(g) = self.get(*v) {
                store.add_grad(name, g)?;
            }
        }
        Ok(())
    }
}
