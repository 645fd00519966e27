use crate::error::{Error, Result};
use crate::ndcore::tensor::{matmul, matmul_at, matmul_bt};
use crate::ndcore::{Op, Tape, Tensor, Var};

/// Numerically stable logistic function.
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct Dense;

impl Op for Dense {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn backward(&self, inputs: &[&Tensor], _out: &Tensor, up: &Tensor) -> Result<Vec<Option<Tensor>>> {
        let (x, w) = (inputs[0], inputs[1]);
        let (n, k) = x.dims2("dense")?;
        let m = w.shape()[1];
        let gx = matmul_bt(up.values(), w.values(), n, m, k);
        let gw = matmul_at(x.values(), up.values(), n, k, m);
        let mut gb = vec![0.0; m];
        for row in up.values().chunks_exact(m) {
            for (acc, v) in gb.iter_mut().zip(row) {
                *acc += v;
            }
        }
        Ok(vec![
            Some(Tensor::new(vec![n, k], gx)?),
            Some(Tensor::new(vec![k, m], gw)?),
            Some(Tensor::vector(gb)),
        ])
    }
}

struct Embedding {
    indices: Vec<usize>,
}

impl Op for Embedding {
    fn name(&self) -> &'static str {
        "embedding"
    }

    fn backward(&self, inputs: &[&Tensor], _out: &Tensor, up: &Tensor) -> Result<Vec<Option<Tensor>>> {
        let table = inputs[0];
        let (_, dim) = table.dims2("embedding")?;
        let mut g = Tensor::zeros(table.shape());
        let gv = g.values_mut();
        for (row, &idx) in self.indices.iter().enumerate() {
            let src = &up.values()[row * dim..(row + 1) * dim];
            for (acc, v) in gv[idx * dim..(idx + 1) * dim].iter_mut().zip(src) {
                *acc += v;
            }
        }
        Ok(vec![Some(g)])
    }
}

struct Sigmoid;

impl Op for Sigmoid {
    fn name(&self) -> &'static str {
        "sigmoid"
    }

    fn backward(&self, _inputs: &[&Tensor], out: &Tensor, up: &Tensor) -> Result<Vec<Option<Tensor>>> {
        let g = out
            .values()
            .iter()
            .zip(up.values())
            .map(|(y, u)| u * y * (1.0 - y))
            .collect();
        Ok(vec![Some(Tensor::new(out.shape().to_vec(), g)?)])
    }
}

struct Tanh;

impl Op for Tanh {
    fn name(&self) -> &'static str {
        "tanh"
    }

    fn backward(&self, _inputs: &[&Tensor], out: &Tensor, up: &Tensor) -> Result<Vec<Option<Tensor>>> {
        let g = out
            .values()
            .iter()
            .zip(up.values())
            .map(|(y, u)| u * (1.0 - y * y))
            .collect();
        Ok(vec![Some(Tensor::new(out.shape().to_vec(), g)?)])
    }
}

struct Add;

impl Op for Add {
    fn name(&self) -> &'static str {
        "add"
    }

    fn backward(&self, _inputs: &[&Tensor], _out: &Tensor, up: &Tensor) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(up.clone()), Some(up.clone())])
    }
}

struct Mul;

impl Op for Mul {
    fn name(&self) -> &'static str {
        "mul"
    }

    fn backward(&self, inputs: &[&Tensor], _out: &Tensor, up: &Tensor) -> Result<Vec<Option<Tensor>>> {
        let (a, b) = (inputs[0], inputs[1]);
        let ga = b.values().iter().zip(up.values()).map(|(x, u)| x * u).collect();
        let gb = a.values().iter().zip(up.values()).map(|(x, u)| x * u).collect();
        Ok(vec![
            Some(Tensor::new(a.shape().to_vec(), ga)?),
            Some(Tensor::new(b.shape().to_vec(), gb)?),
        ])
    }
}

struct SumAll;

impl Op for SumAll {
    fn name(&self) -> &'static str {
        "sum"
    }

    fn backward(&self, inputs: &[&Tensor], _out: &Tensor, up: &Tensor) -> Result<Vec<Option<Tensor>>> {
        let u = up.values()[0];
        Ok(vec![Some(inputs[0].map(|_| u))])
    }
}

struct Mae {
    target: Vec<f64>,
}

impl Op for Mae {
    fn name(&self) -> &'static str {
        "mae"
    }

    fn backward(&self, inputs: &[&Tensor], _out: &Tensor, up: &Tensor) -> Result<Vec<Option<Tensor>>> {
        let pred = inputs[0];
        let scale = up.values()[0] / self.target.len() as f64;
        let g = pred
            .values()
            .iter()
            .zip(&self.target)
            .map(|(p, t)| {
                let d = p - t;
                if d > 0.0 {
                    scale
                } else if d < 0.0 {
                    -scale
                } else {
                    0.0
                }
            })
            .collect();
        Ok(vec![Some(Tensor::new(pred.shape().to_vec(), g)?)])
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// Mean absolute error between the elements of `pred` and `target`.
pub fn mae(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::Empty("mae over an empty batch"));
    }
    if pred.len() != target.len() {
        return Err(Error::shape(
            "mae",
            format!("{} predictions vs {} targets", pred.len(), target.len()),
        ));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

impl Tape {
    /// `x[n, in] · weights[in, out] + bias[out]`.
    pub fn dense(&mut self, x: Var, weights: Var, bias: Var) -> Result<Var> {
        let (xt, wt, bt) = (self.value(x), self.value(weights), self.value(bias));
        let (n, k) = xt.dims2("dense")?;
        let (wk, m) = wt.dims2("dense")?;
        if wk != k {
            return Err(Error::shape(
                "dense",
                format!("input axis 1 has size {} but weight axis 0 has size {}", k, wk),
            ));
        }
        if bt.shape() != [m] {
            return Err(Error::shape(
                "dense",
                format!("bias shape {:?} does not match weight axis 1 of size {}", bt.shape(), m),
            ));
        }
        let mut out = matmul(xt.values(), wt.values(), n, k, m);
        for row in out.chunks_exact_mut(m) {
            for (o, b) in row.iter_mut().zip(bt.values()) {
                *o += b;
            }
        }
        let value = Tensor::new(vec![n, m], out)?;
        self.push(Box::new(Dense), &[x, weights, bias], value)
    }

    /// Gathers rows of `table[vocab, dim]`.
    pub fn embedding(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let t = self.value(table);
        let (vocab, dim) = t.dims2("embedding")?;
        let mut out = Vec::with_capacity(indices.len() * dim);
        for &index in indices {
            if index >= vocab {
                return Err(Error::Lookup { index, vocab });
            }
            out.extend_from_slice(t.row(index));
        }
        let value = Tensor::new(vec![indices.len(), dim], out)?;
        self.push(
            Box::new(Embedding {
                indices: indices.to_vec(),
            }),
            &[table],
            value,
        )
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(sigmoid_scalar);
        self.push(Box::new(Sigmoid), &[x], value)
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(f64::tanh);
        self.push(Box::new(Tanh), &[x], value)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (at, bt) = (self.value(a), self.value(b));
        same_shape("add", at, bt)?;
        let v = at.values().iter().zip(bt.values()).map(|(x, y)| x + y).collect();
        let value = Tensor::new(at.shape().to_vec(), v)?;
        self.push(Box::new(Add), &[a, b], value)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (at, bt) = (self.value(a), self.value(b));
        same_shape("mul", at, bt)?;
        let v = at.values().iter().zip(bt.values()).map(|(x, y)| x * y).collect();
        let value = Tensor::new(at.shape().to_vec(), v)?;
        self.push(Box::new(Mul), &[a, b], value)
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).values().iter().sum();
        self.push(Box::new(SumAll), &[x], Tensor::scalar(s))
    }

    /// Mean absolute error of `pred` (any shape with `target.len()` elements).
    /// The subgradient at `pred == target` is 0.
    pub fn mae_loss(&mut self, pred: Var, target: &[f64]) -> Result<Var> {
        let loss = mae(self.value(pred).values(), target)?;
        self.push(
            Box::new(Mae {
                target: target.to_vec(),
            }),
            &[pred],
            Tensor::scalar(loss),
        )
    }
}
