use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::moments::{central, Central};
use crate::error::{Error, Result};
use crate::ndcore::{Op, Segments, SetBatch, Tape, Tensor, Var};

/// One fixed reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregator {
    Max,
    Sum,
    Mean,
    Std,
    Var,
    Skewness,
    Kurtosis,
}

/// Non-learnable pooling layers used as comparison models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixedPoolKind {
    /// max×3, sum×3, mean×3
    Deepsets9,
    /// mean, max, sum, std, var, skewness, kurtosis
    Pna7,
}

const DEEPSETS9: [Aggregator; 9] = [
    Aggregator::Max,
    Aggregator::Max,
    Aggregator::Max,
    Aggregator::Sum,
    Aggregator::Sum,
    Aggregator::Sum,
    Aggregator::Mean,
    Aggregator::Mean,
    Aggregator::Mean,
];

const PNA7: [Aggregator; 7] = [
    Aggregator::Mean,
    Aggregator::Max,
    Aggregator::Sum,
    Aggregator::Std,
    Aggregator::Var,
    Aggregator::Skewness,
    Aggregator::Kurtosis,
];

impl FixedPoolKind {
    pub fn units(self) -> &'static [Aggregator] {
        match self {
            FixedPoolKind::Deepsets9 => &DEEPSETS9,
            FixedPoolKind::Pna7 => &PNA7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FixedPoolKind::Deepsets9 => "deepsets9",
            FixedPoolKind::Pna7 => "pna7",
        }
    }
}

impl fmt::Display for FixedPoolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FixedPoolKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "deepsets9" => Ok(FixedPoolKind::Deepsets9),
            "pna7" => Ok(FixedPoolKind::Pna7),
            _ => Err(format!("unknown pool `{}` (valid: deepsets9, pna7)", s)),
        }
    }
}

/// Everything one column needs for both passes.
struct ColumnStats {
    c: Central,
    sum: f64,
    max: f64,
    /// Row (within the set) of the first maximal element.
    argmax: usize,
}

fn column_stats(values: &[f64]) -> ColumnStats {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sum = sorted.iter().sum();
    let mut argmax = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[argmax] {
            argmax = i;
        }
    }
    ColumnStats {
        c: central(&sorted),
        sum,
        max: values[argmax],
        argmax,
    }
}

fn aggregate(a: Aggregator, s: &ColumnStats) -> f64 {
    let c = &s.c;
    match a {
        Aggregator::Max => s.max,
        Aggregator::Sum => s.sum,
        Aggregator::Mean => c.mean,
        Aggregator::Std => c.m2.sqrt(),
        Aggregator::Var => c.m2,
        Aggregator::Skewness if c.degenerate => 0.0,
        Aggregator::Skewness => c.m3 / c.m2.powf(1.5),
        Aggregator::Kurtosis if c.degenerate => 0.0,
        Aggregator::Kurtosis => c.m4 / (c.m2 * c.m2),
    }
}

/// `∂agg/∂xᵢ` for every element of the column, scaled by `up`, added to `out`.
fn aggregate_grad(a: Aggregator, s: &ColumnStats, xs: &[f64], up: f64, mut out: impl FnMut(usize, f64)) {
    let c = &s.c;
    let n = c.n;
    match a {
        Aggregator::Max => out(s.argmax, up),
        Aggregator::Sum => (0..xs.len()).for_each(|i| out(i, up)),
        Aggregator::Mean => (0..xs.len()).for_each(|i| out(i, up / n)),
        _ if c.degenerate => {}
        Aggregator::Var => {
            for (i, &x) in xs.iter().enumerate() {
                out(i, up * 2.0 * (x - c.mean) / n);
            }
        }
        Aggregator::Std => {
            let sd = c.m2.sqrt();
            for (i, &x) in xs.iter().enumerate() {
                out(i, up * (x - c.mean) / (n * sd));
            }
        }
        Aggregator::Skewness => {
            // skew = m3·m2^(-3/2)
            let m2_32 = c.m2.powf(1.5);
            for (i, &x) in xs.iter().enumerate() {
                let d = x - c.mean;
                let dm2 = 2.0 * d / n;
                let dm3 = 3.0 * (d * d - c.m2) / n;
                out(i, up * (dm3 / m2_32 - 1.5 * c.m3 / (m2_32 * c.m2) * dm2));
            }
        }
        Aggregator::Kurtosis => {
            // kurt = m4·m2^(-2)
            let m2sq = c.m2 * c.m2;
            for (i, &x) in xs.iter().enumerate() {
                let d = x - c.mean;
                let dm2 = 2.0 * d / n;
                let dm4 = 4.0 * (d * d * d - c.m3) / n;
                out(i, up * (dm4 / m2sq - 2.0 * c.m4 / (m2sq * c.m2) * dm2));
            }
        }
    }
}

fn gather(x: &Tensor, d: usize, range: std::ops::Range<usize>, j: usize) -> Vec<f64> {
    range.map(|i| x.values()[i * d + j]).collect()
}

fn forward(x: &Tensor, segments: &Segments, kind: FixedPoolKind) -> Result<Tensor> {
    let (rows, d) = x.dims2("fixed pool")?;
    if rows != segments.num_elements() {
        return Err(Error::shape(
            "fixed pool",
            format!("{} element rows but segments cover {}", rows, segments.num_elements()),
        ));
    }
    segments.require_nonempty()?;
    let units = kind.units();
    let u = units.len();
    let mut out = vec![0.0; segments.num_sets() * u * d];
    for (s, range) in segments.ranges().enumerate() {
        for j in 0..d {
            let st = column_stats(&gather(x, d, range.clone(), j));
            for (k, &a) in units.iter().enumerate() {
                out[s * u * d + k * d + j] = aggregate(a, &st);
            }
        }
    }
    Tensor::new(vec![segments.num_sets(), u * d], out)
}

/// Applies the pool element-wise per dimension: output `[num_sets, u·d]`,
/// unit-major like the LAF layer.
pub fn fixed_pool_forward(batch: &SetBatch, kind: FixedPoolKind) -> Result<Tensor> {
    forward(batch.elements(), batch.segments(), kind)
}

struct FixedPoolOp {
    kind: FixedPoolKind,
    segments: Segments,
}

impl Op for FixedPoolOp {
    fn name(&self) -> &'static str {
        "fixed pool"
    }

    fn backward(&self, inputs: &[&Tensor], _out: &Tensor, up: &Tensor) -> Result<Vec<Option<Tensor>>> {
        let x = inputs[0];
        let (_, d) = x.dims2("fixed pool")?;
        let units = self.kind.units();
        let u = units.len();
        let mut g = Tensor::zeros(x.shape());
        for (s, range) in self.segments.ranges().enumerate() {
            for j in 0..d {
                let xs = gather(x, d, range.clone(), j);
                let st = column_stats(&xs);
                for (k, &a) in units.iter().enumerate() {
                    let upv = up.values()[s * u * d + k * d + j];
                    if upv == 0.0 {
                        continue;
                    }
                    let gv = g.values_mut();
                    let start = range.start;
                    aggregate_grad(a, &st, &xs, upv, |i, v| gv[(start + i) * d + j] += v);
                }
            }
        }
        Ok(vec![Some(g)])
    }
}

impl Tape {
    /// Records a fixed pool over `x[total, d]`; output `[num_sets, u·d]`.
    pub fn fixed_pool(&mut self, x: Var, segments: &Segments, kind: FixedPoolKind) -> Result<Var> {
        let value = forward(self.value(x), segments, kind)?;
        self.push(
            Box::new(FixedPoolOp {
                kind,
                segments: segments.clone(),
            }),
            &[x],
            value,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn deepsets9_example() {
        let b = SetBatch::from_scalar_sets(&[vec![0.2, 0.4]]);
        let out = fixed_pool_forward(&b, FixedPoolKind::Deepsets9).unwrap();
        assert!(close(
            out.values(),
            &[0.4, 0.4, 0.4, 0.6, 0.6, 0.6, 0.3, 0.3, 0.3],
            1e-15
        ));
    }

    #[test]
    fn pna7_examples() {
        let b = SetBatch::from_scalar_sets(&[vec![0.2, 0.4], vec![0.5]]);
        let out = fixed_pool_forward(&b, FixedPoolKind::Pna7).unwrap();
        assert!(close(out.row(0), &[0.3, 0.4, 0.6, 0.1, 0.01, 0.0, 1.0], 1e-9));
        assert_eq!(out.row(1), &[0.5, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_set_reports_index() {
        let b = SetBatch::from_scalar_sets(&[vec![0.2], vec![]]);
        assert!(matches!(
            fixed_pool_forward(&b, FixedPoolKind::Pna7),
            Err(Error::EmptySet { index: 1 })
        ));
    }

    #[test]
    fn max_gradient_goes_to_first_tie() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![3, 1], vec![0.9, 0.1, 0.9]).unwrap());
        let segs = Segments::from_lengths([3]);
        let y = tape.fixed_pool(x, &segs, FixedPoolKind::Deepsets9).unwrap();
        // pick the first max unit only
        let mask = tape.constant(Tensor::new(vec![1, 9], {
            let mut m = vec![0.0; 9];
            m[0] = 1.0;
            m
        }).unwrap());
        let z = tape.mul(y, mask).unwrap();
        let s = tape.sum(z).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().values(), &[1.0, 0.0, 0.0]);
    }
}
