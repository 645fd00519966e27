use std::collections::BTreeMap;

use crate::datasets::{gen_scalar_test, target_value, ScalarSetSample, TargetKind};
use crate::error::Result;
use crate::harness::{predict_all, Example, SetModel};
use crate::ndcore::mae;

/// Anything that maps a slice of sets to one prediction per set.
pub trait Predictor<E> {
    fn predict(&self, data: &[E]) -> Result<Vec<f64>>;
}

impl<E: Example> Predictor<E> for SetModel {
    fn predict(&self, data: &[E]) -> Result<Vec<f64>> {
        predict_all(self, data)
    }
}

/// Evaluates the target function itself.
#[derive(Debug, Clone, Copy)]
pub struct OraclePredictor(pub TargetKind);

impl Predictor<ScalarSetSample> for OraclePredictor {
    fn predict(&self, data: &[ScalarSetSample]) -> Result<Vec<f64>> {
        data.iter().map(|s| target_value(self.0, &s.elements)).collect()
    }
}

/// Predicts the same value for every set.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPredictor(pub f64);

impl<E> Predictor<E> for ConstantPredictor {
    fn predict(&self, data: &[E]) -> Result<Vec<f64>> {
        Ok(vec![self.0; data.len()])
    }
}

/// Median of the labels, the MAE-optimal constant.
pub fn best_constant(labels: &[f64]) -> f64 {
    let mut v = labels.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// MAE of the best constant predictor: mean absolute deviation from the median.
pub fn best_constant_mae(labels: &[f64]) -> Result<f64> {
    let c = best_constant(labels);
    mae(&vec![c; labels.len()], labels)
}

/// Scores `predictor` on label-diversified test sets for every `M` in
/// `sweep`. `make` turns the generated digit sets into the predictor's
/// input type (identity for scalar models).
pub fn evaluate_sweep_with<E, P, F>(
    predictor: &P,
    target: TargetKind,
    sweep: &[usize],
    per_m: usize,
    seed: u64,
    mut make: F,
) -> Result<BTreeMap<usize, f64>>
where
    E: Example,
    P: Predictor<E> + ?Sized,
    F: FnMut(Vec<ScalarSetSample>, usize) -> Result<Vec<E>>,
{
    let mut out = BTreeMap::new();
    for &m in sweep {
        let test = gen_scalar_test(target, per_m, m, seed)?;
        let data = make(test.samples, m)?;
        let pred = predictor.predict(&data)?;
        let labels: Vec<f64> = data.iter().map(Example::label).collect();
        out.insert(m, mae(&pred, &labels)?);
    }
    Ok(out)
}

pub fn evaluate_sweep<P>(
    predictor: &P,
    target: TargetKind,
    sweep: &[usize],
    per_m: usize,
    seed: u64,
) -> Result<BTreeMap<usize, f64>>
where
    P: Predictor<ScalarSetSample> + ?Sized,
{
    evaluate_sweep_with(predictor, target, sweep, per_m, seed, |s, _| Ok(s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_is_exact() {
        let r = evaluate_sweep(&OraclePredictor(TargetKind::Median), TargetKind::Median, &[5, 20], 300, 1).unwrap();
        assert_eq!(r.keys().copied().collect::<Vec<_>>(), vec![5, 20]);
        assert!(r.values().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_matches_direct_computation() {
        let target = TargetKind::Sum;
        let test = gen_scalar_test(target, 400, 10, 3).unwrap();
        let labels: Vec<f64> = test.samples.iter().map(|s| s.label).collect();
        let c = best_constant(&labels);
        let direct = labels.iter().map(|y| (y - c).abs()).sum::<f64>() / labels.len() as f64;
        let r = evaluate_sweep(&ConstantPredictor(c), target, &[10], 400, 3).unwrap();
        assert!((r[&10] - direct).abs() < 1e-12);
        assert!((best_constant_mae(&labels).unwrap() - direct).abs() < 1e-12);
        // Any other constant does no better.
        for d in [c - 1.0, c + 0.5] {
            assert!(mae(&vec![d; labels.len()], &labels).unwrap() >= direct - 1e-12);
        }
    }
}
