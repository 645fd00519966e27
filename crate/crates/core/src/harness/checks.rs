//! Self-check suites shared by the `preset-check` and `grad-check` commands
//! and the acceptance tests.

use std::cell::RefCell;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::FixedPoolKind;
use crate::datasets::{gen_scalar_train, ScalarSetSample, TargetKind};
use crate::error::Result;
use crate::harness::{build_scalar_model, Example, ModelKind, SetModel, LAF_BLOCK};
use crate::laf::{l_ab, laf_backward, laf_forward, preset_params, units_from_tensor, LafParams, Preset};
use crate::ndcore::{
    grad_check, grad_check_graph, grad_check_refined, mae, sigmoid_scalar, GradCheckReport, Segments, Tape, Tensor,
};
use crate::seed::rng_for;

/// Absolute tolerance for exactly representable presets.
pub const PRESET_TOL: f64 = 1e-9;
/// Limit parameter used for the max/min style presets.
pub const PRESET_R: f64 = 40.0;
/// Relative-error thresholds for the gradient suites.
pub const UNIT_GRAD_TOL: f64 = 1e-5;
pub const END_TO_END_GRAD_TOL: f64 = 1e-4;
/// Finite-difference step.
pub const GRAD_H: f64 = 1e-6;
/// Starting step of the extrapolated re-estimate used by the end-to-end suite.
pub const RIDDERS_H: f64 = 1e-4;
/// Instances closer than this to a stabilized denominator or an MAE kink
/// are treated as degenerate and redrawn.
pub const MIN_DENOMINATOR: f64 = 1e-3;
pub const MIN_RESIDUAL: f64 = 1e-3;

/// Result of one check row.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: String,
    pub cases: usize,
    /// Largest deviation from the oracle (absolute for presets, relative for gradients).
    pub worst: f64,
    /// Human-readable acceptance rule.
    pub rule: String,
    pub passed: bool,
}

impl CheckRow {
    pub fn line(&self) -> String {
        format!(
            "{} {}: max_err {:.3e} over {} cases ({})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.cases,
            self.rule
        )
    }
}

fn random_set(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vec<f64> {
    let n = rng.random_range(2..=10);
    (0..n).map(|_| rng.random_range(lo..=hi)).collect()
}

fn naive_sum_pow(xs: &[f64], k: i32) -> f64 {
    let mut s = 0.0;
    for &x in xs {
        let mut p = 1.0;
        for _ in 0..k {
            p *= x;
        }
        s += p;
    }
    s
}

fn naive_max(xs: &[f64]) -> f64 {
    let mut m = xs[0];
    for &x in xs {
        if x > m {
            m = x;
        }
    }
    m
}

fn naive_min(xs: &[f64]) -> f64 {
    let mut m = xs[0];
    for &x in xs {
        if x < m {
            m = x;
        }
    }
    m
}

/// Which preset row to perturb, to prove the suite can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sabotage {
    None,
    Mean,
}

enum Oracle {
    /// Value must match within [`PRESET_TOL`].
    Exact(f64),
    /// Value must lie in `[lo, hi]`; deviation is measured from `target`.
    Interval { target: f64, lo: f64, hi: f64 },
}

struct Row {
    name: &'static str,
    /// Domain the random sets are drawn from.
    lo: f64,
    hi: f64,
    make: fn(&mut ChaCha8Rng, &[f64]) -> Result<(LafParams, Oracle)>,
}

fn rows() -> Vec<Row> {
    vec![
        Row {
            name: "constant",
            lo: 0.01,
            hi: 0.99,
            make: |rng, _| {
                let k = rng.random_range(-2.0..2.0);
                Ok((preset_params(Preset::Constant(k))?, Oracle::Exact(k)))
            },
        },
        Row {
            name: "max",
            lo: 0.01,
            hi: 0.99,
            make: |_, xs| {
                let m = naive_max(xs);
                let slack = m * ((xs.len() as f64).powf(1.0 / PRESET_R) - 1.0);
                Ok((
                    preset_params(Preset::Max(PRESET_R))?,
                    Oracle::Interval {
                        target: m,
                        lo: m,
                        hi: m + slack,
                    },
                ))
            },
        },
        Row {
            name: "min",
            lo: 0.01,
            hi: 0.99,
            make: |_, xs| {
                let m = naive_min(xs);
                let slack = (1.0 - m) * ((xs.len() as f64).powf(1.0 / PRESET_R) - 1.0);
                Ok((
                    preset_params(Preset::Min(PRESET_R))?,
                    Oracle::Interval {
                        target: m,
                        lo: m - slack,
                        hi: m,
                    },
                ))
            },
        },
        Row {
            name: "sum",
            lo: 0.01,
            hi: 0.99,
            make: |_, xs| Ok((preset_params(Preset::Sum)?, Oracle::Exact(naive_sum_pow(xs, 1)))),
        },
        Row {
            name: "nonzero-count",
            lo: 0.01,
            hi: 0.99,
            make: |_, xs| {
                let mut n = 0.0;
                for &x in xs {
                    if x != 0.0 {
                        n += 1.0;
                    }
                }
                Ok((preset_params(Preset::NonzeroCount)?, Oracle::Exact(n)))
            },
        },
        Row {
            name: "mean",
            lo: 0.01,
            hi: 0.99,
            make: |_, xs| {
                Ok((
                    preset_params(Preset::Mean)?,
                    Oracle::Exact(naive_sum_pow(xs, 1) / xs.len() as f64),
                ))
            },
        },
        Row {
            name: "kth-moment",
            lo: 0.01,
            hi: 0.99,
            make: |rng, xs| {
                let k = rng.random_range(1..=4);
                Ok((
                    preset_params(Preset::Moment(f64::from(k)))?,
                    Oracle::Exact(naive_sum_pow(xs, k) / xs.len() as f64),
                ))
            },
        },
        Row {
            name: "lth-power-of-kth-moment",
            lo: 0.01,
            hi: 0.99,
            make: |rng, xs| {
                let (l, k) = (rng.random_range(1..=3), rng.random_range(1..=2));
                let m = naive_sum_pow(xs, k) / xs.len() as f64;
                let mut v = 1.0;
                for _ in 0..l {
                    v *= m;
                }
                Ok((
                    preset_params(Preset::PowerOfMoment {
                        l: f64::from(l),
                        k: f64::from(k),
                    })?,
                    Oracle::Exact(v),
                ))
            },
        },
        // The ratio rows use [0.5, 0.99] so that the bound on the min-type
        // factor stays positive and the interval is informative.
        Row {
            name: "min/max",
            lo: 0.5,
            hi: 0.99,
            make: |_, xs| {
                let (mn, mx) = (naive_min(xs), naive_max(xs));
                let g = (xs.len() as f64).powf(1.0 / PRESET_R);
                let num_lo = mn - (1.0 - mn) * (g - 1.0);
                Ok((
                    preset_params(Preset::MinOverMax { r: PRESET_R, s: PRESET_R })?,
                    Oracle::Interval {
                        target: mn / mx,
                        lo: num_lo / (mx * g),
                        hi: mn / mx,
                    },
                ))
            },
        },
        Row {
            name: "max/min",
            lo: 0.5,
            hi: 0.99,
            make: |_, xs| {
                let (mn, mx) = (naive_min(xs), naive_max(xs));
                let g = (xs.len() as f64).powf(1.0 / PRESET_R);
                let den_lo = mn - (1.0 - mn) * (g - 1.0);
                Ok((
                    preset_params(Preset::MaxOverMin { r: PRESET_R, s: PRESET_R })?,
                    Oracle::Interval {
                        target: mx / mn,
                        lo: mx / mn,
                        hi: mx * g / den_lo,
                    },
                ))
            },
        },
    ]
}

/// Compares every preset row against an independent brute-force
/// aggregator on `cases` random sets of 2–10 values.
pub fn preset_suite(cases: usize, seed: u64, sabotage: Sabotage) -> Result<Vec<CheckRow>> {
    let mut out = Vec::new();
    for (i, row) in rows().into_iter().enumerate() {
        let mut rng = rng_for(seed, "preset-suite", i as u64);
        let mut worst: f64 = 0.0;
        let mut passed = true;
        for _ in 0..cases {
            let xs = random_set(&mut rng, row.lo, row.hi);
            let (mut p, oracle) = (row.make)(&mut rng, &xs)?;
            if sabotage == Sabotage::Mean && row.name == "mean" {
                p.alpha += 1e-3;
            }
            let v = laf_forward(&xs, &p)?;
            match oracle {
                Oracle::Exact(t) => {
                    let e = (v - t).abs();
                    worst = worst.max(e);
                    passed &= e < PRESET_TOL;
                }
                Oracle::Interval { target, lo, hi } => {
                    worst = worst.max((v - target).abs());
                    passed &= v >= lo - PRESET_TOL && v <= hi + PRESET_TOL;
                }
            }
        }
        let rule = if matches!(row.name, "max" | "min" | "min/max" | "max/min") {
            format!("within the r={} limit bound", PRESET_R)
        } else {
            format!("max_abs_err < {:e}", PRESET_TOL)
        };
        out.push(CheckRow {
            name: row.name.to_string(),
            cases,
            worst,
            rule,
            passed,
        });
    }
    Ok(out)
}

/// The max and min presets get monotonically closer to the true extreme as
/// `r` grows.
pub fn limit_monotonicity_suite(cases: usize, seed: u64) -> Result<Vec<CheckRow>> {
    const RS: [f64; 7] = [1.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0];
    let mut out = Vec::new();
    for (i, name) in ["max", "min"].into_iter().enumerate() {
        let mut rng = rng_for(seed, "monotonicity", i as u64);
        let mut passed = true;
        let mut worst: f64 = 0.0;
        for _ in 0..cases {
            let xs = random_set(&mut rng, 0.01, 0.99);
            let mut prev = f64::INFINITY;
            for r in RS {
                let (p, t) = if i == 0 {
                    (preset_params(Preset::Max(r))?, naive_max(&xs))
                } else {
                    (preset_params(Preset::Min(r))?, naive_min(&xs))
                };
                let err = (laf_forward(&xs, &p)? - t).abs();
                if err > prev + 1e-12 {
                    passed = false;
                    worst = worst.max(err - prev);
                }
                prev = err;
            }
        }
        out.push(CheckRow {
            name: format!("{name} error nonincreasing in r"),
            cases,
            worst,
            rule: format!("r in {:?}", RS),
            passed,
        });
    }
    Ok(out)
}

/// `moment(2) − power(l=2, k=1)` against the population variance.
pub fn variance_composition(cases: usize, seed: u64) -> Result<CheckRow> {
    let mut rng = rng_for(seed, "variance", 0);
    let m2 = preset_params(Preset::Moment(2.0))?;
    let sq = preset_params(Preset::PowerOfMoment { l: 2.0, k: 1.0 })?;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let xs = random_set(&mut rng, 0.0, 1.0);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let v = laf_forward(&xs, &m2)? - laf_forward(&xs, &sq)?;
        worst = worst.max((v - var).abs());
    }
    Ok(CheckRow {
        name: "variance = moment(2) - mean^2".into(),
        cases,
        worst,
        rule: format!("max_abs_err < {:e}", PRESET_TOL),
        passed: worst < PRESET_TOL,
    })
}

fn grad_row(name: &str, cases: usize, worst: f64, tol: f64, rejected: usize) -> CheckRow {
    CheckRow {
        name: name.to_string(),
        cases,
        worst,
        rule: format!("rel_err < {:e}, h = {:e}, {} degenerate draws redrawn", tol, GRAD_H, rejected),
        passed: worst < tol,
    }
}

fn denominator(xs: &[f64], p: &LafParams) -> Result<f64> {
    let comp: Vec<f64> = xs.iter().map(|x| 1.0 - x).collect();
    Ok(p.gamma * l_ab(xs, p.e, p.f)? + p.delta * l_ab(&comp, p.g, p.h)?)
}

/// One unit: gradients w.r.t. the elements and all twelve parameters.
pub fn laf_unit_grad_suite(cases: usize, seed: u64) -> Result<CheckRow> {
    let mut rng = rng_for(seed, "grad-unit", 0);
    let mut worst: f64 = 0.0;
    let mut rejected = 0;
    let mut done = 0;
    while done < cases {
        let n = rng.random_range(2..=8);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.95)).collect();
        let mut arr = [0.0; 12];
        for v in &mut arr[..8] {
            *v = rng.random_range(0.2..2.0);
        }
        for v in &mut arr[8..] {
            let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
            *v = s * rng.random_range(0.5..1.5);
        }
        let p = LafParams::from_array(arr);
        if denominator(&xs, &p)?.abs() < 0.1 {
            rejected += 1;
            continue;
        }
        let mut point = xs.clone();
        point.extend_from_slice(&arr);
        let report = grad_check(
            |t| {
                let v = t.values();
                let (xs, p) = (&v[..n], LafParams::from_slice(&v[n..]));
                let g = laf_backward(xs, &p, 1.0)?;
                let mut grad = g.xs.clone();
                grad.extend_from_slice(&g.params.to_array());
                Ok((laf_forward(xs, &p)?, Tensor::vector(grad)))
            },
            &Tensor::vector(point),
            GRAD_H,
        )?;
        worst = worst.max(report.max_rel_error);
        done += 1;
    }
    Ok(grad_row("laf unit", cases, worst, UNIT_GRAD_TOL, rejected))
}

/// A fixed pool on two small sets of 2-d vectors, contracted with random weights.
pub fn fixed_pool_grad_suite(kind: FixedPoolKind, cases: usize, seed: u64) -> Result<CheckRow> {
    let mut rng = rng_for(seed, "grad-pool", kind as u64);
    let d = 2;
    let mut worst: f64 = 0.0;
    let mut rejected = 0;
    let mut done = 0;
    while done < cases {
        let lengths = [rng.random_range(3..=6), rng.random_range(3..=6)];
        let segments = Segments::from_lengths(lengths);
        let total = segments.num_elements();
        let x: Vec<f64> = (0..total * d).map(|_| rng.random_range(0.0..1.0)).collect();
        // Near-ties make max non-differentiable within the probe step.
        let degenerate = segments.ranges().any(|r| {
            (0..d).any(|j| {
                let mut col: Vec<f64> = r.clone().map(|i| x[i * d + j]).collect();
                col.sort_by(f64::total_cmp);
                col.windows(2).any(|w| w[1] - w[0] < 1e-3)
            })
        });
        if degenerate {
            rejected += 1;
            continue;
        }
        let u = kind.units().len();
        let w: Vec<f64> = (0..2 * u * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w = Tensor::new(vec![2, u * d], w)?;
        let report = grad_check_graph(
            |tape, xv| {
                let pooled = tape.fixed_pool(xv, &segments, kind)?;
                let wv = tape.constant(w.clone());
                let prod = tape.mul(pooled, wv)?;
                tape.sum(prod)
            },
            &Tensor::new(vec![total, d], x)?,
            GRAD_H,
        )?;
        worst = worst.max(report.max_rel_error);
        done += 1;
    }
    Ok(grad_row(&format!("{kind} pool"), cases, worst, UNIT_GRAD_TOL, rejected))
}

fn flatten(model: &SetModel) -> Result<(Vec<String>, Tensor)> {
    let names: Vec<String> = model.params.names().map(str::to_string).collect();
    let mut v = Vec::new();
    for n in &names {
        v.extend_from_slice(model.params.value(n)?.values());
    }
    Ok((names, Tensor::vector(v)))
}

fn unflatten(model: &mut SetModel, names: &[String], flat: &[f64]) -> Result<()> {
    let mut at = 0;
    for n in names {
        let block = model.params.value_mut(n)?;
        let len = block.len();
        block.values_mut().copy_from_slice(&flat[at..at + len]);
        at += len;
    }
    Ok(())
}

fn grads_flat(model: &SetModel, names: &[String]) -> Result<Vec<f64>> {
    let mut v = Vec::new();
    for n in names {
        v.extend_from_slice(model.params.grad(n)?.values());
    }
    Ok(v)
}

/// Smallest |denominator| over every unit, coordinate and set of the batch.
fn min_model_denominator(model: &SetModel, batch: &[&ScalarSetSample]) -> Result<f64> {
    let table = model.params.value("embedding")?;
    let units = units_from_tensor(model.params.value(LAF_BLOCK)?)?;
    let dim = table.shape()[1];
    let mut min = f64::INFINITY;
    for s in batch {
        for j in 0..dim {
            let col: Vec<f64> = s
                .elements
                .iter()
                .map(|&e| sigmoid_scalar(table.row(e as usize)[j]))
                .collect();
            for u in &units {
                min = min.min(denominator(&col, u)?.abs());
            }
        }
    }
    Ok(min)
}

/// Batch MAE of the full scalar LAF model w.r.t. every parameter block.
pub fn end_to_end_grad_suite(cases: usize, seed: u64) -> Result<CheckRow> {
    const TARGETS: [TargetKind; 4] = [TargetKind::Count, TargetKind::Sum, TargetKind::Mean, TargetKind::Max];
    let mut rng = rng_for(seed, "grad-e2e", 0);
    let mut worst: f64 = 0.0;
    let mut rejected = 0;
    let mut done = 0;
    while done < cases {
        let draw = rng.random::<u64>();
        let target = TARGETS[(draw % 4) as usize];
        let mut model = build_scalar_model(ModelKind::laf(), &mut rng_for(draw, "init", 0));
        let data = gen_scalar_train(target, 4, 10, draw)?;
        let batch: Vec<&ScalarSetSample> = data.iter().collect();
        let labels: Vec<f64> = data.iter().map(|s| s.label).collect();
        let input = ScalarSetSample::to_input(&batch)?;
        let pred = model.predict(&input)?;
        let near_kink = pred.iter().zip(&labels).any(|(p, y)| (p - y).abs() < MIN_RESIDUAL);
        if near_kink || min_model_denominator(&model, &batch)? < MIN_DENOMINATOR {
            rejected += 1;
            continue;
        }
        let (names, point) = flatten(&model)?;
        let analytic = {
            model.params.zero_grad();
            let mut tape = Tape::new();
            let out = model.forward(&mut tape, &input)?;
            let loss = tape.mae_loss(out, &labels)?;
            tape.backward(loss)?.accumulate_into(&mut model.params)?;
            Tensor::vector(grads_flat(&model, &names)?)
        };
        let cell = RefCell::new(model);
        let report: GradCheckReport = grad_check_refined(
            |t| {
                let mut m = cell.borrow_mut();
                unflatten(&mut m, &names, t.values())?;
                mae(&m.predict(&input)?, &labels)
            },
            &analytic,
            &point,
            GRAD_H,
            RIDDERS_H,
            END_TO_END_GRAD_TOL,
        )?;
        worst = worst.max(report.max_rel_error);
        done += 1;
    }
    Ok(grad_row("end-to-end scalar LAF model", cases, worst, END_TO_END_GRAD_TOL, rejected))
}

/// All gradient suites in reporting order.
pub fn grad_suites(cases: usize, seed: u64) -> Result<Vec<CheckRow>> {
    Ok(vec![
        laf_unit_grad_suite(cases, seed)?,
        fixed_pool_grad_suite(FixedPoolKind::Deepsets9, cases, seed)?,
        fixed_pool_grad_suite(FixedPoolKind::Pna7, cases, seed)?,
        end_to_end_grad_suite(cases, seed)?,
    ])
}
