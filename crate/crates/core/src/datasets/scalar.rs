use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::datasets::{target_value, TargetKind};
use crate::error::{Error, Result};
use crate::io_util::write_atomic;
use crate::seed::rng_for;

/// Smallest set size in every generated split.
pub const MIN_CARD: usize = 2;
/// Number of equal-width label bins used to diversify test labels.
pub const LABEL_BINS: usize = 20;
/// Rejection attempts per test sample before settling for the nearest draw.
pub const MAX_ATTEMPTS: usize = 1000;

/// A multiset of digits with its target label.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSetSample {
    pub elements: Vec<u8>,
    pub label: f64,
}

impl ScalarSetSample {
    pub fn new(kind: TargetKind, elements: Vec<u8>) -> Result<Self> {
        let label = target_value(kind, &elements)?;
        Ok(ScalarSetSample { elements, label })
    }
}

fn check_card(m: usize) -> Result<()> {
    if m < MIN_CARD {
        return Err(Error::Config(format!("maximum cardinality must be >= {}, got {}", MIN_CARD, m)));
    }
    Ok(())
}

fn draw<R: Rng>(rng: &mut R, kind: TargetKind, m: usize) -> ScalarSetSample {
    let k = rng.random_range(MIN_CARD..=m);
    let elements: Vec<u8> = (0..k).map(|_| rng.random_range(0..10u8)).collect();
    ScalarSetSample::new(kind, elements).expect("nonempty by construction")
}

/// Training/validation sets: cardinality uniform on `{2..=m}`, digits
/// uniform on `{0..9}`.
pub fn gen_scalar_train(kind: TargetKind, n: usize, m: usize, seed: u64) -> Result<Vec<ScalarSetSample>> {
    check_card(m)?;
    let mut rng = rng_for(seed, "scalar-train", m as u64);
    Ok((0..n).map(|_| draw(&mut rng, kind, m)).collect())
}

/// Output of [`gen_scalar_test`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarTestSet {
    pub samples: Vec<ScalarSetSample>,
    /// False when the pilot labels were constant and no stratification was possible.
    pub stratified: bool,
}

/// Test sets with diversified labels.
///
/// A pilot of `10·n` plain draws fixes the label range, which is cut into
/// [`LABEL_BINS`] equal-width bins. Each sample picks a nonempty bin
/// uniformly and rejection-samples into it; after [`MAX_ATTEMPTS`] misses
/// the draw closest to the bin is kept.
pub fn gen_scalar_test(kind: TargetKind, n: usize, m: usize, seed: u64) -> Result<ScalarTestSet> {
    check_card(m)?;
    let mut rng = rng_for(seed, "scalar-test", m as u64);
    let pilot: Vec<f64> = (0..10 * n.max(1)).map(|_| draw(&mut rng, kind, m).label).collect();
    let lo = pilot.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = pilot.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        let samples = (0..n).map(|_| draw(&mut rng, kind, m)).collect();
        return Ok(ScalarTestSet {
            samples,
            stratified: false,
        });
    }
    let width = (hi - lo) / LABEL_BINS as f64;
    let bin_of = |y: f64| (((y - lo) / width).max(0.0) as usize).min(LABEL_BINS - 1);
    let mut occupied = [false; LABEL_BINS];
    for &y in &pilot {
        occupied[bin_of(y)] = true;
    }
    let bins: Vec<usize> = (0..LABEL_BINS).filter(|&b| occupied[b]).collect();

    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let bin = bins[rng.random_range(0..bins.len())];
        let (b_lo, b_hi) = (lo + bin as f64 * width, lo + (bin + 1) as f64 * width);
        let mut nearest: Option<(f64, ScalarSetSample)> = None;
        let mut accepted = None;
        for _ in 0..MAX_ATTEMPTS {
            let s = draw(&mut rng, kind, m);
            if bin_of(s.label) == bin {
                accepted = Some(s);
                break;
            }
            let dist = if s.label < b_lo { b_lo - s.label } else { s.label - b_hi };
            if nearest.as_ref().is_none_or(|(d, _)| dist < *d) {
                nearest = Some((dist, s));
            }
        }
        samples.push(accepted.unwrap_or_else(|| nearest.expect("at least one attempt").1));
    }
    Ok(ScalarTestSet {
        samples,
        stratified: true,
    })
}

/// A multiset of reals in `[0, 1]` with its target label.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSetSample {
    pub values: Vec<f64>,
    pub label: f64,
}

/// Sets of `{2..=m}` reals drawn uniformly from `[0, 1]`.
pub fn gen_real_sets(kind: TargetKind, n: usize, m: usize, seed: u64) -> Result<Vec<RealSetSample>> {
    check_card(m)?;
    let mut rng = rng_for(seed, "real-sets", m as u64);
    (0..n)
        .map(|_| {
            let k = rng.random_range(MIN_CARD..=m);
            let values: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
            let label = target_value(kind, &values)?;
            Ok(RealSetSample { values, label })
        })
        .collect()
}

/// Writes one line `K,x_1,…,x_K,label` per sample.
pub fn write_records(path: &Path, samples: &[ScalarSetSample]) -> Result<()> {
    let mut buf = Vec::new();
    for s in samples {
        write!(buf, "{}", s.elements.len()).expect("in-memory write");
        for e in &s.elements {
            write!(buf, ",{}", e).expect("in-memory write");
        }
        writeln!(buf, ",{}", s.label).expect("in-memory write");
    }
    write_atomic(path, &buf)
}

pub fn read_records(path: &Path) -> Result<Vec<ScalarSetSample>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut offset = 0u64;
    for line in text.split_inclusive('\n') {
        let body = line.trim_end_matches(['\n', '\r']);
        if !body.is_empty() {
            out.push(parse_record(body).map_err(|msg| Error::format(path, offset, msg))?);
        }
        offset += line.len() as u64;
    }
    Ok(out)
}

fn parse_record(line: &str) -> Result<ScalarSetSample, String> {
    let fields: Vec<&str> = line.split(',').collect();
    let k: usize = fields[0].parse().map_err(|_| format!("bad cardinality `{}`", fields[0]))?;
    if fields.len() != k + 2 {
        return Err(format!("expected {} fields for K={}, found {}", k + 2, k, fields.len()));
    }
    let elements = fields[1..=k]
        .iter()
        .map(|f| match f.parse::<u8>() {
            Ok(v) if v <= 9 => Ok(v),
            _ => Err(format!("bad element `{}`", f)),
        })
        .collect::<Result<Vec<u8>, String>>()?;
    let label = fields[k + 1]
        .parse::<f64>()
        .map_err(|_| format!("bad label `{}`", fields[k + 1]))?;
    Ok(ScalarSetSample { elements, label })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn train_cardinality_range_and_determinism() {
        let a = gen_scalar_train(TargetKind::Sum, 2000, 10, 3).unwrap();
        assert!(a.iter().all(|s| (2..=10).contains(&s.elements.len())));
        assert!(a.iter().all(|s| s.elements.iter().all(|&e| e <= 9)));
        assert_eq!(a, gen_scalar_train(TargetKind::Sum, 2000, 10, 3).unwrap());
        assert_ne!(a, gen_scalar_train(TargetKind::Sum, 2000, 10, 4).unwrap());
    }

    #[test]
    fn count_test_labels_span_range() {
        let t = gen_scalar_test(TargetKind::Count, 500, 5, 1).unwrap();
        assert!(t.stratified);
        let mut labels: Vec<u32> = t.samples.iter().map(|s| s.label as u32).collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels, vec![2, 3, 4, 5]);
        assert_eq!(t, gen_scalar_test(TargetKind::Count, 500, 5, 1).unwrap());
    }

    #[test]
    fn max_test_labels_not_concentrated() {
        let t = gen_scalar_test(TargetKind::Max, 2000, 50, 9).unwrap();
        let mut hist = [0usize; 10];
        for s in &t.samples {
            hist[s.label as usize] += 1;
            assert!((2..=50).contains(&s.elements.len()));
        }
        let top = *hist.iter().max().unwrap() as f64 / t.samples.len() as f64;
        assert!(top <= 0.3, "{:?}", hist);
    }

    #[test]
    fn constant_target_falls_back() {
        // Inverse count with m = 2 is always 0.5.
        let t = gen_scalar_test(TargetKind::InverseCount, 50, 2, 0).unwrap();
        assert!(!t.stratified);
        assert_eq!(t.samples.len(), 50);
    }

    #[test]
    fn records_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.txt");
        let s = gen_scalar_train(TargetKind::Kurtosis, 50, 10, 1).unwrap();
        write_records(&p, &s).unwrap();
        assert_eq!(read_records(&p).unwrap(), s);

        std::fs::write(&p, "2,1,3,2\n3,1,2,9\n").unwrap();
        match read_records(&p) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 8),
            other => panic!("{:?}", other),
        }
    }
}
