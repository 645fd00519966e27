use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::sample_moments;
use crate::error::{Error, Result};

/// Ground-truth aggregators for the synthetic tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TargetKind {
    Count,
    Sum,
    Max,
    Min,
    Mean,
    Median,
    /// `1/N`.
    InverseCount,
    /// `1/N Σ xᵏ`, `k >= 1`.
    Moment(u32),
    Skewness,
    Kurtosis,
}

impl TargetKind {
    pub const VALID: &'static str =
        "count, sum, max, min, mean, median, inverse_count, moment<k> (e.g. moment2), skewness, kurtosis";
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetKind::Count => f.write_str("count"),
            TargetKind::Sum => f.write_str("sum"),
            TargetKind::Max => f.write_str("max"),
            TargetKind::Min => f.write_str("min"),
            TargetKind::Mean => f.write_str("mean"),
            TargetKind::Median => f.write_str("median"),
            TargetKind::InverseCount => f.write_str("inverse_count"),
            TargetKind::Moment(k) => write!(f, "moment{}", k),
            TargetKind::Skewness => f.write_str("skewness"),
            TargetKind::Kurtosis => f.write_str("kurtosis"),
        }
    }
}

impl FromStr for TargetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let t = match s {
            "count" => TargetKind::Count,
            "sum" => TargetKind::Sum,
            "max" => TargetKind::Max,
            "min" => TargetKind::Min,
            "mean" => TargetKind::Mean,
            "median" => TargetKind::Median,
            "inverse_count" => TargetKind::InverseCount,
            "skewness" => TargetKind::Skewness,
            "kurtosis" => TargetKind::Kurtosis,
            _ => match s.strip_prefix("moment").map(str::parse::<u32>) {
                Some(Ok(k)) if k >= 1 => TargetKind::Moment(k),
                _ => return Err(format!("unknown target `{}` (valid: {})", s, Self::VALID)),
            },
        };
        Ok(t)
    }
}

impl TryFrom<String> for TargetKind {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<TargetKind> for String {
    fn from(t: TargetKind) -> String {
        t.to_string()
    }
}

/// Evaluates a target over a nonempty multiset.
pub fn target_value<T: Copy + Into<f64>>(kind: TargetKind, elements: &[T]) -> Result<f64> {
    if elements.is_empty() {
        return Err(Error::Empty("target of an empty multiset"));
    }
    let mut xs: Vec<f64> = elements.iter().map(|&e| e.into()).collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let v = match kind {
        TargetKind::Count => n,
        TargetKind::Sum => xs.iter().sum(),
        TargetKind::Max => xs[xs.len() - 1],
        TargetKind::Min => xs[0],
        TargetKind::Mean => xs.iter().sum::<f64>() / n,
        TargetKind::Median => {
            let m = xs.len() / 2;
            if xs.len() % 2 == 1 {
                xs[m]
            } else {
                (xs[m - 1] + xs[m]) / 2.0
            }
        }
        TargetKind::InverseCount => 1.0 / n,
        TargetKind::Moment(k) => xs.iter().map(|x| x.powi(k as i32)).sum::<f64>() / n,
        TargetKind::Skewness => sample_moments(&xs)?.skewness,
        TargetKind::Kurtosis => sample_moments(&xs)?.kurtosis,
    };
    Ok(v)
}
