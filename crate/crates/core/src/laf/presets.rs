//! Parameter settings that make a single unit reproduce a named aggregator.

use std::fmt;

use crate::error::{Error, Result};
use crate::laf::LafParams;

/// A named aggregator expressible by one unit. `Max`, `Min` and the ratio
/// presets are exact only as their limit parameters go to infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    Constant(f64),
    Max(f64),
    Min(f64),
    Sum,
    NonzeroCount,
    Mean,
    Moment(f64),
    PowerOfMoment { l: f64, k: f64 },
    MinOverMax { r: f64, s: f64 },
    MaxOverMin { r: f64, s: f64 },
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::Constant(k) => write!(f, "constant({})", k),
            Preset::Max(r) => write!(f, "max(r={})", r),
            Preset::Min(r) => write!(f, "min(r={})", r),
            Preset::Sum => f.write_str("sum"),
            Preset::NonzeroCount => f.write_str("nonzero-count"),
            Preset::Mean => f.write_str("mean"),
            Preset::Moment(k) => write!(f, "moment(k={})", k),
            Preset::PowerOfMoment { l, k } => write!(f, "power-of-moment(l={}, k={})", l, k),
            Preset::MinOverMax { r, s } => write!(f, "min/max(r={}, s={})", r, s),
            Preset::MaxOverMin { r, s } => write!(f, "max/min(r={}, s={})", r, s),
        }
    }
}

fn limit(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v >= 1.0 {
        Ok(v)
    } else {
        Err(Error::Preset(format!("{} limit parameter must be >= 1, got {}", name, v)))
    }
}

/// Builds the parameter row for a preset. Terms the aggregator does not use
/// get exponents `(0, 1)` and coefficient 0.
pub fn preset_params(preset: Preset) -> Result<LafParams> {
    // [a, b, c, d, e, f, g, h, α, β, γ, δ]
    let row = match preset {
        Preset::Constant(k) => [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, k, 0.0, 1.0, 0.0],
        Preset::Max(r) => {
            let r = limit("max", r)?;
            [1.0 / r, r, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0]
        }
        Preset::Min(r) => {
            let r = limit("min", r)?;
            [0.0, 1.0, 1.0 / r, r, 0.0, 1.0, 0.0, 1.0, 1.0, -1.0, 1.0, 0.0]
        }
        Preset::Sum => [1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0],
        Preset::NonzeroCount => [1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0],
        Preset::Mean => [1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0],
        Preset::Moment(k) => {
            if !(k.is_finite() && k >= 0.0) {
                return Err(Error::Preset(format!("moment order must be >= 0, got {}", k)));
            }
            [1.0, k, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0]
        }
        Preset::PowerOfMoment { l, k } => {
            if !(l.is_finite() && k.is_finite() && l >= 0.0 && k >= 0.0) {
                return Err(Error::Preset(format!("l and k must be >= 0, got l={} k={}", l, k)));
            }
            [l, k, 0.0, 1.0, l, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0]
        }
        // Numerator 1 − L(1/r, r)(1−x) → min, as in the `Min` row.
        Preset::MinOverMax { r, s } => {
            let (r, s) = (limit("min/max", r)?, limit("min/max", s)?);
            [0.0, 1.0, 1.0 / r, r, 1.0 / s, s, 0.0, 1.0, 1.0, -1.0, 1.0, 0.0]
        }
        // Denominator 1 − L(1/s, s)(1−x) → min.
        Preset::MaxOverMin { r, s } => {
            let (r, s) = (limit("max/min", r)?, limit("max/min", s)?);
            [1.0 / r, r, 0.0, 1.0, 0.0, 1.0, 1.0 / s, s, 1.0, 0.0, 1.0, -1.0]
        }
    };
    Ok(LafParams::from_array(row))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laf::laf_forward;

    #[test]
    fn sum_row() {
        let p = preset_params(Preset::Sum).unwrap();
        assert_eq!((p.a, p.b, p.alpha, p.beta, p.gamma, p.delta, p.e, p.f), (1.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn min_row_and_value() {
        let p = preset_params(Preset::Min(60.0)).unwrap();
        assert_eq!((p.alpha, p.beta, p.a, p.b, p.d), (1.0, -1.0, 0.0, 1.0, 60.0));
        assert_eq!(p.c, 1.0 / 60.0);
        let v = laf_forward(&[0.2, 0.5], &p).unwrap();
        // 1 − (0.8^60 + 0.5^60)^(1/60)
        let oracle = 1.0 - (0.8f64.powi(60) + 0.5f64.powi(60)).powf(1.0 / 60.0);
        assert!((v - oracle).abs() < 1e-14);
        assert!((v - 0.2).abs() < 0.01);
    }

    #[test]
    fn nonzero_count_on_positive_set() {
        let p = preset_params(Preset::NonzeroCount).unwrap();
        assert_eq!(laf_forward(&[0.5, 0.5, 0.5], &p).unwrap(), 3.0);
    }

    #[test]
    fn limit_parameters_validated() {
        assert!(preset_params(Preset::Max(0.5)).is_err());
        assert!(preset_params(Preset::Min(0.0)).is_err());
        assert!(preset_params(Preset::MinOverMax { r: 2.0, s: 0.9 }).is_err());
        assert!(preset_params(Preset::MaxOverMin { r: f64::NAN, s: 2.0 }).is_err());
    }

    #[test]
    fn ratio_presets_approach_targets() {
        let xs = [0.3, 0.6, 0.45];
        let v = laf_forward(&xs, &preset_params(Preset::MinOverMax { r: 200.0, s: 200.0 }).unwrap()).unwrap();
        assert!((v - 0.5).abs() < 0.01, "{v}");
        let v = laf_forward(&xs, &preset_params(Preset::MaxOverMin { r: 200.0, s: 200.0 }).unwrap()).unwrap();
        assert!((v - 2.0).abs() < 0.05, "{v}");
    }
}
