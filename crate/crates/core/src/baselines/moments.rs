use crate::error::{Error, Result};

/// Population moments of a multiset (divisor `N`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMoments {
    pub mean: f64,
    pub std: f64,
    pub var: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

/// Central moments `m2, m3, m4` about the mean, summed in sorted order.
/// `degenerate` is set when every element is identical.
pub(crate) struct Central {
    pub n: f64,
    pub mean: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    pub degenerate: bool,
}

pub(crate) fn central(sorted: &[f64]) -> Central {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let degenerate = sorted.iter().all(|&x| x == sorted[0]);
    if degenerate {
        return Central {
            n,
            mean,
            m2: 0.0,
            m3: 0.0,
            m4: 0.0,
            degenerate,
        };
    }
    let (mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0);
    for &x in sorted {
        let d = x - mean;
        let d2 = d * d;
        s2 += d2;
        s3 += d2 * d;
        s4 += d2 * d2;
    }
    Central {
        n,
        mean,
        m2: s2 / n,
        m3: s3 / n,
        m4: s4 / n,
        degenerate,
    }
}

/// Mean, population standard deviation and variance, skewness
/// `1/N Σ((x−μ)/σ)³` and kurtosis `1/N Σ((x−μ)/σ)⁴`. A set whose elements
/// are all equal has zero spread and skewness = kurtosis = 0.
pub fn sample_moments(xs: &[f64]) -> Result<SampleMoments> {
    if xs.is_empty() {
        return Err(Error::Empty("moments of an empty multiset"));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let c = central(&sorted);
    if c.degenerate {
        return Ok(SampleMoments {
            mean: c.mean,
            std: 0.0,
            var: 0.0,
            skewness: 0.0,
            kurtosis: 0.0,
        });
    }
    Ok(SampleMoments {
        mean: c.mean,
        std: c.m2.sqrt(),
        var: c.m2,
        skewness: c.m3 / c.m2.powf(1.5),
        kurtosis: c.m4 / (c.m2 * c.m2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_zero_nine() {
        let m = sample_moments(&[0.0, 0.0, 9.0]).unwrap();
        assert_eq!(m.mean, 3.0);
        assert!((m.std - 18f64.sqrt()).abs() < 1e-12);
        assert!((m.skewness - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((m.kurtosis - 1.5).abs() < 1e-12);
    }

    #[test]
    fn two_symmetric_points() {
        let m = sample_moments(&[0.2, 0.4]).unwrap();
        assert!((m.mean - 0.3).abs() < 1e-15);
        assert!((m.std - 0.1).abs() < 1e-12);
        assert!((m.var - 0.01).abs() < 1e-12);
        assert!(m.skewness.abs() < 1e-9);
        assert!((m.kurtosis - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_set_is_degenerate() {
        let m = sample_moments(&[0.7, 0.7, 0.7]).unwrap();
        assert_eq!((m.std, m.var, m.skewness, m.kurtosis), (0.0, 0.0, 0.0, 0.0));
        assert!(sample_moments(&[]).is_err());
    }
}
