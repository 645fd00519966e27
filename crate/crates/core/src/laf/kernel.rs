//! Shared forward/backward arithmetic for one unit over one column of values.
//!
//! Power conventions: `0^0 = 1` and `0^p = 0` for `p > 0`, both for the
//! element powers and for the outer power of the sum. Every derivative
//! whose base is exactly 0 is taken as 0.

use crate::error::{Error, Result};

/// Threshold below which the denominator is replaced by `±DEN_EPS`.
pub const DEN_EPS: f64 = 1e-8;

// Term order: L(a,b)(x), L(c,d)(1−x), L(e,f)(x), L(g,h)(1−x).
const OUTER: [usize; 4] = [0, 2, 4, 6];
const INNER: [usize; 4] = [1, 3, 5, 7];
const COEF: [usize; 4] = [8, 9, 10, 11];
const COMPLEMENT: [bool; 4] = [false, true, false, true];

pub(crate) const TERM_NAMES: [&str; 4] = ["L(a,b)(x)", "L(c,d)(1-x)", "L(e,f)(x)", "L(g,h)(1-x)"];

#[inline]
pub(crate) fn pow_conv(base: f64, ln_base: f64, p: f64) -> f64 {
    if base == 0.0 {
        if p == 0.0 {
            1.0
        } else {
            0.0
        }
    } else if p == 1.0 {
        base
    } else if p == 0.0 {
        1.0
    } else {
        (p * ln_base).exp()
    }
}

/// Natural logs of one element and its complement.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Elem {
    pub x: f64,
    pub ln_x: f64,
    pub ln_1mx: f64,
}

impl Elem {
    pub fn new(x: f64) -> Self {
        Elem {
            x,
            ln_x: x.ln(),
            ln_1mx: (-x).ln_1p(),
        }
    }

    #[inline]
    fn base(&self, term: usize) -> (f64, f64) {
        if COMPLEMENT[term] {
            (1.0 - self.x, self.ln_1mx)
        } else {
            (self.x, self.ln_x)
        }
    }
}

pub(crate) fn stabilize(den: f64) -> (f64, bool) {
    if den.abs() >= DEN_EPS {
        (den, false)
    } else if den < 0.0 {
        (-DEN_EPS, true)
    } else {
        (DEN_EPS, true)
    }
}

/// Forward quantities kept for the reverse pass.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct UnitStats {
    pub sums: [f64; 4],
    pub terms: [f64; 4],
    pub den: f64,
    pub clamped: bool,
    pub out: f64,
}

/// Evaluates one unit. `elems` should be in a canonical (sorted) order so
/// that the sums do not depend on the order the caller received them in.
pub(crate) fn forward(elems: &[Elem], p: &[f64]) -> Result<UnitStats> {
    let mut sums = [0.0; 4];
    for el in elems {
        for (t, s) in sums.iter_mut().enumerate() {
            let (base, ln_base) = el.base(t);
            *s += pow_conv(base, ln_base, p[INNER[t]]);
        }
    }
    let mut terms = [0.0; 4];
    for t in 0..4 {
        terms[t] = pow_conv(sums[t], sums[t].ln(), p[OUTER[t]]);
        if !terms[t].is_finite() {
            return Err(Error::NonFinite {
                what: format!("term {}", TERM_NAMES[t]),
            });
        }
    }
    let num = p[COEF[0]] * terms[0] + p[COEF[1]] * terms[1];
    let (den, clamped) = stabilize(p[COEF[2]] * terms[2] + p[COEF[3]] * terms[3]);
    let out = num / den;
    if !out.is_finite() {
        return Err(Error::NonFinite {
            what: "aggregation ratio".to_string(),
        });
    }
    Ok(UnitStats {
        sums,
        terms,
        den,
        clamped,
        out,
    })
}

/// Accumulates `upstream · ∂out/∂·` into `grad_x` (one slot per element of
/// `elems`, same order) and `grad_p` (twelve slots).
pub(crate) fn backward(
    elems: &[Elem],
    p: &[f64],
    st: &UnitStats,
    upstream: f64,
    mut grad_x: impl FnMut(usize, f64),
    grad_p: &mut [f64],
) -> Result<()> {
    let g_num = upstream / st.den;
    let g_den = if st.clamped { 0.0 } else { -upstream * st.out / st.den };
    let weight = [g_num, g_num, g_den, g_den];

    // w_t = coefficient · ∂out/∂(num or den); dT/dS for each term.
    let mut w = [0.0; 4];
    let mut dt_ds = [0.0; 4];
    for t in 0..4 {
        w[t] = p[COEF[t]] * weight[t];
        grad_p[COEF[t]] += st.terms[t] * weight[t];
        let s = st.sums[t];
        if s > 0.0 {
            grad_p[OUTER[t]] += w[t] * st.terms[t] * s.ln();
            dt_ds[t] = p[OUTER[t]] * st.terms[t] / s;
        }
    }

    let mut ds_dinner = [0.0; 4];
    for (i, el) in elems.iter().enumerate() {
        let mut gx = 0.0;
        for t in 0..4 {
            let (base, ln_base) = el.base(t);
            if base == 0.0 {
                continue;
            }
            let q = p[INNER[t]];
            let pw = pow_conv(base, ln_base, q);
            ds_dinner[t] += pw * ln_base;
            let d_base = w[t] * dt_ds[t] * q * pw / base;
            gx += if COMPLEMENT[t] { -d_base } else { d_base };
        }
        grad_x(i, gx);
    }
    for t in 0..4 {
        grad_p[INNER[t]] += w[t] * dt_ds[t] * ds_dinner[t];
    }
    if let Some(t) = (0..4).find(|&t| !grad_p[INNER[t]].is_finite() || !grad_p[OUTER[t]].is_finite()) {
        return Err(Error::NonFinite {
            what: format!("gradient of term {}", TERM_NAMES[t]),
        });
    }
    Ok(())
}
