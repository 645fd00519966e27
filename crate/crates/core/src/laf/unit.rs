use crate::error::{Error, Result};
use crate::laf::kernel::{self, pow_conv, Elem};
use crate::laf::LafParams;

pub(crate) fn check_unit_interval(xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::Empty("aggregation over an empty multiset"));
    }
    match xs.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        Some(&value) => Err(Error::Domain { value }),
        None => Ok(()),
    }
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Generalized Lp term `(Σ xᵢ^b)^a` over values in `[0, 1]`.
pub fn l_ab(xs: &[f64], a: f64, b: f64) -> Result<f64> {
    check_unit_interval(xs)?;
    let s: f64 = sorted(xs).iter().map(|&x| pow_conv(x, x.ln(), b)).sum();
    Ok(pow_conv(s, s.ln(), a))
}

/// Aggregates a multiset of values in `[0, 1]` with one unit.
pub fn laf_forward(xs: &[f64], p: &LafParams) -> Result<f64> {
    check_unit_interval(xs)?;
    let elems: Vec<Elem> = sorted(xs).into_iter().map(Elem::new).collect();
    Ok(kernel::forward(&elems, &p.to_array())?.out)
}

/// Gradient of [`laf_forward`] scaled by `upstream`.
#[derive(Debug, Clone, PartialEq)]
pub struct LafGrad {
    /// One entry per input element, in the caller's order.
    pub xs: Vec<f64>,
    /// Same field layout as [`LafParams`].
    pub params: LafParams,
}

pub fn laf_backward(xs: &[f64], p: &LafParams, upstream: f64) -> Result<LafGrad> {
    check_unit_interval(xs)?;
    let arr = p.to_array();
    let sorted_elems: Vec<Elem> = sorted(xs).into_iter().map(Elem::new).collect();
    let stats = kernel::forward(&sorted_elems, &arr)?;
    let elems: Vec<Elem> = xs.iter().copied().map(Elem::new).collect();
    let mut gx = vec![0.0; xs.len()];
    let mut gp = [0.0; 12];
    kernel::backward(&elems, &arr, &stats, upstream, |i, g| gx[i] += g, &mut gp)?;
    if let Some(i) = gx.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            what: format!("gradient w.r.t. element {}", i),
        });
    }
    Ok(LafGrad {
        xs: gx,
        params: LafParams::from_array(gp),
    })
}
