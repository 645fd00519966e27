use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// The twelve tunable scalars of one aggregation unit.
///
/// The value is `(α·L(a,b)(x) + β·L(c,d)(1−x)) / (γ·L(e,f)(x) + δ·L(g,h)(1−x))`
/// with `L(p,q)(x) = (Σ xᵢ^q)^p`. Exponents `a..h` are kept nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LafParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
    pub g: f64,
    pub h: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

/// Number of scalars per unit.
pub const NUM_PARAMS: usize = 12;
/// The first eight flat entries are exponents.
pub const NUM_EXPONENTS: usize = 8;

pub const NAMES: [&str; NUM_PARAMS] = [
    "a", "b", "c", "d", "e", "f", "g", "h", "alpha", "beta", "gamma", "delta",
];

impl LafParams {
    /// Flat order: `a b c d e f g h α β γ δ`.
    pub fn to_array(&self) -> [f64; NUM_PARAMS] {
        [
            self.a, self.b, self.c, self.d, self.e, self.f, self.g, self.h, self.alpha, self.beta,
            self.gamma, self.delta,
        ]
    }

    pub fn from_array(v: [f64; NUM_PARAMS]) -> Self {
        LafParams {
            a: v[0],
            b: v[1],
            c: v[2],
            d: v[3],
            e: v[4],
            f: v[5],
            g: v[6],
            h: v[7],
            alpha: v[8],
            beta: v[9],
            gamma: v[10],
            delta: v[11],
        }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let mut arr = [0.0; NUM_PARAMS];
        arr.copy_from_slice(&v[..NUM_PARAMS]);
        Self::from_array(arr)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn exponents_nonnegative(&self) -> bool {
        self.to_array()[..NUM_EXPONENTS].iter().all(|&v| v >= 0.0)
    }
}

/// Exponents uniform in `[0, 1]`, coefficients from `N(0, 0.01²)`.
pub fn init_params<R: Rng + ?Sized>(rng: &mut R) -> LafParams {
    let normal = Normal::new(0.0, 0.01).expect("valid std");
    let mut v = [0.0; NUM_PARAMS];
    for e in &mut v[..NUM_EXPONENTS] {
        *e = rng.random_range(0.0..=1.0);
    }
    for c in &mut v[NUM_EXPONENTS..] {
        *c = normal.sample(rng);
    }
    LafParams::from_array(v)
}

/// Clamps the exponents at 0; coefficients are left alone.
pub fn project_params(p: LafParams) -> LafParams {
    let mut v = p.to_array();
    project_slice(&mut v);
    LafParams::from_array(v)
}

/// In-place projection of one flat unit (`len >= 8`).
pub(crate) fn project_slice(v: &mut [f64]) {
    for e in &mut v[..NUM_EXPONENTS] {
        if *e < 0.0 {
            *e = 0.0;
        }
    }
}
