//! The learnable aggregation function (LAF).
//!
//! A unit maps a multiset `x ⊂ [0, 1]` to
//!
//! ```text
//!            α·L(a,b)(x) + β·L(c,d)(1−x)
//! LAF(x) = -----------------------------,   L(p,q)(x) = (Σᵢ xᵢ^q)^p
//!            γ·L(e,f)(x) + δ·L(g,h)(1−x)
//! ```
//!
//! with exponents `a..h ≥ 0`. Denominators smaller than [`DEN_EPS`] in
//! magnitude are replaced by `±DEN_EPS`.

mod format;
pub mod injectivity;
mod kernel;
mod layer;
mod params;
mod presets;
mod unit;

pub use format::{format_linear, format_unit};
pub use injectivity::sum_encoding_injectivity;
pub use kernel::DEN_EPS;
pub use layer::{laf_layer_forward, project_tensor, squash, units_from_tensor, LafLayer};
pub use params::{init_params, project_params, LafParams, NAMES as PARAM_NAMES, NUM_EXPONENTS, NUM_PARAMS};
pub use presets::{preset_params, Preset};
pub use unit::{l_ab, laf_backward, laf_forward, LafGrad};
