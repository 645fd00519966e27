use crate::error::{Error, Result};
use crate::laf::kernel::{self, Elem, UnitStats};
use crate::laf::params::{project_slice, NUM_PARAMS};
use crate::laf::LafParams;
use crate::ndcore::{Op, Segments, SetBatch, Tape, Tensor, Var};

/// `r` units applied element-wise to sets of `d`-dimensional vectors.
///
/// Output for one set has `r·d` entries, unit-major: entry `k·d + j` is unit
/// `k` aggregating coordinate `j` over the set.
#[derive(Debug, Clone, PartialEq)]
pub struct LafLayer {
    pub units: Vec<LafParams>,
    pub input_dim: usize,
}

impl LafLayer {
    pub fn new(units: Vec<LafParams>, input_dim: usize) -> Result<Self> {
        if units.is_empty() {
            return Err(Error::Config("a LAF layer needs at least one unit".into()));
        }
        Ok(LafLayer { units, input_dim })
    }

    pub fn output_dim(&self) -> usize {
        self.units.len() * self.input_dim
    }

    /// Parameters as an `[r, 12]` tensor.
    pub fn to_tensor(&self) -> Tensor {
        let v = self.units.iter().flat_map(|u| u.to_array()).collect();
        Tensor::new(vec![self.units.len(), NUM_PARAMS], v).expect("sized by construction")
    }

    pub fn from_tensor(t: &Tensor, input_dim: usize) -> Result<Self> {
        let units = units_from_tensor(t)?;
        LafLayer::new(units, input_dim)
    }
}

pub fn units_from_tensor(t: &Tensor) -> Result<Vec<LafParams>> {
    let (_, cols) = t.dims2("laf parameters")?;
    if cols != NUM_PARAMS {
        return Err(Error::shape(
            "laf parameters",
            format!("axis 1 must have size {}, got {}", NUM_PARAMS, cols),
        ));
    }
    Ok(t.values().chunks_exact(NUM_PARAMS).map(LafParams::from_slice).collect())
}

/// Clamps all exponents of an `[r, 12]` parameter tensor at 0.
pub fn project_tensor(t: &mut Tensor) {
    for unit in t.values_mut().chunks_exact_mut(NUM_PARAMS) {
        project_slice(unit);
    }
}

/// Sigmoid squashing of unbounded inputs into `(0, 1)`.
pub fn squash(x: &Tensor) -> Tensor {
    x.map(crate::ndcore::sigmoid_scalar)
}

struct Forward {
    out: Vec<f64>,
    /// Indexed `[(set · d + j) · r + k]`.
    stats: Vec<UnitStats>,
}

fn check_inputs(x: &Tensor, segments: &Segments, params: &Tensor) -> Result<(usize, usize)> {
    let (rows, d) = x.dims2("laf layer")?;
    if rows != segments.num_elements() {
        return Err(Error::shape(
            "laf layer",
            format!("{} element rows but segments cover {}", rows, segments.num_elements()),
        ));
    }
    let (r, cols) = params.dims2("laf layer")?;
    if cols != NUM_PARAMS || r == 0 {
        return Err(Error::shape(
            "laf layer",
            format!("parameter tensor must be [r >= 1, {}], got {:?}", NUM_PARAMS, params.shape()),
        ));
    }
    segments.require_nonempty()?;
    if let Some(&value) = x.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain { value });
    }
    Ok((d, r))
}

fn column(x: &Tensor, d: usize, rows: std::ops::Range<usize>, j: usize) -> Vec<Elem> {
    rows.map(|i| Elem::new(x.values()[i * d + j])).collect()
}

fn forward(x: &Tensor, segments: &Segments, params: &Tensor) -> Result<Forward> {
    let (d, r) = check_inputs(x, segments, params)?;
    let p = params.values();
    let n_sets = segments.num_sets();
    let mut out = vec![0.0; n_sets * r * d];
    let mut stats = Vec::with_capacity(n_sets * d * r);
    for (s, range) in segments.ranges().enumerate() {
        for j in 0..d {
            let mut col = column(x, d, range.clone(), j);
            col.sort_by(|a, b| a.x.total_cmp(&b.x));
            for k in 0..r {
                let st = kernel::forward(&col, &p[k * NUM_PARAMS..(k + 1) * NUM_PARAMS])?;
                out[s * r * d + k * d + j] = st.out;
                stats.push(st);
            }
        }
    }
    Ok(Forward { out, stats })
}

/// Pure forward pass: returns `[num_sets, r·d]`.
pub fn laf_layer_forward(batch: &SetBatch, layer: &LafLayer) -> Result<Tensor> {
    if batch.dim() != layer.input_dim {
        return Err(Error::shape(
            "laf layer",
            format!("batch dimension {} vs layer input dimension {}", batch.dim(), layer.input_dim),
        ));
    }
    let fwd = forward(batch.elements(), batch.segments(), &layer.to_tensor())?;
    Tensor::new(vec![batch.num_sets(), layer.output_dim()], fwd.out)
}

struct LafLayerOp {
    segments: Segments,
    stats: Vec<UnitStats>,
}

impl Op for LafLayerOp {
    fn name(&self) -> &'static str {
        "laf"
    }

    fn backward(&self, inputs: &[&Tensor], _out: &Tensor, up: &Tensor) -> Result<Vec<Option<Tensor>>> {
        let (x, params) = (inputs[0], inputs[1]);
        let (_, d) = x.dims2("laf layer")?;
        let r = params.shape()[0];
        let p = params.values();
        let mut gx = Tensor::zeros(x.shape());
        let mut gp = Tensor::zeros(params.shape());
        for (s, range) in self.segments.ranges().enumerate() {
            for j in 0..d {
                let col = column(x, d, range.clone(), j);
                for k in 0..r {
                    let upstream = up.values()[s * r * d + k * d + j];
                    if upstream == 0.0 {
                        continue;
                    }
                    let st = &self.stats[(s * d + j) * r + k];
                    let gxv = gx.values_mut();
                    let start = range.start;
                    kernel::backward(
                        &col,
                        &p[k * NUM_PARAMS..(k + 1) * NUM_PARAMS],
                        st,
                        upstream,
                        |i, g| gxv[(start + i) * d + j] += g,
                        &mut gp.values_mut()[k * NUM_PARAMS..(k + 1) * NUM_PARAMS],
                    )?;
                }
            }
        }
        Ok(vec![Some(gx), Some(gp)])
    }
}

impl Tape {
    /// Records the LAF layer on `x[total, d]` (values in `[0, 1]`) with
    /// parameters `params[r, 12]`; output `[num_sets, r·d]`.
    pub fn laf_layer(&mut self, x: Var, params: Var, segments: &Segments) -> Result<Var> {
        let fwd = forward(self.value(x), segments, self.value(params))?;
        let (_, d) = self.value(x).dims2("laf layer")?;
        let r = self.value(params).shape()[0];
        let value = Tensor::new(vec![segments.num_sets(), r * d], fwd.out)?;
        self.push(
            Box::new(LafLayerOp {
                segments: segments.clone(),
                stats: fwd.stats,
            }),
            &[x, params],
            value,
        )
    }
}
