use std::ops::Range;

use crate::error::{Error, Result};
use crate::ndcore::Tensor;

/// Boundaries of the sets inside a flat element array.
///
/// Set `i` owns element rows `offsets[i]..offsets[i + 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segments {
    offsets: Vec<usize>,
}

impl Segments {
    pub fn from_offsets(offsets: Vec<usize>) -> Result<Self> {
        if offsets.first() != Some(&0) {
            return Err(Error::shape("segments", "offsets must start at 0"));
        }
        if offsets.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::shape("segments", "offsets must be non-decreasing"));
        }
        Ok(Segments { offsets })
    }

    pub fn from_lengths(lengths: impl IntoIterator<Item = usize>) -> Self {
        let mut offsets = vec![0];
        let mut acc = 0;
        for l in lengths {
            acc += l;
            offsets.push(acc);
        }
        Segments { offsets }
    }

    pub fn num_sets(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_elements(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn range(&self, set: usize) -> Range<usize> {
        self.offsets[set]..self.offsets[set + 1]
    }

    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.offsets.windows(2).map(|w| w[0]..w[1])
    }

    /// Fails with the index of the first empty set.
    pub fn require_nonempty(&self) -> Result<()> {
        match self.ranges().position(|r| r.is_empty()) {
            Some(index) => Err(Error::EmptySet { index }),
            None => Ok(()),
        }
    }
}

/// A ragged batch of multisets of `d`-dimensional element vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SetBatch {
    elements: Tensor,
    segments: Segments,
}

impl SetBatch {
    pub fn new(elements: Tensor, segments: Segments) -> Result<Self> {
        let (rows, _) = elements.dims2("set batch")?;
        if rows != segments.num_elements() {
            return Err(Error::shape(
                "set batch",
                format!(
                    "segments cover {} elements but tensor has {} rows",
                    segments.num_elements(),
                    rows
                ),
            ));
        }
        Ok(SetBatch { elements, segments })
    }

    /// Builds a batch from per-set lists of element vectors.
    pub fn from_sets(sets: &[Vec<Vec<f64>>], dim: usize) -> Result<Self> {
        let mut values = Vec::new();
        for set in sets {
            for el in set {
                if el.len() != dim {
                    return Err(Error::shape(
                        "set batch",
                        format!("element of length {} in a batch of dimension {}", el.len(), dim),
                    ));
                }
                values.extend_from_slice(el);
            }
        }
        let segments = Segments::from_lengths(sets.iter().map(Vec::len));
        let elements = Tensor::new(vec![segments.num_elements(), dim], values)?;
        Ok(SetBatch { elements, segments })
    }

    /// Batch of scalar sets (`d = 1`).
    pub fn from_scalar_sets(sets: &[Vec<f64>]) -> Self {
        let segments = Segments::from_lengths(sets.iter().map(Vec::len));
        let values = sets.concat();
        let elements = Tensor::new(vec![values.len(), 1], values).expect("consistent by construction");
        SetBatch { elements, segments }
    }

    pub fn elements(&self) -> &Tensor {
        &self.elements
    }

    pub fn segments(&self) -> &Segments {
        &self.segments
    }

    pub fn dim(&self) -> usize {
        self.elements.shape()[1]
    }

    pub fn num_sets(&self) -> usize {
        self.segments.num_sets()
    }

    pub fn into_parts(self) -> (Tensor, Segments) {
        (self.elements, self.segments)
    }
}
