use std::ops::Range;

use crate::error::{Error, Result};
use crate::imaging::HOG_DIM;
use crate::model::ViewpointShape;

/// Offsets of the weight groups inside one viewpoint block:
/// `[visible filter, occlusion filter, label-0 prior, truncation, pairwise,
/// clique envelope (K+1), bias]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    pub cells: usize,
    pub k: usize,
}

impl BlockLayout {
    pub fn visible(&self) -> Range<usize> {
        0..HOG_DIM * self.cells
    }

    pub fn occluded(&self) -> Range<usize> {
        HOG_DIM * self.cells..2 * HOG_DIM * self.cells
    }

    pub fn prior(&self) -> Range<usize> {
        2 * HOG_DIM * self.cells..(2 * HOG_DIM + 1) * self.cells
    }

    pub fn truncation(&self) -> usize {
        (2 * HOG_DIM + 1) * self.cells
    }

    pub fn pairwise(&self) -> usize {
        self.truncation() + 1
    }

    pub fn hop(&self) -> Range<usize> {
        self.pairwise() + 1..self.pairwise() + 2 + self.k
    }

    pub fn bias(&self) -> usize {
        self.hop().end
    }

    pub fn len(&self) -> usize {
        self.bias() + 1
    }
}

/// Block layout of every viewpoint, stacked in viewpoint order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelLayout {
    shapes: Vec<ViewpointShape>,
    k: usize,
    offsets: Vec<usize>,
}

impl ModelLayout {
    pub fn new(shapes: Vec<ViewpointShape>, k: usize) -> Result<Self> {
        if shapes.is_empty() {
            return Err(Error::argument("model needs at least one viewpoint"));
        }
        if k < 2 {
            return Err(Error::argument(format!("clique size K = {k} must be at least 2")));
        }
        let mut offsets = Vec::with_capacity(shapes.len() + 1);
        let mut acc = 0;
        for s in &shapes {
            offsets.push(acc);
            acc += BlockLayout { cells: s.cells(), k }.len();
        }
        offsets.push(acc);
        Ok(Self { shapes, k, offsets })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_viewpoints(&self) -> usize {
        self.shapes.len()
    }

    pub fn shapes(&self) -> &[ViewpointShape] {
        &self.shapes
    }

    pub fn shape(&self, viewpoint: usize) -> ViewpointShape {
        self.shapes[viewpoint]
    }

    pub fn block(&self, viewpoint: usize) -> BlockLayout {
        BlockLayout {
            cells: self.shapes[viewpoint].cells(),
            k: self.k,
        }
    }

    pub fn offset(&self, viewpoint: usize) -> usize {
        self.offsets[viewpoint]
    }

    pub fn block_range(&self, viewpoint: usize) -> Range<usize> {
        self.offsets[viewpoint]..self.offsets[viewpoint + 1]
    }

    pub fn total_len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn check_viewpoint(&self, viewpoint: usize) -> Result<()> {
        if viewpoint >= self.shapes.len() {
            return Err(Error::argument(format!(
                "viewpoint {viewpoint} out of range for {} viewpoints",
                self.shapes.len()
            )));
        }
        Ok(())
    }

    /// Concatenates layouts as extra viewpoints of one model; all must share `K`.
    pub fn concat(parts: &[ModelLayout]) -> Result<Self> {
        let k = parts.first().ok_or_else(|| Error::argument("nothing to concatenate"))?.k;
        if parts.iter().any(|p| p.k != k) {
            return Err(Error::argument("layouts disagree on clique size K"));
        }
        Self::new(parts.iter().flat_map(|p| p.shapes.iter().copied()).collect(), k)
    }
}
