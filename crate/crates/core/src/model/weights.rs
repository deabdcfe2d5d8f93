use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ModelLayout, ViewpointShape};
use crate::scalar::Scalar;

/// Flat weight vector together with the layout that gives its blocks meaning.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector<T> {
    layout: ModelLayout,
    data: Vec<T>,
}

/// Borrowed view of one viewpoint's weight groups.
#[derive(Clone, Copy, Debug)]
pub struct BlockView<'a, T> {
    pub visible: &'a [T],
    pub occluded: &'a [T],
    pub prior: &'a [T],
    pub truncation: T,
    pub pairwise: T,
    pub hop: &'a [T],
    pub bias: T,
}

impl<T: Scalar> WeightVector<T> {
    pub fn zeros(layout: ModelLayout) -> Self {
        let n = layout.total_len();
        Self {
            layout,
            data: vec![T::zero(); n],
        }
    }

    pub fn layout(&self) -> &ModelLayout {
        &self.layout
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn block_slice(&self, viewpoint: usize) -> &[T] {
        &self.data[self.layout.block_range(viewpoint)]
    }

    pub fn block_slice_mut(&mut self, viewpoint: usize) -> &mut [T] {
        let r = self.layout.block_range(viewpoint);
        &mut self.data[r]
    }

    pub fn block(&self, viewpoint: usize) -> BlockView<'_, T> {
        let b = self.layout.block(viewpoint);
        let s = self.block_slice(viewpoint);
        BlockView {
            visible: &s[b.visible()],
            occluded: &s[b.occluded()],
            prior: &s[b.prior()],
            truncation: s[b.truncation()],
            pairwise: s[b.pairwise()],
            hop: &s[b.hop()],
            bias: s[b.bias()],
        }
    }

    /// Weights of the viewpoints in `range`, as a model of their own.
    pub fn slice_viewpoints(&self, range: Range<usize>) -> Result<Self> {
        if range.is_empty() || range.end > self.layout.num_viewpoints() {
            return Err(Error::argument(format!("viewpoint range {range:?} out of bounds")));
        }
        let layout = ModelLayout::new(self.layout.shapes()[range.clone()].to_vec(), self.layout.k())?;
        let flat = self.data[self.layout.offset(range.start)..self.layout.block_range(range.end - 1).end].to_vec();
        unpack_weights(layout, flat)
    }

    /// Stacks several weight vectors as viewpoints of one model.
    pub fn concat(parts: &[WeightVector<T>]) -> Result<Self> {
        let layouts: Vec<_> = parts.iter().map(|p| p.layout.clone()).collect();
        let layout = ModelLayout::concat(&layouts)?;
        let flat = parts.iter().flat_map(|p| p.data.iter().copied()).collect();
        unpack_weights(layout, flat)
    }

    pub fn cast<U: Scalar>(&self) -> WeightVector<U> {
        WeightVector {
            layout: self.layout.clone(),
            data: self.data.iter().map(|&v| U::of(v.as_f64())).collect(),
        }
    }
}

pub fn pack_weights<T: Scalar>(w: &WeightVector<T>) -> Vec<T> {
    w.data.clone()
}

pub fn unpack_weights<T: Scalar>(layout: ModelLayout, flat: Vec<T>) -> Result<WeightVector<T>> {
    if flat.len() != layout.total_len() {
        return Err(Error::format(format!(
            "weight vector has {} entries, layout needs {}",
            flat.len(),
            layout.total_len()
        )));
    }
    Ok(WeightVector { layout, data: flat })
}

const MAGIC: &[u8; 8] = b"OCCSEGM\0";
const VERSION: u32 = 1;

/// A trained model: weights plus the cell size its templates were learned at.
///
/// File layout (all little-endian): magic `OCCSEGM\0`, `u32` version, `u32`
/// viewpoint count `A`, `A` pairs of `u32` (width, height) in cells, `u32`
/// K, `u32` cell size, `u64` weight count, then the weights as `f64` in
/// pack order (viewpoint blocks in sequence, each ordered visible filter,
/// occlusion filter, prior, truncation, pairwise, K+1 envelope weights,
/// bias).
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub weights: WeightVector<T>,
    pub cell_size: usize,
}

impl<T: Scalar> Model<T> {
    pub fn new(weights: WeightVector<T>, cell_size: usize) -> Self {
        Self { weights, cell_size }
    }

    pub fn layout(&self) -> &ModelLayout {
        self.weights.layout()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let layout = self.weights.layout();
        let mut out = Vec::with_capacity(32 + 8 * self.weights.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(layout.num_viewpoints() as u32).to_le_bytes());
        for s in layout.shapes() {
            out.extend_from_slice(&(s.width as u32).to_le_bytes());
            out.extend_from_slice(&(s.height as u32).to_le_bytes());
        }
        out.extend_from_slice(&(layout.k() as u32).to_le_bytes());
        out.extend_from_slice(&(self.cell_size as u32).to_le_bytes());
        out.extend_from_slice(&(self.weights.len() as u64).to_le_bytes());
        for v in self.weights.as_slice() {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::format("not a model file (bad magic)"));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::format(format!("unsupported model version {version}")));
        }
        let a = read_u32(&mut r)? as usize;
        if a == 0 || a > 1 << 16 {
            return Err(Error::format(format!("implausible viewpoint count {a}")));
        }
        let mut shapes = Vec::with_capacity(a);
        for _ in 0..a {
            let w = read_u32(&mut r)? as usize;
            let h = read_u32(&mut r)? as usize;
            shapes.push(ViewpointShape::new(w, h).map_err(|e| Error::format(e.to_string()))?);
        }
        let k = read_u32(&mut r)? as usize;
        let cell_size = read_u32(&mut r)? as usize;
        let n = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let layout = ModelLayout::new(shapes, k).map_err(|e| Error::format(e.to_string()))?;
        if r.len() != n * 8 {
            return Err(Error::format(format!(
                "model declares {n} weights but carries {} payload bytes",
                r.len()
            )));
        }
        let flat = r
            .chunks_exact(8)
            .map(|c| T::of(f64::from_le_bytes(c.try_into().unwrap())))
            .collect();
        Ok(Self::new(unpack_weights(layout, flat)?, cell_size))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|_| Error::format("model file truncated"))
}

fn read_array<const N: usize>(r: &mut &[u8]) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    read_exact(r, &mut b)?;
    Ok(b)
}

fn read_u32(r: &mut &[u8]) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}
