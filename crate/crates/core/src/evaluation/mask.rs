use crate::error::{Error, Result};
use crate::geometry::PyramidGeometry;
use crate::imaging::SegmentMap;
use crate::model::{Label, ViewpointShape};

/// Binary mask at base-image resolution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PixelMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl PixelMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::argument(format!(
                "mask of {width}x{height} needs {} bits, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Paints the footprint of every visible cell of `y`, clipped to the image.
pub fn rasterize_cells(y: &Label, shape: ViewpointShape, geometry: &PyramidGeometry) -> PixelMask {
    let mut m = PixelMask::empty(geometry.width, geometry.height);
    let xs = geometry.edges(y.pos.level, y.pos.x, shape.width);
    let ys = geometry.edges(y.pos.level, y.pos.y, shape.height);
    let (w, h) = (geometry.width as i64, geometry.height as i64);
    for cy in 0..shape.height {
        for cx in 0..shape.width {
            if !y.visibility[cy * shape.width + cx] {
                continue;
            }
            for py in ys[cy].max(0)..ys[cy + 1].min(h) {
                for px in xs[cx].max(0)..xs[cx + 1].min(w) {
                    m.bits[py as usize * geometry.width + px as usize] = true;
                }
            }
        }
    }
    m
}

/// Sets every segment whose marked fraction exceeds `threshold` entirely to
/// 1; other segments keep their raw pixels.
pub fn refine_mask(raw: &PixelMask, seg: &SegmentMap, threshold: f64) -> Result<PixelMask> {
    if raw.width != seg.width || raw.height != seg.height {
        return Err(Error::argument("mask and segment map dimensions differ"));
    }
    let mut marked = vec![0usize; seg.num_segments()];
    for (p, &b) in raw.bits.iter().enumerate() {
        if b {
            marked[seg.pixel_labels[p] as usize] += 1;
        }
    }
    let promote: Vec<bool> = marked
        .iter()
        .zip(&seg.segment_areas)
        .map(|(&m, &a)| m as f64 > threshold * a as f64)
        .collect();
    let bits = raw
        .bits
        .iter()
        .zip(&seg.pixel_labels)
        .map(|(&b, &s)| b || promote[s as usize])
        .collect();
    PixelMask::new(raw.width, raw.height, bits)
}
