use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PixelRect, PyramidGeometry};

/// Top-left cell of a box and the pyramid level it lives on.
/// Coordinates may be negative or run past the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Position {
    pub x: i64,
    pub y: i64,
    pub level: usize,
}

impl Position {
    pub fn new(x: i64, y: i64, level: usize) -> Self {
        Self { x, y, level }
    }
}

/// Fixed box size of a viewpoint, in cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ViewpointShape {
    pub width: usize,
    pub height: usize,
}

impl ViewpointShape {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::argument("viewpoint shape needs at least one cell per side"));
        }
        Ok(Self { width, height })
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }
}

/// Structured output: box position, per-cell visibility (row-major, 1 =
/// visible) and viewpoint index.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Label {
    pub pos: Position,
    pub visibility: Vec<bool>,
    pub viewpoint: usize,
}

impl Label {
    pub fn new(pos: Position, visibility: Vec<bool>, viewpoint: usize) -> Self {
        Self {
            pos,
            visibility,
            viewpoint,
        }
    }

    pub fn all_visible(pos: Position, shape: ViewpointShape, viewpoint: usize) -> Self {
        Self::new(pos, vec![true; shape.cells()], viewpoint)
    }

    pub fn pixel_rect(&self, geometry: &PyramidGeometry, shape: ViewpointShape) -> PixelRect {
        geometry.box_rect(self.pos.level, self.pos.x, self.pos.y, shape.width, shape.height)
    }
}

/// Run lengths alternating between 0-runs and 1-runs, starting with a
/// (possibly empty) run of 0s.
pub fn rle_encode(v: &[bool]) -> Vec<u32> {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for &b in v {
        if b != current {
            counts.push(run);
            current = b;
            run = 0;
        }
        run += 1;
    }
    counts.push(run);
    counts
}

pub fn rle_decode(counts: &[u32]) -> Vec<bool> {
    let mut out = Vec::new();
    for (i, &c) in counts.iter().enumerate() {
        out.extend(std::iter::repeat(i % 2 == 1).take(c as usize));
    }
    out
}

/// Comma-separated text form of [`rle_encode`].
pub fn rle_to_string(v: &[bool]) -> String {
    rle_encode(v).iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

pub fn rle_from_str(s: &str) -> Result<Vec<bool>> {
    let counts = s
        .split(',')
        .map(|t| t.trim().parse::<u32>().map_err(|e| Error::format(format!("bad run length {t:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(rle_decode(&counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rle_examples() {
        assert_eq!(rle_encode(&[true, true, false]), vec![0, 2, 1]);
        assert_eq!(rle_encode(&[false, false]), vec![2]);
        assert_eq!(rle_to_string(&[false, true, true, false, true]), "1,2,1,1");
        assert!(rle_from_str("1,x").is_err());
    }

    proptest! {
        #[test]
        fn rle_round_trip(v in proptest::collection::vec(any::<bool>(), 0..64)) {
            prop_assert_eq!(rle_decode(&rle_encode(&v)), v.clone());
            prop_assert_eq!(rle_from_str(&rle_to_string(&v)).unwrap(), v);
        }
    }
}
