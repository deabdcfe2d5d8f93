//! Mapping between pyramid cell coordinates and base-resolution pixels.
//!
//! Every conversion from cells to pixels goes through [`PyramidGeometry::cell_edge`]:
//! a base pixel belongs to a cell when its center lies inside the cell's
//! scaled footprint. Boxes, losses, masks and segment projection all share
//! this rule, so the same cell always owns the same pixels.

use serde::{Deserialize, Serialize};

/// Half-open integer pixel rectangle `[x0, x1) × [y0, y1)`; may extend past the image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelRect {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl PixelRect {
    pub fn new(x0: i64, y0: i64, x1: i64, y1: i64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> i64 {
        (self.x1 - self.x0).max(0)
    }

    pub fn height(&self) -> i64 {
        (self.y1 - self.y0).max(0)
    }

    pub fn area(&self) -> i64 {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    pub fn intersect(&self, other: &PixelRect) -> PixelRect {
        PixelRect {
            x0: self.x0.max(other.x0),
            y0: self.y0.max(other.y0),
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
        }
    }

    pub fn intersection_area(&self, other: &PixelRect) -> i64 {
        self.intersect(other).area()
    }

    pub fn union_area(&self, other: &PixelRect) -> i64 {
        self.area() + other.area() - self.intersection_area(other)
    }

    pub fn iou(&self, other: &PixelRect) -> f64 {
        let union = self.union_area(other);
        if union == 0 {
            return 0.0;
        }
        self.intersection_area(other) as f64 / union as f64
    }

    /// Restricts the rectangle to `[0, width) × [0, height)`.
    pub fn clip(&self, width: usize, height: usize) -> PixelRect {
        self.intersect(&PixelRect::new(0, 0, width as i64, height as i64))
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
}

/// Scale of every pyramid level plus the base image extent.
#[derive(Clone, Debug, PartialEq)]
pub struct PyramidGeometry {
    pub cell_size: usize,
    /// Scale of each level relative to the base image, level 0 first.
    pub scales: Vec<f64>,
    pub width: usize,
    pub height: usize,
}

impl PyramidGeometry {
    pub fn new(width: usize, height: usize, cell_size: usize, scales: Vec<f64>) -> Self {
        Self {
            cell_size,
            scales,
            width,
            height,
        }
    }

    /// Geometry with `n_levels` levels at scales `step^k`, without checking grid sizes.
    pub fn from_step(width: usize, height: usize, cell_size: usize, step: f64, n_levels: usize) -> Self {
        let scales = (0..n_levels).map(|k| step.powi(k as i32)).collect();
        Self::new(width, height, cell_size, scales)
    }

    pub fn num_levels(&self) -> usize {
        self.scales.len()
    }

    pub fn scale(&self, level: usize) -> f64 {
        self.scales[level]
    }

    /// Size of one cell at `level`, in base pixels.
    pub fn cell_extent(&self, level: usize) -> f64 {
        self.cell_size as f64 / self.scales[level]
    }

    /// First base pixel whose center lies at or right of cell boundary `c`.
    pub fn cell_edge(&self, level: usize, c: i64) -> i64 {
        (c as f64 * self.cell_extent(level) - 0.5).ceil() as i64
    }

    pub fn cell_rect(&self, level: usize, cx: i64, cy: i64) -> PixelRect {
        PixelRect {
            x0: self.cell_edge(level, cx),
            y0: self.cell_edge(level, cy),
            x1: self.cell_edge(level, cx + 1),
            y1: self.cell_edge(level, cy + 1),
        }
    }

    /// Pixel rectangle of a `w × h`-cell box whose top-left cell is `(x, y)` at `level`.
    pub fn box_rect(&self, level: usize, x: i64, y: i64, w: usize, h: usize) -> PixelRect {
        PixelRect {
            x0: self.cell_edge(level, x),
            y0: self.cell_edge(level, y),
            x1: self.cell_edge(level, x + w as i64),
            y1: self.cell_edge(level, y + h as i64),
        }
    }

    /// Pixel boundaries of the cells of a box along one axis (`n + 1` edges).
    pub fn edges(&self, level: usize, start: i64, n: usize) -> Vec<i64> {
        (0..=n as i64).map(|k| self.cell_edge(level, start + k)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_scale_edges_are_multiples_of_cell_size() {
        let g = PyramidGeometry::from_step(64, 64, 8, 0.5, 3);
        assert_eq!(g.cell_edge(0, 3), 24);
        assert_eq!(g.cell_edge(0, -1), -8);
        assert_eq!(g.cell_rect(1, 1, 0), PixelRect::new(16, 0, 32, 16));
    }

    #[test]
    fn fractional_scale_cells_tile_without_gaps() {
        let g = PyramidGeometry::from_step(200, 200, 8, 2f64.powf(-0.25), 5);
        for level in 0..5 {
            let e = g.edges(level, -3, 12);
            for w in e.windows(2) {
                assert!(w[1] > w[0]);
            }
            let r = g.box_rect(level, -3, -3, 12, 12);
            assert_eq!(r.x0, e[0]);
            assert_eq!(r.x1, e[12]);
        }
    }

    #[test]
    fn iou_of_disjoint_and_nested() {
        let a = PixelRect::new(0, 0, 10, 10);
        let b = PixelRect::new(10, 0, 20, 10);
        assert_eq!(a.iou(&b), 0.0);
        let c = PixelRect::new(0, 0, 5, 10);
        assert!((a.iou(&c) - 0.5).abs() < 1e-12);
        assert_eq!(a.iou(&a), 1.0);
    }
}
