//! 31-dimensional HOG cells: 18 contrast-sensitive orientation bins, 9
//! contrast-insensitive bins and 4 texture-energy features per cell.
//!
//! Gradients use central differences on the channel with the largest
//! magnitude. Each pixel votes its magnitude into the 4 nearest cells with
//! bilinear spatial weights. Every cell is normalized by the energies of the
//! four 2×2 blocks that contain it, with cells outside the grid contributing
//! zero energy, and normalized values are truncated at 0.2.

use crate::imaging::RasterImage;
use crate::scalar::Scalar;

pub const HOG_DIM: usize = 31;
pub const SENSITIVE_BINS: usize = 18;
pub const INSENSITIVE_BINS: usize = 9;

const NORM_EPS: f64 = 1e-8;
const TRUNCATION: f64 = 0.2;
const TEXTURE_SCALE: f64 = 0.2357;

/// Per-cell HOG vectors for a `grid_w × grid_h` grid, stored cell-major.
#[derive(Clone, Debug, PartialEq)]
pub struct HogGrid<T> {
    pub grid_w: usize,
    pub grid_h: usize,
    data: Vec<T>,
}

impl<T: Scalar> HogGrid<T> {
    pub fn zeros(grid_w: usize, grid_h: usize) -> Self {
        Self {
            grid_w,
            grid_h,
            data: vec![T::zero(); grid_w * grid_h * HOG_DIM],
        }
    }

    #[inline]
    pub fn cell(&self, cx: usize, cy: usize) -> &[T] {
        let i = (cy * self.grid_w + cx) * HOG_DIM;
        &self.data[i..i + HOG_DIM]
    }

    /// Cell at signed coordinates, `None` outside the grid.
    #[inline]
    pub fn cell_checked(&self, cx: i64, cy: i64) -> Option<&[T]> {
        if cx < 0 || cy < 0 || cx as usize >= self.grid_w || cy as usize >= self.grid_h {
            None
        } else {
            Some(self.cell(cx as usize, cy as usize))
        }
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }
}

/// Extracts HOG features over the `floor(w / cell_size) × floor(h / cell_size)` cell grid.
///
/// Requires `cell_size >= 2` and an image of at least one cell; smaller
/// inputs yield an empty grid.
pub fn extract_hog<T: Scalar>(img: &RasterImage<T>, cell_size: usize) -> HogGrid<T> {
    assert!(cell_size >= 2, "cell size must be at least 2");
    let (w, h) = (img.width(), img.height());
    let (gw, gh) = (w / cell_size, h / cell_size);
    let mut out = HogGrid::zeros(gw, gh);
    if gw == 0 || gh == 0 {
        return out;
    }

    let units: Vec<(T, T)> = (0..INSENSITIVE_BINS)
        .map(|o| {
            let a = o as f64 * std::f64::consts::PI / INSENSITIVE_BINS as f64;
            (T::of(a.cos()), T::of(a.sin()))
        })
        .collect();

    let cells = gw * gh;
    let mut hist = vec![T::zero(); cells * SENSITIVE_BINS];
    let cs = T::of_usize(cell_size);
    let half = T::of(0.5);

    for y in 1..(gh * cell_size).min(h - 1) {
        for x in 1..(gw * cell_size).min(w - 1) {
            let (mut dx, mut dy, mut mag2) = (T::zero(), T::zero(), T::zero());
            for c in 0..img.channels() {
                let gx = img.get(x + 1, y, c) - img.get(x - 1, y, c);
                let gy = img.get(x, y + 1, c) - img.get(x, y - 1, c);
                let m = gx * gx + gy * gy;
                if c == 0 || m > mag2 {
                    dx = gx;
                    dy = gy;
                    mag2 = m;
                }
            }

            let mut best_dot = T::zero();
            let mut best_o = 0;
            for (o, &(u, v)) in units.iter().enumerate() {
                let d = u * dx + v * dy;
                if d > best_dot {
                    best_dot = d;
                    best_o = o;
                } else if -d > best_dot {
                    best_dot = -d;
                    best_o = o + INSENSITIVE_BINS;
                }
            }
            let mag = mag2.sqrt();

            let xp = (T::of_usize(x) + half) / cs - half;
            let yp = (T::of_usize(y) + half) / cs - half;
            let (ixp, iyp) = (xp.floor(), yp.floor());
            let (vx0, vy0) = (xp - ixp, yp - iyp);
            let (vx1, vy1) = (T::one() - vx0, T::one() - vy0);
            let (ix, iy) = (ixp.to_i64().unwrap(), iyp.to_i64().unwrap());

            for (cx, wx) in [(ix, vx1), (ix + 1, vx0)] {
                for (cy, wy) in [(iy, vy1), (iy + 1, vy0)] {
                    if cx >= 0 && cy >= 0 && (cx as usize) < gw && (cy as usize) < gh {
                        let cell = cy as usize * gw + cx as usize;
                        hist[cell * SENSITIVE_BINS + best_o] += wx * wy * mag;
                    }
                }
            }
        }
    }

    let energy: Vec<T> = hist
        .chunks(SENSITIVE_BINS)
        .map(|hc| {
            (0..INSENSITIVE_BINS)
                .map(|o| {
                    let s = hc[o] + hc[o + INSENSITIVE_BINS];
                    s * s
                })
                .sum()
        })
        .collect();
    let energy_at = |cx: i64, cy: i64| -> T {
        if cx < 0 || cy < 0 || cx as usize >= gw || cy as usize >= gh {
            T::zero()
        } else {
            energy[cy as usize * gw + cx as usize]
        }
    };

    let eps = T::of(NORM_EPS);
    let trunc = T::of(TRUNCATION);
    let half_sum = T::of(0.5);
    let texture = T::of(TEXTURE_SCALE);

    for cy in 0..gh {
        for cx in 0..gw {
            let (x, y) = (cx as i64, cy as i64);
            // Blocks whose top-left cell is offset by (0,0), (0,-1), (-1,0), (-1,-1).
            let norms: [T; 4] = [(0, 0), (0, -1), (-1, 0), (-1, -1)].map(|(ox, oy)| {
                let (bx, by) = (x + ox, y + oy);
                let e = energy_at(bx, by) + energy_at(bx + 1, by) + energy_at(bx, by + 1) + energy_at(bx + 1, by + 1);
                T::one() / (e + eps).sqrt()
            });

            let hc = &hist[(cy * gw + cx) * SENSITIVE_BINS..(cy * gw + cx + 1) * SENSITIVE_BINS];
            let i = (cy * gw + cx) * HOG_DIM;
            let feat = &mut out.data[i..i + HOG_DIM];
            let mut t = [T::zero(); 4];

            for o in 0..SENSITIVE_BINS {
                let mut acc = T::zero();
                for j in 0..4 {
                    let hval = (hc[o] * norms[j]).min(trunc);
                    acc += hval;
                    t[j] += hval;
                }
                feat[o] = half_sum * acc;
            }
            for o in 0..INSENSITIVE_BINS {
                let s = hc[o] + hc[o + INSENSITIVE_BINS];
                let acc: T = norms.iter().map(|&n| (s * n).min(trunc)).sum();
                feat[SENSITIVE_BINS + o] = half_sum * acc;
            }
            for j in 0..4 {
                feat[SENSITIVE_BINS + INSENSITIVE_BINS + j] = texture * t[j];
            }
        }
    }
    out
}
