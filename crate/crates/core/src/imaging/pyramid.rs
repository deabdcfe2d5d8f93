use crate::error::{Error, Result};
use crate::geometry::PyramidGeometry;
use crate::imaging::hog::{extract_hog, HogGrid};
use crate::imaging::RasterImage;
use crate::scalar::Scalar;

/// Scale-space sampling parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PyramidParams {
    pub scale_step: f64,
    pub n_levels: usize,
    pub cell_size: usize,
}

impl Default for PyramidParams {
    fn default() -> Self {
        Self {
            scale_step: 2f64.powf(-0.25),
            n_levels: 11,
            cell_size: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PyramidLevel<T> {
    pub scale: f64,
    pub width: usize,
    pub height: usize,
    pub hog: HogGrid<T>,
}

/// HOG grids of an image at a decreasing sequence of scales; level 0 is the input resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePyramid<T> {
    pub cell_size: usize,
    pub base_width: usize,
    pub base_height: usize,
    pub levels: Vec<PyramidLevel<T>>,
}

impl<T: Scalar> FeaturePyramid<T> {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn geometry(&self) -> PyramidGeometry {
        PyramidGeometry::new(
            self.base_width,
            self.base_height,
            self.cell_size,
            self.levels.iter().map(|l| l.scale).collect(),
        )
    }
}

/// Builds the pyramid by repeated bilinear resampling with ratio `scale_step`.
///
/// Level `k` has scale `scale_step^k` and dimensions `round(base * scale)`.
/// Construction stops early at the last level whose grid holds at least one
/// cell; the returned pyramid's level count reports how many were built.
pub fn build_pyramid<T: Scalar>(img: &RasterImage<T>, params: &PyramidParams) -> Result<FeaturePyramid<T>> {
    let PyramidParams {
        scale_step,
        n_levels,
        cell_size,
    } = *params;
    if !(scale_step > 0.0 && scale_step < 1.0) {
        return Err(Error::argument(format!("scale step {scale_step} outside (0, 1)")));
    }
    if n_levels == 0 {
        return Err(Error::argument("pyramid needs at least one level"));
    }
    if cell_size < 2 {
        return Err(Error::argument("cell size must be at least 2"));
    }
    if img.width() < cell_size || img.height() < cell_size {
        return Err(Error::argument(format!(
            "{}x{} image is smaller than one {cell_size}px cell",
            img.width(),
            img.height()
        )));
    }

    let mut levels = Vec::with_capacity(n_levels);
    let mut current = img.clone();
    for k in 0..n_levels {
        let scale = scale_step.powi(k as i32);
        if k > 0 {
            let w = (img.width() as f64 * scale).round() as usize;
            let h = (img.height() as f64 * scale).round() as usize;
            if w < cell_size || h < cell_size {
                log::debug!("pyramid truncated at {k} of {n_levels} levels");
                break;
            }
            current = resample_bilinear(&current, w, h, 1.0 / scale_step);
        }
        levels.push(PyramidLevel {
            scale,
            width: current.width(),
            height: current.height(),
            hog: extract_hog(&current, cell_size),
        });
    }
    Ok(FeaturePyramid {
        cell_size,
        base_width: img.width(),
        base_height: img.height(),
        levels,
    })
}

/// Resamples to `w × h`, mapping destination centers to source coordinates
/// `(x + 0.5) * ratio - 0.5` with edge clamping.
pub fn resample_bilinear<T: Scalar>(src: &RasterImage<T>, w: usize, h: usize, ratio: f64) -> RasterImage<T> {
    let (sw, sh) = (src.width(), src.height());
    let axis = |dst: usize, n: usize| -> (usize, usize, T) {
        let s = ((dst as f64 + 0.5) * ratio - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, T::of(s - i0 as f64))
    };
    let xs: Vec<_> = (0..w).map(|x| axis(x, sw)).collect();
    let ys: Vec<_> = (0..h).map(|y| axis(y, sh)).collect();
    RasterImage::from_fn(w, h, src.channels(), |x, y, c| {
        let (x0, x1, fx) = xs[x];
        let (y0, y1, fy) = ys[y];
        let top = src.get(x0, y0, c) * (T::one() - fx) + src.get(x1, y0, c) * fx;
        let bottom = src.get(x0, y1, c) * (T::one() - fx) + src.get(x1, y1, c) * fx;
        top * (T::one() - fy) + bottom * fy
    })
    .expect("resampled dimensions are nonzero")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> RasterImage<f64> {
        RasterImage::from_fn(w, h, 1, |x, y, _| ((x * 7 + y * 3) % 23) as f64 / 23.0).unwrap()
    }

    #[test]
    fn default_pyramid_on_vga() {
        let img = RasterImage::<f32>::filled(640, 480, 1, 0.5).unwrap();
        let pyr = build_pyramid(&img, &PyramidParams::default()).unwrap();
        assert_eq!(pyr.num_levels(), 11);
        assert_eq!((pyr.levels[0].hog.grid_w, pyr.levels[0].hog.grid_h), (80, 60));
        assert_eq!(pyr.levels[0].scale, 1.0);
        assert!((pyr.levels[10].scale - 2f64.powf(-2.5)).abs() < 1e-12);
        for pair in pyr.levels.windows(2) {
            assert!(pair[1].scale < pair[0].scale);
        }
        for l in &pyr.levels {
            assert_eq!(l.hog.grid_w, l.width / 8);
            assert_eq!(l.hog.grid_h, l.height / 8);
        }
    }

    #[test]
    fn single_level_is_identity_scale() {
        let img = ramp(40, 32);
        let p = PyramidParams {
            n_levels: 1,
            ..Default::default()
        };
        let pyr = build_pyramid(&img, &p).unwrap();
        assert_eq!(pyr.num_levels(), 1);
        assert_eq!(pyr.levels[0].hog, extract_hog(&img, 8));
    }

    #[test]
    fn truncates_when_levels_shrink_below_a_cell() {
        let img = ramp(64, 64);
        let p = PyramidParams {
            scale_step: 0.5,
            n_levels: 10,
            cell_size: 8,
        };
        let pyr = build_pyramid(&img, &p).unwrap();
        assert_eq!(pyr.num_levels(), 4);
        assert_eq!(pyr.levels.last().unwrap().width, 8);
    }

    #[test]
    fn rejects_bad_parameters() {
        let img = ramp(64, 64);
        for step in [0.0, 1.0, 1.5] {
            let p = PyramidParams {
                scale_step: step,
                ..Default::default()
            };
            assert!(build_pyramid(&img, &p).is_err());
        }
        let small = ramp(6, 30);
        assert!(build_pyramid(&small, &PyramidParams::default()).is_err());
    }

    #[test]
    fn bilinear_halving_averages_pairs() {
        let img = RasterImage::<f64>::from_fn(4, 2, 1, |x, _, _| x as f64).unwrap();
        let half = resample_bilinear(&img, 2, 1, 2.0);
        assert_eq!(half.data(), &[0.5, 2.5]);
    }
}
