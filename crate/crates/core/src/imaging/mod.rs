//! Image ingestion, scale pyramids, HOG features and over-segmentation.

pub mod hog;
pub mod pyramid;
pub mod raster;
pub mod segment;

pub use hog::{extract_hog, HogGrid, HOG_DIM};
pub use pyramid::{build_pyramid, FeaturePyramid, PyramidLevel, PyramidParams};
pub use raster::{decode_image, load_image, save_png, RasterImage};
pub use segment::{project_segments, segment_unsupervised, LevelCells, SegmentMap};

use crate::error::Result;
use crate::scalar::Scalar;

/// Everything inference needs from one image: its HOG pyramid and the
/// segment id of every cell at every level.
#[derive(Clone, Debug)]
pub struct ImageFeatures<T> {
    pub pyramid: FeaturePyramid<T>,
    pub cells: Vec<LevelCells>,
}

impl<T: Scalar> ImageFeatures<T> {
    pub fn new(pyramid: FeaturePyramid<T>, seg: &SegmentMap) -> Self {
        let grids: Vec<_> = pyramid.levels.iter().map(|l| (l.hog.grid_w, l.hog.grid_h)).collect();
        let cells = project_segments(seg, &pyramid.geometry(), &grids);
        Self { pyramid, cells }
    }

    /// Builds the pyramid and segment projection for `img`.
    pub fn compute(img: &RasterImage<T>, seg: &SegmentMap, params: &PyramidParams) -> Result<Self> {
        Ok(Self::new(build_pyramid(img, params)?, seg))
    }
}
