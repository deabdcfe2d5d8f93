//! Occlusion-aware detection and segmentation.
//!
//! A label is a box position on a HOG pyramid, a viewpoint, and a visible /
//! occluded bit per box cell. Its energy combines two linear filters, a
//! label prior, a truncation cost, pairwise smoothing and concave clique
//! potentials over over-segmentation regions; the best labelling at each
//! location is found exactly by a minimum cut. Weights are learned with an
//! n-slack cutting-plane structured SVM.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix it to `f64`.

pub mod config;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod imaging;
pub mod inference;
pub mod learning;
pub mod model;
pub mod scalar;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use geometry::{PixelRect, PyramidGeometry};
pub use scalar::Scalar;

pub type Image = imaging::RasterImage<f64>;
pub type Features = imaging::ImageFeatures<f64>;
pub type Weights = model::WeightVector<f64>;
pub type TrainedModel = model::Model<f64>;
