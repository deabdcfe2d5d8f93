//! Detection and segmentation metrics, mask utilities, synthetic data and file formats.

pub mod dataset;
pub mod mask;
pub mod metrics;
pub mod svg;
pub mod synth;

pub use dataset::{read_annotations, read_detections, read_mask, write_dataset, write_detections, Annotation, DetectionRecord};
pub use mask::{rasterize_cells, refine_mask, PixelMask};
pub use metrics::{fppi_recall, voc_seg_error, EvalCurve, ScoredBox, SegError};
pub use svg::{overlay_svg, OverlayItem};
pub use synth::{gen_synthetic, render_scene, Scene, SynthConfig, SynthImage, SynthObject, Texture};
