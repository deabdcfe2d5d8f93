//! Energy evaluation, exact labelling by minimum cut, and the detection searches.

pub mod energy;
pub mod graph;
pub mod loss_aug;
pub mod maxflow;
pub mod multi;
pub mod search;

pub use energy::{energy, EnergyMaps};
pub use graph::{build_graph, mincut, CutGraph};
pub use loss_aug::{loss_augmented_detect, ProjectedLabel};
pub use maxflow::FlowGraph;
pub use multi::{detect_multi, MultiDetection};
pub use search::{
    candidate_positions, detect, detection_order, energy_maps, min_energy_labelling, nms, scan, solve_maps, Detection,
};
