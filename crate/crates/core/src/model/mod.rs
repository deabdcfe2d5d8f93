//! Structured labels, weight layout, joint features and clique potentials.

pub mod features;
pub mod hop;
pub mod label;
pub mod layout;
pub mod weights;

pub use features::{assemble_features, grid_edges, BoxCells, JointFeature};
pub use hop::{clique_stats, is_concave, second_differences, HopEnvelope};
pub use label::{rle_decode, rle_encode, rle_from_str, rle_to_string, Label, Position, ViewpointShape};
pub use layout::{BlockLayout, ModelLayout};
pub use weights::{pack_weights, unpack_weights, BlockView, Model, WeightVector};
