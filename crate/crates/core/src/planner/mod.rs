//! Planning: Dubins references for the controller, the learned next-target
//! model, and its weights file.

mod grid;
mod nn;
mod reference;
mod session;
mod weights;

pub use grid::{rasterize, GridMap};
pub use nn::{
    arch, cdm_forward, decode_next_target, encode_obstacles, encode_reference, lstm_cell, lstm_sequence, reference_sequence, resample,
    Arch, BatchNorm, Conv2d, FeatureMap, Linear, Lstm, ModelWeights,
};
pub use reference::{fallback_plan, plan_reference, RefTraj, ReferenceConfig};
pub use session::{FallbackPlanner, NeuralPlanner, Planner};
pub use weights::{load_weights, tensor_table, weights_to_json, Tensor, FORMAT_VERSION};
