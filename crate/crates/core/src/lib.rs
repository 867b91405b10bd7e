pub mod data;
pub mod decimate;
pub mod fixtures;
pub mod forest;
pub mod mesh;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod player;
pub mod process;
pub mod scenario;
