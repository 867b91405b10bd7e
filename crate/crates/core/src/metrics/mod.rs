//! Shape metrics, low/high shape ratios and similarity metrics used to gate
//! mesh reduction. None of them depend on the scale of the input.

pub mod bvh;
mod shape;
mod similarity;

use thiserror::Error;

pub use shape::{
    bounding_sphere, compute_shape_metrics, compute_shape_ratios, measure, shape_ratios_flagged, Measured,
    ShapeMetrics, ShapeRatios,
};
pub use similarity::{
    angle_between, compute_similarity, mean_dihedral_deg, sample_surface, SimilarityConfig, SimilarityMetrics,
    MIN_SAMPLES,
};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("degenerate mesh: {0}")]
    Degenerate(&'static str),
    #[error("high-poly {0} is too close to zero to form a ratio")]
    NearZeroDenominator(&'static str),
    #[error("at least {min} samples required, got {0}", min = MIN_SAMPLES)]
    TooFewSamples(usize),
}
