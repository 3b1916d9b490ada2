//! Gibbsian T-tessellations.
//!
//! Approximation of polygonal landscapes by T-tessellations, simulation of
//! Gibbs models by Metropolis-Hastings-Green local moves, Monte Carlo
//! maximum likelihood fitting and envelope goodness-of-fit tests.

pub mod approximation;
pub mod error;
pub mod geometry;
pub mod gof;
pub mod inference;
pub mod model;
pub mod sampler;
pub mod statistics;
pub mod tessellation;

pub use error::{ApproxError, GeometryError, GofError, InferenceError, ModelError, SamplerError, TessError};
pub use geometry::{BoundingRect, Line, Point, Polygon, Segment};
pub use model::GibbsModel;
pub use statistics::{FeatureSpec, FeatureVector, StatKind};
pub use tessellation::{LocalUpdate, SegEnd, SegmentId, TTess, Violation};
