use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("segment shorter than the geometric tolerance")]
    DegenerateSegment,
    #[error("polygon has zero area")]
    DegeneratePolygon,
    #[error("all points coincide")]
    CoincidentPoints,
    #[error("invalid ring: {0}")]
    InvalidRing(String),
}

/// Why a local update or a construction was refused.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TessError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("segment lies outside the window")]
    OutsideWindow,
    #[error("unknown cell {0}")]
    UnknownCell(usize),
    #[error("unknown segment {0}")]
    UnknownSegment(u64),
    #[error("chord does not cross the cell: {0}")]
    ChordMiss(&'static str),
    #[error("chord passes too close to an existing vertex")]
    NearVertex,
    #[error("chord is aligned with an existing segment")]
    Aligned,
    #[error("segment {0} is blocking or has several edges")]
    NotMergeable(u64),
    #[error("flip of segment {0} is not admissible: {1}")]
    NotFlippable(u64, &'static str),
    #[error("window must be convex for this operation")]
    NonConvexWindow,
    #[error("too many lines for exhaustive enumeration ({0} > {1})")]
    TooManyLines(usize, usize),
    #[error("invalid tessellation: {0}")]
    Invalid(String),
    #[error("malformed tessellation file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("unknown statistic `{0}`")]
    UnknownStatistic(String),
    #[error("malformed statistic `{0}`: {1}")]
    BadStatistic(String, String),
    #[error("model has {expected} statistics but theta has {got} components")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("duplicate statistic name `{0}`")]
    DuplicateStatistic(String),
    #[error("model needs at least one statistic")]
    Empty,
    #[error("non-finite parameter")]
    NonFinite,
    #[error("invalid line intensity {0}")]
    BadIntensity(f64),
    #[error("malformed model file: {0}")]
    Format(String),
    #[error(transparent)]
    Tess(#[from] TessError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("invalid chain configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Tess(#[from] TessError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("invalid fitting configuration: {0}")]
    Config(String),
    #[error("non-finite objective")]
    NonFinite,
    #[error("singular matrix: {0}")]
    Singular(&'static str),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GofError {
    #[error("r grids differ")]
    GridMismatch,
    #[error("invalid envelope configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApproxError {
    #[error("cannot parse landscape: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid landscape: {0}")]
    Landscape(String),
    #[error("no sides left after dropping slivers")]
    NoSides,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Tess(#[from] TessError),
    #[error("repair did not finish within {0} iterations")]
    RepairLimit(usize),
    #[error("repaired arrangement is still invalid: {0}")]
    Unrepaired(String),
}
