use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("file not found: {0}")]
    Missing(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid header: {0}")]
    Header(String),
    #[error("payload size mismatch: expected {expected} elements, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("spacing must be positive and finite, got {0:?}")]
    Spacing([f64; 3]),
    #[error("dimensions must be positive, got {0:?}")]
    Dims([usize; 3]),
    #[error("unsupported dtype '{0}'")]
    Dtype(String),
    #[error("value {value} at voxel {index} not representable as {dtype}")]
    Unrepresentable {
        value: f32,
        index: usize,
        dtype: &'static str,
    },
    #[error("unrecognized volume format: {0}")]
    Format(String),
}

#[derive(Debug, Error)]
pub enum PhantomError {
    #[error("invalid phantom spec: {0}")]
    Spec(String),
    #[error("phantom exceeds grid bounds (needs {needed_mm:.2} mm on axis {axis}, grid allows {limit_mm:.2} mm)")]
    OutOfBounds {
        axis: usize,
        needed_mm: f64,
        limit_mm: f64,
    },
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("radius must be positive, got {0}")]
    Radius(f64),
    #[error("target vertex count must be at least 12, got {0}")]
    TargetCount(usize),
    #[error("face {face} references vertex {index} out of range")]
    IndexOutOfRange { face: usize, index: usize },
    #[error("edge ({0}, {1}) is not shared by exactly two faces")]
    NonManifold(usize, usize),
    #[error("face {0} is degenerate")]
    DegenerateFace(usize),
    #[error("vertex {0} has no incident face")]
    IsolatedVertex(usize),
    #[error("vertex {0} coincides with the mesh center")]
    VertexAtCenter(usize),
    #[error("edge split budget of {0} exhausted")]
    SplitBudget(usize),
    #[error("max edge length must be positive, got {0}")]
    MaxEdge(f64),
    #[error("mesh parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Error)]
pub enum BalloonError {
    #[error("invalid outline: {0}")]
    Outline(String),
    #[error("invalid balloon parameter: {0}")]
    Params(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid ray graph spec: {0}")]
    Spec(String),
    #[error("delta {delta} out of range for {nodes_per_ray} nodes per ray")]
    Delta { delta: usize, nodes_per_ray: usize },
    #[error("seed {0:?} lies outside the volume")]
    SeedOutOfBounds([f64; 3]),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("mask grids differ: {0:?} vs {1:?}")]
    GridMismatch(crate::volume::Grid, crate::volume::Grid),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Failure of a full segmentation run, attributed to the pipeline stage.
#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("initialization: {0}")]
    Init(String),
    #[error("balloon: {0}")]
    Balloon(#[from] BalloonError),
    #[error("graph: {0}")]
    Graph(#[from] GraphError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("parameters: {0}")]
    Params(String),
}

impl SegmentError {
    pub fn stage(&self) -> &'static str {
        match self {
            SegmentError::Init(_) => "initialization",
            SegmentError::Balloon(_) => "balloon",
            SegmentError::Graph(_) => "graph",
            SegmentError::Metrics(_) => "metrics",
            SegmentError::Params(_) => "parameters",
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("no successful records to summarize")]
    NoSuccessfulRecords,
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error(transparent)]
    Phantom(#[from] PhantomError),
}
