//! Semi-automatic segmentation of contrast-enhanced lesions in 3D volumes.
//!
//! Two methods share one post-processing path:
//!
//! * [`balloon`]: a small closed mesh seeded inside the lesion is inflated
//!   until its vertices reach a bright boundary followed by lower intensities.
//! * [`graph`]: rays cast from a seed point through the vertices of a sphere
//!   polyhedron are sampled into a layered graph whose minimum s-t cut gives
//!   the optimal closed surface under a smoothness constraint.
//!
//! Either surface is voxelized ([`metrics::voxelize`]) and measured by voxel
//! count, volume in cm³ and Dice overlap against a reference mask.

pub mod balloon;
pub mod error;
pub mod graph;
pub mod harness;
pub mod io;
pub mod mesh;
pub mod metrics;
pub mod phantom;
pub mod segment;
pub mod volume;

pub use error::*;
pub use mesh::TriangleMesh;
pub use metrics::BinaryMask;
pub use volume::{Axis, Grid, Vec3, Volume, VoxelCoord, WorldPoint};
