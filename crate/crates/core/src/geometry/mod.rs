//! Meshes, orthographic cameras, rasterization, nearest-neighbor search and
//! inside/outside classification.

mod camera;
pub mod fixtures;
mod io;
mod kdtree;
mod mesh;
mod parity;
mod raster;

pub use camera::{OrthoView, ViewKind};
pub use io::{load_mesh, save_mesh, write_colored_points_ply, MeshFormat};
pub use kdtree::KdTree;
pub use mesh::{normalize_mesh, Aabb, Similarity, TriangleMesh, Vec3};
pub use parity::{ray_parity_inside, InsideTester};
pub use raster::{render_view, Render};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("mesh has zero extent along the length axis")]
    DegenerateMesh,
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("triangle {triangle} references a missing vertex")]
    IndexOutOfRange { triangle: usize },
    #[error("mesh contains non-finite coordinates")]
    NonFinite,
    #[error("group id count does not match triangle count")]
    GroupMismatch,
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
}
