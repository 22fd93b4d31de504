//! Adaptive signed-distance sampling: a multi-camera surface scan of the mesh,
//! visibility-signed distances, visual-hull carving, per-point importance weights
//! and the weighted draw of training samples.

mod draw;
mod hull;
mod scan;
mod weights;

pub use draw::{draw_samples, read_samples, tsdf_map, weight_diagnostics_ply, write_samples, SampleRecord, SampleSet};
pub use hull::{mesh_silhouettes, silhouettes_from_views, visual_hull, Silhouette, VoxelGrid};
pub use scan::{scan_directions, scan_mesh, signed_distance, ScanCamera, SurfaceScan};
pub use weights::{compute_weights, thickness_weights, w_normal, SampleWeights};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blueprint::BlueprintError;
use crate::geometry::GeometryError;
use crate::image::ImageError;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("at least 6 scan cameras are required, got {0}")]
    TooFewCameras(usize),
    #[error("the scan produced no surface points")]
    EmptyScan,
    #[error("the visual hull is empty")]
    EmptyHull,
    #[error("all sample weights are zero")]
    ZeroWeights,
    #[error("not a sample file (bad magic)")]
    BadMagic,
    #[error("unsupported sample file version {0}")]
    UnsupportedVersion(u32),
    #[error("sample file truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Blueprint(#[from] BlueprintError),
}

/// Sampling parameters. Distances are in normalized model units (length 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_samples: usize,
    /// Standard deviation of the Gaussian offset applied to surface samples.
    pub surface_sigma: f64,
    /// Share of samples drawn uniformly in the inflated bounding box.
    pub uniform_fraction: f64,
    /// Truncation distance of the signed distance value mapping.
    pub truncation: f64,
    /// Voxels along the longest axis of the visual hull grid.
    pub hull_resolution: usize,
    /// Minimum angle in degrees between two normals for them to count as opposite
    /// sides of a thin part.
    pub thickness_angle_threshold: f64,
    /// Lower clamp of the edge weight.
    pub edge_floor: f64,
    /// Constant share of the hull-distance normal factor.
    pub hull_dist_normal_floor: f64,
    /// Thickness at which the thickness weight saturates at 1.
    pub thickness_scale: f64,
    /// Distances below this are treated as this value in the thickness weight.
    pub dist_floor: f64,
    /// Hull distance, as a fraction of the hull diagonal, at which the hull weight
    /// saturates at 1.
    pub hull_dist_scale: f64,
    /// Whether the thickness weight contributes at all.
    pub thickness: bool,
    /// Number of virtual scan cameras.
    pub scan_cameras: usize,
    /// Scan pixels per model unit.
    pub scan_resolution: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_samples: 22_000,
            surface_sigma: 0.01,
            uniform_fraction: 0.1,
            truncation: 0.1,
            hull_resolution: 128,
            thickness_angle_threshold: 120.0,
            edge_floor: 0.05,
            hull_dist_normal_floor: 0.2,
            thickness_scale: 0.02,
            dist_floor: 0.002,
            hull_dist_scale: 0.1,
            thickness: true,
            scan_cameras: 18,
            scan_resolution: 96.0,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplingError> {
        let positive = [
            ("surface_sigma", self.surface_sigma),
            ("truncation", self.truncation),
            ("thickness_scale", self.thickness_scale),
            ("dist_floor", self.dist_floor),
            ("hull_dist_scale", self.hull_dist_scale),
            ("scan_resolution", self.scan_resolution),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SamplingError::Config(format!("{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.uniform_fraction) {
            return Err(SamplingError::Config("uniform_fraction must be in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.edge_floor) || !(0.0..=1.0).contains(&self.hull_dist_normal_floor) {
            return Err(SamplingError::Config("edge_floor and hull_dist_normal_floor must be in [0, 1]".into()));
        }
        if !(0.0..=180.0).contains(&self.thickness_angle_threshold) {
            return Err(SamplingError::Config("thickness_angle_threshold must be in [0, 180]".into()));
        }
        if self.hull_resolution < 2 || self.n_samples == 0 {
            return Err(SamplingError::Config("hull_resolution must be >= 2 and n_samples >= 1".into()));
        }
        if self.scan_cameras < 6 {
            return Err(SamplingError::TooFewCameras(self.scan_cameras));
        }
        Ok(())
    }
}
