//! Grid evaluation of a trained field, iso-surface extraction, floating-artifact
//! removal and reconstruction quality metrics.

mod components;
pub mod fixtures;
mod mc;
mod metrics;
pub(crate) mod tables;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blueprint::{BlueprintError, ViewGeometry, ViewSet};
use crate::field::{FieldError, Network, PixelAlignedField};
use crate::geometry::{Aabb, OrthoView, TriangleMesh, Vec3, ViewKind};

pub use components::{components, largest_component};
pub use mc::{marching_cubes, ISO_NUDGE};
pub use metrics::{eval_metrics, EvalConfig, Metrics};

/// Accepted deviation of a blueprint's largest view dimension from the size the
/// network was trained on; inside the band the views are rescaled.
pub const RESIZE_TOLERANCE: f64 = 0.2;

/// Voxels of padding around the bounding box on every side.
pub const GRID_PADDING: usize = 2;

#[derive(Debug, Error)]
pub enum ReconstructError {
    #[error("grid needs at least 2 nodes per axis, got {0:?}")]
    Degenerate([usize; 3]),
    #[error("invalid reconstruction setting: {0}")]
    Config(String),
    #[error("cannot pick the largest component of an empty mesh")]
    EmptyMesh,
    #[error("the view set is not finalized: {0}; confirm the view labels in the review UI first")]
    Unfinalized(String),
    #[error(
        "largest view dimension is {largest} px but the network was trained on {trained} px; \
         views are only rescaled within 20% of that size ({min}..={max} px). Re-export the \
         blueprint at a matching size or crop the views more tightly in the review UI"
    )]
    SizeMismatch { largest: usize, trained: usize, min: usize, max: usize },
    #[error("malformed grid file: {0}")]
    MalformedGrid(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Blueprint(#[from] BlueprintError),
}

/// Node values on a regular grid; node `(i, j, k)` sits at `origin + (i, j, k)·spacing`
/// and X varies fastest in `values`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarGrid {
    pub dims: [usize; 3],
    pub origin: Vec3,
    pub spacing: f64,
    pub values: Vec<f32>,
}

impl ScalarGrid {
    /// Evaluates `f` at every node.
    pub fn from_fn(dims: [usize; 3], origin: Vec3, spacing: f64, f: impl Fn(&Vec3) -> f64 + Sync) -> Self {
        let grid = Self { dims, origin, spacing, values: Vec::new() };
        let values = (0..dims[0] * dims[1] * dims[2]).into_par_iter().map(|n| f(&grid.node(n)) as f32).collect();
        Self { values, ..grid }
    }

    /// Grid with cubical voxels covering `bounds` inflated by [`GRID_PADDING`] voxels,
    /// `resolution` voxels across the X extent of `bounds`; values are zero.
    pub fn covering(bounds: &Aabb, resolution: usize) -> Result<Self, ReconstructError> {
        let ext = bounds.extent();
        if resolution < 2 {
            return Err(ReconstructError::Config(format!("grid resolution must be at least 2, got {resolution}")));
        }
        if !(ext.x > 0.0 && ext.y >= 0.0 && ext.z >= 0.0) {
            return Err(ReconstructError::Config("bounding box must have positive length".into()));
        }
        let spacing = ext.x / resolution as f64;
        let dims = [0, 1, 2].map(|a| {
            let cells = if a == 0 { resolution } else { (ext[a] / spacing - 1e-9).ceil().max(1.0) as usize };
            cells + 2 * GRID_PADDING + 1
        });
        // Centred on the box; along X this puts the first node exactly GRID_PADDING
        // voxels before the box.
        let span = Vec3::new((dims[0] - 1) as f64, (dims[1] - 1) as f64, (dims[2] - 1) as f64) * spacing;
        let origin = bounds.center() - span / 2.0;
        Ok(Self { dims, origin, spacing, values: vec![0.0; dims[0] * dims[1] * dims[2]] })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    /// Position of the node with flat index `n`.
    pub fn node(&self, n: usize) -> Vec3 {
        let i = n % self.dims[0];
        let j = (n / self.dims[0]) % self.dims[1];
        let k = n / (self.dims[0] * self.dims[1]);
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.spacing
    }

    pub fn bounds(&self) -> Aabb {
        let far = Vec3::new(self.dims[0] as f64 - 1.0, self.dims[1] as f64 - 1.0, self.dims[2] as f64 - 1.0) * self.spacing;
        Aabb::new(self.origin, self.origin + far)
    }

    /// Trilinear interpolation, clamped to the grid.
    pub fn sample(&self, p: &Vec3) -> f64 {
        let mut base = [0usize; 3];
        let mut frac = [0f64; 3];
        for a in 0..3 {
            let x = ((p[a] - self.origin[a]) / self.spacing).clamp(0.0, (self.dims[a] - 1) as f64);
            let b = (x.floor() as usize).min(self.dims[a].saturating_sub(2));
            base[a] = b;
            frac[a] = x - b as f64;
        }
        let mut acc = 0.0;
        for c in 0..8 {
            let o = [c & 1, (c >> 1) & 1, (c >> 2) & 1];
            let w: f64 = (0..3).map(|a| if o[a] == 1 { frac[a] } else { 1.0 - frac[a] }).product();
            if w > 0.0 {
                acc += w * self.values[self.index(base[0] + o[0], base[1] + o[1], base[2] + o[2])] as f64;
            }
        }
        acc
    }

    /// Little-endian dump: `SGRD`, three `u32` node counts, then `f32` values with X fastest.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.values.len());
        out.extend_from_slice(b"SGRD");
        for d in self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses a [`ScalarGrid::to_bytes`] dump. The file stores no placement, so the
    /// grid gets unit spacing at the origin.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ReconstructError> {
        if bytes.len() < 16 || &bytes[..4] != b"SGRD" {
            return Err(ReconstructError::MalformedGrid("missing SGRD header".into()));
        }
        let dim = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes")) as usize;
        let dims = [dim(0), dim(1), dim(2)];
        let n = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        if n.and_then(|n| n.checked_mul(4)).map(|b| b + 16) != Some(bytes.len()) {
            return Err(ReconstructError::MalformedGrid(format!("{} bytes do not hold a {dims:?} grid", bytes.len())));
        }
        let values = bytes[16..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        Ok(Self { dims, origin: Vec3::zeros(), spacing: 1.0, values })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructConfig {
    /// Voxels across the X extent; the other axes follow with cubical voxels.
    pub resolution: usize,
    /// Extraction threshold on the field value, strictly inside (0, 1).
    pub iso: f64,
    /// Drop every connected component except the one enclosing the most volume.
    pub keep_largest: bool,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self { resolution: 256, iso: 0.5, keep_largest: true }
    }
}

impl ReconstructConfig {
    pub fn validate(&self) -> Result<(), ReconstructError> {
        if !(self.iso > 0.0 && self.iso < 1.0) {
            return Err(ReconstructError::Config(format!("iso must lie strictly between 0 and 1, got {}", self.iso)));
        }
        if self.resolution < 2 {
            return Err(ReconstructError::Config(format!("resolution must be at least 2, got {}", self.resolution)));
        }
        Ok(())
    }
}

/// Field values at every node of the padded grid over `bounds`.
pub fn evaluate_grid(field: &PixelAlignedField<'_, f32>, bounds: &Aabb, resolution: usize) -> Result<ScalarGrid, ReconstructError> {
    let mut grid = ScalarGrid::covering(bounds, resolution)?;
    let points: Vec<Vec3> = (0..grid.len()).map(|n| grid.node(n)).collect();
    grid.values = field.query_batch(&points).into_iter().map(|o| o.value as f32).collect();
    Ok(grid)
}

/// Rescales the views to the trained input size when the largest view dimension is
/// within [`RESIZE_TOLERANCE`] of it. One factor applies to the whole sheet so the
/// relative view proportions, and hence the model box, are kept.
pub fn fit_to_trained_size(views: &ViewSet, trained: usize) -> Result<ViewGeometry, ReconstructError> {
    if let Err(errors) = views.descriptor().validate_finalized() {
        let text = errors.iter().map(|e| format!("{}: {}", e.field, e.message)).collect::<Vec<_>>().join("; ");
        return Err(ReconstructError::Unfinalized(text));
    }
    let g = views.geometry()?;
    let largest = g.images.iter().map(|i| i.width().max(i.height())).max().unwrap_or(0);
    let ratio = largest as f64 / trained as f64;
    if (ratio - 1.0).abs() > RESIZE_TOLERANCE + 1e-12 {
        return Err(ReconstructError::SizeMismatch {
            largest,
            trained,
            min: (trained as f64 * (1.0 - RESIZE_TOLERANCE)).ceil() as usize,
            max: (trained as f64 * (1.0 + RESIZE_TOLERANCE)).floor() as usize,
        });
    }
    if largest == trained {
        return Ok(g);
    }
    let scale = 1.0 / ratio;
    let images = g.images.map(|img| {
        let w = ((img.width() as f64 * scale).round() as usize).max(1);
        let h = ((img.height() as f64 * scale).round() as usize).max(1);
        img.resize(w, h)
    });
    let views = ViewKind::ALL.map(|k| OrthoView::fitted(k, &g.bounds, images[k.index()].width(), images[k.index()].height()));
    Ok(ViewGeometry { bounds: g.bounds, views, images })
}

/// Grid and surface of one reconstruction.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub grid: ScalarGrid,
    pub mesh: TriangleMesh,
}

/// End-to-end reconstruction of a finalized view set.
pub fn reconstruct(views: &ViewSet, net: &Network<f32>, cfg: &ReconstructConfig) -> Result<Reconstruction, ReconstructError> {
    cfg.validate()?;
    let geometry = fit_to_trained_size(views, net.config().encoder.max_input_dim)?;
    let field = PixelAlignedField::build(net, &geometry)?;
    let grid = evaluate_grid(&field, &geometry.bounds, cfg.resolution)?;
    let mesh = extract(&grid, cfg)?;
    Ok(Reconstruction { grid, mesh })
}

/// Marching cubes at `cfg.iso`, followed by the largest-component filter when enabled.
pub fn extract(grid: &ScalarGrid, cfg: &ReconstructConfig) -> Result<TriangleMesh, ReconstructError> {
    cfg.validate()?;
    let mesh = marching_cubes(grid, cfg.iso as f32)?;
    if cfg.keep_largest && !mesh.is_empty() {
        largest_component(&mesh)
    } else {
        Ok(mesh)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_grid_has_cubical_voxels_and_padding() {
        let b = Aabb::new(Vec3::new(-0.5, -0.2, -0.15), Vec3::new(0.5, 0.2, 0.15));
        let g = ScalarGrid::covering(&b, 100).unwrap();
        assert_eq!(g.dims, [105, 45, 35]);
        assert!((g.spacing - 0.01).abs() < 1e-15);
        assert!((g.origin.x + 0.52).abs() < 1e-12);
        let gb = g.bounds();
        assert!((gb.center() - b.center()).norm() < 1e-12);
        assert!(gb.min.y <= b.min.y - 2.0 * g.spacing + 1e-12 && gb.max.z >= b.max.z + 2.0 * g.spacing - 1e-12);
        assert!(ScalarGrid::covering(&b, 1).is_err());
    }

    #[test]
    fn trilinear_sampling_reproduces_linear_functions() {
        let f = |p: &Vec3| 0.3 + 0.2 * p.x - 0.1 * p.y + 0.05 * p.z;
        let g = ScalarGrid::from_fn([5, 4, 3], Vec3::new(-1.0, -1.0, -1.0), 0.5, f);
        for p in [Vec3::new(-0.3, 0.1, -0.6), Vec3::new(0.99, 0.49, -0.01), Vec3::new(-1.0, -1.0, -1.0)] {
            assert!((g.sample(&p) - f(&p)).abs() < 1e-6);
        }
    }

    #[test]
    fn grid_dump_round_trips() {
        let g = ScalarGrid::from_fn([3, 2, 2], Vec3::zeros(), 1.0, |p| p.x * 0.25 + p.z);
        let bytes = g.to_bytes();
        assert_eq!(&bytes[..4], b"SGRD");
        assert_eq!(bytes.len(), 16 + 4 * 12);
        assert_eq!(ScalarGrid::from_bytes(&bytes).unwrap().values, g.values);
        assert!(ScalarGrid::from_bytes(&bytes[..20]).is_err());
    }

    #[test]
    fn iso_outside_unit_interval_is_rejected() {
        for iso in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(ReconstructConfig { iso, ..Default::default() }.validate().is_err());
        }
        assert!(ReconstructConfig::default().validate().is_ok());
    }
}
