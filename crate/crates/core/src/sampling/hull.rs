use crate::blueprint::{silhouette_mask, ViewSet, DEFAULT_BLANK_THRESHOLD};
use crate::geometry::{render_view, Aabb, GeometryError, OrthoView, TriangleMesh, Vec3, ViewKind};
use crate::image::GrayImage;

use super::SamplingError;

/// Regular occupancy grid with cubical voxels.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    /// Voxel counts along X, Y, Z.
    pub dims: [usize; 3],
    /// Minimum corner of voxel `(0, 0, 0)`.
    pub origin: Vec3,
    pub spacing: f64,
    pub occupied: Vec<bool>,
}

impl VoxelGrid {
    /// Empty grid covering `bounds` with at most `resolution` voxels along its longest side.
    pub fn covering(bounds: &Aabb, resolution: usize) -> Self {
        let ext = bounds.extent();
        let spacing = ext.max() / resolution as f64;
        let dims = [0, 1, 2].map(|a| ((ext[a] / spacing).ceil() as usize).max(1));
        let size = Vec3::new(dims[0] as f64, dims[1] as f64, dims[2] as f64) * spacing;
        let origin = bounds.center() - size / 2.0;
        Self { dims, origin, spacing, occupied: vec![false; dims[0] * dims[1] * dims[2]] }
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn index(&self, [i, j, k]: [usize; 3]) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    pub fn coords(&self, index: usize) -> [usize; 3] {
        let i = index % self.dims[0];
        let j = (index / self.dims[0]) % self.dims[1];
        let k = index / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    pub fn center(&self, [i, j, k]: [usize; 3]) -> Vec3 {
        self.origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.spacing
    }

    /// Voxel containing `p`, if inside the grid.
    pub fn locate(&self, p: &Vec3) -> Option<[usize; 3]> {
        let mut out = [0; 3];
        for a in 0..3 {
            let f = (p[a] - self.origin[a]) / self.spacing;
            if !(f >= 0.0 && f < self.dims[a] as f64) {
                return None;
            }
            out[a] = f as usize;
        }
        Some(out)
    }

    pub fn get(&self, c: [usize; 3]) -> bool {
        self.occupied[self.index(c)]
    }

    pub fn count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    pub fn bounds(&self) -> Aabb {
        let size = Vec3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64) * self.spacing;
        Aabb::new(self.origin, self.origin + size)
    }

    /// Bounds of the occupied voxel cubes.
    pub fn occupied_bounds(&self) -> Option<Aabb> {
        let mut out: Option<Aabb> = None;
        for (idx, _) in self.occupied.iter().enumerate().filter(|(_, &o)| o) {
            let c = self.center(self.coords(idx));
            let half = Vec3::repeat(self.spacing / 2.0);
            let b = Aabb::new(c - half, c + half);
            out = Some(match out {
                None => b,
                Some(a) => Aabb::new(a.min.inf(&b.min), a.max.sup(&b.max)),
            });
        }
        out
    }

    /// Centers of occupied voxels with at least one empty (or out-of-grid) face neighbor.
    pub fn boundary_points(&self) -> Vec<Vec3> {
        let mut out = Vec::new();
        for idx in 0..self.len() {
            if !self.occupied[idx] {
                continue;
            }
            let c = self.coords(idx);
            let exposed = (0..3).any(|a| {
                [-1i64, 1].iter().any(|&s| {
                    let n = c[a] as i64 + s;
                    if n < 0 || n >= self.dims[a] as i64 {
                        return true;
                    }
                    let mut nc = c;
                    nc[a] = n as usize;
                    !self.get(nc)
                })
            });
            if exposed {
                out.push(self.center(c));
            }
        }
        out
    }
}

/// A silhouette mask (values > 0.5 are inside) seen through `view`.
#[derive(Clone, Debug)]
pub struct Silhouette {
    pub view: OrthoView,
    pub mask: GrayImage,
}

impl Silhouette {
    fn contains(&self, p: &Vec3) -> bool {
        let (u, v, _) = self.view.project(p);
        if !(u >= 0.0 && v >= 0.0 && u < self.mask.width() as f64 && v < self.mask.height() as f64) {
            return false;
        }
        self.mask.get(u as usize, v as usize) > 0.5
    }
}

/// Carves a voxel grid over `bounds` (plus one voxel of padding): a voxel is kept iff
/// its center projects inside every silhouette.
pub fn visual_hull(silhouettes: &[Silhouette], bounds: &Aabb, resolution: usize) -> Result<VoxelGrid, SamplingError> {
    if silhouettes.is_empty() || silhouettes.iter().any(|s| s.mask.data().iter().all(|&v| v <= 0.5)) {
        return Err(SamplingError::EmptyHull);
    }
    let pad = bounds.extent().max() / resolution as f64;
    let mut grid = VoxelGrid::covering(&bounds.inflate(pad), resolution + 2);
    for idx in 0..grid.len() {
        let c = grid.center(grid.coords(idx));
        grid.occupied[idx] = silhouettes.iter().all(|s| s.contains(&c));
    }
    if grid.count() == 0 {
        return Err(SamplingError::EmptyHull);
    }
    Ok(grid)
}

/// Silhouettes of a finalized view set: each drawing's filled outer contour placed
/// with the cameras implied by the view sizes.
pub fn silhouettes_from_views(views: &ViewSet) -> Result<(Aabb, Vec<Silhouette>), SamplingError> {
    let g = views.geometry()?;
    let s = g
        .views
        .iter()
        .zip(&g.images)
        .map(|(view, img)| Silhouette { view: view.clone(), mask: silhouette_mask(img, DEFAULT_BLANK_THRESHOLD) })
        .collect();
    Ok((g.bounds, s))
}

/// Coverage masks of the four canonical views rendered at `resolution` pixels per unit.
pub fn mesh_silhouettes(mesh: &TriangleMesh, resolution: f64) -> Result<Vec<Silhouette>, SamplingError> {
    let bounds = mesh.bounds().ok_or(GeometryError::EmptyMesh)?;
    ViewKind::ALL
        .iter()
        .map(|&k| {
            let view = OrthoView::canonical(k, &bounds, resolution, 1);
            let r = render_view(mesh, &view)?;
            Ok(Silhouette { view, mask: r.mask })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fixtures::box_mesh;
    use crate::geometry::KdTree;
    use crate::sampling::scan_mesh;

    fn rect_silhouettes(b: &Aabb, res: f64, front_back: impl Fn(f64, f64) -> bool) -> Vec<Silhouette> {
        ViewKind::ALL
            .iter()
            .map(|&k| {
                let view = OrthoView::canonical(k, b, res, 0);
                let (w, h) = view.image_size();
                let mask = GrayImage::from_fn(w, h, |x, y| {
                    if matches!(k, ViewKind::Front | ViewKind::Back) {
                        let p = view.unproject(x as f64 + 0.5, y as f64 + 0.5, 0.0);
                        if front_back(p.y, p.z) { 1.0 } else { 0.0 }
                    } else {
                        1.0
                    }
                });
                Silhouette { view, mask }
            })
            .collect()
    }

    #[test]
    fn grid_index_round_trip() {
        let g = VoxelGrid::covering(&Aabb::new(Vec3::new(-1.0, -0.5, 0.0), Vec3::new(1.0, 0.5, 0.25)), 16);
        assert_eq!(g.dims, [16, 8, 2]);
        for idx in [0, 5, 100, g.len() - 1] {
            let c = g.coords(idx);
            assert_eq!(g.index(c), idx);
            assert_eq!(g.locate(&g.center(c)), Some(c));
        }
        assert_eq!(g.locate(&Vec3::new(5.0, 0.0, 0.0)), None);
    }

    #[test]
    fn box_silhouettes_carve_the_box() {
        let b = Aabb::new(Vec3::new(-0.5, -0.2, -0.15), Vec3::new(0.5, 0.2, 0.15));
        let hull = visual_hull(&rect_silhouettes(&b, 100.0, |_, _| true), &b, 64).unwrap();
        let ob = hull.occupied_bounds().unwrap();
        for a in 0..3 {
            assert!((ob.min[a] - b.min[a]).abs() <= hull.spacing);
            assert!((ob.max[a] - b.max[a]).abs() <= hull.spacing);
        }
        for idx in 0..hull.len() {
            let c = hull.center(hull.coords(idx));
            assert_eq!(hull.occupied[idx], b.contains(&c), "{c:?}");
        }
    }

    #[test]
    fn circle_and_rectangles_make_a_cylinder() {
        let b = Aabb::new(Vec3::new(-0.5, -0.2, -0.2), Vec3::new(0.5, 0.2, 0.2));
        let sil = rect_silhouettes(&b, 200.0, |y, z| y * y + z * z <= 0.04);
        let hull = visual_hull(&sil, &b, 64).unwrap();
        let mut wrong = 0;
        for idx in 0..hull.len() {
            let c = hull.center(hull.coords(idx));
            let r = (c.y * c.y + c.z * c.z).sqrt();
            let inside = c.x.abs() < 0.5 && r <= 0.2;
            if hull.occupied[idx] != inside {
                // Only voxels within one voxel of the analytic surface may disagree.
                assert!((r - 0.2).abs() <= hull.spacing || (c.x.abs() - 0.5).abs() <= hull.spacing, "{c:?}");
                wrong += 1;
            }
        }
        assert!(wrong < hull.count() / 20);
    }

    #[test]
    fn scan_points_lie_in_their_hull() {
        let mesh = crate::geometry::fixtures::car_proxy();
        let sil = mesh_silhouettes(&mesh, 96.0).unwrap();
        let hull = visual_hull(&sil, &mesh.bounds().unwrap(), 48).unwrap();
        let scan = scan_mesh(&mesh, 18, 48.0).unwrap();
        let occupied: Vec<Vec3> = (0..hull.len()).filter(|&i| hull.occupied[i]).map(|i| hull.center(hull.coords(i))).collect();
        let tree = KdTree::build(&occupied).unwrap();
        let limit = hull.spacing * 3f64.sqrt();
        for p in &scan.points {
            let inside = hull.locate(p).is_some_and(|c| hull.get(c));
            assert!(inside || tree.nearest(p).1 <= limit, "{p:?}");
        }
    }

    #[test]
    fn empty_silhouette_is_an_error() {
        let b = Aabb::new(Vec3::repeat(-0.5), Vec3::repeat(0.5));
        let mut sil = rect_silhouettes(&b, 10.0, |_, _| true);
        sil[2].mask = GrayImage::new(10, 10);
        assert!(matches!(visual_hull(&sil, &b, 8), Err(SamplingError::EmptyHull)));
        assert!(mesh_silhouettes(&box_mesh(b.min, b.max), 8.0).unwrap().len() == 4);
    }
}
