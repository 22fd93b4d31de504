use crate::image::{GrayImage, VectorImage};

use super::camera::OrthoView;
use super::mesh::{TriangleMesh, Vec3};
use super::GeometryError;

/// Output of [`render_view`].
#[derive(Clone, Debug)]
pub struct Render {
    /// Depth normalized over the model's depth range; background is 1.
    pub depth: GrayImage,
    /// World-space face normal turned toward the camera; zero on background.
    pub normal: VectorImage,
    /// Coverage, 1 where a triangle was rasterized.
    pub mask: GrayImage,
    /// Unnormalized depth `axis · p` per pixel, `+inf` on background.
    pub raw_depth: Vec<f64>,
    /// Winning triangle per pixel.
    pub triangle: Vec<Option<u32>>,
}

impl Render {
    pub fn width(&self) -> usize {
        self.mask.width()
    }

    pub fn height(&self) -> usize {
        self.mask.height()
    }

    pub fn covered(&self, x: usize, y: usize) -> bool {
        self.triangle[y * self.width() + x].is_some()
    }
}

// Edge function evaluated with endpoints in a canonical order so that two triangles
// sharing an edge compute bit-identical magnitudes.
#[inline]
fn edge(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let swap = (a[0], a[1]) > (b[0], b[1]);
    let (s, e) = if swap { (b, a) } else { (a, b) };
    let v = (e[0] - s[0]) * (p[1] - s[1]) - (e[1] - s[1]) * (p[0] - s[0]);
    if swap {
        -v
    } else {
        v
    }
}

// Exactly one of the two directions of an edge owns pixel centers lying on it.
#[inline]
fn owns(a: [f64; 2], b: [f64; 2]) -> bool {
    let d = [b[0] - a[0], b[1] - a[1]];
    d[1] < 0.0 || (d[1] == 0.0 && d[0] > 0.0)
}

/// Orthographic z-buffer rasterization of `mesh` into `view`.
///
/// Pixel centers are sampled with a shared-edge ownership rule so that a closed
/// surface covers every interior pixel exactly once; there is no antialiasing.
pub fn render_view(mesh: &TriangleMesh, view: &OrthoView) -> Result<Render, GeometryError> {
    if mesh.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    let (w, h) = view.image_size();
    let mut raw = vec![f64::INFINITY; w * h];
    let mut tri_id: Vec<Option<u32>> = vec![None; w * h];

    for t in 0..mesh.triangles.len() {
        let corners = mesh.corners(t);
        let proj = corners.map(|c| view.project(&c));
        let mut p = proj.map(|(u, v, _)| [u, v]);
        let mut d = proj.map(|(_, _, d)| d);
        let mut area = edge(p[0], p[1], p[2]);
        if area == 0.0 || !area.is_finite() {
            continue;
        }
        if area < 0.0 {
            p.swap(1, 2);
            d.swap(1, 2);
            area = -area;
        }
        let min_x = p.iter().map(|q| q[0]).fold(f64::INFINITY, f64::min);
        let max_x = p.iter().map(|q| q[0]).fold(f64::NEG_INFINITY, f64::max);
        let min_y = p.iter().map(|q| q[1]).fold(f64::INFINITY, f64::min);
        let max_y = p.iter().map(|q| q[1]).fold(f64::NEG_INFINITY, f64::max);
        let x0 = (min_x - 0.5).ceil().max(0.0) as usize;
        let y0 = (min_y - 0.5).ceil().max(0.0) as usize;
        let x1 = ((max_x - 0.5).floor()).min(w as f64 - 1.0);
        let y1 = ((max_y - 0.5).floor()).min(h as f64 - 1.0);
        if x1 < 0.0 || y1 < 0.0 {
            continue;
        }
        let (x1, y1) = (x1 as usize, y1 as usize);
        let edges = [(1, 2), (2, 0), (0, 1)];
        let own = edges.map(|(a, b)| owns(p[a], p[b]));
        for y in y0..=y1 {
            for x in x0..=x1 {
                let c = [x as f64 + 0.5, y as f64 + 0.5];
                let mut bary = [0.0; 3];
                let mut inside = true;
                for (k, &(a, b)) in edges.iter().enumerate() {
                    let e = edge(p[a], p[b], c);
                    if e < 0.0 || (e == 0.0 && !own[k]) {
                        inside = false;
                        break;
                    }
                    bary[k] = e;
                }
                if !inside {
                    continue;
                }
                let z = (bary[0] * d[0] + bary[1] * d[1] + bary[2] * d[2]) / area;
                let idx = y * w + x;
                if z < raw[idx] {
                    raw[idx] = z;
                    tri_id[idx] = Some(t as u32);
                }
            }
        }
    }

    let mut depth = GrayImage::filled(w, h, 1.0);
    let mut mask = GrayImage::new(w, h);
    let mut normal = VectorImage::new(w, h);
    let face_normals: Vec<Vec3> = (0..mesh.triangles.len()).map(|t| mesh.face_normal(t)).collect();
    for y in 0..h {
        for x in 0..w {
            let idx = y * w + x;
            if let Some(t) = tri_id[idx] {
                depth.set(x, y, view.normalize_depth(raw[idx]) as f32);
                mask.set(x, y, 1.0);
                let mut n = face_normals[t as usize];
                if n.dot(&view.axis) > 0.0 {
                    n = -n;
                }
                normal.set(x, y, [n.x as f32, n.y as f32, n.z as f32]);
            }
        }
    }
    Ok(Render { depth, normal, mask, raw_depth: raw, triangle: tri_id })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::camera::ViewKind;
    use crate::geometry::fixtures::{box_mesh, icosphere};
    use crate::geometry::mesh::Aabb;

    fn cube() -> TriangleMesh {
        box_mesh(Vec3::repeat(-0.5), Vec3::repeat(0.5))
    }

    #[test]
    fn cube_front_depth_is_constant() {
        let c = cube();
        let view = OrthoView::canonical(ViewKind::Front, &c.bounds().unwrap(), 32.0, 2);
        let r = render_view(&c, &view).unwrap();
        let covered: Vec<f32> = (0..r.height())
            .flat_map(|y| (0..r.width()).map(move |x| (x, y)))
            .filter(|&(x, y)| r.covered(x, y))
            .map(|(x, y)| r.depth.get(x, y))
            .collect();
        assert_eq!(covered.len(), 32 * 32);
        assert!(covered.iter().all(|&d| d == 0.0));
        assert_eq!(r.normal.get(10, 10), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn cube_side_mask_area() {
        let c = box_mesh(Vec3::new(-0.5, -0.2, -0.15), Vec3::new(0.5, 0.2, 0.15));
        let b = Aabb::new(Vec3::repeat(-0.6), Vec3::repeat(0.6));
        let view = OrthoView::canonical(ViewKind::Side, &b, 100.0, 0);
        let r = render_view(&c, &view).unwrap();
        let count = r.mask.data().iter().filter(|&&m| m > 0.5).count() as f64;
        let expected = 1.0 * 0.3 * 100.0 * 100.0;
        assert!((count - expected).abs() / expected < 0.02);
    }

    #[test]
    fn sphere_center_depth_matches_analytic() {
        let s = icosphere(Vec3::zeros(), 0.5, 4);
        let b = s.bounds().unwrap();
        let view = OrthoView::canonical(ViewKind::Front, &b, 64.0, 0);
        let r = render_view(&s, &view).unwrap();
        let (w, h) = (r.width(), r.height());
        // Pixel center nearest the sphere center; analytic depth of the sphere there.
        let (x, y) = (w / 2, h / 2);
        let p = view.unproject(x as f64 + 0.5, y as f64 + 0.5, 0.0);
        let lateral = (p.y * p.y + p.z * p.z).sqrt();
        let analytic = view.normalize_depth(-(0.25 - lateral * lateral).sqrt());
        let quantum = 1.0 / 64.0;
        assert!((r.depth.get(x, y) as f64 - analytic).abs() < quantum);
    }

    #[test]
    fn moving_a_vertex_toward_camera_never_increases_depth() {
        let s = icosphere(Vec3::zeros(), 0.5, 2);
        let b = s.bounds().unwrap().inflate(0.2);
        let view = OrthoView::canonical(ViewKind::Front, &b, 40.0, 0);
        let before = render_view(&s, &view).unwrap();
        let mut moved = s.clone();
        let front = (0..moved.vertices.len()).max_by(|&a, &b| moved.vertices[a].x.total_cmp(&moved.vertices[b].x)).unwrap();
        moved.vertices[front].x += 0.1;
        let after = render_view(&moved, &view).unwrap();
        for (a, b) in after.raw_depth.iter().zip(&before.raw_depth) {
            if b.is_finite() {
                assert!(a <= b);
            }
        }
    }

    #[test]
    fn closed_mesh_has_no_pinholes() {
        let s = icosphere(Vec3::zeros(), 0.5, 3);
        let b = s.bounds().unwrap();
        let view = OrthoView::canonical(ViewKind::Top, &b, 50.0, 0);
        let r = render_view(&s, &view).unwrap();
        for y in 0..r.height() {
            for x in 0..r.width() {
                let p = view.unproject(x as f64 + 0.5, y as f64 + 0.5, 0.0);
                if (p.x * p.x + p.y * p.y).sqrt() < 0.45 {
                    assert!(r.covered(x, y));
                }
            }
        }
    }

    #[test]
    fn empty_mesh_is_an_error() {
        let b = Aabb::new(Vec3::zeros(), Vec3::repeat(1.0));
        let view = OrthoView::canonical(ViewKind::Top, &b, 10.0, 0);
        assert!(matches!(render_view(&TriangleMesh::default(), &view), Err(GeometryError::EmptyMesh)));
    }
}
