use crate::geometry::{render_view, Aabb, GeometryError, KdTree, OrthoView, TriangleMesh, Vec3};
use crate::image::sobel_magnitude;

use super::SamplingError;

/// One virtual scan camera with its depth buffer.
#[derive(Clone, Debug)]
pub struct ScanCamera {
    pub view: OrthoView,
    pub width: usize,
    pub height: usize,
    /// Raw depth `axis · p` per pixel, `+inf` where nothing was hit.
    pub raw_depth: Vec<f64>,
    pub triangle: Vec<Option<u32>>,
}

/// Oriented surface points gathered by back-projecting depth renders.
#[derive(Clone, Debug)]
pub struct SurfaceScan {
    pub points: Vec<Vec3>,
    /// Unit face normals, turned toward the camera that saw the point.
    pub normals: Vec<Vec3>,
    /// Normal-image edge strength at the source pixel, in `[0, 1]`.
    pub edge: Vec<f64>,
    /// Height above the model's lowest point relative to its total height.
    pub rel_h: Vec<f64>,
    /// `(camera, pixel)` each point was taken from.
    pub source: Vec<(u32, u32)>,
    pub cameras: Vec<ScanCamera>,
    pub mesh: TriangleMesh,
    pub bounds: Aabb,
    pub tree: KdTree,
    /// Pixel size of the scan cameras in model units.
    pub spacing: f64,
}

fn push_unique(out: &mut Vec<Vec3>, d: Vec3) {
    let d = d.normalize();
    if !out.iter().any(|e| (e - d).norm() < 1e-9) {
        out.push(d);
    }
}

/// Camera directions: the six axes, then the 12 icosahedron vertices, then the 20
/// dodecahedron vertices, then a Fibonacci spiral for any remainder.
pub fn scan_directions(n: usize) -> Vec<Vec3> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut dirs = Vec::with_capacity(n.max(38));
    for a in 0..3 {
        for s in [1.0, -1.0] {
            let mut d = Vec3::zeros();
            d[a] = s;
            push_unique(&mut dirs, d);
        }
    }
    for s1 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            push_unique(&mut dirs, Vec3::new(0.0, s1, s2 * phi));
            push_unique(&mut dirs, Vec3::new(s1, s2 * phi, 0.0));
            push_unique(&mut dirs, Vec3::new(s1 * phi, 0.0, s2));
        }
    }
    for sx in [1.0, -1.0] {
        for sy in [1.0, -1.0] {
            for sz in [1.0, -1.0] {
                push_unique(&mut dirs, Vec3::new(sx, sy, sz));
            }
        }
    }
    for s1 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            push_unique(&mut dirs, Vec3::new(0.0, s1 / phi, s2 * phi));
            push_unique(&mut dirs, Vec3::new(s1 / phi, s2 * phi, 0.0));
            push_unique(&mut dirs, Vec3::new(s1 * phi, 0.0, s2 / phi));
        }
    }
    let extra = n.saturating_sub(dirs.len());
    for i in 0..extra {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / extra as f64;
        let r = (1.0 - z * z).sqrt();
        let a = i as f64 * std::f64::consts::PI * (3.0 - 5f64.sqrt());
        dirs.push(Vec3::new(r * a.cos(), r * a.sin(), z));
    }
    dirs.truncate(n);
    dirs
}

/// Renders the mesh from `n_cams` orthographic cameras around it and turns every
/// covered pixel into an oriented surface point.
pub fn scan_mesh(mesh: &TriangleMesh, n_cams: usize, resolution: f64) -> Result<SurfaceScan, SamplingError> {
    if n_cams < 6 {
        return Err(SamplingError::TooFewCameras(n_cams));
    }
    if mesh.is_empty() {
        return Err(GeometryError::EmptyMesh.into());
    }
    mesh.validate()?;
    let bounds = mesh.bounds().ok_or(GeometryError::EmptyMesh)?;
    let (z0, zext) = (bounds.min.z, bounds.extent().z);
    let mut scan = SurfaceScan {
        points: Vec::new(),
        normals: Vec::new(),
        edge: Vec::new(),
        rel_h: Vec::new(),
        source: Vec::new(),
        cameras: Vec::with_capacity(n_cams),
        mesh: mesh.clone(),
        bounds,
        tree: KdTree::build(&[Vec3::zeros()])?,
        spacing: 1.0 / resolution,
    };
    for (ci, dir) in scan_directions(n_cams).into_iter().enumerate() {
        let view = OrthoView::looking_along(dir, &bounds, resolution, 1);
        let render = render_view(mesh, &view)?;
        let edges = sobel_magnitude(&render.normal)?;
        let (w, h) = (render.width(), render.height());
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let Some(t) = render.triangle[i] else { continue };
                let p = view.unproject(x as f64 + 0.5, y as f64 + 0.5, render.raw_depth[i]);
                let mut n = mesh.face_normal(t as usize);
                if n.dot(&view.axis) > 0.0 {
                    n = -n;
                }
                scan.points.push(p);
                scan.normals.push(n);
                scan.edge.push(edges.get(x, y) as f64);
                scan.rel_h.push(if zext > 0.0 { ((p.z - z0) / zext).clamp(0.0, 1.0) } else { 0.0 });
                scan.source.push((ci as u32, i as u32));
            }
        }
        scan.cameras.push(ScanCamera { view, width: w, height: h, raw_depth: render.raw_depth, triangle: render.triangle });
    }
    if scan.points.is_empty() {
        return Err(SamplingError::EmptyScan);
    }
    scan.tree = KdTree::build(&scan.points)?;
    Ok(scan)
}

// Parameter `s` where the line `p + s·d` meets the triangle, if it does.
fn line_hit(p: &Vec3, d: &Vec3, [a, b, c]: [Vec3; 3]) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let pv = d.cross(&e2);
    let det = e1.dot(&pv);
    if det.abs() <= 1e-14 * e1.norm() * e2.norm() {
        return None;
    }
    let inv = 1.0 / det;
    let s = p - a;
    let u = s.dot(&pv) * inv;
    let qv = s.cross(&e1);
    let v = d.dot(&qv) * inv;
    const TOL: f64 = 1e-9;
    if u < -TOL || v < -TOL || u + v > 1.0 + TOL {
        return None;
    }
    Some(e2.dot(&qv) * inv)
}

const OCCLUSION_SLACK: f64 = 1e-7;

impl ScanCamera {
    /// Whether surface seen by this camera lies in front of `p`.
    pub fn occludes(&self, mesh: &TriangleMesh, p: &Vec3) -> bool {
        let (u, v, depth) = self.view.project(p);
        if !(u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64) {
            return false;
        }
        let (px, py) = (u as usize, v as usize);
        // Exact test against the triangles visible around the pixel; these are the
        // front-most surfaces the camera saw there.
        let mut tested = [u32::MAX; 9];
        let mut any_hit = false;
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let (x, y) = (px as i64 + dx, py as i64 + dy);
                if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
                    continue;
                }
                let Some(t) = self.triangle[y as usize * self.width + x as usize] else { continue };
                if tested.contains(&t) {
                    continue;
                }
                tested[((dy + 1) * 3 + dx + 1) as usize] = t;
                if let Some(s) = line_hit(p, &self.view.axis, mesh.corners(t as usize)) {
                    any_hit = true;
                    if s < -OCCLUSION_SLACK {
                        return true;
                    }
                }
            }
        }
        if any_hit {
            return false;
        }
        let i = py * self.width + px;
        self.triangle[i].is_some() && depth > self.raw_depth[i] + OCCLUSION_SLACK
    }
}

impl SurfaceScan {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// A point is inside when every camera sees surface in front of it.
    pub fn is_inside(&self, p: &Vec3) -> bool {
        self.cameras.iter().all(|c| c.occludes(&self.mesh, p))
    }

    /// Nearest scan point index and distance.
    pub fn nearest(&self, p: &Vec3) -> (usize, f64) {
        self.tree.nearest(p)
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        let (_, d) = self.nearest(p);
        if self.is_inside(p) {
            -d
        } else {
            d
        }
    }
}

/// Distance to the nearest scan point, negative when `p` is hidden from every camera.
pub fn signed_distance(scan: &SurfaceScan, p: &Vec3) -> f64 {
    scan.signed_distance(p)
}
