use nalgebra::Vector3;
use rand::Rng;

use super::GeometryError;

pub type Vec3 = Vector3<f64>;

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut b = Self { min: first, max: first };
        for p in it {
            b.min = b.min.inf(p);
            b.max = b.max.sup(p);
        }
        Some(b)
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn inflate(&self, by: f64) -> Self {
        let d = Vec3::repeat(by);
        Self { min: self.min - d, max: self.max + d }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn corners(&self) -> [Vec3; 8] {
        std::array::from_fn(|i| {
            Vec3::new(
                if i & 1 == 0 { self.min.x } else { self.max.x },
                if i & 2 == 0 { self.min.y } else { self.max.y },
                if i & 4 == 0 { self.min.z } else { self.max.z },
            )
        })
    }
}

/// Uniform scale followed by translation: `p' = scale * p + translation`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Similarity {
    pub scale: f64,
    pub translation: Vec3,
}

impl Similarity {
    pub fn identity() -> Self {
        Self { scale: 1.0, translation: Vec3::zeros() }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        p * self.scale + self.translation
    }

    pub fn inverse(&self) -> Self {
        Self { scale: 1.0 / self.scale, translation: -self.translation / self.scale }
    }
}

/// Indexed triangle mesh with optional per-triangle group ids.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    /// Group id per triangle, indexing `group_names`. Empty when the mesh has no groups.
    pub groups: Vec<u32>,
    pub group_names: Vec<String>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Self {
        Self { vertices, triangles, groups: Vec::new(), group_names: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn has_groups(&self) -> bool {
        !self.groups.is_empty()
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let n = self.vertices.len() as u32;
        if let Some(t) = self.triangles.iter().position(|t| t.iter().any(|&i| i >= n)) {
            return Err(GeometryError::IndexOutOfRange { triangle: t });
        }
        if self.vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(GeometryError::NonFinite);
        }
        if self.has_groups() && self.groups.len() != self.triangles.len() {
            return Err(GeometryError::GroupMismatch);
        }
        Ok(())
    }

    pub fn bounds(&self) -> Option<Aabb> {
        Aabb::from_points(self.vertices.iter())
    }

    #[inline]
    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.vertices[i as usize])
    }

    /// Unnormalized face normal (length = twice the area).
    pub fn face_cross(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.corners(t);
        (b - a).cross(&(c - a))
    }

    pub fn face_normal(&self, t: usize) -> Vec3 {
        let n = self.face_cross(t);
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vec3::zeros()
        }
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.face_cross(t).norm() * 0.5).sum()
    }

    /// Signed enclosed volume by the divergence theorem; positive for outward winding.
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn transformed(&self, s: &Similarity) -> Self {
        Self { vertices: self.vertices.iter().map(|v| s.apply(v)).collect(), ..self.clone() }
    }

    pub fn flip_winding(&mut self) {
        for t in &mut self.triangles {
            t.swap(1, 2);
        }
    }

    /// Appends `other`, remapping its indices and groups.
    pub fn append(&mut self, other: &TriangleMesh) {
        let offset = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        if self.has_groups() || other.has_groups() {
            if !self.has_groups() {
                self.ensure_default_group();
            }
            let mut map = Vec::new();
            for name in &other.group_names {
                map.push(self.group_id(name));
            }
            if other.has_groups() {
                self.groups.extend(other.groups.iter().map(|&g| map[g as usize]));
            } else {
                let g = self.group_id("default");
                self.groups.extend(std::iter::repeat_n(g, other.triangles.len()));
            }
        }
        self.triangles.extend(other.triangles.iter().map(|t| t.map(|i| i + offset)));
    }

    fn ensure_default_group(&mut self) {
        let g = self.group_id("default");
        self.groups = vec![g; self.triangles.len()];
    }

    /// Id of the group called `name`, creating it when missing.
    pub fn group_id(&mut self, name: &str) -> u32 {
        if let Some(i) = self.group_names.iter().position(|n| n == name) {
            return i as u32;
        }
        self.group_names.push(name.to_string());
        (self.group_names.len() - 1) as u32
    }

    /// Tags every triangle with group `name`.
    pub fn with_group(mut self, name: &str) -> Self {
        self.groups.clear();
        self.group_names.clear();
        let g = self.group_id(name);
        self.groups = vec![g; self.triangles.len()];
        self
    }

    /// Area-weighted random surface points with their face normals.
    pub fn sample_surface(&self, n: usize, rng: &mut impl Rng) -> Vec<(Vec3, Vec3)> {
        let mut cumulative = Vec::with_capacity(self.triangles.len());
        let mut total = 0.0;
        for t in 0..self.triangles.len() {
            total += self.face_cross(t).norm();
            cumulative.push(total);
        }
        if total <= 0.0 {
            return Vec::new();
        }
        (0..n)
            .map(|_| {
                let r = rng.random::<f64>() * total;
                let t = cumulative.partition_point(|&c| c < r).min(self.triangles.len() - 1);
                let [a, b, c] = self.corners(t);
                let (mut s, mut u) = (rng.random::<f64>(), rng.random::<f64>());
                if s + u > 1.0 {
                    s = 1.0 - s;
                    u = 1.0 - u;
                }
                (a + (b - a) * s + (c - a) * u, self.face_normal(t))
            })
            .collect()
    }
}

/// Scales the mesh so its X extent is exactly 1 and moves the bounding-box center to
/// the origin. Returns the normalized mesh and the applied transform.
pub fn normalize_mesh(mesh: &TriangleMesh) -> Result<(TriangleMesh, Similarity), GeometryError> {
    let bounds = mesh.bounds().ok_or(GeometryError::DegenerateMesh)?;
    let length = bounds.extent().x;
    if !(length > 0.0 && length.is_finite()) {
        return Err(GeometryError::DegenerateMesh);
    }
    let scale = 1.0 / length;
    let transform = Similarity { scale, translation: -bounds.center() * scale };
    Ok((mesh.transformed(&transform), transform))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fixtures::box_mesh;

    #[test]
    fn normalize_cube_of_extent_two() {
        let cube = box_mesh(Vec3::new(1.0, 1.0, 1.0), Vec3::new(3.0, 3.0, 3.0));
        let (n, t) = normalize_mesh(&cube).unwrap();
        assert_eq!(t.scale, 0.5);
        let b = n.bounds().unwrap();
        assert!(b.center().norm() < 1e-12);
        assert!((b.extent().x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_is_idempotent() {
        let m = box_mesh(Vec3::new(-2.0, 0.0, 1.0), Vec3::new(5.0, 1.0, 3.0));
        let (once, _) = normalize_mesh(&m).unwrap();
        let (twice, t) = normalize_mesh(&once).unwrap();
        assert!((t.scale - 1.0).abs() < 1e-9 && t.translation.norm() < 1e-9);
        for (a, b) in once.vertices.iter().zip(&twice.vertices) {
            assert!((a - b).norm() < 1e-12);
        }
        let back = once.transformed(&normalize_mesh(&m).unwrap().1.inverse());
        for (a, b) in back.vertices.iter().zip(&m.vertices) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn degenerate_meshes_rejected() {
        let point = TriangleMesh::new(vec![Vec3::new(1.0, 2.0, 3.0)], vec![[0, 0, 0]]);
        assert!(matches!(normalize_mesh(&point), Err(GeometryError::DegenerateMesh)));
        assert!(matches!(normalize_mesh(&TriangleMesh::default()), Err(GeometryError::DegenerateMesh)));
    }

    #[test]
    fn cube_volume_and_area() {
        let cube = box_mesh(Vec3::zeros(), Vec3::new(2.0, 1.0, 1.0));
        assert!((cube.signed_volume() - 2.0).abs() < 1e-12);
        assert!((cube.area() - 10.0).abs() < 1e-12);
    }
}
