use serde::{Deserialize, Serialize};

use super::mesh::{Aabb, Vec3};

/// The four canonical blueprint views.
///
/// Frame: X is the vehicle length, Y its width, Z points up. Front looks down −X from
/// +X, Back looks down +X, Side looks down −Y from +Y, Top looks down −Z.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViewKind {
    Front,
    Back,
    Side,
    Top,
}

impl ViewKind {
    pub const ALL: [ViewKind; 4] = [ViewKind::Front, ViewKind::Back, ViewKind::Side, ViewKind::Top];

    /// Lower-case name used in file names and tensor names.
    pub fn name(self) -> &'static str {
        match self {
            ViewKind::Front => "front",
            ViewKind::Back => "back",
            ViewKind::Side => "side",
            ViewKind::Top => "top",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Viewing direction and image-up vector.
    pub fn axes(self) -> (Vec3, Vec3) {
        match self {
            ViewKind::Front => (-Vec3::x(), Vec3::z()),
            ViewKind::Back => (Vec3::x(), Vec3::z()),
            ViewKind::Side => (-Vec3::y(), Vec3::z()),
            ViewKind::Top => (-Vec3::z(), -Vec3::y()),
        }
    }
}

/// Orthographic camera. Image column `u` grows along `right = axis × up`, row `v`
/// grows along `−up`; continuous pixel coordinates put pixel `(i, j)` over
/// `[i, i+1) × [j, j+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthoView {
    pub kind: Option<ViewKind>,
    /// Unit viewing direction (the camera looks along it).
    pub axis: Vec3,
    pub up: Vec3,
    /// Plane extent `[right_min, up_min, right_max, up_max]` in model units.
    pub rect: [f64; 4],
    /// Pixels per model unit along each image axis.
    pub resolution: [f64; 2],
    /// Blank border in pixels around `rect`.
    pub margin: usize,
    /// Range of `axis · p` over the model, used to normalize depth.
    pub depth_range: [f64; 2],
}

impl OrthoView {
    /// Camera looking along `axis` framing `bounds` at `resolution` pixels per unit.
    pub fn framing(axis: Vec3, up: Vec3, bounds: &Aabb, resolution: f64, margin: usize) -> Self {
        let axis = axis.normalize();
        let up = (up - axis * up.dot(&axis)).normalize();
        let right = axis.cross(&up);
        let mut rect = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        let mut depth = [f64::INFINITY, f64::NEG_INFINITY];
        for c in bounds.corners() {
            let (r, u, d) = (c.dot(&right), c.dot(&up), c.dot(&axis));
            rect = [rect[0].min(r), rect[1].min(u), rect[2].max(r), rect[3].max(u)];
            depth = [depth[0].min(d), depth[1].max(d)];
        }
        Self { kind: None, axis, up, rect, resolution: [resolution; 2], margin, depth_range: depth }
    }

    pub fn canonical(kind: ViewKind, bounds: &Aabb, resolution: f64, margin: usize) -> Self {
        let (axis, up) = kind.axes();
        Self { kind: Some(kind), ..Self::framing(axis, up, bounds, resolution, margin) }
    }

    /// Camera whose rect is exactly `bounds` projected and whose image is exactly
    /// `width`×`height` pixels (anisotropic scale allowed).
    pub fn fitted(kind: ViewKind, bounds: &Aabb, width: usize, height: usize) -> Self {
        let mut v = Self::canonical(kind, bounds, 1.0, 0);
        v.resolution = [width as f64 / v.rect_width(), height as f64 / v.rect_height()];
        v
    }

    /// Picks an up vector not parallel to `axis`.
    pub fn looking_along(axis: Vec3, bounds: &Aabb, resolution: f64, margin: usize) -> Self {
        let a = axis.normalize();
        let up = if a.z.abs() < 0.9 { Vec3::z() } else { Vec3::x() };
        Self::framing(a, up, bounds, resolution, margin)
    }

    pub fn right(&self) -> Vec3 {
        self.axis.cross(&self.up)
    }

    pub fn rect_width(&self) -> f64 {
        self.rect[2] - self.rect[0]
    }

    pub fn rect_height(&self) -> f64 {
        self.rect[3] - self.rect[1]
    }

    /// Image size in pixels including margins.
    pub fn image_size(&self) -> (usize, usize) {
        let w = (self.rect_width() * self.resolution[0]).round().max(1.0) as usize;
        let h = (self.rect_height() * self.resolution[1]).round().max(1.0) as usize;
        (w + 2 * self.margin, h + 2 * self.margin)
    }

    /// Continuous pixel coordinates `(u, v)` and raw depth `axis · p`.
    pub fn project(&self, p: &Vec3) -> (f64, f64, f64) {
        let m = self.margin as f64;
        let u = (p.dot(&self.right()) - self.rect[0]) * self.resolution[0] + m;
        let v = (self.rect[3] - p.dot(&self.up)) * self.resolution[1] + m;
        (u, v, p.dot(&self.axis))
    }

    /// Inverse of [`project`](Self::project).
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        let m = self.margin as f64;
        let r = (u - m) / self.resolution[0] + self.rect[0];
        let up = self.rect[3] - (v - m) / self.resolution[1];
        self.right() * r + self.up * up + self.axis * depth
    }

    /// Maps raw depth onto `[0, 1]` across the model's depth range.
    pub fn normalize_depth(&self, d: f64) -> f64 {
        let span = (self.depth_range[1] - self.depth_range[0]).max(f64::EPSILON);
        ((d - self.depth_range[0]) / span).clamp(0.0, 1.0)
    }

    pub fn denormalize_depth(&self, d: f64) -> f64 {
        self.depth_range[0] + d * (self.depth_range[1] - self.depth_range[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds() -> Aabb {
        Aabb::new(Vec3::new(-0.5, -0.2, -0.15), Vec3::new(0.5, 0.2, 0.15))
    }

    #[test]
    fn canonical_right_vectors() {
        let b = bounds();
        let r = |k| OrthoView::canonical(k, &b, 10.0, 0).right();
        assert_eq!(r(ViewKind::Front), Vec3::y());
        assert_eq!(r(ViewKind::Back), -Vec3::y());
        assert_eq!(r(ViewKind::Side), -Vec3::x());
        assert_eq!(r(ViewKind::Top), -Vec3::x());
    }

    #[test]
    fn center_and_corners_map_to_image_center_and_corners() {
        let b = bounds();
        for kind in ViewKind::ALL {
            let v = OrthoView::canonical(kind, &b, 64.0, 0);
            let (w, h) = v.image_size();
            let (u, vv, _) = v.project(&b.center());
            assert!((u - w as f64 / 2.0).abs() < 0.5 && (vv - h as f64 / 2.0).abs() < 0.5);
            let mut hits = 0;
            for c in b.corners() {
                let (u, vv, _) = v.project(&c);
                let near = |x: f64, t: f64| x.abs() < 0.5 || (x - t).abs() < 0.5;
                assert!(near(u, w as f64) && near(vv, h as f64));
                hits += 1;
            }
            assert_eq!(hits, 8);
        }
    }

    #[test]
    fn unproject_inverts_project() {
        let b = bounds();
        let v = OrthoView::looking_along(Vec3::new(0.3, -0.5, 0.8), &b, 50.0, 3);
        let p = Vec3::new(0.1, -0.05, 0.07);
        let (u, vv, d) = v.project(&p);
        assert!((v.unproject(u, vv, d) - p).norm() < 1e-12);
    }
}
