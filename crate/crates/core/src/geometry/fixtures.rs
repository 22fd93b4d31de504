//! Procedural watertight shapes used by tests, the acceptance suite and the CLI demos.

use std::collections::HashMap;

use super::mesh::{Aabb, TriangleMesh, Vec3};

/// Closed axis-aligned box with outward winding.
pub fn box_mesh(min: Vec3, max: Vec3) -> TriangleMesh {
    union_of_boxes(&[Aabb::new(min, max)])
}

/// Exact watertight boundary of a union of axis-aligned boxes.
///
/// Space is split into the rectilinear grid spanned by all box coordinates; a cell is
/// solid when its center lies in any box, and every solid/empty cell interface emits
/// one outward quad. Neighboring quads share grid vertices, so the result has no
/// T-junctions.
pub fn union_of_boxes(boxes: &[Aabb]) -> TriangleMesh {
    let mut coords: [Vec<f64>; 3] = Default::default();
    for b in boxes {
        for a in 0..3 {
            coords[a].push(b.min[a]);
            coords[a].push(b.max[a]);
        }
    }
    for c in &mut coords {
        c.sort_by(f64::total_cmp);
        c.dedup();
    }
    let dims = [coords[0].len() - 1, coords[1].len() - 1, coords[2].len() - 1];
    let solid = |c: [isize; 3]| -> bool {
        if (0..3).any(|a| c[a] < 0 || c[a] >= dims[a] as isize) {
            return false;
        }
        let center = Vec3::from_fn(|a, _| {
            let i = c[a] as usize;
            0.5 * (coords[a][i] + coords[a][i + 1])
        });
        boxes.iter().any(|b| b.contains(&center))
    };

    let mut vertex_ids: HashMap<[usize; 3], u32> = HashMap::new();
    let mut mesh = TriangleMesh::default();
    let mut vertex = |g: [usize; 3], mesh: &mut TriangleMesh| -> u32 {
        *vertex_ids.entry(g).or_insert_with(|| {
            mesh.vertices.push(Vec3::new(coords[0][g[0]], coords[1][g[1]], coords[2][g[2]]));
            (mesh.vertices.len() - 1) as u32
        })
    };

    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let cell = [i as isize, j as isize, k as isize];
                if !solid(cell) {
                    continue;
                }
                for axis in 0..3 {
                    for positive in [false, true] {
                        let mut n = cell;
                        n[axis] += if positive { 1 } else { -1 };
                        if solid(n) {
                            continue;
                        }
                        let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
                        let mut corner = |db: usize, dc: usize| {
                            let mut g = [i, j, k];
                            g[axis] += positive as usize;
                            g[b] += db;
                            g[c] += dc;
                            vertex(g, &mut mesh)
                        };
                        let q = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
                        if positive {
                            mesh.triangles.push([q[0], q[1], q[2]]);
                            mesh.triangles.push([q[0], q[2], q[3]]);
                        } else {
                            mesh.triangles.push([q[0], q[2], q[1]]);
                            mesh.triangles.push([q[0], q[3], q[2]]);
                        }
                    }
                }
            }
        }
    }
    mesh
}

/// Geodesic sphere from a subdivided icosahedron.
pub fn icosphere(center: Vec3, radius: f64, subdivisions: usize) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
        [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
        [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vec3::new(p[0], p[1], p[2]).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3>| {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let mut mesh = TriangleMesh::new(verts.into_iter().map(|v| center + v * radius).collect(), faces);
    if mesh.signed_volume() < 0.0 {
        mesh.flip_winding();
    }
    mesh
}

/// Torus around the Z axis with tube radius `minor` and center-line radius `major`.
pub fn torus(major: f64, minor: f64, rings: usize, sides: usize) -> TriangleMesh {
    let mut mesh = TriangleMesh::default();
    for i in 0..rings {
        let u = i as f64 / rings as f64 * std::f64::consts::TAU;
        for j in 0..sides {
            let v = j as f64 / sides as f64 * std::f64::consts::TAU;
            let r = major + minor * v.cos();
            mesh.vertices.push(Vec3::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let idx = |i: usize, j: usize| ((i % rings) * sides + (j % sides)) as u32;
    for i in 0..rings {
        for j in 0..sides {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            mesh.triangles.push([a, b, c]);
            mesh.triangles.push([a, c, d]);
        }
    }
    if mesh.signed_volume() < 0.0 {
        mesh.flip_winding();
    }
    mesh
}

fn aabb(min: [f64; 3], max: [f64; 3]) -> Aabb {
    Aabb::new(Vec3::from(min), Vec3::from(max))
}

/// Boxes of the car-proxy composite: a body, a narrower cabin and a thin vertical
/// fin at the rear (−X). Already normalized to X extent 1.
pub fn car_proxy_boxes() -> Vec<Aabb> {
    vec![
        aabb([-0.5, -0.2, -0.15], [0.5, 0.2, 0.01]),
        aabb([-0.22, -0.16, 0.01], [0.18, 0.16, 0.15]),
        aabb([-0.48, -0.02, 0.01], [-0.36, 0.02, 0.11]),
    ]
}

pub fn car_proxy() -> TriangleMesh {
    union_of_boxes(&car_proxy_boxes())
}

/// Cube of side 0.6 with a thin fin (thickness 0.02) on its top face.
pub fn cube_with_fin_boxes() -> (Aabb, Aabb) {
    (aabb([-0.3, -0.3, -0.3], [0.3, 0.3, 0.3]), aabb([-0.2, -0.01, 0.3], [0.2, 0.01, 0.5]))
}

pub fn cube_with_fin() -> TriangleMesh {
    let (cube, fin) = cube_with_fin_boxes();
    union_of_boxes(&[cube, fin])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    pub(crate) fn edge_counts(mesh: &TriangleMesh) -> HashMap<(u32, u32), usize> {
        let mut counts = HashMap::new();
        for t in &mesh.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    #[test]
    fn fixtures_are_closed_and_outward() {
        for (mesh, volume) in [
            (box_mesh(Vec3::zeros(), Vec3::new(1.0, 2.0, 3.0)), Some(6.0)),
            (icosphere(Vec3::zeros(), 0.5, 3), None),
            (torus(0.3, 0.1, 32, 16), None),
            (car_proxy(), None),
            (cube_with_fin(), Some(0.216 + 0.4 * 0.02 * 0.2)),
        ] {
            assert!(edge_counts(&mesh).values().all(|&c| c == 2));
            assert!(mesh.signed_volume() > 0.0);
            if let Some(v) = volume {
                assert!((mesh.signed_volume() - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn union_merges_overlaps() {
        let m = union_of_boxes(&[
            aabb([0.0, 0.0, 0.0], [2.0, 1.0, 1.0]),
            aabb([1.0, 0.0, 0.0], [3.0, 1.0, 1.0]),
        ]);
        assert!((m.signed_volume() - 3.0).abs() < 1e-12);
        assert!((m.area() - 14.0).abs() < 1e-12);
    }
}
