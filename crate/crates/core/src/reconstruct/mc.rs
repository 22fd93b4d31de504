use std::collections::HashMap;

use rayon::prelude::*;

use crate::geometry::{TriangleMesh, Vec3};

use super::tables::TRI_TABLE;
use super::{ReconstructError, ScalarGrid};

/// Offset added to node values that equal the iso level exactly, so no vertex
/// lands on a grid node.
pub const ISO_NUDGE: f32 = 1e-7;

// Corner offsets in table order and the corner pair of each of the 12 cube edges.
const CORNERS: [[usize; 3]; 8] = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]];
const EDGES: [[usize; 2]; 12] = [[0, 1], [1, 2], [2, 3], [3, 0], [4, 5], [5, 6], [6, 7], [7, 4], [0, 4], [1, 5], [2, 6], [3, 7]];

/// Iso-surface of `grid` at `iso` by marching cubes with linear edge interpolation.
///
/// The region where values exceed `iso` is the solid; triangles wind
/// counter-clockwise seen from outside. Nodes beyond the grid count as empty, so
/// every surface is closed. Vertices on shared cube edges are welded and numbered
/// in order of first use.
pub fn marching_cubes(grid: &ScalarGrid, iso: f32) -> Result<TriangleMesh, ReconstructError> {
    let [nx, ny, nz] = grid.dims;
    if nx < 2 || ny < 2 || nz < 2 {
        return Err(ReconstructError::Degenerate(grid.dims));
    }
    if !iso.is_finite() {
        return Err(ReconstructError::Config("iso level must be finite".into()));
    }
    let outside = iso - 1.0;
    // Node (i, j, k) with a one-node ring of virtual empty nodes: coordinates are
    // shifted by one so the ring sits at -1 and n.
    let value = |i: isize, j: isize, k: isize| -> f32 {
        if i < 0 || j < 0 || k < 0 || i >= nx as isize || j >= ny as isize || k >= nz as isize {
            return outside;
        }
        let v = grid.values[grid.index(i as usize, j as usize, k as usize)];
        if v == iso {
            v + ISO_NUDGE
        } else {
            v
        }
    };
    // Edge key: padded node index and axis.
    let (px, py, pz) = (nx + 2, ny + 2, nz + 2);
    let node_key = |i: isize, j: isize, k: isize| ((k + 1) as u64 * py as u64 + (j + 1) as u64) * px as u64 + (i + 1) as u64;
    let slabs: Vec<Vec<[u64; 3]>> = (-1..nz as isize)
        .into_par_iter()
        .map(|k| {
            let mut tris = Vec::new();
            for j in -1..ny as isize {
                for i in -1..nx as isize {
                    let mut vals = [0f32; 8];
                    let mut case = 0usize;
                    for (c, o) in CORNERS.iter().enumerate() {
                        vals[c] = value(i + o[0] as isize, j + o[1] as isize, k + o[2] as isize);
                        if vals[c] < iso {
                            case |= 1 << c;
                        }
                    }
                    if case == 0 || case == 255 {
                        continue;
                    }
                    let edge_key = |e: usize| {
                        let [a, b] = EDGES[e];
                        let (ca, cb) = (CORNERS[a], CORNERS[b]);
                        let lo = [ca[0].min(cb[0]), ca[1].min(cb[1]), ca[2].min(cb[2])];
                        let axis = (0..3).find(|&d| ca[d] != cb[d]).expect("edge spans one axis") as u64;
                        node_key(i + lo[0] as isize, j + lo[1] as isize, k + lo[2] as isize) * 3 + axis
                    };
                    for t in TRI_TABLE[case].chunks(3).take_while(|t| t[0] >= 0) {
                        tris.push([edge_key(t[0] as usize), edge_key(t[1] as usize), edge_key(t[2] as usize)]);
                    }
                }
            }
            tris
        })
        .collect();
    let origin = grid.origin;
    let h = grid.spacing;
    let position = |key: u64| -> Vec3 {
        let axis = (key % 3) as usize;
        let node = key / 3;
        let i = (node % px as u64) as isize - 1;
        let j = ((node / px as u64) % py as u64) as isize - 1;
        let k = (node / (px as u64 * py as u64)) as isize - 1;
        let mut o = [0isize; 3];
        o[axis] = 1;
        let (va, vb) = (value(i, j, k) as f64, value(i + o[0], j + o[1], k + o[2]) as f64);
        let t = (iso as f64 - va) / (vb - va);
        let base = Vec3::new(i as f64, j as f64, k as f64);
        let mut dir = Vec3::zeros();
        dir[axis] = t;
        origin + (base + dir) * h
    };
    let _ = pz;
    let mut index: HashMap<u64, u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for tris in slabs {
        for t in tris {
            let ids = t.map(|key| {
                *index.entry(key).or_insert_with(|| {
                    vertices.push(position(key));
                    (vertices.len() - 1) as u32
                })
            });
            triangles.push(ids);
        }
    }
    Ok(TriangleMesh::new(vertices, triangles))
}
