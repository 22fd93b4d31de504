use rayon::prelude::*;

use crate::geometry::{Aabb, KdTree, Vec3};

use super::{SamplerConfig, SamplingError, SurfaceScan, VoxelGrid};

/// Per-point weight factors and the normalized sampling distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleWeights {
    pub w_edge: Vec<f64>,
    pub w_normal: Vec<f64>,
    pub w_hull_dist: Vec<f64>,
    pub w_hull_dist_normal: Vec<f64>,
    pub w_thickness: Vec<f64>,
    /// Normalized combined weight; sums to 1.
    pub weight: Vec<f64>,
}

/// Down-weights the lower body: 1 near the ground (`rel_h < 0.05`), in the upper
/// half, or wherever the surface does not face almost straight down; otherwise the
/// relative height itself. `normal_down` is the normal's up-axis component.
pub fn w_normal(rel_h: f64, normal_down: f64) -> f64 {
    if rel_h < 0.05 || rel_h > 0.5 || normal_down > -0.95 {
        1.0
    } else {
        rel_h
    }
}

const FACE_CELLS: usize = 6;

// Scan points grouped by normal direction (cube-map cells) so that a search for
// "nearest point whose normal is more than θ away" can skip whole groups, search
// some without a filter, and filter only the few that straddle the angle limit.
struct NormalBin {
    members: Vec<usize>,
    tree: KdTree,
    bounds: Aabb,
    center: Vec3,
    radius: f64,
}

fn cube_cell(n: &Vec3) -> usize {
    let a = n.iamax();
    let face = a * 2 + usize::from(n[a] < 0.0);
    let (b, c) = ((a + 1) % 3, (a + 2) % 3);
    let cell = |v: f64| (((v / n[a].abs() + 1.0) / 2.0 * FACE_CELLS as f64) as usize).min(FACE_CELLS - 1);
    (face * FACE_CELLS + cell(n[b])) * FACE_CELLS + cell(n[c])
}

// Smallest-effort bounding cone of the member normals: around their mean direction
// (or the cell's axis when the mean vanishes), with the widest member angle.
fn member_cone(cell: usize, members: &[usize], normals: &[Vec3]) -> (Vec3, f64) {
    let sum: Vec3 = members.iter().map(|&i| normals[i]).sum();
    let center = if sum.norm() > 1e-9 * members.len() as f64 {
        sum.normalize()
    } else {
        let face = cell / (FACE_CELLS * FACE_CELLS);
        let mut d = Vec3::zeros();
        d[face / 2] = if face % 2 == 1 { -1.0 } else { 1.0 };
        d
    };
    let radius = members.iter().map(|&i| center.dot(&normals[i]).clamp(-1.0, 1.0).acos()).fold(0.0, f64::max);
    (center, radius + 1e-9)
}

fn aabb_distance(b: &Aabb, p: &Vec3) -> f64 {
    let d = (b.min - p).sup(&(p - b.max)).sup(&Vec3::zeros());
    d.norm()
}

/// Distance from each scan point to the nearest scan point whose normal differs by
/// more than `angle_deg`, or `None` when no such point exists.
pub(crate) fn opposite_distances(points: &[Vec3], normals: &[Vec3], angle_deg: f64) -> Vec<Option<f64>> {
    let threshold = angle_deg.to_radians();
    let cos_t = threshold.cos();
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); 6 * FACE_CELLS * FACE_CELLS];
    for (i, n) in normals.iter().enumerate() {
        groups[cube_cell(n)].push(i);
    }
    let bins: Vec<NormalBin> = groups
        .into_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(cell, members)| {
            let pts: Vec<Vec3> = members.iter().map(|&i| points[i]).collect();
            let (center, radius) = member_cone(cell, &members, normals);
            NormalBin {
                tree: KdTree::build(&pts).expect("non-empty bin"),
                bounds: Aabb::from_points(pts.iter()).expect("non-empty bin"),
                members,
                center,
                radius,
            }
        })
        .collect();
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            let (p, n) = (&points[i], &normals[i]);
            let mut candidates: Vec<(f64, usize, bool)> = Vec::new();
            for (b, bin) in bins.iter().enumerate() {
                let a = n.dot(&bin.center).clamp(-1.0, 1.0).acos();
                if a + bin.radius <= threshold {
                    continue;
                }
                let all_pass = a - bin.radius > threshold;
                candidates.push((aabb_distance(&bin.bounds, p), b, all_pass));
            }
            candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            let mut best = f64::INFINITY;
            for (lower, b, all_pass) in candidates {
                if lower >= best {
                    break;
                }
                let bin = &bins[b];
                let found = if all_pass {
                    bin.tree.nearest_within(p, best, |_| true)
                } else {
                    bin.tree.nearest_within(p, best, |j| normals[bin.members[j]].dot(n) < cos_t)
                };
                if let Some((_, d)) = found {
                    best = best.min(d);
                }
            }
            best.is_finite().then_some(best)
        })
        .collect()
}

/// Thin-structure weight: `min(thickness_scale / max(d, dist_floor), 1)` where `d`
/// is the distance to the nearest scan point whose normal is more than the angle
/// threshold away (the other side of a thin part); 0 when there is none.
///
/// Any such point has an opposite-signed normal component on at least one axis, so
/// this equals taking, per axis, the nearest qualifying point among the opposite-sign
/// half of the cloud and keeping the strongest of the three axis contributions.
pub fn thickness_weights(scan: &SurfaceScan, cfg: &SamplerConfig) -> Vec<f64> {
    opposite_distances(&scan.points, &scan.normals, cfg.thickness_angle_threshold)
        .into_iter()
        .map(|d| d.map_or(0.0, |d| (cfg.thickness_scale / d.max(cfg.dist_floor)).min(1.0)))
        .collect()
}

/// Combines edge, normal, hull-distance and thickness factors into a normalized
/// per-point distribution: `w_edge·w_normal + w_hull_dist·w_hull_dist_normal + w_thickness`.
/// Without a hull the hull term is zero.
pub fn compute_weights(scan: &SurfaceScan, hull: Option<&VoxelGrid>, cfg: &SamplerConfig) -> Result<SampleWeights, SamplingError> {
    let n = scan.len();
    if n == 0 {
        return Err(SamplingError::EmptyScan);
    }
    let w_edge: Vec<f64> = scan.edge.iter().map(|&e| e.clamp(cfg.edge_floor, 1.0)).collect();
    let w_norm: Vec<f64> = (0..n).map(|i| w_normal(scan.rel_h[i], scan.normals[i].z)).collect();
    let w_hull_dist = match hull {
        Some(h) => {
            let boundary = h.boundary_points();
            let diag = h.occupied_bounds().ok_or(SamplingError::EmptyHull)?.diagonal();
            let tree = KdTree::build(&boundary).map_err(|_| SamplingError::EmptyHull)?;
            let scale = cfg.hull_dist_scale * diag;
            scan.points.par_iter().map(|p| (tree.nearest(p).1 / scale).clamp(0.0, 1.0)).collect()
        }
        None => vec![0.0; n],
    };
    let beta = cfg.hull_dist_normal_floor;
    let w_hull_dist_normal: Vec<f64> = w_norm.iter().map(|&w| beta + (1.0 - beta) * w).collect();
    let w_thickness = if cfg.thickness { thickness_weights(scan, cfg) } else { vec![0.0; n] };
    let raw: Vec<f64> =
        (0..n).map(|i| w_edge[i] * w_norm[i] + w_hull_dist[i] * w_hull_dist_normal[i] + w_thickness[i]).collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(SamplingError::ZeroWeights);
    }
    Ok(SampleWeights {
        weight: raw.iter().map(|w| w / total).collect(),
        w_edge,
        w_normal: w_norm,
        w_hull_dist,
        w_hull_dist_normal,
        w_thickness,
    })
}
