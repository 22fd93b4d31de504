use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, InsideTester, KdTree, TriangleMesh, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Occupancy cells along the longest axis of the joint bounding box.
    pub grid: usize,
    /// Surface points drawn from each mesh for the Chamfer distance.
    pub samples: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { grid: 128, samples: 20_000, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Volumetric intersection over union of the enclosed regions.
    pub iou: f64,
    /// Mean of the two directional mean nearest-neighbour distances between
    /// surface samples.
    pub chamfer: f64,
}

fn occupancy_iou(a: &TriangleMesh, b: &TriangleMesh, cells: usize) -> f64 {
    let boxes: Vec<Aabb> = [a.bounds(), b.bounds()].into_iter().flatten().collect();
    let Some(first) = boxes.first() else { return 1.0 };
    let bounds = boxes.iter().fold(*first, |acc, bx| Aabb::new(acc.min.inf(&bx.min), acc.max.sup(&bx.max)));
    let ext = bounds.extent();
    let h = ext.max() / cells.max(1) as f64;
    if h <= 0.0 {
        return 1.0;
    }
    let n = ext.map(|e| ((e / h - 1e-9).ceil() as usize).max(1));
    let (ta, tb) = (InsideTester::new(a), InsideTester::new(b));
    let (inter, union) = (0..n.z)
        .into_par_iter()
        .map(|k| {
            let (mut inter, mut union) = (0u64, 0u64);
            for j in 0..n.y {
                for i in 0..n.x {
                    let p = bounds.min + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * h;
                    let (ia, ib) = (ta.contains(&p), tb.contains(&p));
                    inter += (ia && ib) as u64;
                    union += (ia || ib) as u64;
                }
            }
            (inter, union)
        })
        .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

fn mean_nearest(from: &[Vec3], to: &KdTree) -> f64 {
    from.par_iter().map(|p| to.nearest(p).1).sum::<f64>() / from.len() as f64
}

/// Volumetric IoU by parity inside tests at cell centres of a grid over both meshes,
/// and the symmetric Chamfer distance between seeded surface samples. An empty mesh
/// against a non-empty one scores IoU 0 and an infinite Chamfer distance.
pub fn eval_metrics(recon: &TriangleMesh, truth: &TriangleMesh, cfg: &EvalConfig) -> Metrics {
    let iou = occupancy_iou(recon, truth, cfg.grid);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pa: Vec<Vec3> = recon.sample_surface(cfg.samples, &mut rng).into_iter().map(|s| s.0).collect();
    let pb: Vec<Vec3> = truth.sample_surface(cfg.samples, &mut rng).into_iter().map(|s| s.0).collect();
    let chamfer = match (KdTree::build(&pa), KdTree::build(&pb)) {
        (Ok(ta), Ok(tb)) => 0.5 * (mean_nearest(&pa, &tb) + mean_nearest(&pb, &ta)),
        _ if pa.is_empty() && pb.is_empty() => 0.0,
        _ => f64::INFINITY,
    };
    Metrics { iou, chamfer }
}
