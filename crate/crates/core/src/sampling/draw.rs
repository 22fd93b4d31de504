use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;

use crate::geometry::{write_colored_points_ply, Vec3};

use super::{SampleWeights, SamplerConfig, SamplingError, SurfaceScan};

const MAGIC: &[u8; 4] = b"SDFS";
const VERSION: u32 = 1;
const RECORD_BYTES: usize = 9 * 4 + 1;

/// Maps a signed distance onto `[0, 1]`: 0.5 on the surface, 1 at `-tau` and
/// deeper inside, 0 at `tau` and farther outside.
pub fn tsdf_map(sdf: f64, tau: f64) -> f64 {
    (0.5 - sdf / (2.0 * tau)).clamp(0.0, 1.0)
}

/// One training sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleRecord {
    pub position: [f32; 3],
    pub sdf: f32,
    pub normal: [f32; 3],
    pub edge: f32,
    /// `tsdf_map(sdf)` under the truncation the set was drawn with.
    pub value: f32,
    /// Drawn near the surface (true) or uniformly in the box (false).
    pub surface: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleSet {
    pub records: Vec<SampleRecord>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn to_f32(v: &Vec3) -> [f32; 3] {
    [v.x as f32, v.y as f32, v.z as f32]
}

/// Draws `(1 - uniform_fraction)·n` surface samples from the weight distribution
/// (with replacement, each offset by isotropic Gaussian noise of std `σ`) followed
/// by the uniform samples inside the scan bounds inflated by `3σ`. Annotation with
/// signed distance, nearest normal and edge runs in parallel but the output order
/// depends only on the seed.
pub fn draw_samples(scan: &SurfaceScan, weights: &SampleWeights, cfg: &SamplerConfig) -> Result<SampleSet, SamplingError> {
    cfg.validate()?;
    if scan.is_empty() {
        return Err(SamplingError::EmptyScan);
    }
    let index = WeightedIndex::new(&weights.weight).map_err(|_| SamplingError::ZeroWeights)?;
    let noise = Normal::new(0.0, cfg.surface_sigma).map_err(|e| SamplingError::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_uniform = (cfg.n_samples as f64 * cfg.uniform_fraction).round() as usize;
    let n_surface = cfg.n_samples - n_uniform;
    let mut positions = Vec::with_capacity(cfg.n_samples);
    for _ in 0..n_surface {
        let p = scan.points[index.sample(&mut rng)];
        let offset = Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
        positions.push((p + offset, true));
    }
    let b = scan.bounds.inflate(3.0 * cfg.surface_sigma);
    for _ in 0..n_uniform {
        let p = Vec3::new(
            rng.random_range(b.min.x..=b.max.x),
            rng.random_range(b.min.y..=b.max.y),
            rng.random_range(b.min.z..=b.max.z),
        );
        positions.push((p, false));
    }
    let records = positions
        .par_iter()
        .map(|&(p, surface)| {
            let (nearest, dist) = scan.nearest(&p);
            let sdf = if scan.is_inside(&p) { -dist } else { dist } as f32;
            SampleRecord {
                position: to_f32(&p),
                sdf,
                normal: to_f32(&scan.normals[nearest]),
                edge: scan.edge[nearest] as f32,
                value: tsdf_map(sdf as f64, cfg.truncation) as f32,
                surface,
            }
        })
        .collect();
    Ok(SampleSet { records })
}

/// Little-endian: magic, version, count, then per record 9 `f32` (position, sdf,
/// normal, edge, value) and one byte for the surface flag.
pub fn write_samples(set: &SampleSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + set.len() * RECORD_BYTES);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(set.len() as u32).to_le_bytes());
    for r in &set.records {
        let fields = [r.position[0], r.position[1], r.position[2], r.sdf, r.normal[0], r.normal[1], r.normal[2], r.edge, r.value];
        for f in fields {
            out.extend_from_slice(&f.to_le_bytes());
        }
        out.push(u8::from(r.surface));
    }
    out
}

pub fn read_samples(bytes: &[u8]) -> Result<SampleSet, SamplingError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(SamplingError::BadMagic);
    }
    if bytes.len() < 12 {
        return Err(SamplingError::Truncated { expected: 12, found: bytes.len() });
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(SamplingError::UnsupportedVersion(version));
    }
    let count = u32_at(8) as usize;
    let expected = 12 + count * RECORD_BYTES;
    if bytes.len() < expected {
        return Err(SamplingError::Truncated { expected, found: bytes.len() });
    }
    let records = (0..count)
        .map(|i| {
            let base = 12 + i * RECORD_BYTES;
            let f = |k: usize| f32::from_le_bytes(bytes[base + 4 * k..base + 4 * k + 4].try_into().unwrap());
            SampleRecord {
                position: [f(0), f(1), f(2)],
                sdf: f(3),
                normal: [f(4), f(5), f(6)],
                edge: f(7),
                value: f(8),
                surface: bytes[base + 36] != 0,
            }
        })
        .collect();
    Ok(SampleSet { records })
}

/// Scan points as a binary PLY colored from blue (lowest weight) to red (highest).
pub fn weight_diagnostics_ply(scan: &SurfaceScan, weights: &[f64]) -> Vec<u8> {
    let (lo, hi) = weights.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &w| (a.min(w), b.max(w)));
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let colors: Vec<[u8; 3]> = weights
        .iter()
        .map(|&w| {
            let t = ((w - lo) / span).clamp(0.0, 1.0);
            let g = 1.0 - (2.0 * t - 1.0).abs();
            [(255.0 * t) as u8, (255.0 * g) as u8, (255.0 * (1.0 - t)) as u8]
        })
        .collect();
    write_colored_points_ply(&scan.points, &colors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fixtures::icosphere;
    use crate::sampling::{compute_weights, scan_mesh};

    #[test]
    fn tsdf_endpoints_and_monotonicity() {
        assert_eq!(tsdf_map(0.0, 0.1), 0.5);
        assert_eq!(tsdf_map(0.1, 0.1), 0.0);
        assert_eq!(tsdf_map(0.3, 0.1), 0.0);
        assert_eq!(tsdf_map(-0.1, 0.1), 1.0);
        assert_eq!(tsdf_map(-2.0, 0.1), 1.0);
        let mut prev = 1.0;
        for i in -100..=100 {
            let v = tsdf_map(i as f64 * 0.002, 0.1);
            assert!(v <= prev);
            prev = v;
        }
    }

    fn small_set() -> (SurfaceScan, SampleSet, SamplerConfig) {
        let scan = scan_mesh(&icosphere(Vec3::zeros(), 0.5, 3), 18, 48.0).unwrap();
        let cfg = SamplerConfig { n_samples: 3000, seed: 9, ..Default::default() };
        let w = compute_weights(&scan, None, &cfg).unwrap();
        let set = draw_samples(&scan, &w, &cfg).unwrap();
        (scan, set, cfg)
    }

    #[test]
    fn draw_is_deterministic_and_annotated() {
        let (scan, set, cfg) = small_set();
        let w = compute_weights(&scan, None, &cfg).unwrap();
        assert_eq!(draw_samples(&scan, &w, &cfg).unwrap(), set);
        assert_eq!(set.len(), 3000);
        assert_eq!(set.records.iter().filter(|r| !r.surface).count(), 300);
        for r in &set.records {
            assert_eq!(r.value, tsdf_map(r.sdf as f64, cfg.truncation) as f32);
            let n = (r.normal[0].powi(2) + r.normal[1].powi(2) + r.normal[2].powi(2)).sqrt();
            assert!((n - 1.0).abs() < 1e-4);
        }
        let other = draw_samples(&scan, &w, &SamplerConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(other, set);
    }

    #[test]
    fn surface_samples_stay_near_the_scan() {
        let (scan, set, cfg) = small_set();
        let surface: Vec<&SampleRecord> = set.records.iter().filter(|r| r.surface).collect();
        let near = surface
            .iter()
            .filter(|r| {
                let p = Vec3::new(r.position[0] as f64, r.position[1] as f64, r.position[2] as f64);
                scan.nearest(&p).1 <= 3.0 * cfg.surface_sigma
            })
            .count();
        assert!(near as f64 >= 0.99 * surface.len() as f64, "{near}/{}", surface.len());
    }

    #[test]
    fn file_round_trip_and_errors() {
        let (_, set, _) = small_set();
        let bytes = write_samples(&set);
        assert_eq!(bytes.len(), 12 + set.len() * 37);
        assert_eq!(read_samples(&bytes).unwrap(), set);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_samples(&bad), Err(SamplingError::BadMagic)));
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(read_samples(&v2), Err(SamplingError::UnsupportedVersion(2))));
        assert!(matches!(read_samples(&bytes[..100]), Err(SamplingError::Truncated { .. })));
    }
}
