//! Sample file fixture and the statistics of weighted sample drawing.

use orthorecon::geometry::fixtures::cube_with_fin;
use orthorecon::sampling::{compute_weights, draw_samples, read_samples, scan_mesh, write_samples, SamplerConfig};

#[test]
fn fixture_with_three_records_parses_exactly() {
    let bytes = std::fs::read(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/three_samples.sdfs")).unwrap();
    let set = read_samples(&bytes).unwrap();
    assert_eq!(set.len(), 3);
    let r = &set.records;
    assert_eq!(r[0].position, [0.25, -0.125, 0.5]);
    assert_eq!((r[0].sdf, r[0].normal, r[0].edge, r[0].value, r[0].surface), (-0.0625, [0.0, 0.0, 1.0], 0.75, 0.8125, true));
    assert_eq!(r[1].position, [-0.5, 0.375, -0.25]);
    assert_eq!((r[1].sdf, r[1].normal, r[1].edge, r[1].value, r[1].surface), (0.25, [1.0, 0.0, 0.0], 0.0, 0.0, false));
    assert_eq!(r[2].position, [0.0, 0.0, 0.0]);
    assert_eq!((r[2].sdf, r[2].normal, r[2].edge, r[2].value, r[2].surface), (0.0, [0.0, -1.0, 0.0], 1.0, 0.5, true));
    assert_eq!(write_samples(&set), bytes);
}

/// Upper 1% point of the χ² distribution with 9 degrees of freedom.
const CHI2_9DF_99: f64 = 21.666;

#[test]
fn drawn_surface_samples_follow_the_weights() {
    let mesh = cube_with_fin();
    let cfg = SamplerConfig { n_samples: 20_000, uniform_fraction: 0.0, surface_sigma: 1e-9, seed: 17, ..Default::default() };
    let scan = scan_mesh(&mesh, cfg.scan_cameras, 48.0).unwrap();
    let w = compute_weights(&scan, None, &cfg).unwrap();
    assert!((w.weight.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    // Ten buckets of scan points by X coordinate, each with its probability mass.
    let mut order: Vec<usize> = (0..scan.points.len()).collect();
    order.sort_by(|&a, &b| scan.points[a].x.total_cmp(&scan.points[b].x));
    let mut bucket = vec![0usize; scan.points.len()];
    let mut expected = [0.0f64; 10];
    for (rank, &i) in order.iter().enumerate() {
        bucket[i] = rank * 10 / order.len();
        expected[bucket[i]] += w.weight[i];
    }
    let set = draw_samples(&scan, &w, &cfg).unwrap();
    let mut observed = [0usize; 10];
    for r in &set.records {
        let p = orthorecon::geometry::Vec3::new(r.position[0] as f64, r.position[1] as f64, r.position[2] as f64);
        observed[bucket[scan.nearest(&p).0]] += 1;
    }
    let n = set.len() as f64;
    let chi2: f64 = (0..10).map(|b| (observed[b] as f64 - n * expected[b]).powi(2) / (n * expected[b])).sum();
    assert!(chi2 < CHI2_9DF_99, "χ² = {chi2}, observed {observed:?}");
}
