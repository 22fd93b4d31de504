//! Grid evaluation, surface extraction, artifact filtering and metrics.

use std::collections::HashMap;

use orthorecon::blueprint::{synth_blueprint, LabelKind, SynthOptions, ViewSet};
use orthorecon::field::{Network, NetworkConfig, PixelAlignedField};
use orthorecon::geometry::fixtures::{box_mesh, icosphere};
use orthorecon::geometry::{TriangleMesh, Vec3};
use orthorecon::reconstruct::{
    components, eval_metrics, evaluate_grid, fit_to_trained_size, largest_component, marching_cubes, reconstruct, EvalConfig,
    ReconstructConfig, ReconstructError, ScalarGrid,
};
use orthorecon::sampling::tsdf_map;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn open_edges(mesh: &TriangleMesh) -> usize {
    let mut counts: HashMap<(u32, u32), usize> = HashMap::new();
    for t in &mesh.triangles {
        for e in 0..3 {
            let (a, b) = (t[e], t[(e + 1) % 3]);
            *counts.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    counts.values().filter(|&&c| c != 2).count()
}

fn car_views() -> ViewSet {
    synth_blueprint(&orthorecon::geometry::fixtures::car_proxy(), &SynthOptions::default()).unwrap().views
}

fn scaled(views: &ViewSet, factor: f64) -> ViewSet {
    let mut out = views.clone();
    for v in &mut out.views {
        let (w, h) = ((v.image.width() as f64 * factor).round() as usize, (v.image.height() as f64 * factor).round() as usize);
        v.image = v.image.resize(w, h);
    }
    out
}

fn largest_dim(views: &ViewSet) -> usize {
    views.views.iter().map(|v| v.image.width().max(v.image.height())).max().unwrap()
}

#[test]
fn constant_field_fills_a_uniform_grid() {
    let g = car_views().geometry().unwrap();
    let mut net = Network::<f32>::zeros(&NetworkConfig::toy()).unwrap();
    net.tensor_mut("mlp.3.bias").unwrap()[0] = -1.25;
    let field = PixelAlignedField::build(&net, &g).unwrap();
    let grid = evaluate_grid(&field, &g.bounds, 12).unwrap();
    let expected = (1.0 / (1.0 + 1.25f64.exp())) as f32;
    assert!(grid.values.iter().all(|&v| v == expected));
    assert!(marching_cubes(&grid, 0.5).unwrap().is_empty());
}

#[test]
fn analytic_sphere_grid_matches_the_formula_at_every_node() {
    let b = orthorecon::geometry::Aabb::new(Vec3::repeat(-0.5), Vec3::repeat(0.5));
    let cover = ScalarGrid::covering(&b, 59).unwrap();
    assert_eq!(cover.dims, [64; 3]);
    let f = |p: &Vec3| tsdf_map(p.norm() - 0.35, 0.1);
    let g = ScalarGrid::from_fn(cover.dims, cover.origin, cover.spacing, f);
    for n in 0..g.len() {
        assert!((g.values[n] as f64 - f(&g.node(n))).abs() < 1e-6);
    }
}

#[test]
fn refining_the_grid_stays_within_the_lipschitz_bound() {
    // f = 0.5 + 0.3·sin(3x)·cos(2y) + 0.1·z has |∇f| ≤ √(0.9² + 0.6² + 0.1²).
    let f = |p: &Vec3| 0.5 + 0.3 * (3.0 * p.x).sin() * (2.0 * p.y).cos() + 0.1 * p.z;
    let lipschitz = (0.81f64 + 0.36 + 0.01).sqrt();
    let b = orthorecon::geometry::Aabb::new(Vec3::new(-0.5, -0.3, -0.2), Vec3::new(0.5, 0.3, 0.2));
    let at = |res| {
        let g = ScalarGrid::covering(&b, res).unwrap();
        ScalarGrid::from_fn(g.dims, g.origin, g.spacing, f)
    };
    let (coarse, fine) = (at(16), at(32));
    let worst = (0..fine.len())
        .map(|n| (coarse.sample(&fine.node(n)) - fine.values[n] as f64).abs())
        .filter(|d| d.is_finite())
        .fold(0.0, f64::max);
    let inside = coarse.bounds();
    assert!(inside.contains(&fine.bounds().center()));
    assert!(worst <= lipschitz * coarse.spacing * 3f64.sqrt(), "{worst}");
    assert!(worst > 0.0);
}

#[test]
fn sphere_vs_cube_iou_matches_monte_carlo() {
    let sphere = icosphere(Vec3::zeros(), 0.5, 4);
    let cube = box_mesh(Vec3::repeat(-0.35), Vec3::repeat(0.35));
    let m = eval_metrics(&sphere, &cube, &EvalConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut inter, mut union) = (0u64, 0u64);
    for _ in 0..400_000 {
        let p = Vec3::from_fn(|_, _| rng.random_range(-0.5..0.5));
        let (s, c) = (p.norm() < 0.5, p.amax() < 0.35);
        inter += (s && c) as u64;
        union += (s || c) as u64;
    }
    let oracle = inter as f64 / union as f64;
    assert!((m.iou - oracle).abs() / oracle < 0.02, "{} vs {oracle}", m.iou);
    // Chamfer between concentric shapes is bounded by their radial gap.
    assert!(m.chamfer > 0.0 && m.chamfer < 0.5 * 3f64.sqrt() - 0.35 + 0.15);
}

#[test]
fn views_within_twenty_percent_are_resized() {
    let views = car_views();
    let trained = NetworkConfig::toy().encoder.max_input_dim;
    assert_eq!(largest_dim(&views), trained);
    let big = scaled(&views, 1.19);
    assert_eq!(largest_dim(&big), 76);
    let g = fit_to_trained_size(&big, trained).unwrap();
    assert_eq!(g.images.iter().map(|i| i.width().max(i.height())).max(), Some(trained));
    let net = Network::<f32>::new(&NetworkConfig::toy(), 0).unwrap();
    let cfg = ReconstructConfig { resolution: 12, ..Default::default() };
    assert!(reconstruct(&big, &net, &cfg).is_ok());
    let err = reconstruct(&scaled(&views, 2.0), &net, &cfg).unwrap_err();
    assert!(matches!(err, ReconstructError::SizeMismatch { largest: 128, trained: 64, .. }), "{err}");
    assert!(err.to_string().contains("52..=76"));
}

#[test]
fn unresolved_labels_are_refused() {
    let mut views = car_views();
    views.views[0].label.kind = LabelKind::Unresolved;
    let net = Network::<f32>::new(&NetworkConfig::toy(), 0).unwrap();
    let err = reconstruct(&views, &net, &ReconstructConfig { resolution: 8, ..Default::default() }).unwrap_err();
    assert!(matches!(err, ReconstructError::Unfinalized(_)), "{err}");
    let bad_iso = ReconstructConfig { iso: 0.0, ..Default::default() };
    assert!(matches!(reconstruct(&car_views(), &net, &bad_iso), Err(ReconstructError::Config(_))));
}

/// Sum of Gaussian bumps on an `n³` grid over the unit cube.
fn blob_grid(n: usize, blobs: &[(Vec3, f64)]) -> ScalarGrid {
    let blobs = blobs.to_vec();
    ScalarGrid::from_fn([n; 3], Vec3::zeros(), 1.0 / (n - 1) as f64, move |p| {
        blobs.iter().map(|(c, r)| (-(p - c).norm_squared() / (r * r)).exp()).sum::<f64>().min(1.0)
    })
}

fn blob_strategy() -> impl Strategy<Value = Vec<(Vec3, f64)>> {
    prop::collection::vec(((0.1f64..0.9, 0.1f64..0.9, 0.1f64..0.9), 0.08f64..0.3), 1..5)
        .prop_map(|v| v.into_iter().map(|((x, y, z), r)| (Vec3::new(x, y, z), r)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn extraction_is_closed_and_grows_as_iso_drops(blobs in blob_strategy(), iso in 0.2f32..0.8) {
        let g = blob_grid(14, &blobs);
        let hi = marching_cubes(&g, iso).unwrap();
        let lo = marching_cubes(&g, iso - 0.05).unwrap();
        prop_assert_eq!(open_edges(&hi), 0);
        prop_assert_eq!(open_edges(&lo), 0);
        prop_assert!(lo.signed_volume() >= hi.signed_volume() - 1e-12);
        prop_assert!(hi.signed_volume() >= 0.0);
    }

    #[test]
    fn largest_component_is_idempotent(blobs in blob_strategy()) {
        let mesh = marching_cubes(&blob_grid(12, &blobs), 0.5).unwrap();
        prop_assume!(!mesh.is_empty());
        let once = largest_component(&mesh).unwrap();
        prop_assert_eq!(components(&once).len(), 1);
        prop_assert_eq!(largest_component(&once).unwrap(), once.clone());
        for c in components(&mesh) {
            prop_assert!(c.signed_volume() <= once.signed_volume());
        }
    }
}
