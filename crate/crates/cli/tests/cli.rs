use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use orthorecon::blueprint::{extract_views, ViewSetDescriptor};
use orthorecon::field::{save_weights, Network, NetworkConfig};
use orthorecon::geometry::fixtures::{box_mesh, car_proxy};
use orthorecon::geometry::{load_mesh, save_mesh, MeshFormat, TriangleMesh, Vec3};
use orthorecon::image::read_png;
use orthorecon::sampling::read_samples;
use tempfile::TempDir;

const TOY_CONFIG: &str = r#"
[paths]
meshes = "meshes"
blueprints = "blueprints"
samples = "samples"
checkpoints = "checkpoints"

[sampler]
hull_resolution = 64

[network]
mlp_hidden = [32, 16]

[network.encoder]
stacks = 1
feature_depth = 8
max_input_dim = 64

[train]
optimizer = "adam"
learning_rate = 0.001
iterations = 20
samples_per_step = 128

[reconstruct]
resolution = 40
"#;

struct Project {
    dir: TempDir,
}

impl Project {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("orthorecon.toml"), TOY_CONFIG).unwrap();
        std::fs::create_dir_all(dir.path().join("meshes")).unwrap();
        Self { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn write_mesh(&self, name: &str, mesh: &TriangleMesh) -> PathBuf {
        let path = self.path(&format!("meshes/{name}.obj"));
        std::fs::write(&path, save_mesh(mesh, MeshFormat::Obj)).unwrap();
        path
    }

    /// Runs the binary inside the project directory, so `orthorecon.toml` is found.
    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_orthorecon")).args(args).current_dir(self.dir.path()).output().unwrap()
    }

    fn ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
        out
    }

    /// Car proxy drawn and sampled, ready for training.
    fn car_dataset(&self) {
        self.write_mesh("car", &car_proxy());
        self.ok(&["synth", "--all"]);
        self.ok(&["prep", "--all"]);
    }
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn unit_cube() -> TriangleMesh {
    box_mesh(Vec3::new(-0.5, -0.5, -0.5), Vec3::new(0.5, 0.5, 0.5))
}

fn volume(path: &Path) -> f64 {
    load_mesh(&std::fs::read(path).unwrap(), MeshFormat::Obj).unwrap().signed_volume()
}

#[test]
fn printed_default_config_is_loadable() {
    let p = Project::new();
    let out = p.ok(&["--print-config"]);
    std::fs::write(p.path("orthorecon.toml"), &out.stdout).unwrap();
    p.write_mesh("cube", &unit_cube());
    p.ok(&["synth", "meshes/cube.obj", "--out", "drawn"]);
    assert!(p.path("drawn/cube.png").is_file());
}

#[test]
fn prep_writes_reproducible_sample_files() {
    let p = Project::new();
    p.write_mesh("cube", &unit_cube());
    p.ok(&["prep", "meshes/cube.obj"]);
    let first = std::fs::read(p.path("samples/cube.sdfs")).unwrap();
    let set = read_samples(&first).unwrap();
    assert!((20_000..=25_000).contains(&set.len()), "{} samples", set.len());
    let ply = std::fs::read(p.path("samples/cube.weights.ply")).unwrap();
    assert!(ply.starts_with(b"ply\n"));

    p.ok(&["prep", "meshes/cube.obj"]);
    assert_eq!(std::fs::read(p.path("samples/cube.sdfs")).unwrap(), first, "reruns are byte-identical");

    p.ok(&["prep", "meshes/cube.obj", "--seed", "1", "--out", "other"]);
    assert_ne!(std::fs::read(p.path("other/cube.sdfs")).unwrap(), first);
}

#[test]
fn prep_needs_inputs() {
    let p = Project::new();
    let out = p.run(&["prep"]);
    assert_eq!(code(&out), 2);
    let out = p.run(&["prep", "--all"]);
    assert_eq!(code(&out), 2, "empty mesh directory");
}

#[test]
fn batch_continues_past_broken_meshes() {
    let p = Project::new();
    std::fs::write(p.path("meshes/broken.obj"), "v 0 0 0\nf 1 2 3\n").unwrap();
    p.write_mesh("cube", &unit_cube());
    let out = p.run(&["synth", "--all"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("[broken]"), "{}", stderr(&out));
    assert!(p.path("blueprints/cube.png").is_file(), "later meshes are still processed");
    assert!(!p.path("blueprints/broken.png").exists());
}

#[test]
fn synth_output_round_trips_through_view_extraction() {
    let p = Project::new();
    p.write_mesh("car", &car_proxy());
    p.ok(&["synth", "meshes/car.obj"]);
    let sheet = read_png(&std::fs::read(p.path("blueprints/car.png")).unwrap()).unwrap().into_gray();
    let desc: ViewSetDescriptor = serde_json::from_slice(&std::fs::read(p.path("blueprints/car.views.json")).unwrap()).unwrap();
    assert!(desc.is_finalized());
    let cut = extract_views(&sheet, 4).unwrap();
    for truth in &desc.views {
        let found = cut.views.iter().map(|v| v.bbox.edge_error(&truth.bbox)).min().unwrap();
        assert!(found <= 1, "{truth:?}");
    }
    for view in ["front", "back", "side", "top"] {
        assert!(p.path(&format!("blueprints/car.{view}.png")).is_file());
    }
    let before = std::fs::read(p.path("blueprints/car.png")).unwrap();
    p.ok(&["synth", "meshes/car.obj"]);
    assert_eq!(std::fs::read(p.path("blueprints/car.png")).unwrap(), before);
}

#[test]
fn train_names_the_mesh_without_samples() {
    let p = Project::new();
    p.write_mesh("wagon", &unit_cube());
    p.ok(&["synth", "--all"]);
    std::fs::create_dir_all(p.path("samples")).unwrap();
    let out = p.run(&["train"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("'wagon'"), "{}", stderr(&out));
}

#[test]
fn resumed_training_continues_the_same_curve() {
    let p = Project::new();
    p.car_dataset();
    p.ok(&["train", "--iterations", "40", "--out", "checkpoints/straight.pafw"]);
    p.ok(&["train", "--iterations", "20", "--out", "checkpoints/split.pafw"]);
    p.ok(&["train", "--iterations", "20", "--resume", "checkpoints/split.pafw", "--out", "checkpoints/split.pafw"]);
    assert_eq!(
        std::fs::read(p.path("checkpoints/split.pafw")).unwrap(),
        std::fs::read(p.path("checkpoints/straight.pafw")).unwrap()
    );
    let straight = std::fs::read_to_string(p.path("checkpoints/straight.loss.csv")).unwrap();
    let split = std::fs::read_to_string(p.path("checkpoints/split.loss.csv")).unwrap();
    assert_eq!(split, straight);
    assert_eq!(straight.lines().count(), 41);
}

#[test]
fn reconstruct_exports_and_lower_threshold_thickens() {
    let p = Project::new();
    p.car_dataset();
    p.ok(&["train", "--iterations", "300"]);
    let views = "blueprints/car.views.json";
    p.ok(&["reconstruct", "blueprints/car.png", "--views", views, "--out", "out/r50.obj", "--grid-out", "out/grid.sgrd"]);
    p.ok(&["reconstruct", "blueprints/car.png", "--views", views, "--out", "out/r45.obj", "--iso", "0.45"]);
    let (v50, v45) = (volume(&p.path("out/r50.obj")), volume(&p.path("out/r45.obj")));
    assert!(v50 > 0.0, "trained field yields a surface");
    assert!(v45 >= v50, "iso 0.45 volume {v45} < iso 0.5 volume {v50}");
    let grid = std::fs::read(p.path("out/grid.sgrd")).unwrap();
    assert!(grid.starts_with(b"SGRD"));

    let out = p.run(&["eval", "out/r50.obj", "meshes/car.obj", "--json"]);
    let m: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(m["iou"].as_f64().unwrap() > 0.3, "{m}");
}

#[test]
fn reconstruct_asks_for_review_when_labels_are_ambiguous() {
    let p = Project::new();
    p.write_mesh("car", &car_proxy());
    p.ok(&["synth", "--all"]);
    std::fs::create_dir_all(p.path("checkpoints")).unwrap();
    let toy = NetworkConfig { mlp_hidden: vec![32, 16], ..NetworkConfig::toy() };
    std::fs::write(p.path("checkpoints/model.pafw"), save_weights(&Network::<f32>::new(&toy, 0).unwrap(), None)).unwrap();

    let out = p.run(&["reconstruct", "blueprints/car.png"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("review"), "{}", stderr(&out));

    p.ok(&["synth", "--all", "--resolution", "128", "--out", "big"]);
    let out = p.run(&["reconstruct", "big/car.png", "--views", "big/car.views.json"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("52..=76"), "{}", stderr(&out));

    let out = p.run(&["reconstruct", "big/car.png", "--views", "blueprints/car.views.json"]);
    assert_eq!(code(&out), 2, "views of another sheet");
    let out = p.run(&["reconstruct", "blueprints/car.png", "--views", "blueprints/car.views.json", "--iso", "1.0"]);
    assert_eq!(code(&out), 2);
    let out = p.run(&["reconstruct", "blueprints/car.png", "--views", "blueprints/car.views.json", "--out", "x.fbx"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn eval_reports_overlap() {
    let p = Project::new();
    p.write_mesh("a", &unit_cube());
    p.write_mesh("half", &box_mesh(Vec3::new(-0.5, -0.5, -0.5), Vec3::new(0.0, 0.0, 0.0)));
    let out = p.ok(&["eval", "meshes/a.obj", "meshes/a.obj"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("iou 1.000000"));
    let out = p.ok(&["eval", "meshes/half.obj", "meshes/a.obj", "--json"]);
    let m: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((m["iou"].as_f64().unwrap() - 0.125).abs() < 1e-9, "{m}");
}

#[test]
fn invalid_configuration_and_arguments_exit_with_two() {
    let p = Project::new();
    std::fs::write(p.path("bad.toml"), "[train]\niteration = 3\n").unwrap();
    let out = p.run(&["--config", "bad.toml", "eval", "a.obj", "b.obj"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("iteration"), "{}", stderr(&out));
    assert_eq!(code(&p.run(&["--config", "missing.toml", "eval", "a.obj", "b.obj"])), 2);
    assert_eq!(code(&p.run(&["train", "--optimizer", "rmsprop"])), 2);
    assert_eq!(code(&p.run(&["eval", "nope.obj", "nope.obj"])), 2);
    assert_eq!(code(&p.run(&[])), 2);
}
