use std::path::{Path, PathBuf};

use clap::Args;
use orthorecon::geometry::normalize_mesh;
use orthorecon::sampling::{
    compute_weights, draw_samples, mesh_silhouettes, scan_mesh, visual_hull, weight_diagnostics_ply, write_samples,
    SamplerConfig,
};

use super::{log, mesh_inputs, read_mesh, run_batch, write_file};
use crate::config::ProjectConfig;
use crate::error::CliError;

#[derive(Debug, Args)]
pub struct PrepArgs {
    /// Mesh files to sample.
    pub meshes: Vec<PathBuf>,
    /// Process every mesh in the configured mesh directory.
    #[arg(long)]
    pub all: bool,
    /// Output directory (default: paths.samples).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Samples per mesh (default: sampler.n_samples).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Sampling seed (default: sampler.seed).
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Normalizes one mesh, scans it, weights the scan points and writes the drawn
/// samples plus a weight-colored point cloud.
fn prep_one(path: &Path, name: &str, cfg: &SamplerConfig, out: &Path) -> Result<(), CliError> {
    let (mesh, _) = normalize_mesh(&read_mesh(path)?)?;
    let bounds = mesh.bounds().expect("normalized mesh has bounds");
    let scan = scan_mesh(&mesh, cfg.scan_cameras, cfg.scan_resolution)?;
    let silhouettes = mesh_silhouettes(&mesh, cfg.hull_resolution as f64)?;
    let hull = visual_hull(&silhouettes, &bounds, cfg.hull_resolution)?;
    let weights = compute_weights(&scan, Some(&hull), cfg)?;
    let samples = draw_samples(&scan, &weights, cfg)?;
    let sample_path = out.join(format!("{name}.sdfs"));
    write_file(&sample_path, &write_samples(&samples))?;
    write_file(&out.join(format!("{name}.weights.ply")), &weight_diagnostics_ply(&scan, &weights.weight))?;
    log(name, format!("{} scan points, {} samples -> {}", scan.len(), samples.len(), sample_path.display()));
    Ok(())
}

pub fn prep(args: &PrepArgs, project: &ProjectConfig) -> Result<(), CliError> {
    let mut cfg = project.sampler.clone();
    cfg.n_samples = args.samples.unwrap_or(cfg.n_samples);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.validate()?;
    let inputs = mesh_inputs(&args.meshes, args.all, &project.paths.meshes)?;
    let out = args.out.clone().unwrap_or_else(|| project.paths.samples.clone());
    run_batch(&inputs, |path, name| prep_one(path, name, &cfg, &out))
}
