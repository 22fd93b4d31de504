use std::path::PathBuf;

use clap::Args;
use orthorecon::blueprint::{extract_views, SourceSize, ViewSet, ViewSetDescriptor};
use orthorecon::field::read_checkpoint;
use orthorecon::geometry::save_mesh;
use orthorecon::image::read_png;
use orthorecon::reconstruct::{self, ReconstructConfig};

use super::{log, mesh_format, read_file, write_file};
use crate::config::ProjectConfig;
use crate::error::CliError;

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Blueprint sheet (PNG).
    pub sheet: PathBuf,
    /// Finalized views for the sheet (JSON as written by `synth` or the service).
    /// Without it the views are cut automatically, which needs the user whenever
    /// labels stay ambiguous.
    #[arg(long)]
    pub views: Option<PathBuf>,
    /// Weights file (default: <paths.checkpoints>/model.pafw).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Output mesh; the extension picks OBJ, STL or PLY (default: sheet name + .obj).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Extraction threshold in (0, 1).
    #[arg(long)]
    pub iso: Option<f64>,
    /// Voxels across the vehicle length.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Keep only the largest component (true/false).
    #[arg(long)]
    pub keep_largest: Option<bool>,
    /// Also write the evaluated grid as an SGRD dump.
    #[arg(long)]
    pub grid_out: Option<PathBuf>,
}

pub fn reconstruct(args: &ReconstructArgs, project: &ProjectConfig) -> Result<(), CliError> {
    let cfg = ReconstructConfig {
        iso: args.iso.unwrap_or(project.reconstruct.iso),
        resolution: args.resolution.unwrap_or(project.reconstruct.resolution),
        keep_largest: args.keep_largest.unwrap_or(project.reconstruct.keep_largest),
    };
    cfg.validate()?;
    let out = args.out.clone().unwrap_or_else(|| args.sheet.with_extension("obj"));
    let format = mesh_format(&out)?;
    let name = super::item_name(&args.sheet);

    let sheet = read_png(&read_file(&args.sheet)?)
        .map_err(|e| CliError::input(format!("{}: {e}", args.sheet.display())))?
        .into_gray();
    let views = match &args.views {
        Some(path) => {
            let desc: ViewSetDescriptor = serde_json::from_slice(&read_file(path)?)
                .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            if desc.source_size != (SourceSize { width: sheet.width(), height: sheet.height() }) {
                return Err(CliError::input(format!(
                    "{}: views describe a {}x{} sheet but the image is {}x{}",
                    path.display(),
                    desc.source_size.width,
                    desc.source_size.height,
                    sheet.width(),
                    sheet.height()
                )));
            }
            ViewSet::from_descriptor(&sheet, &desc)?
        }
        None => extract_views(&sheet, 4)?,
    };
    let ck_path = args.checkpoint.clone().unwrap_or_else(|| project.paths.checkpoints.join("model.pafw"));
    let net = read_checkpoint(&read_file(&ck_path)?)
        .and_then(|c| c.network())
        .map_err(|e| CliError::input(format!("{}: {e}", ck_path.display())))?;

    let result = reconstruct::reconstruct(&views, &net, &cfg)?;
    if let Some(path) = &args.grid_out {
        write_file(path, &result.grid.to_bytes())?;
    }
    write_file(&out, &save_mesh(&result.mesh, format))?;
    log(
        &name,
        format!(
            "grid {:?}, {} triangles, volume {:.5} -> {}",
            result.grid.dims,
            result.mesh.triangles.len(),
            result.mesh.signed_volume(),
            out.display()
        ),
    );
    Ok(())
}
