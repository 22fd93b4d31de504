use std::path::{Path, PathBuf};

use clap::Args;
use orthorecon::blueprint::{synth_blueprint, SynthOptions};
use orthorecon::geometry::normalize_mesh;
use orthorecon::image::write_png_gray8;

use super::{log, mesh_inputs, read_mesh, run_batch, write_file};
use crate::config::ProjectConfig;
use crate::error::CliError;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Mesh files to draw.
    pub meshes: Vec<PathBuf>,
    /// Process every mesh in the configured mesh directory.
    #[arg(long)]
    pub all: bool,
    /// Output directory (default: paths.blueprints).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Pixels per model unit (default: synth.resolution).
    #[arg(long)]
    pub resolution: Option<f64>,
}

/// Writes `<name>.png` (the assembled sheet), `<name>.views.json` (its finalized
/// boxes and labels), `<name>.<view>.png` crops and, for meshes with glass parts,
/// `<name>.interior.png`.
fn synth_one(path: &Path, name: &str, opts: &SynthOptions, out: &Path) -> Result<(), CliError> {
    let (mesh, _) = normalize_mesh(&read_mesh(path)?)?;
    let bp = synth_blueprint(&mesh, opts)?;
    let sheet_path = out.join(format!("{name}.png"));
    write_file(&sheet_path, &write_png_gray8(&bp.sheet)?)?;
    let json = serde_json::to_vec_pretty(&bp.views.descriptor()).expect("descriptor serializes");
    write_file(&out.join(format!("{name}.views.json")), &json)?;
    for view in &bp.views.views {
        let kind = view.label.kind.view_kind().expect("synthetic views are labeled");
        write_file(&out.join(format!("{name}.{}.png", kind.name())), &write_png_gray8(&view.image)?)?;
    }
    if let Some(interior) = &bp.interior_sheet {
        write_file(&out.join(format!("{name}.interior.png")), &write_png_gray8(interior)?)?;
    }
    log(name, format!("{}x{} sheet -> {}", bp.sheet.width(), bp.sheet.height(), sheet_path.display()));
    Ok(())
}

pub fn synth(args: &SynthArgs, project: &ProjectConfig) -> Result<(), CliError> {
    let mut opts = project.synth.clone();
    opts.resolution = args.resolution.unwrap_or(opts.resolution);
    if !(opts.resolution > 0.0 && opts.resolution.is_finite()) {
        return Err(CliError::input("synth resolution must be positive"));
    }
    let inputs = mesh_inputs(&args.meshes, args.all, &project.paths.meshes)?;
    let out = args.out.clone().unwrap_or_else(|| project.paths.blueprints.clone());
    run_batch(&inputs, |path, name| synth_one(path, name, &opts, &out))
}
