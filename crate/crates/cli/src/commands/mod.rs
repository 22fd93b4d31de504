mod eval;
mod prep;
mod reconstruct;
mod serve;
mod synth;
mod train;

use std::path::{Path, PathBuf};

use orthorecon::geometry::{load_mesh, MeshFormat, TriangleMesh};

pub use eval::{eval, EvalArgs};
pub use prep::{prep, PrepArgs};
pub use reconstruct::{reconstruct, ReconstructArgs};
pub use serve::{serve, ServeArgs};
pub use synth::{synth, SynthArgs};
pub use train::{train, TrainArgs};

use crate::error::{CliError, Exit};

/// Log line tagged with the item it concerns.
pub(crate) fn log(tag: &str, message: impl std::fmt::Display) {
    eprintln!("[{tag}] {message}");
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::read(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::write(path, e))
}

pub(crate) fn mesh_format(path: &Path) -> Result<MeshFormat, CliError> {
    MeshFormat::from_extension(path)
        .ok_or_else(|| CliError::input(format!("{}: unknown mesh format (use .obj, .stl or .ply)", path.display())))
}

pub(crate) fn read_mesh(path: &Path) -> Result<TriangleMesh, CliError> {
    let format = mesh_format(path)?;
    load_mesh(&read_file(path)?, format).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// File name without its extension, used as the item id.
pub(crate) fn item_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "mesh".into())
}

pub(crate) fn require_dir(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::input(format!("{what} directory {} does not exist", path.display())))
    }
}

/// Mesh inputs of a batch command: the explicit list, or every mesh file of
/// `dir` when `all` is set.
pub(crate) fn mesh_inputs(explicit: &[PathBuf], all: bool, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !explicit.is_empty() {
        return Ok(explicit.to_vec());
    }
    if !all {
        return Err(CliError::input("no input meshes given (pass mesh files or --all)"));
    }
    require_dir(dir, "mesh")?;
    let mut found: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::read(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && MeshFormat::from_extension(p).is_some())
        .collect();
    found.sort();
    if found.is_empty() {
        return Err(CliError::input(format!("no mesh files in {}", dir.display())));
    }
    Ok(found)
}

/// Runs `job` on every input, reporting failures without stopping the batch. The
/// batch fails with the most severe class among the failed items.
pub(crate) fn run_batch(inputs: &[PathBuf], mut job: impl FnMut(&Path, &str) -> Result<(), CliError>) -> Result<(), CliError> {
    let mut failed = 0;
    let mut exit = Exit::Success;
    for path in inputs {
        let name = item_name(path);
        if let Err(e) = job(path, &name) {
            log(&name, format!("error: {e}"));
            failed += 1;
            exit = exit.max(e.exit);
        }
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError { exit, message: format!("{failed} of {} inputs failed", inputs.len()) })
    }
}
