use std::path::PathBuf;

use clap::Args;
use orthorecon::reconstruct::eval_metrics;

use super::read_mesh;
use crate::config::ProjectConfig;
use crate::error::CliError;

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Reconstructed mesh.
    pub recon: PathBuf,
    /// Ground-truth mesh in the same frame.
    pub truth: PathBuf,
    /// Occupancy cells along the longest axis.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Surface points per mesh for the Chamfer distance.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print the metrics as JSON.
    #[arg(long)]
    pub json: bool,
}

pub fn eval(args: &EvalArgs, project: &ProjectConfig) -> Result<(), CliError> {
    let mut cfg = project.eval.clone();
    cfg.grid = args.grid.unwrap_or(cfg.grid);
    cfg.samples = args.samples.unwrap_or(cfg.samples);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    if cfg.grid == 0 || cfg.samples == 0 {
        return Err(CliError::input("grid and samples must be positive"));
    }
    let recon = read_mesh(&args.recon)?;
    let truth = read_mesh(&args.truth)?;
    let m = eval_metrics(&recon, &truth, &cfg);
    if args.json {
        println!("{}", serde_json::to_string(&m).expect("metrics serialize"));
    } else {
        println!("iou {:.6}", m.iou);
        println!("chamfer {:.6}", m.chamfer);
    }
    Ok(())
}
