use std::path::PathBuf;

use clap::Args;

use crate::config::ProjectConfig;
use crate::error::CliError;

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Listen address (default: service.bind).
    #[arg(long)]
    pub bind: Option<String>,
    /// Blueprint and job storage (default: service.data_dir).
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Directory of `<id>.pafw` checkpoints (default: service.checkpoints_dir).
    #[arg(long)]
    pub checkpoints: Option<PathBuf>,
}

pub fn serve(args: &ServeArgs, project: &ProjectConfig) -> Result<(), CliError> {
    let mut cfg = project.service.clone();
    cfg.bind = args.bind.clone().unwrap_or(cfg.bind);
    cfg.data_dir = args.data_dir.clone().unwrap_or(cfg.data_dir);
    cfg.checkpoints_dir = args.checkpoints.clone().unwrap_or(cfg.checkpoints_dir);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::internal(format!("cannot start runtime: {e}")))?;
    runtime.block_on(orthorecon_service::serve(cfg)).map_err(|e| match e {
        orthorecon_service::ServiceError::Config(m) => CliError::input(m),
        e => CliError::internal(e.to_string()),
    })
}
