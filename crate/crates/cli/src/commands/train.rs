use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use orthorecon::blueprint::{ViewSet, ViewSetDescriptor};
use orthorecon::field::{self, read_checkpoint, save_weights, write_loss_csv, Network, Optimizer, TrainItem};
use orthorecon::image::read_png;
use orthorecon::sampling::read_samples;

use super::{log, read_file, require_dir, write_file};
use crate::config::ProjectConfig;
use crate::error::CliError;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory with `<name>.png` + `<name>.views.json` pairs (default: paths.blueprints).
    #[arg(long)]
    pub blueprints: Option<PathBuf>,
    /// Directory with the `<name>.sdfs` sample files (default: paths.samples).
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Checkpoint to write (default: <paths.checkpoints>/model.pafw).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Continue from this checkpoint's weights and optimizer state.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Loss curve CSV (default: the checkpoint path with a `.loss.csv` suffix).
    /// A resumed run appends to an existing file.
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long, value_parser = parse_optimizer)]
    pub optimizer: Option<Optimizer>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn parse_optimizer(s: &str) -> Result<Optimizer, String> {
    match s {
        "sgd" => Ok(Optimizer::Sgd),
        "adam" => Ok(Optimizer::Adam),
        _ => Err(format!("unknown optimizer '{s}' (sgd or adam)")),
    }
}

/// Loads a blueprint sheet with its finalized views, plus the window-less variant
/// when `<name>.interior.png` exists.
pub(crate) fn load_blueprint(dir: &Path, name: &str) -> Result<ViewSet, CliError> {
    let json_path = dir.join(format!("{name}.views.json"));
    let desc: ViewSetDescriptor = serde_json::from_slice(&read_file(&json_path)?)
        .map_err(|e| CliError::input(format!("{}: {e}", json_path.display())))?;
    let sheet_path = dir.join(format!("{name}.png"));
    let sheet = read_png(&read_file(&sheet_path)?).map_err(|e| CliError::input(format!("{}: {e}", sheet_path.display())))?;
    let mut views = ViewSet::from_descriptor(&sheet.into_gray(), &desc)?;
    let interior_path = dir.join(format!("{name}.interior.png"));
    if interior_path.is_file() {
        let interior = read_png(&read_file(&interior_path)?)
            .map_err(|e| CliError::input(format!("{}: {e}", interior_path.display())))?
            .into_gray();
        let cut = ViewSet::from_descriptor(&interior, &desc)?;
        for (v, i) in views.views.iter_mut().zip(cut.views) {
            v.interior = Some(i.image);
        }
    }
    Ok(views)
}

/// Pairs every `<name>.views.json` with `<name>.sdfs`, sorted by name.
fn load_dataset(blueprints: &Path, samples: &Path) -> Result<Vec<TrainItem>, CliError> {
    require_dir(blueprints, "blueprint")?;
    require_dir(samples, "sample")?;
    let mut names: Vec<String> = std::fs::read_dir(blueprints)
        .map_err(|e| CliError::read(blueprints, e))?
        .filter_map(|e| e.ok()?.file_name().to_str()?.strip_suffix(".views.json").map(str::to_string))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(CliError::input(format!("no <name>.views.json blueprints in {}", blueprints.display())));
    }
    let mut items = Vec::with_capacity(names.len());
    for name in names {
        let sample_path = samples.join(format!("{name}.sdfs"));
        if !sample_path.is_file() {
            return Err(CliError::input(format!(
                "no sample file for mesh '{name}' (expected {}); run `orthorecon prep` on it first",
                sample_path.display()
            )));
        }
        let set = read_samples(&read_file(&sample_path)?).map_err(|e| CliError::input(format!("{}: {e}", sample_path.display())))?;
        let views = load_blueprint(blueprints, &name).map_err(|e| e.context(&name))?;
        log(&name, format!("{} samples", set.len()));
        items.push(TrainItem { name, views, samples: set });
    }
    Ok(items)
}

pub fn train(args: &TrainArgs, project: &ProjectConfig) -> Result<(), CliError> {
    let mut cfg = project.train.clone();
    cfg.iterations = args.iterations.unwrap_or(cfg.iterations);
    cfg.learning_rate = args.learning_rate.unwrap_or(cfg.learning_rate);
    cfg.optimizer = args.optimizer.unwrap_or(cfg.optimizer);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.validate()?;
    let out = args.out.clone().unwrap_or_else(|| project.paths.checkpoints.join("model.pafw"));
    let csv_path = args.loss_csv.clone().unwrap_or_else(|| out.with_extension("loss.csv"));

    let (mut net, state) = match &args.resume {
        Some(path) => {
            let ck = read_checkpoint(&read_file(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            if ck.config != project.network {
                log("train", "resuming with the checkpoint's network configuration");
            }
            (ck.network()?, ck.state)
        }
        None => (Network::<f32>::new(&project.network, cfg.seed)?, None),
    };
    let data = load_dataset(
        args.blueprints.as_deref().unwrap_or(&project.paths.blueprints),
        args.samples.as_deref().unwrap_or(&project.paths.samples),
    )?;
    let start = state.as_ref().map_or(0, |s| s.step);
    log("train", format!("{} blueprints, {} parameters, steps {start}..{}", data.len(), net.param_count(), start + cfg.iterations as u64));
    let outcome = field::train(&mut net, &data, &cfg, state.as_ref())?;
    write_file(&out, &save_weights(&net, Some(&outcome.state)))?;

    let csv = write_loss_csv(&outcome.curve);
    if args.resume.is_some() && csv_path.is_file() {
        let rows = csv.split_once('\n').map_or("", |(_, rows)| rows);
        std::fs::OpenOptions::new()
            .append(true)
            .open(&csv_path)
            .and_then(|mut f| f.write_all(rows.as_bytes()))
            .map_err(|e| CliError::write(&csv_path, e))?;
    } else {
        write_file(&csv_path, csv.as_bytes())?;
    }
    if let (Some(first), Some(last)) = (outcome.curve.first(), outcome.curve.last()) {
        log("train", format!("loss {:.5} -> {:.5}", first.loss.total, last.loss.total));
    }
    log("train", format!("checkpoint -> {}", out.display()));
    Ok(())
}
