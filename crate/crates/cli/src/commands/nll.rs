use std::path::PathBuf;

use anyhow::Result;
use clap::Parser;
use serde::Serialize;

use ood_core::data::{self, NllRecord};
use ood_core::density::ContextModel;

use crate::runinfo::RunRecorder;
use crate::Globals;

#[derive(Parser)]
pub struct Args {
    /// Dataset manifest (`id,path` CSV).
    #[arg(long)]
    pub manifest: Option<PathBuf>,

    /// Serialized model file.
    #[arg(long, conflicts_with = "uniform")]
    pub model: Option<PathBuf>,

    /// Use an untrained model (exactly 8 bits per dimension everywhere).
    #[arg(long)]
    pub uniform: bool,
}

#[derive(Serialize)]
struct Resolved {
    manifest: PathBuf,
    model: Option<PathBuf>,
    uniform: bool,
}

pub fn run(args: Args, globals: &Globals) -> Result<()> {
    let cfg = &globals.config.nll;
    let manifest = crate::config::pick_required(args.manifest, cfg.manifest.as_ref(), "manifest")?;
    let model_path = if args.uniform {
        None
    } else {
        Some(crate::config::pick_required(
            args.model,
            cfg.model.as_ref(),
            "model",
        )?)
    };
    let resolved = Resolved {
        manifest: manifest.clone(),
        model: model_path.clone(),
        uniform: args.uniform,
    };

    let mut recorder = RunRecorder::new("nll", &resolved)?;
    recorder.record_input(&manifest)?;
    let model: ContextModel<f64> = match &model_path {
        Some(path) => {
            recorder.record_input(path)?;
            ContextModel::load(path)?
        }
        None => ContextModel::untrained(2, 1.0)?,
    };

    let dataset = super::load_dataset(&manifest)?;
    let values = model.nll_bpd_many(dataset.images());
    let records: Vec<NllRecord> = dataset
        .ids()
        .iter()
        .zip(&values)
        .map(|(id, &nll_bpd)| NllRecord {
            id: id.clone(),
            nll_bpd,
        })
        .collect();

    let out_path = globals.out_dir.join("nll.csv");
    data::write_nll_file(&out_path, &records)?;
    recorder.record_output(&out_path);
    recorder.finish(&globals.out_dir)
}
