use std::path::PathBuf;

use anyhow::Result;
use clap::Parser;
use serde::Serialize;

use ood_core::density::ContextModel;
use ood_core::eval::{pooling_sweep, write_pooling_csv};
use ood_core::image::POOL_FACTORS;

use crate::runinfo::RunRecorder;
use crate::Globals;

#[derive(Parser)]
pub struct Args {
    /// Manifest of the noise dataset to pool.
    #[arg(long)]
    pub manifest: Option<PathBuf>,

    /// Serialized model file for the likelihood column.
    #[arg(long, conflicts_with = "uniform")]
    pub model: Option<PathBuf>,

    /// Use an untrained model instead of a model file.
    #[arg(long)]
    pub uniform: bool,

    /// Codec name; repeat for several. Defaults to both built-ins.
    #[arg(long = "codec")]
    pub codecs: Vec<String>,
}

#[derive(Serialize)]
struct Resolved {
    manifest: PathBuf,
    model: Option<PathBuf>,
    uniform: bool,
    codecs: Vec<String>,
    factors: Vec<usize>,
}

pub fn run(args: Args, globals: &Globals) -> Result<()> {
    let cfg = &globals.config.pooling;
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
    let codec_names = if args.codecs.is_empty() {
        cfg.codecs
            .clone()
            .unwrap_or_else(super::default_codec_names)
    } else {
        args.codecs
    };
    let resolved = Resolved {
        manifest: manifest.clone(),
        model: model_path.clone(),
        uniform: args.uniform,
        codecs: codec_names.clone(),
        factors: POOL_FACTORS.to_vec(),
    };

    let mut recorder = RunRecorder::new("pooling", &resolved)?;
    recorder.record_input(&manifest)?;
    let model: ContextModel<f64> = match &model_path {
        Some(path) => {
            recorder.record_input(path)?;
            ContextModel::load(path)?
        }
        None => ContextModel::untrained(2, 1.0)?,
    };

    let (codec_ids, registry) = super::resolve_codecs(&codec_names)?;
    let dataset = super::load_dataset(&manifest)?;
    let rows = pooling_sweep(&dataset, &POOL_FACTORS, &model, &codec_ids, &registry)?;

    let out_path = write_pooling_csv(&globals.out_dir.join("pooling.csv"), &rows)?;
    recorder.record_output(&out_path);
    recorder.finish(&globals.out_dir)
}
