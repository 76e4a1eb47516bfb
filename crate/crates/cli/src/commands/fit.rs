use std::path::PathBuf;

use anyhow::Result;
use clap::Parser;
use serde::Serialize;

use ood_core::density::ContextModel;

use crate::runinfo::RunRecorder;
use crate::Globals;

#[derive(Parser)]
pub struct Args {
    /// Dataset manifest (`id,path` CSV).
    #[arg(long)]
    pub manifest: Option<PathBuf>,

    /// Context order k (0..=4).
    #[arg(short = 'k', long)]
    pub order: Option<usize>,

    /// Laplace smoothing pseudo-count.
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Existing model to merge the new counts into; hyperparameters must
    /// match.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Serialize)]
struct Resolved {
    manifest: PathBuf,
    order: usize,
    alpha: f64,
    resume: Option<PathBuf>,
}

pub fn run(args: Args, globals: &Globals) -> Result<()> {
    let cfg = &globals.config.fit;
    let manifest = crate::config::pick_required(args.manifest, cfg.manifest.as_ref(), "manifest")?;
    let order = crate::config::pick(args.order, cfg.order.as_ref(), 2);
    let alpha = crate::config::pick(args.alpha, cfg.alpha.as_ref(), 1.0);
    let resolved = Resolved {
        manifest: manifest.clone(),
        order,
        alpha,
        resume: args.resume.clone(),
    };

    let mut recorder = RunRecorder::new("fit", &resolved)?;
    recorder.record_input(&manifest)?;

    let dataset = super::load_dataset(&manifest)?;
    let mut model: ContextModel<f64> = ContextModel::fit(&dataset, order, alpha)?;
    if let Some(resume) = &args.resume {
        recorder.record_input(resume)?;
        let mut base: ContextModel<f64> = ContextModel::load(resume)?;
        base.merge(&model)?;
        model = base;
    }

    let out_path = globals.out_dir.join("model.oodm");
    model.save(&out_path)?;
    recorder.record_output(&out_path);
    recorder.finish(&globals.out_dir)
}
