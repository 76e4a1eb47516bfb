use std::path::PathBuf;

use anyhow::Result;
use clap::Parser;
use serde::Serialize;

use ood_core::codecs;

use crate::runinfo::RunRecorder;
use crate::Globals;

#[derive(Parser)]
pub struct Args {
    /// Dataset manifest (`id,path` CSV).
    #[arg(long)]
    pub manifest: Option<PathBuf>,

    /// Codec name; repeat for several. Defaults to both built-ins.
    #[arg(long = "codec")]
    pub codecs: Vec<String>,
}

#[derive(Serialize)]
struct Resolved {
    manifest: PathBuf,
    codecs: Vec<String>,
}

pub fn run(args: Args, globals: &Globals) -> Result<()> {
    let cfg = &globals.config.complexity;
    let manifest = crate::config::pick_required(args.manifest, cfg.manifest.as_ref(), "manifest")?;
    let codec_names = if args.codecs.is_empty() {
        cfg.codecs
            .clone()
            .unwrap_or_else(super::default_codec_names)
    } else {
        args.codecs
    };
    let resolved = Resolved {
        manifest: manifest.clone(),
        codecs: codec_names.clone(),
    };

    let (codec_ids, registry) = super::resolve_codecs(&codec_names)?;
    let dataset = super::load_dataset(&manifest)?;
    let estimates = codecs::complexity_many(dataset.images(), &codec_ids, &registry)?;

    let mut recorder = RunRecorder::new("complexity", &resolved)?;
    recorder.record_input(&manifest)?;

    let out_path = globals.out_dir.join("complexity.csv");
    let mut writer = csv::Writer::from_path(&out_path)?;
    let mut header = vec!["id".to_string()];
    header.extend(codec_ids.iter().map(|c| c.name().to_string()));
    header.push("min_bpd".into());
    writer.write_record(&header)?;
    for (id, estimate) in dataset.ids().iter().zip(&estimates) {
        let mut row = vec![id.clone()];
        for codec in &codec_ids {
            row.push(format!("{}", estimate.get(codec).expect("codec present")));
        }
        row.push(format!("{}", estimate.min_bpd()));
        writer.write_record(&row)?;
    }
    writer.flush()?;

    recorder.record_output(&out_path);
    recorder.finish(&globals.out_dir)
}
