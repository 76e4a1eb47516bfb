use anyhow::{bail, Result};
use clap::Parser;
use serde::Serialize;

use ood_core::data::{self, formats, ManifestEntry};

use crate::runinfo::RunRecorder;
use crate::Globals;

#[derive(Parser)]
pub struct Args {
    /// Dataset kind: `noise` or `constant`.
    pub kind: Option<String>,

    /// Number of images.
    #[arg(short = 'n', long)]
    pub n: Option<usize>,
}

#[derive(Serialize)]
struct Resolved {
    kind: String,
    n: usize,
    seed: u64,
}

pub fn run(args: Args, globals: &Globals) -> Result<()> {
    let cfg = &globals.config.synth;
    let kind = crate::config::pick_required(args.kind, cfg.kind.as_ref(), "kind")?;
    let n = crate::config::pick_required(args.n, cfg.n.as_ref(), "n")?;
    let resolved = Resolved {
        kind: kind.clone(),
        n,
        seed: globals.seed,
    };

    let dataset = match kind.as_str() {
        "noise" => data::synth_noise(n, globals.seed)?,
        "constant" => data::synth_constant(n, globals.seed)?,
        other => bail!("unknown dataset kind `{other}` (expected noise or constant)"),
    };

    let mut recorder = RunRecorder::new("synth", &resolved)?;
    let mut entries = Vec::with_capacity(dataset.len());
    for (id, img) in dataset.iter() {
        let file_name = format!("{id}.oodt");
        let path = globals.out_dir.join(&file_name);
        formats::write_oodt_tensor(&path, img)?;
        entries.push(ManifestEntry {
            id: id.to_string(),
            path: file_name.into(),
        });
    }
    let manifest_path = globals.out_dir.join("manifest.csv");
    data::write_manifest(&manifest_path, &entries)?;
    recorder.record_output(&manifest_path);
    recorder.finish(&globals.out_dir)
}
