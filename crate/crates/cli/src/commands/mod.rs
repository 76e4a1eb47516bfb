pub mod complexity;
pub mod eval;
pub mod fit;
pub mod nll;
pub mod pooling;
pub mod score;
pub mod synth;

use std::path::Path;

use anyhow::{Context, Result};
use ood_core::codecs::{CodecId, CodecRegistry};
use ood_core::data::Dataset;

/// Loads a manifest-described dataset, normalizing every image.
pub fn load_dataset(manifest: &Path) -> Result<Dataset> {
    let name = manifest
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    ood_core::data::load_dataset(manifest, name)
        .with_context(|| format!("loading dataset from {}", manifest.display()))
}

/// Resolves codec names against the built-ins plus `OOD_EXTERNAL_CODECS`.
pub fn resolve_codecs(names: &[String]) -> Result<(Vec<CodecId>, CodecRegistry)> {
    let registry = CodecRegistry::from_env().context("loading external codec config")?;
    let ids = names
        .iter()
        .map(|name| CodecId::resolve(name, &registry))
        .collect::<ood_core::Result<Vec<_>>>()?;
    Ok((ids, registry))
}

pub fn default_codec_names() -> Vec<String> {
    vec!["png_like".into(), "order0_ac".into()]
}
