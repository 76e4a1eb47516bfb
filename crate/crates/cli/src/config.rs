//! TOML run configuration. Every key mirrors a command-line flag; flags win
//! when both are given.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub global: GlobalSection,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub complexity: ComplexitySection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub nll: NllSection,
    #[serde(default)]
    pub score: ScoreSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub pooling: PoolingSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalSection {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub kind: Option<String>,
    pub n: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexitySection {
    pub manifest: Option<PathBuf>,
    pub codecs: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub manifest: Option<PathBuf>,
    pub order: Option<usize>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NllSection {
    pub manifest: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreSection {
    pub nll: Option<PathBuf>,
    pub complexity: Option<PathBuf>,
    pub complexity_column: Option<String>,
    pub strategy: Option<String>,
    pub top_k: Option<usize>,
    pub quantile: Option<f64>,
    pub target_fpr: Option<f64>,
    pub train_scores: Option<PathBuf>,
    pub ood_scores: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub in_scores: Option<PathBuf>,
    pub train_scores: Option<PathBuf>,
    pub mean_train_loglik: Option<f64>,
    pub codec_label: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolingSection {
    pub manifest: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub codecs: Option<Vec<String>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// The flag value if given, else the config value, else the default.
pub fn pick<T: Clone>(flag: Option<T>, config: Option<&T>, default: T) -> T {
    flag.or_else(|| config.cloned()).unwrap_or(default)
}

/// The flag value if given, else the config value, else an error naming the
/// missing parameter.
pub fn pick_required<T: Clone>(flag: Option<T>, config: Option<&T>, name: &str) -> Result<T> {
    flag.or_else(|| config.cloned())
        .with_context(|| format!("missing required parameter `{name}` (flag or config file)"))
}
