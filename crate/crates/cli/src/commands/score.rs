use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Parser;
use serde::Serialize;

use ood_core::data::read_nll_file;
use ood_core::score::{
    decide_sign, fpr_threshold, null_threshold, rank_topk, read_score_csv, write_score_csv,
    Label, ScoreConfig, ScoreRecord, ScoreRow,
};

use crate::runinfo::RunRecorder;
use crate::Globals;

#[derive(Parser)]
pub struct Args {
    /// NLL CSV (`id,nll_bpd`).
    #[arg(long)]
    pub nll: Option<PathBuf>,

    /// Complexity CSV produced by the `complexity` command.
    #[arg(long)]
    pub complexity: Option<PathBuf>,

    /// Which complexity column to use as L.
    #[arg(long)]
    pub complexity_column: Option<String>,

    /// Decision strategy: none, sign, rank, quantile, or fpr.
    #[arg(long)]
    pub strategy: Option<String>,

    /// For `rank`: how many top instances to flag.
    #[arg(long)]
    pub top_k: Option<usize>,

    /// For `quantile`: the null-distribution quantile in (0, 1).
    #[arg(long)]
    pub quantile: Option<f64>,

    /// For `fpr`: the targeted false-positive rate in (0, 1).
    #[arg(long)]
    pub target_fpr: Option<f64>,

    /// Score CSV of the training set (null distribution / in-distribution
    /// side), needed by `quantile` and `fpr`.
    #[arg(long)]
    pub train_scores: Option<PathBuf>,

    /// Score CSV of ground-truth OOD data, needed by `fpr`.
    #[arg(long)]
    pub ood_scores: Option<PathBuf>,
}

#[derive(Serialize)]
struct Resolved {
    nll: PathBuf,
    complexity: PathBuf,
    complexity_column: String,
    strategy: String,
    top_k: Option<usize>,
    quantile: Option<f64>,
    target_fpr: Option<f64>,
    train_scores: Option<PathBuf>,
    ood_scores: Option<PathBuf>,
}

#[derive(Serialize)]
struct ThresholdInfo {
    strategy: String,
    threshold: f64,
    achieved_fpr: Option<f64>,
    achieved_tpr: Option<f64>,
}

/// Reads one named column of a complexity CSV as an id -> bpd map.
fn read_complexity_column(path: &Path, column: &str) -> Result<HashMap<String, f64>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let idx = headers
        .iter()
        .position(|h| h == column)
        .with_context(|| format!("{}: no column `{column}`", path.display()))?;
    let mut map = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let id = record[0].to_string();
        let value: f64 = record[idx]
            .trim()
            .parse()
            .with_context(|| format!("{}: bad value for id `{id}`", path.display()))?;
        if map.insert(id.clone(), value).is_some() {
            bail!("{}: duplicate id `{id}`", path.display());
        }
    }
    Ok(map)
}

fn s_values(path: &Path) -> Result<Vec<f64>> {
    Ok(read_score_csv(path)?
        .iter()
        .map(|row| row.record.s)
        .collect())
}

pub fn run(args: Args, globals: &Globals) -> Result<()> {
    let cfg = &globals.config.score;
    let nll_path = crate::config::pick_required(args.nll, cfg.nll.as_ref(), "nll")?;
    let complexity_path =
        crate::config::pick_required(args.complexity, cfg.complexity.as_ref(), "complexity")?;
    let column = crate::config::pick(
        args.complexity_column,
        cfg.complexity_column.as_ref(),
        "min_bpd".into(),
    );
    let strategy = crate::config::pick(args.strategy, cfg.strategy.as_ref(), "none".into());
    let top_k = args.top_k.or(cfg.top_k);
    let quantile = args.quantile.or(cfg.quantile);
    let target_fpr = args.target_fpr.or(cfg.target_fpr);
    let train_scores = args.train_scores.or_else(|| cfg.train_scores.clone());
    let ood_scores = args.ood_scores.or_else(|| cfg.ood_scores.clone());
    let resolved = Resolved {
        nll: nll_path.clone(),
        complexity: complexity_path.clone(),
        complexity_column: column.clone(),
        strategy: strategy.clone(),
        top_k,
        quantile,
        target_fpr,
        train_scores: train_scores.clone(),
        ood_scores: ood_scores.clone(),
    };

    let mut recorder = RunRecorder::new("score", &resolved)?;
    recorder.record_input(&nll_path)?;
    recorder.record_input(&complexity_path)?;

    let nll_records = read_nll_file(&nll_path)?;
    let complexities = read_complexity_column(&complexity_path, &column)?;

    // ids must match as sets; report the symmetric difference otherwise
    let nll_ids: BTreeSet<&str> = nll_records.iter().map(|r| r.id.as_str()).collect();
    let complexity_ids: BTreeSet<&str> = complexities.keys().map(String::as_str).collect();
    if nll_ids != complexity_ids {
        let left: Vec<&str> = nll_ids.difference(&complexity_ids).copied().collect();
        let right: Vec<&str> = complexity_ids.difference(&nll_ids).copied().collect();
        bail!(
            "id mismatch between NLL and complexity files; only in NLL: [{}], only in complexity: [{}]",
            left.join(", "),
            right.join(", ")
        );
    }

    // join on id, preserving the NLL file's row order
    let mut records = Vec::with_capacity(nll_records.len());
    for r in &nll_records {
        records.push(ScoreRecord::new(&r.id, r.nll_bpd, complexities[&r.id])?);
    }

    let score_config = ScoreConfig::default();
    let mut threshold_info = None;
    let decisions: Vec<Option<Label>> = match strategy.as_str() {
        "none" => vec![None; records.len()],
        "sign" => records
            .iter()
            .map(|r| Some(decide_sign(r.s, &score_config).label))
            .collect(),
        "rank" => {
            let k = top_k.context("strategy `rank` needs --top-k")?;
            let top: BTreeSet<String> = rank_topk(&records, k)?.into_iter().collect();
            records
                .iter()
                .map(|r| {
                    Some(if top.contains(&r.id) {
                        Label::Ood
                    } else {
                        Label::InDistribution
                    })
                })
                .collect()
        }
        "quantile" => {
            let q = quantile.context("strategy `quantile` needs --quantile")?;
            let train = train_scores.context("strategy `quantile` needs --train-scores")?;
            recorder.record_input(&train)?;
            let threshold = null_threshold(&s_values(&train)?, q)?;
            threshold_info = Some(ThresholdInfo {
                strategy: strategy.clone(),
                threshold,
                achieved_fpr: None,
                achieved_tpr: None,
            });
            records
                .iter()
                .map(|r| {
                    Some(if r.s > threshold {
                        Label::Ood
                    } else {
                        Label::InDistribution
                    })
                })
                .collect()
        }
        "fpr" => {
            let target = target_fpr.context("strategy `fpr` needs --target-fpr")?;
            let train = train_scores.context("strategy `fpr` needs --train-scores")?;
            let ood = ood_scores.context("strategy `fpr` needs --ood-scores")?;
            recorder.record_input(&train)?;
            recorder.record_input(&ood)?;
            let result = fpr_threshold(&s_values(&train)?, &s_values(&ood)?, target)?;
            threshold_info = Some(ThresholdInfo {
                strategy: strategy.clone(),
                threshold: result.threshold,
                achieved_fpr: Some(result.achieved_fpr),
                achieved_tpr: Some(result.achieved_tpr),
            });
            records
                .iter()
                .map(|r| {
                    Some(if r.s > result.threshold {
                        Label::Ood
                    } else {
                        Label::InDistribution
                    })
                })
                .collect()
        }
        other => bail!("unknown strategy `{other}`"),
    };

    let rows: Vec<ScoreRow> = records
        .into_iter()
        .zip(decisions)
        .map(|(record, decision)| ScoreRow { record, decision })
        .collect();
    let out_path = globals.out_dir.join("scores.csv");
    write_score_csv(&out_path, &rows)?;
    recorder.record_output(&out_path);

    if let Some(info) = threshold_info {
        let path = globals.out_dir.join("threshold.json");
        std::fs::write(&path, serde_json::to_string_pretty(&info)?)
            .with_context(|| format!("writing {}", path.display()))?;
        recorder.record_output(&path);
    }
    recorder.finish(&globals.out_dir)
}
