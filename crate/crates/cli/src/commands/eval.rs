use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Parser;
use serde::Serialize;

use ood_core::eval::{
    auroc, histogram, mean_loglik, pearson, two_tail_score, write_histogram_csv,
    write_scatter_csv, AurocColumns, EvalReport, RocInput, ScatterPoint,
};
use ood_core::data::NllRecord;
use ood_core::score::read_score_csv;

use crate::runinfo::RunRecorder;
use crate::Globals;

const HIST_BINS: usize = 64;

#[derive(Parser)]
pub struct Args {
    /// Score CSV of the in-distribution test set.
    #[arg(long)]
    pub in_scores: Option<PathBuf>,

    /// OOD score CSV as `name=path`; repeat per dataset.
    #[arg(long = "ood-scores", value_name = "NAME=PATH")]
    pub ood_scores: Vec<String>,

    /// Score CSV of the training set, for the mean train log-likelihood.
    #[arg(long, conflicts_with = "mean_train_loglik")]
    pub train_scores: Option<PathBuf>,

    /// Mean train log-likelihood in bits/dim (typically negative), if no
    /// train score file is at hand.
    #[arg(long, allow_negative_numbers = true)]
    pub mean_train_loglik: Option<f64>,

    /// Label for the complexity column's codec in the correlation table.
    #[arg(long)]
    pub codec_label: Option<String>,
}

#[derive(Serialize)]
struct Resolved {
    in_scores: PathBuf,
    ood_scores: BTreeMap<String, PathBuf>,
    train_scores: Option<PathBuf>,
    mean_train_loglik: f64,
    codec_label: String,
}

struct Scores {
    nll: Vec<f64>,
    complexity: Vec<f64>,
    s: Vec<f64>,
}

fn load_scores(path: &Path) -> Result<Scores> {
    let rows = read_score_csv(path)?;
    if rows.is_empty() {
        bail!("{}: no score rows", path.display());
    }
    Ok(Scores {
        nll: rows.iter().map(|r| r.record.nll_bpd).collect(),
        complexity: rows.iter().map(|r| r.record.complexity_bpd).collect(),
        s: rows.iter().map(|r| r.record.s).collect(),
    })
}

fn roc(pos: &[f64], neg: &[f64]) -> ood_core::Result<f64> {
    auroc(&RocInput {
        pos: pos.to_vec(),
        neg: neg.to_vec(),
    })
}

pub fn run(args: Args, globals: &Globals) -> Result<()> {
    let cfg = &globals.config.eval;
    let in_path = crate::config::pick_required(args.in_scores, cfg.in_scores.as_ref(), "in-scores")?;
    if args.ood_scores.is_empty() {
        bail!("at least one --ood-scores NAME=PATH is required");
    }
    let mut ood_paths = BTreeMap::new();
    for spec in &args.ood_scores {
        let (name, path) = spec
            .split_once('=')
            .with_context(|| format!("bad --ood-scores `{spec}`, expected NAME=PATH"))?;
        if name == "in"
            || name.is_empty()
            || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            bail!("bad OOD dataset name `{name}` (alphanumeric, `-`, `_`; `in` is reserved)");
        }
        if ood_paths.insert(name.to_string(), PathBuf::from(path)).is_some() {
            bail!("duplicate OOD dataset name `{name}`");
        }
    }
    let train_scores = args.train_scores.or_else(|| cfg.train_scores.clone());
    let codec_label = crate::config::pick(args.codec_label, cfg.codec_label.as_ref(), "codec".into());

    // the two-tail baseline needs the training mean log-likelihood
    let mean_train = match (&train_scores, args.mean_train_loglik.or(cfg.mean_train_loglik)) {
        (Some(path), None) => {
            let rows = read_score_csv(path)?;
            let records: Vec<NllRecord> = rows
                .iter()
                .map(|r| NllRecord {
                    id: r.record.id.clone(),
                    nll_bpd: r.record.nll_bpd,
                })
                .collect();
            mean_loglik(&records)?
        }
        (None, Some(value)) => value,
        (Some(_), Some(_)) => bail!("give either --train-scores or --mean-train-loglik, not both"),
        (None, None) => bail!("the two-tail column needs --train-scores or --mean-train-loglik"),
    };

    let resolved = Resolved {
        in_scores: in_path.clone(),
        ood_scores: ood_paths.clone(),
        train_scores: train_scores.clone(),
        mean_train_loglik: mean_train,
        codec_label: codec_label.clone(),
    };
    let mut recorder = RunRecorder::new("eval", &resolved)?;
    recorder.record_input(&in_path)?;
    if let Some(path) = &train_scores {
        recorder.record_input(path)?;
    }

    let in_scores = load_scores(&in_path)?;
    let in_t: Vec<f64> = in_scores
        .nll
        .iter()
        .map(|&nll| two_tail_score(nll, mean_train))
        .collect();

    let mut report = EvalReport::default();
    let mut all_sets: Vec<(String, Scores)> = Vec::new();

    for (name, path) in &ood_paths {
        recorder.record_input(path)?;
        let ood = load_scores(path)?;
        let ood_t: Vec<f64> = ood
            .nll
            .iter()
            .map(|&nll| two_tail_score(nll, mean_train))
            .collect();
        report.auroc_by_dataset.insert(
            name.clone(),
            AurocColumns {
                nll: roc(&ood.nll, &in_scores.nll)?,
                complexity: roc(&ood.complexity, &in_scores.complexity)?,
                two_tail: roc(&ood_t, &in_t)?,
                s: roc(&ood.s, &in_scores.s)?,
            },
        );
        all_sets.push((name.clone(), ood));
    }
    all_sets.push(("in".to_string(), in_scores));

    for (name, scores) in &all_sets {
        let loglik_sum: f64 = scores.nll.iter().map(|&v| -v).sum();
        report
            .mean_loglik_by_dataset
            .insert(name.clone(), loglik_sum / scores.nll.len() as f64);
    }

    // pooled correlation between L and the log-likelihood across every set
    let mut scatter = Vec::new();
    for (name, scores) in &all_sets {
        for (&l, &nll) in scores.complexity.iter().zip(&scores.nll) {
            scatter.push(ScatterPoint {
                complexity_bpd: l,
                loglik_bpd: -nll,
                dataset: name.clone(),
            });
        }
    }
    let xs: Vec<f64> = scatter.iter().map(|p| p.complexity_bpd).collect();
    let ys: Vec<f64> = scatter.iter().map(|p| p.loglik_bpd).collect();
    match pearson(&xs, &ys) {
        Ok(r) => {
            report.pearson_by_codec.insert(codec_label.clone(), r);
        }
        Err(ood_core::Error::ZeroVariance) => {
            eprintln!("correlation undefined: complexity or likelihood has zero variance");
        }
        Err(ood_core::Error::InsufficientSamples { got, need }) => {
            eprintln!("correlation skipped: {got} samples, need {need}");
        }
        Err(e) => return Err(e.into()),
    }

    report.validate()?;
    for path in report.write_csv_tables(&globals.out_dir)? {
        recorder.record_output(&path);
    }
    let summary_path = globals.out_dir.join("summary.json");
    report.write_json_summary(&summary_path)?;
    recorder.record_output(&summary_path);

    let scatter_path = globals.out_dir.join("scatter.csv");
    write_scatter_csv(&scatter_path, &scatter)?;
    recorder.record_output(&scatter_path);

    // 64-bin distribution tables over ranges shared across datasets
    for (quantity, select) in [
        ("loglik", Box::new(|s: &Scores| s.nll.iter().map(|&v| -v).collect::<Vec<f64>>())
            as Box<dyn Fn(&Scores) -> Vec<f64>>),
        ("s", Box::new(|s: &Scores| s.s.clone())),
    ] {
        let pooled: Vec<f64> = all_sets.iter().flat_map(|(_, s)| select(s)).collect();
        let lo = pooled.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = pooled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = if lo < hi { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        for (name, scores) in &all_sets {
            let bins = histogram(&select(scores), HIST_BINS, range)?;
            let path = globals.out_dir.join(format!("hist_{quantity}_{name}.csv"));
            write_histogram_csv(&path, &bins)?;
            recorder.record_output(&path);
        }
    }

    recorder.finish(&globals.out_dir)
}
