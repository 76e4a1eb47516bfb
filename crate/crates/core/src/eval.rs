//! Evaluation battery: AUROC, Pearson correlation, mean log-likelihoods, the
//! two-tail baseline, the pooling sweep, and report emission.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::codecs::{self, CodecId, CodecRegistry};
use crate::data::{Dataset, NllRecord};
use crate::density::ContextModel;
use crate::error::{Error, Result};
use crate::image::avg_pool_upsample;
use crate::real::Real;

/// Scores of a binary detection problem: `pos` holds OOD samples, `neg`
/// in-distribution test samples; higher score means predicted OOD.
#[derive(Clone, Debug)]
pub struct RocInput<R: Real = f64> {
    pub pos: Vec<R>,
    pub neg: Vec<R>,
}

/// Area under the ROC curve by the Mann-Whitney pair statistic: the fraction
/// of (pos, neg) pairs won by pos, ties counted half. Computed by sorting and
/// binary search with an exact integer numerator, so it matches brute-force
/// pair counting to the last bit of the final division.
pub fn auroc<R: Real>(input: &RocInput<R>) -> Result<f64> {
    let (pos, neg) = (&input.pos, &input.neg);
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::InsufficientSamples { got: 0, need: 1 });
    }
    if pos.iter().chain(neg.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("roc scores".into()));
    }
    let mut sorted_neg = neg.clone();
    sorted_neg.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut half_wins: u128 = 0; // wins counted twice, ties once
    for p in pos {
        let below = sorted_neg.partition_point(|v| v < p);
        let not_above = sorted_neg.partition_point(|v| v <= p);
        half_wins += 2 * below as u128 + (not_above - below) as u128;
    }
    Ok(half_wins as f64 / (2 * pos.len() as u128 * neg.len() as u128) as f64)
}

/// Sample Pearson correlation; errors when either input is constant.
pub fn pearson<R: Real>(xs: &[R], ys: &[R]) -> Result<R> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientSamples {
            got: xs.len(),
            need: 3,
        });
    }
    if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation inputs".into()));
    }
    let n = R::from_usize_lossy(xs.len());
    let mean = |vs: &[R]| vs.iter().fold(R::zero(), |a, &b| a + b) / n;
    let (mx, my) = (mean(xs), mean(ys));
    let mut cov = R::zero();
    let mut var_x = R::zero();
    let mut var_y = R::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        cov = cov + dx * dy;
        var_x = var_x + dx * dx;
        var_y = var_y + dy * dy;
    }
    if var_x == R::zero() || var_y == R::zero() {
        return Err(Error::ZeroVariance);
    }
    Ok(cov / (var_x * var_y).sqrt())
}

/// Two-tail baseline `T = |mean_train_loglik - loglik|` with
/// `loglik = -nll_bpd`; distance of a sample's log-likelihood from the
/// training mean, so both unusually low and unusually high likelihoods score
/// as outliers.
pub fn two_tail_score<R: Real>(nll_bpd: R, mean_train_loglik_bpd: R) -> R {
    (mean_train_loglik_bpd - (-nll_bpd)).abs()
}

/// Mean log2-likelihood (bits/dim, typically negative) of NLL records.
pub fn mean_loglik(records: &[NllRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(records.iter().map(|r| -r.nll_bpd).sum::<f64>() / records.len() as f64)
}

/// One pooling-sweep row: the factor, mean complexity per codec, and mean
/// model NLL, all over the pooled dataset.
#[derive(Clone, Debug, Serialize)]
pub struct PoolingRow {
    pub factor: usize,
    pub mean_complexity_bpd: BTreeMap<String, f64>,
    pub mean_nll_bpd: f64,
}

/// Applies `avg_pool_upsample` at each factor to every image of `noise` and
/// reports mean complexity per codec and mean NLL under `model`, rows ordered
/// by factor.
pub fn pooling_sweep(
    noise: &Dataset,
    factors: &[usize],
    model: &ContextModel<f64>,
    codec_ids: &[CodecId],
    registry: &CodecRegistry,
) -> Result<Vec<PoolingRow>> {
    if noise.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut factors = factors.to_vec();
    factors.sort_unstable();
    let mut rows = Vec::with_capacity(factors.len());
    for &factor in &factors {
        let pooled: Vec<_> = noise
            .images()
            .iter()
            .map(|img| avg_pool_upsample(img, factor))
            .collect::<Result<_>>()?;
        let estimates = codecs::complexity_many(&pooled, codec_ids, registry)?;
        let mut mean_complexity = BTreeMap::new();
        for codec in codec_ids {
            let sum: f64 = estimates.iter().map(|e| e.get(codec).unwrap()).sum();
            mean_complexity.insert(codec.name().to_string(), sum / estimates.len() as f64);
        }
        let mean_nll = model.mean_nll_bpd(&pooled)?;
        rows.push(PoolingRow {
            factor,
            mean_complexity_bpd: mean_complexity,
            mean_nll_bpd: mean_nll,
        });
    }
    Ok(rows)
}

/// One point of the complexity/likelihood scatter.
#[derive(Clone, Debug, Serialize)]
pub struct ScatterPoint {
    pub complexity_bpd: f64,
    pub loglik_bpd: f64,
    pub dataset: String,
}

/// Pools `(L(x), loglik(x))` pairs across all datasets and computes their
/// global Pearson correlation, returning the scatter for plotting.
pub fn correlation_study(
    datasets: &[Dataset],
    model: &ContextModel<f64>,
    codec: &CodecId,
    registry: &CodecRegistry,
) -> Result<(f64, Vec<ScatterPoint>)> {
    let total: usize = datasets.iter().map(Dataset::len).sum();
    if total < 100 {
        return Err(Error::InsufficientSamples {
            got: total,
            need: 100,
        });
    }
    let mut points = Vec::with_capacity(total);
    for ds in datasets {
        let complexities = codecs::complexity_many(
            ds.images(),
            std::slice::from_ref(codec),
            registry,
        )?;
        let nlls = model.nll_bpd_many(ds.images());
        for (est, nll) in complexities.iter().zip(&nlls) {
            points.push(ScatterPoint {
                complexity_bpd: est.min_bpd(),
                loglik_bpd: -nll,
                dataset: ds.name().to_string(),
            });
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| p.complexity_bpd).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.loglik_bpd).collect();
    Ok((pearson(&xs, &ys)?, points))
}

/// AUROC of the four Table-style detection scores for one OOD dataset:
/// negative log-likelihood alone, complexity alone, the two-tail baseline,
/// and `S`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AurocColumns {
    pub nll: f64,
    pub complexity: f64,
    pub two_tail: f64,
    pub s: f64,
}

/// Everything the evaluation battery produces.
#[derive(Clone, Debug, Default, Serialize)]
pub struct EvalReport {
    pub auroc_by_dataset: BTreeMap<String, AurocColumns>,
    pub pearson_by_codec: BTreeMap<String, f64>,
    pub mean_loglik_by_dataset: BTreeMap<String, f64>,
    pub pooling_table: Vec<PoolingRow>,
}

impl EvalReport {
    /// The two-tail baseline column on its own.
    pub fn t_baseline_auroc(&self) -> BTreeMap<String, f64> {
        self.auroc_by_dataset
            .iter()
            .map(|(k, v)| (k.clone(), v.two_tail))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, cols) in &self.auroc_by_dataset {
            for v in [cols.nll, cols.complexity, cols.two_tail, cols.s] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidArgument(format!(
                        "AUROC {v} for `{name}` outside [0, 1]"
                    )));
                }
            }
        }
        for (name, &r) in &self.pearson_by_codec {
            if !(-1.0..=1.0).contains(&r) {
                return Err(Error::InvalidArgument(format!(
                    "Pearson r {r} for `{name}` outside [-1, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Writes the per-section CSV tables; returns the paths written.
    pub fn write_csv_tables(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();

        let auroc_path = dir.join("auroc.csv");
        let mut w = csv::Writer::from_path(&auroc_path)?;
        w.write_record(["dataset", "auroc_nll", "auroc_L", "auroc_T", "auroc_S"])?;
        for (name, cols) in &self.auroc_by_dataset {
            w.write_record([
                name.as_str(),
                &format!("{}", cols.nll),
                &format!("{}", cols.complexity),
                &format!("{}", cols.two_tail),
                &format!("{}", cols.s),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&auroc_path, e))?;
        written.push(auroc_path);

        let pearson_path = dir.join("correlation.csv");
        let mut w = csv::Writer::from_path(&pearson_path)?;
        w.write_record(["codec", "pearson_r"])?;
        for (name, r) in &self.pearson_by_codec {
            w.write_record([name.as_str(), &format!("{r}")])?;
        }
        w.flush().map_err(|e| Error::io(&pearson_path, e))?;
        written.push(pearson_path);

        let loglik_path = dir.join("mean_loglik.csv");
        let mut w = csv::Writer::from_path(&loglik_path)?;
        w.write_record(["dataset", "mean_loglik_bpd"])?;
        for (name, v) in &self.mean_loglik_by_dataset {
            w.write_record([name.as_str(), &format!("{v}")])?;
        }
        w.flush().map_err(|e| Error::io(&loglik_path, e))?;
        written.push(loglik_path);

        if !self.pooling_table.is_empty() {
            written.push(write_pooling_csv(&dir.join("pooling.csv"), &self.pooling_table)?);
        }
        Ok(written)
    }

    pub fn write_json_summary(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidArgument(format!("serialize report: {e}")))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

/// Writes the pooling table: one row per factor, one column per codec, then
/// the mean NLL.
pub fn write_pooling_csv(path: &Path, rows: &[PoolingRow]) -> Result<PathBuf> {
    let mut w = csv::Writer::from_path(path)?;
    let codec_names: Vec<&String> = rows
        .first()
        .map(|r| r.mean_complexity_bpd.keys().collect())
        .unwrap_or_default();
    let mut header = vec!["factor".to_string()];
    header.extend(codec_names.iter().map(|n| format!("mean_L_{n}")));
    header.push("mean_nll_bpd".into());
    w.write_record(&header)?;
    for row in rows {
        let mut fields = vec![row.factor.to_string()];
        for name in &codec_names {
            fields.push(format!("{}", row.mean_complexity_bpd[*name]));
        }
        fields.push(format!("{}", row.mean_nll_bpd));
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

/// A histogram bin over `[left, right)` (the last bin is closed).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct HistBin {
    pub left: f64,
    pub right: f64,
    pub count: u64,
}

/// Fixed-width histogram; distribution plots are emitted as 64-bin tables
/// over the observed range rather than density estimates.
pub fn histogram(values: &[f64], bins: usize, range: (f64, f64)) -> Result<Vec<HistBin>> {
    if values.is_empty() || bins == 0 {
        return Err(Error::InvalidArgument("empty histogram input".into()));
    }
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidArgument(format!("bad range [{lo}, {hi}]")));
    }
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<HistBin> = (0..bins)
        .map(|i| HistBin {
            left: lo + i as f64 * width,
            right: lo + (i + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for &v in values {
        if v < lo || v > hi {
            continue;
        }
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        out[idx].count += 1;
    }
    Ok(out)
}

/// `bin_left,bin_right,count` CSV.
pub fn write_histogram_csv(path: &Path, bins: &[HistBin]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["bin_left", "bin_right", "count"])?;
    for b in bins {
        w.write_record([&format!("{}", b.left), &format!("{}", b.right), &b.count.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// `complexity_bpd,loglik_bpd,dataset` CSV.
pub fn write_scatter_csv(path: &Path, points: &[ScatterPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["complexity_bpd", "loglik_bpd", "dataset"])?;
    for p in points {
        w.write_record([
            &format!("{}", p.complexity_bpd),
            &format!("{}", p.loglik_bpd),
            &p.dataset,
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
