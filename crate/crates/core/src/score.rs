//! The OOD score `S = nll - L` and the four practical decision strategies:
//! top-k ranking, the sign test, null-distribution quantiles, and
//! FPR-targeted thresholds.

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::IMG_DIM;

/// A scored sample: `s = nll_bpd - complexity_bpd`, all in bits/dim.
/// Higher `s` means more out-of-distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRecord<R: Real = f64> {
    pub id: String,
    pub nll_bpd: R,
    pub complexity_bpd: R,
    pub s: R,
}

impl<R: Real> ScoreRecord<R> {
    pub fn new(id: impl Into<String>, nll_bpd: R, complexity_bpd: R) -> Result<Self> {
        Ok(Self {
            id: id.into(),
            nll_bpd,
            complexity_bpd,
            s: s_score(nll_bpd, complexity_bpd)?,
        })
    }
}

/// Model priors for the Bayes-factor reading of `S`. The quantile method is
/// fixed to nearest-rank and the `S = 0` boundary maps to in-distribution.
#[derive(Clone, Copy, Debug)]
pub struct ScoreConfig<R: Real = f64> {
    pub prior_m0: R,
    pub prior_m: R,
}

impl<R: Real> Default for ScoreConfig<R> {
    fn default() -> Self {
        let half = R::from_f64_lossy(0.5);
        Self {
            prior_m0: half,
            prior_m: half,
        }
    }
}

impl<R: Real> ScoreConfig<R> {
    pub fn validate(&self) -> Result<()> {
        if self.prior_m0 <= R::zero() || self.prior_m <= R::zero() {
            return Err(Error::InvalidArgument("priors must be positive".into()));
        }
        let sum = (self.prior_m0 + self.prior_m).to_f64().unwrap_or(f64::NAN);
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "priors sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

/// `S(x) = nll - L`, bits per dimension.
pub fn s_score<R: Real>(nll_bpd: R, complexity_bpd: R) -> Result<R> {
    if !nll_bpd.is_finite() || !complexity_bpd.is_finite() {
        return Err(Error::NonFinite(format!(
            "s_score({nll_bpd}, {complexity_bpd})"
        )));
    }
    Ok(nll_bpd - complexity_bpd)
}

/// The posterior log-ratio of the compressor model over the trained model,
/// per dimension: `(nll - L) + log2(prior_m0 / prior_m) / d`. Uniform priors
/// reduce it to [`s_score`].
pub fn bayes_ratio<R: Real>(
    nll_bpd: R,
    complexity_bpd: R,
    prior_m0: R,
    prior_m: R,
) -> Result<R> {
    if prior_m0 <= R::zero() || prior_m <= R::zero() {
        return Err(Error::InvalidArgument("priors must be positive".into()));
    }
    let correction = (prior_m0 / prior_m).log2() / R::from_usize_lossy(IMG_DIM);
    Ok(s_score(nll_bpd, complexity_bpd)? + correction)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Label {
    Ood,
    InDistribution,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Ood => "ood",
            Label::InDistribution => "in",
        }
    }
}

/// A sign-test decision with its evidence strength.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision<R: Real = f64> {
    pub label: Label,
    pub evidence: R,
}

/// Bayes-factor sign test: OOD iff `s > 0`; the boundary `s = 0` carries no
/// evidence either way and maps to in-distribution. Evidence is `|s|`.
pub fn decide_sign<R: Real>(s: R, _cfg: &ScoreConfig<R>) -> Decision<R> {
    Decision {
        label: if s > R::zero() {
            Label::Ood
        } else {
            Label::InDistribution
        },
        evidence: s.abs(),
    }
}

fn sorted_finite<R: Real>(scores: &[R]) -> Result<Vec<R>> {
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("scores".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite scores compare"));
    Ok(sorted)
}

/// Nearest-rank quantile of the training-score null distribution: with the
/// scores sorted ascending, the value at 1-based index `ceil(q * n)`.
pub fn null_threshold<R: Real>(train_scores: &[R], q: f64) -> Result<R> {
    if train_scores.is_empty() {
        return Err(Error::InsufficientSamples { got: 0, need: 1 });
    }
    if !(0.0 < q && q < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile {q} outside (0, 1)"
        )));
    }
    let sorted = sorted_finite(train_scores)?;
    let n = sorted.len();
    let product = q * n as f64;
    // snap to the integer rank when q*n is one up to fp noise
    let rank = if (product - product.round()).abs() < 1e-9 {
        product.round() as usize
    } else {
        product.ceil() as usize
    };
    let rank = rank.clamp(1, n);
    Ok(sorted[rank - 1])
}

/// Result of targeting a false-positive rate on labeled data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FprThreshold<R: Real = f64> {
    pub threshold: R,
    pub achieved_fpr: f64,
    pub achieved_tpr: f64,
}

/// The smallest threshold `t` such that the fraction of in-distribution
/// scores strictly above `t` is at most `target_fpr`, with the rates it
/// achieves on both classes.
pub fn fpr_threshold<R: Real>(
    in_scores: &[R],
    ood_scores: &[R],
    target_fpr: f64,
) -> Result<FprThreshold<R>> {
    if in_scores.is_empty() || ood_scores.is_empty() {
        return Err(Error::InsufficientSamples { got: 0, need: 1 });
    }
    if !(0.0 < target_fpr && target_fpr < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target FPR {target_fpr} outside (0, 1)"
        )));
    }
    let sorted_in = sorted_finite(in_scores)?;
    if ood_scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ood scores".into()));
    }
    let n = sorted_in.len();
    // candidates are the observed in-distribution values, ascending; the
    // fraction strictly above drops only when t passes one of them
    let mut threshold = sorted_in[n - 1];
    for (i, &value) in sorted_in.iter().enumerate() {
        // skip duplicates: only the last occurrence gives the true count above
        if i + 1 < n && sorted_in[i + 1] == value {
            continue;
        }
        let above = n - (i + 1);
        if above as f64 / n as f64 <= target_fpr {
            threshold = value;
            break;
        }
    }
    let achieved_fpr =
        sorted_in.iter().filter(|&&v| v > threshold).count() as f64 / n as f64;
    let achieved_tpr = ood_scores.iter().filter(|&&v| v > threshold).count() as f64
        / ood_scores.len() as f64;
    Ok(FprThreshold {
        threshold,
        achieved_fpr,
        achieved_tpr,
    })
}

/// Ids of the `k` highest-scoring records, descending; ties broken by
/// lexicographically smaller id first.
pub fn rank_topk<R: Real>(records: &[ScoreRecord<R>], k: usize) -> Result<Vec<String>> {
    if k > records.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds {} records",
            records.len()
        )));
    }
    let mut order: Vec<&ScoreRecord<R>> = records.iter().collect();
    order.sort_by(|a, b| {
        b.s.partial_cmp(&a.s)
            .expect("scores are finite")
            .then_with(|| a.id.cmp(&b.id))
    });
    Ok(order[..k].iter().map(|r| r.id.clone()).collect())
}

/// One row of the score CSV: a record plus an optional decision.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRow {
    pub record: ScoreRecord<f64>,
    pub decision: Option<Label>,
}

/// Writes the `id,nll_bpd,complexity_bpd,s,decision` CSV.
pub fn write_score_csv(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["id", "nll_bpd", "complexity_bpd", "s", "decision"])?;
    for row in rows {
        let r = &row.record;
        writer.write_record([
            r.id.as_str(),
            &format!("{}", r.nll_bpd),
            &format!("{}", r.complexity_bpd),
            &format!("{}", r.s),
            row.decision.map(|d| d.as_str()).unwrap_or(""),
        ])?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_score_csv(path: &Path) -> Result<Vec<ScoreRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
            _ => Error::Csv(e),
        })?;
    {
        let headers = reader.headers()?;
        if headers.iter().ne(["id", "nll_bpd", "complexity_bpd", "s", "decision"]) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                msg: "expected header `id,nll_bpd,complexity_bpd,s,decision`".into(),
            });
        }
    }
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let parse_field = |i: usize| -> Result<f64> {
            record[i].trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("bad number `{}`", &record[i]),
            })
        };
        if record.len() != 5 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("expected 5 fields, got {}", record.len()),
            });
        }
        let id = record[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId { id });
        }
        let decision = match &record[4] {
            "" => None,
            "ood" => Some(Label::Ood),
            "in" => Some(Label::InDistribution),
            other => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("bad decision `{other}`"),
                })
            }
        };
        rows.push(ScoreRow {
            record: ScoreRecord {
                id,
                nll_bpd: parse_field(1)?,
                complexity_bpd: parse_field(2)?,
                s: parse_field(3)?,
            },
            decision,
        });
    }
    Ok(rows)
}
