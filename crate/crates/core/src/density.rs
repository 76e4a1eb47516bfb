//! Count-based context model with exact log2-likelihoods.
//!
//! A tractable stand-in for a learned density model: per-pixel probabilities
//! are Laplace-smoothed relative frequencies conditioned on a small causal
//! neighborhood, so likelihoods are exact, training is a counting pass, and
//! partial models merge by adding counts.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::real::Real;
use crate::{IMG_CHANNELS, IMG_DIM, IMG_SIDE};

/// Maximum context order.
pub const MAX_ORDER: usize = 4;

/// Sentinel symbol for neighbors outside the channel plane.
const SENTINEL: u64 = 256;
/// Context keys are base-257 numbers over byte values plus the sentinel.
const KEY_BASE: u64 = 257;

/// Magic bytes of the serialized model format.
pub const MODEL_MAGIC: &[u8; 4] = b"OODM";
const MODEL_VERSION: u8 = 1;

/// Causal neighborhood offsets per order, in (dy, dx) relative to the pixel:
/// left, above, above-left, above-right. Contexts never cross channel-plane
/// boundaries; out-of-plane neighbors read as the sentinel.
const NEIGHBORS: [(i32, i32); MAX_ORDER] = [(0, -1), (-1, 0), (-1, -1), (-1, 1)];

/// Per-context symbol counts, sparse over the 256 byte values.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct CountRow {
    total: u64,
    /// Sorted by symbol.
    counts: Vec<(u8, u64)>,
}

impl CountRow {
    fn add(&mut self, symbol: u8, n: u64) {
        match self.counts.binary_search_by_key(&symbol, |&(s, _)| s) {
            Ok(i) => self.counts[i].1 += n,
            Err(i) => self.counts.insert(i, (symbol, n)),
        }
        self.total += n;
    }

    fn count(&self, symbol: u8) -> u64 {
        match self.counts.binary_search_by_key(&symbol, |&(s, _)| s) {
            Ok(i) => self.counts[i].1,
            Err(_) => 0,
        }
    }
}

/// Order-`k` autoregressive byte model trained by exact counting.
///
/// `p(v | c) = (count(c, v) + alpha) / (total(c) + 256 * alpha)`; contexts
/// never seen in training fall back to the uniform 1/256.
#[derive(Clone, Debug)]
pub struct ContextModel<R: Real = f64> {
    order: usize,
    alpha: R,
    trained_on: String,
    counts: HashMap<u64, CountRow>,
}

impl<R: Real> ContextModel<R> {
    /// An untrained model; assigns exactly 8 bits to every pixel.
    pub fn untrained(order: usize, alpha: R) -> Result<Self> {
        if order > MAX_ORDER {
            return Err(Error::InvalidArgument(format!(
                "order {order} exceeds maximum {MAX_ORDER}"
            )));
        }
        if alpha <= R::zero() {
            return Err(Error::InvalidArgument("alpha must be > 0".into()));
        }
        Ok(Self {
            order,
            alpha,
            trained_on: String::new(),
            counts: HashMap::new(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> R {
        self.alpha
    }

    pub fn trained_on(&self) -> &str {
        &self.trained_on
    }

    /// Number of distinct contexts observed in training.
    pub fn total_contexts(&self) -> usize {
        self.counts.len()
    }

    /// Exact occurrence counting over every pixel of every training image.
    /// Deterministic and independent of image order.
    pub fn fit(train: &Dataset, order: usize, alpha: R) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut model = Self::untrained(order, alpha)?;
        model.trained_on = train.name().to_string();
        for img in train.images() {
            model.absorb(img);
        }
        Ok(model)
    }

    fn absorb(&mut self, img: &ImageTensor) {
        for c in 0..IMG_CHANNELS {
            let plane = img.plane(c);
            for y in 0..IMG_SIDE {
                for x in 0..IMG_SIDE {
                    let key = context_key(plane, y, x, self.order);
                    let symbol = plane[y * IMG_SIDE + x];
                    self.counts.entry(key).or_default().add(symbol, 1);
                }
            }
        }
    }

    /// Adds `other`'s counts into `self`. Hyperparameters must match.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.order != other.order {
            return Err(Error::HyperparameterMismatch(format!(
                "order {} vs {}",
                self.order, other.order
            )));
        }
        if self.alpha != other.alpha {
            return Err(Error::HyperparameterMismatch(format!(
                "alpha {} vs {}",
                self.alpha, other.alpha
            )));
        }
        for (key, row) in &other.counts {
            let target = self.counts.entry(*key).or_default();
            for &(symbol, n) in &row.counts {
                target.add(symbol, n);
            }
        }
        if self.trained_on.is_empty() {
            self.trained_on = other.trained_on.clone();
        } else if !other.trained_on.is_empty() && self.trained_on != other.trained_on {
            self.trained_on = format!("{}+{}", self.trained_on, other.trained_on);
        }
        Ok(())
    }

    /// Smoothed conditional probability of `symbol` in the context keyed by
    /// `key`. Sums to exactly 1 over the 256 symbols.
    fn prob(&self, key: u64, symbol: u8) -> R {
        let n256 = R::from_usize_lossy(256);
        match self.counts.get(&key) {
            Some(row) => {
                let num = R::from_u64(row.count(symbol)).expect("count fits") + self.alpha;
                let den = R::from_u64(row.total).expect("total fits") + n256 * self.alpha;
                num / den
            }
            None => R::one() / n256,
        }
    }

    /// Negative log2-likelihood in bits per dimension; finite and positive
    /// by construction since smoothing forbids zero probabilities.
    pub fn nll_bpd(&self, img: &ImageTensor) -> R {
        let mut log_sum = R::zero();
        for c in 0..IMG_CHANNELS {
            let plane = img.plane(c);
            for y in 0..IMG_SIDE {
                for x in 0..IMG_SIDE {
                    let key = context_key(plane, y, x, self.order);
                    let p = self.prob(key, plane[y * IMG_SIDE + x]);
                    log_sum = log_sum + p.log2();
                }
            }
        }
        -log_sum / R::from_usize_lossy(IMG_DIM)
    }

    /// `nll_bpd` over many images in parallel, in input order.
    pub fn nll_bpd_many(&self, images: &[ImageTensor]) -> Vec<R> {
        images.par_iter().map(|img| self.nll_bpd(img)).collect()
    }

    /// Mean negative log2-likelihood over a dataset.
    pub fn mean_nll_bpd(&self, images: &[ImageTensor]) -> Result<R> {
        if images.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let values = self.nll_bpd_many(images);
        let sum = values.iter().fold(R::zero(), |acc, &v| acc + v);
        Ok(sum / R::from_usize_lossy(values.len()))
    }

    /// Serializes to the versioned `OODM` binary format. Counts roundtrip
    /// exactly; `alpha` is stored as an `f64`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.push(MODEL_VERSION);
        out.push(self.order as u8);
        out.extend_from_slice(&self.alpha.to_f64().expect("alpha fits f64").to_le_bytes());
        let name = self.trained_on.as_bytes();
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name);
        out.extend_from_slice(&(self.counts.len() as u64).to_le_bytes());
        let mut keys: Vec<&u64> = self.counts.keys().collect();
        keys.sort();
        for key in keys {
            let row = &self.counts[key];
            out.extend_from_slice(&key.to_le_bytes());
            out.extend_from_slice(&(row.counts.len() as u32).to_le_bytes());
            for &(symbol, n) in &row.counts {
                out.push(symbol);
                out.extend_from_slice(&n.to_le_bytes());
            }
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut r = bytes.as_slice();
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(Error::ModelFormat("bad magic".into()));
        }
        let version = read_u8(&mut r)?;
        if version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let order = read_u8(&mut r)? as usize;
        if order > MAX_ORDER {
            return Err(Error::ModelFormat(format!("bad order {order}")));
        }
        let alpha_f64 = f64::from_le_bytes(read_array(&mut r)?);
        let alpha = R::from_f64(alpha_f64)
            .filter(|a| *a > R::zero())
            .ok_or_else(|| Error::ModelFormat(format!("bad alpha {alpha_f64}")))?;
        let name_len = u32::from_le_bytes(read_array(&mut r)?) as usize;
        let mut name = vec![0u8; name_len];
        read_exact(&mut r, &mut name)?;
        let trained_on = String::from_utf8(name)
            .map_err(|_| Error::ModelFormat("dataset name is not UTF-8".into()))?;
        let n_contexts = u64::from_le_bytes(read_array(&mut r)?);
        let mut counts = HashMap::with_capacity(n_contexts as usize);
        for _ in 0..n_contexts {
            let key = u64::from_le_bytes(read_array(&mut r)?);
            let n_symbols = u32::from_le_bytes(read_array(&mut r)?) as usize;
            let mut row = CountRow::default();
            for _ in 0..n_symbols {
                let symbol = read_u8(&mut r)?;
                let n = u64::from_le_bytes(read_array(&mut r)?);
                row.add(symbol, n);
            }
            if counts.insert(key, row).is_some() {
                return Err(Error::ModelFormat(format!("duplicate context key {key}")));
            }
        }
        if !r.is_empty() {
            return Err(Error::ModelFormat(format!(
                "{} trailing bytes",
                r.len()
            )));
        }
        Ok(Self {
            order,
            alpha,
            trained_on,
            counts,
        })
    }
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    Read::read_exact(r, buf).map_err(|_| Error::ModelFormat("truncated model file".into()))
}

fn read_u8(r: &mut &[u8]) -> Result<u8> {
    let mut b = [0u8; 1];
    read_exact(r, &mut b)?;
    Ok(b[0])
}

fn read_array<const N: usize>(r: &mut &[u8]) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    read_exact(r, &mut b)?;
    Ok(b)
}

/// Context key of the pixel at `(y, x)`: its causal neighbors packed as a
/// base-257 number, most recent neighbor in the lowest digit.
fn context_key(plane: &[u8], y: usize, x: usize, order: usize) -> u64 {
    let mut key = 0u64;
    for &(dy, dx) in NEIGHBORS[..order].iter().rev() {
        let ny = y as i32 + dy;
        let nx = x as i32 + dx;
        let symbol = if (0..IMG_SIDE as i32).contains(&ny) && (0..IMG_SIDE as i32).contains(&nx) {
            plane[ny as usize * IMG_SIDE + nx as usize] as u64
        } else {
            SENTINEL
        };
        key = key * KEY_BASE + symbol;
    }
    key
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_constant, synth_noise, Dataset};

    fn byte7_dataset(n: usize) -> Dataset {
        let ids = (0..n).map(|i| format!("seven_{i}")).collect();
        let images = (0..n).map(|_| ImageTensor::constant([7, 7, 7])).collect();
        Dataset::new("sevens", ids, images).unwrap()
    }

    #[test]
    fn untrained_model_is_exactly_uniform() {
        let model: ContextModel = ContextModel::untrained(2, 1.0).unwrap();
        for img in synth_noise(3, 1).unwrap().images() {
            assert_eq!(model.nll_bpd(img), 8.0);
        }
    }

    #[test]
    fn order_zero_counts_are_plain_histograms() {
        let ds = byte7_dataset(2);
        let model: ContextModel = ContextModel::fit(&ds, 0, 1.0).unwrap();
        assert_eq!(model.total_contexts(), 1);
        let row = model.counts.values().next().unwrap();
        assert_eq!(row.count(7), 2 * IMG_DIM as u64);
        assert_eq!(row.total, 2 * IMG_DIM as u64);
    }

    #[test]
    fn order_zero_nll_matches_closed_form() {
        // After n*d training pixels of byte 7 with alpha = 1, a byte-7 image
        // costs log2((n*d + 256) / (n*d + 1)) bits per pixel.
        for n in [1usize, 4] {
            let ds = byte7_dataset(n);
            let model: ContextModel = ContextModel::fit(&ds, 0, 1.0).unwrap();
            let nd = (n * IMG_DIM) as f64;
            let expected = ((nd + 256.0) / (nd + 1.0)).log2();
            let got = model.nll_bpd(&ImageTensor::constant([7, 7, 7]));
            assert!(
                (got - expected).abs() < 1e-12,
                "n={n}: got {got}, expected {expected}"
            );
        }
    }

    #[test]
    fn fit_is_order_independent_and_additive() {
        let noise = synth_noise(6, 42).unwrap();
        let ids: Vec<String> = noise.ids().to_vec();
        let images = noise.images().to_vec();

        let reversed = Dataset::new(
            "rev",
            ids.iter().rev().cloned().collect(),
            images.iter().rev().cloned().collect(),
        )
        .unwrap();
        let forward: ContextModel = ContextModel::fit(&noise, 2, 1.0).unwrap();
        let backward: ContextModel = ContextModel::fit(&reversed, 2, 1.0).unwrap();
        assert_eq!(forward.counts, backward.counts);

        let a = Dataset::new("a", ids[..3].to_vec(), images[..3].to_vec()).unwrap();
        let b = Dataset::new("b", ids[3..].to_vec(), images[3..].to_vec()).unwrap();
        let mut merged: ContextModel = ContextModel::fit(&a, 2, 1.0).unwrap();
        merged.merge(&ContextModel::fit(&b, 2, 1.0).unwrap()).unwrap();
        assert_eq!(merged.counts, forward.counts);
    }

    #[test]
    fn merge_is_commutative_with_identity() {
        let noise = synth_noise(4, 9).unwrap();
        let (a, b) = (
            Dataset::new("a", noise.ids()[..2].to_vec(), noise.images()[..2].to_vec()).unwrap(),
            Dataset::new("b", noise.ids()[2..].to_vec(), noise.images()[2..].to_vec()).unwrap(),
        );
        let ma: ContextModel = ContextModel::fit(&a, 1, 1.0).unwrap();
        let mb: ContextModel = ContextModel::fit(&b, 1, 1.0).unwrap();

        let mut ab = ma.clone();
        ab.merge(&mb).unwrap();
        let mut ba = mb.clone();
        ba.merge(&ma).unwrap();
        assert_eq!(ab.counts, ba.counts);

        let empty: ContextModel = ContextModel::untrained(1, 1.0).unwrap();
        let mut with_empty = ma.clone();
        with_empty.merge(&empty).unwrap();
        assert_eq!(with_empty.counts, ma.counts);
    }

    #[test]
    fn merge_rejects_mismatched_hyperparameters() {
        let ds = synth_noise(2, 1).unwrap();
        let mut a: ContextModel = ContextModel::fit(&ds, 2, 1.0).unwrap();
        let b: ContextModel = ContextModel::fit(&ds, 1, 1.0).unwrap();
        assert!(matches!(
            a.merge(&b),
            Err(Error::HyperparameterMismatch(_))
        ));
        let c: ContextModel = ContextModel::fit(&ds, 2, 0.5).unwrap();
        assert!(matches!(
            a.merge(&c),
            Err(Error::HyperparameterMismatch(_))
        ));
    }

    #[test]
    fn probabilities_normalize_over_random_contexts() {
        let ds = synth_noise(5, 77).unwrap();
        let model: ContextModel = ContextModel::fit(&ds, 2, 0.5).unwrap();
        let mut keys: Vec<u64> = model.counts.keys().copied().take(1000).collect();
        assert_eq!(keys.len(), 1000);
        keys.push(999_999_999); // unseen context exercises the uniform branch
        for key in keys {
            let total: f64 = (0..=255u8).map(|s| model.prob(key, s)).sum();
            assert!((total - 1.0).abs() < 1e-12, "sum {total} for key {key}");
        }
    }

    #[test]
    fn structured_training_beats_noise() {
        let train = synth_constant(20, 5).unwrap();
        let model: ContextModel = ContextModel::fit(&train, 2, 1.0).unwrap();
        let on_train = model.mean_nll_bpd(train.images()).unwrap();
        let on_noise = model
            .mean_nll_bpd(synth_noise(20, 6).unwrap().images())
            .unwrap();
        assert!(on_train <= on_noise, "{on_train} > {on_noise}");
    }

    #[test]
    fn save_load_roundtrips_counts_exactly() {
        let ds = synth_noise(3, 15).unwrap();
        let model: ContextModel = ContextModel::fit(&ds, 3, 0.25).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.oodm");
        model.save(&path).unwrap();
        let loaded: ContextModel = ContextModel::load(&path).unwrap();
        assert_eq!(loaded.order(), 3);
        assert_eq!(loaded.alpha(), 0.25);
        assert_eq!(loaded.trained_on(), "noise");
        assert_eq!(loaded.counts, model.counts);
    }

    #[test]
    fn load_rejects_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.oodm");
        std::fs::write(&path, b"NOTM").unwrap();
        assert!(matches!(
            ContextModel::<f64>::load(&path),
            Err(Error::ModelFormat(_))
        ));
    }

    #[test]
    fn nll_is_batch_invariant() {
        let ds = synth_noise(6, 3).unwrap();
        let model: ContextModel = ContextModel::fit(&ds, 2, 1.0).unwrap();
        let eval = synth_noise(5, 4).unwrap();
        let batched = model.nll_bpd_many(eval.images());
        for (img, &b) in eval.images().iter().zip(&batched) {
            assert_eq!(model.nll_bpd(img), b);
        }
    }

    #[test]
    fn generic_scalar_instantiations_agree_roughly() {
        let ds = synth_noise(2, 8).unwrap();
        let m64: ContextModel<f64> = ContextModel::fit(&ds, 1, 1.0).unwrap();
        let m32: ContextModel<f32> = ContextModel::fit(&ds, 1, 1.0).unwrap();
        let eval = synth_noise(1, 9).unwrap();
        let img = &eval.images()[0];
        let (a, b) = (m64.nll_bpd(img), m32.nll_bpd(img) as f64);
        assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }
}
