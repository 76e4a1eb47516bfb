//! Dataset synthesis, normalization, splitting, and likelihood-file ingestion.
//!
//! All randomness is drawn from a splitmix64-seeded xoshiro256** generator so
//! that synthetic datasets and splits are byte-reproducible across runs and
//! machines for a given seed.

pub mod formats;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use crate::error::{Error, Result};
use crate::image::{normalize_input, ImageTensor};
use crate::{IMG_CHANNELS, IMG_DIM};

/// A named, ordered collection of normalized images with unique string ids.
#[derive(Clone, Debug)]
pub struct Dataset {
    name: String,
    ids: Vec<String>,
    images: Vec<ImageTensor>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, ids: Vec<String>, images: Vec<ImageTensor>) -> Result<Self> {
        if ids.len() != images.len() {
            return Err(Error::InvalidArgument(format!(
                "{} ids for {} images",
                ids.len(),
                images.len()
            )));
        }
        let mut seen = HashSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId { id: id.clone() });
            }
        }
        Ok(Self {
            name: name.into(),
            ids,
            images,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn images(&self) -> &[ImageTensor] {
        &self.images
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ImageTensor)> {
        self.ids.iter().map(String::as_str).zip(self.images.iter())
    }

    fn select(&self, name: String, indices: &[usize]) -> Self {
        Self {
            name,
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
        }
    }
}

/// Train/val/test fractions plus the shuffle seed.
#[derive(Clone, Copy, Debug)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Self {
        Self {
            train,
            val,
            test,
            seed,
        }
    }

    /// The 0.8/0.1/0.1 split used when a dataset has no predefined partitions.
    pub fn default_with_seed(seed: u64) -> Self {
        Self::new(0.8, 0.1, 0.1, seed)
    }

    fn validate(&self) -> Result<()> {
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::BadFractions { sum });
        }
        if self.train < 0.0 || self.val < 0.0 || self.test < 0.0 {
            return Err(Error::BadFractions { sum });
        }
        Ok(())
    }
}

fn rng_for(seed: u64) -> Xoshiro256StarStar {
    Xoshiro256StarStar::seed_from_u64(seed)
}

/// Fisher-Yates with an explicit index draw, so the permutation is pinned by
/// the generator alone.
fn shuffled_indices(n: usize, rng: &mut Xoshiro256StarStar) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        idx.swap(i, j);
    }
    idx
}

/// Draws `n` images of i.i.d. uniform bytes.
pub fn synth_noise(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = rng_for(seed);
    let mut ids = Vec::with_capacity(n);
    let mut images = Vec::with_capacity(n);
    for i in 0..n {
        let mut pixels = vec![0u8; IMG_DIM];
        rng.fill_bytes(&mut pixels);
        ids.push(format!("noise_{i:05}"));
        images.push(ImageTensor::from_pixels(pixels)?);
    }
    Dataset::new("noise", ids, images)
}

/// Draws `n` constant-color images: one random byte per channel, tiled over
/// the 32x32 plane.
pub fn synth_constant(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = rng_for(seed);
    let mut ids = Vec::with_capacity(n);
    let mut images = Vec::with_capacity(n);
    for i in 0..n {
        let mut values = [0u8; IMG_CHANNELS];
        rng.fill_bytes(&mut values);
        ids.push(format!("constant_{i:05}"));
        images.push(ImageTensor::constant(values));
    }
    Dataset::new("constant", ids, images)
}

/// Shuffles by seed and partitions into train/val/test.
///
/// Sizes are `floor(n * fraction)` for val and test; the remainder goes to
/// train. The parts are disjoint and cover the input.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    spec.validate()?;
    let n = ds.len();
    if n < 10 {
        return Err(Error::DatasetTooSmall { n, min: 10 });
    }
    let mut rng = rng_for(spec.seed);
    let idx = shuffled_indices(n, &mut rng);
    let n_val = (n as f64 * spec.val).floor() as usize;
    let n_test = (n as f64 * spec.test).floor() as usize;
    let n_train = n - n_val - n_test;
    let train = ds.select(format!("{}-train", ds.name), &idx[..n_train]);
    let val = ds.select(format!("{}-val", ds.name), &idx[n_train..n_train + n_val]);
    let test = ds.select(format!("{}-test", ds.name), &idx[n_train + n_val..]);
    Ok((train, val, test))
}

/// Carves a validation subset out of a predefined training set, leaving any
/// predefined test set untouched. `frac` defaults to 0.1 in callers.
pub fn carve_validation(train: &Dataset, frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(0.0..1.0).contains(&frac) {
        return Err(Error::BadFractions { sum: frac });
    }
    let n = train.len();
    if n < 10 {
        return Err(Error::DatasetTooSmall { n, min: 10 });
    }
    let mut rng = rng_for(seed);
    let idx = shuffled_indices(n, &mut rng);
    let n_val = (n as f64 * frac).floor() as usize;
    let rest = train.select(format!("{}-train", train.name), &idx[..n - n_val]);
    let val = train.select(format!("{}-val", train.name), &idx[n - n_val..]);
    Ok((rest, val))
}

/// One externally computed negative log2-likelihood, bits per dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct NllRecord {
    pub id: String,
    pub nll_bpd: f64,
}

/// Reads an `id,nll_bpd` CSV. Order is preserved; ids must be unique and
/// values finite and non-negative.
pub fn read_nll_file(path: &Path) -> Result<Vec<NllRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
            _ => Error::Csv(e),
        })?;
    {
        let headers = reader.headers()?;
        let expect = ["id", "nll_bpd"];
        if headers.iter().ne(expect) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                msg: format!("expected header `id,nll_bpd`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
    }
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("expected 2 fields, got {}", row.len()),
            });
        }
        let id = row[0].to_string();
        let nll_bpd: f64 = row[1].trim().parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("bad nll_bpd value `{}`", &row[1]),
        })?;
        if !nll_bpd.is_finite() || nll_bpd < 0.0 {
            return Err(Error::InvalidValue {
                id: id.clone(),
                msg: format!("nll_bpd {nll_bpd} must be finite and >= 0"),
            });
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId { id });
        }
        records.push(NllRecord { id, nll_bpd });
    }
    Ok(records)
}

/// Writes the `id,nll_bpd` CSV consumed by [`read_nll_file`].
pub fn write_nll_file(path: &Path, records: &[NllRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["id", "nll_bpd"])?;
    for r in records {
        writer.write_record([r.id.as_str(), &format!("{}", r.nll_bpd)])?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// One manifest row: an image id and the path of its file.
#[derive(Clone, Debug)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
}

/// Reads an `id,path` manifest CSV. Relative paths are kept as written;
/// [`load_dataset`] resolves them against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
            _ => Error::Csv(e),
        })?;
    {
        let headers = reader.headers()?;
        if headers.iter().ne(["id", "path"]) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                msg: "expected header `id,path`".into(),
            });
        }
    }
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("expected 2 fields, got {}", row.len()),
            });
        }
        let id = row[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId { id });
        }
        entries.push(ManifestEntry {
            id,
            path: PathBuf::from(&row[1]),
        });
    }
    Ok(entries)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["id", "path"])?;
    for e in entries {
        writer.write_record([e.id.as_str(), &e.path.display().to_string()])?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Loads every image named by a manifest, normalizing each to 3x32x32.
///
/// All missing files are reported at once instead of failing on the first.
pub fn load_dataset(manifest_path: &Path, name: impl Into<String>) -> Result<Dataset> {
    let entries = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let resolved: Vec<(String, PathBuf)> = entries
        .into_iter()
        .map(|e| {
            let p = if e.path.is_absolute() {
                e.path
            } else {
                base.join(&e.path)
            };
            (e.id, p)
        })
        .collect();
    let missing: Vec<String> = resolved
        .iter()
        .filter(|(_, p)| !p.exists())
        .map(|(_, p)| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingFiles(missing.join(", ")));
    }
    let mut ids = Vec::with_capacity(resolved.len());
    let mut images = Vec::with_capacity(resolved.len());
    for (id, p) in resolved {
        let raw = formats::read_image(&p)?;
        images.push(normalize_input(&raw)?);
        ids.push(id);
    }
    Dataset::new(name, ids, images)
}
