//! Lossless compressors producing the complexity estimate `L(x)`.
//!
//! `L(x)` is the compressed length of `x` in bits divided by its
//! dimensionality `d = 3072` — the code length of `x` under the universal
//! model a general-purpose compressor implies. Two hermetic codecs are built
//! in (`png_like` and `order0_ac`); anything else is reached through the
//! external command adapter. Payloads are headerless: built-in codecs emit
//! bare streams and the external adapter subtracts a declared header size.

pub mod external;
pub mod order0_ac;
pub mod png_like;

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

pub use external::{CodecRegistry, ExternalCodecSpec, EXTERNAL_CODECS_ENV};

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::IMG_DIM;

/// Identifies a compressor: one of the two built-ins or a declared external.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CodecId {
    PngLike,
    Order0Ac,
    External(String),
}

impl CodecId {
    pub fn name(&self) -> &str {
        match self {
            CodecId::PngLike => "png_like",
            CodecId::Order0Ac => "order0_ac",
            CodecId::External(name) => name,
        }
    }

    /// Resolves a codec name; external names must be declared in `registry`.
    pub fn resolve(name: &str, registry: &CodecRegistry) -> Result<Self> {
        match name {
            "png_like" => Ok(CodecId::PngLike),
            "order0_ac" => Ok(CodecId::Order0Ac),
            other => {
                if registry.get(other).is_some() {
                    Ok(CodecId::External(other.to_string()))
                } else {
                    Err(Error::UnknownCodec {
                        name: other.to_string(),
                    })
                }
            }
        }
    }
}

impl fmt::Display for CodecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A compressed image: headerless payload plus its length in bits.
///
/// `bit_length` is `8 * payload.len()` except for `order0_ac`, which reports
/// the exact number of coded bits.
#[derive(Clone, Debug)]
pub struct CompressedBlob {
    pub codec: CodecId,
    pub payload: Vec<u8>,
    pub bit_length: u64,
}

/// Complexity in bits per dimension for a given code length in bits.
pub fn bpd_from_bits(bits: u64) -> f64 {
    bits as f64 / IMG_DIM as f64
}

/// Per-codec complexity estimates and their minimum (the best-compressor
/// variant of `L`).
#[derive(Clone, Debug)]
pub struct ComplexityEstimate {
    per_codec: BTreeMap<CodecId, f64>,
    min_bpd: f64,
}

impl ComplexityEstimate {
    pub fn from_parts(per_codec: BTreeMap<CodecId, f64>) -> Result<Self> {
        if per_codec.is_empty() {
            return Err(Error::InvalidArgument("no codecs given".into()));
        }
        let min_bpd = per_codec.values().copied().fold(f64::INFINITY, f64::min);
        Ok(Self { per_codec, min_bpd })
    }

    pub fn per_codec(&self) -> &BTreeMap<CodecId, f64> {
        &self.per_codec
    }

    pub fn get(&self, codec: &CodecId) -> Option<f64> {
        self.per_codec.get(codec).copied()
    }

    pub fn min_bpd(&self) -> f64 {
        self.min_bpd
    }
}

/// Compresses one image with one codec. Deterministic for all codecs; the
/// external adapter verifies this by running its command twice.
pub fn compress(
    img: &ImageTensor,
    codec: &CodecId,
    registry: &CodecRegistry,
) -> Result<CompressedBlob> {
    match codec {
        CodecId::PngLike => {
            let payload = png_like::compress(img);
            Ok(CompressedBlob {
                codec: codec.clone(),
                bit_length: payload.len() as u64 * 8,
                payload,
            })
        }
        CodecId::Order0Ac => {
            let (payload, bit_length) = order0_ac::compress(img);
            Ok(CompressedBlob {
                codec: codec.clone(),
                payload,
                bit_length,
            })
        }
        CodecId::External(name) => {
            let spec = registry.get(name).ok_or_else(|| Error::UnknownCodec {
                name: name.clone(),
            })?;
            let payload = external::compress(img, spec)?;
            Ok(CompressedBlob {
                codec: codec.clone(),
                bit_length: payload.len() as u64 * 8,
                payload,
            })
        }
    }
}

/// Reconstructs the source image from a built-in codec's blob, byte-exactly.
pub fn decompress(blob: &CompressedBlob) -> Result<ImageTensor> {
    match &blob.codec {
        CodecId::PngLike => png_like::decompress(&blob.payload),
        CodecId::Order0Ac => order0_ac::decompress(&blob.payload, blob.bit_length),
        CodecId::External(name) => Err(Error::UnsupportedDecompress {
            codec: name.clone(),
        }),
    }
}

/// `L(x)` for one codec: coded bits divided by `d`.
pub fn complexity(img: &ImageTensor, codec: &CodecId, registry: &CodecRegistry) -> Result<f64> {
    Ok(bpd_from_bits(compress(img, codec, registry)?.bit_length))
}

/// `L(x)` under every requested codec plus the minimum across them.
pub fn complexity_min(
    img: &ImageTensor,
    codecs: &[CodecId],
    registry: &CodecRegistry,
) -> Result<ComplexityEstimate> {
    if codecs.is_empty() {
        return Err(Error::InvalidArgument("no codecs given".into()));
    }
    let mut per_codec = BTreeMap::new();
    for codec in codecs {
        per_codec.insert(codec.clone(), complexity(img, codec, registry)?);
    }
    ComplexityEstimate::from_parts(per_codec)
}

/// Batch variant of [`complexity_min`]; images are processed in parallel and
/// results returned in input order.
pub fn complexity_many(
    images: &[ImageTensor],
    codecs: &[CodecId],
    registry: &CodecRegistry,
) -> Result<Vec<ComplexityEstimate>> {
    if codecs.is_empty() {
        return Err(Error::InvalidArgument("no codecs given".into()));
    }
    images
        .par_iter()
        .map(|img| complexity_min(img, codecs, registry))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_noise;
    use crate::image::avg_pool_upsample;

    fn registry() -> CodecRegistry {
        CodecRegistry::empty()
    }

    #[test]
    fn bpd_arithmetic() {
        assert_eq!(bpd_from_bits(6144), 2.0);
        assert_eq!(bpd_from_bits(384 * 8), 1.0);
    }

    #[test]
    fn resolve_rejects_undeclared_external() {
        assert!(matches!(
            CodecId::resolve("flif", &registry()),
            Err(Error::UnknownCodec { .. })
        ));
        assert_eq!(
            CodecId::resolve("png_like", &registry()).unwrap(),
            CodecId::PngLike
        );
    }

    #[test]
    fn complexity_is_deterministic() {
        let img = synth_noise(1, 3).unwrap().images()[0].clone();
        for codec in [CodecId::PngLike, CodecId::Order0Ac] {
            let a = complexity(&img, &codec, &registry()).unwrap();
            let b = complexity(&img, &codec, &registry()).unwrap();
            assert_eq!(a, b);
            assert!(a > 0.0 && a.is_finite());
        }
    }

    #[test]
    fn min_estimate_is_the_per_codec_minimum() {
        let mut map = BTreeMap::new();
        map.insert(CodecId::PngLike, 1.2);
        map.insert(CodecId::Order0Ac, 0.9);
        map.insert(CodecId::External("x".into()), 1.1);
        let est = ComplexityEstimate::from_parts(map).unwrap();
        assert_eq!(est.min_bpd(), 0.9);

        let mut single = BTreeMap::new();
        single.insert(CodecId::PngLike, 1.2);
        let est = ComplexityEstimate::from_parts(single).unwrap();
        assert_eq!(est.min_bpd(), 1.2);
    }

    #[test]
    fn adding_a_codec_never_increases_the_minimum() {
        let img = synth_noise(1, 8).unwrap().images()[0].clone();
        let one = complexity_min(&img, &[CodecId::PngLike], &registry()).unwrap();
        let both =
            complexity_min(&img, &[CodecId::PngLike, CodecId::Order0Ac], &registry()).unwrap();
        assert!(both.min_bpd() <= one.min_bpd());
        assert!(both
            .per_codec()
            .values()
            .all(|&bpd| both.min_bpd() <= bpd));
    }

    #[test]
    fn empty_codec_list_is_an_error() {
        let img = ImageTensor::constant([1, 1, 1]);
        assert!(complexity_min(&img, &[], &registry()).is_err());
    }

    #[test]
    fn noise_minus_constant_gap_under_png_like() {
        let noise = synth_noise(1, 21).unwrap().images()[0].clone();
        let constant = ImageTensor::constant([7, 99, 203]);
        let l_noise = complexity(&noise, &CodecId::PngLike, &registry()).unwrap();
        let l_const = complexity(&constant, &CodecId::PngLike, &registry()).unwrap();
        assert!(
            l_noise - l_const >= 7.0,
            "gap {:.3} too small",
            l_noise - l_const
        );
    }

    #[test]
    fn pooling_reduces_complexity_monotonically() {
        let noise = synth_noise(1, 30).unwrap().images()[0].clone();
        for codec in [CodecId::PngLike, CodecId::Order0Ac] {
            let mut prev = f64::INFINITY;
            for f in crate::image::POOL_FACTORS {
                let pooled = avg_pool_upsample(&noise, f).unwrap();
                let bpd = complexity(&pooled, &codec, &registry()).unwrap();
                assert!(
                    bpd <= prev + 0.05,
                    "{codec}: factor {f} rose from {prev:.3} to {bpd:.3}"
                );
                prev = bpd;
            }
        }
    }

    #[test]
    fn batch_matches_single_calls() {
        let images = synth_noise(4, 17).unwrap().images().to_vec();
        let codecs = [CodecId::Order0Ac];
        let batch = complexity_many(&images, &codecs, &registry()).unwrap();
        for (img, est) in images.iter().zip(&batch) {
            let single = complexity_min(img, &codecs, &registry()).unwrap();
            assert_eq!(single.min_bpd(), est.min_bpd());
        }
    }
}
