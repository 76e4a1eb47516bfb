//! PNG-style codec: per-row filtering followed by a raw DEFLATE stream.
//!
//! Each channel plane is filtered row by row with the best of
//! None/Sub/Up/Average/Paeth, chosen by minimum sum of absolute residuals
//! (ties go to the lowest filter id). The DEFLATE input is the 96 filter ids
//! followed by the 3072 filtered bytes; the payload is an RFC 1951 stream
//! with no container wrapper and no checksum, so any inflater can verify
//! losslessness.

use std::num::NonZeroU64;

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::{IMG_CHANNELS, IMG_SIDE};

const NUM_FILTERS: u8 = 5;
const ROWS_TOTAL: usize = IMG_CHANNELS * IMG_SIDE;
const STREAM_LEN: usize = ROWS_TOTAL + IMG_CHANNELS * IMG_SIDE * IMG_SIDE;

pub fn compress(img: &ImageTensor) -> Vec<u8> {
    let mut filters = Vec::with_capacity(ROWS_TOTAL);
    let mut data = Vec::with_capacity(STREAM_LEN - ROWS_TOTAL);
    let zero_row = [0u8; IMG_SIDE];
    for c in 0..IMG_CHANNELS {
        let plane = img.plane(c);
        let mut prev: &[u8] = &zero_row;
        for y in 0..IMG_SIDE {
            let row = &plane[y * IMG_SIDE..(y + 1) * IMG_SIDE];
            let (filter, filtered) = best_filter(row, prev);
            filters.push(filter);
            data.extend_from_slice(&filtered);
            prev = row;
        }
    }
    let mut stream = filters;
    stream.extend_from_slice(&data);
    deflate_raw(&stream)
}

pub fn decompress(payload: &[u8]) -> Result<ImageTensor> {
    let stream = miniz_oxide::inflate::decompress_to_vec_with_limit(payload, STREAM_LEN)
        .map_err(|e| Error::Decode(format!("inflate failed: {e}")))?;
    if stream.len() != STREAM_LEN {
        return Err(Error::Decode(format!(
            "inflated to {} bytes, expected {STREAM_LEN}",
            stream.len()
        )));
    }
    let (filters, data) = stream.split_at(ROWS_TOTAL);
    let mut pixels = Vec::with_capacity(STREAM_LEN - ROWS_TOTAL);
    let zero_row = [0u8; IMG_SIDE];
    for c in 0..IMG_CHANNELS {
        for y in 0..IMG_SIDE {
            let row_idx = c * IMG_SIDE + y;
            let filter = filters[row_idx];
            if filter >= NUM_FILTERS {
                return Err(Error::Decode(format!("bad filter id {filter}")));
            }
            let raw = &data[row_idx * IMG_SIDE..(row_idx + 1) * IMG_SIDE];
            let prev_start = pixels.len().checked_sub(IMG_SIDE);
            let prev: &[u8] = if y == 0 {
                &zero_row
            } else {
                &pixels[prev_start.unwrap()..]
            };
            let prev = prev.to_vec(); // detach from the growing buffer
            unfilter_row(filter, raw, &prev, &mut pixels);
        }
    }
    ImageTensor::from_pixels(pixels)
}

/// Absolute residual magnitude when bytes are read as two's-complement.
fn residual_cost(bytes: &[u8]) -> u32 {
    bytes.iter().map(|&v| (v as u32).min(256 - v as u32)).sum()
}

fn best_filter(row: &[u8], prev: &[u8]) -> (u8, Vec<u8>) {
    let mut best: Option<(u32, u8, Vec<u8>)> = None;
    for filter in 0..NUM_FILTERS {
        let mut out = Vec::with_capacity(IMG_SIDE);
        filter_row(filter, row, prev, &mut out);
        let cost = residual_cost(&out);
        if best.as_ref().is_none_or(|(c, _, _)| cost < *c) {
            best = Some((cost, filter, out));
        }
    }
    let (_, filter, filtered) = best.unwrap();
    (filter, filtered)
}

fn filter_row(filter: u8, row: &[u8], prev: &[u8], out: &mut Vec<u8>) {
    for x in 0..row.len() {
        let left = if x > 0 { row[x - 1] } else { 0 };
        let above = prev[x];
        let upper_left = if x > 0 { prev[x - 1] } else { 0 };
        let predicted = predict(filter, left, above, upper_left);
        out.push(row[x].wrapping_sub(predicted));
    }
}

fn unfilter_row(filter: u8, raw: &[u8], prev: &[u8], pixels: &mut Vec<u8>) {
    let base = pixels.len();
    for x in 0..raw.len() {
        let left = if x > 0 { pixels[base + x - 1] } else { 0 };
        let above = prev[x];
        let upper_left = if x > 0 { prev[x - 1] } else { 0 };
        let predicted = predict(filter, left, above, upper_left);
        pixels.push(raw[x].wrapping_add(predicted));
    }
}

fn predict(filter: u8, left: u8, above: u8, upper_left: u8) -> u8 {
    match filter {
        0 => 0,
        1 => left,
        2 => above,
        3 => ((left as u16 + above as u16) / 2) as u8,
        4 => paeth(left, above, upper_left),
        _ => unreachable!("filter id validated by caller"),
    }
}

fn paeth(a: u8, b: u8, c: u8) -> u8 {
    let p = a as i16 + b as i16 - c as i16;
    let pa = (p - a as i16).abs();
    let pb = (p - b as i16).abs();
    let pc = (p - c as i16).abs();
    if pa <= pb && pa <= pc {
        a
    } else if pb <= pc {
        b
    } else {
        c
    }
}

fn deflate_raw(data: &[u8]) -> Vec<u8> {
    // one iteration already reaches the final size on these 3 KB streams;
    // more only costs time
    let options = zopfli::Options {
        iteration_count: NonZeroU64::new(1).unwrap(),
        ..Default::default()
    };
    let mut out = Vec::new();
    zopfli::compress(options, zopfli::Format::Deflate, data, &mut out)
        .expect("in-memory compression cannot fail");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::IMG_DIM;

    fn noise_image(seed: u64) -> ImageTensor {
        crate::data::synth_noise(1, seed).unwrap().images()[0].clone()
    }

    #[test]
    fn roundtrip_noise_and_constant() {
        for img in [noise_image(1), ImageTensor::constant([200, 13, 77])] {
            let payload = compress(&img);
            assert_eq!(decompress(&payload).unwrap(), img);
        }
    }

    #[test]
    fn constant_image_compresses_to_a_few_bytes() {
        // Sub zeroes row 0 after its first byte, Up zeroes the remaining
        // rows, and DEFLATE collapses the runs; the Huffman header dominates
        // the ~33-byte payload.
        for values in [[200, 13, 77], [0, 0, 0], [255, 1, 128]] {
            let img = ImageTensor::constant(values);
            let payload = compress(&img);
            let bpd = payload.len() as f64 * 8.0 / IMG_DIM as f64;
            assert!(bpd <= 0.1, "constant image {values:?} bpd {bpd:.4}");
        }
    }

    #[test]
    fn noise_stays_under_stored_block_bound() {
        let img = noise_image(2);
        let payload = compress(&img);
        let bpd = payload.len() as f64 * 8.0 / IMG_DIM as f64;
        assert!(bpd <= 8.5, "noise bpd {bpd:.4}");
    }

    #[test]
    fn compression_is_deterministic() {
        let img = noise_image(3);
        assert_eq!(compress(&img), compress(&img));
    }

    #[test]
    fn truncated_payload_is_detected() {
        let img = noise_image(4);
        let mut payload = compress(&img);
        payload.truncate(payload.len() / 2);
        assert!(matches!(decompress(&payload), Err(Error::Decode(_))));
    }
}
