//! Image file formats: the raw `OODT` container plus binary PPM/PGM input.
//!
//! Container layout, 16-byte header then channel-plane pixel data:
//!
//! ```text
//! offset 0  magic "OODT"
//! offset 4  u8  channels
//! offset 5  u16 height (big-endian)
//! offset 7  u16 width  (big-endian)
//! offset 9  7 reserved zero bytes
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{ImageTensor, RawImage};
use crate::{IMG_CHANNELS, IMG_SIDE};

pub const OODT_MAGIC: &[u8; 4] = b"OODT";
pub const OODT_HEADER_LEN: usize = 16;

/// Encodes a raw image into the container format.
pub fn encode_oodt(raw: &RawImage) -> Result<Vec<u8>> {
    if raw.channels == 0 || raw.channels > 255 {
        return Err(Error::Format(format!("bad channel count {}", raw.channels)));
    }
    if raw.height > u16::MAX as usize || raw.width > u16::MAX as usize {
        return Err(Error::Format("image too large for container".into()));
    }
    let mut out = Vec::with_capacity(OODT_HEADER_LEN + raw.data.len());
    out.extend_from_slice(OODT_MAGIC);
    out.push(raw.channels as u8);
    out.extend_from_slice(&(raw.height as u16).to_be_bytes());
    out.extend_from_slice(&(raw.width as u16).to_be_bytes());
    out.extend_from_slice(&[0u8; 7]);
    out.extend_from_slice(&raw.data);
    Ok(out)
}

pub fn decode_oodt(bytes: &[u8]) -> Result<RawImage> {
    if bytes.len() < OODT_HEADER_LEN || &bytes[..4] != OODT_MAGIC {
        return Err(Error::Format("not an OODT container".into()));
    }
    let channels = bytes[4] as usize;
    let height = u16::from_be_bytes([bytes[5], bytes[6]]) as usize;
    let width = u16::from_be_bytes([bytes[7], bytes[8]]) as usize;
    let expected = channels * height * width;
    let data = &bytes[OODT_HEADER_LEN..];
    if data.len() != expected {
        return Err(Error::Format(format!(
            "container payload is {} bytes, header implies {}",
            data.len(),
            expected
        )));
    }
    RawImage::new(channels, height, width, data.to_vec())
}

pub fn write_oodt(path: &Path, raw: &RawImage) -> Result<()> {
    fs::write(path, encode_oodt(raw)?).map_err(|e| Error::io(path, e))
}

/// Writes a normalized tensor as a 3x32x32 container.
pub fn write_oodt_tensor(path: &Path, img: &ImageTensor) -> Result<()> {
    let raw = RawImage::new(IMG_CHANNELS, IMG_SIDE, IMG_SIDE, img.pixels().to_vec())?;
    write_oodt(path, &raw)
}

/// Reads an image file, dispatching on magic bytes: `OODT` container,
/// binary PPM (`P6`), or binary PGM (`P5`), all with maxval 255.
pub fn read_image(path: &Path) -> Result<RawImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(OODT_MAGIC) {
        decode_oodt(&bytes)
    } else if bytes.starts_with(b"P6") {
        decode_pnm(&bytes, 3)
    } else if bytes.starts_with(b"P5") {
        decode_pnm(&bytes, 1)
    } else {
        Err(Error::Format(format!(
            "{}: unrecognized image format",
            path.display()
        )))
    }
}

/// Parses binary PGM/PPM. PPM pixel data is interleaved RGB and is converted
/// to channel-plane order here.
fn decode_pnm(bytes: &[u8], channels: usize) -> Result<RawImage> {
    let mut pos = 2; // past the magic
    let mut fields = [0usize; 3]; // width, height, maxval
    for field in fields.iter_mut() {
        *field = read_pnm_int(bytes, &mut pos)?;
    }
    let (width, height, maxval) = (fields[0], fields[1], fields[2]);
    if maxval != 255 {
        return Err(Error::Format(format!("maxval {maxval} unsupported, need 255")));
    }
    // exactly one whitespace byte separates the header from pixel data
    pos += 1;
    let expected = channels * width * height;
    let data = bytes
        .get(pos..pos + expected)
        .ok_or_else(|| Error::Format("truncated PNM pixel data".into()))?;
    let planar = if channels == 1 {
        data.to_vec()
    } else {
        let mut planar = vec![0u8; expected];
        let n = width * height;
        for i in 0..n {
            for c in 0..3 {
                planar[c * n + i] = data[i * 3 + c];
            }
        }
        planar
    };
    RawImage::new(channels, height, width, planar)
}

fn read_pnm_int(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    // skip whitespace and '#' comments
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(_) => break,
            None => return Err(Error::Format("truncated PNM header".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| b.is_ascii_digit()) {
        *pos += 1;
    }
    if *pos == start {
        return Err(Error::Format("expected integer in PNM header".into()));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format("bad integer in PNM header".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oodt_roundtrip() {
        let raw = RawImage::new(3, 4, 5, (0..60).collect()).unwrap();
        let bytes = encode_oodt(&raw).unwrap();
        assert_eq!(bytes.len(), 16 + 60);
        assert_eq!(&bytes[..4], b"OODT");
        let back = decode_oodt(&bytes).unwrap();
        assert_eq!(back.data, raw.data);
        assert_eq!((back.channels, back.height, back.width), (3, 4, 5));
    }

    #[test]
    fn oodt_rejects_length_mismatch() {
        let raw = RawImage::new(1, 2, 2, vec![1, 2, 3, 4]).unwrap();
        let mut bytes = encode_oodt(&raw).unwrap();
        bytes.pop();
        assert!(decode_oodt(&bytes).is_err());
    }

    #[test]
    fn pgm_with_comment_parses() {
        let mut file = b"P5\n# a comment\n3 2\n255\n".to_vec();
        file.extend_from_slice(&[10, 20, 30, 40, 50, 60]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        fs::write(&path, &file).unwrap();
        let raw = read_image(&path).unwrap();
        assert_eq!((raw.channels, raw.height, raw.width), (1, 2, 3));
        assert_eq!(raw.data, vec![10, 20, 30, 40, 50, 60]);
    }

    #[test]
    fn ppm_deinterleaves_to_planes() {
        let mut file = b"P6 2 1 255\n".to_vec();
        file.extend_from_slice(&[1, 2, 3, 4, 5, 6]); // two RGB pixels
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.ppm");
        fs::write(&path, &file).unwrap();
        let raw = read_image(&path).unwrap();
        assert_eq!(raw.data, vec![1, 4, 2, 5, 3, 6]);
    }

    #[test]
    fn ppm_with_wrong_maxval_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.ppm");
        fs::write(&path, b"P6 1 1 65535\n\0\0\0\0\0\0").unwrap();
        assert!(read_image(&path).is_err());
    }
}
