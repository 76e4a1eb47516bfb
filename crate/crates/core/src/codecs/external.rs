//! Adapter for external compressor commands.
//!
//! A codec is declared as a command template with `{in}`/`{out}` placeholders
//! plus the container header size to exclude from the measurement. The input
//! is handed over in the raw `OODT` container format. Each compression runs
//! the command twice with distinct output files; differing output sizes are
//! reported as a codec error rather than silently producing unstable
//! complexity estimates.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use serde::Deserialize;

use crate::data::formats;
use crate::error::{Error, Result};
use crate::image::{ImageTensor, RawImage};
use crate::{IMG_CHANNELS, IMG_SIDE};

/// Environment variable naming the external codec configuration file.
pub const EXTERNAL_CODECS_ENV: &str = "OOD_EXTERNAL_CODECS";

/// One declared external compressor.
#[derive(Clone, Debug, Deserialize)]
pub struct ExternalCodecSpec {
    pub name: String,
    /// Command template; `{in}` and `{out}` are substituted per invocation.
    pub command: String,
    /// Container header bytes excluded from the measured length.
    #[serde(default)]
    pub header_bytes: u64,
}

#[derive(Debug, Deserialize)]
struct ConfigFile {
    #[serde(default)]
    codec: Vec<ExternalCodecSpec>,
}

/// Declared external codecs, keyed by name. Built-in codec names never come
/// from here; unknown names are rejected at resolution time.
#[derive(Clone, Debug, Default)]
pub struct CodecRegistry {
    codecs: BTreeMap<String, ExternalCodecSpec>,
}

impl CodecRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let parsed: ConfigFile = toml::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("bad codec config: {e}")))?;
        let mut codecs = BTreeMap::new();
        for spec in parsed.codec {
            if spec.name == "png_like" || spec.name == "order0_ac" {
                return Err(Error::InvalidArgument(format!(
                    "codec name `{}` shadows a built-in",
                    spec.name
                )));
            }
            if !spec.command.contains("{in}") || !spec.command.contains("{out}") {
                return Err(Error::InvalidArgument(format!(
                    "codec `{}` command must contain {{in}} and {{out}}",
                    spec.name
                )));
            }
            if codecs.insert(spec.name.clone(), spec.clone()).is_some() {
                return Err(Error::DuplicateId { id: spec.name });
            }
        }
        Ok(Self { codecs })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Loads the registry named by `OOD_EXTERNAL_CODECS`, or an empty one.
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(EXTERNAL_CODECS_ENV) {
            Some(path) => Self::from_path(Path::new(&path)),
            None => Ok(Self::empty()),
        }
    }

    pub fn get(&self, name: &str) -> Option<&ExternalCodecSpec> {
        self.codecs.get(name)
    }
}

/// Runs the external command once; returns the output file's size in bytes.
fn run_once(spec: &ExternalCodecSpec, in_path: &Path, out_path: &Path) -> Result<Vec<u8>> {
    let codec_err = |msg: String| Error::Codec {
        codec: spec.name.clone(),
        msg,
    };
    let tokens: Vec<String> = spec
        .command
        .split_whitespace()
        .map(|t| {
            t.replace("{in}", &in_path.display().to_string())
                .replace("{out}", &out_path.display().to_string())
        })
        .collect();
    let (program, args) = tokens
        .split_first()
        .ok_or_else(|| codec_err("empty command template".into()))?;
    let output = Command::new(program)
        .args(args)
        .output()
        .map_err(|e| codec_err(format!("failed to spawn `{program}`: {e}")))?;
    if !output.status.success() {
        return Err(codec_err(format!(
            "command exited with {}: {}",
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    std::fs::read(out_path).map_err(|e| codec_err(format!("no output file: {e}")))
}

/// Compresses via the external command; the measured payload excludes the
/// declared header bytes.
pub fn compress(img: &ImageTensor, spec: &ExternalCodecSpec) -> Result<Vec<u8>> {
    let codec_err = |msg: String| Error::Codec {
        codec: spec.name.clone(),
        msg,
    };
    let dir = tempfile::Builder::new()
        .prefix("ood-codec-")
        .tempdir()
        .map_err(|e| codec_err(format!("tempdir: {e}")))?;
    let in_path = dir.path().join("input.oodt");
    let raw = RawImage::new(IMG_CHANNELS, IMG_SIDE, IMG_SIDE, img.pixels().to_vec())?;
    formats::write_oodt(&in_path, &raw)?;

    let first = run_once(spec, &in_path, &dir.path().join("out-a"))?;
    let second = run_once(spec, &in_path, &dir.path().join("out-b"))?;
    if first.len() != second.len() {
        return Err(codec_err(format!(
            "nondeterministic output size: {} vs {} bytes",
            first.len(),
            second.len()
        )));
    }
    let header = spec.header_bytes as usize;
    if first.len() < header {
        return Err(codec_err(format!(
            "output ({} bytes) smaller than declared header ({header} bytes)",
            first.len()
        )));
    }
    if first.len() == header {
        return Err(codec_err("output contains only the header".into()));
    }
    Ok(first[header..].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::IMG_DIM;
    use std::os::unix::fs::PermissionsExt;

    fn write_script(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.join(name);
        std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
        let mut perms = std::fs::metadata(&path).unwrap().permissions();
        perms.set_mode(0o755);
        std::fs::set_permissions(&path, perms).unwrap();
        path
    }

    #[test]
    fn identity_copy_yields_exactly_eight_bpd() {
        let dir = tempfile::tempdir().unwrap();
        let script = write_script(dir.path(), "copy.sh", "cp \"$1\" \"$2\"");
        let spec = ExternalCodecSpec {
            name: "copy".into(),
            command: format!("{} {{in}} {{out}}", script.display()),
            header_bytes: formats::OODT_HEADER_LEN as u64,
        };
        let img = crate::data::synth_noise(1, 5).unwrap().images()[0].clone();
        let payload = compress(&img, &spec).unwrap();
        assert_eq!(payload.len(), IMG_DIM);
        assert_eq!(payload, img.pixels());
    }

    #[test]
    fn nondeterministic_size_is_a_codec_error() {
        let dir = tempfile::tempdir().unwrap();
        // appends one byte to a counter file per call, then emits it
        let counter = dir.path().join("counter");
        std::fs::write(&counter, b"x").unwrap();
        let script = write_script(
            dir.path(),
            "grow.sh",
            &format!(
                "printf x >> {c}\ncp {c} \"$2\"",
                c = counter.display()
            ),
        );
        let spec = ExternalCodecSpec {
            name: "grow".into(),
            command: format!("{} {{in}} {{out}}", script.display()),
            header_bytes: 0,
        };
        let img = crate::data::synth_noise(1, 5).unwrap().images()[0].clone();
        match compress(&img, &spec) {
            Err(Error::Codec { codec, msg }) => {
                assert_eq!(codec, "grow");
                assert!(msg.contains("nondeterministic"));
            }
            other => panic!("expected codec error, got {other:?}"),
        }
    }

    #[test]
    fn failing_command_is_a_codec_error() {
        let spec = ExternalCodecSpec {
            name: "boom".into(),
            command: "/bin/false {in} {out}".into(),
            header_bytes: 0,
        };
        let img = ImageTensor::constant([1, 2, 3]);
        assert!(matches!(compress(&img, &spec), Err(Error::Codec { .. })));
    }

    #[test]
    fn registry_parses_and_validates() {
        let registry = CodecRegistry::from_toml_str(
            r#"
            [[codec]]
            name = "flif"
            command = "flif -e {in} {out}"
            header_bytes = 16
            "#,
        )
        .unwrap();
        assert_eq!(registry.get("flif").unwrap().header_bytes, 16);
        assert!(registry.get("png_like").is_none());

        assert!(CodecRegistry::from_toml_str(
            "[[codec]]\nname = \"png_like\"\ncommand = \"x {in} {out}\"\n"
        )
        .is_err());
        assert!(CodecRegistry::from_toml_str(
            "[[codec]]\nname = \"a\"\ncommand = \"x {in}\"\n"
        )
        .is_err());
    }
}
