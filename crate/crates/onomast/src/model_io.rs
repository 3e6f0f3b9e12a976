//! Single-file model container: preprocessing config, architecture,
//! labels, vocabulary, and weights, ending in a CRC-32.
//!
//! Layout (bit-exact, fixed little-endian):
//!
//! ```text
//! "NMC1" | version: u32 | header length: u64 | UTF-8 JSON header
//!        | tensor payloads (f32, header-declared order) | CRC-32: u32
//! ```
//!
//! The checksum covers every preceding byte, so flipping any single byte of
//! the payload (or header) is detected at load. Weights train in f64 but are
//! stored as f32; a save/load roundtrip therefore reproduces inference only
//! to f32 quantization, which keeps per-probability drift under 1e-6 on
//! practical models. One file holds vocabulary and weights together so the
//! two can never version-skew. Everything is written to a sibling temp file
//! and renamed into place, and identical inputs produce byte-identical
//! files.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::LabelSet;
use crate::error::{Error, Result};
use crate::nn::{ModelConfig, ModelParams};
use crate::textprep::{PrepConfig, Vocabulary};

const MAGIC: &[u8; 4] = b"NMC1";
const VERSION: u32 = 1;

/// A complete predictor: everything needed to score raw names.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelContainer {
    pub prep: PrepConfig,
    pub model: ModelConfig,
    pub labels: LabelSet,
    pub vocabulary: Vocabulary,
    pub params: ModelParams,
}

#[derive(Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    shape: Vec<usize>,
}

/// The JSON header. Padding and truncation sides are fixed decisions of
/// this pipeline ("pre"/"pre": pad in front, keep the trailing tokens) but
/// are recorded explicitly so the file describes itself.
#[derive(Serialize, Deserialize)]
struct Header {
    prep: PrepConfig,
    padding: String,
    truncation: String,
    model: ModelConfig,
    labels: Vec<String>,
    vocab_tokens: Vec<String>,
    tensors: Vec<TensorMeta>,
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedModel {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl ModelContainer {
    /// Cross-field consistency: shapes, label count, vocabulary size, and
    /// window agreement between the prep and model configs.
    pub fn validate(&self) -> Result<()> {
        self.prep.validate()?;
        self.model.validate()?;
        if self.labels.len() != self.model.n_classes {
            return Err(Error::InvalidConfig(format!(
                "label set has {} labels but the model expects {} classes",
                self.labels.len(),
                self.model.n_classes
            )));
        }
        if self.vocabulary.index_space() != self.model.vocab_size {
            return Err(Error::InvalidConfig(format!(
                "vocabulary index space {} does not match model vocab_size {}",
                self.vocabulary.index_space(),
                self.model.vocab_size
            )));
        }
        if self.prep.window != self.model.window {
            return Err(Error::InvalidConfig(format!(
                "prep window {} does not match model window {}",
                self.prep.window, self.model.window
            )));
        }
        for (name, tensor) in self.params.tensors() {
            let expected: usize = ModelParams::tensor_shapes(&self.model)
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, shape)| shape.iter().product())
                .unwrap_or(0);
            if tensor.len() != expected {
                return Err(Error::InvalidConfig(format!(
                    "tensor {name} has {} entries, expected {expected}",
                    tensor.len()
                )));
            }
        }
        Ok(())
    }
}

/// Serialize the container to `path`, atomically (sibling temp file +
/// rename). Identical containers produce byte-identical files.
pub fn save(container: &ModelContainer, path: &Path) -> Result<()> {
    container.validate()?;

    let header = Header {
        prep: container.prep.clone(),
        padding: "pre".into(),
        truncation: "pre".into(),
        model: container.model.clone(),
        labels: container.labels.labels().to_vec(),
        vocab_tokens: container.vocabulary.tokens().to_vec(),
        tensors: ModelParams::tensor_shapes(&container.model)
            .into_iter()
            .map(|(name, shape)| TensorMeta {
                name: name.to_string(),
                shape,
            })
            .collect(),
    };
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| malformed(path, format!("header serialization failed: {e}")))?;

    let payload_len: usize = container.params.tensors().iter().map(|(_, t)| t.len() * 4).sum();
    let mut bytes = Vec::with_capacity(4 + 4 + 8 + header_json.len() + payload_len + 4);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&header_json);
    for (_, tensor) in container.params.tensors() {
        for &v in tensor {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let mut hasher = crc32fast::Hasher::new();
    hasher.update(&bytes);
    bytes.extend_from_slice(&hasher.finalize().to_le_bytes());

    let file_name = path
        .file_name()
        .ok_or_else(|| malformed(path, "path has no file name"))?;
    let tmp = path.with_file_name(format!("{}.tmp", file_name.to_string_lossy()));
    let mut f = std::fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(&bytes).map_err(|e| io_err(&tmp, e))?;
    f.sync_all().map_err(|e| io_err(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))?;
    Ok(())
}

fn take<'a>(bytes: &'a [u8], offset: &mut usize, n: usize, path: &Path, what: &str) -> Result<&'a [u8]> {
    let end = offset
        .checked_add(n)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| malformed(path, format!("truncated before {what}")))?;
    let slice = &bytes[*offset..end];
    *offset = end;
    Ok(slice)
}

/// Read a container back. The version field is checked before the body is
/// parsed, the checksum before anything is trusted, and every tensor shape
/// against the architecture it claims.
pub fn load(path: &Path) -> Result<ModelContainer> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;

    let mut offset = 0usize;
    let magic = take(&bytes, &mut offset, 4, path, "magic bytes")?;
    if magic != MAGIC {
        return Err(malformed(path, format!("bad magic bytes {magic:?}")));
    }
    let version = u32::from_le_bytes(take(&bytes, &mut offset, 4, path, "version")?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            found: version,
            supported: VERSION,
        });
    }

    // checksum next: nothing beyond the version gate is parsed before the
    // bytes prove intact
    if bytes.len() < offset + 8 + 4 {
        return Err(malformed(path, "truncated before header length"));
    }
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    let mut hasher = crc32fast::Hasher::new();
    hasher.update(&bytes[..bytes.len() - 4]);
    let computed = hasher.finalize();
    if stored != computed {
        return Err(Error::ChecksumMismatch {
            path: path.to_path_buf(),
            stored,
            computed,
        });
    }
    let body = &bytes[..bytes.len() - 4];

    let header_len =
        u64::from_le_bytes(take(body, &mut offset, 8, path, "header length")?.try_into().unwrap());
    let header_len = usize::try_from(header_len)
        .map_err(|_| malformed(path, "header length does not fit in memory"))?;
    let header_bytes = take(body, &mut offset, header_len, path, "header")?;
    let header: Header = serde_json::from_slice(header_bytes)
        .map_err(|e| malformed(path, format!("header is not valid JSON: {e}")))?;

    // the header must declare exactly the tensors the architecture implies
    let expected = ModelParams::tensor_shapes(&header.model);
    if header.tensors.len() != expected.len() {
        return Err(malformed(
            path,
            format!("header declares {} tensors, expected {}", header.tensors.len(), expected.len()),
        ));
    }
    for (meta, (name, shape)) in header.tensors.iter().zip(&expected) {
        if meta.name != *name || meta.shape != *shape {
            return Err(malformed(
                path,
                format!(
                    "tensor {} has shape {:?}, expected {} with shape {:?}",
                    meta.name, meta.shape, name, shape
                ),
            ));
        }
    }
    if header.padding != "pre" || header.truncation != "pre" {
        return Err(malformed(
            path,
            format!(
                "padding/truncation sides {:?}/{:?} are not supported (this pipeline uses pre/pre)",
                header.padding, header.truncation
            ),
        ));
    }
    if header.labels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(malformed(path, "label list is not sorted and distinct"));
    }
    let mut seen = std::collections::HashSet::new();
    if header.vocab_tokens.iter().any(|t| !seen.insert(t)) {
        return Err(malformed(path, "vocabulary contains duplicate tokens"));
    }

    let mut params = ModelParams::zeros(&header.model);
    for ((_, shape), (_, tensor)) in expected.iter().zip(params.tensors_mut()) {
        let n: usize = shape.iter().product();
        let raw = take(body, &mut offset, n * 4, path, "tensor payload")?;
        for (v, chunk) in tensor.iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
        }
    }
    if offset != body.len() {
        return Err(malformed(
            path,
            format!("{} unexpected trailing bytes", body.len() - offset),
        ));
    }

    let container = ModelContainer {
        prep: header.prep,
        model: header.model,
        labels: LabelSet::from_labels(header.labels),
        vocabulary: Vocabulary::from_tokens(header.vocab_tokens),
        params,
    };
    container.validate()?;
    Ok(container)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{self, predict_proba};
    use crate::rng;
    use rand::RngExt;

    fn toy_container() -> ModelContainer {
        let prep = PrepConfig {
            mode: crate::textprep::NameMode::LastOnly,
            window: 6,
            min_count: 3,
            max_doc_fraction: 0.30,
        };
        let vocabulary =
            Vocabulary::from_tokens(vec!["ab".into(), "bc".into(), "cd".into(), "de".into()]);
        let model = ModelConfig {
            vocab_size: vocabulary.index_space(),
            embed_dim: 4,
            hidden_dim: 5,
            n_classes: 2,
            dropout: 0.2,
            recurrent_dropout: 0.2,
            window: 6,
        };
        let params = nn::init_params(&model, 33).unwrap();
        ModelContainer {
            prep,
            model,
            labels: LabelSet::from_labels(["asian", "white"]),
            vocabulary,
            params,
        }
    }

    #[test]
    fn roundtrip_preserves_everything_to_f32() {
        let container = toy_container();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.nmc");
        save(&container, &path).unwrap();
        let loaded = load(&path).unwrap();

        assert_eq!(loaded.prep, container.prep);
        assert_eq!(loaded.model, container.model);
        assert_eq!(loaded.labels, container.labels);
        assert_eq!(loaded.vocabulary, container.vocabulary);
        for ((_, a), (_, b)) in container.params.tensors().iter().zip(loaded.params.tensors()) {
            for (x, y) in a.iter().zip(b.iter()) {
                // one f32 quantization step at most
                assert!((x - y).abs() <= (*x as f32).abs() as f64 * f32::EPSILON as f64 + 1e-9);
            }
        }
    }

    #[test]
    fn saves_are_byte_identical() {
        let container = toy_container();
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.nmc");
        let b = dir.path().join("b.nmc");
        save(&container, &a).unwrap();
        save(&container, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn inference_agrees_before_and_after_roundtrip() {
        let container = toy_container();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.nmc");
        save(&container, &path).unwrap();
        let loaded = load(&path).unwrap();

        let mut rng = rng::seeded(5);
        let records: Vec<Vec<usize>> = (0..200)
            .map(|_| (0..6).map(|_| rng.random_range(0..container.model.vocab_size)).collect())
            .collect();
        let before = predict_proba(&records, &container.params, &container.model).unwrap();
        let after = predict_proba(&records, &loaded.params, &loaded.model).unwrap();
        for (pa, pb) in before.iter().zip(&after) {
            for (a, b) in pa.iter().zip(pb) {
                assert!((a - b).abs() < 1e-6, "probabilities drifted: {a} vs {b}");
            }
        }
    }

    #[test]
    fn any_single_payload_byte_flip_is_detected() {
        let container = toy_container();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.nmc");
        save(&container, &path).unwrap();
        let original = std::fs::read(&path).unwrap();

        // payload starts after magic+version+header_len+header
        let header_len =
            u64::from_le_bytes(original[8..16].try_into().unwrap()) as usize;
        let payload_start = 16 + header_len;
        let payload_end = original.len() - 4;
        let tampered_path = dir.path().join("tampered.nmc");
        for pos in payload_start..payload_end {
            let mut bytes = original.clone();
            bytes[pos] ^= 0x01;
            std::fs::write(&tampered_path, &bytes).unwrap();
            match load(&tampered_path) {
                Err(Error::ChecksumMismatch { .. }) => {}
                other => panic!("flip at byte {pos} not caught: {other:?}"),
            }
        }
    }

    #[test]
    fn truncation_and_bad_magic_give_structured_errors() {
        let container = toy_container();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.nmc");
        save(&container, &path).unwrap();
        let original = std::fs::read(&path).unwrap();

        let cut = dir.path().join("cut.nmc");
        for keep in [0, 3, 7, 12, 40, original.len() - 5] {
            std::fs::write(&cut, &original[..keep]).unwrap();
            match load(&cut) {
                Err(Error::MalformedModel { .. }) | Err(Error::ChecksumMismatch { .. }) => {}
                other => panic!("truncation to {keep} bytes not caught: {other:?}"),
            }
        }

        let mut wrong_magic = original.clone();
        wrong_magic[..4].copy_from_slice(b"ZZZZ");
        std::fs::write(&cut, &wrong_magic).unwrap();
        match load(&cut) {
            Err(Error::MalformedModel { reason, .. }) => assert!(reason.contains("magic")),
            other => panic!("bad magic not caught: {other:?}"),
        }
    }

    #[test]
    fn future_version_names_both_versions() {
        let container = toy_container();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.nmc");
        save(&container, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4..8].copy_from_slice(&2u32.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        match load(&path) {
            Err(Error::UnsupportedVersion { found, supported, .. }) => {
                assert_eq!(found, 2);
                assert_eq!(supported, 1);
            }
            other => panic!("expected UnsupportedVersion, got {other:?}"),
        }
    }

    #[test]
    fn header_shape_lies_are_rejected() {
        // rewrite the header with a wrong lstm_u shape, fix lengths and CRC,
        // and confirm the shape gate still rejects the file
        let container = toy_container();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.nmc");
        save(&container, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let header_text = std::str::from_utf8(&bytes[16..16 + header_len]).unwrap();
        let patched = header_text.replace("\"lstm_u\",\"shape\":[5,20]", "\"lstm_u\",\"shape\":[5,21]");
        assert_ne!(patched, header_text, "test fixture must actually patch");

        let mut rebuilt = Vec::new();
        rebuilt.extend_from_slice(&bytes[..8]);
        rebuilt.extend_from_slice(&(patched.len() as u64).to_le_bytes());
        rebuilt.extend_from_slice(patched.as_bytes());
        rebuilt.extend_from_slice(&bytes[16 + header_len..bytes.len() - 4]);
        let mut hasher = crc32fast::Hasher::new();
        hasher.update(&rebuilt);
        let crc = hasher.finalize();
        rebuilt.extend_from_slice(&crc.to_le_bytes());
        std::fs::write(&path, &rebuilt).unwrap();
        match load(&path) {
            Err(Error::MalformedModel { reason, .. }) => {
                assert!(reason.contains("lstm_u"), "{reason}")
            }
            other => panic!("expected MalformedModel, got {other:?}"),
        }
    }

    #[test]
    fn save_rejects_inconsistent_containers() {
        let mut container = toy_container();
        container.model.n_classes = 3; // labels still 2
        let dir = tempfile::tempdir().unwrap();
        let err = save(&container, &dir.path().join("x.nmc"));
        assert!(matches!(err, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn unwritable_path_reports_io_error() {
        let container = toy_container();
        let err = save(&container, Path::new("/nonexistent-dir/model.nmc"));
        assert!(matches!(err, Err(Error::Io { .. })));
    }
}
