//! Versioned binary container for trained models.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"AGROML" | version: u8 | body_len: u32 | body: JSON | crc32: u32
//! ```
//!
//! The body is `{"kind": ..., "payload": ...}`; the CRC covers every byte
//! before it.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: &[u8; 6] = b"AGROML";
pub const FORMAT_VERSION: u8 = 1;

const HEADER_LEN: usize = MAGIC.len() + 1 + 4;
const TRAILER_LEN: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArtifactError {
    #[error("not a model artifact (bad magic)")]
    BadMagic,
    #[error("unsupported artifact format version {0}")]
    VersionUnsupported(u8),
    #[error("corrupt artifact: {0}")]
    Corrupt(String),
    #[error("artifact holds a `{found}`, expected a `{expected}`")]
    WrongKind { expected: String, found: String },
    #[error("artifact payload does not decode: {0}")]
    Payload(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Serialize)]
struct EnvelopeRef<'a, T> {
    kind: &'a str,
    payload: &'a T,
}

#[derive(Deserialize)]
struct Envelope {
    kind: String,
    payload: serde_json::Value,
}

pub fn encode<T: Serialize>(kind: &str, payload: &T) -> Vec<u8> {
    let body =
        serde_json::to_vec(&EnvelopeRef { kind, payload }).expect("model payloads serialize");
    let mut out = Vec::with_capacity(HEADER_LEN + body.len() + TRAILER_LEN);
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.extend_from_slice(&body);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn decode<T: DeserializeOwned>(bytes: &[u8], expected_kind: &str) -> Result<T, ArtifactError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(if bytes.len() < MAGIC.len() && MAGIC.starts_with(bytes) {
            ArtifactError::Corrupt("truncated before header".into())
        } else {
            ArtifactError::BadMagic
        });
    }
    let version = *bytes
        .get(MAGIC.len())
        .ok_or_else(|| ArtifactError::Corrupt("truncated before version".into()))?;
    if version != FORMAT_VERSION {
        return Err(ArtifactError::VersionUnsupported(version));
    }
    if bytes.len() < HEADER_LEN + TRAILER_LEN {
        return Err(ArtifactError::Corrupt("truncated header".into()));
    }
    let len_bytes: [u8; 4] = bytes[MAGIC.len() + 1..HEADER_LEN].try_into().unwrap();
    let body_len = u32::from_le_bytes(len_bytes) as usize;
    let expected_total = HEADER_LEN + body_len + TRAILER_LEN;
    if bytes.len() != expected_total {
        return Err(ArtifactError::Corrupt(format!(
            "length {} does not match declared {}",
            bytes.len(),
            expected_total
        )));
    }
    let (content, trailer) = bytes.split_at(HEADER_LEN + body_len);
    let stored = u32::from_le_bytes(trailer.try_into().unwrap());
    if crc32fast::hash(content) != stored {
        return Err(ArtifactError::Corrupt("checksum mismatch".into()));
    }
    let envelope: Envelope = serde_json::from_slice(&content[HEADER_LEN..])
        .map_err(|e| ArtifactError::Corrupt(e.to_string()))?;
    if envelope.kind != expected_kind {
        return Err(ArtifactError::WrongKind {
            expected: expected_kind.into(),
            found: envelope.kind,
        });
    }
    serde_json::from_value(envelope.payload).map_err(|e| ArtifactError::Payload(e.to_string()))
}

pub fn write_file(path: impl AsRef<Path>, bytes: &[u8]) -> Result<(), ArtifactError> {
    let path = path.as_ref();
    std::fs::write(path, bytes).map_err(|e| ArtifactError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn read_file(path: impl AsRef<Path>) -> Result<Vec<u8>, ArtifactError> {
    let path = path.as_ref();
    std::fs::read(path).map_err(|e| ArtifactError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<u8> {
        encode("thing", &vec![1.5f64, -0.1, 1e-300])
    }

    #[test]
    fn round_trip() {
        let v: Vec<f64> = decode(&sample(), "thing").unwrap();
        assert_eq!(v, vec![1.5, -0.1, 1e-300]);
    }

    #[test]
    fn flipped_version_byte() {
        let mut b = sample();
        b[6] ^= 0xFF;
        assert_eq!(
            decode::<Vec<f64>>(&b, "thing"),
            Err(ArtifactError::VersionUnsupported(FORMAT_VERSION ^ 0xFF))
        );
    }

    #[test]
    fn truncation_is_corrupt() {
        let b = sample();
        for cut in [3, 7, 12, b.len() / 2, b.len() - 1] {
            assert!(
                matches!(
                    decode::<Vec<f64>>(&b[..cut], "thing"),
                    Err(ArtifactError::Corrupt(_))
                ),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn body_bit_flip_fails_checksum() {
        let mut b = sample();
        let mid = HEADER_LEN + 3;
        b[mid] ^= 0x01;
        assert_eq!(
            decode::<Vec<f64>>(&b, "thing"),
            Err(ArtifactError::Corrupt("checksum mismatch".into()))
        );
    }

    #[test]
    fn wrong_kind_and_magic() {
        assert!(matches!(
            decode::<Vec<f64>>(&sample(), "other"),
            Err(ArtifactError::WrongKind { .. })
        ));
        assert_eq!(
            decode::<Vec<f64>>(b"PNG....", "x"),
            Err(ArtifactError::BadMagic)
        );
    }
}
