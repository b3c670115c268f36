//! Binary artifacts: a magic tag, a JSON header and little-endian `f64` arrays.
//!
//! Layout: `RNLB` + format byte + 3 zero bytes, `u32` header length, the
//! header JSON, then the arrays back to back in header order. The header
//! records the SHA-256 of the array payload so truncated or edited files are
//! rejected on load.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

const MAGIC: [u8; 8] = *b"RNLB\x01\0\0\0";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArrayInfo {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Header {
    pub kind: String,
    pub version: String,
    pub meta: serde_json::Value,
    pub arrays: Vec<ArrayInfo>,
    pub sha256: String,
}

#[derive(Debug, Clone)]
pub struct Artifact {
    pub header: Header,
    pub arrays: Vec<Vec<f64>>,
}

impl Artifact {
    pub fn array(&self, name: &str) -> Option<&[f64]> {
        self.header
            .arrays
            .iter()
            .position(|a| a.name == name)
            .map(|i| self.arrays[i].as_slice())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_artifact(
    path: &Path,
    kind: &str,
    meta: serde_json::Value,
    arrays: &[(&str, &[f64])],
) -> Result<()> {
    let mut payload = Vec::with_capacity(arrays.iter().map(|(_, a)| a.len() * 8).sum());
    for (_, a) in arrays {
        for v in a.iter() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let header = Header {
        kind: kind.to_string(),
        version: crate::VERSION.to_string(),
        meta,
        arrays: arrays
            .iter()
            .map(|(n, a)| ArrayInfo { name: n.to_string(), len: a.len() })
            .collect(),
        sha256: sha256_hex(&payload),
    };
    let json = serde_json::to_vec(&header)?;
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    file.write_all(&MAGIC)?;
    file.write_all(&(json.len() as u32).to_le_bytes())?;
    file.write_all(&json)?;
    file.write_all(&payload)?;
    file.flush()?;
    Ok(())
}

pub fn read_artifact(path: &Path, kind: &str) -> Result<Artifact> {
    let bad = |reason: &str| Error::Artifact { path: path.to_path_buf(), reason: reason.to_string() };
    let bytes = fs::read(path)?;
    if bytes.len() < 12 || bytes[..8] != MAGIC {
        return Err(bad("not a renewlab artifact"));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = bytes.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(body)?;
    if header.kind != kind {
        return Err(bad(&format!("expected a `{kind}` artifact, found `{}`", header.kind)));
    }
    let payload = &bytes[12 + hlen..];
    let total: usize = header.arrays.iter().map(|a| a.len).sum();
    if payload.len() != total * 8 {
        return Err(bad("payload length does not match header"));
    }
    if sha256_hex(payload) != header.sha256 {
        return Err(bad("checksum mismatch"));
    }
    let mut arrays = Vec::with_capacity(header.arrays.len());
    let mut off = 0;
    for info in &header.arrays {
        let v = payload[off..off + info.len * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        off += info.len * 8;
        arrays.push(v);
    }
    Ok(Artifact { header, arrays })
}
