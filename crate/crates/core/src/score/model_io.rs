//! Binary model files.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `PETSGM\0\x01` |
//! | 4     | manifest length `n` (u32) |
//! | n     | JSON manifest: network config and layer shapes |
//! | 8     | parameter count `p` (u64) |
//! | 4 p   | parameters as f32 |
//! | 32    | SHA-256 of everything above |

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::net::{NetConfig, PatchNet};

pub const MODEL_MAGIC: [u8; 8] = *b"PETSGM\0\x01";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    config: NetConfig,
    /// `[outputs, inputs]` per dense layer; weights row-major, then biases.
    layers: Vec<[usize; 2]>,
}

pub fn write_model(net: &PatchNet) -> Result<Vec<u8>> {
    let manifest = Manifest {
        config: net.config().clone(),
        layers: net.layer_shapes().into_iter().map(|(o, i)| [o, i]).collect(),
    };
    let json = serde_json::to_vec(&manifest)?;
    let mut out = Vec::with_capacity(52 + json.len() + 4 * net.param_count());
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(net.param_count() as u64).to_le_bytes());
    for &p in net.params() {
        out.extend_from_slice(&(p as f32).to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

fn take<'a>(bytes: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::Format("model file truncated".into()));
    }
    let (head, tail) = bytes.split_at(n);
    *bytes = tail;
    Ok(head)
}

pub fn read_model(bytes: &[u8]) -> Result<PatchNet> {
    if bytes.len() < MODEL_MAGIC.len() + 32 {
        return Err(Error::Format("model file truncated".into()));
    }
    let (body, checksum) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != checksum {
        return Err(Error::Format("model checksum mismatch".into()));
    }
    let mut rest = body;
    if take(&mut rest, 8)? != MODEL_MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let len = u32::from_le_bytes(take(&mut rest, 4)?.try_into().unwrap()) as usize;
    let manifest: Manifest = serde_json::from_slice(take(&mut rest, len)?)?;
    let count = u64::from_le_bytes(take(&mut rest, 8)?.try_into().unwrap()) as usize;
    let payload = take(&mut rest, 4 * count)?;
    if !rest.is_empty() {
        return Err(Error::Format("trailing bytes in model file".into()));
    }
    let params = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let net = PatchNet::from_params(manifest.config, params)?;
    let shapes: Vec<[usize; 2]> = net.layer_shapes().into_iter().map(|(o, i)| [o, i]).collect();
    if shapes != manifest.layers {
        return Err(Error::Format("layer manifest disagrees with the network config".into()));
    }
    Ok(net)
}

pub fn save_model(net: &PatchNet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_model(net)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PatchNet> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_model(&bytes)
}
