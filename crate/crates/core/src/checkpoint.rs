//! Binary checkpoint: magic `TTFSSNN1`, u32 LE version, u32 LE length plus a
//! TOML network descriptor, then every weight as f64 LE in layer order.

use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{Network, NetworkDescriptor, NetworkSpec};

pub const MAGIC: &[u8; 8] = b"TTFSSNN1";
pub const VERSION: u32 = 1;

pub fn encode_checkpoint(net: &Network) -> Result<Vec<u8>> {
    let descriptor = net
        .spec
        .descriptor()
        .ok_or_else(|| Error::Checkpoint("network was not built from a descriptor".into()))?;
    let text = toml::to_string(descriptor).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut out = Vec::with_capacity(16 + text.len() + 8 * net.spec.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    for w in net.weights.iter().flatten() {
        out.extend_from_slice(&w.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Network> {
    let truncated = |expected: usize| Error::Truncated {
        what: "checkpoint".into(),
        expected: expected as u64,
        actual: bytes.len() as u64,
    };
    if bytes.len() < 16 {
        return Err(truncated(16));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint(format!(
            "foreign magic {:?}",
            String::from_utf8_lossy(&bytes[..8])
        )));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("four bytes"));
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let len = u32::from_le_bytes(bytes[12..16].try_into().expect("four bytes")) as usize;
    let body = 16 + len;
    if bytes.len() < body {
        return Err(truncated(body));
    }
    let text = std::str::from_utf8(&bytes[16..body])
        .map_err(|e| Error::Checkpoint(format!("descriptor is not UTF-8: {e}")))?;
    let descriptor: NetworkDescriptor =
        toml::from_str(text).map_err(|e| Error::Checkpoint(format!("bad descriptor: {e}")))?;
    let spec = descriptor.build()?;
    let expected = body + 8 * spec.param_count();
    if bytes.len() != expected {
        return Err(if bytes.len() < expected {
            truncated(expected)
        } else {
            Error::Checkpoint(format!("{} trailing bytes", bytes.len() - expected))
        });
    }
    let mut values = bytes[body..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")));
    let weights = spec
        .layers
        .iter()
        .map(|l| values.by_ref().take(l.param_count()).collect())
        .collect();
    Network::from_weights(spec, weights).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn checkpoint_save(path: &Path, net: &Network) -> Result<()> {
    std::fs::write(path, encode_checkpoint(net)?).map_err(|e| Error::io(path, e))
}

pub fn checkpoint_load(path: &Path) -> Result<Network> {
    decode_checkpoint(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Loads a checkpoint and requires it to match `spec` layer for layer.
pub fn checkpoint_load_for(path: &Path, spec: &NetworkSpec) -> Result<Network> {
    let net = checkpoint_load(path)?;
    if net.spec.layers != spec.layers || net.spec.model != spec.model {
        return Err(Error::Checkpoint(format!(
            "{} holds a network of a different shape or neuron model",
            path.display()
        )));
    }
    Ok(net)
}
