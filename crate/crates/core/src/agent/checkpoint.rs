//! Binary checkpoint format, little-endian:
//!
//! ```text
//! magic   b"POLQNET\0"
//! version u32 (= 1)
//! n       u32            number of layers
//! sizes   (n + 1) x u32  layer widths, input first
//! params  f64 ...        per layer: weights (input-major), then biases
//! ```

use std::path::Path;

use super::network::{Dense, QNetwork};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"POLQNET\0";
const VERSION: u32 = 1;
const MAX_WIDTH: usize = 1 << 16;
const MAX_PARAMS: usize = 1 << 24;

pub fn encode_checkpoint(net: &QNetwork) -> Vec<u8> {
    let sizes = net.sizes();
    let mut out = Vec::with_capacity(16 + 4 * sizes.len() + 8 * net.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for s in sizes {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    for p in net.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Format(format!("checkpoint truncated at byte {}", self.pos))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<QNetwork> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Format("not a Q-network checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let n = r.u32()? as usize;
    if n == 0 || n > 64 {
        return Err(Error::Format(format!("implausible layer count {n}")));
    }
    let sizes = (0..=n).map(|_| r.u32().map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
    if sizes.iter().any(|&s| s == 0 || s > MAX_WIDTH) {
        return Err(Error::Format(format!("implausible layer sizes {sizes:?}")));
    }
    let total: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    if total > MAX_PARAMS || bytes.len() - r.pos != total * 8 {
        return Err(Error::Format(format!(
            "expected {total} parameters, found {} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    let mut layers = Vec::with_capacity(n);
    for w in sizes.windows(2) {
        let weights = (0..w[0] * w[1]).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let bias = (0..w[1]).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        layers.push(Dense { inputs: w[0], outputs: w[1], weights, bias });
    }
    QNetwork::from_layers(layers).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_checkpoint(net: &QNetwork, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(net)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<QNetwork> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}
