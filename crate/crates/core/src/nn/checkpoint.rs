//! Binary checkpoint container.
//!
//! ```text
//! "UWSH" | version u16 | config_len u32 | config (UTF-8)
//!   { name_len u16 | name (UTF-8) | rank u8 | dims u32 × rank | f32 × Π dims }*
//! crc32 u32   (over every preceding byte)
//! ```
//!
//! All integers and floats are little-endian. Values are stored as 32-bit
//! floats and widened to 64-bit on load.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::Tensor;

pub const MAGIC: [u8; 4] = *b"UWSH";
pub const VERSION: u16 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum CheckpointError {
    #[error("bad magic bytes {0:?}, expected \"UWSH\"")]
    BadMagic([u8; 4]),
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("truncated checkpoint: {0}")]
    Truncated(String),
    #[error("crc mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointData {
    pub config: String,
    pub tensors: Vec<(String, Tensor)>,
}

/// Bit accounting of a serialized checkpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SizeReport {
    /// Scalars stored across all tensor blocks.
    pub stored_values: usize,
    /// `32 × stored_values`.
    pub payload_bits: usize,
    /// Magic, version, config text, block headers and CRC.
    pub overhead_bits: usize,
    pub total_bits: usize,
}

impl SizeReport {
    pub fn kbits(&self) -> f64 {
        self.total_bits as f64 / 1000.0
    }
}

pub fn encode(config: &str, tensors: &[(String, &Tensor)]) -> Result<Vec<u8>, CheckpointError> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let cfg_len = u32::try_from(config.len())
        .map_err(|_| CheckpointError::Malformed("config text too long".into()))?;
    out.extend_from_slice(&cfg_len.to_le_bytes());
    out.extend_from_slice(config.as_bytes());
    for (name, t) in tensors {
        let name_len = u16::try_from(name.len())
            .map_err(|_| CheckpointError::Malformed(format!("tensor name too long: {name}")))?;
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.rank() as u8);
        for &d in t.shape() {
            let d = u32::try_from(d)
                .map_err(|_| CheckpointError::Malformed(format!("dimension {d} too large")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        if self.buf.len() - self.pos < n {
            return Err(CheckpointError::Truncated(format!(
                "{what} needs {n} bytes at offset {}, {} remain",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn utf8(bytes: &[u8], what: &str) -> Result<String, CheckpointError> {
    String::from_utf8(bytes.to_vec())
        .map_err(|_| CheckpointError::Malformed(format!("{what} is not valid UTF-8")))
}

pub fn decode(bytes: &[u8]) -> Result<CheckpointData, CheckpointError> {
    if bytes.len() < 4 {
        return Err(CheckpointError::Truncated("file shorter than magic".into()));
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    if bytes.len() < 4 + 2 + 4 + 4 {
        return Err(CheckpointError::Truncated("header incomplete".into()));
    }
    let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let mut r = Reader { buf: body, pos: 4 };
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let cfg_len = r.u32("config length")? as usize;
    let config = utf8(r.take(cfg_len, "config text")?, "config text")?;
    let mut tensors = Vec::new();
    while !r.done() {
        let name_len = r.u16("tensor name length")? as usize;
        let name = utf8(r.take(name_len, "tensor name")?, "tensor name")?;
        let rank = r.take(1, "tensor rank")?[0] as usize;
        if rank > 3 {
            return Err(CheckpointError::Malformed(format!("tensor {name} has rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("tensor dimension")? as usize);
        }
        let n: usize = shape.iter().product();
        let payload = r.take(n * 4, &format!("payload of tensor {name}"))?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        let t = Tensor::from_vec(&shape, data)
            .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        tensors.push((name, t));
    }
    let stored = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(CheckpointError::CrcMismatch { stored, computed });
    }
    Ok(CheckpointData { config, tensors })
}

/// Bit accounting for a file with this config text and these tensors.
pub fn size_report(config: &str, tensors: &[(String, &Tensor)]) -> SizeReport {
    let stored_values: usize = tensors.iter().map(|(_, t)| t.len()).sum();
    let header = 4 + 2 + 4 + config.len() + 4;
    let blocks: usize = tensors
        .iter()
        .map(|(n, t)| 2 + n.len() + 1 + 4 * t.rank())
        .sum();
    let payload_bits = 32 * stored_values;
    let overhead_bits = 8 * (header + blocks);
    SizeReport {
        stored_values,
        payload_bits,
        overhead_bits,
        total_bits: payload_bits + overhead_bits,
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CheckpointError> {
    fs::write(path, bytes).map_err(|e| CheckpointError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, CheckpointError> {
    fs::read(path).map_err(|e| CheckpointError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
