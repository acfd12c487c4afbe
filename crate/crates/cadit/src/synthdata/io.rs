//! Binary dataset format, little-endian, bit-exact round-trip.
//!
//! Layout:
//! - magic `b"CADD"`, version `u32` (currently 1)
//! - kind `u8` (0 gaussian, 1 glyph), class count `u32`, seed `u64`
//! - source tensor: rank `u32`, dims `u32 * rank`, values `f64`
//! - source labels: count `u32`, labels `u16`
//! - target tensor and labels in the same encoding.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::autodiff::Tensor;

use super::{DatasetKind, DomainPair, HiddenDomain, LabeledDomain};

const MAGIC: &[u8; 4] = b"CADD";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetIoError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a dataset file (bad magic)")]
    BadMagic,
    #[error("unsupported dataset version {0}")]
    BadVersion(u32),
    #[error("corrupt dataset: {0}")]
    Corrupt(String),
}

pub fn save_dataset(path: &Path, pair: &DomainPair) -> Result<(), DatasetIoError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[match pair.kind {
        DatasetKind::Gaussian => 0u8,
        DatasetKind::Glyph => 1u8,
    }])?;
    w.write_all(&(pair.classes as u32).to_le_bytes())?;
    w.write_all(&pair.seed.to_le_bytes())?;
    write_tensor(&mut w, &pair.source.samples)?;
    write_labels(&mut w, &pair.source.labels)?;
    write_tensor(&mut w, &pair.target.samples)?;
    write_labels(&mut w, pair.target.reveal_labels_for_io())?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<DomainPair, DatasetIoError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(DatasetIoError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(DatasetIoError::BadVersion(version));
    }
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind)?;
    let kind = match kind[0] {
        0 => DatasetKind::Gaussian,
        1 => DatasetKind::Glyph,
        k => return Err(DatasetIoError::Corrupt(format!("unknown kind {k}"))),
    };
    let classes = read_u32(&mut r)? as usize;
    let mut seed = [0u8; 8];
    r.read_exact(&mut seed)?;
    let seed = u64::from_le_bytes(seed);
    let src_samples = read_tensor(&mut r)?;
    let src_labels = read_labels(&mut r)?;
    let tgt_samples = read_tensor(&mut r)?;
    let tgt_labels = read_labels(&mut r)?;
    Ok(DomainPair {
        kind,
        classes,
        seed,
        source: LabeledDomain { samples: src_samples, labels: src_labels },
        target: HiddenDomain::new(tgt_samples, tgt_labels),
    })
}

impl HiddenDomain {
    /// Serialization needs the raw labels without counting as an
    /// evaluation read; confined to this module.
    fn reveal_labels_for_io(&self) -> &[u16] {
        &self.hidden_labels
    }
}

fn write_tensor(w: &mut impl Write, t: &Tensor) -> Result<(), DatasetIoError> {
    w.write_all(&(t.rank() as u32).to_le_bytes())?;
    for &d in t.shape() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for &v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_tensor(r: &mut impl Read) -> Result<Tensor, DatasetIoError> {
    let rank = read_u32(r)? as usize;
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(read_u32(r)? as usize);
    }
    let numel: usize = shape.iter().product();
    let mut data = Vec::with_capacity(numel);
    let mut buf = [0u8; 8];
    for _ in 0..numel {
        r.read_exact(&mut buf)?;
        data.push(f64::from_le_bytes(buf));
    }
    Tensor::from_vec(&shape, data).map_err(|e| DatasetIoError::Corrupt(e.to_string()))
}

fn write_labels(w: &mut impl Write, labels: &[u16]) -> Result<(), DatasetIoError> {
    w.write_all(&(labels.len() as u32).to_le_bytes())?;
    for &l in labels {
        w.write_all(&l.to_le_bytes())?;
    }
    Ok(())
}

fn read_labels(r: &mut impl Read) -> Result<Vec<u16>, DatasetIoError> {
    let count = read_u32(r)? as usize;
    let mut labels = Vec::with_capacity(count);
    let mut buf = [0u8; 2];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        labels.push(u16::from_le_bytes(buf));
    }
    Ok(labels)
}

fn read_u32(r: &mut impl Read) -> Result<u32, DatasetIoError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}
