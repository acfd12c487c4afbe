//! Binary checkpoint format, little-endian, bit-exact round-trip.
//!
//! Layout:
//! - magic `b"CADI"`, version `u32` (currently 1)
//! - class count `u32`, image side `u32` (0 for vector data)
//! - block count `u32`
//! - per block: name length `u32`, UTF-8 name, rank `u32`,
//!   dims `u32 * rank`, values `f64 * prod(dims)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::autodiff::Tensor;

const MAGIC: &[u8; 4] = b"CADI";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckpointMeta {
    pub classes: u32,
    /// Image side length; 0 when the networks run on vector data.
    pub image_side: u32,
}

pub fn save_checkpoint(
    path: &Path,
    meta: CheckpointMeta,
    blocks: &[(String, Tensor)],
) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&meta.classes.to_le_bytes())?;
    w.write_all(&meta.image_side.to_le_bytes())?;
    w.write_all(&(blocks.len() as u32).to_le_bytes())?;
    for (name, t) in blocks {
        let nb = name.as_bytes();
        w.write_all(&(nb.len() as u32).to_le_bytes())?;
        w.write_all(nb)?;
        w.write_all(&(t.rank() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointMeta, Vec<(String, Tensor)>), CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let meta = CheckpointMeta { classes: read_u32(&mut r)?, image_side: read_u32(&mut r)? };
    let count = read_u32(&mut r)? as usize;
    let mut blocks = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        let rank = read_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u32(&mut r)? as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        let mut buf = [0u8; 8];
        for _ in 0..numel {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        let t = Tensor::from_vec(&shape, data).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        blocks.push((name, t));
    }
    Ok((meta, blocks))
}

fn read_u32(r: &mut impl Read) -> Result<u32, CheckpointError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}
