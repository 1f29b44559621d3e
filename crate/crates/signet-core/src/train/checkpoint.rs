//! Versioned little-endian binary checkpoints with a shape manifest.
//!
//! Layout: magic, format version, config digest, model kind tag, epoch,
//! best validation loss, then per parameter (name, shape, f64 data). Loads
//! refuse version or digest mismatches and any manifest that disagrees with
//! the model built from the accompanying config; round trips are bit-exact.

use std::fs;
use std::io::{self, Read};
use std::path::Path;

use thiserror::Error;

use crate::model::{Model, ModelKind};
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"SGNTCKPT";
const VERSION: u32 = 1;

#[derive(Error, Debug)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint was written under a different configuration (digest mismatch)")]
    DigestMismatch,
    #[error("checkpoint model kind `{found}` does not match configured `{expected}`")]
    KindMismatch { found: String, expected: String },
    #[error("shape manifest mismatch for `{name}`: file has {file:?}, model wants {model:?}")]
    ShapeMismatch {
        name: String,
        file: Vec<usize>,
        model: Vec<usize>,
    },
    #[error("parameter manifest mismatch: file has `{file}`, model wants `{model}`")]
    NameMismatch { file: String, model: String },
    #[error("parameter count mismatch: file has {file}, model wants {model}")]
    CountMismatch { file: usize, model: usize },
    #[error("truncated or corrupt checkpoint: {0}")]
    Io(#[from] io::Error),
}

pub fn save_checkpoint(
    model: &Model,
    epoch: usize,
    best_val_loss: f64,
    config_digest: &[u8; 32],
    path: &Path,
) -> Result<(), CheckpointError> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(config_digest);
    buf.push(model.kind().tag());
    buf.extend_from_slice(&(epoch as u64).to_le_bytes());
    buf.extend_from_slice(&best_val_loss.to_bits().to_le_bytes());
    buf.extend_from_slice(&(model.bag().len() as u32).to_le_bytes());
    for (name, tensor) in model.bag().names().iter().zip(model.bag().tensors()) {
        let name_bytes = name.as_bytes();
        buf.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
        buf.extend_from_slice(name_bytes);
        buf.push(tensor.shape().len() as u8);
        for &d in tensor.shape() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in tensor.data() {
            buf.extend_from_slice(&v.to_bits().to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Load parameters into a freshly built model, refusing any mismatch.
///
/// `model` must be constructed from the same config whose digest is passed;
/// its manifest (names and shapes, in order) is the ground truth the file is
/// checked against.
pub fn load_checkpoint(
    path: &Path,
    model: &mut Model,
    config_digest: &[u8; 32],
) -> Result<(usize, f64), CheckpointError> {
    let mut file = fs::File::open(path)?;
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(&mut file)?;
    if version != VERSION {
        return Err(CheckpointError::Version {
            found: version,
            expected: VERSION,
        });
    }
    let mut digest = [0u8; 32];
    file.read_exact(&mut digest)?;
    if &digest != config_digest {
        return Err(CheckpointError::DigestMismatch);
    }
    let mut tag = [0u8; 1];
    file.read_exact(&mut tag)?;
    let kind = ModelKind::from_tag(tag[0]).ok_or(CheckpointError::BadMagic)?;
    if kind != model.kind() {
        return Err(CheckpointError::KindMismatch {
            found: kind.to_string(),
            expected: model.kind().to_string(),
        });
    }
    let epoch = read_u64(&mut file)? as usize;
    let best_val_loss = f64::from_bits(read_u64(&mut file)?);
    let count = read_u32(&mut file)? as usize;
    if count != model.bag().len() {
        return Err(CheckpointError::CountMismatch {
            file: count,
            model: model.bag().len(),
        });
    }

    let mut tensors = Vec::with_capacity(count);
    for k in 0..count {
        let name_len = read_u16(&mut file)? as usize;
        let mut name_bytes = vec![0u8; name_len];
        file.read_exact(&mut name_bytes)?;
        let name = String::from_utf8_lossy(&name_bytes).to_string();
        let expected_name = &model.bag().names()[k];
        if &name != expected_name {
            return Err(CheckpointError::NameMismatch {
                file: name,
                model: expected_name.clone(),
            });
        }
        let mut ndim = [0u8; 1];
        file.read_exact(&mut ndim)?;
        let mut shape = Vec::with_capacity(ndim[0] as usize);
        for _ in 0..ndim[0] {
            shape.push(read_u32(&mut file)? as usize);
        }
        let expected_shape = model.bag().tensors()[k].shape();
        if shape != expected_shape {
            return Err(CheckpointError::ShapeMismatch {
                name,
                file: shape,
                model: expected_shape.to_vec(),
            });
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f64::from_bits(read_u64(&mut file)?));
        }
        tensors.push(Tensor::from_vec(&shape, data).expect("shape/data consistency"));
    }
    model
        .restore(&tensors)
        .expect("manifest was verified against the model");
    Ok((epoch, best_val_loss))
}

fn read_u16(r: &mut impl Read) -> io::Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Append-proofing helper for tests: flip one byte somewhere in the body.
#[cfg(test)]
pub fn corrupt_for_test(path: &Path) -> io::Result<()> {
    use std::io::Write;
    let mut data = fs::read(path)?;
    let keep = data.len() / 2;
    data.truncate(keep);
    let mut f = fs::File::create(path)?;
    f.write_all(&data)?;
    Ok(())
}
