//! Parameter checkpoint file: magic `VGGMI1\0`, format version byte, width
//! scale, then per layer a kind tag followed by shape dims (64-bit LE) and
//! raw 64-bit LE float data. Load(save(p)) is bitwise-identical.

use std::io::{Read, Write};

use thiserror::Error;

use super::{LayerSpec, NetworkParams};
use crate::tensor::Tensor;

const MAGIC: &[u8; 7] = b"VGGMI1\0";
const VERSION: u8 = 1;

const TAG_CONV: u8 = 0;
const TAG_POOL: u8 = 1;
const TAG_FC: u8 = 2;
const TAG_DROPOUT: u8 = 3;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub fn save_params(params: &NetworkParams, dest: &mut dyn Write) -> Result<(), CheckpointError> {
    dest.write_all(MAGIC)?;
    dest.write_all(&[VERSION])?;
    dest.write_all(&params.width_scale.0.to_le_bytes())?;
    dest.write_all(&params.width_scale.1.to_le_bytes())?;
    dest.write_all(&(params.input_size as u64).to_le_bytes())?;
    dest.write_all(&(params.architecture.len() as u64).to_le_bytes())?;
    let mut param_idx = 0;
    for spec in &params.architecture {
        match *spec {
            LayerSpec::Conv3x3 { .. } => {
                dest.write_all(&[TAG_CONV])?;
                let (w, b) = &params.weights[param_idx];
                param_idx += 1;
                write_tensor(w, dest)?;
                write_tensor(b, dest)?;
            }
            LayerSpec::MaxPool2x2 => dest.write_all(&[TAG_POOL])?,
            LayerSpec::FullyConnected { relu, .. } => {
                dest.write_all(&[TAG_FC, relu as u8])?;
                let (w, b) = &params.weights[param_idx];
                param_idx += 1;
                write_tensor(w, dest)?;
                write_tensor(b, dest)?;
            }
            LayerSpec::Dropout { rate } => {
                dest.write_all(&[TAG_DROPOUT])?;
                dest.write_all(&rate.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn load_params(src: &mut dyn Read) -> Result<NetworkParams, CheckpointError> {
    let mut magic = [0u8; 7];
    src.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u8(src)?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let num = read_u32(src)?;
    let den = read_u32(src)?;
    let input_size = read_u64(src)? as usize;
    let n_layers = read_u64(src)? as usize;
    if n_layers > 1024 {
        return Err(CheckpointError::Corrupt(format!("{n_layers} layers")));
    }
    let mut architecture = Vec::with_capacity(n_layers);
    let mut weights = Vec::new();
    for _ in 0..n_layers {
        match read_u8(src)? {
            TAG_CONV => {
                let w = read_tensor(src)?;
                let b = read_tensor(src)?;
                let s = w.shape();
                if s.len() != 4 || s[2] != 3 || s[3] != 3 {
                    return Err(CheckpointError::Corrupt(format!("conv shape {s:?}")));
                }
                architecture.push(LayerSpec::Conv3x3 {
                    in_channels: s[1],
                    out_channels: s[0],
                });
                weights.push((w, b));
            }
            TAG_POOL => architecture.push(LayerSpec::MaxPool2x2),
            TAG_FC => {
                let relu = read_u8(src)? != 0;
                let w = read_tensor(src)?;
                let b = read_tensor(src)?;
                let s = w.shape();
                if s.len() != 2 {
                    return Err(CheckpointError::Corrupt(format!("fc shape {s:?}")));
                }
                architecture.push(LayerSpec::FullyConnected {
                    in_units: s[1],
                    out_units: s[0],
                    relu,
                });
                weights.push((w, b));
            }
            TAG_DROPOUT => {
                let mut buf = [0u8; 8];
                src.read_exact(&mut buf)?;
                architecture.push(LayerSpec::Dropout {
                    rate: f64::from_le_bytes(buf),
                });
            }
            t => return Err(CheckpointError::Corrupt(format!("unknown layer tag {t}"))),
        }
    }
    Ok(NetworkParams {
        architecture,
        width_scale: (num, den),
        input_size,
        weights,
    })
}

fn write_tensor(t: &Tensor, dest: &mut dyn Write) -> Result<(), CheckpointError> {
    dest.write_all(&[t.shape().len() as u8])?;
    for &d in t.shape() {
        dest.write_all(&(d as u64).to_le_bytes())?;
    }
    let mut bytes = Vec::with_capacity(8 * t.len());
    for v in t.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    dest.write_all(&bytes)?;
    Ok(())
}

fn read_tensor(src: &mut dyn Read) -> Result<Tensor, CheckpointError> {
    let ndims = read_u8(src)? as usize;
    if ndims > 8 {
        return Err(CheckpointError::Corrupt(format!("{ndims} dims")));
    }
    let mut shape = Vec::with_capacity(ndims);
    for _ in 0..ndims {
        shape.push(read_u64(src)? as usize);
    }
    let n: usize = shape.iter().product();
    if n > (1 << 31) {
        return Err(CheckpointError::Corrupt(format!("tensor of {n} elements")));
    }
    let mut bytes = vec![0u8; 8 * n];
    src.read_exact(&mut bytes)?;
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Tensor::from_vec(&shape, data))
}

fn read_u8(src: &mut dyn Read) -> Result<u8, CheckpointError> {
    let mut b = [0u8; 1];
    src.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u32(src: &mut dyn Read) -> Result<u32, CheckpointError> {
    let mut b = [0u8; 4];
    src.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(src: &mut dyn Read) -> Result<u64, CheckpointError> {
    let mut b = [0u8; 8];
    src.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
