//! Flat binary model container, little-endian throughout.
//!
//! Layout:
//! - `u32` layer count (hidden blocks plus the output layer)
//! - per layer: `u32` input dim, `u32` output dim, `u8` activation tag,
//!   `u8` norm tag (0 none, 1 batchnorm, 2 layernorm)
//! - then, in the same layer order, the row-major `f64` arrays: weight
//!   `[in×out]`, bias `[out]`, and for normalized layers gamma, shift
//!   (batchnorm additionally running mean, running variance, then `f64` eps
//!   and `f64` momentum; layernorm just `f64` eps).

use super::model::{Block, Mlp, Norm, Normalizer};
use super::{Activation, BatchNormLayer, DenseLayer, LayerNormLayer};
use crate::error::{CoreError, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const NORM_NONE: u8 = 0;
const NORM_BATCH: u8 = 1;
const NORM_LAYER: u8 = 2;

fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut buf = [0u8; 8];
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut buf = [0u8; 1];
    r.read_exact(&mut buf)?;
    Ok(buf[0])
}

struct LayerHeader {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    norm: u8,
}

/// Serializes a model to the flat binary container.
pub fn save_model(mlp: &Mlp, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let count = mlp.blocks.len() + 1;
    w.write_all(&(count as u32).to_le_bytes())?;
    for block in &mlp.blocks {
        w.write_all(&(block.dense.in_dim() as u32).to_le_bytes())?;
        w.write_all(&(block.dense.out_dim() as u32).to_le_bytes())?;
        w.write_all(&[block.dense.activation.tag()])?;
        let tag = match &block.norm {
            None => NORM_NONE,
            Some(Norm::Batch(_)) => NORM_BATCH,
            Some(Norm::Layer(_)) => NORM_LAYER,
        };
        w.write_all(&[tag])?;
    }
    w.write_all(&(mlp.output.in_dim() as u32).to_le_bytes())?;
    w.write_all(&(mlp.output.out_dim() as u32).to_le_bytes())?;
    w.write_all(&[mlp.output.activation.tag()])?;
    w.write_all(&[NORM_NONE])?;

    for block in &mlp.blocks {
        write_f64s(&mut w, &block.dense.weight.values())?;
        write_f64s(&mut w, &block.dense.bias.values())?;
        match &block.norm {
            None => {}
            Some(Norm::Batch(bn)) => {
                write_f64s(&mut w, &bn.gamma.values())?;
                write_f64s(&mut w, &bn.shift.values())?;
                let (mean, var) = bn.running_stats();
                write_f64s(&mut w, &mean)?;
                write_f64s(&mut w, &var)?;
                write_f64s(&mut w, &[bn.eps, bn.momentum])?;
            }
            Some(Norm::Layer(ln)) => {
                write_f64s(&mut w, &ln.gamma.values())?;
                write_f64s(&mut w, &ln.shift.values())?;
                write_f64s(&mut w, &[ln.eps])?;
            }
        }
    }
    write_f64s(&mut w, &mlp.output.weight.values())?;
    write_f64s(&mut w, &mlp.output.bias.values())?;
    w.flush()?;
    Ok(())
}

/// Loads a model saved by [`save_model`].
pub fn load_model(path: &Path) -> Result<Mlp> {
    let mut r = BufReader::new(File::open(path)?);
    let count = read_u32(&mut r)? as usize;
    if count == 0 {
        return Err(CoreError::Data("model container has no layers".into()));
    }
    let mut headers = Vec::with_capacity(count);
    for _ in 0..count {
        let in_dim = read_u32(&mut r)? as usize;
        let out_dim = read_u32(&mut r)? as usize;
        let activation = Activation::from_tag(read_u8(&mut r)?)?;
        let norm = read_u8(&mut r)?;
        if norm > NORM_LAYER {
            return Err(CoreError::Data(format!("unknown norm tag {norm}")));
        }
        headers.push(LayerHeader { in_dim, out_dim, activation, norm });
    }
    let mut blocks = Vec::with_capacity(count - 1);
    let mut normalizer = Normalizer::None;
    for header in &headers[..count - 1] {
        let weight = read_f64s(&mut r, header.in_dim * header.out_dim)?;
        let bias = read_f64s(&mut r, header.out_dim)?;
        let dense = DenseLayer::from_params(
            header.in_dim,
            header.out_dim,
            weight,
            bias,
            header.activation,
        )?;
        let norm = match header.norm {
            NORM_BATCH => {
                let gamma = read_f64s(&mut r, header.out_dim)?;
                let shift = read_f64s(&mut r, header.out_dim)?;
                let mean = read_f64s(&mut r, header.out_dim)?;
                let var = read_f64s(&mut r, header.out_dim)?;
                let scalars = read_f64s(&mut r, 2)?;
                let bn = BatchNormLayer::new(header.out_dim, scalars[1], scalars[0])?;
                bn.gamma.set_data(&gamma)?;
                bn.shift.set_data(&shift)?;
                bn.set_running_stats(mean, var)?;
                normalizer = Normalizer::BatchNorm;
                Some(Norm::Batch(bn))
            }
            NORM_LAYER => {
                let gamma = read_f64s(&mut r, header.out_dim)?;
                let shift = read_f64s(&mut r, header.out_dim)?;
                let eps = read_f64s(&mut r, 1)?[0];
                let ln = LayerNormLayer::new(header.out_dim, eps)?;
                ln.gamma.set_data(&gamma)?;
                ln.shift.set_data(&shift)?;
                normalizer = Normalizer::LayerNorm;
                Some(Norm::Layer(ln))
            }
            _ => None,
        };
        blocks.push(Block { dense, norm });
    }
    let out_header = &headers[count - 1];
    let weight = read_f64s(&mut r, out_header.in_dim * out_header.out_dim)?;
    let bias = read_f64s(&mut r, out_header.out_dim)?;
    let output = DenseLayer::from_params(
        out_header.in_dim,
        out_header.out_dim,
        weight,
        bias,
        out_header.activation,
    )?;
    Ok(Mlp { blocks, output, normalizer, dropout: None })
}
