//! Model checkpoint file format.
//!
//! Layout (little-endian):
//!   magic "MLRLAB1" | u8 activation id | u32 width count | u32 widths...
//!   | u64 parameter count | f64 parameters...

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::net::{Activation, MlpSpec, ParamVector};

const MAGIC: &[u8; 7] = b"MLRLAB1";

fn activation_id(a: Activation) -> u8 {
    match a {
        Activation::Relu => 0,
        Activation::Tanh => 1,
    }
}

fn activation_from_id(id: u8) -> Result<Activation> {
    match id {
        0 => Ok(Activation::Relu),
        1 => Ok(Activation::Tanh),
        other => Err(Error::Checkpoint(format!("unknown activation id {other}"))),
    }
}

pub fn save_checkpoint(path: &Path, spec: &MlpSpec, params: &ParamVector) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&[activation_id(spec.activation())])?;
    w.write_all(&(spec.layer_widths().len() as u32).to_le_bytes())?;
    for &width in spec.layer_widths() {
        w.write_all(&(width as u32).to_le_bytes())?;
    }
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    for &v in params.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a checkpoint, reconstructing the architecture it was saved with.
pub fn read_checkpoint(path: &Path) -> Result<(MlpSpec, ParamVector)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 7];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!("bad magic in {}", path.display())));
    }
    let mut byte = [0u8; 1];
    r.read_exact(&mut byte)?;
    let activation = activation_from_id(byte[0])?;
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let n_widths = u32::from_le_bytes(u32buf) as usize;
    if !(2..=64).contains(&n_widths) {
        return Err(Error::Checkpoint(format!("implausible width count {n_widths}")));
    }
    let mut widths = Vec::with_capacity(n_widths);
    for _ in 0..n_widths {
        r.read_exact(&mut u32buf)?;
        widths.push(u32::from_le_bytes(u32buf) as usize);
    }
    let spec = MlpSpec::new(widths, activation)
        .map_err(|e| Error::Checkpoint(format!("invalid stored spec: {e}")))?;
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf)?;
    let n_params = u64::from_le_bytes(u64buf) as usize;
    if n_params != spec.param_count() {
        return Err(Error::Checkpoint(format!(
            "stored parameter count {n_params} does not match spec ({})",
            spec.param_count()
        )));
    }
    let mut values = Vec::with_capacity(n_params);
    let mut f64buf = [0u8; 8];
    for _ in 0..n_params {
        r.read_exact(&mut f64buf)?;
        values.push(f64::from_le_bytes(f64buf));
    }
    let params = ParamVector::new(&spec, values)
        .map_err(|e| Error::Checkpoint(format!("invalid stored parameters: {e}")))?;
    Ok((spec, params))
}

/// Reads a checkpoint and rejects it unless the stored spec matches.
pub fn load_checkpoint(path: &Path, expected: &MlpSpec) -> Result<ParamVector> {
    let (spec, params) = read_checkpoint(path)?;
    if &spec != expected {
        return Err(Error::Checkpoint(format!(
            "checkpoint spec {:?}/{} does not match expected {:?}/{}",
            spec.layer_widths(),
            spec.activation().name(),
            expected.layer_widths(),
            expected.activation().name()
        )));
    }
    Ok(params)
}
