//! Binary checkpoints of complex arrays: magic, format version, array count,
//! then per array its rank, shape and interleaved little-endian `(re, im)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array3, ArrayD, IxDyn};
use qpwave::linalg::{Mat, Vector, C64};
use qpwave::tensor::Mps;

use crate::error::CliError;

const MAGIC: &[u8; 4] = b"QPWC";
const VERSION: u32 = 1;

pub fn write_arrays(path: &Path, arrays: &[ArrayD<C64>]) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(arrays.len() as u64).to_le_bytes())?;
    for a in arrays {
        w.write_all(&(a.ndim() as u32).to_le_bytes())?;
        for &n in a.shape() {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        for z in a.iter() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32, CliError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64, CliError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64, CliError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_arrays(path: &Path) -> Result<Vec<ArrayD<C64>>, CliError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CliError::Checkpoint(format!("{} is not a checkpoint", path.display())));
    }
    let v = read_u32(&mut r)?;
    if v != VERSION {
        return Err(CliError::Checkpoint(format!("{}: format {v}, expected {VERSION}", path.display())));
    }
    let count = read_u64(&mut r)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let rank = read_u32(&mut r)? as usize;
        let shape: Vec<usize> = (0..rank).map(|_| read_u64(&mut r).map(|n| n as usize)).collect::<Result<_, _>>()?;
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let re = read_f64(&mut r)?;
            let im = read_f64(&mut r)?;
            data.push(C64::new(re, im));
        }
        out.push(ArrayD::from_shape_vec(IxDyn(&shape), data).map_err(|e| CliError::Checkpoint(e.to_string()))?);
    }
    Ok(out)
}

pub fn write_vectors(path: &Path, vs: &[&Vector]) -> Result<(), CliError> {
    write_arrays(path, &vs.iter().map(|v| (*v).clone().into_dyn()).collect::<Vec<_>>())
}

pub fn read_vectors(path: &Path) -> Result<Vec<Vector>, CliError> {
    read_arrays(path)?
        .into_iter()
        .map(|a| a.into_dimensionality().map_err(|e| CliError::Checkpoint(e.to_string())))
        .collect()
}

pub fn write_matrix(path: &Path, m: &Mat) -> Result<(), CliError> {
    write_arrays(path, &[m.clone().into_dyn()])
}

pub fn read_matrix(path: &Path) -> Result<Mat, CliError> {
    let a = read_arrays(path)?;
    a.into_iter()
        .next()
        .ok_or_else(|| CliError::Checkpoint("empty matrix checkpoint".into()))?
        .into_dimensionality()
        .map_err(|e| CliError::Checkpoint(e.to_string()))
}

pub fn write_mps(path: &Path, psi: &Mps) -> Result<(), CliError> {
    write_arrays(path, &psi.tensors.iter().map(|t| t.clone().into_dyn()).collect::<Vec<_>>())
}

pub fn read_mps(path: &Path) -> Result<Mps, CliError> {
    let tensors: Vec<Array3<C64>> = read_arrays(path)?
        .into_iter()
        .map(|a| a.into_dimensionality().map_err(|e| CliError::Checkpoint(e.to_string())))
        .collect::<Result<_, _>>()?;
    Ok(Mps::new(tensors)?)
}
