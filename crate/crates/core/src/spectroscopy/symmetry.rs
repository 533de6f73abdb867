//! Translation, reflection and charge conjugation on the configuration basis.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hilbert::{config_digits, config_index, full_dim};
use crate::linalg::{C64, Vector};

/// Site permutations and the on-site conjugation as maps of configuration
/// indices. `T` moves the content of site `j` to `j + 1`; the reflection
/// fixes site 0 (`j -> -j mod l`); `C` maps `n -> -n mod 3`; ladder parity is
/// `P = R C`.
#[derive(Clone, Debug)]
pub struct SymmetryOps {
    pub length: usize,
    pub translation: Vec<u32>,
    pub reflection: Vec<u32>,
    pub conjugation: Vec<u32>,
}

fn permute(map: &[u32], psi: &Vector) -> Vector {
    let mut out = Vector::zeros(psi.len());
    for (s, &t) in map.iter().enumerate() {
        out[t as usize] = psi[s];
    }
    out
}

impl SymmetryOps {
    pub fn new(length: usize) -> Result<Self> {
        let dim = full_dim(length)?;
        let mut translation = vec![0u32; dim];
        let mut reflection = vec![0u32; dim];
        let mut conjugation = vec![0u32; dim];
        let mut buf = vec![0u8; length];
        for s in 0..dim {
            let d = config_digits(s, length);
            for j in 0..length {
                buf[(j + 1) % length] = d[j];
            }
            translation[s] = config_index(&buf) as u32;
            for j in 0..length {
                buf[(length - j) % length] = d[j];
            }
            reflection[s] = config_index(&buf) as u32;
            for j in 0..length {
                buf[j] = (3 - d[j]) % 3;
            }
            conjugation[s] = config_index(&buf) as u32;
        }
        Ok(SymmetryOps { length, translation, reflection, conjugation })
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn translate(&self, psi: &Vector) -> Vector {
        permute(&self.translation, psi)
    }

    pub fn translate_by(&self, psi: &Vector, m: isize) -> Vector {
        let l = self.length as isize;
        let steps = m.rem_euclid(l);
        let mut x = psi.clone();
        for _ in 0..steps {
            x = self.translate(&x);
        }
        x
    }

    pub fn reflect(&self, psi: &Vector) -> Vector {
        permute(&self.reflection, psi)
    }

    pub fn conjugate(&self, psi: &Vector) -> Vector {
        permute(&self.conjugation, psi)
    }

    pub fn parity(&self, psi: &Vector) -> Vector {
        self.reflect(&self.conjugate(psi))
    }
}

/// Momentum on the grid `k_n = 2 pi n / l`, `n` in `0..l`.
pub fn momentum(l: usize, n: usize) -> f64 {
    2.0 * PI * n as f64 / l as f64
}

/// Grid index of a momentum, rejecting off-grid values.
pub fn momentum_index(l: usize, k: f64) -> Result<usize> {
    let x = k * l as f64 / (2.0 * PI);
    let n = x.round();
    if (x - n).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("k = {k} is not on the 2 pi n / {l} grid")));
    }
    Ok((n as i64).rem_euclid(l as i64) as usize)
}

/// `P_k = (1/l) sum_m e^{-ikm} T^m`, applied as an operator.
#[derive(Clone, Debug)]
pub struct MomentumProjector {
    pub l: usize,
    pub n: usize,
}

pub fn momentum_projector(l: usize, k: f64) -> Result<MomentumProjector> {
    Ok(MomentumProjector { l, n: momentum_index(l, k)? })
}

impl MomentumProjector {
    pub fn k(&self) -> f64 {
        momentum(self.l, self.n)
    }

    pub fn apply(&self, ops: &SymmetryOps, psi: &Vector) -> Vector {
        let k = self.k();
        let mut out = Vector::zeros(psi.len());
        let mut x = psi.clone();
        for m in 0..self.l {
            let ph = C64::from_polar(1.0 / self.l as f64, -k * m as f64);
            out.zip_mut_with(&x, |a, b| *a += ph * b);
            x = ops.translate(&x);
        }
        out
    }
}
