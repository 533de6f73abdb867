//! Full qutrit-chain Hilbert space in the electric (configuration) basis.
//!
//! Configuration index: `sum_j n_j 3^(L-1-j)`, i.e. site 0 is the most
//! significant digit, matching `kron(op_0, op_1, ...)`.

use crate::error::{Error, Result};
use crate::linalg::{C64, Mat, Vector, ZERO};
use crate::model::{LocalHamiltonian, LocalTerm, D};
use crate::sparse::CsrMatrix;

/// Largest chain handled with full-space vectors.
pub const MAX_FULL_SITES: usize = 13;

pub fn full_dim(length: usize) -> Result<usize> {
    if length > MAX_FULL_SITES {
        return Err(Error::TooLarge(format!("3^{length} exceeds the full-space limit 3^{MAX_FULL_SITES}")));
    }
    Ok(D.pow(length as u32))
}

pub fn strides(length: usize) -> Vec<usize> {
    (0..length).map(|j| D.pow((length - 1 - j) as u32)).collect()
}

pub fn config_digits(idx: usize, length: usize) -> Vec<u8> {
    let mut d = vec![0u8; length];
    let mut x = idx;
    for j in (0..length).rev() {
        d[j] = (x % D) as u8;
        x /= D;
    }
    d
}

pub fn config_index(digits: &[u8]) -> usize {
    digits.iter().fold(0, |acc, &x| acc * D + x as usize)
}

struct TermPlan {
    strides: Vec<usize>,
    /// For each local column, the (row delta in full index, value) pairs.
    moves: Vec<Vec<(isize, C64)>>,
}

fn plan(term: &LocalTerm, length: usize) -> TermPlan {
    let st = strides(length);
    let w = term.width();
    let s: Vec<usize> = term.sites.iter().map(|&j| st[j]).collect();
    let moves = term
        .columns
        .iter()
        .enumerate()
        .map(|(c, col)| {
            let cd = crate::model::hamiltonian::local_digits(c, w);
            col.iter()
                .map(|&(r, v)| {
                    let rd = crate::model::hamiltonian::local_digits(r, w);
                    let delta: isize = (0..w).map(|a| (rd[a] as isize - cd[a] as isize) * s[a] as isize).sum();
                    (delta, v)
                })
                .collect()
        })
        .collect();
    TermPlan { strides: s, moves }
}

impl TermPlan {
    #[inline]
    fn local_col(&self, idx: usize) -> usize {
        self.strides.iter().fold(0, |acc, &s| acc * D + (idx / s) % D)
    }
}

/// `out += scale * term |psi>`.
pub fn apply_term_into(term: &LocalTerm, length: usize, psi: &Vector, out: &mut Vector, scale: C64) {
    let p = plan(term, length);
    for idx in 0..psi.len() {
        let a = psi[idx];
        if a == ZERO {
            continue;
        }
        let c = p.local_col(idx);
        for &(delta, v) in &p.moves[c] {
            out[(idx as isize + delta) as usize] += scale * v * a;
        }
    }
}

pub fn apply_term(term: &LocalTerm, length: usize, psi: &Vector) -> Vector {
    let mut out = Vector::zeros(psi.len());
    apply_term_into(term, length, psi, &mut out, C64::new(1.0, 0.0));
    out
}

pub fn apply_hamiltonian(h: &LocalHamiltonian, psi: &Vector) -> Vector {
    let mut out = Vector::zeros(psi.len());
    for t in &h.terms {
        apply_term_into(t, h.length, psi, &mut out, C64::new(1.0, 0.0));
    }
    out
}

/// `<psi| term |psi>`.
pub fn term_expectation(term: &LocalTerm, length: usize, psi: &Vector) -> C64 {
    let hp = apply_term(term, length, psi);
    psi.iter().zip(hp.iter()).map(|(a, b)| a.conj() * b).sum()
}

pub fn sparse_hamiltonian(h: &LocalHamiltonian) -> Result<CsrMatrix> {
    let dim = full_dim(h.length)?;
    let mut trip = Vec::new();
    for t in &h.terms {
        let p = plan(t, h.length);
        for idx in 0..dim {
            let c = p.local_col(idx);
            for &(delta, v) in &p.moves[c] {
                trip.push(((idx as isize + delta) as u32, idx as u32, v));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(dim, trip))
}

pub fn dense_hamiltonian(h: &LocalHamiltonian) -> Result<Mat> {
    if h.length > 8 {
        return Err(Error::TooLarge(format!("dense Hamiltonian for {} sites", h.length)));
    }
    Ok(sparse_hamiltonian(h)?.to_dense())
}

/// Dense embedding of an operator acting on `sites` (ordered as the operator's
/// local index digits) into the full chain.
pub fn embed_operator(op: &Mat, sites: &[usize], length: usize) -> Result<Mat> {
    let dim = full_dim(length)?;
    if length > 9 {
        return Err(Error::TooLarge("dense embedding beyond 9 sites".into()));
    }
    let term = LocalTerm::new(0, sites.to_vec(), op.clone());
    let mut m = Mat::zeros((dim, dim));
    let p = plan(&term, length);
    for idx in 0..dim {
        let c = p.local_col(idx);
        for &(delta, v) in &p.moves[c] {
            m[[(idx as isize + delta) as usize, idx]] += v;
        }
    }
    Ok(m)
}

/// Apply a dense operator on `sites` to a full state vector.
pub fn apply_local_operator(op: &Mat, sites: &[usize], length: usize, psi: &Vector) -> Vector {
    let term = LocalTerm::new(0, sites.to_vec(), op.clone());
    apply_term(&term, length, psi)
}

/// Reorder a full state into a matrix `(window configuration, rest configuration)`
/// with the window sites in the given order and the rest in increasing site order.
pub fn split_window(psi: &Vector, length: usize, window: &[usize]) -> Result<Mat> {
    let dim = full_dim(length)?;
    if psi.len() != dim {
        return Err(Error::Dimension(format!("state length {} != 3^{length}", psi.len())));
    }
    let mut seen = vec![false; length];
    for &j in window {
        if j >= length || seen[j] {
            return Err(Error::InvalidParameter(format!("bad window site {j}")));
        }
        seen[j] = true;
    }
    let rest: Vec<usize> = (0..length).filter(|&j| !seen[j]).collect();
    let st = strides(length);
    let wdim = D.pow(window.len() as u32);
    let rdim = D.pow(rest.len() as u32);
    let mut m = Mat::zeros((wdim, rdim));
    for idx in 0..dim {
        let a = window.iter().fold(0, |acc, &j| acc * D + (idx / st[j]) % D);
        let r = rest.iter().fold(0, |acc, &j| acc * D + (idx / st[j]) % D);
        m[[a, r]] = psi[idx];
    }
    Ok(m)
}

/// Reduced density matrix of a full state on `window` (ordered sites).
pub fn reduced_density_matrix_dense(psi: &Vector, length: usize, window: &[usize]) -> Result<Mat> {
    let m = split_window(psi, length, window)?;
    Ok(m.dot(&crate::linalg::dagger(&m)))
}
