//! Symmetry-adapted bases for the group generated by translation and charge
//! conjugation, and sector-restricted Hamiltonians.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::symmetry::SymmetryOps;
use crate::error::{Error, Result};
use crate::hilbert::strides;
use crate::krylov::lanczos_lowest;
use crate::linalg::{eigh, norm, random_vector, C64, Mat, Vector, ZERO};
use crate::model::{LocalHamiltonian, D};
use crate::sparse::CsrMatrix;

/// Orbits of configurations under `T^m C^b`.
#[derive(Clone, Debug)]
pub struct OrbitTable {
    pub length: usize,
    /// Orbit id of every configuration.
    pub orbit_of: Vec<u32>,
    /// `(m, b)` with `config = T^m C^b rep`.
    pub element: Vec<(u8, u8)>,
    /// Representative configuration of each orbit (smallest index).
    pub reps: Vec<u32>,
    /// Stabilizer elements of each representative.
    pub stabilizer: Vec<Vec<(u8, u8)>>,
}

impl OrbitTable {
    pub fn new(ops: &SymmetryOps) -> Self {
        let l = ops.length;
        let dim = ops.dim();
        let mut orbit_of = vec![u32::MAX; dim];
        let mut element = vec![(0u8, 0u8); dim];
        let mut reps = Vec::new();
        let mut stabilizer = Vec::new();
        for s in 0..dim {
            if orbit_of[s] != u32::MAX {
                continue;
            }
            let id = reps.len() as u32;
            let mut stab = Vec::new();
            for b in 0..2u8 {
                let mut x = if b == 0 { s as u32 } else { ops.conjugation[s] };
                for m in 0..l as u8 {
                    let xi = x as usize;
                    if xi == s {
                        stab.push((m, b));
                    }
                    if orbit_of[xi] == u32::MAX {
                        orbit_of[xi] = id;
                        element[xi] = (m, b);
                    }
                    x = ops.translation[xi];
                }
            }
            reps.push(s as u32);
            stabilizer.push(stab);
        }
        OrbitTable { length: l, orbit_of, element, reps, stabilizer }
    }

    pub fn group_order(&self) -> usize {
        2 * self.length
    }
}

/// Basis of the sector with momentum `k = 2 pi n / l` and conjugation `c`.
#[derive(Clone, Debug)]
pub struct SectorBasis {
    pub n: usize,
    pub c: i8,
    /// Orbit ids spanning the sector.
    pub orbits: Vec<u32>,
    /// Position of each orbit in the sector basis (or `u32::MAX`).
    pub position: Vec<u32>,
    /// `sqrt(|Stab| / |G|)` per basis state.
    pub weight: Vec<f64>,
}

pub fn character(l: usize, n: usize, c: i8, (m, b): (u8, u8)) -> C64 {
    let k = 2.0 * PI * n as f64 / l as f64;
    let sign = if b == 1 && c < 0 { -1.0 } else { 1.0 };
    C64::from_polar(sign, k * m as f64)
}

impl SectorBasis {
    pub fn new(table: &OrbitTable, n: usize, c: i8) -> Result<Self> {
        let l = table.length;
        if n >= l || (c != 1 && c != -1) {
            return Err(Error::InvalidParameter(format!("sector (n={n}, c={c}) invalid for l={l}")));
        }
        let g = table.group_order() as f64;
        let mut orbits = Vec::new();
        let mut weight = Vec::new();
        let mut position = vec![u32::MAX; table.reps.len()];
        for (o, stab) in table.stabilizer.iter().enumerate() {
            let ok = stab.iter().all(|&e| (character(l, n, c, e) - 1.0).norm() < 1e-9);
            if ok {
                position[o] = orbits.len() as u32;
                orbits.push(o as u32);
                weight.push((stab.len() as f64 / g).sqrt());
            }
        }
        Ok(SectorBasis { n, c, orbits, position, weight })
    }

    pub fn dim(&self) -> usize {
        self.orbits.len()
    }

    /// Embed a sector vector into the full configuration space.
    pub fn to_full(&self, table: &OrbitTable, a: &Vector) -> Vector {
        let l = table.length;
        let mut psi = Vector::zeros(table.orbit_of.len());
        for s in 0..psi.len() {
            let p = self.position[table.orbit_of[s] as usize];
            if p != u32::MAX {
                let chi = character(l, self.n, self.c, table.element[s]);
                psi[s] = a[p as usize] * chi.conj() * self.weight[p as usize];
            }
        }
        psi
    }

    /// Hamiltonian restricted to the sector, in CSR form.
    pub fn hamiltonian(&self, table: &OrbitTable, h: &LocalHamiltonian) -> Result<CsrMatrix> {
        let l = table.length;
        if h.length != l {
            return Err(Error::Dimension(format!("Hamiltonian on {} sites, symmetry table on {l}", h.length)));
        }
        let st = strides(l);
        let mut trip: Vec<(u32, u32, C64)> = Vec::new();
        for (i, &o) in self.orbits.iter().enumerate() {
            let r = table.reps[o as usize] as usize;
            for term in &h.terms {
                let local = term.sites.iter().fold(0, |acc, &j| acc * D + (r / st[j]) % D);
                let w = term.sites.len();
                for &(row, v) in &term.columns[local] {
                    // new configuration: replace the term's digits by `row`
                    let mut s = r as isize;
                    let mut rr = row;
                    let mut cc = local;
                    for a in (0..w).rev() {
                        let dr = (rr % D) as isize;
                        let dc = (cc % D) as isize;
                        s += (dr - dc) * st[term.sites[a]] as isize;
                        rr /= D;
                        cc /= D;
                    }
                    let s = s as usize;
                    let os = table.orbit_of[s] as usize;
                    let p = self.position[os];
                    if p == u32::MAX {
                        continue;
                    }
                    let chi = character(l, self.n, self.c, table.element[s]);
                    let val = v * chi * (self.weight[p as usize] / self.weight[i]);
                    trip.push((p, i as u32, val));
                }
            }
        }
        Ok(CsrMatrix::from_triplets(self.dim(), trip))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenMethod {
    Dense,
    Krylov,
    /// Dense below a size threshold, Lanczos above.
    Auto,
}

#[derive(Clone, Debug)]
pub struct SectorEigenpair {
    pub omega: f64,
    pub n: usize,
    pub c: i8,
    /// Coefficients in the sector basis.
    pub coeffs: Vector,
    pub residual: f64,
}

/// `Auto` uses dense diagonalization up to this sector dimension, or when
/// at least a quarter of the sector is requested.
pub const DENSE_LIMIT: usize = 300;
pub const KRYLOV_TOL: f64 = 1e-10;
pub const KRYLOV_MAX_ITER: usize = 500;

/// Lowest `count` eigenpairs of the sector Hamiltonian.
pub fn sector_diagonalize(
    table: &OrbitTable,
    basis: &SectorBasis,
    h: &LocalHamiltonian,
    count: usize,
    method: EigenMethod,
) -> Result<Vec<SectorEigenpair>> {
    let dim = basis.dim();
    if count > dim {
        return Err(Error::InvalidParameter(format!("requested {count} eigenpairs from a {dim}-dimensional sector")));
    }
    let hs = basis.hamiltonian(table, h)?;
    let dense = match method {
        EigenMethod::Dense => true,
        EigenMethod::Krylov => false,
        EigenMethod::Auto => dim <= DENSE_LIMIT || 4 * count >= dim,
    };
    let mut out = Vec::with_capacity(count);
    if dense {
        let m: Mat = hs.to_dense();
        let (w, v) = eigh(&m)?;
        for i in 0..count {
            let x: Vector = v.column(i).to_owned();
            let r = norm(&(&hs.matvec(&x) - &x.mapv(|z| z * w[i])));
            out.push(SectorEigenpair { omega: w[i], n: basis.n, c: basis.c, coeffs: x, residual: r });
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + basis.n as u64 * 2 + (basis.c > 0) as u64);
        let v0 = random_vector(dim, &mut rng);
        let res = lanczos_lowest(|x| hs.matvec(x), &v0, dim, count, KRYLOV_TOL, KRYLOV_MAX_ITER)?;
        for i in 0..count {
            out.push(SectorEigenpair {
                omega: res.values[i],
                n: basis.n,
                c: basis.c,
                coeffs: res.vectors[i].clone(),
                residual: res.residuals[i],
            });
        }
    }
    for p in &out {
        if p.residual > KRYLOV_TOL {
            return Err(Error::NoConvergence { iterations: 0, residual: p.residual });
        }
    }
    Ok(out)
}

/// Make the largest-magnitude amplitude real and positive (first index
/// among near-ties).
pub fn fix_phase(psi: &mut Vector) {
    let max = psi.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if max == 0.0 {
        return;
    }
    let idx = psi.iter().position(|z| z.norm() >= max * (1.0 - 1e-9)).unwrap();
    let ph = psi[idx].conj() / psi[idx].norm();
    psi.mapv_inplace(|z| z * ph);
}

/// Dense matrix of an observable that is diagonal in the configuration basis,
/// restricted to a set of sector vectors.
pub fn projected_diagonal_observable<F>(table: &OrbitTable, basis: &SectorBasis, vecs: &[Vector], f: F) -> Mat
where
    F: Fn(usize) -> f64,
{
    let vals: Vec<f64> = basis.orbits.iter().map(|&o| f(table.reps[o as usize] as usize)).collect();
    let m = vecs.len();
    let mut out = Array2::from_elem((m, m), ZERO);
    for a in 0..m {
        for b in 0..m {
            out[[a, b]] = vecs[a]
                .iter()
                .zip(vecs[b].iter())
                .zip(vals.iter())
                .map(|((x, y), v)| x.conj() * y * *v)
                .sum();
        }
    }
    out
}
