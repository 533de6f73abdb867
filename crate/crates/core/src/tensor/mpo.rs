use ndarray::{s, Array3, Array4, Axis};

use super::contract::{left_update, trivial_env};
use super::{ReshapeC, mat, mat4, Mps, Truncation, TruncationLog};
use crate::error::{Error, Result};
use crate::linalg::{qr, svd, truncation_rank, Mat, C64, ONE, ZERO};
use crate::model::{Boundary, LocalHamiltonian};

/// Matrix product operator with site tensors `(w_l, s_out, s_in, w_r)`.
#[derive(Clone, Debug)]
pub struct Mpo {
    pub tensors: Vec<Array4<C64>>,
    pub d: usize,
    pub log: TruncationLog,
}

/// Split a dense operator on `width` sites (first site most significant)
/// into site tensors by sequential SVDs, dropping singular values below
/// `rel_cutoff * s_max` at each cut.
pub fn factorize_operator(op: &Mat, width: usize, d: usize, rel_cutoff: f64) -> Result<Vec<Array4<C64>>> {
    let n = d.checked_pow(width as u32).unwrap_or(0);
    if op.dim() != (n, n) || width == 0 {
        return Err(Error::Dimension(format!("operator of shape {:?} on {width} sites of dimension {d}", op.dim())));
    }
    // interleave (s_1..s_w, t_1..t_w) -> (s_1 t_1, ..., s_w t_w)
    let dd = d * d;
    let mut inter = ndarray::Array1::<C64>::zeros(n * n);
    for r in 0..n {
        for c in 0..n {
            let v = op[[r, c]];
            if v == ZERO {
                continue;
            }
            let (mut rr, mut cc, mut idx, mut mult) = (r, c, 0usize, 1usize);
            for _ in 0..width {
                idx += ((rr % d) * d + cc % d) * mult;
                rr /= d;
                cc /= d;
                mult *= dd;
            }
            inter[idx] = v;
        }
    }
    let mut tensors = Vec::with_capacity(width);
    let mut rest = inter.reshape_c((1, n * n));
    for _ in 0..width - 1 {
        let chi = rest.nrows();
        let cols = rest.ncols() / dd;
        let m = rest.reshape_c((chi * dd, cols));
        let (u, sv, vt) = svd(&m)?;
        let smax = sv.first().copied().unwrap_or(0.0);
        let r = sv.iter().filter(|&&x| x > rel_cutoff * smax).count().max(1);
        tensors.push(u.slice(s![.., ..r]).to_owned().reshape_c((chi, d, d, r)));
        let mut next = vt.slice(s![..r, ..]).to_owned();
        for (i, mut row) in next.axis_iter_mut(Axis(0)).enumerate() {
            row.mapv_inplace(|z| z * sv[i]);
        }
        rest = next;
    }
    let chi = rest.nrows();
    tensors.push(rest.reshape_c((chi, d, d, 1)));
    Ok(tensors)
}

fn identity_tensor(d: usize) -> Array4<C64> {
    let mut t = Array4::zeros((1, d, d, 1));
    for s in 0..d {
        t[[0, s, s, 0]] = ONE;
    }
    t
}

impl Mpo {
    pub fn new(tensors: Vec<Array4<C64>>) -> Result<Self> {
        if tensors.is_empty() {
            return Err(Error::Dimension("empty MPO".into()));
        }
        let d = tensors[0].dim().1;
        for (j, t) in tensors.iter().enumerate() {
            if t.dim().1 != d || t.dim().2 != d {
                return Err(Error::Dimension(format!("site {j} is not {d}x{d}")));
            }
            if j + 1 < tensors.len() && t.dim().3 != tensors[j + 1].dim().0 {
                return Err(Error::Dimension(format!("bond {j} mismatch")));
            }
        }
        if tensors[0].dim().0 != 1 || tensors[tensors.len() - 1].dim().3 != 1 {
            return Err(Error::Dimension("boundary bonds must have dimension 1".into()));
        }
        Ok(Mpo { tensors, d, log: TruncationLog::default() })
    }

    pub fn identity(length: usize, d: usize) -> Self {
        Mpo { tensors: vec![identity_tensor(d); length], d, log: TruncationLog::default() }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.len() - 1].iter().map(|t| t.dim().3).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Operator acting as `op` on `start..start+width` and as the identity
    /// elsewhere on a chain of `length` sites.
    pub fn embed(op: &Mat, start: usize, length: usize, d: usize, rel_cutoff: f64) -> Result<Self> {
        let mut width = 0;
        let mut n = 1;
        while n < op.nrows() {
            n *= d;
            width += 1;
        }
        if start + width > length {
            return Err(Error::InvalidParameter(format!("window {start}+{width} outside chain of {length}")));
        }
        let factors = factorize_operator(op, width, d, rel_cutoff)?;
        let mut tensors = vec![identity_tensor(d); length];
        for (k, f) in factors.into_iter().enumerate() {
            tensors[start + k] = f;
        }
        Mpo::new(tensors)
    }

    /// Exact MPO of a sum of contiguous local terms on an open chain, built
    /// as a finite-state automaton: channel 0 means "no term placed yet",
    /// channel 1 means "term completed", further channels carry the internal
    /// bonds of terms straddling the cut. Compressed afterwards.
    pub fn from_local_hamiltonian(h: &LocalHamiltonian) -> Result<Self> {
        if h.boundary != Boundary::Open {
            return Err(Error::InvalidParameter("MPO construction supports open chains only".into()));
        }
        let terms: Vec<(usize, Mat)> = h
            .terms
            .iter()
            .map(|t| {
                let start = t.sites[0];
                if t.sites.iter().enumerate().any(|(k, &s)| s != start + k) {
                    return Err(Error::InvalidParameter(format!("term {} is not contiguous", t.center)));
                }
                Ok((start, t.matrix.clone()))
            })
            .collect::<Result<_>>()?;
        let mpo = Mpo::from_terms(&terms, h.length, crate::model::D)?;
        mpo.compressed(1e-26, usize::MAX)
    }

    /// Automaton construction for `sum_t op_t` with `op_t` starting at the
    /// given site.
    pub fn from_terms(terms: &[(usize, Mat)], length: usize, d: usize) -> Result<Self> {
        let factors: Vec<(usize, Vec<Array4<C64>>)> = terms
            .iter()
            .map(|(start, m)| {
                let mut width = 0;
                let mut n = 1;
                while n < m.nrows() {
                    n *= d;
                    width += 1;
                }
                if start + width > length {
                    return Err(Error::InvalidParameter(format!("term at {start} exceeds the chain")));
                }
                Ok((*start, factorize_operator(m, width, d, 1e-14)?))
            })
            .collect::<Result<_>>()?;
        // offsets of each term's internal channels on each bond
        let mut bond_dim = vec![2usize; length + 1];
        let mut offset: Vec<Vec<usize>> = vec![vec![usize::MAX; length + 1]; factors.len()];
        for (t, (start, f)) in factors.iter().enumerate() {
            for k in 0..f.len() - 1 {
                let b = start + k + 1;
                offset[t][b] = bond_dim[b];
                bond_dim[b] += f[k].dim().3;
            }
        }
        let mut tensors = Vec::with_capacity(length);
        for j in 0..length {
            let mut w = Array4::<C64>::zeros((bond_dim[j], d, d, bond_dim[j + 1]));
            for s in 0..d {
                w[[0, s, s, 0]] = ONE;
                w[[1, s, s, 1]] = ONE;
            }
            for (t, (start, f)) in factors.iter().enumerate() {
                if j < *start || j >= start + f.len() {
                    continue;
                }
                let k = j - start;
                let ft = &f[k];
                let (rl, _, _, rr) = ft.dim();
                let first = k == 0;
                let last = k + 1 == f.len();
                for a in 0..rl {
                    let row = if first { 0 } else { offset[t][j] + a };
                    for c in 0..rr {
                        let col = if last { 1 } else { offset[t][j + 1] + c };
                        let mut blk = w.slice_mut(s![row, .., .., col]);
                        blk += &ft.slice(s![a, .., .., c]);
                    }
                }
            }
            tensors.push(w);
        }
        tensors[0] = tensors[0].slice(s![0..1, .., .., ..]).to_owned();
        let last = length - 1;
        tensors[last] = tensors[last].slice(s![.., .., .., 1..2]).to_owned();
        Mpo::new(tensors)
    }

    /// Dense matrix; only for short chains.
    pub fn to_dense(&self) -> Result<Mat> {
        let n = self
            .d
            .checked_pow(self.len() as u32)
            .filter(|&n| n <= 3usize.pow(8))
            .ok_or_else(|| Error::TooLarge(format!("dense operator on {} sites", self.len())))?;
        let d = self.d;
        // acc: (rows, cols, w)
        let mut acc = Array3::<C64>::from_elem((1, 1, 1), ONE);
        for t in &self.tensors {
            let (r, c, w) = acc.dim();
            let (_, _, _, wr) = t.dim();
            let m = mat(&acc, r * c, w).dot(&mat4(t, w, d * d * wr));
            let m = m.reshape_c((r, c, d, d, wr)).permuted_axes([0, 2, 1, 3, 4]);
            acc = m.as_standard_layout().into_owned().reshape_c((r * d, c * d, wr));
        }
        debug_assert_eq!(acc.dim().0, n);
        Ok(acc.index_axis(Axis(2), 0).to_owned())
    }

    pub fn scale(&mut self, c: C64) {
        self.tensors[0].mapv_inplace(|z| z * c);
    }

    /// `a self + b other` by direct sum of the bond spaces.
    pub fn add(&self, a: C64, other: &Mpo, b: C64) -> Result<Mpo> {
        let l = self.len();
        if other.len() != l || other.d != self.d {
            return Err(Error::Dimension("adding MPOs of different shapes".into()));
        }
        let d = self.d;
        if l == 1 {
            return Mpo::new(vec![self.tensors[0].mapv(|z| z * a) + other.tensors[0].mapv(|z| z * b)]);
        }
        let mut tensors = Vec::with_capacity(l);
        for j in 0..l {
            let (al, _, _, ar) = self.tensors[j].dim();
            let (bl, _, _, br) = other.tensors[j].dim();
            let t = if j == 0 {
                let mut t = Array4::zeros((1, d, d, ar + br));
                t.slice_mut(s![.., .., .., ..ar]).assign(&self.tensors[j].mapv(|z| z * a));
                t.slice_mut(s![.., .., .., ar..]).assign(&other.tensors[j].mapv(|z| z * b));
                t
            } else if j == l - 1 {
                let mut t = Array4::zeros((al + bl, d, d, 1));
                t.slice_mut(s![..al, .., .., ..]).assign(&self.tensors[j]);
                t.slice_mut(s![al.., .., .., ..]).assign(&other.tensors[j]);
                t
            } else {
                let mut t = Array4::zeros((al + bl, d, d, ar + br));
                t.slice_mut(s![..al, .., .., ..ar]).assign(&self.tensors[j]);
                t.slice_mut(s![al.., .., .., ar..]).assign(&other.tensors[j]);
                t
            };
            tensors.push(t);
        }
        let mut out = Mpo::new(tensors)?;
        out.log = self.log.clone();
        out.log.merge(&other.log);
        Ok(out)
    }

    /// SVD compression in the Frobenius norm: left-orthogonalize by QR, then
    /// truncate right to left keeping relative discarded weight below
    /// `cutoff` per bond. Never increases a bond dimension.
    pub fn compressed(mut self, cutoff: f64, max_bond: usize) -> Result<Mpo> {
        let l = self.len();
        let d = self.d;
        let dd = d * d;
        for j in 0..l - 1 {
            let (wl, _, _, wr) = self.tensors[j].dim();
            let (q, r) = qr(&mat4(&self.tensors[j], wl * dd, wr))?;
            let k = q.ncols();
            self.tensors[j] = q.reshape_c((wl, d, d, k));
            let (nl, _, _, nr) = self.tensors[j + 1].dim();
            let next = r.dot(&mat4(&self.tensors[j + 1], nl, dd * nr));
            self.tensors[j + 1] = next.reshape_c((k, d, d, nr));
        }
        for j in (1..l).rev() {
            let (wl, _, _, wr) = self.tensors[j].dim();
            let (u, sv, vt) = svd(&mat4(&self.tensors[j], wl, dd * wr))?;
            let (r, w) = truncation_rank(sv.as_slice().unwrap(), cutoff, max_bond);
            self.log.record(w, r);
            self.tensors[j] = vt.slice(s![..r, ..]).to_owned().reshape_c((r, d, d, wr));
            let mut us = u.slice(s![.., ..r]).to_owned();
            for (i, mut col) in us.axis_iter_mut(Axis(1)).enumerate() {
                col.mapv_inplace(|z| z * sv[i]);
            }
            let (pl, _, _, pr) = self.tensors[j - 1].dim();
            let prev = mat4(&self.tensors[j - 1], pl * dd, pr).dot(&us);
            self.tensors[j - 1] = prev.reshape_c((pl, d, d, r));
        }
        Ok(self)
    }

    /// `<bra|self|ket>`.
    pub fn matrix_element(&self, bra: &Mps, ket: &Mps) -> Result<C64> {
        if bra.len() != self.len() || ket.len() != self.len() {
            return Err(Error::Dimension("MPO and MPS lengths differ".into()));
        }
        let mut env = trivial_env();
        for j in 0..self.len() {
            env = left_update(&env, &bra.tensors[j], &self.tensors[j], &ket.tensors[j]);
        }
        Ok(env[[0, 0, 0]])
    }

    /// `<psi|self|psi> / <psi|psi>`.
    pub fn expectation(&self, psi: &Mps) -> Result<C64> {
        let n = psi.overlap(psi)?;
        Ok(self.matrix_element(psi, psi)? / n)
    }

    /// Spatially reflected operator (site `j` becomes `L-1-j`).
    pub fn reversed(&self) -> Mpo {
        let tensors = self
            .tensors
            .iter()
            .rev()
            .map(|t| t.view().permuted_axes([3, 1, 2, 0]).as_standard_layout().into_owned())
            .collect();
        Mpo { tensors, d: self.d, log: self.log.clone() }
    }
}

/// `sum_n c_n op_n`, summed pairwise with a compression after each addition.
pub fn mpo_sum_compress(ops: &[Mpo], coefficients: &[C64], cutoff: f64, max_bond: usize) -> Result<Mpo> {
    if ops.is_empty() || ops.len() != coefficients.len() {
        return Err(Error::InvalidParameter(format!("{} operators with {} coefficients", ops.len(), coefficients.len())));
    }
    let mut acc = ops[0].clone();
    acc.scale(coefficients[0]);
    for (op, &c) in ops.iter().zip(coefficients).skip(1) {
        acc = acc.add(ONE, op, c)?.compressed(cutoff, max_bond)?;
    }
    Ok(acc)
}

/// `op |psi>` by a zip-up sweep followed by an SVD compression sweep.
///
/// The zip-up pass truncates with a ten times smaller cutoff and twice the
/// bond cap so the final compression controls the error. Exact when no
/// truncation is requested.
pub fn apply_mpo(op: &Mpo, psi: &Mps, trunc: &Truncation) -> Result<Mps> {
    let l = psi.len();
    if op.len() != l || op.d != psi.d {
        return Err(Error::Dimension("MPO and MPS shapes differ".into()));
    }
    let d = psi.d;
    let mut src = psi.clone();
    src.canonicalize(l - 1);
    // sweep right to left so the carry sits on already-orthogonal tensors
    let loose = Truncation { cutoff: trunc.cutoff * 0.1, max_chi: trunc.max_chi.saturating_mul(2) };
    let mut log = TruncationLog::default();
    let mut out: Vec<Array3<C64>> = vec![Array3::zeros((1, d, 1)); l];
    // carry (k, w, r): ket bond, mpo bond, new bond
    let mut carry = Array3::<C64>::from_elem((1, 1, 1), ONE);
    for j in (0..l).rev() {
        let a = &src.tensors[j];
        let w = &op.tensors[j];
        let (k, s_in, kp) = a.dim();
        let (wl, s_out, _, wr) = w.dim();
        let r = carry.dim().2;
        // A (k s, k') x carry (k', w' r) -> (k, s, w', r)
        let t = mat(a, k * s_in, kp).dot(&mat(&carry, kp, wr * r));
        // -> (k, r, w', s) x W as (w' s, w s_out)
        let t = t.reshape_c((k, s_in, wr, r)).permuted_axes([0, 3, 2, 1]);
        let wm = mat4(&w.view().permuted_axes([3, 2, 0, 1]), wr * s_in, wl * s_out);
        let t = mat4(&t, k * r, wr * s_in).dot(&wm);
        // (k, r, w, s_out) -> (k w, s_out r)
        let t = t.reshape_c((k, r, wl, s_out)).permuted_axes([0, 2, 3, 1]);
        let m = mat4(&t, k * wl, s_out * r);
        if j == 0 {
            out[0] = m.reshape_c((1, s_out, r));
            break;
        }
        let (u, sv, vt) = svd(&m)?;
        let (keep, wdisc) = truncation_rank(sv.as_slice().unwrap(), loose.cutoff, loose.max_chi);
        log.record(wdisc, keep);
        out[j] = vt.slice(s![..keep, ..]).to_owned().reshape_c((keep, s_out, r));
        let mut us = u.slice(s![.., ..keep]).to_owned();
        for (i, mut col) in us.axis_iter_mut(Axis(1)).enumerate() {
            col.mapv_inplace(|z| z * sv[i]);
        }
        carry = us.reshape_c((k, wl, keep));
    }
    let mut res = Mps::new(out)?;
    res.center = Some(0);
    res.compress_from_left_center(trunc)?;
    res.log.merge(&log);
    Ok(res)
}

impl Mps {
    /// Compression sweep for a state whose center is at site 0 and whose
    /// other tensors are right-orthogonal: truncate left to right.
    pub(crate) fn compress_from_left_center(&mut self, trunc: &Truncation) -> Result<()> {
        let l = self.len();
        for j in 0..l - 1 {
            let (cl, d, cr) = self.tensors[j].dim();
            let (u, sv, vt) = svd(&mat(&self.tensors[j], cl * d, cr))?;
            let (r, w) = truncation_rank(sv.as_slice().unwrap(), trunc.cutoff, trunc.max_chi);
            self.log.record_capped(w, r, trunc.max_chi);
            self.tensors[j] = u.slice(s![.., ..r]).to_owned().reshape_c((cl, d, r));
            let mut sv_t = vt.slice(s![..r, ..]).to_owned();
            for (i, mut row) in sv_t.axis_iter_mut(Axis(0)).enumerate() {
                row.mapv_inplace(|z| z * sv[i]);
            }
            let (nl, nd, nr) = self.tensors[j + 1].dim();
            let next = sv_t.dot(&mat(&self.tensors[j + 1], nl, nd * nr));
            self.tensors[j + 1] = next.reshape_c((r, nd, nr));
        }
        self.center = Some(l - 1);
        Ok(())
    }
}
