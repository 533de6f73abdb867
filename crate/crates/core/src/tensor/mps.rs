use ndarray::{s, Array2, Array3, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{ReshapeC, mat, Truncation, TruncationLog};
use crate::error::{Error, Result};
use crate::linalg::{dagger, qr, svd, truncation_rank, Mat, Vector, C64, ONE, ZERO};

/// Open-boundary matrix product state with site tensors of shape
/// `(chi_left, d, chi_right)`. Site 0 is the most significant digit of the
/// dense configuration index.
#[derive(Clone, Debug)]
pub struct Mps {
    pub tensors: Vec<Array3<C64>>,
    pub d: usize,
    /// Orthogonality center, if the state is known to be in mixed canonical
    /// form around it.
    pub center: Option<usize>,
    pub log: TruncationLog,
}

impl Mps {
    pub fn new(tensors: Vec<Array3<C64>>) -> Result<Self> {
        if tensors.is_empty() {
            return Err(Error::Dimension("empty MPS".into()));
        }
        let d = tensors[0].dim().1;
        for (j, t) in tensors.iter().enumerate() {
            if t.dim().1 != d {
                return Err(Error::Dimension(format!("site {j} has local dimension {}", t.dim().1)));
            }
            if j + 1 < tensors.len() && t.dim().2 != tensors[j + 1].dim().0 {
                return Err(Error::Dimension(format!("bond {j} mismatch")));
            }
        }
        if tensors[0].dim().0 != 1 || tensors[tensors.len() - 1].dim().2 != 1 {
            return Err(Error::Dimension("boundary bonds must have dimension 1".into()));
        }
        Ok(Mps { tensors, d, center: None, log: TruncationLog::default() })
    }

    pub fn product(digits: &[u8], d: usize) -> Self {
        let tensors = digits
            .iter()
            .map(|&x| {
                let mut t = Array3::zeros((1, d, 1));
                t[[0, x as usize, 0]] = ONE;
                t
            })
            .collect();
        Mps { tensors, d, center: Some(0), log: TruncationLog::default() }
    }

    /// Random normalized state with bond dimensions capped at `chi`.
    pub fn random<R: Rng + ?Sized>(length: usize, d: usize, chi: usize, rng: &mut R) -> Self {
        let mut dims = vec![1usize; length + 1];
        for b in 1..length {
            let left = d.saturating_pow(b as u32);
            let right = d.saturating_pow((length - b) as u32);
            dims[b] = chi.min(left).min(right);
        }
        let tensors = (0..length)
            .map(|j| {
                Array3::from_shape_fn((dims[j], d, dims[j + 1]), |_| {
                    C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
                })
            })
            .collect();
        let mut m = Mps { tensors, d, center: None, log: TruncationLog::default() };
        m.normalize().expect("random MPS normalizes");
        m
    }

    /// Exact (up to `trunc`) MPS of a dense vector by sequential SVDs.
    pub fn from_dense(psi: &Vector, length: usize, d: usize, trunc: &Truncation) -> Result<Self> {
        if d.checked_pow(length as u32) != Some(psi.len()) {
            return Err(Error::Dimension(format!("vector of length {} is not {d}^{length}", psi.len())));
        }
        let mut tensors = Vec::with_capacity(length);
        let mut log = TruncationLog::default();
        let mut rest = psi.clone().into_shape_with_order((1, psi.len())).unwrap();
        for j in 0..length - 1 {
            let chi = rest.nrows();
            let cols = rest.ncols() / d;
            let m = rest.reshape_c((chi * d, cols));
            let (u, sv, vt) = svd(&m)?;
            let (r, w) = truncation_rank(sv.as_slice().unwrap(), trunc.cutoff, trunc.max_chi);
            log.record(w, r);
            tensors.push(u.slice(s![.., ..r]).to_owned().reshape_c((chi, d, r)));
            let mut next = vt.slice(s![..r, ..]).to_owned();
            for (i, mut row) in next.axis_iter_mut(Axis(0)).enumerate() {
                row.mapv_inplace(|z| z * sv[i]);
            }
            rest = next;
            let _ = j;
        }
        let chi = rest.nrows();
        tensors.push(rest.reshape_c((chi, d, 1)));
        Ok(Mps { tensors, d, center: Some(length - 1), log })
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Bond dimensions between sites `j` and `j + 1`, `j = 0..L-1`.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.len() - 1].iter().map(|t| t.dim().2).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Dense vector; only for short chains.
    pub fn to_dense(&self) -> Result<Vector> {
        let dim = self
            .d
            .checked_pow(self.len() as u32)
            .filter(|&n| n <= 3usize.pow(13))
            .ok_or_else(|| Error::TooLarge(format!("{}^{} amplitudes", self.d, self.len())))?;
        let mut acc: Array2<C64> = Array2::from_elem((1, 1), ONE);
        for t in &self.tensors {
            let (cl, d, cr) = t.dim();
            let rows = acc.nrows();
            let prod = acc.dot(&mat(t, cl, d * cr));
            acc = prod.reshape_c((rows * d, cr));
        }
        debug_assert_eq!(acc.nrows(), dim);
        Ok(acc.column(0).to_owned())
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &Mps) -> Result<C64> {
        if self.len() != other.len() || self.d != other.d {
            return Err(Error::Dimension("overlap of MPS with different shapes".into()));
        }
        let mut e: Array2<C64> = Array2::from_elem((1, 1), ONE);
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            let (bl, d, br) = a.dim();
            let (kl, _, kr) = b.dim();
            // (bra_l, ket_l) x (ket_l, d ket_r) -> (bra_l d, ket_r)
            let t = e.dot(&mat(b, kl, d * kr)).reshape_c((bl * d, kr));
            e = dagger(&mat(a, bl * d, br)).dot(&t);
        }
        Ok(e[[0, 0]])
    }

    pub fn norm(&self) -> f64 {
        if let Some(c) = self.center {
            return self.tensors[c].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        }
        self.overlap(self).map(|z| z.re.max(0.0).sqrt()).unwrap_or(0.0)
    }

    /// QR step moving the center from `j` to `j + 1`.
    fn shift_right(&mut self, j: usize) {
        let (cl, d, cr) = self.tensors[j].dim();
        let (q, r) = qr(&mat(&self.tensors[j], cl * d, cr)).expect("qr");
        let k = q.ncols();
        self.tensors[j] = q.reshape_c((cl, d, k));
        let (nl, nd, nr) = self.tensors[j + 1].dim();
        let next = r.dot(&mat(&self.tensors[j + 1], nl, nd * nr));
        self.tensors[j + 1] = next.reshape_c((k, nd, nr));
    }

    /// QR step (on the adjoint) moving the center from `j` to `j - 1`.
    fn shift_left(&mut self, j: usize) {
        let (cl, d, cr) = self.tensors[j].dim();
        let m = mat(&self.tensors[j], cl, d * cr);
        let (q, r) = qr(&dagger(&m)).expect("qr");
        // m = r^dag q^dag
        let k = q.ncols();
        self.tensors[j] = dagger(&q).reshape_c((k, d, cr));
        let (pl, pd, pr) = self.tensors[j - 1].dim();
        let prev = mat(&self.tensors[j - 1], pl * pd, pr).dot(&dagger(&r));
        self.tensors[j - 1] = prev.reshape_c((pl, pd, k));
    }

    /// Bring the state into mixed canonical form with center `c`.
    pub fn canonicalize(&mut self, c: usize) {
        let l = self.len();
        match self.center {
            Some(cur) => {
                for j in cur..c {
                    self.shift_right(j);
                }
                for j in (c + 1..=cur).rev() {
                    self.shift_left(j);
                }
            }
            None => {
                for j in 0..c {
                    self.shift_right(j);
                }
                for j in (c + 1..l).rev() {
                    self.shift_left(j);
                }
            }
        }
        self.center = Some(c);
    }

    pub fn normalize(&mut self) -> Result<f64> {
        if self.center.is_none() {
            self.canonicalize(0);
        }
        let c = self.center.unwrap();
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Degenerate("MPS has zero norm".into()));
        }
        self.tensors[c].mapv_inplace(|z| z / n);
        Ok(n)
    }

    pub fn scale(&mut self, c: C64) {
        let j = self.center.unwrap_or(0);
        self.tensors[j].mapv_inplace(|z| z * c);
    }

    /// Split a two-site tensor `(chi_l, d, d, chi_r)` on sites `j, j+1` by a
    /// truncated SVD. The singular values go right (`center_right`) or left.
    pub fn set_two_site(&mut self, j: usize, theta: &ndarray::Array4<C64>, trunc: &Truncation, center_right: bool) -> Result<f64> {
        let (cl, d1, d2, cr) = theta.dim();
        let m = theta.as_standard_layout().into_owned().reshape_c((cl * d1, d2 * cr));
        let (u, sv, vt) = svd(&m)?;
        let (r, w) = truncation_rank(sv.as_slice().unwrap(), trunc.cutoff, trunc.max_chi);
        self.log.record(w, r);
        // keep the norm of the kept part equal to the norm of theta
        let kept: f64 = sv.iter().take(r).map(|x| x * x).sum::<f64>().sqrt();
        let full: f64 = sv.iter().map(|x| x * x).sum::<f64>().sqrt();
        let rescale = if kept > 0.0 { full / kept } else { 1.0 };
        let mut u = u.slice(s![.., ..r]).to_owned();
        let mut vt = vt.slice(s![..r, ..]).to_owned();
        if center_right {
            for (i, mut row) in vt.axis_iter_mut(Axis(0)).enumerate() {
                row.mapv_inplace(|z| z * sv[i] * rescale);
            }
        } else {
            for (i, mut col) in u.axis_iter_mut(Axis(1)).enumerate() {
                col.mapv_inplace(|z| z * sv[i] * rescale);
            }
        }
        self.tensors[j] = u.reshape_c((cl, d1, r));
        self.tensors[j + 1] = vt.reshape_c((r, d2, cr));
        self.center = Some(if center_right { j + 1 } else { j });
        Ok(w)
    }

    /// Contract sites `j, j+1` into `(chi_l, d, d, chi_r)`.
    pub fn two_site(&self, j: usize) -> ndarray::Array4<C64> {
        let (cl, d, cm) = self.tensors[j].dim();
        let (_, d2, cr) = self.tensors[j + 1].dim();
        mat(&self.tensors[j], cl * d, cm)
            .dot(&mat(&self.tensors[j + 1], cm, d2 * cr))
            .into_shape_with_order((cl, d, d2, cr))
            .unwrap()
    }

    /// Schmidt values across the bond between sites `b` and `b + 1`,
    /// normalized to unit total weight.
    pub fn schmidt_values(&mut self, b: usize) -> Result<Vec<f64>> {
        if b + 1 >= self.len() {
            return Err(Error::InvalidParameter(format!("no bond {b} in a chain of {}", self.len())));
        }
        self.canonicalize(b);
        let (cl, d, cr) = self.tensors[b].dim();
        let (_, sv, _) = svd(&mat(&self.tensors[b], cl * d, cr))?;
        let n: f64 = sv.iter().map(|x| x * x).sum::<f64>().sqrt();
        Ok(sv.iter().map(|x| x / n).filter(|&x| x > 0.0).collect())
    }

    /// Von Neumann entropy `-sum s^2 ln s^2` across bond `b`.
    pub fn entanglement_entropy(&mut self, b: usize) -> Result<f64> {
        let sv = self.schmidt_values(b)?;
        Ok(sv.iter().map(|s| s * s).filter(|&p| p > 1e-300).map(|p| -p * p.ln()).sum())
    }

    /// Entropies across every bond in one left-to-right sweep.
    pub fn entropy_profile(&mut self) -> Result<Vec<f64>> {
        (0..self.len() - 1).map(|b| self.entanglement_entropy(b)).collect()
    }

    /// Reduced density matrix of the contiguous window `start..start+width`,
    /// first window site most significant. Normalized to unit trace.
    pub fn reduced_density_matrix(&mut self, start: usize, width: usize) -> Result<Mat> {
        if width == 0 || start + width > self.len() {
            return Err(Error::InvalidParameter(format!("window {start}+{width} outside chain of {}", self.len())));
        }
        self.canonicalize(start);
        let d = self.d;
        let (cl, _, _) = self.tensors[start].dim();
        // theta: (chi_l, d^w, chi_r)
        let mut theta = mat(&self.tensors[start], cl * d, self.tensors[start].dim().2);
        let mut phys = d;
        for j in start + 1..start + width {
            let (ml, md, mr) = self.tensors[j].dim();
            theta = theta.dot(&mat(&self.tensors[j], ml, md * mr));
            phys *= md;
            theta = theta.reshape_c((cl * phys, mr));
        }
        let cr = theta.ncols();
        let t3 = theta.reshape_c((cl, phys, cr));
        let m = t3.permuted_axes([1, 0, 2]).as_standard_layout().into_owned().reshape_c((phys, cl * cr));
        let mut rho = m.dot(&dagger(&m));
        let tr: C64 = rho.diag().sum();
        if tr.norm() == 0.0 {
            return Err(Error::Degenerate("zero state".into()));
        }
        rho.mapv_inplace(|z| z / tr);
        Ok(rho)
    }

    /// SVD compression: left-canonicalize, then truncate right to left.
    /// Leaves the center at site 0.
    pub fn compress(&mut self, trunc: &Truncation) -> Result<()> {
        let l = self.len();
        self.canonicalize(l - 1);
        for j in (1..l).rev() {
            let (cl, d, cr) = self.tensors[j].dim();
            let m = mat(&self.tensors[j], cl, d * cr);
            let (u, sv, vt) = svd(&m)?;
            let (r, w) = truncation_rank(sv.as_slice().unwrap(), trunc.cutoff, trunc.max_chi);
            self.log.record(w, r);
            self.tensors[j] = vt.slice(s![..r, ..]).to_owned().reshape_c((r, d, cr));
            let mut us = u.slice(s![.., ..r]).to_owned();
            for (i, mut col) in us.axis_iter_mut(Axis(1)).enumerate() {
                col.mapv_inplace(|z| z * sv[i]);
            }
            let (pl, pd, pr) = self.tensors[j - 1].dim();
            let prev = mat(&self.tensors[j - 1], pl * pd, pr).dot(&us);
            self.tensors[j - 1] = prev.reshape_c((pl, pd, r));
        }
        self.center = Some(0);
        Ok(())
    }

    /// `a |self> + b |other>` by direct sum of bond spaces (no compression).
    pub fn add(&self, a: C64, other: &Mps, b: C64) -> Result<Mps> {
        let l = self.len();
        if other.len() != l || other.d != self.d {
            return Err(Error::Dimension("adding MPS of different shapes".into()));
        }
        let d = self.d;
        if l == 1 {
            let t = self.tensors[0].mapv(|z| z * a) + other.tensors[0].mapv(|z| z * b);
            return Mps::new(vec![t]);
        }
        let mut tensors = Vec::with_capacity(l);
        for j in 0..l {
            let (al, _, ar) = self.tensors[j].dim();
            let (bl, _, br) = other.tensors[j].dim();
            let t = if j == 0 {
                let mut t = Array3::zeros((1, d, ar + br));
                t.slice_mut(s![.., .., ..ar]).assign(&self.tensors[j].mapv(|z| z * a));
                t.slice_mut(s![.., .., ar..]).assign(&other.tensors[j].mapv(|z| z * b));
                t
            } else if j == l - 1 {
                let mut t = Array3::zeros((al + bl, d, 1));
                t.slice_mut(s![..al, .., ..]).assign(&self.tensors[j]);
                t.slice_mut(s![al.., .., ..]).assign(&other.tensors[j]);
                t
            } else {
                let mut t = Array3::zeros((al + bl, d, ar + br));
                t.slice_mut(s![..al, .., ..ar]).assign(&self.tensors[j]);
                t.slice_mut(s![al.., .., ar..]).assign(&other.tensors[j]);
                t
            };
            tensors.push(t);
        }
        Mps::new(tensors)
    }

    /// Apply an operator on the contiguous window `start..start+width`
    /// (first window site most significant) and re-split with `trunc`.
    pub fn apply_window_operator(&mut self, op: &Mat, start: usize, trunc: &Truncation) -> Result<()> {
        let d = self.d;
        let mut width = 0;
        let mut n = 1;
        while n < op.nrows() {
            n *= d;
            width += 1;
        }
        if n != op.nrows() || !op.is_square() || start + width > self.len() || width == 0 {
            return Err(Error::Dimension(format!("operator of size {} on window at {start}", op.nrows())));
        }
        self.canonicalize(start);
        let cl = self.tensors[start].dim().0;
        let mut theta = mat(&self.tensors[start], cl * d, self.tensors[start].dim().2);
        for j in start + 1..start + width {
            let (ml, md, mr) = self.tensors[j].dim();
            let rows = theta.nrows();
            theta = theta.dot(&mat(&self.tensors[j], ml, md * mr)).reshape_c((rows * md, mr));
        }
        let cr = theta.ncols();
        let t3 = theta.reshape_c((cl, n, cr));
        // (phys, cl cr)
        let m = t3.permuted_axes([1, 0, 2]).as_standard_layout().into_owned().reshape_c((n, cl * cr));
        let applied = op.dot(&m).reshape_c((n, cl, cr));
        let mut rest = applied.permuted_axes([1, 0, 2]).as_standard_layout().into_owned().reshape_c((cl, n * cr));
        // split site by site, left to right
        let mut left = cl;
        let mut remaining = n;
        for j in start..start + width - 1 {
            remaining /= d;
            let m = rest.reshape_c((left * d, remaining * cr));
            let (u, sv, vt) = svd(&m)?;
            let (r, w) = truncation_rank(sv.as_slice().unwrap(), trunc.cutoff, trunc.max_chi);
            self.log.record(w, r);
            self.tensors[j] = u.slice(s![.., ..r]).to_owned().reshape_c((left, d, r));
            let mut next = vt.slice(s![..r, ..]).to_owned();
            for (i, mut row) in next.axis_iter_mut(Axis(0)).enumerate() {
                row.mapv_inplace(|z| z * sv[i]);
            }
            rest = next;
            left = r;
        }
        self.tensors[start + width - 1] = rest.reshape_c((left, d, cr));
        self.center = Some(start + width - 1);
        Ok(())
    }

    /// Zero tensor check used by callers that build states incrementally.
    pub fn is_zero(&self) -> bool {
        self.tensors.iter().any(|t| t.iter().all(|&z| z == ZERO))
    }
}
