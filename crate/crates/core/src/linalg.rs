//! Dense complex linear algebra helpers on top of ndarray / LAPACK.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, ShapeBuilder};
use ndarray_linalg::{Eigh, JobSvd, QR, SVDDC, SVD, UPLO};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
pub use num_complex::Complex64 as C64;

pub type Mat = Array2<C64>;
pub type Vector = Array1<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const IM: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn eye(n: usize) -> Mat {
    Mat::eye(n)
}

pub fn dagger(a: &Mat) -> Mat {
    a.t().mapv(|z| z.conj())
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Mat::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let x = a[[i, j]];
            if x == ZERO {
                continue;
            }
            out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc])
                .assign(&b.mapv(|y| x * y));
        }
    }
    out
}

pub fn trace(a: &Mat) -> C64 {
    a.diag().sum()
}

pub fn max_abs(a: &Mat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn frobenius(a: &Mat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn is_hermitian(a: &Mat, tol: f64) -> bool {
    a.is_square() && max_abs(&(a - &dagger(a))) <= tol
}

/// `<a|b>` with the first argument conjugated.
pub fn vdot(a: &Vector, b: &Vector) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &Vector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(a: &Mat) -> Result<(Array1<f64>, Mat)> {
    // complex eigh on row-major input returns conjugated eigenvectors,
    // so hand LAPACK a column-major copy
    let h = (a + &dagger(a)).mapv(|z| z * 0.5);
    let mut hf = Mat::zeros(a.dim().f());
    hf.assign(&h);
    let (w, v) = hf.eigh(UPLO::Upper)?;
    Ok((w, v))
}

pub fn eigh_real(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let (w, v) = a.eigh(UPLO::Upper)?;
    Ok((w, v))
}

/// Thin SVD `a = u diag(s) vt`, singular values descending.
pub fn svd(a: &Mat) -> Result<(Mat, Array1<f64>, Mat)> {
    if a.is_empty() {
        return Err(Error::Dimension("svd of empty matrix".into()));
    }
    match a.svddc(JobSvd::Some) {
        Ok((Some(u), s, Some(vt))) => Ok((u, s, vt)),
        _ => {
            let (u, s, vt) = a.svd(true, true)?;
            let (u, vt) = (u.unwrap(), vt.unwrap());
            let k = s.len();
            Ok((
                u.slice(s![.., ..k]).to_owned(),
                s,
                vt.slice(s![..k, ..]).to_owned(),
            ))
        }
    }
}

/// Full SVD with square unitary factors.
pub fn svd_full(a: &Mat) -> Result<(Mat, Array1<f64>, Mat)> {
    let (u, s, vt) = a.svd(true, true)?;
    Ok((u.unwrap(), s, vt.unwrap()))
}

/// Thin QR `a = q r` with q of shape (m, min(m, n)).
pub fn qr(a: &Mat) -> Result<(Mat, Mat)> {
    let (q, r) = a.qr()?;
    Ok((q, r))
}

/// Number of singular values to keep and the relative discarded weight.
///
/// Keeps the smallest rank whose discarded weight `sum_{i>=r} s_i^2 / sum s^2`
/// does not exceed `cutoff`, capped at `max_keep` and never below one.
pub fn truncation_rank(s: &[f64], cutoff: f64, max_keep: usize) -> (usize, f64) {
    let total: f64 = s.iter().map(|x| x * x).sum();
    if total == 0.0 || s.is_empty() {
        return (1, 0.0);
    }
    let mut tail = 0.0;
    let mut r = s.len();
    while r > 1 {
        let next = tail + s[r - 1] * s[r - 1];
        if next / total > cutoff {
            break;
        }
        tail = next;
        r -= 1;
    }
    let max_keep = max_keep.max(1);
    if r > max_keep {
        tail = s[max_keep..].iter().map(|x| x * x).sum();
        r = max_keep;
    }
    (r, tail / total)
}

/// Haar-random unitary via QR of a complex Ginibre matrix with the phase fix.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat {
    let g = Mat::from_shape_fn((n, n), |_| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let (mut q, r) = qr(&g).expect("qr of ginibre matrix");
    for j in 0..n {
        let d = r[[j, j]];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        q.column_mut(j).mapv_inplace(|z| z * ph);
    }
    q
}

pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat {
    let g = Mat::from_shape_fn((n, n), |_| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    (&g + &dagger(&g)).mapv(|z| z * 0.5)
}

pub fn random_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vector {
    let v = Vector::from_shape_fn(n, |_| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let nv = norm(&v);
    v.mapv(|z| z / nv)
}

/// Random density matrix `G G^dag / Tr` from a Ginibre matrix of given rank.
pub fn random_density_matrix<R: Rng + ?Sized>(n: usize, rank: usize, rng: &mut R) -> Mat {
    let g = Mat::from_shape_fn((n, rank), |_| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let rho = g.dot(&dagger(&g));
    let tr = trace(&rho);
    rho.mapv(|z| z / tr)
}

/// `exp(-i t H)` for Hermitian `H` via eigendecomposition.
pub fn expm_hermitian(h: &Mat, t: f64) -> Result<Mat> {
    let (w, v) = eigh(h)?;
    let mut vd = v.clone();
    for (j, mut col) in vd.axis_iter_mut(Axis(1)).enumerate() {
        let ph = C64::from_polar(1.0, -w[j] * t);
        col.mapv_inplace(|z| z * ph);
    }
    Ok(vd.dot(&dagger(&v)))
}

/// Square root of a positive semidefinite matrix; eigenvalues above `-1e-12`
/// are clamped to zero, more negative ones are rejected. Eigenvalues within
/// the rounding floor `n eps max|w|` are zero too, since their square roots
/// would be pure noise of order `sqrt(eps)`.
pub fn sqrtm_psd(a: &Mat) -> Result<Mat> {
    let (w, v) = eigh(a)?;
    let floor = w.len() as f64 * f64::EPSILON * w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut vd = v.clone();
    for (j, mut col) in vd.axis_iter_mut(Axis(1)).enumerate() {
        let x = w[j];
        if x < -1e-12 {
            return Err(Error::InvalidParameter(format!(
                "matrix not positive semidefinite (eigenvalue {x:e})"
            )));
        }
        let r = if x > floor { x.sqrt() } else { 0.0 };
        col.mapv_inplace(|z| z * r);
    }
    Ok(vd.dot(&dagger(&v)))
}

pub fn outer(a: &Vector, b: &Vector) -> Mat {
    Mat::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j].conj())
}

pub fn matvec(a: &ArrayView2<C64>, v: &Vector) -> Vector {
    a.dot(v)
}
