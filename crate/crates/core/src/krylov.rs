//! Lanczos eigensolver and Krylov matrix exponential for Hermitian operators
//! given only through a matrix-vector product.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{eigh_real, norm, random_vector, vdot, C64, Vector, ZERO};

#[derive(Clone, Debug)]
pub struct LanczosResult {
    pub values: Vec<f64>,
    pub vectors: Vec<Vector>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

fn orthogonalize(w: &mut Vector, basis: &[Vector]) {
    for _ in 0..2 {
        for v in basis {
            let c = vdot(v, w);
            if c != ZERO {
                w.zip_mut_with(v, |a, b| *a -= c * b);
            }
        }
    }
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> Array2<f64> {
    let m = alpha.len();
    let mut t = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        t[[i, i]] = alpha[i];
        if i + 1 < m {
            t[[i, i + 1]] = beta[i];
            t[[i + 1, i]] = beta[i];
        }
    }
    t
}

fn ritz_vector(basis: &[Vector], y: ndarray::ArrayView1<f64>) -> Vector {
    let mut v = Vector::zeros(basis[0].len());
    for (b, &c) in basis.iter().zip(y.iter()) {
        if c != 0.0 {
            v.zip_mut_with(b, |a, x| *a += x * c);
        }
    }
    let n = norm(&v);
    v.mapv(|z| z / n)
}

/// Lowest `count` eigenpairs by Lanczos with full reorthogonalization.
///
/// `dim` is the dimension of the space; when the Krylov space becomes
/// invariant before `count` pairs are resolved, it is extended by a
/// deterministic random vector orthogonal to the current basis.
pub fn lanczos_lowest<F>(
    matvec: F,
    v0: &Vector,
    dim: usize,
    count: usize,
    tol: f64,
    max_iter: usize,
) -> Result<LanczosResult>
where
    F: FnMut(&Vector) -> Vector,
{
    lanczos(matvec, v0, dim, count, tol, max_iter, true)
}

/// Like [`lanczos_lowest`], but returns the current Ritz pairs instead of an
/// error when `max_iter` is reached. Used for inner solves of sweeping
/// algorithms where each solve only has to improve on its start vector.
pub fn lanczos_lowest_relaxed<F>(
    matvec: F,
    v0: &Vector,
    dim: usize,
    count: usize,
    tol: f64,
    max_iter: usize,
) -> Result<LanczosResult>
where
    F: FnMut(&Vector) -> Vector,
{
    lanczos(matvec, v0, dim, count, tol, max_iter, false)
}

fn lanczos<F>(
    mut matvec: F,
    v0: &Vector,
    dim: usize,
    count: usize,
    tol: f64,
    max_iter: usize,
    strict: bool,
) -> Result<LanczosResult>
where
    F: FnMut(&Vector) -> Vector,
{
    if count == 0 || count > dim {
        return Err(Error::InvalidParameter(format!("cannot extract {count} eigenpairs from dimension {dim}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a2c);
    let n0 = norm(v0);
    let mut v = if n0 > 0.0 { v0.mapv(|z| z / n0) } else { random_vector(v0.len(), &mut rng) };
    let mut basis: Vec<Vector> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let max_iter = max_iter.min(dim);
    let mut best_res = f64::INFINITY;
    loop {
        let mut w = matvec(&v);
        let a = vdot(&v, &w).re;
        basis.push(v.clone());
        alpha.push(a);
        orthogonalize(&mut w, &basis);
        let b = norm(&w);
        let m = basis.len();
        let exhausted = m >= max_iter;
        let check = exhausted || b < 1e-12 || (m >= count && (m % 5 == 0 || m < 20));
        if check && m >= count {
            let (theta, y) = eigh_real(&tridiagonal(&alpha, &beta))?;
            let est: Vec<f64> = (0..count).map(|i| (b * y[[m - 1, i]]).abs()).collect();
            let worst = est.iter().cloned().fold(0.0, f64::max);
            if worst <= tol || exhausted || (b < 1e-12 && m == dim) {
                let mut vectors = Vec::with_capacity(count);
                let mut residuals = Vec::with_capacity(count);
                for i in 0..count {
                    let x = ritz_vector(&basis, y.column(i));
                    let hx = matvec(&x);
                    let r = &hx - &x.mapv(|z| z * theta[i]);
                    residuals.push(norm(&r));
                    vectors.push(x);
                }
                let worst_true = residuals.iter().cloned().fold(0.0, f64::max);
                best_res = best_res.min(worst_true);
                if worst_true <= tol || (!strict && (exhausted || m == dim)) {
                    return Ok(LanczosResult {
                        values: theta.iter().take(count).cloned().collect(),
                        vectors,
                        residuals,
                        iterations: m,
                    });
                }
                if exhausted || m == dim {
                    return Err(Error::NoConvergence { iterations: m, residual: best_res });
                }
            }
        }
        if b < 1e-12 {
            // invariant subspace: restart with a fresh orthogonal direction
            let mut r = random_vector(v.len(), &mut rng);
            orthogonalize(&mut r, &basis);
            let nr = norm(&r);
            if nr < 1e-10 {
                return Err(Error::NoConvergence { iterations: m, residual: best_res });
            }
            beta.push(0.0);
            v = r.mapv(|z| z / nr);
        } else {
            beta.push(b);
            v = w.mapv(|z| z / b);
        }
    }
}

/// `exp(tau H) v` in a Krylov space built from `v`, stopping when the
/// standard a posteriori estimate `|beta_m [exp(tau T)]_{m,0}| * |v|` drops
/// below `tol`. Returns the result and the Krylov dimension used.
pub fn expm_krylov<F>(mut matvec: F, v: &Vector, tau: C64, tol: f64, max_dim: usize) -> Result<(Vector, usize)>
where
    F: FnMut(&Vector) -> Vector,
{
    let nv = norm(v);
    if nv == 0.0 {
        return Ok((v.clone(), 0));
    }
    let max_dim = max_dim.min(v.len()).max(1);
    let mut basis: Vec<Vector> = vec![v.mapv(|z| z / nv)];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    loop {
        let m = basis.len();
        let mut w = matvec(&basis[m - 1]);
        alpha.push(vdot(&basis[m - 1], &w).re);
        orthogonalize(&mut w, &basis);
        let b = norm(&w);
        let (theta, q) = eigh_real(&tridiagonal(&alpha, &beta))?;
        // coefficients c = Q exp(tau Theta) Q^T e_0
        let phase: Array1<C64> = theta.mapv(|t| (tau * t).exp());
        let coef: Vec<C64> = (0..m)
            .map(|i| (0..m).map(|k| q[[i, k]] * phase[k] * q[[0, k]]).sum())
            .collect();
        let err = b * coef[m - 1].norm() * nv;
        if err <= tol || b < 1e-13 || m >= max_dim {
            if err > tol && b >= 1e-13 {
                return Err(Error::NoConvergence { iterations: m, residual: err });
            }
            let mut out = Vector::zeros(v.len());
            for (bv, c) in basis.iter().zip(coef.iter()) {
                out.zip_mut_with(bv, |a, x| *a += x * c * nv);
            }
            return Ok((out, m));
        }
        beta.push(b);
        basis.push(w.mapv(|z| z / b));
    }
}

/// Like [`expm_krylov`] but splits `tau` into equal substeps until each
/// substep converges within `max_dim`.
pub fn expm_krylov_adaptive<F>(mut matvec: F, v: &Vector, tau: C64, tol: f64, max_dim: usize) -> Result<Vector>
where
    F: FnMut(&Vector) -> Vector,
{
    let mut pieces = 1usize;
    'outer: loop {
        let mut x = v.clone();
        let sub = tau / pieces as f64;
        let sub_tol = tol / pieces as f64;
        for _ in 0..pieces {
            match expm_krylov(&mut matvec, &x, sub, sub_tol, max_dim) {
                Ok((y, _)) => x = y,
                Err(Error::NoConvergence { .. }) if pieces < 1 << 12 => {
                    pieces *= 2;
                    continue 'outer;
                }
                Err(e) => return Err(e),
            }
        }
        return Ok(x);
    }
}
