//! Environment updates and effective-Hamiltonian products, each written as a
//! short chain of matrix multiplications.
//!
//! Layouts: MPS `(chi_l, s, chi_r)`, MPO `(w_l, s_out, s_in, w_r)`,
//! environments `(chi_bra, w, chi_ket)`.

use ndarray::{Array3, Array4, Array5};

use super::{ReshapeC, mat, mat4, Mpo, Mps};
use crate::linalg::{C64, ONE};

fn mat5(t: Array5<C64>, rows: usize, cols: usize) -> crate::linalg::Mat {
    t.as_standard_layout().into_owned().into_shape_with_order((rows, cols)).expect("reshape")
}

pub(crate) fn trivial_env() -> Array3<C64> {
    Array3::from_elem((1, 1, 1), ONE)
}

/// MPO site tensor permuted to `(w_l, s_in, s_out, w_r)` and matricized as
/// `(w_l s_in, s_out w_r)`; used when contracting from the left.
pub(crate) fn w_left(w: &Array4<C64>) -> crate::linalg::Mat {
    let (wl, so, si, wr) = w.dim();
    mat4(&w.view().permuted_axes([0, 2, 1, 3]), wl * si, so * wr)
}

/// `L'(b', w', k') = sum conj(B[b,s',b']) L[b,w,k] W[w,s',s,w'] A[k,s,k']`.
pub(crate) fn left_update(env: &Array3<C64>, bra: &Array3<C64>, w: &Array4<C64>, ket: &Array3<C64>) -> Array3<C64> {
    let (b, wd, k) = env.dim();
    let (_, s, kp) = ket.dim();
    let (_, so, _, wp) = w.dim();
    let bp = bra.dim().2;
    let t1 = mat(env, b * wd, k).dot(&mat(ket, k, s * kp));
    let t1 = t1.reshape_c((b, wd, s, kp)).permuted_axes([0, 3, 1, 2]);
    let t2 = mat4(&t1, b * kp, wd * s).dot(&w_left(w));
    let t2 = t2.reshape_c((b, kp, so, wp)).permuted_axes([0, 2, 1, 3]);
    let braconj = mat(bra, b * so, bp).t().mapv(|z| z.conj());
    let t3 = braconj.dot(&mat4(&t2, b * so, kp * wp));
    t3.reshape_c((bp, kp, wp)).permuted_axes([0, 2, 1]).as_standard_layout().into_owned()
}

/// `R(b, w, k) = sum A[k,s,k'] W[w,s',s,w'] conj(B[b,s',b']) R'[b',w',k']`.
pub(crate) fn right_update(env: &Array3<C64>, bra: &Array3<C64>, w: &Array4<C64>, ket: &Array3<C64>) -> Array3<C64> {
    let (bp, wp, kp) = env.dim();
    let (k, s, _) = ket.dim();
    let (wd, so, _, _) = w.dim();
    let b = bra.dim().0;
    let r = mat(&env.view().permuted_axes([2, 0, 1]), kp, bp * wp);
    let t1 = mat(ket, k * s, kp).dot(&r);
    let t1 = t1.reshape_c((k, s, bp, wp)).permuted_axes([0, 2, 1, 3]);
    let wr = mat4(&w.view().permuted_axes([2, 3, 0, 1]), s * wp, wd * so);
    let t2 = mat4(&t1, k * bp, s * wp).dot(&wr);
    let t2 = t2.reshape_c((k, bp, wd, so)).permuted_axes([0, 2, 3, 1]);
    let bc = mat(&bra.view().permuted_axes([1, 2, 0]).mapv(|z| z.conj()), so * bp, b);
    let t3 = mat4(&t2, k * wd, so * bp).dot(&bc);
    t3.reshape_c((k, wd, b)).permuted_axes([2, 1, 0]).as_standard_layout().into_owned()
}

/// `y[b,s',b'] = sum L[b,w,k] x[k,s,k'] W[w,s',s,w'] R[b',w',k']`.
pub(crate) fn one_site_apply(env_l: &Array3<C64>, w: &Array4<C64>, env_r: &Array3<C64>, x: &Array3<C64>) -> Array3<C64> {
    let (b, wd, k) = env_l.dim();
    let (_, s, kp) = x.dim();
    let (_, so, _, wp) = w.dim();
    let bp = env_r.dim().0;
    let t1 = mat(env_l, b * wd, k).dot(&mat(x, k, s * kp));
    let t1 = t1.reshape_c((b, wd, s, kp)).permuted_axes([0, 3, 1, 2]);
    let t2 = mat4(&t1, b * kp, wd * s).dot(&w_left(w));
    let t2 = t2.reshape_c((b, kp, so, wp)).permuted_axes([0, 2, 1, 3]);
    let r = mat(&env_r.view().permuted_axes([2, 1, 0]), kp * wp, bp);
    let t3 = mat4(&t2, b * so, kp * wp).dot(&r);
    t3.reshape_c((b, so, bp))
}

/// Two-site effective Hamiltonian applied to `x[k, s1, s2, k']`.
pub(crate) fn two_site_apply(
    env_l: &Array3<C64>,
    w1: &Array4<C64>,
    w2: &Array4<C64>,
    env_r: &Array3<C64>,
    x: &Array4<C64>,
) -> Array4<C64> {
    let (b, wd, k) = env_l.dim();
    let (_, s1, s2, kp) = x.dim();
    let (_, t1d, _, v) = w1.dim();
    let (_, t2d, _, wp) = w2.dim();
    let bp = env_r.dim().0;
    let x2 = mat4(x, k, s1 * s2 * kp);
    let a = mat(env_l, b * wd, k).dot(&x2);
    // (b, w, s1, s2, k') -> (b, s2, k', w, s1)
    let a = a.reshape_c((b, wd, s1, s2, kp)).permuted_axes([0, 3, 4, 1, 2]);
    let a = mat5(a, b * s2 * kp, wd * s1).dot(&w_left(w1));
    // (b, s2, k', t1, v) -> (b, t1, k', v, s2)
    let a = a.reshape_c((b, s2, kp, t1d, v)).permuted_axes([0, 3, 2, 4, 1]);
    let a = mat5(a, b * t1d * kp, v * s2).dot(&w_left(w2));
    // (b, t1, k', t2, w') -> (b, t1, t2, k', w')
    let a = a.reshape_c((b, t1d, kp, t2d, wp)).permuted_axes([0, 1, 3, 2, 4]);
    let r = mat(&env_r.view().permuted_axes([2, 1, 0]), kp * wp, bp);
    let y = mat5(a, b * t1d * t2d, kp * wp).dot(&r);
    y.reshape_c((b, t1d, t2d, bp))
}

/// Cached left and right environments of `<psi|H|psi>`. `left[j]` covers
/// sites `0..j`, `right[j]` covers sites `j+1..L`.
#[derive(Clone, Debug)]
pub struct Environments {
    pub left: Vec<Array3<C64>>,
    pub right: Vec<Array3<C64>>,
}

impl Environments {
    /// Build all right environments for a state with center at site 0.
    pub fn new(psi: &Mps, h: &Mpo) -> Self {
        let l = psi.len();
        let mut right = vec![trivial_env(); l];
        for j in (0..l - 1).rev() {
            right[j] = right_update(&right[j + 1], &psi.tensors[j + 1], &h.tensors[j + 1], &psi.tensors[j + 1]);
        }
        let left = vec![trivial_env(); l];
        Environments { left, right }
    }

    pub fn update_left(&mut self, psi: &Mps, h: &Mpo, j: usize) {
        self.left[j + 1] = left_update(&self.left[j], &psi.tensors[j], &h.tensors[j], &psi.tensors[j]);
    }

    pub fn update_right(&mut self, psi: &Mps, h: &Mpo, j: usize) {
        self.right[j - 1] = right_update(&self.right[j], &psi.tensors[j], &h.tensors[j], &psi.tensors[j]);
    }
}
