//! Species-resolved detection: MLWF reduced density matrices compared with
//! windows of a large-system state, mixed-state fidelity bounds and the
//! resonance lower bound.

use serde::{Deserialize, Serialize};

use crate::creation::support_window;
use crate::error::{Error, Result};
use crate::hilbert::reduced_density_matrix_dense;
use crate::linalg::{eigh, eye, is_hermitian, kron, sqrtm_psd, svd, trace, Mat, Vector, C64};
use crate::model::{LocalHamiltonian, D};
use crate::tensor::Mps;

/// Tolerance for Hermiticity, trace and negative eigenvalues of inputs.
const DM_TOL: f64 = 1e-10;

/// RDM of a species' MLWF on a window of `width` sites around its center.
#[derive(Clone, Debug)]
pub struct Detector {
    pub species: String,
    pub rho: Mat,
    pub width: usize,
}

impl Detector {
    pub fn new(species: &str, mlwf: &Vector, l: usize, center: usize, width: usize) -> Result<Self> {
        let window = support_window(l, center, width)?;
        let mut rho = reduced_density_matrix_dense(mlwf, l, &window)?;
        let tr = trace(&rho).re;
        if !(tr > 0.0) {
            return Err(Error::Degenerate("zero MLWF".into()));
        }
        rho.mapv_inplace(|z| z / tr);
        Ok(Detector { species: species.into(), rho, width })
    }

    pub fn purity(&self) -> f64 {
        purity(&self.rho)
    }

    /// First site of the window centered on `j`, if it fits in a chain of `length`.
    pub fn window_start(&self, j: usize, length: usize) -> Option<usize> {
        let h = self.width / 2;
        (j >= h && j + h < length).then(|| j - h)
    }

    /// `Tr[rho_phi rho_j]` with `rho_j` the state's RDM on the window centered
    /// on `j`.
    pub fn hs_overlap(&self, psi: &mut Mps, j: usize) -> Result<f64> {
        let start = self
            .window_start(j, psi.len())
            .ok_or_else(|| Error::InvalidParameter(format!("detector window around {j} leaves the chain")))?;
        let rho = psi.reduced_density_matrix(start, self.width)?;
        Ok(hs_overlap(&self.rho, &rho))
    }

    /// HS overlaps for every site; `None` where the window leaves the chain.
    pub fn hs_profile(&self, psi: &mut Mps) -> Result<Vec<Option<f64>>> {
        (0..psi.len())
            .map(|j| match self.window_start(j, psi.len()) {
                Some(_) => self.hs_overlap(psi, j).map(Some),
                None => Ok(None),
            })
            .collect()
    }
}

pub fn purity(rho: &Mat) -> f64 {
    hs_overlap(rho, rho)
}

/// `Tr[a b]` (real part) for Hermitian `a`, `b`.
pub fn hs_overlap(a: &Mat, b: &Mat) -> f64 {
    a.t().iter().zip(b.iter()).map(|(x, y)| x * y).sum::<C64>().re
}

/// Rejects matrices that are not Hermitian, unit-trace and PSD.
pub fn validate_density_matrix(rho: &Mat) -> Result<()> {
    if !rho.is_square() || !is_hermitian(rho, DM_TOL) {
        return Err(Error::InvalidParameter("density matrix is not Hermitian".into()));
    }
    let tr = trace(rho);
    if (tr.re - 1.0).abs() > DM_TOL * rho.nrows() as f64 || tr.im.abs() > DM_TOL {
        return Err(Error::InvalidParameter(format!("density matrix trace {tr}")));
    }
    let (w, _) = eigh(rho)?;
    if let Some(x) = w.iter().find(|&&x| x < -1e-12) {
        return Err(Error::InvalidParameter(format!("density matrix eigenvalue {x:e}")));
    }
    Ok(())
}

/// `(Tr sqrt(sqrt(r1) r2 sqrt(r1)))^2`, evaluated as `||sqrt(r1) sqrt(r2)||_1^2`.
pub fn uhlmann_fidelity(r1: &Mat, r2: &Mat) -> Result<f64> {
    if r1.dim() != r2.dim() {
        return Err(Error::Dimension(format!("{:?} vs {:?}", r1.dim(), r2.dim())));
    }
    validate_density_matrix(r1)?;
    validate_density_matrix(r2)?;
    // trace norm of sqrt(r1) sqrt(r2): singular values keep absolute
    // accuracy, square roots of a rounded kernel would not
    let prod = sqrtm_psd(r1)?.dot(&sqrtm_psd(r2)?);
    let (_, sv, _) = svd(&prod)?;
    let t = sv.sum();
    Ok(t * t)
}

/// Lower and upper bounds `Tr[r1 r2] <= F <= Tr[r1 r2] + sqrt(1 - Tr r1^2) sqrt(1 - Tr r2^2)`.
pub fn fidelity_bounds(r1: &Mat, r2: &Mat) -> (f64, f64) {
    let lower = hs_overlap(r1, r2);
    let delta = (1.0 - purity(r1)).max(0.0).sqrt() * (1.0 - purity(r2)).max(0.0).sqrt();
    (lower, lower + delta)
}

/// `1_{d^before} (x) op (x) 1_{d^after}`.
fn pad_operator(op: &Mat, before: usize, after: usize) -> Mat {
    let left = kron(&eye(D.pow(before as u32)), op);
    kron(&left, &eye(D.pow(after as u32)))
}

/// Evaluates `eps_j[O] = |<psi|O h_j|psi> - <Omega|O h_j|Omega>|` with `O`
/// centered on the center of `h_j`; both are embedded in the smallest
/// window covering their supports. `O = None` is the identity.
#[derive(Clone, Debug)]
pub struct EpsilonFunctional {
    /// Per term: window start, width and the product `O h_j` on it, or
    /// `None` where `O` does not fit in the chain.
    kernels: Vec<Option<(usize, usize, Mat)>>,
    reference: Vec<Option<C64>>,
}

impl EpsilonFunctional {
    pub fn new(op: Option<&Mat>, width: usize, h: &LocalHamiltonian, vacuum: &mut Mps) -> Result<Self> {
        if let Some(o) = op {
            if o.nrows() != D.pow(width as u32) || width % 2 == 0 {
                return Err(Error::Dimension(format!("operator of dim {} on {width} sites", o.nrows())));
            }
        }
        let l = h.length;
        let mut kernels = Vec::with_capacity(h.terms.len());
        for term in &h.terms {
            let (t0, tw) = (term.sites[0], term.sites.len());
            if term.sites.windows(2).any(|w| w[1] != w[0] + 1) {
                return Err(Error::InvalidParameter("terms must act on contiguous sites".into()));
            }
            let (o0, ow) = match op {
                Some(_) => {
                    let hw = width / 2;
                    if term.center < hw || term.center + hw >= l {
                        kernels.push(None);
                        continue;
                    }
                    (term.center - hw, width)
                }
                None => (t0, tw),
            };
            let start = t0.min(o0);
            let end = (t0 + tw).max(o0 + ow);
            let w = end - start;
            let hm = pad_operator(&term.matrix, t0 - start, end - t0 - tw);
            let k = match op {
                Some(o) => pad_operator(o, o0 - start, end - o0 - ow).dot(&hm),
                None => hm,
            };
            kernels.push(Some((start, w, k)));
        }
        let mut f = EpsilonFunctional { reference: vec![None; kernels.len()], kernels };
        f.reference = f.raw(vacuum)?;
        Ok(f)
    }

    fn raw(&self, psi: &mut Mps) -> Result<Vec<Option<C64>>> {
        self.kernels
            .iter()
            .map(|k| match k {
                Some((start, w, m)) => {
                    let rho = psi.reduced_density_matrix(*start, *w)?;
                    Ok(Some(rho.t().iter().zip(m.iter()).map(|(a, b)| a * b).sum()))
                }
                None => Ok(None),
            })
            .collect()
    }

    /// Profile over terms; zero where the operator does not fit.
    pub fn evaluate(&self, psi: &mut Mps) -> Result<Vec<f64>> {
        Ok(self
            .raw(psi)?
            .into_iter()
            .zip(&self.reference)
            .map(|(v, r)| match (v, r) {
                (Some(v), Some(r)) => (v - r).norm(),
                _ => 0.0,
            })
            .collect())
    }
}

/// `eps_j[X]_min = eps_j - sum_a c_a eps_j[rho_a]`.
pub fn resonance_lower_bound(eps: &[f64], signals: &[Vec<f64>], coefficients: &[f64]) -> Result<Vec<f64>> {
    if signals.len() != coefficients.len() || signals.iter().any(|s| s.len() != eps.len()) {
        return Err(Error::Dimension("detector signals and coefficients do not match".into()));
    }
    Ok((0..eps.len()).map(|j| eps[j] - signals.iter().zip(coefficients).map(|(s, c)| c * s[j]).sum::<f64>()).collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CalibrationMethod {
    Nnls,
    /// Normal equations singular: dependent detectors dropped, the rest fit.
    ReducedFit,
    Empty,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Calibration {
    pub coefficients: Vec<f64>,
    /// `sqrt(sum_j (eps_j - sum_a c_a s_aj)^2)`.
    pub residual: f64,
    /// Largest value of the calibrated bound at calibration time.
    pub max_bound: f64,
    pub method: CalibrationMethod,
}

fn least_squares(cols: &[&Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let n = cols.len();
    let g = ndarray::Array2::from_shape_fn((n, n), |(a, b)| cols[a].iter().zip(cols[b]).map(|(x, y)| x * y).sum::<f64>());
    let rhs: Vec<f64> = cols.iter().map(|c| c.iter().zip(y).map(|(x, y)| x * y).sum()).collect();
    let (w, v) = crate::linalg::eigh_real(&g).ok()?;
    let wmax = w.iter().cloned().fold(0.0, f64::max);
    if wmax <= 0.0 || w.iter().any(|&x| x <= 1e-12 * wmax) {
        return None;
    }
    // g^{-1} rhs via the eigendecomposition
    let mut x = vec![0.0; n];
    for (m, &wm) in w.iter().enumerate() {
        let proj: f64 = (0..n).map(|i| v[[i, m]] * rhs[i]).sum::<f64>() / wm;
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += v[[i, m]] * proj;
        }
    }
    Some(x)
}

fn residual(eps: &[f64], signals: &[Vec<f64>], c: &[f64]) -> f64 {
    (0..eps.len())
        .map(|j| {
            let r = eps[j] - signals.iter().zip(c).map(|(s, c)| c * s[j]).sum::<f64>();
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

/// Nonnegative least squares over all sites. Detector counts are small, so
/// every active set is tried and the best feasible one kept.
pub fn calibrate_coefficients(eps: &[f64], signals: &[Vec<f64>]) -> Result<Calibration> {
    let n = signals.len();
    if signals.iter().any(|s| s.len() != eps.len()) {
        return Err(Error::Dimension("detector signal length".into()));
    }
    if n == 0 {
        let max_bound = eps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        return Ok(Calibration { coefficients: vec![], residual: residual(eps, signals, &[]), max_bound, method: CalibrationMethod::Empty });
    }
    if n > 16 {
        return Err(Error::InvalidParameter(format!("{n} detectors")));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut singular = false;
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|&a| mask >> a & 1 == 1).collect();
        let cols: Vec<&Vec<f64>> = idx.iter().map(|&a| &signals[a]).collect();
        let Some(x) = least_squares(&cols, eps) else {
            singular = true;
            continue;
        };
        if x.iter().any(|&v| v < 0.0) {
            continue;
        }
        let mut c = vec![0.0; n];
        for (&a, &v) in idx.iter().zip(&x) {
            c[a] = v;
        }
        let r = residual(eps, signals, &c);
        if best.as_ref().map_or(true, |b| r < b.0) {
            best = Some((r, c));
        }
    }
    let full_singular = least_squares(&signals.iter().collect::<Vec<_>>(), eps).is_none();
    let method = if full_singular && singular { CalibrationMethod::ReducedFit } else { CalibrationMethod::Nnls };
    let c = best.map(|b| b.1).unwrap_or_else(|| vec![0.0; n]);
    let bound = resonance_lower_bound(eps, signals, &c)?;
    Ok(Calibration {
        residual: residual(eps, signals, &c),
        max_bound: bound.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        coefficients: c,
        method,
    })
}
