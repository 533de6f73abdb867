//! Unitary dressed creation operators on a few sites, obtained as the
//! nearest unitary (Procrustes) to the partial overlap `Tr_out |phi><Omega|`.

use ndarray::Array4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::split_window;
use crate::linalg::{dagger, norm, svd_full, trace, Mat, Vector};
use crate::model::D;
use crate::tensor::mpo::{factorize_operator, Mpo};

/// Singular values below this fraction of the largest are treated as null.
pub const NULL_THRESHOLD: f64 = 1e-12;
/// Relative singular-value cutoff of the site factorization.
pub const MPO_CUTOFF: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct CreationOperator {
    /// Sites of the intermediate lattice, left to right (may wrap).
    pub support: Vec<usize>,
    pub center: usize,
    pub unitary: Mat,
    /// `|<phi| U |Omega>|^2` with both states normalized.
    pub fidelity: f64,
    pub singular_values: Vec<f64>,
    /// Number of singular directions below the null threshold; the unitary
    /// is only fixed up to a rotation inside them.
    pub null_dim: usize,
}

/// Contiguous window of odd length centered on `j0` of a periodic chain.
pub fn support_window(l: usize, j0: usize, width: usize) -> Result<Vec<usize>> {
    if width == 0 || width % 2 == 0 {
        return Err(Error::InvalidParameter(format!("support length {width} must be odd")));
    }
    if width > l || j0 >= l {
        return Err(Error::InvalidParameter(format!("support of {width} sites around {j0} exceeds a lattice of {l}")));
    }
    let h = width / 2;
    Ok((0..width).map(|i| (j0 + l - h + i) % l).collect())
}

/// `A = Tr_{outside W} |phi><Omega|` as a `d^w x d^w` matrix, with both
/// states normalized first.
pub fn partial_overlap_operator(mlwf: &Vector, vacuum: &Vector, l: usize, support: &[usize]) -> Result<Mat> {
    if support.len() > l {
        return Err(Error::InvalidParameter(format!("support of {} sites exceeds lattice of {l}", support.len())));
    }
    let (np, nv) = (norm(mlwf), norm(vacuum));
    if np == 0.0 || nv == 0.0 {
        return Err(Error::Degenerate("zero state".into()));
    }
    let phi = split_window(mlwf, l, support)?;
    let omega = split_window(vacuum, l, support)?;
    Ok(phi.dot(&dagger(&omega)).mapv(|z| z / (np * nv)))
}

/// `|Tr[U A^dag]|^2`, the fidelity `|<phi|U|Omega>|^2` of a unitary on `W`.
pub fn fidelity(u: &Mat, a: &Mat) -> f64 {
    trace(&u.dot(&dagger(a))).norm_sqr()
}

pub fn trace_norm(a: &Mat) -> Result<f64> {
    let (_, s, _) = svd_full(a)?;
    Ok(s.sum())
}

/// Nearest unitary `U = X Y^dag` for `A = X S Y^dag`; the fidelity is the
/// squared trace norm of `A`.
pub fn procrustes_unitary(a: &Mat, null_threshold: f64) -> Result<(Mat, f64, Vec<f64>, usize)> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("partial overlap of shape {:?}", a.dim())));
    }
    let (x, s, yt) = svd_full(a)?;
    let smax = s.first().copied().unwrap_or(0.0);
    if !(smax > 1e-14) {
        return Err(Error::Degenerate("partial overlap vanishes: band orthogonal to the vacuum on this support".into()));
    }
    let null_dim = s.iter().filter(|&&v| v < null_threshold * smax).count();
    let u = x.dot(&yt);
    let f = s.sum().powi(2);
    Ok((u, f, s.to_vec(), null_dim))
}

impl CreationOperator {
    /// Procrustes creation operator for the MLWF centered on `center` of an
    /// `l`-site periodic chain.
    pub fn extract(mlwf: &Vector, vacuum: &Vector, l: usize, center: usize, width: usize) -> Result<Self> {
        let support = support_window(l, center, width)?;
        let a = partial_overlap_operator(mlwf, vacuum, l, &support)?;
        let (unitary, fid, singular_values, null_dim) = procrustes_unitary(&a, NULL_THRESHOLD)?;
        Ok(CreationOperator { support, center, unitary, fidelity: fid, singular_values, null_dim })
    }

    pub fn width(&self) -> usize {
        self.support.len()
    }

    pub fn infidelity(&self) -> f64 {
        (1.0 - self.fidelity).max(0.0)
    }

    /// Site factorization of the unitary, left to right.
    pub fn factors(&self) -> Result<Vec<Array4<crate::linalg::C64>>> {
        factorize_operator(&self.unitary, self.width(), D, MPO_CUTOFF)
    }

    /// The operator placed with its first site at `start` on an open chain.
    pub fn to_mpo(&self, length: usize, start: usize) -> Result<Mpo> {
        Mpo::embed(&self.unitary, start, length, D, MPO_CUTOFF)
    }

    /// The operator centered on site `j` of an open chain.
    pub fn to_mpo_centered(&self, length: usize, j: usize) -> Result<Mpo> {
        let h = self.width() / 2;
        if j < h || j + h >= length {
            return Err(Error::InvalidParameter(format!("support around {j} leaves the chain of {length}")));
        }
        self.to_mpo(length, j - h)
    }

    pub fn unitarity_defect(&self) -> f64 {
        let n = self.unitary.nrows();
        crate::linalg::max_abs(&(dagger(&self.unitary).dot(&self.unitary) - Mat::eye(n)))
    }
}

/// One row of an infidelity table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InfidelityRow {
    pub group: String,
    pub band: String,
    pub lambda: f64,
    pub support: usize,
    pub infidelity: f64,
}

/// `1 - F` for every support length, given one band's MLWF and the vacuum.
pub fn infidelity_scan(
    group: &str,
    band: &str,
    lambda: f64,
    mlwf: &Vector,
    vacuum: &Vector,
    l: usize,
    center: usize,
    supports: &[usize],
) -> Result<Vec<InfidelityRow>> {
    supports
        .iter()
        .map(|&w| {
            let op = CreationOperator::extract(mlwf, vacuum, l, center, w)?;
            Ok(InfidelityRow { group: group.into(), band: band.into(), lambda, support: w, infidelity: op.infidelity() })
        })
        .collect()
}
