use serde::{Deserialize, Serialize};

use super::clock::clock_algebra;
use super::su3::{su3_plaquette_table, PlaquetteTable};
use crate::error::{Error, Result};
use crate::linalg::{dagger, is_hermitian, re, C64, Mat, ZERO};

pub const D: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GaugeGroup {
    #[serde(rename = "Z3")]
    Z3,
    #[serde(rename = "SU3_1")]
    Su3,
}

impl GaugeGroup {
    /// Quadratic Casimir of the (anti-)fundamental representation.
    pub fn casimir(self) -> f64 {
        match self {
            GaugeGroup::Z3 => 27.0 / (4.0 * std::f64::consts::PI.powi(2)),
            GaugeGroup::Su3 => 4.0 / 3.0,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            GaugeGroup::Z3 => "Z3",
            GaugeGroup::Su3 => "SU3_1",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Boundary {
    #[serde(rename = "pbc")]
    Periodic,
    #[serde(rename = "obc")]
    Open,
}

/// Coupling from the gauge coupling `g`: `lambda = g^4 / (1 + g^4)`.
pub fn lambda_from_g(g: f64) -> f64 {
    let g4 = g.powi(4);
    g4 / (1.0 + g4)
}

/// Hermitian operator acting on an ordered list of sites. The first listed
/// site is the most significant digit of the local index.
#[derive(Clone, Debug)]
pub struct LocalTerm {
    pub center: usize,
    pub sites: Vec<usize>,
    pub matrix: Mat,
    /// Column-sparse view of `matrix`: `columns[c] = [(row, value), ...]`.
    pub columns: Vec<Vec<(usize, C64)>>,
}

impl LocalTerm {
    pub fn new(center: usize, sites: Vec<usize>, matrix: Mat) -> Self {
        let n = matrix.nrows();
        let columns = (0..n)
            .map(|c| {
                (0..n)
                    .filter(|&r| matrix[[r, c]] != ZERO)
                    .map(|r| (r, matrix[[r, c]]))
                    .collect()
            })
            .collect();
        LocalTerm { center, sites, matrix, columns }
    }

    pub fn width(&self) -> usize {
        self.sites.len()
    }
}

#[derive(Clone, Debug)]
pub struct LocalHamiltonian {
    pub length: usize,
    pub support_width: usize,
    pub terms: Vec<LocalTerm>,
    pub lambda: f64,
    pub group: GaugeGroup,
    pub boundary: Boundary,
}

impl LocalHamiltonian {
    /// Term whose center is site `j`.
    pub fn term(&self, j: usize) -> &LocalTerm {
        &self.terms[j]
    }
}

fn digits3(idx: usize, w: usize) -> Vec<u8> {
    let mut d = vec![0u8; w];
    let mut x = idx;
    for a in (0..w).rev() {
        d[a] = (x % 3) as u8;
        x /= 3;
    }
    d
}

/// Support of the plaquette-centered term `j`, together with which of the
/// three slots (left, middle, right) are physical sites.
fn plaquette_support(j: usize, length: usize, boundary: Boundary) -> (Vec<usize>, [bool; 3]) {
    match boundary {
        Boundary::Periodic => (
            vec![(j + length - 1) % length, j, (j + 1) % length],
            [true, true, true],
        ),
        Boundary::Open => {
            let left = j > 0;
            let right = j + 1 < length;
            let mut sites = Vec::with_capacity(3);
            if left {
                sites.push(j - 1);
            }
            sites.push(j);
            if right {
                sites.push(j + 1);
            }
            (sites, [left, true, right])
        }
    }
}

/// Build a term from a three-site matrix element function; absent boundary
/// neighbours are pinned to the trivial irrep `n = 0`.
fn term_from_three_site<F>(j: usize, length: usize, boundary: Boundary, f: F) -> LocalTerm
where
    F: Fn([u8; 3], [u8; 3]) -> C64,
{
    let (sites, present) = plaquette_support(j, length, boundary);
    let w = sites.len();
    let n = D.pow(w as u32);
    let expand = |local: &[u8]| -> [u8; 3] {
        let mut full = [0u8; 3];
        let mut k = 0;
        for slot in 0..3 {
            if present[slot] {
                full[slot] = local[k];
                k += 1;
            }
        }
        full
    };
    let mut m = Mat::zeros((n, n));
    for r in 0..n {
        let out = expand(&digits3(r, w));
        for c in 0..n {
            let inp = expand(&digits3(c, w));
            m[[r, c]] = f(out, inp);
        }
    }
    LocalTerm::new(j, sites, m)
}

fn check_length(length: usize, boundary: Boundary, min: usize) -> Result<()> {
    if length < min {
        return Err(Error::InvalidParameter(format!("chain length {length} < {min}")));
    }
    if boundary == Boundary::Periodic && length < 3 {
        return Err(Error::InvalidParameter(
            "periodic chains need at least 3 sites for three-site terms".into(),
        ));
    }
    Ok(())
}

/// Share of the rung between plaquettes `a` and `b` assigned to `b`: the
/// rung energy goes to the non-trivial side, split evenly when both sides
/// are non-trivial. The two shares of a rung always add up to `[a != b]`.
fn rung_share(a: u8, b: u8) -> f64 {
    if a == b || b == 0 {
        0.0
    } else if a == 0 {
        1.0
    } else {
        0.5
    }
}

/// Electric energy density of plaquette `j`: both legs plus its share of each
/// adjacent rung, minus the constant `2 C2`. On an open chain the missing
/// neighbour is the trivial irrep, so a boundary rung lands fully on the end
/// plaquette.
fn electric_element(c2: f64, out: [u8; 3], inp: [u8; 3]) -> f64 {
    if out != inp {
        return 0.0;
    }
    let [p, q, r] = inp;
    let legs = if q != 0 { 2.0 } else { 0.0 };
    c2 * (legs + rung_share(p, q) + rung_share(r, q) - 2.0)
}

/// Amplitude of `<out| U_j |in>` where `U_j` lowers the middle site by one.
fn plaquette_element(group: GaugeGroup, table: Option<&PlaquetteTable>, out: [u8; 3], inp: [u8; 3]) -> f64 {
    if out[0] != inp[0] || out[2] != inp[2] || out[1] != (inp[1] + 2) % 3 {
        return 0.0;
    }
    match group {
        GaugeGroup::Z3 => 1.0,
        GaugeGroup::Su3 => table.expect("su3 table").amplitude(inp[0], inp[1], inp[2]),
    }
}

/// Magnetic term `-(U_j + U_j^dag)` of plaquette `j`.
fn magnetic_element(group: GaugeGroup, table: Option<&PlaquetteTable>, out: [u8; 3], inp: [u8; 3]) -> f64 {
    -(plaquette_element(group, table, out, inp) + plaquette_element(group, table, inp, out))
}

/// `H_E = -(C2/3) sum_j (sigma_j^dag sigma_{j+1} + 2 sigma_j + h.c.)`, split into
/// plaquette-centered terms.
pub fn electric_hamiltonian(length: usize, group: GaugeGroup, boundary: Boundary) -> Result<LocalHamiltonian> {
    check_length(length, boundary, 2)?;
    let c2 = group.casimir();
    let terms = (0..length)
        .map(|j| term_from_three_site(j, length, boundary, |o, i| re(electric_element(c2, o, i))))
        .collect();
    Ok(LocalHamiltonian { length, support_width: 3, terms, lambda: 1.0, group, boundary })
}

/// `H_B = -sum_j (tau_j^dag + tau_j)` as single-site terms.
pub fn z3_plaquette_hamiltonian(length: usize, boundary: Boundary) -> Result<LocalHamiltonian> {
    if length < 1 {
        return Err(Error::InvalidParameter("chain length must be positive".into()));
    }
    let ca = clock_algebra();
    let h = -(&ca.tau + &dagger(&ca.tau));
    let terms = (0..length).map(|j| LocalTerm::new(j, vec![j], h.clone())).collect();
    Ok(LocalHamiltonian { length, support_width: 1, terms, lambda: 0.0, group: GaugeGroup::Z3, boundary })
}

/// `H = lambda H_E + (1 - lambda) H_B` with plaquette-centered three-site terms.
pub fn build_hamiltonian(group: GaugeGroup, lambda: f64, length: usize, boundary: Boundary) -> Result<LocalHamiltonian> {
    if !(0.0..=1.0).contains(&lambda) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} outside [0, 1]")));
    }
    check_length(length, boundary, 2)?;
    let c2 = group.casimir();
    let table = match group {
        GaugeGroup::Su3 => Some(su3_plaquette_table()?),
        GaugeGroup::Z3 => None,
    };
    let terms: Vec<LocalTerm> = (0..length)
        .map(|j| {
            term_from_three_site(j, length, boundary, |o, i| {
                re(lambda * electric_element(c2, o, i)
                    + (1.0 - lambda) * magnetic_element(group, table.as_ref(), o, i))
            })
        })
        .collect();
    for t in &terms {
        if !is_hermitian(&t.matrix, 1e-14) {
            return Err(Error::Construction(format!("term {} not Hermitian", t.center)));
        }
    }
    Ok(LocalHamiltonian { length, support_width: 3, terms, lambda, group, boundary })
}

/// Single-site operator `U_j` (three-site support) for the given group, used
/// by tests and diagnostics.
pub fn plaquette_operator(group: GaugeGroup) -> Result<Mat> {
    let table = match group {
        GaugeGroup::Su3 => Some(su3_plaquette_table()?),
        GaugeGroup::Z3 => None,
    };
    let mut m = Mat::zeros((27, 27));
    for r in 0..27 {
        for c in 0..27 {
            let o = digits3(r, 3);
            let i = digits3(c, 3);
            m[[r, c]] = re(plaquette_element(group, table.as_ref(), [o[0], o[1], o[2]], [i[0], i[1], i[2]]));
        }
    }
    Ok(m)
}

pub(crate) fn local_digits(idx: usize, w: usize) -> Vec<u8> {
    digits3(idx, w)
}
