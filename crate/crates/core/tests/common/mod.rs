#![allow(dead_code)]

use qpwave::linalg::{dagger, eye, kron, Mat, C64};
use qpwave::model::clock_algebra;

/// `op` on site `j` of an `l`-site chain, identities elsewhere.
pub fn site_op(op: &Mat, j: usize, l: usize) -> Mat {
    let mut m = Mat::eye(1);
    let id = eye(3);
    for s in 0..l {
        m = kron(&m, if s == j { op } else { &id });
    }
    m
}

/// Clock-form electric Hamiltonian built from Kronecker products, with the
/// open-chain boundary rungs written as extra end fields.
pub fn clock_electric(l: usize, c2: f64, periodic: bool) -> Mat {
    let ca = clock_algebra();
    let dim = 3usize.pow(l as u32);
    let mut h = Mat::zeros((dim, dim));
    let sd = dagger(&ca.sigma);
    let bonds = if periodic { l } else { l - 1 };
    for j in 0..bonds {
        let a = site_op(&sd, j, l).dot(&site_op(&ca.sigma, (j + 1) % l, l));
        h = h + &a + &dagger(&a);
    }
    for j in 0..l {
        let s = site_op(&ca.sigma, j, l);
        h = h + s.mapv(|z| z * 2.0) + dagger(&s).mapv(|z| z * 2.0);
    }
    let mut h = h.mapv(|z| z * (-c2 / 3.0));
    if !periodic {
        for j in [0, l - 1] {
            let s = site_op(&ca.sigma, j, l);
            let f = Mat::eye(dim).mapv(|z| z * 2.0) - &s - &dagger(&s);
            h = h + f.mapv(|z| z * (c2 / 3.0));
        }
    }
    h
}

pub fn clock_magnetic(l: usize) -> Mat {
    let ca = clock_algebra();
    let dim = 3usize.pow(l as u32);
    let mut h = Mat::zeros((dim, dim));
    for j in 0..l {
        let t = site_op(&ca.tau, j, l);
        h = h - &t - &dagger(&t);
    }
    h
}

/// Dense translation `T|n_0 .. n_{l-1}> = |n_{l-1}, n_0, ..>`.
pub fn dense_translation(l: usize) -> Mat {
    let dim = 3usize.pow(l as u32);
    let mut t = Mat::zeros((dim, dim));
    for s in 0..dim {
        let d = qpwave::hilbert::config_digits(s, l);
        let mut e = vec![0u8; l];
        for j in 0..l {
            e[(j + 1) % l] = d[j];
        }
        t[[qpwave::hilbert::config_index(&e), s]] = C64::new(1.0, 0.0);
    }
    t
}

pub fn max_dev(a: &Mat, b: &Mat) -> f64 {
    qpwave::linalg::max_abs(&(a - b))
}

/// Number of maximal runs of non-zero digits on a ring.
pub fn cluster_count(digits: &[u8]) -> usize {
    let l = digits.len();
    if digits.iter().all(|&d| d != 0) {
        return 1;
    }
    (0..l).filter(|&j| digits[j] != 0 && digits[(j + l - 1) % l] == 0).count()
}

/// Excitation energies (units of the Casimir) of single-cluster eigenstates
/// below `cutoff`, per momentum index. Within each degenerate level the
/// cluster-count operator is diagonalised and its unit eigenvalues kept.
pub fn single_cluster_levels(
    h: &qpwave::model::LocalHamiltonian,
    cutoff: f64,
) -> Vec<Vec<f64>> {
    use qpwave::hilbert::config_digits;
    use qpwave::linalg::{eigh, vdot};
    use qpwave::spectroscopy::{EigenMethod, SpectrumSolver};
    let l = h.length;
    let c2 = h.group.casimir();
    let solver = SpectrumSolver::new(l).unwrap();
    let vac = solver.solve_sector(h, 0, 1, 1, EigenMethod::Dense).unwrap()[0].omega;
    let counts: Vec<f64> = (0..3usize.pow(l as u32)).map(|s| cluster_count(&config_digits(s, l)) as f64).collect();
    let mut out = Vec::new();
    for n in 0..l {
        let mut levels = Vec::new();
        for c in [1i8, -1] {
            let dim = solver.sector(n, c).unwrap().dim();
            let states = solver.solve_sector(h, n, c, dim, EigenMethod::Dense).unwrap();
            let low: Vec<_> = states.iter().filter(|s| (s.omega - vac) / c2 < cutoff).collect();
            let mut i = 0;
            while i < low.len() {
                let mut j = i;
                while j < low.len() && (low[j].omega - low[i].omega).abs() < 1e-8 {
                    j += 1;
                }
                let block = &low[i..j];
                if !(n == 0 && c == 1 && i == 0) {
                    let m = Mat::from_shape_fn((block.len(), block.len()), |(a, b)| {
                        let weighted = block[b].state.iter().zip(counts.iter()).map(|(z, w)| z * *w).collect();
                        vdot(&block[a].state, &weighted)
                    });
                    let (w, _) = eigh(&m).unwrap();
                    for x in w.iter() {
                        if (x - 1.0).abs() < 1e-6 {
                            levels.push((block[0].omega - vac) / c2);
                        }
                    }
                }
                i = j;
            }
        }
        levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.push(levels);
    }
    out
}
