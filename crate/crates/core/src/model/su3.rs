//! Hardcore SU(3) plaquette from Clebsch-Gordan corner operators.
//!
//! Link labels: 0 = trivial irrep, 1 = fundamental, 2 = antifundamental.
//! A T-junction carries three half-link labels summing to 0 mod 3 (all
//! oriented into the vertex) and holds the unique singlet of their fusion.

use crate::error::{Error, Result};
use ndarray::Array3;
use std::collections::BTreeMap;

fn irrep_dim(label: u8) -> usize {
    if label == 0 {
        1
    } else {
        3
    }
}

fn levi_civita(a: usize, b: usize, c: usize) -> f64 {
    if a == b || b == c || a == c {
        return 0.0;
    }
    // even permutations of (0,1,2)
    if (a, b, c) == (0, 1, 2) || (a, b, c) == (1, 2, 0) || (a, b, c) == (2, 0, 1) {
        1.0
    } else {
        -1.0
    }
}

/// Half-link insertion `T[out, in, color]`: adds a fundamental (`s = +1`) or
/// antifundamental (`s = -1`) line to a half-link in irrep `j`, with the
/// dimension factor `(d_j / d_J)^{1/4}` carried symmetrically by each half.
fn insertion(j: u8, s: i8) -> Array3<f64> {
    let big_j = ((j as i8 + s).rem_euclid(3)) as u8;
    let (dj, dbig) = (irrep_dim(j), irrep_dim(big_j));
    let mut t = Array3::<f64>::zeros((dbig, dj, 3));
    if j == 0 {
        for a in 0..3 {
            t[[a, 0, a]] = 1.0;
        }
    } else if big_j == 0 {
        for a in 0..3 {
            t[[0, a, a]] = 1.0 / 3f64.sqrt();
        }
    } else {
        for m in 0..3 {
            for a in 0..3 {
                for n in 0..3 {
                    t[[n, m, a]] = levi_civita(m, a, n) / 2f64.sqrt();
                }
            }
        }
    }
    t.mapv(|x| x * (dj as f64 / dbig as f64).powf(0.25))
}

/// Normalized singlet in `x (x) y (x) z`.
fn singlet(labels: [u8; 3]) -> Array3<f64> {
    let dims = labels.map(irrep_dim);
    let mut t = Array3::<f64>::zeros((dims[0], dims[1], dims[2]));
    let mut sorted = labels;
    sorted.sort();
    if labels == [0, 0, 0] {
        t[[0, 0, 0]] = 1.0;
    } else if sorted == [0, 1, 2] {
        for m in 0..3 {
            let idx = labels.map(|l| if l == 0 { 0 } else { m });
            t[[idx[0], idx[1], idx[2]]] = 1.0 / 3f64.sqrt();
        }
    } else {
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    t[[a, b, c]] = levi_civita(a, b, c) / 6f64.sqrt();
                }
            }
        }
    }
    t
}

fn junction_valid(labels: [u8; 3]) -> bool {
    labels.iter().map(|&l| l as u32).sum::<u32>() % 3 == 0
}

/// Matrix element of the corner operator that threads a Wilson line into the
/// junction through leg `enter` and out through leg `exit`.
pub fn corner_element(labels: [u8; 3], enter: usize, exit: usize) -> f64 {
    assert!(enter < 3 && exit < 3 && enter != exit);
    assert!(junction_valid(labels));
    let s_in = singlet(labels);
    let mut out_labels = labels;
    out_labels[enter] = (out_labels[enter] + 1) % 3;
    out_labels[exit] = (out_labels[exit] + 2) % 3;
    let s_out = singlet(out_labels);
    let te = insertion(labels[enter], 1);
    let tx = insertion(labels[exit], -1);
    let in_dims = labels.map(irrep_dim);
    let out_dims = out_labels.map(irrep_dim);
    let mut amp = 0.0;
    // sum over the colour index carried along the line and all junction indices
    for color in 0..3 {
        for i0 in 0..in_dims[0] {
            for i1 in 0..in_dims[1] {
                for i2 in 0..in_dims[2] {
                    let v = s_in[[i0, i1, i2]];
                    if v == 0.0 {
                        continue;
                    }
                    let idx_in = [i0, i1, i2];
                    for oe in 0..out_dims[enter] {
                        let fe = te[[oe, idx_in[enter], color]];
                        if fe == 0.0 {
                            continue;
                        }
                        for ox in 0..out_dims[exit] {
                            let fx = tx[[ox, idx_in[exit], color]];
                            if fx == 0.0 {
                                continue;
                            }
                            let mut idx_out = idx_in;
                            idx_out[enter] = oe;
                            idx_out[exit] = ox;
                            amp += s_out[[idx_out[0], idx_out[1], idx_out[2]]] * fe * fx * v;
                        }
                    }
                }
            }
        }
    }
    amp
}

#[derive(Clone, Debug, PartialEq)]
pub struct CornerElement {
    /// Half-link labels of the junction before the corner acts.
    pub junction: [u8; 3],
    /// Labels after: leg 0 raised by one, leg 1 lowered by one.
    pub image: [u8; 3],
    pub amplitude: f64,
}

/// Non-vanishing corner elements in the T-junction basis, line entering
/// through leg 0 and leaving through leg 1.
pub fn su3_corner_table() -> Vec<CornerElement> {
    let mut out = Vec::new();
    for a in 0..3u8 {
        for b in 0..3u8 {
            let c = (6 - a - b) % 3;
            let junction = [a, b, c];
            let amplitude = corner_element(junction, 0, 1);
            if amplitude.abs() > 1e-14 {
                out.push(CornerElement {
                    junction,
                    image: [(a + 1) % 3, (b + 2) % 3, c],
                    amplitude,
                });
            }
        }
    }
    out
}

/// Sparse three-site plaquette table: `(n_{j-1}, n_j, n_{j+1}) -> amplitude`
/// for the transition that lowers the middle site by one.
#[derive(Clone, Debug)]
pub struct PlaquetteTable {
    pub entries: BTreeMap<[u8; 3], f64>,
}

impl PlaquetteTable {
    pub fn amplitude(&self, p: u8, q: u8, r: u8) -> f64 {
        self.entries.get(&[p, q, r]).copied().unwrap_or(0.0)
    }

    pub fn image(config: [u8; 3]) -> [u8; 3] {
        [config[0], (config[1] + 2) % 3, config[2]]
    }
}

const EXPECTED_MULTISET: [(i32, usize); 5] = [(0, 3), (1, 8), (2, 10), (3, 4), (4, 2)];

/// Classify an amplitude as `3^{-m/2}`, returning `m` when exact to 1e-12.
pub fn surd_exponent(x: f64) -> Option<i32> {
    (0..=8).find(|&m| (x - 3f64.powf(-(m as f64) / 2.0)).abs() < 1e-12)
}

/// Plaquette amplitudes obtained by composing the four corners around the
/// loop (bottom_j, rung_j up, top_j left, rung_{j-1} down) in the dual-chain
/// variables, where `n_j` is the flux through plaquette `j`.
pub fn su3_plaquette_table() -> Result<PlaquetteTable> {
    let m = |x: i32| x.rem_euclid(3) as u8;
    let mut entries = BTreeMap::new();
    for p in 0..3i32 {
        for q in 0..3i32 {
            for r in 0..3i32 {
                let top_left = corner_element([m(p), m(-q), m(q - p)], 1, 2);
                let top_right = corner_element([m(q), m(-r), m(r - q)], 2, 0);
                let bottom_right = corner_element([m(-q), m(r), m(q - r)], 0, 2);
                let bottom_left = corner_element([m(-p), m(q), m(p - q)], 2, 1);
                let amp = top_left * top_right * bottom_right * bottom_left;
                if amp.abs() > 1e-14 {
                    entries.insert([m(p), m(q), m(r)], amp);
                }
            }
        }
    }
    let table = PlaquetteTable { entries };
    verify_multiset(&table)?;
    // store the verified surds exactly
    let entries = table
        .entries
        .iter()
        .map(|(&k, &a)| (k, 3f64.powf(-(surd_exponent(a).unwrap() as f64) / 2.0)))
        .collect();
    Ok(PlaquetteTable { entries })
}

fn verify_multiset(table: &PlaquetteTable) -> Result<()> {
    if table.entries.len() != 27 {
        return Err(Error::Construction(format!(
            "plaquette table has {} non-vanishing entries, expected 27",
            table.entries.len()
        )));
    }
    let mut counts = BTreeMap::new();
    for (cfg, &a) in &table.entries {
        let e = surd_exponent(a).ok_or_else(|| {
            Error::Construction(format!("amplitude {a} at {cfg:?} is not a power of 3^(-1/2)"))
        })?;
        *counts.entry(e).or_insert(0usize) += 1;
    }
    for (e, n) in EXPECTED_MULTISET {
        if counts.get(&e).copied().unwrap_or(0) != n {
            return Err(Error::Construction(format!(
                "amplitude 3^(-{e}/2) appears {:?} times, expected {n}",
                counts.get(&e)
            )));
        }
    }
    Ok(())
}
