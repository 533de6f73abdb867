//! Band extraction, J^PC labels and dispersion interpolation.

use std::f64::consts::PI;

use super::sector::{fix_phase, sector_diagonalize, EigenMethod, OrbitTable, SectorBasis};
use super::symmetry::{momentum, SymmetryOps};
use crate::error::{Error, Result};
use crate::linalg::{vdot, C64, Vector};
use crate::model::{Boundary, LocalHamiltonian};

/// A phase-fixed eigenstate with its symmetry labels.
#[derive(Clone, Debug)]
pub struct Eigenstate {
    pub omega: f64,
    /// Momentum index `n`, `k = 2 pi n / l`.
    pub n: usize,
    pub c: i8,
    /// `<psi|P|psi>`, only meaningful at `k = 0, pi`.
    pub parity: Option<f64>,
    /// Position within its `(k, C)` sector after removing the vacuum.
    pub band_index: usize,
    pub state: Vector,
    pub residual: f64,
}

/// Symmetry machinery for a periodic chain of `l` sites.
#[derive(Clone, Debug)]
pub struct SpectrumSolver {
    pub l: usize,
    pub ops: SymmetryOps,
    pub table: OrbitTable,
}

#[derive(Clone, Debug)]
pub struct Spectrum {
    pub l: usize,
    pub vacuum_energy: f64,
    pub vacuum: Vector,
    /// Excited levels sorted by `(omega, k, C, P)`.
    pub levels: Vec<Eigenstate>,
}

impl SpectrumSolver {
    pub fn new(l: usize) -> Result<Self> {
        if l < 3 {
            return Err(Error::InvalidParameter(format!("periodic chain needs l >= 3, got {l}")));
        }
        let ops = SymmetryOps::new(l)?;
        let table = OrbitTable::new(&ops);
        Ok(SpectrumSolver { l, ops, table })
    }

    pub fn sector(&self, n: usize, c: i8) -> Result<SectorBasis> {
        SectorBasis::new(&self.table, n, c)
    }

    fn parity_expectation(&self, psi: &Vector) -> f64 {
        vdot(psi, &self.ops.parity(psi)).re
    }

    /// Lowest `count` states of sector `(n, c)` as phase-fixed full vectors.
    pub fn solve_sector(
        &self,
        h: &LocalHamiltonian,
        n: usize,
        c: i8,
        count: usize,
        method: EigenMethod,
    ) -> Result<Vec<Eigenstate>> {
        if h.boundary != Boundary::Periodic {
            return Err(Error::InvalidParameter("momentum sectors need periodic boundaries".into()));
        }
        let basis = self.sector(n, c)?;
        let count = count.min(basis.dim());
        let pairs = sector_diagonalize(&self.table, &basis, h, count, method)?;
        let self_dual = 2 * n % self.l == 0;
        Ok(pairs
            .into_iter()
            .map(|p| {
                let mut state = basis.to_full(&self.table, &p.coeffs);
                fix_phase(&mut state);
                let parity = if self_dual { Some(self.parity_expectation(&state)) } else { None };
                Eigenstate { omega: p.omega, n, c, parity, band_index: 0, state, residual: p.residual }
            })
            .collect())
    }

    /// Lowest `per_sector` excitations in every `(k, C)` sector plus the
    /// vacuum. States at `-k` are generated from `+k` as `P |phi_k>`.
    pub fn spectrum(&self, h: &LocalHamiltonian, per_sector: usize, method: EigenMethod) -> Result<Spectrum> {
        let l = self.l;
        let mut vac = self.solve_sector(h, 0, 1, per_sector + 1, method)?;
        let vacuum = vac.remove(0);
        let mut levels = Vec::new();
        for c in [1i8, -1] {
            let mut by_n: Vec<Vec<Eigenstate>> = vec![Vec::new(); l];
            for n in 0..=l / 2 {
                let states = if n == 0 && c == 1 {
                    vac.clone()
                } else {
                    self.solve_sector(h, n, c, per_sector, method)?
                };
                by_n[n] = states;
            }
            for n in (l / 2 + 1)..l {
                let mirror = l - n;
                by_n[n] = by_n[mirror]
                    .iter()
                    .map(|s| {
                        let state = self.ops.parity(&s.state);
                        Eigenstate { n, parity: None, state, ..s.clone() }
                    })
                    .collect();
            }
            for (n, states) in by_n.into_iter().enumerate() {
                for (b, mut s) in states.into_iter().enumerate() {
                    s.band_index = b;
                    s.n = n;
                    levels.push(s);
                }
            }
        }
        levels.sort_by(|a, b| {
            let pa = a.parity.unwrap_or(0.0);
            let pb = b.parity.unwrap_or(0.0);
            a.omega
                .partial_cmp(&b.omega)
                .unwrap()
                .then(a.n.cmp(&b.n))
                .then(b.c.cmp(&a.c))
                .then(pb.partial_cmp(&pa).unwrap())
        });
        Ok(Spectrum { l, vacuum_energy: vacuum.omega, vacuum: vacuum.state, levels })
    }
}

/// Band identity `J^PC` with index: `0_{index+1}^{P C}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BandLabel {
    pub c: i8,
    pub p: i8,
    pub index: usize,
}

impl BandLabel {
    pub fn name(&self) -> String {
        let s = |x: i8| if x > 0 { '+' } else { '-' };
        format!("0_{}^{}{}", self.index + 1, s(self.p), s(self.c))
    }
}

#[derive(Clone, Debug)]
pub struct BlochBand {
    pub l: usize,
    pub label: BandLabel,
    /// Excitation energies `omega_k - omega_vacuum`, indexed by `n`.
    pub omega: Vec<f64>,
    pub vacuum_energy: f64,
    /// Bloch states in the parity gauge, indexed by `n`.
    pub states: Vec<Vector>,
    /// Parity eigenvalue used for the gauge `|phi_{-k}> = p P |phi_k>`.
    pub gauge_parity: i8,
}

impl BlochBand {
    pub fn momenta(&self) -> Vec<f64> {
        (0..self.l).map(|n| momentum(self.l, n)).collect()
    }
}

/// Group the levels of a spectrum into bands by `(C, sector ordering)` and
/// attach the parity of the `k = 0` member.
pub fn classify_bands(spectrum: &Spectrum, max_index: usize) -> Result<Vec<BlochBand>> {
    let l = spectrum.l;
    let mut bands = Vec::new();
    for c in [1i8, -1] {
        for b in 0..max_index {
            let mut members: Vec<Option<&Eigenstate>> = vec![None; l];
            for s in &spectrum.levels {
                if s.c == c && s.band_index == b {
                    members[s.n] = Some(s);
                }
            }
            if members.iter().any(|m| m.is_none()) {
                continue;
            }
            let members: Vec<&Eigenstate> = members.into_iter().map(|m| m.unwrap()).collect();
            // crossing / degeneracy inside the sector makes the tracking ambiguous
            for m in &members {
                for other in &spectrum.levels {
                    if other.c == c && other.n == m.n && other.band_index != b && (other.omega - m.omega).abs() < 1e-8 {
                        return Err(Error::Classification(format!(
                            "band {b} (C={c}) degenerate with band {} at n={}",
                            other.band_index, m.n
                        )));
                    }
                }
            }
            let p0 = members[0].parity.unwrap_or(0.0);
            if (p0.abs() - 1.0).abs() > 1e-6 {
                return Err(Error::Classification(format!("k=0 state of band {b} (C={c}) has <P> = {p0}")));
            }
            let p = if p0 > 0.0 { 1 } else { -1 };
            let omega = members.iter().map(|m| m.omega - spectrum.vacuum_energy).collect();
            // parity gauge |phi_{-k}> = p P |phi_k>, so that theta_k = theta_{-k}
            // yields parity eigenstates
            let states = members
                .iter()
                .map(|m| if 2 * m.n > l { m.state.mapv(|z| z * p as f64) } else { m.state.clone() })
                .collect();
            bands.push(BlochBand {
                l,
                label: BandLabel { c, p, index: b },
                omega,
                vacuum_energy: spectrum.vacuum_energy,
                states,
                gauge_parity: p,
            });
        }
    }
    Ok(bands)
}

/// `<omega> = (1/l) sum_k omega_k`.
pub fn band_centroid(band: &BlochBand) -> f64 {
    band.omega.iter().sum::<f64>() / band.l as f64
}

/// Trigonometric interpolant through samples on the `2 pi n / l` grid.
#[derive(Clone, Debug)]
pub struct Dispersion {
    pub l: usize,
    /// `(m, c_m)` with `omega(k) = Re sum_m c_m e^{ikm}`.
    pub harmonics: Vec<(i64, C64)>,
    pub v_max: f64,
    /// Momentum in `[0, pi]` where `|omega'|` is largest.
    pub k0: f64,
}

impl Dispersion {
    pub fn eval(&self, k: f64) -> f64 {
        self.harmonics.iter().map(|&(m, c)| (c * C64::from_polar(1.0, k * m as f64)).re).sum()
    }

    pub fn derivative(&self, k: f64) -> f64 {
        self.harmonics
            .iter()
            .map(|&(m, c)| (c * C64::new(0.0, m as f64) * C64::from_polar(1.0, k * m as f64)).re)
            .sum()
    }
}

pub fn fourier_interpolate_dispersion(omega: &[f64]) -> Dispersion {
    let l = omega.len();
    let lo = -(((l - 1) / 2) as i64);
    let hi = (l / 2) as i64;
    let mut harmonics = Vec::new();
    for m in lo..=hi {
        let mut c = C64::new(0.0, 0.0);
        for (n, &w) in omega.iter().enumerate() {
            c += C64::from_polar(w / l as f64, -2.0 * PI * (n as i64 * m) as f64 / l as f64);
        }
        if l % 2 == 0 && m == hi {
            // split the Nyquist harmonic symmetrically
            harmonics.push((m, c * 0.5));
            harmonics.push((-m, c * 0.5));
        } else {
            harmonics.push((m, c));
        }
    }
    let mut disp = Dispersion { l, harmonics, v_max: 0.0, k0: 0.0 };
    let samples = 20000;
    let (mut best, mut best_k) = (0.0, 0.0);
    for i in 0..=samples {
        let k = PI * i as f64 / samples as f64;
        let v = disp.derivative(k).abs();
        if v > best {
            best = v;
            best_k = k;
        }
    }
    // golden-section refinement around the grid maximum
    let h = PI / samples as f64;
    let (mut a, mut b) = ((best_k - h).max(0.0), (best_k + h).min(PI));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if disp.derivative(x1).abs() > disp.derivative(x2).abs() {
            b = x2;
        } else {
            a = x1;
        }
    }
    let kr = 0.5 * (a + b);
    if disp.derivative(kr).abs() >= best {
        best = disp.derivative(kr).abs();
        best_k = kr;
    }
    disp.v_max = best;
    disp.k0 = best_k;
    disp
}
