//! Wave packets of dressed creation operators on a large open chain: state
//! preparation, real-time evolution and the observables built on it
//! (energy excess, entanglement, lightcone front, propagator, spectral map).

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::creation::CreationOperator;
use crate::error::{Error, Result};
use crate::linalg::{Mat, C64, ONE, ZERO};
use crate::model::{build_hamiltonian, Boundary, GaugeGroup, LocalHamiltonian};
use crate::tensor::{dmrg_ground_state, mpo_sum_compress, tdvp_evolve, DmrgOptions, EvolutionConfig, Mpo, Mps, Truncation};

/// Coefficients below this fraction of the largest are dropped.
pub const PACKET_TRUNCATION: f64 = 1e-8;

/// Open chain with its Hamiltonian, DMRG vacuum and vacuum energy density.
#[derive(Clone, Debug)]
pub struct LargeSystem {
    pub h: LocalHamiltonian,
    pub mpo: Mpo,
    pub vacuum: Mps,
    pub vacuum_energy: f64,
    /// `<Omega|h_j|Omega>` for every term.
    pub vacuum_density: Vec<f64>,
    pub dmrg_converged: bool,
}

impl LargeSystem {
    pub fn new(group: GaugeGroup, lambda: f64, length: usize, dmrg: &DmrgOptions) -> Result<Self> {
        let h = build_hamiltonian(group, lambda, length, Boundary::Open)?;
        let mpo = Mpo::from_local_hamiltonian(&h)?;
        let res = dmrg_ground_state(&mpo, dmrg)?;
        let mut vacuum = res.state;
        let vacuum_density = local_energies(&mut vacuum, &h)?;
        vacuum.canonicalize(0);
        Ok(LargeSystem { h, mpo, vacuum, vacuum_energy: res.energy, vacuum_density, dmrg_converged: res.converged })
    }

    pub fn length(&self) -> usize {
        self.h.length
    }

    /// `eps_j = <psi|h_j|psi> - <Omega|h_j|Omega>`.
    pub fn energy_excess(&self, psi: &mut Mps) -> Result<Vec<f64>> {
        let e = local_energies(psi, &self.h)?;
        Ok(e.iter().zip(&self.vacuum_density).map(|(a, b)| a - b).collect())
    }
}

/// `<psi|h_j|psi>` for every term of an open-chain Hamiltonian.
pub fn local_energies(psi: &mut Mps, h: &LocalHamiltonian) -> Result<Vec<f64>> {
    h.terms
        .iter()
        .map(|t| {
            let rho = psi.reduced_density_matrix(t.sites[0], t.sites.len())?;
            Ok(rho.t().iter().zip(t.matrix.iter()).map(|(a, b)| a * b).sum::<C64>().re)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavePacketSpec {
    /// Center in sites (0-based); need not be an integer.
    pub center: f64,
    pub k0: f64,
    pub sigma: f64,
}

/// `c_j = exp[-(j - j0)^2 / 4 sigma^2 + i k0 (j - j0)]` for `j = 0..length`,
/// and the normalization `sqrt(sum |c_j|^2)`.
pub fn gaussian_coefficients(spec: &WavePacketSpec, length: usize) -> Result<(Vec<C64>, f64)> {
    if !(spec.sigma > 0.0) || spec.center < 0.0 || spec.center > (length - 1) as f64 {
        return Err(Error::InvalidParameter(format!("packet {spec:?} on a chain of {length}")));
    }
    let c: Vec<C64> = (0..length)
        .map(|j| {
            let x = j as f64 - spec.center;
            C64::from_polar((-x * x / (4.0 * spec.sigma * spec.sigma)).exp(), spec.k0 * x)
        })
        .collect();
    let n = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Ok((c, n))
}

/// Sites and coefficients kept in a packet: magnitude above
/// `PACKET_TRUNCATION * max`, optionally within `radius` of the center, and
/// with the creation support inside the chain. Coefficients are divided by
/// the normalization of the full Gaussian.
pub fn packet_terms(spec: &WavePacketSpec, length: usize, width: usize, radius: Option<f64>) -> Result<Vec<(usize, C64)>> {
    let (c, n) = gaussian_coefficients(spec, length)?;
    let cmax = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let h = width / 2;
    let mut out = Vec::new();
    for (j, z) in c.into_iter().enumerate() {
        if z.norm() < PACKET_TRUNCATION * cmax || radius.is_some_and(|r| (j as f64 - spec.center).abs() > r) {
            continue;
        }
        if j < h || j + h >= length {
            log::warn!("packet term at site {j} dropped: creation support leaves the chain");
            continue;
        }
        out.push((j, z / n));
    }
    if out.is_empty() {
        return Err(Error::InvalidParameter("packet has no terms inside the chain".into()));
    }
    Ok(out)
}

/// `Psi^dag = sum_j c_j phi_j^dag` as a compressed operator chain.
pub fn build_wavepacket_operator(op: &CreationOperator, terms: &[(usize, C64)], length: usize, cutoff: f64) -> Result<Mpo> {
    let ops: Vec<Mpo> = terms.iter().map(|&(j, _)| op.to_mpo_centered(length, j)).collect::<Result<_>>()?;
    let coefs: Vec<C64> = terms.iter().map(|&(_, c)| c).collect();
    mpo_sum_compress(&ops, &coefs, cutoff, usize::MAX)
}

/// `phi_j^dag |psi>` with the creation support centered on `j`.
pub fn apply_creation(op: &CreationOperator, psi: &Mps, j: usize) -> Result<Mps> {
    let h = op.width() / 2;
    if j < h || j + h >= psi.len() {
        return Err(Error::InvalidParameter(format!("support around {j} leaves the chain")));
    }
    let mut out = psi.clone();
    out.apply_window_operator(&op.unitary, j - h, &Truncation { cutoff: 1e-16, max_chi: usize::MAX })?;
    Ok(out)
}

/// `sum_j c_j phi_j^dag |psi>`, summed term by term with a compression after
/// each addition. Same state as applying [`build_wavepacket_operator`], at a
/// fraction of the cost when the creation operator has large bonds.
pub fn apply_packet(op: &CreationOperator, terms: &[(usize, C64)], psi: &Mps, trunc: &Truncation) -> Result<Mps> {
    let mut acc: Option<Mps> = None;
    for &(j, c) in terms {
        let mut t = apply_creation(op, psi, j)?;
        t.scale(c);
        acc = Some(match acc {
            None => t,
            Some(a) => {
                let mut s = a.add(ONE, &t, ONE)?;
                s.compress(trunc)?;
                s
            }
        });
    }
    acc.ok_or_else(|| Error::InvalidParameter("empty packet".into()))
}

/// `Psi_n^dag ... Psi_1^dag |Omega>`, normalized. Packets closer than four
/// widths trigger a warning.
pub fn prepare_scattering_state(
    sys: &LargeSystem,
    op: &CreationOperator,
    specs: &[WavePacketSpec],
    radius: Option<f64>,
    trunc: &Truncation,
) -> Result<Mps> {
    let l = sys.length();
    let mut state = sys.vacuum.clone();
    let mut ranges: Vec<(f64, f64)> = Vec::new();
    for spec in specs {
        let terms = packet_terms(spec, l, op.width(), radius)?;
        let (lo, hi) = (spec.center - 4.0 * spec.sigma, spec.center + 4.0 * spec.sigma);
        if ranges.iter().any(|&(a, b)| lo <= b && a <= hi) {
            log::warn!("wave packets overlap within 4 sigma around site {:.1}", spec.center);
        }
        ranges.push((lo, hi));
        state = apply_packet(op, &terms, &state, trunc)?;
    }
    state.normalize()?;
    state.canonicalize(0);
    Ok(state)
}

/// Per-step record of a scattering run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScatteringRecord {
    pub step: usize,
    pub time: f64,
    pub energy: f64,
    pub excess: Vec<f64>,
    pub entropy: Vec<f64>,
    pub max_bond: usize,
    pub discarded: f64,
}

/// TDVP evolution recording energy, excess and entropy profiles; `extra`
/// sees every state as well (e.g. for detectors).
pub fn run_scattering<F>(sys: &LargeSystem, state: Mps, config: &EvolutionConfig, mut extra: F) -> Result<(Vec<ScatteringRecord>, Mps)>
where
    F: FnMut(usize, f64, &mut Mps) -> Result<()>,
{
    let mut records = Vec::new();
    let fin = tdvp_evolve(state, &sys.mpo, config.clone(), |step, time, st| {
        let energy = sys.mpo.expectation(st)?.re;
        let excess = sys.energy_excess(st)?;
        let entropy = st.entropy_profile()?;
        records.push(ScatteringRecord {
            step,
            time,
            energy,
            excess,
            entropy,
            max_bond: st.max_bond(),
            discarded: st.log.total_discarded,
        });
        log::debug!("step {step} t={time:.3} chi={} E={energy:.10}", st.max_bond());
        extra(step, time, st)
    })?;
    Ok((records, fin))
}

/// Lightcone and propagator data from one quench `phi_{j0}^dag |Omega>`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuenchResult {
    pub j0: usize,
    pub times: Vec<f64>,
    /// `excess[t][j]`.
    pub excess: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
    /// Propagator grid `delta[t][j] = Delta_{j - j0}(t)`; zero where the
    /// creation support around `j` leaves the chain.
    pub delta: Vec<Vec<C64>>,
    pub valid: Vec<bool>,
}

/// Evolve `|Phi_{j0}> = phi_{j0}^dag |Omega>` and record the energy excess
/// and the propagator `Delta_{j-j0}(t) = e^{i w_Omega t} <Phi_j(0)|Phi_{j0}(t)>`,
/// i.e. `<Omega| phi_j(t) phi_{j0}^dag(0) |Omega>`.
pub fn wannier_quench(sys: &LargeSystem, op: &CreationOperator, j0: usize, config: &EvolutionConfig, with_propagator: bool) -> Result<QuenchResult> {
    let l = sys.length();
    let h = op.width() / 2;
    let valid: Vec<bool> = (0..l).map(|j| j >= h && j + h < l).collect();
    let refs: Vec<Option<Mps>> = if with_propagator {
        (0..l).map(|j| if valid[j] { apply_creation(op, &sys.vacuum, j).map(Some) } else { Ok(None) }).collect::<Result<_>>()?
    } else {
        vec![None; l]
    };
    let mut start = apply_creation(op, &sys.vacuum, j0)?;
    start.normalize()?;
    let mut res = QuenchResult { j0, times: vec![], excess: vec![], energy: vec![], delta: vec![], valid: valid.clone() };
    let w_vac = sys.vacuum_energy;
    tdvp_evolve(start, &sys.mpo, config.clone(), |_, t, st| {
        res.times.push(t);
        res.energy.push(sys.mpo.expectation(st)?.re);
        res.excess.push(sys.energy_excess(st)?);
        if with_propagator {
            let phase = C64::from_polar(1.0, w_vac * t);
            let row = refs
                .iter()
                .map(|r| match r {
                    Some(r) => r.overlap(st).map(|z| z * phase),
                    None => Ok(ZERO),
                })
                .collect::<Result<Vec<_>>>()?;
            res.delta.push(row);
        }
        Ok(())
    })?;
    Ok(res)
}

/// Linear fit `y = a + b x`; returns `(a, b)`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - b * mx, b)
}

/// Lightcone front speed: at every time the outermost positions (linearly
/// interpolated) where `|eps_j|` crosses `threshold * max|eps|` on either
/// side of `j0`; the half-distance between them is fit linearly in time
/// over the window where the front has left the initial support and has
/// not reached the chain ends.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrontFit {
    pub speed: f64,
    pub intercept: f64,
    pub times: Vec<f64>,
    pub half_widths: Vec<f64>,
}

pub fn front_speed(times: &[f64], excess: &[Vec<f64>], j0: usize, threshold: f64, margin: usize) -> Result<FrontFit> {
    let l = excess.first().map(|e| e.len()).unwrap_or(0);
    let peak = excess.iter().flat_map(|e| e.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 || l == 0 {
        return Err(Error::Degenerate("no energy excess".into()));
    }
    let thr = threshold * peak;
    let mut ts = Vec::new();
    let mut widths = Vec::new();
    let mut initial = None;
    for (t, e) in times.iter().zip(excess) {
        let a: Vec<f64> = e.iter().map(|v| v.abs()).collect();
        let right = (j0..l).rev().find(|&j| a[j] >= thr);
        let left = (0..=j0).find(|&j| a[j] >= thr);
        let (Some(r), Some(lf)) = (right, left) else { continue };
        let rpos = if r + 1 < l { r as f64 + (a[r] - thr) / (a[r] - a[r + 1]).max(1e-300) } else { r as f64 };
        let lpos = if lf > 0 { lf as f64 - (a[lf] - thr) / (a[lf] - a[lf - 1]).max(1e-300) } else { lf as f64 };
        let hw = 0.5 * (rpos - lpos);
        let init = *initial.get_or_insert(hw);
        if r + margin >= l || lf < margin {
            break;
        }
        if hw > init + 1.0 {
            ts.push(*t);
            widths.push(hw);
        }
    }
    if ts.len() < 3 {
        return Err(Error::Degenerate("front does not move far enough to fit".into()));
    }
    let (a, b) = linear_fit(&ts, &widths);
    Ok(FrontFit { speed: b, intercept: a, times: ts, half_widths: widths })
}

/// Windowed momentum-space propagator on a zero-padded grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralMap {
    /// Angular frequencies, ascending.
    pub omegas: Vec<f64>,
    /// Momenta in `[-pi, pi)`, ascending.
    pub ks: Vec<f64>,
    /// `magnitude[w][k]`.
    pub magnitude: Vec<Vec<f64>>,
    /// Unpadded resolutions `2 pi / T` and `2 pi / L`.
    pub omega_bin: f64,
    pub k_bin: f64,
}

/// `D(w, k) = dt / (2 pi L) sum_t sum_j e^{-i(k j - w t)} D_j(t)` over the
/// rectangular window of the samples, zero-padded by `pad` in both axes.
/// `delta[t][j]` is indexed by absolute site; the phase reference is `j0`.
pub fn spectral_density(delta: &[Vec<C64>], dt: f64, j0: usize, pad: usize) -> Result<SpectralMap> {
    let nt = delta.len();
    let nj = delta.first().map(|r| r.len()).unwrap_or(0);
    if nt < 2 || nj < 2 || pad == 0 {
        return Err(Error::InvalidParameter("propagator grid too small".into()));
    }
    let (mt, mj) = (nt * pad, nj * pad);
    let mut grid = vec![vec![ZERO; mj]; mt];
    for (t, row) in delta.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            // place site j at offset (j - j0) mod mj
            let x = (j as isize - j0 as isize).rem_euclid(mj as isize) as usize;
            grid[t][x] = v;
        }
    }
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(mj);
    for row in grid.iter_mut() {
        fwd.process(row);
    }
    let inv = planner.plan_fft_inverse(mt);
    let mut col = vec![ZERO; mt];
    for x in 0..mj {
        for t in 0..mt {
            col[t] = grid[t][x];
        }
        inv.process(&mut col);
        for t in 0..mt {
            grid[t][x] = col[t];
        }
    }
    let scale = dt / (2.0 * std::f64::consts::PI * nj as f64);
    let shift = |m: usize, n: usize| -> isize { if m >= n.div_ceil(2) { m as isize - n as isize } else { m as isize } };
    let mut t_order: Vec<usize> = (0..mt).collect();
    t_order.sort_by_key(|&m| shift(m, mt));
    let mut x_order: Vec<usize> = (0..mj).collect();
    x_order.sort_by_key(|&m| shift(m, mj));
    let two_pi = 2.0 * std::f64::consts::PI;
    let omegas = t_order.iter().map(|&m| two_pi * shift(m, mt) as f64 / (mt as f64 * dt)).collect();
    let ks = x_order.iter().map(|&m| two_pi * shift(m, mj) as f64 / mj as f64).collect();
    let magnitude = t_order.iter().map(|&t| x_order.iter().map(|&x| grid[t][x].norm() * scale).collect()).collect();
    Ok(SpectralMap {
        omegas,
        ks,
        magnitude,
        omega_bin: two_pi / ((nt - 1) as f64 * dt),
        k_bin: two_pi / nj as f64,
    })
}

impl SpectralMap {
    /// Frequency of the maximum at the grid momentum closest to `k`
    /// (folded into `[-pi, pi)`).
    pub fn ridge(&self, k: f64) -> f64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        let kk = (k + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
        let ix = (0..self.ks.len())
            .min_by(|&a, &b| (self.ks[a] - kk).abs().partial_cmp(&(self.ks[b] - kk).abs()).unwrap())
            .unwrap();
        let iw = (0..self.omegas.len())
            .max_by(|&a, &b| self.magnitude[a][ix].partial_cmp(&self.magnitude[b][ix]).unwrap())
            .unwrap();
        self.omegas[iw]
    }
}

/// Operator mirrored in space: site order of the support reversed.
pub fn mirror_operator(u: &Mat, width: usize, d: usize) -> Mat {
    let n = u.nrows();
    let rev = |mut x: usize| {
        let mut y = 0;
        for _ in 0..width {
            y = y * d + x % d;
            x /= d;
        }
        y
    };
    Mat::from_shape_fn((n, n), |(r, c)| u[[rev(r), rev(c)]])
}

/// Energy-weighted centroid of the excess between `lo` and `hi` (inclusive).
pub fn excess_centroid(excess: &[f64], lo: usize, hi: usize) -> f64 {
    let w: f64 = excess[lo..=hi].iter().map(|v| v.abs()).sum();
    excess[lo..=hi].iter().enumerate().map(|(i, v)| (lo + i) as f64 * v.abs()).sum::<f64>() / w.max(1e-300)
}
