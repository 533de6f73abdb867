//! Energy-based maximally localized Wannier functions of a single band.
//!
//! A Wannier state centered on site 0 is `|phi_theta> = l^{-1/2} sum_k
//! e^{i theta_k} |phi_k>`. Since `h_j = T^j h_0 T^-j`, the local energy
//! `<phi|h_j|phi>` is the quadratic form of `N[a][b] = <phi_a|h_0|phi_b>` in
//! the Bloch coefficients `u_j[k] = e^{i theta_k - i k j} / sqrt(l)` of
//! `T^-j |phi_theta>`.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hilbert::{apply_term, term_expectation};
use crate::linalg::{vdot, Vector, C64, IM};
use crate::model::{LocalHamiltonian, LocalTerm};
use crate::spectroscopy::{momentum, BlochBand};

/// `N[a][b] = <phi_a|h_0|phi_b>` over the band's momentum grid.
#[derive(Clone, Debug)]
pub struct KSpaceLocalMatrix {
    pub l: usize,
    pub matrix: Array2<C64>,
    pub vacuum_energy: f64,
    /// `N - (omega_vac / l) 1`; since `|u|^2 = 1` its quadratic form is the
    /// excess directly, without cancelling two O(1) numbers per site.
    shifted: Array2<C64>,
}

pub fn precompute_kspace_matrix(band: &BlochBand, h0: &LocalTerm) -> Result<KSpaceLocalMatrix> {
    let l = band.l;
    if band.states.len() != l {
        return Err(Error::Dimension(format!("band has {} states for l={l}", band.states.len())));
    }
    let images: Vec<Vector> = band.states.iter().map(|s| apply_term(h0, l, s)).collect();
    let matrix = Array2::from_shape_fn((l, l), |(a, b)| vdot(&band.states[a], &images[b]));
    let mut shifted = matrix.clone();
    for a in 0..l {
        shifted[[a, a]] -= band.vacuum_energy / l as f64;
    }
    Ok(KSpaceLocalMatrix { l, matrix, vacuum_energy: band.vacuum_energy, shifted })
}

/// Bloch-basis coefficients of `T^-j |phi_theta>`.
fn coefficients(theta: &[f64], j: isize) -> Vector {
    let l = theta.len();
    let norm = 1.0 / (l as f64).sqrt();
    Vector::from_shape_fn(l, |n| C64::from_polar(norm, theta[n] - momentum(l, n) * j as f64))
}

impl KSpaceLocalMatrix {
    /// `eps_j = <phi_theta|h_j|phi_theta> - omega_vac / l` for `j = 0..l`.
    pub fn excess_profile(&self, theta: &[f64]) -> Vec<f64> {
        let l = self.l;
        (0..l)
            .map(|j| {
                let u = coefficients(theta, j as isize);
                vdot(&u, &self.shifted.dot(&u)).re
            })
            .collect()
    }

    /// Profile plus `d eps_j / d theta_k` (row `j`, column `k`).
    fn excess_with_jacobian(&self, theta: &[f64]) -> (Vec<f64>, Array2<f64>) {
        let l = self.l;
        let mut eps = vec![0.0; l];
        let mut jac = Array2::zeros((l, l));
        for j in 0..l {
            let u = coefficients(theta, j as isize);
            let nu = self.shifted.dot(&u);
            eps[j] = vdot(&u, &nu).re;
            for k in 0..l {
                jac[[j, k]] = 2.0 * ((IM * u[k]).conj() * nu[k]).re;
            }
        }
        (eps, jac)
    }
}

/// Squared distance `x_j^2 = ((l/pi) sin(pi (j - j0) / l))^2` on the ring.
pub fn distance_squared(l: usize, j0: usize) -> Vec<f64> {
    (0..l)
        .map(|j| {
            let x = l as f64 / PI * (PI * (j as f64 - j0 as f64) / l as f64).sin();
            x * x
        })
        .collect()
}

/// `p_j = |eps_j| / sum_i |eps_i|`.
pub fn distribution(eps: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = eps.iter().map(|e| e.abs()).sum();
    if total <= 1e-300 || !total.is_finite() {
        return Err(Error::Degenerate("energy excess vanishes everywhere".into()));
    }
    Ok(eps.iter().map(|e| e.abs() / total).collect())
}

/// `sigma^2 = sum_j x_j^2 p_j`.
pub fn spread_from_profile(eps: &[f64], x2: &[f64]) -> Result<f64> {
    let p = distribution(eps)?;
    Ok(p.iter().zip(x2).map(|(p, x)| p * x).sum())
}

pub fn spread_functional(theta: &[f64], m: &KSpaceLocalMatrix, x2: &[f64]) -> Result<f64> {
    spread_from_profile(&m.excess_profile(theta), x2)
}

/// Direct evaluation `eps_j = <psi|h_j|psi> - omega_vac / l` on a full state.
pub fn energy_excess(psi: &Vector, h: &LocalHamiltonian, vacuum_energy: f64) -> Vec<f64> {
    let l = h.length;
    h.terms.iter().map(|t| term_expectation(t, l, psi).re - vacuum_energy / l as f64).collect()
}

/// Maps the reduced parameters to the `l` phases. With the parity gauge the
/// free parameters are `theta_n`, `n = 1..=l/2`, with `theta_{l-n} = theta_n`;
/// otherwise `theta_1..theta_{l-1}`. `theta_0 = 0` in both cases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GaugeParametrization {
    ParitySymmetric,
    Free,
}

impl GaugeParametrization {
    pub fn count(self, l: usize) -> usize {
        match self {
            GaugeParametrization::ParitySymmetric => l / 2,
            GaugeParametrization::Free => l - 1,
        }
    }

    pub fn expand(self, l: usize, x: &[f64]) -> Vec<f64> {
        let mut theta = vec![0.0; l];
        match self {
            GaugeParametrization::ParitySymmetric => {
                for (i, &v) in x.iter().enumerate() {
                    theta[i + 1] = v;
                    theta[l - 1 - i] = v;
                }
            }
            GaugeParametrization::Free => theta[1..].copy_from_slice(x),
        }
        theta
    }

    fn pull_back(self, l: usize, g: &[f64]) -> Vec<f64> {
        match self {
            GaugeParametrization::ParitySymmetric => (0..l / 2)
                .map(|i| {
                    let (a, b) = (i + 1, l - 1 - i);
                    if a == b { g[a] } else { g[a] + g[b] }
                })
                .collect(),
            GaugeParametrization::Free => g[1..].to_vec(),
        }
    }
}

/// Spread and its gradient with respect to the full phase vector.
pub fn spread_and_gradient(theta: &[f64], m: &KSpaceLocalMatrix, x2: &[f64]) -> Result<(f64, Vec<f64>)> {
    let l = m.l;
    let (eps, jac) = m.excess_with_jacobian(theta);
    let total: f64 = eps.iter().map(|e| e.abs()).sum();
    let p = distribution(&eps)?;
    let s2: f64 = p.iter().zip(x2).map(|(p, x)| p * x).sum();
    let mut grad = vec![0.0; l];
    for j in 0..l {
        let w = (x2[j] - s2) * eps[j].signum() / total;
        for k in 0..l {
            grad[k] += w * jac[[j, k]];
        }
    }
    Ok((s2, grad))
}

#[derive(Clone, Debug)]
pub struct WannierOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub gauge: GaugeParametrization,
}

impl Default for WannierOptions {
    fn default() -> Self {
        WannierOptions {
            restarts: 32,
            seed: 0,
            max_iter: 2000,
            grad_tol: 1e-8,
            gauge: GaugeParametrization::ParitySymmetric,
        }
    }
}

#[derive(Clone, Debug)]
pub struct WannierState {
    pub theta: Vec<f64>,
    pub center: usize,
    pub state: Vector,
    pub excess: Vec<f64>,
    pub distribution: Vec<f64>,
    pub spread2: f64,
    pub grad_norm: f64,
    /// False when no start reached the gradient tolerance (or zero spread);
    /// the best point found is returned anyway.
    pub converged: bool,
}

impl WannierState {
    pub fn sigma(&self) -> f64 {
        self.spread2.sqrt()
    }
}

/// `l^{-1/2} sum_k e^{i theta_k} |phi_k>` as a full state vector.
pub fn wannier_state(band: &BlochBand, theta: &[f64]) -> Vector {
    let l = band.l;
    let mut psi = Vector::zeros(band.states[0].len());
    for n in 0..l {
        let c = C64::from_polar(1.0 / (l as f64).sqrt(), theta[n]);
        psi.scaled_add(c, &band.states[n]);
    }
    psi
}

const ZERO_SPREAD: f64 = 1e-12;

struct Descent {
    x: Vec<f64>,
    f: f64,
    grad_norm: f64,
    converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BFGS with Armijo backtracking; every accepted step lowers the objective.
fn bfgs<F>(f: F, x0: Vec<f64>, max_iter: usize, grad_tol: f64) -> Result<Descent>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let (mut fx, mut g) = f(&x0)?;
    let mut x = x0;
    if n == 0 {
        return Ok(Descent { x, f: fx, grad_norm: 0.0, converged: true });
    }
    let mut hinv = Array2::<f64>::eye(n);
    let mut stalled = 0;
    for _ in 0..max_iter {
        let gn = dot(&g, &g).sqrt();
        // the spread is non-negative, so zero is a global minimum even when
        // it sits on a kink of |eps_j|
        if gn <= grad_tol || fx <= ZERO_SPREAD {
            return Ok(Descent { x, f: fx, grad_norm: gn, converged: true });
        }
        let mut d: Vec<f64> = (0..n).map(|i| -(0..n).map(|k| hinv[[i, k]] * g[k]).sum::<f64>()).collect();
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            hinv = Array2::eye(n);
            d = g.iter().map(|v| -v).collect();
            slope = -gn * gn;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let (fn_, gn_) = f(&xn)?;
            if fn_ <= fx + 1e-4 * step * slope {
                accepted = Some((xn, fn_, gn_));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gnew)) = accepted else {
            return Ok(Descent { x, f: fx, grad_norm: gn, converged: fx <= ZERO_SPREAD });
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|k| hinv[[i, k]] * y[k]).sum()).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for k in 0..n {
                    hinv[[i, k]] += (sy + yhy) * s[i] * s[k] / (sy * sy) - (hy[i] * s[k] + s[i] * hy[k]) / sy;
                }
            }
        }
        // creeping along a kink of |eps_j|: no further useful progress
        stalled = if step < 1e-3 && fx - fn_ <= 1e-15 * fx.abs().max(1e-300) { stalled + 1 } else { 0 };
        x = xn;
        fx = fn_;
        g = gnew;
        if stalled >= 20 {
            break;
        }
    }
    let gn = dot(&g, &g).sqrt();
    Ok(Descent { x, f: fx, grad_norm: gn, converged: gn <= grad_tol || fx <= ZERO_SPREAD })
}

/// Minimize the spread over Bloch phases: one start at `theta = 0` plus
/// `restarts` uniformly random starts; the lowest spread wins.
pub fn minimize_spread(band: &BlochBand, m: &KSpaceLocalMatrix, options: &WannierOptions) -> Result<WannierState> {
    let l = band.l;
    let gauge = options.gauge;
    let x2 = distance_squared(l, 0);
    let objective = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        let theta = gauge.expand(l, x);
        let (s2, g) = spread_and_gradient(&theta, m, &x2)?;
        Ok((s2, gauge.pull_back(l, &g)))
    };
    let npar = gauge.count(l);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut best: Option<Descent> = None;
    for r in 0..=options.restarts {
        let x0: Vec<f64> = if r == 0 { vec![0.0; npar] } else { (0..npar).map(|_| rng.random_range(-PI..PI)).collect() };
        let run = bfgs(objective, x0, options.max_iter, options.grad_tol)?;
        if best.as_ref().map_or(true, |b| run.f < b.f) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    let theta: Vec<f64> = gauge
        .expand(l, &best.x)
        .into_iter()
        .map(|t| (t + PI).rem_euclid(2.0 * PI) - PI)
        .collect();
    if !best.converged {
        log::warn!("Wannier optimization stopped at gradient norm {:.3e}", best.grad_norm);
    }
    let excess = m.excess_profile(&theta);
    let distribution = distribution(&excess)?;
    Ok(WannierState {
        state: wannier_state(band, &theta),
        spread2: best.f,
        grad_norm: best.grad_norm,
        converged: best.converged,
        theta,
        center: 0,
        excess,
        distribution,
    })
}
