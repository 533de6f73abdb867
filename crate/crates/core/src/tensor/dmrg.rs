use ndarray::Array4;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::contract::{two_site_apply, Environments};
use super::{Mpo, Mps, Truncation};
use crate::error::{Error, Result};
use crate::krylov::lanczos_lowest_relaxed;
use crate::linalg::Vector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DmrgOptions {
    pub trunc: Truncation,
    /// Sweep-to-sweep energy change below which the run counts as converged.
    pub tol: f64,
    pub max_sweeps: usize,
    pub min_sweeps: usize,
    /// Bond dimension of the random initial state.
    pub initial_chi: usize,
    pub lanczos_iter: usize,
    pub seed: u64,
}

impl Default for DmrgOptions {
    fn default() -> Self {
        DmrgOptions {
            trunc: Truncation { cutoff: 1e-12, max_chi: 100 },
            tol: 1e-10,
            max_sweeps: 30,
            min_sweeps: 2,
            initial_chi: 8,
            lanczos_iter: 60,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DmrgResult {
    pub state: Mps,
    pub energy: f64,
    /// Energy after each full (left-right-left) sweep.
    pub sweep_energies: Vec<f64>,
    pub converged: bool,
}

fn flatten(t: &Array4<crate::linalg::C64>) -> Vector {
    t.iter().copied().collect()
}

/// Two-site DMRG from a seeded random state. On non-convergence the best
/// state is still returned with `converged = false`.
pub fn dmrg_ground_state(h: &Mpo, options: &DmrgOptions) -> Result<DmrgResult> {
    let l = h.len();
    if l < 2 {
        return Err(Error::InvalidParameter("DMRG needs at least two sites".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut psi = Mps::random(l, h.d, options.initial_chi.max(1), &mut rng);
    psi.canonicalize(0);
    let mut env = Environments::new(&psi, h);
    let mut energy = f64::INFINITY;
    let mut sweep_energies = Vec::new();
    let mut converged = false;

    let optimize = |psi: &mut Mps, env: &Environments, j: usize, right: bool| -> Result<f64> {
        let theta = psi.two_site(j);
        let shape = theta.dim();
        let (lj, w1, w2, rj) = (&env.left[j], &h.tensors[j], &h.tensors[j + 1], &env.right[j + 1]);
        let dim = theta.len();
        let matvec = |v: &Vector| -> Vector {
            let x = Array4::from_shape_vec(shape, v.to_vec()).expect("shape");
            flatten(&two_site_apply(lj, w1, w2, rj, &x))
        };
        let res = lanczos_lowest_relaxed(matvec, &flatten(&theta), dim, 1, 1e-10, options.lanczos_iter.min(dim))?;
        let ground = Array4::from_shape_vec(shape, res.vectors[0].to_vec()).expect("shape");
        psi.set_two_site(j, &ground, &options.trunc, right)?;
        Ok(res.values[0])
    };

    for sweep in 0..options.max_sweeps {
        let mut e = 0.0;
        for j in 0..l - 1 {
            e = optimize(&mut psi, &env, j, true)?;
            env.update_left(&psi, h, j);
        }
        for j in (0..l - 1).rev() {
            e = optimize(&mut psi, &env, j, false)?;
            env.update_right(&psi, h, j + 1);
        }
        sweep_energies.push(e);
        let delta = (energy - e).abs();
        energy = e;
        if sweep + 1 >= options.min_sweeps && delta < options.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("DMRG did not converge within {} sweeps", options.max_sweeps);
    }
    psi.normalize()?;
    Ok(DmrgResult { state: psi, energy, sweep_energies, converged })
}
