use ndarray::{Array3, Array4};
use serde::{Deserialize, Serialize};

use super::contract::{one_site_apply, two_site_apply, Environments};
use super::{Mpo, Mps, Truncation};
use crate::error::{Error, Result};
use crate::krylov::expm_krylov_adaptive;
use crate::linalg::{Vector, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_max: f64,
    pub trunc: Truncation,
    /// Error target of each local Krylov exponential.
    pub krylov_tol: f64,
    pub krylov_dim: usize,
}

impl EvolutionConfig {
    pub fn new(dt: f64, t_max: f64) -> Self {
        EvolutionConfig { dt, t_max, trunc: Truncation::default(), krylov_tol: 1e-12, krylov_dim: 40 }
    }

    pub fn steps(&self) -> usize {
        (self.t_max / self.dt).round().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt = {}", self.dt)));
        }
        if !(self.trunc.cutoff >= 0.0) || self.t_max < 0.0 {
            return Err(Error::InvalidParameter("negative cutoff or t_max".into()));
        }
        Ok(())
    }
}

fn flat3(t: &Array3<C64>) -> Vector {
    t.iter().copied().collect()
}

fn flat4(t: &Array4<C64>) -> Vector {
    t.iter().copied().collect()
}

/// Symmetric two-site TDVP integrator holding the state and its cached
/// environments.
pub struct Tdvp<'a> {
    pub state: Mps,
    h: &'a Mpo,
    env: Environments,
    pub config: EvolutionConfig,
    pub time: f64,
}

impl<'a> Tdvp<'a> {
    pub fn new(mut state: Mps, h: &'a Mpo, config: EvolutionConfig) -> Result<Self> {
        config.validate()?;
        if state.len() != h.len() || state.len() < 2 {
            return Err(Error::Dimension("state and Hamiltonian lengths differ or chain too short".into()));
        }
        state.canonicalize(0);
        let env = Environments::new(&state, h);
        Ok(Tdvp { state, h, env, config, time: 0.0 })
    }

    fn evolve_two(&mut self, j: usize, tau: C64) -> Result<Array4<C64>> {
        let theta = self.state.two_site(j);
        let shape = theta.dim();
        let (lj, w1, w2, rj) = (&self.env.left[j], &self.h.tensors[j], &self.h.tensors[j + 1], &self.env.right[j + 1]);
        let mv = |v: &Vector| -> Vector {
            let x = Array4::from_shape_vec(shape, v.to_vec()).expect("shape");
            flat4(&two_site_apply(lj, w1, w2, rj, &x))
        };
        let out = expm_krylov_adaptive(mv, &flat4(&theta), tau, self.config.krylov_tol, self.config.krylov_dim)?;
        Ok(Array4::from_shape_vec(shape, out.to_vec()).expect("shape"))
    }

    fn evolve_one(&mut self, j: usize, tau: C64) -> Result<()> {
        let a = self.state.tensors[j].clone();
        let shape = a.dim();
        let (lj, w, rj) = (&self.env.left[j], &self.h.tensors[j], &self.env.right[j]);
        let mv = |v: &Vector| -> Vector {
            let x = Array3::from_shape_vec(shape, v.to_vec()).expect("shape");
            flat3(&one_site_apply(lj, w, rj, &x))
        };
        let out = expm_krylov_adaptive(mv, &flat3(&a), tau, self.config.krylov_tol, self.config.krylov_dim)?;
        self.state.tensors[j] = Array3::from_shape_vec(shape, out.to_vec()).expect("shape");
        Ok(())
    }

    /// One step of length `dt`: a left-to-right and a right-to-left half
    /// sweep, each over `dt / 2`.
    pub fn step(&mut self) -> Result<()> {
        let l = self.state.len();
        let half = C64::new(0.0, -0.5 * self.config.dt);
        let trunc = self.config.trunc;
        debug_assert_eq!(self.state.center, Some(0));
        for j in 0..l - 1 {
            let theta = self.evolve_two(j, half)?;
            self.state.set_two_site(j, &theta, &trunc, true)?;
            self.env.update_left(&self.state, self.h, j);
            if j + 1 < l - 1 {
                self.evolve_one(j + 1, -half)?;
            }
        }
        for j in (0..l - 1).rev() {
            let theta = self.evolve_two(j, half)?;
            self.state.set_two_site(j, &theta, &trunc, false)?;
            self.env.update_right(&self.state, self.h, j + 1);
            if j > 0 {
                self.evolve_one(j, -half)?;
            }
        }
        self.time += self.config.dt;
        Ok(())
    }

    pub fn energy(&self) -> Result<f64> {
        Ok(self.h.expectation(&self.state)?.re)
    }
}

/// Evolve for `config.steps()` steps, calling `observe(step, time, state)`
/// before the first step and after every step.
pub fn tdvp_evolve<F>(state: Mps, h: &Mpo, config: EvolutionConfig, mut observe: F) -> Result<Mps>
where
    F: FnMut(usize, f64, &mut Mps) -> Result<()>,
{
    let steps = config.steps();
    let mut run = Tdvp::new(state, h, config)?;
    // observers may move the orthogonality center, so they get a copy
    let mut snapshot = run.state.clone();
    observe(0, 0.0, &mut snapshot)?;
    for n in 1..=steps {
        run.step()?;
        let mut snapshot = run.state.clone();
        observe(n, run.time, &mut snapshot)?;
    }
    Ok(run.state)
}
