use crate::linalg::{C64, Mat, ONE};
use std::f64::consts::PI;

/// Three-state clock operators: `sigma = diag(1, eta, eta^2)` and the cyclic
/// shift `tau |q> = |q+1 mod 3>`.
#[derive(Clone, Debug)]
pub struct ClockAlgebra {
    pub sigma: Mat,
    pub tau: Mat,
    pub eta: C64,
}

pub fn clock_algebra() -> ClockAlgebra {
    let eta = C64::from_polar(1.0, 2.0 * PI / 3.0);
    let mut sigma = Mat::zeros((3, 3));
    let mut tau = Mat::zeros((3, 3));
    for q in 0..3 {
        sigma[[q, q]] = eta.powu(q as u32);
        tau[[(q + 1) % 3, q]] = ONE;
    }
    ClockAlgebra { sigma, tau, eta }
}
