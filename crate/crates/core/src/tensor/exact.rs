use crate::error::{Error, Result};
use crate::krylov::expm_krylov_adaptive;
use crate::linalg::{Vector, C64};
use crate::sparse::CsrMatrix;

/// Largest dense dimension accepted by the exact oracle.
pub const MAX_EXACT_DIM: usize = 1_594_323; // 3^13

/// `[v, e^{-iH dt} v, ..., e^{-iH steps dt} v]` with an adaptive Krylov
/// exponential per step (error target 1e-11).
pub fn krylov_exact_evolve(psi: &Vector, h: &CsrMatrix, dt: f64, steps: usize) -> Result<Vec<Vector>> {
    if psi.len() > MAX_EXACT_DIM {
        return Err(Error::TooLarge(format!("dimension {} above 3^13", psi.len())));
    }
    if h.n != psi.len() {
        return Err(Error::Dimension(format!("state {} vs operator {}", psi.len(), h.n)));
    }
    let mut out = Vec::with_capacity(steps + 1);
    out.push(psi.clone());
    let tau = C64::new(0.0, -dt);
    for _ in 0..steps {
        let next = expm_krylov_adaptive(|v| h.matvec(v), out.last().unwrap(), tau, 1e-11, 60)?;
        out.push(next);
    }
    Ok(out)
}
