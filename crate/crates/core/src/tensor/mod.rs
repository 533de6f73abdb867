//! Open-boundary matrix product states and operators: DMRG, two-site TDVP,
//! operator application and summation, reduced density matrices.

mod contract;
pub mod dmrg;
pub mod exact;
pub mod mpo;
pub mod mps;
pub mod tdvp;

use ndarray::{Array, ArrayBase, Data, Dimension, IntoDimension, Ix3, Ix4};
use serde::{Deserialize, Serialize};

use crate::linalg::{Mat, C64};

pub use contract::Environments;
pub use dmrg::{dmrg_ground_state, DmrgOptions, DmrgResult};
pub use exact::krylov_exact_evolve;
pub use mpo::{apply_mpo, mpo_sum_compress, Mpo};
pub use mps::Mps;
pub use tdvp::{tdvp_evolve, EvolutionConfig, Tdvp};

/// SVD truncation policy: discard the smallest Schmidt values while their
/// cumulative relative weight stays below `cutoff`, keep at most `max_chi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub cutoff: f64,
    pub max_chi: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation { cutoff: 1e-10, max_chi: 100 }
    }
}

impl Truncation {
    pub fn exact() -> Self {
        Truncation { cutoff: 0.0, max_chi: usize::MAX }
    }
}

/// Accumulated truncation bookkeeping.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TruncationLog {
    pub steps: usize,
    /// Sum of relative discarded weights over all truncations.
    pub total_discarded: f64,
    pub max_discarded: f64,
    pub max_bond: usize,
    /// Number of truncations that hit the bond-dimension cap.
    pub saturated: usize,
}

impl TruncationLog {
    pub fn record(&mut self, discarded: f64, kept: usize) {
        self.steps += 1;
        self.total_discarded += discarded;
        self.max_discarded = self.max_discarded.max(discarded);
        self.max_bond = self.max_bond.max(kept);
    }

    pub fn record_capped(&mut self, discarded: f64, kept: usize, cap: usize) {
        self.record(discarded, kept);
        if kept >= cap {
            self.saturated += 1;
        }
    }

    pub fn merge(&mut self, other: &TruncationLog) {
        self.steps += other.steps;
        self.total_discarded += other.total_discarded;
        self.max_discarded = self.max_discarded.max(other.max_discarded);
        self.max_bond = self.max_bond.max(other.max_bond);
        self.saturated += other.saturated;
    }
}

/// Reshape in row-major order, copying first when the layout requires it.
pub(crate) trait ReshapeC {
    fn reshape_c<E: IntoDimension>(self, shape: E) -> Array<C64, E::Dim>;
}

impl<D: Dimension> ReshapeC for Array<C64, D> {
    fn reshape_c<E: IntoDimension>(self, shape: E) -> Array<C64, E::Dim> {
        let a = if self.is_standard_layout() { self } else { self.as_standard_layout().into_owned() };
        a.into_shape_with_order(shape).expect("reshape")
    }
}

/// Matricize a rank-3 tensor (any layout) in row-major order.
pub(crate) fn mat<S: Data<Elem = C64>>(t: &ArrayBase<S, Ix3>, rows: usize, cols: usize) -> Mat {
    t.as_standard_layout().into_owned().into_shape_with_order((rows, cols)).expect("reshape")
}

pub(crate) fn mat4<S: Data<Elem = C64>>(t: &ArrayBase<S, Ix4>, rows: usize, cols: usize) -> Mat {
    t.as_standard_layout().into_owned().into_shape_with_order((rows, cols)).expect("reshape")
}
