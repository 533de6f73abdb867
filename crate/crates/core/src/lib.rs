//! Quasiparticle wave packets on interacting lattice vacua.
//!
//! Pipeline: symmetry-resolved exact diagonalization of a periodic qutrit
//! chain extracts a quasiparticle band, the band is Wannier-localized, the
//! localized state is turned into a unitary creation operator on a few sites,
//! and matrix-product-state simulations on a large open chain prepare,
//! propagate and detect wave packets built from that operator.

pub mod creation;
pub mod detection;
pub mod error;
pub mod hilbert;
pub mod krylov;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod scattering;
pub mod sparse;
pub mod spectroscopy;
pub mod tensor;
pub mod wannier;

pub use error::{Error, Result};
pub use linalg::C64;
