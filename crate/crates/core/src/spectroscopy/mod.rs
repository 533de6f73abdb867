//! Exact diagonalization in translation / charge-conjugation sectors and
//! quasiparticle band extraction.

pub mod bands;
pub mod sector;
pub mod symmetry;

pub use bands::{
    band_centroid, classify_bands, fourier_interpolate_dispersion, BandLabel, BlochBand,
    Dispersion, Eigenstate, Spectrum, SpectrumSolver,
};
pub use sector::{sector_diagonalize, EigenMethod, OrbitTable, SectorBasis};
pub use symmetry::{momentum, momentum_index, momentum_projector, MomentumProjector, SymmetryOps};
