//! Small-lattice chain: spectrum, band, maximally localized Wannier state
//! and dressed creation operator.

use crate::creation::CreationOperator;
use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, Boundary, GaugeGroup};
use crate::spectroscopy::{classify_bands, fourier_interpolate_dispersion, BlochBand, Dispersion, EigenMethod, Spectrum, SpectrumSolver};
use crate::wannier::{minimize_spread, precompute_kspace_matrix, WannierOptions, WannierState};

#[derive(Clone, Debug)]
pub struct Quasiparticle {
    pub group: GaugeGroup,
    pub lambda: f64,
    pub spectrum: Spectrum,
    pub band: BlochBand,
    pub dispersion: Dispersion,
    pub wannier: WannierState,
    pub creation: CreationOperator,
}

/// Band by name (`"0_1^++"`) among the lowest `depth` levels per sector.
pub fn select_band(spectrum: &Spectrum, name: &str, depth: usize) -> Result<BlochBand> {
    let bands = classify_bands(spectrum, depth)?;
    let names: Vec<String> = bands.iter().map(|b| b.label.name()).collect();
    bands
        .into_iter()
        .find(|b| b.label.name() == name)
        .ok_or_else(|| Error::Classification(format!("band {name} not found among {names:?}")))
}

pub fn extract_quasiparticle(
    group: GaugeGroup,
    lambda: f64,
    l: usize,
    band_name: &str,
    width: usize,
    wannier: &WannierOptions,
) -> Result<Quasiparticle> {
    let h = build_hamiltonian(group, lambda, l, Boundary::Periodic)?;
    let solver = SpectrumSolver::new(l)?;
    let depth = band_name
        .strip_prefix("0_")
        .and_then(|s| s.split('^').next())
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| Error::InvalidParameter(format!("band name {band_name}")))?;
    let spectrum = solver.spectrum(&h, depth, EigenMethod::Auto)?;
    let band = select_band(&spectrum, band_name, depth)?;
    let dispersion = fourier_interpolate_dispersion(&band.omega);
    let m = precompute_kspace_matrix(&band, h.term(0))?;
    let w = minimize_spread(&band, &m, wannier)?;
    if !w.converged {
        log::warn!("Wannier minimization did not reach the gradient tolerance ({:.2e})", w.grad_norm);
    }
    let creation = CreationOperator::extract(&w.state, &spectrum.vacuum, l, w.center, width)?;
    Ok(Quasiparticle { group, lambda, spectrum, band, dispersion, wannier: w, creation })
}
