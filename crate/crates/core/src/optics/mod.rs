//! Local field and carrier environment → PLE observables.

mod lineshape;
mod model;
mod ple;
mod stark;

pub use lineshape::{
    composite_lorentzian, effective_two_laser_linewidth, excess_broadening, fourier_limit,
    gaussian_fwhm_for_total, homogeneous_lines, lorentzian, olivero_fwhm, symmetric_fwhm, voigt,
};
pub use model::{BroadeningLaw, DefectOpticalModel};
pub use ple::{
    composite_voigt, fit_ple, synthesize_ple_scan, PleFit, PleScanSettings, PleSpectrum, ScanGrid,
};
pub use stark::{fit_stark_coefficients, stark_detuning, StarkFit};
