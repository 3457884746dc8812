//! Vibrationally resolved photoionization: spectral function, cross section, rates.

mod cross_section;
mod rate;
mod spectral;

pub use cross_section::{
    convolve_cross_section, parse_cross_section_csv, parse_mode_csv, ElectronicCrossSection,
};
pub use rate::{
    fit_fermi_threshold, rate_per_power, spot_area_um2, two_photon_rate, FermiFit,
    IonizationPipeline, IonizationRateCurve, IonizationSettings, TwoPhotonModel,
    DEFAULT_NUMERICAL_APERTURE,
};
pub use spectral::{
    spectral_function, EnergyGrid, SpectralFunction, TransformOptions, VibrationalModeSet,
};
