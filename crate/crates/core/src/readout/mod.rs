//! Photon-counting readout: charge-resonance checks, single-shot readout, coherence fits.

mod coherence;
mod crc;
mod diffusion;
mod ssr;

pub use coherence::{
    coherence_csv, coherence_decay, dd_scaling_fit, fit_stretched_exponential, CoherenceDataset,
    DdScalingFit, StretchedFit,
};
pub use crc::{
    calibrate_ou_sigma, count_moments, crc_success_rate, histogram_csv, hwhm_reference_threshold,
    simulate_crc, threshold_for_confidence, threshold_from_moments, CrcOutcome, CrcSettings,
    PhotonCountRecord,
};
pub use diffusion::{DiffusionMode, DiffusionModel, TrapJumps};
pub use ssr::{
    fit_poisson_mixture, optimal_cut, simulate_ssr, PoissonMixture, SsrResult, SsrSettings,
};
