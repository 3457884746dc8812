//! Physical constants, device/material parameter records and carrier statistics.

mod carriers;
mod constants;
mod material;

pub(crate) use carriers::softplus;
pub use carriers::{
    electron_occupancy, equilibrium_bulk_density, equilibrium_bulk_density_with,
    ln_electron_occupancy, richardson_constant, thermal_voltage, BulkEquilibrium,
    CarrierStatistics, DonorIonization, Layer, Occupancy, EXPONENT_CLAMP,
};
pub use constants::{PhysicalConstants, CONSTANTS};
pub use material::{ChargeLevelDiagram, ContactGeometry, MaterialStack};
