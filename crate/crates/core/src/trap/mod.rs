//! Charge-trap Markov model: line jumps, transients, motional averaging.

mod gillespie;
mod model;
mod spectra;
mod stationary;
mod transient;

pub use gillespie::{simulate_trajectory, ConditionSchedule, TrapTrajectory};
pub use model::{Condition, Generator, TrapMarkovModel};
pub use spectra::{jump_spectrum, ple_with_trap, SwitchingRegime, TrapScanSettings, TrapScanStack};
pub use stationary::{stationary_distribution, ClassDistribution, StationaryResult};
pub use transient::{
    fit_exponential, propagate, relaxation_rates, transient_recovery, ExponentialFit, InitialState,
    TransientProtocol, TransientResult,
};
