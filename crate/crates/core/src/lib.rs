//! Simulation toolkit for a single V2 silicon-vacancy centre next to a
//! cryogenic 4H-SiC Schottky junction.
//!
//! The crate covers junction electrostatics ([`junction`]), Stark shifts and
//! PLE line synthesis ([`optics`]), charge-trap telegraph dynamics ([`trap`]),
//! phonon-resolved photoionization ([`photoion`]), photon-counting readout
//! protocols ([`readout`]) and a scenario-driven runner ([`scenario`]).

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::excessive_precision
)]

pub mod error;
pub mod fit;
pub mod junction;
pub mod optics;
pub mod photoion;
pub mod physics;
pub mod readout;
pub mod scenario;
pub mod trap;
pub mod units;

pub use error::{Error, ErrorCategory, Result};
