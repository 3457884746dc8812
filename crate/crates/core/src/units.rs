//! Unit-carrying scalars used at module boundaries.
//!
//! Internally the solvers work in SI (lengths converted from µm, densities
//! from cm⁻³) after one conversion at the edge; these wrappers keep callers
//! from mixing the two.

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! unit {
    ($(#[$m:meta])* $name:ident, $suffix:literal) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub f64);

        impl $name {
            #[inline]
            pub fn value(self) -> f64 {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{} {}", self.0, $suffix)
            }
        }

        impl From<f64> for $name {
            fn from(v: f64) -> Self {
                $name(v)
            }
        }
    };
}

unit!(
    /// Absolute temperature.
    Kelvin,
    "K"
);
unit!(
    /// Energy in electron-volts.
    ElectronVolts,
    "eV"
);
unit!(
    /// Electrostatic potential or applied bias.
    Volts,
    "V"
);
unit!(Micrometers, "µm");
unit!(
    /// Number density in cm⁻³.
    PerCubicCm,
    "cm⁻³"
);

impl PerCubicCm {
    pub fn to_per_cubic_m(self) -> f64 {
        self.0 * 1e6
    }

    pub fn from_per_cubic_m(v: f64) -> Self {
        PerCubicCm(v * 1e-6)
    }
}

impl Micrometers {
    pub fn to_m(self) -> f64 {
        self.0 * 1e-6
    }
}

/// Shortest round-trip form; exponent notation outside [1e-4, 1e15).
pub fn num(x: f64) -> String {
    let x = x + 0.0;
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}
