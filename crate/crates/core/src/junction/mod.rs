//! 2-D electrostatics of the stripe Schottky contact: nonlinear Poisson,
//! depletion contours and voltages, local fields and the diode law.

mod banded;
mod contour;
mod depletion;
mod iv;
mod mesh;
mod poisson;
mod solution;

pub use contour::{marching_squares, Polyline};
pub use depletion::{depletion_voltage, DepletionSearch, DepletionVoltage};
pub use iv::{forward_voltage, iv_curve};
pub use mesh::{graded_axis, Mesh2D, MeshSpec, NodeKind};
pub use poisson::{solve_poisson, solve_poisson_from, SolverOptions, MAX_ABS_BIAS_V};
pub use solution::{ConvergenceReport, DefectSite, FieldSolution, DEFAULT_THRESHOLD_CM3};
