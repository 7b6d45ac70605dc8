//! Second-order Bohr-Sommerfeld quantization of 1-D semiclassical
//! pseudo-differential operators, with independent spectral checks.
//!
//! The pipeline is: a [`symbols::SymbolModel`] supplies `p0, p1, p2`;
//! [`orbit`] traces the periodic orbit at energy `E`; [`actions`] assembles
//! `S0, S1, S2`; [`quantize`] solves `S_h(E) = 2πnh` and evaluates the Gram
//! determinant. [`oracle`] diagonalizes the discretized Weyl quantization for
//! ground truth, [`wkb`] builds and checks WKB quasi-modes and
//! [`asymptotics`] verifies stationary-phase expansions.

pub mod actions;
pub mod asymptotics;
pub mod error;
pub mod ode;
pub mod oracle;
pub mod orbit;
pub mod quadrature;
pub mod quantize;
pub mod roots;
pub mod symbols;
pub mod wkb;

pub use error::{Error, Result};
pub use orbit::{Orbit, OrbitOptions, PhaseSpacePoint};
pub use symbols::{catalog_build, Interval, ParamValue, Params, SymbolModel};

/// Version of this crate, recorded in run reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
