//! Numerical laboratory for holomorphic endomorphisms of the complex
//! projective plane.
//!
//! The crate is organised bottom-up:
//!
//! * [`projspace`] – homogeneous points, polynomial maps, tangent maps, the
//!   chordal metric and the map file format.
//! * [`greenfn`] – escape-rate Green functions and tabulated local potentials.
//! * [`measures`] – equilibrium-measure sampling by random backward iteration
//!   of fibered maps, test functions and slice/trace pairings.
//! * [`lyapunov`] – Lyapunov exponents from Fubini–Study corrected cocycles.
//! * [`invbranch`] – backward orbits, contraction profiles and their decay
//!   diagnostics.
//! * [`localmodel`] – quadrature checks of the flat local model
//!   `G₀(z, w) = Re z + |w|²` of a Lattès suspension near its Julia set.

pub mod error;
pub mod greenfn;
pub mod invbranch;
pub mod localmodel;
pub mod lyapunov;
pub mod maps;
pub mod measures;
pub mod numeric;
pub mod projspace;
pub mod record;
pub mod rng;

pub use error::Error;
pub use greenfn::{GreenEval, PotentialGrid};
pub use invbranch::{BackwardOrbit, ContractionProfile};
pub use lyapunov::LyapunovEstimate;
pub use measures::{PointCloudMeasure, TestFn};
pub use projspace::{HomPoint, HomPolyMap, TangentFrame};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
