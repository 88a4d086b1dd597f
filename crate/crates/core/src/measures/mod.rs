//! Equilibrium-measure sampling by backward iteration, univariate roots,
//! test functions and quadrature pairings of slice and trace measures.

mod cloud;
mod pairing;
mod preimage;
mod roots;
mod testfn;

pub use cloud::{
    pair_cloud, pair_cloud_with_error, sample_equilibrium, CloudMeta, PointCloudMeasure, MIN_COUNT,
    MIN_DEPTH,
};
pub use pairing::{slice_pairing, trace_pairing, Direction, PairingValue};
pub use preimage::{preimages_fibered, random_preimage, Preimages, RandomPreimage, COLLISION_TOL, PREIMAGE_RESIDUAL};
pub use roots::{horner, roots_univariate, MAX_ROOT_DEGREE, ROOT_RESIDUAL};
pub use testfn::{Support, TestFn};

use thiserror::Error;

use crate::projspace::ProjError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("ill-conditioned root problem: {0}")]
    IllConditioned(String),
    #[error("preimage computation failed: {0}")]
    RootFailure(String),
    #[error("degenerate fiber: the target has no base coordinates")]
    DegenerateFiber,
    #[error("backward sampling needs a fibered map")]
    NotFibered,
    #[error("exceptional start: {failed} of {count} walks hit a degenerate fiber")]
    ExceptionalStart { failed: usize, count: usize },
    #[error("test function support touches the grid boundary: {0}")]
    SupportViolation(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Proj(#[from] ProjError),
}
