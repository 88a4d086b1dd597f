use thiserror::Error;

use crate::greenfn::GreenError;
use crate::invbranch::InvBranchError;
use crate::localmodel::LocalModelError;
use crate::lyapunov::LyapunovError;
use crate::measures::MeasureError;
use crate::projspace::mapfile::MapFileError;
use crate::projspace::ProjError;

/// Any error raised by the library, tagged by the module it came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error("projspace: {0}")]
    Proj(#[from] ProjError),
    #[error("map file: {0}")]
    MapFile(#[from] MapFileError),
    #[error("greenfn: {0}")]
    Green(#[from] GreenError),
    #[error("measures: {0}")]
    Measure(#[from] MeasureError),
    #[error("lyapunov: {0}")]
    Lyapunov(#[from] LyapunovError),
    #[error("invbranch: {0}")]
    InvBranch(#[from] InvBranchError),
    #[error("localmodel: {0}")]
    LocalModel(#[from] LocalModelError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
