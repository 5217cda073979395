use thiserror::Error;

use crate::demands::DemandError;
use crate::extraction::ExtractionError;
use crate::fidelity::FidelityError;
use crate::lp::LpError;
use crate::oracle::OracleError;
use crate::sim::SimulationError;
use crate::topology::TopologyError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Fidelity(#[from] FidelityError),
    #[error(transparent)]
    Demand(#[from] DemandError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error("document: {0}")]
    Document(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
