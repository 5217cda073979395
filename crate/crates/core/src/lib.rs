//! Fidelity-constrained entanglement routing.
//!
//! A fidelity target on Werner-state pairs becomes a hop bound; hop-bounded
//! multi-commodity flow is solved as a linear program over a layered copy of
//! the network; the flow is decomposed into paths with end-to-end rates; and
//! those rates are checked against a brute-force path formulation and a
//! Monte-Carlo simulation of the prepare-and-swap protocol.

pub mod config;
pub mod demands;
pub mod edge_lp;
pub mod error;
pub mod extraction;
pub mod fidelity;
pub mod instances;
pub mod layering;
pub mod lp;
pub mod oracle;
pub mod pipeline;
pub mod sim;
pub mod topology;
pub mod zoo;

pub use config::Tolerances;
pub use demands::{reduce_demands, Demand, DemandEntry, DemandSet};
pub use edge_lp::{build_edge_lp, check_flow_feasibility, flow_from_solution, FlowSolution};
pub use error::{Error, Result};
pub use extraction::{extract_paths, verify_assignment, ExtractedPath, PathAssignment};
pub use fidelity::{
    end_to_end_fidelity, fidelity_to_werner, length_bound, swap_compose, FidelityTarget,
    LengthBound, WernerParameter,
};
pub use layering::{build_layered_graph, decompose_demands, LayeredGraph, SubDemand};
pub use lp::{export_lp_text, solve_lp, LinearProgram, LpSolution, LpStatus};
pub use oracle::oracle_optimum;
pub use pipeline::{Header, Problem};
pub use sim::{
    analytic_chain_rate, build_link_schedule, simulate_chain, simulate_network, storage_time_bound,
    LinkSchedule, Scheduling, SimulationConfig, SimulationReport,
};
pub use topology::{load_topology, to_directed, validate_graph, GraphBuilder, NetworkGraph};
