//! Decomposition of a layered flow into paths with end-to-end rates.
//!
//! For every sub-demand `(i, j)` the residual flow starts as the LP flow. Each
//! step finds an `s^0 -> e^j` path whose edges all carry more than `eps`,
//! allocates the end-to-end rate `q^(j-1) * min residual`, and subtracts the
//! minimum from every edge on the path. The edges attaining the minimum drop to
//! exactly zero, so a sub-demand needs at most one step per support edge.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::Tolerances;
use crate::demands::DemandSet;
use crate::edge_lp::{swap_weights, FlowSolution, SubDemandFlow};
use crate::layering::{LayeredEdgeIdx, LayeredGraph, LayeredNode, SubDemand};
use crate::topology::{EdgeIdx, NetworkGraph, NodeIdx};

#[derive(Debug, Error, PartialEq)]
pub enum ExtractionError {
    #[error(
        "sub-demand ({demand}, {hops}): source outflow {outflow} left but no path carries more than eps"
    )]
    Breakdown {
        demand: usize,
        hops: u32,
        outflow: f64,
    },
    #[error("extraction epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
}

/// Unallocated flow of one sub-demand during extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualFlow {
    sub: SubDemand,
    edges: Vec<LayeredEdgeIdx>,
    values: Vec<f64>,
    step: usize,
}

impl ResidualFlow {
    pub fn new(flow: &SubDemandFlow) -> Self {
        Self {
            sub: flow.sub,
            edges: flow.edges.clone(),
            values: flow.values.clone(),
            step: 0,
        }
    }

    pub fn sub(&self) -> SubDemand {
        self.sub
    }

    /// Number of allocations performed so far.
    pub fn step(&self) -> usize {
        self.step
    }

    fn slot(&self, e: LayeredEdgeIdx) -> Option<usize> {
        self.edges.binary_search(&e).ok()
    }

    pub fn value(&self, e: LayeredEdgeIdx) -> f64 {
        self.slot(e).map_or(0.0, |k| self.values[k])
    }

    pub fn iter(&self) -> impl Iterator<Item = (LayeredEdgeIdx, f64)> + '_ {
        self.edges.iter().copied().zip(self.values.iter().copied())
    }

    fn source_edges<'a>(&'a self, lg: &'a LayeredGraph) -> impl Iterator<Item = usize> + 'a {
        let s = self.sub.source_node();
        (0..self.edges.len()).filter(move |&k| lg.edge(self.edges[k]).from == s)
    }

    pub fn source_outflow(&self, lg: &LayeredGraph) -> f64 {
        self.source_edges(lg).map(|k| self.values[k]).sum()
    }

    /// Smallest residual value (nonnegativity holds iff this is `>= 0`).
    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest inflow/outflow imbalance over internal layered nodes.
    pub fn max_imbalance(&self, lg: &LayeredGraph) -> f64 {
        let mut balance = std::collections::BTreeMap::<usize, f64>::new();
        for (e, x) in self.iter() {
            let le = lg.edge(e);
            *balance.entry(lg.node_index(le.from)).or_default() -= x;
            *balance.entry(lg.node_index(le.to)).or_default() += x;
        }
        let (s, t) = (
            lg.node_index(self.sub.source_node()),
            lg.node_index(self.sub.sink_node()),
        );
        balance
            .into_iter()
            .filter(|&(n, _)| n != s && n != t)
            .map(|(_, b)| b.abs())
            .fold(0.0, f64::max)
    }
}

/// Depth-first search for an `s^0 -> e^j` path with every residual above `eps`.
///
/// Heads are tried in ascending base-node order; nodes that cannot reach the
/// sink are remembered so each node is expanded at most once.
pub fn find_positive_path(
    r: &ResidualFlow,
    lg: &LayeredGraph,
    eps: f64,
) -> Option<Vec<LayeredEdgeIdx>> {
    let sub = r.sub;
    if sub.hops == 0 || sub.hops > lg.l_max() {
        return None;
    }
    let sink = sub.sink_node();
    let mut dead = vec![false; lg.node_count()];
    // stack of (node, remaining out edges)
    let mut path: Vec<LayeredEdgeIdx> = Vec::new();
    let mut stack: Vec<(LayeredNode, Vec<LayeredEdgeIdx>)> = Vec::new();
    let open = |node: LayeredNode| -> Vec<LayeredEdgeIdx> {
        if node.layer >= sub.hops {
            return Vec::new();
        }
        let mut next: Vec<LayeredEdgeIdx> =
            lg.out_edges(node).filter(|&e| r.value(e) > eps).collect();
        next.reverse();
        next
    };
    let start = sub.source_node();
    stack.push((start, open(start)));
    while let Some((node, pending)) = stack.last_mut() {
        if *node == sink {
            return Some(path);
        }
        let node = *node;
        match pending.pop() {
            Some(e) => {
                let head = lg.edge(e).to;
                if dead[lg.node_index(head)] {
                    continue;
                }
                path.push(e);
                let next = open(head);
                stack.push((head, next));
            }
            None => {
                dead[lg.node_index(node)] = true;
                stack.pop();
                path.pop();
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractedPath {
    pub demand: usize,
    pub hops: u32,
    pub layered_edges: Vec<LayeredEdgeIdx>,
    pub base_edges: Vec<EdgeIdx>,
    /// `hops + 1` base nodes from source to destination.
    pub nodes: Vec<NodeIdx>,
    pub rate: f64,
    /// False when the projected walk revisits a base node.
    pub simple: bool,
}

impl ExtractedPath {
    pub fn len(&self) -> usize {
        self.base_edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base_edges.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemandPaths {
    pub paths: Vec<ExtractedPath>,
    pub total_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathAssignment {
    /// One entry per demand, in demand order; infeasible demands have no paths.
    pub demands: Vec<DemandPaths>,
    pub total_rate: f64,
}

impl PathAssignment {
    pub fn from_paths(demand_count: usize, paths: Vec<ExtractedPath>) -> Self {
        let mut demands = vec![
            DemandPaths {
                paths: Vec::new(),
                total_rate: 0.0
            };
            demand_count
        ];
        for p in paths {
            let d = &mut demands[p.demand];
            d.total_rate += p.rate;
            d.paths.push(p);
        }
        let total_rate = demands.iter().map(|d| d.total_rate).sum();
        Self {
            demands,
            total_rate,
        }
    }

    pub fn paths(&self) -> impl Iterator<Item = &ExtractedPath> {
        self.demands.iter().flat_map(|d| d.paths.iter())
    }
}

fn project(
    lg: &LayeredGraph,
    sub: SubDemand,
    layered: Vec<LayeredEdgeIdx>,
    rate: f64,
) -> ExtractedPath {
    let base_edges: Vec<EdgeIdx> = layered.iter().map(|&e| lg.edge(e).base_edge).collect();
    let mut nodes = vec![sub.source];
    nodes.extend(base_edges.iter().map(|&e| lg.base().edge(e).to));
    let mut seen = nodes.clone();
    seen.sort_unstable();
    seen.dedup();
    ExtractedPath {
        demand: sub.demand,
        hops: sub.hops,
        simple: seen.len() == nodes.len(),
        layered_edges: layered,
        base_edges,
        nodes,
        rate,
    }
}

/// Runs the allocation loop on one sub-demand, calling `observe` after every step.
pub fn extract_sub_demand(
    flow: &SubDemandFlow,
    lg: &LayeredGraph,
    q: f64,
    tol: &Tolerances,
    observe: &mut dyn FnMut(&ResidualFlow),
) -> Result<Vec<ExtractedPath>, ExtractionError> {
    let eps = tol.eps;
    if eps.is_nan() || eps <= 0.0 {
        return Err(ExtractionError::InvalidEpsilon(eps));
    }
    let sub = flow.sub;
    let weight = swap_weights(q, sub.hops)[sub.hops as usize - 1];
    let mut r = ResidualFlow::new(flow);
    let out_degree = r.source_edges(lg).count().max(1) as f64;
    let breakdown = tol.tol_feas * (1.0 + r.edges.len() as f64);
    let mut paths = Vec::new();
    loop {
        let outflow = r.source_outflow(lg);
        if outflow <= eps * out_degree {
            break;
        }
        let Some(path) = find_positive_path(&r, lg, eps) else {
            if outflow > breakdown {
                return Err(ExtractionError::Breakdown {
                    demand: sub.demand,
                    hops: sub.hops,
                    outflow,
                });
            }
            break;
        };
        let slots: Vec<usize> = path
            .iter()
            .map(|&e| r.slot(e).expect("path uses support edges"))
            .collect();
        let bottleneck = slots
            .iter()
            .map(|&k| r.values[k])
            .fold(f64::INFINITY, f64::min);
        for &k in &slots {
            r.values[k] = if r.values[k] == bottleneck {
                0.0
            } else {
                r.values[k] - bottleneck
            };
        }
        r.step += 1;
        let rate = weight * bottleneck;
        if rate > eps * weight {
            paths.push(project(lg, sub, path, rate));
        }
        observe(&r);
    }
    Ok(paths)
}

/// Extracts paths for every sub-demand; sub-demands are processed in parallel
/// and the result is ordered by demand, then hop count, then extraction step.
pub fn extract_paths(
    f: &FlowSolution,
    lg: &LayeredGraph,
    demand_count: usize,
    q: f64,
    tol: &Tolerances,
) -> Result<PathAssignment, ExtractionError> {
    let per_sub: Vec<Vec<ExtractedPath>> = f
        .flows
        .par_iter()
        .map(|flow| extract_sub_demand(flow, lg, q, tol, &mut |_| {}))
        .collect::<Result<_, _>>()?;
    Ok(PathAssignment::from_paths(
        demand_count,
        per_sub.into_iter().flatten().collect(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum AssignmentViolation {
    /// The path is not a walk from the demand's source to its destination.
    BrokenWalk {
        demand: usize,
        path: usize,
    },
    Capacity {
        edge: EdgeIdx,
        load: f64,
        capacity: f64,
    },
    Length {
        demand: usize,
        path: usize,
        length: usize,
        bound: u32,
    },
    Objective {
        total: f64,
        objective: f64,
    },
    PathCount {
        demand: usize,
        hops: u32,
        count: usize,
        bound: usize,
    },
}

/// Checks capacities, hop bounds, the rate total against `objective`, and the
/// per-sub-demand path count bound `|E||V|`.
pub fn verify_assignment(
    pa: &PathAssignment,
    g: &NetworkGraph,
    d: &DemandSet,
    q: f64,
    objective: f64,
    tol: &Tolerances,
) -> Vec<AssignmentViolation> {
    let mut out = Vec::new();
    let mut load = vec![0.0; g.edge_count()];
    let mut counts = std::collections::BTreeMap::<(usize, u32), usize>::new();
    for (i, dp) in pa.demands.iter().enumerate() {
        let demand = &d.demands()[i];
        for (k, p) in dp.paths.iter().enumerate() {
            let mut at = demand.source;
            let mut connected = p.demand == i;
            for &e in &p.base_edges {
                let edge = g.edge(e);
                connected &= edge.from == at;
                at = edge.to;
            }
            if !connected || at != demand.destination || p.base_edges.is_empty() {
                out.push(AssignmentViolation::BrokenWalk { demand: i, path: k });
            }
            if p.len() > demand.hops() as usize {
                out.push(AssignmentViolation::Length {
                    demand: i,
                    path: k,
                    length: p.len(),
                    bound: demand.hops(),
                });
            }
            let elementary = p.rate / q.powi(p.len() as i32 - 1);
            for &e in &p.base_edges {
                load[e] += elementary;
            }
            *counts.entry((i, p.len() as u32)).or_default() += 1;
        }
    }
    for (e, &l) in load.iter().enumerate() {
        if l > g.capacity(e) + tol.tol_feas {
            out.push(AssignmentViolation::Capacity {
                edge: e,
                load: l,
                capacity: g.capacity(e),
            });
        }
    }
    let total: f64 = pa.paths().map(|p| p.rate).sum();
    if (total - objective).abs() > tol.objective_slack(objective) {
        out.push(AssignmentViolation::Objective { total, objective });
    }
    let bound = g.edge_count() * g.node_count();
    for ((demand, hops), count) in counts {
        if count > bound {
            out.push(AssignmentViolation::PathCount {
                demand,
                hops,
                count,
                bound,
            });
        }
    }
    out
}
