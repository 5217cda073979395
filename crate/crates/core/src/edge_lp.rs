//! The edge-based flow LP over the layered graph.
//!
//! Each sub-demand `(i, j)` is a separate commodity routed from `s_i^0` to
//! `e_i^j`. Its source outflow is weighted by `q^(j-1)`, the probability that
//! all `j - 1` swaps along a `j`-hop path succeed. All layered copies of a base
//! edge share that edge's capacity.

use serde::Serialize;

use crate::layering::{LayeredEdgeIdx, LayeredGraph, LayeredNode, SubDemand};
use crate::lp::{LinearProgram, LpError, LpSolution, Relation, VarId};
use crate::topology::EdgeIdx;

/// `q^(j-1)` for `j = 1..=l_max`, index `j - 1`.
pub fn swap_weights(q: f64, l_max: u32) -> Vec<f64> {
    (0..l_max).map(|k| q.powi(k as i32)).collect()
}

/// A sub-demand's flow over its support edges.
#[derive(Debug, Clone, PartialEq)]
pub struct SubDemandFlow {
    pub sub: SubDemand,
    /// Layered edge ids, strictly ascending.
    pub edges: Vec<LayeredEdgeIdx>,
    pub values: Vec<f64>,
}

impl SubDemandFlow {
    pub fn new(sub: SubDemand, mut entries: Vec<(LayeredEdgeIdx, f64)>) -> Self {
        entries.sort_by_key(|&(e, _)| e);
        entries.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        let (edges, values) = entries.into_iter().unzip();
        Self { sub, edges, values }
    }

    pub fn value(&self, edge: LayeredEdgeIdx) -> f64 {
        self.edges
            .binary_search(&edge)
            .map_or(0.0, |k| self.values[k])
    }

    pub fn iter(&self) -> impl Iterator<Item = (LayeredEdgeIdx, f64)> + '_ {
        self.edges.iter().copied().zip(self.values.iter().copied())
    }

    /// Flow leaving `s^0`.
    pub fn source_outflow(&self, lg: &LayeredGraph) -> f64 {
        let s = self.sub.source_node();
        self.iter()
            .filter(|&(e, _)| lg.edge(e).from == s)
            .map(|(_, x)| x)
            .sum()
    }

    /// Flow entering `e^j`.
    pub fn sink_inflow(&self, lg: &LayeredGraph) -> f64 {
        let t = self.sub.sink_node();
        self.iter()
            .filter(|&(e, _)| lg.edge(e).to == t)
            .map(|(_, x)| x)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    pub flows: Vec<SubDemandFlow>,
    pub objective_value: f64,
}

impl FlowSolution {
    /// Builds a flow from per-sub-demand edge values and evaluates its objective.
    pub fn from_flows(flows: Vec<SubDemandFlow>, lg: &LayeredGraph, q: f64) -> Self {
        let weights = swap_weights(q, lg.l_max());
        let mut objective_value = 0.0;
        for f in &flows {
            let w = weights[f.sub.hops as usize - 1];
            let s = f.sub.source_node();
            for (e, x) in f.iter() {
                if lg.edge(e).from == s {
                    objective_value += w * x;
                }
            }
        }
        Self {
            flows,
            objective_value,
        }
    }
}

/// The LP together with the meaning of its columns.
#[derive(Debug, Clone)]
pub struct EdgeLp {
    pub lp: LinearProgram,
    pub subs: Vec<SubDemand>,
    /// Column `k` is the flow of `subs[columns[k].0]` on layered edge `columns[k].1`.
    pub columns: Vec<(usize, LayeredEdgeIdx)>,
    pub q: f64,
}

fn edge_name(lg: &LayeredGraph, e: LayeredEdgeIdx) -> String {
    let le = lg.edge(e);
    let g = lg.base();
    format!(
        "{}_{}_{}",
        g.node_id(le.from.base),
        le.layer,
        g.node_id(le.to.base)
    )
}

pub fn build_edge_lp(lg: &LayeredGraph, subs: &[SubDemand], q: f64) -> EdgeLp {
    let g = lg.base();
    let weights = swap_weights(q, lg.l_max());
    let mut lp = LinearProgram::new();
    let mut columns = Vec::new();
    let mut by_base: Vec<Vec<VarId>> = vec![Vec::new(); g.edge_count()];
    let mut conservation = Vec::new();

    for (k, sub) in subs.iter().enumerate() {
        let support = lg.support(sub);
        let source = sub.source_node();
        let sink = sub.sink_node();
        // (layered node, +1 for inflow / -1 for outflow, var)
        let mut incidence: Vec<(usize, f64, VarId)> = Vec::with_capacity(2 * support.len());
        for &e in &support {
            let le = lg.edge(e);
            let cost = if le.from == source {
                weights[sub.hops as usize - 1]
            } else {
                0.0
            };
            let var = lp.add_nonneg(
                format!("g_{}_{}_{}", sub.demand, sub.hops, edge_name(lg, e)),
                cost,
            );
            columns.push((k, e));
            by_base[le.base_edge].push(var);
            if le.from != source {
                incidence.push((lg.node_index(le.from), -1.0, var));
            }
            if le.to != sink {
                incidence.push((lg.node_index(le.to), 1.0, var));
            }
        }
        incidence.sort_by_key(|&(node, _, var)| (node, var));
        for chunk in incidence.chunk_by(|a, b| a.0 == b.0) {
            let node = lg.node(chunk[0].0);
            let coeffs: Vec<(VarId, f64)> = chunk.iter().map(|&(_, a, v)| (v, a)).collect();
            conservation.push((
                format!(
                    "flow_{}_{}_{}_{}",
                    sub.demand,
                    sub.hops,
                    g.node_id(node.base),
                    node.layer
                ),
                coeffs,
            ));
        }
    }

    for (e, vars) in by_base.into_iter().enumerate() {
        let edge = g.edge(e);
        lp.add_constraint(
            format!("cap_{}_{}", g.node_id(edge.from), g.node_id(edge.to)),
            vars.into_iter().map(|v| (v, 1.0)).collect(),
            Relation::Le,
            edge.capacity,
        );
    }
    for (name, coeffs) in conservation {
        lp.add_constraint(name, coeffs, Relation::Eq, 0.0);
    }

    EdgeLp {
        lp,
        subs: subs.to_vec(),
        columns,
        q,
    }
}

/// Re-indexes an optimal LP assignment by sub-demand and layered edge.
pub fn flow_from_solution(
    model: &EdgeLp,
    sol: &LpSolution,
    lg: &LayeredGraph,
) -> Result<FlowSolution, LpError> {
    if !sol.is_optimal() {
        return Err(LpError::NotOptimal(sol.status));
    }
    let mut per_sub: Vec<Vec<(LayeredEdgeIdx, f64)>> = vec![Vec::new(); model.subs.len()];
    for (&(k, e), &x) in model.columns.iter().zip(&sol.values) {
        per_sub[k].push((e, x));
    }
    let flows = model
        .subs
        .iter()
        .zip(per_sub)
        .map(|(&sub, entries)| SubDemandFlow::new(sub, entries))
        .collect();
    Ok(FlowSolution::from_flows(flows, lg, model.q))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FlowViolation {
    Negative {
        demand: usize,
        hops: u32,
        edge: LayeredEdgeIdx,
        value: f64,
    },
    /// `slack = capacity - load`, negative when violated.
    Capacity {
        edge: EdgeIdx,
        load: f64,
        capacity: f64,
        slack: f64,
    },
    Conservation {
        demand: usize,
        hops: u32,
        node: LayeredNode,
        imbalance: f64,
    },
}

/// Every nonnegativity, capacity and conservation violation beyond `tol_feas`.
pub fn check_flow_feasibility(
    f: &FlowSolution,
    lg: &LayeredGraph,
    tol_feas: f64,
) -> Vec<FlowViolation> {
    let g = lg.base();
    let mut out = Vec::new();
    let mut load = vec![0.0; g.edge_count()];
    for flow in &f.flows {
        let sub = flow.sub;
        let mut balance = std::collections::BTreeMap::<usize, f64>::new();
        for (e, x) in flow.iter() {
            if x < -tol_feas {
                out.push(FlowViolation::Negative {
                    demand: sub.demand,
                    hops: sub.hops,
                    edge: e,
                    value: x,
                });
            }
            let le = lg.edge(e);
            load[le.base_edge] += x;
            *balance.entry(lg.node_index(le.from)).or_default() -= x;
            *balance.entry(lg.node_index(le.to)).or_default() += x;
        }
        for (node, imbalance) in balance {
            let node = lg.node(node);
            if node == sub.source_node() || node == sub.sink_node() {
                continue;
            }
            if imbalance.abs() > tol_feas {
                out.push(FlowViolation::Conservation {
                    demand: sub.demand,
                    hops: sub.hops,
                    node,
                    imbalance,
                });
            }
        }
    }
    for (e, &l) in load.iter().enumerate() {
        let capacity = g.capacity(e);
        if l > capacity + tol_feas {
            out.push(FlowViolation::Capacity {
                edge: e,
                load: l,
                capacity,
                slack: capacity - l,
            });
        }
    }
    out
}

/// One exported flow value: sub-demand `(demand, hops)` on `(u^layer, v^(layer+1))`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct FlowRow {
    pub demand: usize,
    pub hops: u32,
    pub u: String,
    pub layer: u32,
    pub v: String,
    pub value: f64,
}

/// Nonzero flow values in sub-demand then layered-edge order.
pub fn flow_rows(f: &FlowSolution, lg: &LayeredGraph) -> Vec<FlowRow> {
    let g = lg.base();
    let mut rows = Vec::new();
    for flow in &f.flows {
        for (e, x) in flow.iter() {
            if x == 0.0 {
                continue;
            }
            let le = lg.edge(e);
            rows.push(FlowRow {
                demand: flow.sub.demand,
                hops: flow.sub.hops,
                u: g.node_id(le.from.base).to_string(),
                layer: le.layer,
                v: g.node_id(le.to.base).to_string(),
                value: x,
            });
        }
    }
    rows
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FlowRowError {
    #[error("flow row references unknown sub-demand ({demand}, {hops})")]
    UnknownSubDemand { demand: usize, hops: u32 },
    #[error("flow row references unknown edge `{u}` -> `{v}` at layer {layer}")]
    UnknownEdge { u: String, v: String, layer: u32 },
}

/// Rebuilds a flow from exported rows; absent entries are zero.
pub fn flow_from_rows(
    rows: &[FlowRow],
    lg: &LayeredGraph,
    subs: &[SubDemand],
    q: f64,
) -> Result<FlowSolution, FlowRowError> {
    let g = lg.base();
    let mut per_sub: Vec<Vec<(LayeredEdgeIdx, f64)>> = vec![Vec::new(); subs.len()];
    for r in rows {
        let k = subs
            .iter()
            .position(|s| s.demand == r.demand && s.hops == r.hops)
            .ok_or(FlowRowError::UnknownSubDemand {
                demand: r.demand,
                hops: r.hops,
            })?;
        let unknown = || FlowRowError::UnknownEdge {
            u: r.u.clone(),
            v: r.v.clone(),
            layer: r.layer,
        };
        let (u, v) = (
            g.node_index(&r.u).ok_or_else(unknown)?,
            g.node_index(&r.v).ok_or_else(unknown)?,
        );
        let e = g.find_edge(u, v).ok_or_else(unknown)?;
        if r.layer >= lg.l_max() {
            return Err(unknown());
        }
        per_sub[k].push((lg.edge_index(r.layer, e), r.value));
    }
    let flows = subs
        .iter()
        .zip(per_sub)
        .map(|(&sub, entries)| SubDemandFlow::new(sub, entries))
        .collect();
    Ok(FlowSolution::from_flows(flows, lg, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demands::{reduce_demands, DemandEntry};
    use crate::layering::{build_layered_graph, decompose_demands};
    use crate::lp::solve_lp;
    use crate::topology::{GraphBuilder, NetworkGraph};

    fn graph(edges: &[(&str, &str, f64)], q: f64) -> NetworkGraph {
        let mut b = GraphBuilder::new(0.9925, q);
        for &(u, v, _) in edges {
            b.add_node(u);
            b.add_node(v);
        }
        for &(u, v, c) in edges {
            b.add_edge(u, v, c).unwrap();
        }
        b.build().unwrap()
    }

    fn solve(g: &NetworkGraph, l: u32) -> (LayeredGraph, EdgeLp, FlowSolution) {
        let d = reduce_demands(&[DemandEntry::length("s", "e", l)], g).unwrap();
        let lg = build_layered_graph(g, &d);
        let subs = decompose_demands(&d);
        let model = build_edge_lp(&lg, &subs, g.swap_success());
        let sol = solve_lp(&model.lp).unwrap();
        let f = flow_from_solution(&model, &sol, &lg).unwrap();
        assert_eq!(f.objective_value, sol.objective_value);
        (lg, model, f)
    }

    #[test]
    fn chain() {
        let g = graph(&[("s", "a", 4.0), ("a", "e", 4.0)], 0.5);
        let (lg, _, f) = solve(&g, 2);
        assert!((f.objective_value - 2.0).abs() < 1e-12);
        let two_hop = &f.flows[1];
        assert_eq!(two_hop.sub.hops, 2);
        assert_eq!(two_hop.values, vec![4.0, 4.0]);
        assert!(check_flow_feasibility(&f, &lg, 1e-9).is_empty());
    }

    #[test]
    fn direct_edge_plus_chain() {
        let g = graph(&[("s", "e", 1.0), ("s", "a", 4.0), ("a", "e", 4.0)], 0.5);
        let (lg, model, f) = solve(&g, 2);
        assert!((f.objective_value - 3.0).abs() < 1e-12);
        for flow in &f.flows {
            assert!((flow.source_outflow(&lg) - flow.sink_inflow(&lg)).abs() < 1e-12);
        }
        // one column per sub-demand support edge
        assert_eq!(model.lp.num_vars(), 1 + 2);
    }

    #[test]
    fn zero_flow_has_zero_objective() {
        let g = graph(&[("s", "a", 4.0), ("a", "e", 4.0)], 0.5);
        let d = reduce_demands(&[DemandEntry::length("s", "e", 2)], &g).unwrap();
        let lg = build_layered_graph(&g, &d);
        let subs = decompose_demands(&d);
        let model = build_edge_lp(&lg, &subs, 0.5);
        let zero = LpSolution {
            status: crate::lp::LpStatus::Optimal,
            objective_value: 0.0,
            values: vec![0.0; model.lp.num_vars()],
            duals: vec![],
            iterations: 0,
        };
        let f = flow_from_solution(&model, &zero, &lg).unwrap();
        assert_eq!(f.objective_value, 0.0);
        let infeasible = LpSolution {
            status: crate::lp::LpStatus::Infeasible,
            ..zero
        };
        assert!(flow_from_solution(&model, &infeasible, &lg).is_err());
    }

    #[test]
    fn hand_built_violations() {
        let g = graph(&[("s", "a", 4.0), ("a", "e", 4.0)], 0.5);
        let d = reduce_demands(&[DemandEntry::length("s", "e", 2)], &g).unwrap();
        let lg = build_layered_graph(&g, &d);
        let subs = decompose_demands(&d);
        let s = g.node_index("s").unwrap();
        let a = g.node_index("a").unwrap();
        let e = g.node_index("e").unwrap();
        let sa = lg.edge_index(0, g.find_edge(s, a).unwrap());
        let ae = lg.edge_index(1, g.find_edge(a, e).unwrap());

        let over = FlowSolution::from_flows(
            vec![SubDemandFlow::new(subs[1], vec![(sa, 5.0), (ae, 5.0)])],
            &lg,
            0.5,
        );
        let v = check_flow_feasibility(&over, &lg, 1e-9);
        assert_eq!(v.len(), 2);
        assert!(v
            .iter()
            .all(|x| matches!(x, FlowViolation::Capacity { slack, .. } if *slack == -1.0)));

        let leaky = FlowSolution::from_flows(
            vec![SubDemandFlow::new(subs[1], vec![(sa, 3.0), (ae, 2.0)])],
            &lg,
            0.5,
        );
        let v = check_flow_feasibility(&leaky, &lg, 1e-9);
        assert_eq!(
            v,
            vec![FlowViolation::Conservation {
                demand: 0,
                hops: 2,
                node: LayeredNode { base: a, layer: 1 },
                imbalance: 1.0
            }]
        );
    }

    #[test]
    fn rows_round_trip() {
        let g = graph(&[("s", "e", 1.0), ("s", "a", 4.0), ("a", "e", 4.0)], 0.5);
        let (lg, model, f) = solve(&g, 2);
        let rows = flow_rows(&f, &lg);
        let back = flow_from_rows(&rows, &lg, &model.subs, 0.5).unwrap();
        assert_eq!(back.objective_value, f.objective_value);
        let bad = FlowRow {
            demand: 7,
            ..rows[0].clone()
        };
        assert!(flow_from_rows(&[bad], &lg, &model.subs, 0.5).is_err());
    }
}
