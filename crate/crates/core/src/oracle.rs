//! Brute-force path formulations used to certify the edge LP on small instances.
//!
//! The canonical oracle has one rate variable per node-simple path within the
//! hop bound; each path of length `n` consumes `r / q^(n-1)` elementary pairs
//! per second on every edge it uses. The layered variant enumerates all walks
//! of exactly `j` hops for each `j`, which is what paths in the layered graph
//! project to.

use thiserror::Error;

use crate::demands::DemandSet;
use crate::edge_lp::{FlowSolution, SubDemandFlow};
use crate::layering::{LayeredGraph, SubDemand};
use crate::lp::{solve_lp, LinearProgram, LpError, LpStatus, Relation};
use crate::topology::{EdgeIdx, NetworkGraph, NodeIdx};

pub const DEFAULT_PATH_CAP: usize = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("more than {cap} candidate paths; instance too large for enumeration")]
    TooManyPaths { cap: usize },
    #[error("path bound must be at least 1")]
    ZeroLength,
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("path LP ended with status {0:?}")]
    NotOptimal(LpStatus),
}

/// A candidate path of demand `demand`, as base edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePath {
    pub demand: usize,
    pub edges: Vec<EdgeIdx>,
}

impl CandidatePath {
    pub fn nodes(&self, g: &NetworkGraph) -> Vec<NodeIdx> {
        let mut out = Vec::with_capacity(self.edges.len() + 1);
        if let Some(&first) = self.edges.first() {
            out.push(g.edge(first).from);
        }
        out.extend(self.edges.iter().map(|&e| g.edge(e).to));
        out
    }
}

/// All node-simple `s -> e` paths of at most `l` edges, lexicographic by node
/// sequence, as edge lists.
pub fn enumerate_bounded_paths(
    g: &NetworkGraph,
    s: NodeIdx,
    e: NodeIdx,
    l: u32,
    cap: usize,
) -> Result<Vec<Vec<EdgeIdx>>, OracleError> {
    if l == 0 {
        return Err(OracleError::ZeroLength);
    }
    let mut out = Vec::new();
    let mut on_path = vec![false; g.node_count()];
    let mut edges = Vec::new();
    on_path[s] = true;
    simple_dfs(g, s, e, l as usize, cap, &mut on_path, &mut edges, &mut out)?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn simple_dfs(
    g: &NetworkGraph,
    at: NodeIdx,
    target: NodeIdx,
    budget: usize,
    cap: usize,
    on_path: &mut [bool],
    edges: &mut Vec<EdgeIdx>,
    out: &mut Vec<Vec<EdgeIdx>>,
) -> Result<(), OracleError> {
    if at == target {
        if out.len() == cap {
            return Err(OracleError::TooManyPaths { cap });
        }
        out.push(edges.clone());
        return Ok(());
    }
    if budget == 0 {
        return Ok(());
    }
    for &ei in g.out_edges(at) {
        let next = g.edge(ei).to;
        if on_path[next] {
            continue;
        }
        on_path[next] = true;
        edges.push(ei);
        simple_dfs(g, next, target, budget - 1, cap, on_path, edges, out)?;
        edges.pop();
        on_path[next] = false;
    }
    Ok(())
}

/// All `s -> e` walks of exactly `j` edges (nodes may repeat), lexicographic.
pub fn enumerate_walks(
    g: &NetworkGraph,
    s: NodeIdx,
    e: NodeIdx,
    j: u32,
    cap: usize,
) -> Result<Vec<Vec<EdgeIdx>>, OracleError> {
    if j == 0 {
        return Err(OracleError::ZeroLength);
    }
    // prune with exact-step backward reachability
    let n = g.node_count();
    let mut reaches = vec![vec![false; n]; j as usize + 1];
    reaches[0][e] = true;
    for t in 0..j as usize {
        for v in 0..n {
            if reaches[t][v] {
                for &ei in g.in_edges(v) {
                    reaches[t + 1][g.edge(ei).from] = true;
                }
            }
        }
    }
    let mut out = Vec::new();
    let mut edges = Vec::new();
    walk_dfs(g, s, j as usize, &reaches, cap, &mut edges, &mut out)?;
    Ok(out)
}

fn walk_dfs(
    g: &NetworkGraph,
    at: NodeIdx,
    left: usize,
    reaches: &[Vec<bool>],
    cap: usize,
    edges: &mut Vec<EdgeIdx>,
    out: &mut Vec<Vec<EdgeIdx>>,
) -> Result<(), OracleError> {
    if !reaches[left][at] {
        return Ok(());
    }
    if left == 0 {
        if out.len() == cap {
            return Err(OracleError::TooManyPaths { cap });
        }
        out.push(edges.clone());
        return Ok(());
    }
    for &ei in g.out_edges(at) {
        edges.push(ei);
        walk_dfs(g, g.edge(ei).to, left - 1, reaches, cap, edges, out)?;
        edges.pop();
    }
    Ok(())
}

/// `max sum r_p` subject to `sum_{p through (u,v)} r_p / q^(|p|-1) <= C(u,v)`.
///
/// An edge traversed several times by a walk is charged once per traversal.
pub fn build_path_lp(paths: &[CandidatePath], g: &NetworkGraph, q: f64) -> LinearProgram {
    let mut lp = LinearProgram::new();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); g.edge_count()];
    for (k, p) in paths.iter().enumerate() {
        let v = lp.add_nonneg(format!("r_{}_{k}", p.demand), 1.0);
        let use_per_rate = 1.0 / q.powi(p.edges.len() as i32 - 1);
        for &e in &p.edges {
            match rows[e].last_mut() {
                Some(last) if last.0 == v => last.1 += use_per_rate,
                _ => rows[e].push((v, use_per_rate)),
            }
        }
    }
    for (e, coeffs) in rows.into_iter().enumerate() {
        let edge = g.edge(e);
        lp.add_constraint(
            format!("cap_{}_{}", g.node_id(edge.from), g.node_id(edge.to)),
            coeffs,
            Relation::Le,
            edge.capacity,
        );
    }
    lp
}

/// Optimal path LP objective and the rate of every candidate path.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub objective: f64,
    pub paths: Vec<CandidatePath>,
    pub rates: Vec<f64>,
}

fn solve_paths(
    paths: Vec<CandidatePath>,
    g: &NetworkGraph,
    q: f64,
) -> Result<OracleSolution, OracleError> {
    if paths.is_empty() {
        return Ok(OracleSolution {
            objective: 0.0,
            paths,
            rates: Vec::new(),
        });
    }
    let sol = solve_lp(&build_path_lp(&paths, g, q))?;
    if !sol.is_optimal() {
        return Err(OracleError::NotOptimal(sol.status));
    }
    Ok(OracleSolution {
        objective: sol.objective_value,
        paths,
        rates: sol.values,
    })
}

/// Path LP over node-simple paths within each demand's hop bound.
pub fn oracle_solution(
    g: &NetworkGraph,
    d: &DemandSet,
    q: f64,
    cap: usize,
) -> Result<OracleSolution, OracleError> {
    let mut paths = Vec::new();
    for (i, dem) in d.demands().iter().enumerate() {
        if dem.hops() == 0 {
            continue;
        }
        let found = enumerate_bounded_paths(g, dem.source, dem.destination, dem.hops(), cap)?;
        paths.extend(
            found
                .into_iter()
                .map(|edges| CandidatePath { demand: i, edges }),
        );
        if paths.len() > cap {
            return Err(OracleError::TooManyPaths { cap });
        }
    }
    solve_paths(paths, g, q)
}

pub fn oracle_optimum(g: &NetworkGraph, d: &DemandSet, q: f64) -> Result<f64, OracleError> {
    oracle_solution(g, d, q, DEFAULT_PATH_CAP).map(|s| s.objective)
}

/// Path LP over all walks of exactly `j` hops, for every `j` up to each bound.
pub fn layered_oracle_solution(
    g: &NetworkGraph,
    d: &DemandSet,
    q: f64,
    cap: usize,
) -> Result<OracleSolution, OracleError> {
    let mut paths = Vec::new();
    for (i, dem) in d.demands().iter().enumerate() {
        for j in 1..=dem.hops() {
            let found = enumerate_walks(g, dem.source, dem.destination, j, cap)?;
            paths.extend(
                found
                    .into_iter()
                    .map(|edges| CandidatePath { demand: i, edges }),
            );
            if paths.len() > cap {
                return Err(OracleError::TooManyPaths { cap });
            }
        }
    }
    solve_paths(paths, g, q)
}

/// Maps path rates onto the layered graph: path `p` of length `j` contributes
/// `r_p / q^(j-1)` to its `t`-th edge in layer `t` of sub-demand `(i, j)`.
pub fn flow_from_path_rates(
    sol: &OracleSolution,
    lg: &LayeredGraph,
    subs: &[SubDemand],
    q: f64,
) -> FlowSolution {
    let mut per_sub: Vec<Vec<(usize, f64)>> = vec![Vec::new(); subs.len()];
    for (p, &r) in sol.paths.iter().zip(&sol.rates) {
        let j = p.edges.len() as u32;
        let k = subs
            .iter()
            .position(|s| s.demand == p.demand && s.hops == j)
            .expect("every candidate length has a sub-demand");
        let elementary = r / q.powi(j as i32 - 1);
        for (t, &e) in p.edges.iter().enumerate() {
            per_sub[k].push((lg.edge_index(t as u32, e), elementary));
        }
    }
    let flows = subs
        .iter()
        .zip(per_sub)
        .map(|(&sub, entries)| SubDemandFlow::new(sub, entries))
        .collect();
    FlowSolution::from_flows(flows, lg, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demands::{reduce_demands, DemandEntry};
    use crate::instances::chain_instance;
    use crate::topology::GraphBuilder;

    fn complete(n: usize) -> NetworkGraph {
        let mut b = GraphBuilder::new(0.9925, 0.5);
        let ids: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
        for id in &ids {
            b.add_node(id);
        }
        for u in &ids {
            for v in &ids {
                if u != v {
                    b.add_edge(u, v, 1.0).unwrap();
                }
            }
        }
        b.build().unwrap()
    }

    #[test]
    fn enumeration_counts() {
        let inst = chain_instance(&[4.0, 4.0], 0.5);
        let g = &inst.graph;
        let (s, e) = (g.node_index("n0").unwrap(), g.node_index("n2").unwrap());
        assert_eq!(enumerate_bounded_paths(g, s, e, 2, 10).unwrap().len(), 1);
        assert!(enumerate_bounded_paths(g, s, e, 1, 10).unwrap().is_empty());

        let k4 = complete(4);
        let paths = enumerate_bounded_paths(&k4, 0, 3, 3, 100).unwrap();
        let lens: Vec<usize> = paths.iter().map(Vec::len).collect();
        assert_eq!(lens, vec![3, 2, 3, 2, 1]);
        assert!(matches!(
            enumerate_bounded_paths(&k4, 0, 3, 3, 4),
            Err(OracleError::TooManyPaths { cap: 4 })
        ));
    }

    #[test]
    fn walks_include_revisits() {
        let k3 = complete(3);
        // n0 n1 n0 n2, n0 n2 n0 n2, n0 n2 n1 n2
        let walks = enumerate_walks(&k3, 0, 2, 3, 100).unwrap();
        assert_eq!(walks.len(), 3);
        assert!(walks.iter().all(|w| w.len() == 3));
    }

    #[test]
    fn small_optima() {
        let inst = chain_instance(&[4.0, 4.0], 0.5);
        let d = reduce_demands(&inst.demands, &inst.graph).unwrap();
        assert!((oracle_optimum(&inst.graph, &d, 0.5).unwrap() - 2.0).abs() < 1e-12);

        let mut b = GraphBuilder::new(0.9925, 0.5);
        for id in ["s", "a", "e"] {
            b.add_node(id);
        }
        b.add_edge("s", "e", 1.0).unwrap();
        b.add_edge("s", "a", 4.0).unwrap();
        b.add_edge("a", "e", 4.0).unwrap();
        let g = b.build().unwrap();
        let d = reduce_demands(&[DemandEntry::length("s", "e", 2)], &g).unwrap();
        assert!((oracle_optimum(&g, &d, 0.5).unwrap() - 3.0).abs() < 1e-12);
        let walks = layered_oracle_solution(&g, &d, 0.5, 100).unwrap();
        assert!((walks.objective - 3.0).abs() < 1e-12);

        // no path within the bound, and disconnected endpoints
        let d = reduce_demands(&[DemandEntry::length("e", "s", 2)], &g).unwrap();
        assert_eq!(oracle_optimum(&g, &d, 0.5).unwrap(), 0.0);
    }
}
