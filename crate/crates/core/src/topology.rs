//! Directed capacity graphs and their on-disk topology documents.
//!
//! Node identifiers are opaque strings. They are kept in natural order
//! (numeric when both ids parse as integers, lexicographic otherwise), so a
//! node's dense index also gives its rank in that order.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fidelity::WernerParameter;

pub type NodeIdx = usize;
pub type EdgeIdx = usize;

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("malformed topology document: {0}")]
    Schema(String),
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("edge ({u}, {v}) references unknown node `{missing}`")]
    UnknownEndpoint {
        u: String,
        v: String,
        missing: String,
    },
    #[error("invalid graph: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<GraphViolation>),
}

/// A single broken [`NetworkGraph`] invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphViolation {
    NonPositiveCapacity { u: String, v: String, capacity: f64 },
    SelfLoop { node: String },
    FidelityOutOfRange(f64),
    SwapSuccessOutOfRange(f64),
}

impl fmt::Display for GraphViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphViolation::NonPositiveCapacity { u, v, capacity } => {
                write!(f, "edge ({u}, {v}) has non-positive capacity {capacity}")
            }
            GraphViolation::SelfLoop { node } => write!(f, "self-loop at `{node}`"),
            GraphViolation::FidelityOutOfRange(x) => {
                write!(
                    f,
                    "elementary fidelity must exceed 0.5 and be at most 1 (got {x})"
                )
            }
            GraphViolation::SwapSuccessOutOfRange(x) => {
                write!(f, "swap success probability must lie in (0, 1] (got {x})")
            }
        }
    }
}

/// Orders node ids numerically when both are integers, lexicographically otherwise.
pub fn compare_node_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<i64>(), b.parse::<i64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: NodeIdx,
    pub to: NodeIdx,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGraph {
    nodes: Vec<String>,
    index: HashMap<String, NodeIdx>,
    edges: Vec<Edge>,
    lookup: HashMap<(NodeIdx, NodeIdx), EdgeIdx>,
    out_edges: Vec<Vec<EdgeIdx>>,
    in_edges: Vec<Vec<EdgeIdx>>,
    elementary_fidelity: f64,
    swap_success: f64,
}

impl NetworkGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_id(&self, node: NodeIdx) -> &str {
        &self.nodes[node]
    }

    pub fn node_ids(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_index(&self, id: &str) -> Option<NodeIdx> {
        self.index.get(id).copied()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeIdx) -> &Edge {
        &self.edges[e]
    }

    pub fn find_edge(&self, from: NodeIdx, to: NodeIdx) -> Option<EdgeIdx> {
        self.lookup.get(&(from, to)).copied()
    }

    /// Outgoing edges of `node`, ordered by ascending head id.
    pub fn out_edges(&self, node: NodeIdx) -> &[EdgeIdx] {
        &self.out_edges[node]
    }

    /// Incoming edges of `node`, ordered by ascending tail id.
    pub fn in_edges(&self, node: NodeIdx) -> &[EdgeIdx] {
        &self.in_edges[node]
    }

    pub fn capacity(&self, e: EdgeIdx) -> f64 {
        self.edges[e].capacity
    }

    pub fn elementary_fidelity(&self) -> f64 {
        self.elementary_fidelity
    }

    pub fn swap_success(&self) -> f64 {
        self.swap_success
    }

    /// Werner parameter of the elementary pairs.
    pub fn werner(&self) -> WernerParameter {
        WernerParameter::from_fidelity_unchecked(self.elementary_fidelity)
    }

    /// Copy of this graph with different global link parameters.
    pub fn with_parameters(&self, fidelity: f64, swap_success: f64) -> NetworkGraph {
        let mut g = self.clone();
        g.elementary_fidelity = fidelity;
        g.swap_success = swap_success;
        g
    }

    /// Copy of this graph with every capacity replaced by `f(edge, capacity)`.
    pub fn map_capacities(&self, mut f: impl FnMut(EdgeIdx, f64) -> f64) -> NetworkGraph {
        let mut g = self.clone();
        for (i, e) in g.edges.iter_mut().enumerate() {
            e.capacity = f(i, e.capacity);
        }
        g
    }

    /// Subgraph induced by the given node ids. Unknown ids are ignored.
    pub fn induced_subgraph(&self, ids: &[&str]) -> NetworkGraph {
        let keep: Vec<NodeIdx> = ids.iter().filter_map(|id| self.node_index(id)).collect();
        let mut b = GraphBuilder::new(self.elementary_fidelity, self.swap_success);
        for &n in &keep {
            b.add_node(&self.nodes[n]);
        }
        for e in &self.edges {
            if keep.contains(&e.from) && keep.contains(&e.to) {
                b.add_edge(&self.nodes[e.from], &self.nodes[e.to], e.capacity)
                    .expect("endpoints were added");
            }
        }
        b.build_unchecked()
    }

    /// Serializes as a directed topology document.
    pub fn to_document(&self) -> TopologyDocument {
        TopologyDocument {
            directed: true,
            fidelity: self.elementary_fidelity,
            swap_success: self.swap_success,
            nodes: self
                .nodes
                .iter()
                .map(|id| NodeEntry {
                    id: NodeId::Str(id.clone()),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeEntry {
                    u: NodeId::Str(self.nodes[e.from].clone()),
                    v: NodeId::Str(self.nodes[e.to].clone()),
                    capacity: e.capacity,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("graph documents always serialize")
    }
}

/// Incremental construction of a [`NetworkGraph`]; parallel edges are merged by summing.
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    nodes: Vec<String>,
    seen: HashMap<String, ()>,
    edges: BTreeMap<(String, String), f64>,
    fidelity: f64,
    swap_success: f64,
}

impl GraphBuilder {
    pub fn new(fidelity: f64, swap_success: f64) -> Self {
        Self {
            nodes: Vec::new(),
            seen: HashMap::new(),
            edges: BTreeMap::new(),
            fidelity,
            swap_success,
        }
    }

    /// Adds a node; returns false if it was already present.
    pub fn add_node(&mut self, id: &str) -> bool {
        if self.seen.insert(id.to_string(), ()).is_some() {
            return false;
        }
        self.nodes.push(id.to_string());
        true
    }

    pub fn add_edge(&mut self, u: &str, v: &str, capacity: f64) -> Result<(), TopologyError> {
        for end in [u, v] {
            if !self.seen.contains_key(end) {
                return Err(TopologyError::UnknownEndpoint {
                    u: u.to_string(),
                    v: v.to_string(),
                    missing: end.to_string(),
                });
            }
        }
        *self
            .edges
            .entry((u.to_string(), v.to_string()))
            .or_insert(0.0) += capacity;
        Ok(())
    }

    /// Adds `(u,v)` and `(v,u)`, each with the full capacity.
    pub fn add_undirected_edge(
        &mut self,
        u: &str,
        v: &str,
        capacity: f64,
    ) -> Result<(), TopologyError> {
        self.add_edge(u, v, capacity)?;
        self.add_edge(v, u, capacity)
    }

    /// Builds without checking invariants; see [`validate_graph`].
    pub fn build_unchecked(self) -> NetworkGraph {
        let mut nodes = self.nodes;
        nodes.sort_by(|a, b| compare_node_ids(a, b));
        let index: HashMap<String, NodeIdx> = nodes
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        let mut edges: Vec<Edge> = self
            .edges
            .into_iter()
            .map(|((u, v), capacity)| Edge {
                from: index[&u],
                to: index[&v],
                capacity,
            })
            .collect();
        edges.sort_by_key(|e| (e.from, e.to));
        let n = nodes.len();
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        let mut lookup = HashMap::with_capacity(edges.len());
        for (i, e) in edges.iter().enumerate() {
            out_edges[e.from].push(i);
            in_edges[e.to].push(i);
            lookup.insert((e.from, e.to), i);
        }
        for list in &mut in_edges {
            list.sort_by_key(|&i| edges[i].from);
        }
        NetworkGraph {
            nodes,
            index,
            edges,
            lookup,
            out_edges,
            in_edges,
            elementary_fidelity: self.fidelity,
            swap_success: self.swap_success,
        }
    }

    pub fn build(self) -> Result<NetworkGraph, TopologyError> {
        let g = self.build_unchecked();
        let violations = validate_graph(&g);
        if violations.is_empty() {
            Ok(g)
        } else {
            Err(TopologyError::Invalid(violations))
        }
    }
}

/// Lists every broken invariant of `g`; an empty list means the graph is valid.
pub fn validate_graph(g: &NetworkGraph) -> Vec<GraphViolation> {
    let mut out = Vec::new();
    let f = g.elementary_fidelity;
    if !(f > 0.5 && f <= 1.0) {
        out.push(GraphViolation::FidelityOutOfRange(f));
    }
    let q = g.swap_success;
    if !(q > 0.0 && q <= 1.0) {
        out.push(GraphViolation::SwapSuccessOutOfRange(q));
    }
    for e in &g.edges {
        if e.from == e.to {
            out.push(GraphViolation::SelfLoop {
                node: g.nodes[e.from].clone(),
            });
        }
        if !(e.capacity > 0.0 && e.capacity.is_finite()) {
            out.push(GraphViolation::NonPositiveCapacity {
                u: g.nodes[e.from].clone(),
                v: g.nodes[e.to].clone(),
                capacity: e.capacity,
            });
        }
    }
    out
}

/// Node id as it appears in a document; integers are stringified on ingest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeId {
    Int(i64),
    Str(String),
}

impl NodeId {
    pub fn as_string(&self) -> String {
        match self {
            NodeId::Int(i) => i.to_string(),
            NodeId::Str(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub u: NodeId,
    pub v: NodeId,
    pub capacity: f64,
}

/// The structured topology document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDocument {
    pub directed: bool,
    pub fidelity: f64,
    pub swap_success: f64,
    pub nodes: Vec<NodeEntry>,
    pub edges: Vec<EdgeEntry>,
}

/// An undirected edge list awaiting conversion.
#[derive(Debug, Clone, PartialEq)]
pub struct UndirectedGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String, f64)>,
    pub fidelity: f64,
    pub swap_success: f64,
}

/// Replaces each undirected edge `{u,v}` with `(u,v)` and `(v,u)` at the same capacity.
pub fn to_directed(g: &UndirectedGraph) -> Result<NetworkGraph, TopologyError> {
    let mut b = GraphBuilder::new(g.fidelity, g.swap_success);
    for id in &g.nodes {
        if !b.add_node(id) {
            return Err(TopologyError::DuplicateNode(id.clone()));
        }
    }
    for (u, v, c) in &g.edges {
        b.add_undirected_edge(u, v, *c)?;
    }
    b.build()
}

pub fn load_topology(doc: &TopologyDocument) -> Result<NetworkGraph, TopologyError> {
    let nodes: Vec<String> = doc.nodes.iter().map(|n| n.id.as_string()).collect();
    let edges: Vec<(String, String, f64)> = doc
        .edges
        .iter()
        .map(|e| (e.u.as_string(), e.v.as_string(), e.capacity))
        .collect();
    if !doc.directed {
        return to_directed(&UndirectedGraph {
            nodes,
            edges,
            fidelity: doc.fidelity,
            swap_success: doc.swap_success,
        });
    }
    let mut b = GraphBuilder::new(doc.fidelity, doc.swap_success);
    for id in &nodes {
        if !b.add_node(id) {
            return Err(TopologyError::DuplicateNode(id.clone()));
        }
    }
    for (u, v, c) in &edges {
        b.add_edge(u, v, *c)?;
    }
    b.build()
}

pub fn load_topology_str(text: &str) -> Result<NetworkGraph, TopologyError> {
    let doc: TopologyDocument =
        serde_json::from_str(text).map_err(|e| TopologyError::Schema(e.to_string()))?;
    load_topology(&doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(directed: bool, edges: &[(&str, &str, f64)]) -> TopologyDocument {
        let mut ids: Vec<&str> = Vec::new();
        for (u, v, _) in edges {
            for x in [u, v] {
                if !ids.contains(x) {
                    ids.push(x);
                }
            }
        }
        TopologyDocument {
            directed,
            fidelity: 0.9925,
            swap_success: 0.5,
            nodes: ids
                .iter()
                .map(|s| NodeEntry {
                    id: NodeId::Str(s.to_string()),
                })
                .collect(),
            edges: edges
                .iter()
                .map(|(u, v, c)| EdgeEntry {
                    u: NodeId::Str(u.to_string()),
                    v: NodeId::Str(v.to_string()),
                    capacity: *c,
                })
                .collect(),
        }
    }

    #[test]
    fn undirected_edge_doubles() {
        let g = load_topology(&doc(false, &[("s", "e", 3.0)])).unwrap();
        assert_eq!(g.edge_count(), 2);
        let s = g.node_index("s").unwrap();
        let e = g.node_index("e").unwrap();
        assert_eq!(g.capacity(g.find_edge(s, e).unwrap()), 3.0);
        assert_eq!(g.capacity(g.find_edge(e, s).unwrap()), 3.0);
    }

    #[test]
    fn parallel_directed_edges_merge() {
        let g = load_topology(&doc(true, &[("u", "v", 2.0), ("u", "v", 5.0)])).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.edges()[0].capacity, 7.0);
    }

    #[test]
    fn path_graph_to_directed() {
        let g = to_directed(&UndirectedGraph {
            nodes: vec!["s".into(), "a".into(), "e".into()],
            edges: vec![("s".into(), "a".into(), 4.0), ("a".into(), "e".into(), 2.0)],
            fidelity: 0.9,
            swap_success: 1.0,
        })
        .unwrap();
        assert_eq!(g.edge_count(), 4);
        let ix = |s| g.node_index(s).unwrap();
        assert_eq!(g.capacity(g.find_edge(ix("a"), ix("s")).unwrap()), 4.0);
        assert_eq!(g.capacity(g.find_edge(ix("e"), ix("a")).unwrap()), 2.0);
    }

    #[test]
    fn empty_edge_set() {
        let g = to_directed(&UndirectedGraph {
            nodes: vec!["x".into()],
            edges: vec![],
            fidelity: 0.9,
            swap_success: 1.0,
        })
        .unwrap();
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn integer_ids_are_stringified_and_naturally_ordered() {
        let text = r#"{"directed": true, "fidelity": 0.9, "swap_success": 0.5,
            "nodes": [{"id": 10}, {"id": 9}, {"id": "x"}],
            "edges": [{"u": 10, "v": 9, "capacity": 1}]}"#;
        let g = load_topology_str(text).unwrap();
        assert_eq!(g.node_ids(), &["9".to_string(), "10".into(), "x".into()]);
    }

    #[test]
    fn load_errors() {
        let mut d = doc(true, &[("a", "b", 0.0)]);
        assert!(matches!(load_topology(&d), Err(TopologyError::Invalid(_))));
        d.edges[0].capacity = 1.0;
        d.edges[0].v = NodeId::Str("zz".into());
        assert!(matches!(
            load_topology(&d),
            Err(TopologyError::UnknownEndpoint { .. })
        ));
        let mut d = doc(true, &[("a", "b", 1.0)]);
        d.fidelity = 0.5;
        assert!(load_topology(&d).is_err());
        d.fidelity = 0.9;
        d.swap_success = 0.0;
        assert!(load_topology(&d).is_err());
        d.swap_success = 1.5;
        assert!(load_topology(&d).is_err());
        assert!(matches!(
            load_topology_str(r#"{"directed": true}"#),
            Err(TopologyError::Schema(_))
        ));
    }

    #[test]
    fn validation_report() {
        let mut b = GraphBuilder::new(0.9, 0.5);
        b.add_node("a");
        b.add_node("b");
        b.add_edge("a", "b", 1.0).unwrap();
        assert!(validate_graph(&b.clone().build_unchecked()).is_empty());

        let mut zero = b.clone();
        zero.add_edge("b", "a", 0.0).unwrap();
        let report = validate_graph(&zero.build_unchecked());
        assert_eq!(
            report,
            vec![GraphViolation::NonPositiveCapacity {
                u: "b".into(),
                v: "a".into(),
                capacity: 0.0
            }]
        );

        let g = b.build_unchecked().with_parameters(0.5, 0.5);
        let report = validate_graph(&g);
        assert_eq!(report.len(), 1);
        assert!(report[0].to_string().contains("must exceed 0.5"));
    }

    #[test]
    fn adjacency_is_sorted_by_id() {
        let g = load_topology(&doc(
            true,
            &[("a", "c", 1.0), ("a", "b", 1.0), ("b", "c", 1.0)],
        ))
        .unwrap();
        let a = g.node_index("a").unwrap();
        let heads: Vec<&str> = g
            .out_edges(a)
            .iter()
            .map(|&e| g.node_id(g.edge(e).to))
            .collect();
        assert_eq!(heads, vec!["b", "c"]);
    }
}
