//! The hop-layered expansion of a network graph.
//!
//! Layer `t` holds a copy `u^t` of every base node, and every base edge `(u,v)`
//! yields `(u^t, v^{t+1})` for `0 <= t < l_max`. Any walk from `s^0` to `e^j`
//! therefore has exactly `j` edges, which turns a hop bound into graph structure.
//! Layered ids are dense: node `u^t` is `t * |V| + u`, edge `(u^t, v^{t+1})` is
//! `t * |E| + index(u,v)`.

use serde::Serialize;

use crate::demands::DemandSet;
use crate::topology::{EdgeIdx, NetworkGraph, NodeIdx};

pub type LayeredEdgeIdx = usize;
pub type LayeredNodeIdx = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct LayeredNode {
    pub base: NodeIdx,
    pub layer: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayeredEdge {
    pub layer: u32,
    pub base_edge: EdgeIdx,
    pub from: LayeredNode,
    pub to: LayeredNode,
}

/// Sub-demand `(s^0, e^j)` of demand `demand`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubDemand {
    pub demand: usize,
    pub hops: u32,
    pub source: NodeIdx,
    pub sink: NodeIdx,
}

impl SubDemand {
    pub fn source_node(&self) -> LayeredNode {
        LayeredNode {
            base: self.source,
            layer: 0,
        }
    }

    pub fn sink_node(&self) -> LayeredNode {
        LayeredNode {
            base: self.sink,
            layer: self.hops,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LayeredGraph {
    base: NetworkGraph,
    l_max: u32,
}

pub fn build_layered_graph(g: &NetworkGraph, d: &DemandSet) -> LayeredGraph {
    LayeredGraph::new(g.clone(), d.l_max())
}

/// Splits each feasible demand `i` into sub-demands `j = 1..=l_i`.
pub fn decompose_demands(d: &DemandSet) -> Vec<SubDemand> {
    d.demands()
        .iter()
        .enumerate()
        .flat_map(|(i, dem)| {
            (1..=dem.hops()).map(move |j| SubDemand {
                demand: i,
                hops: j,
                source: dem.source,
                sink: dem.destination,
            })
        })
        .collect()
}

impl LayeredGraph {
    pub fn new(base: NetworkGraph, l_max: u32) -> Self {
        Self { base, l_max }
    }

    pub fn base(&self) -> &NetworkGraph {
        &self.base
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    pub fn node_count(&self) -> usize {
        (self.l_max as usize + 1) * self.base.node_count()
    }

    pub fn edge_count(&self) -> usize {
        self.l_max as usize * self.base.edge_count()
    }

    pub fn node_index(&self, node: LayeredNode) -> LayeredNodeIdx {
        node.layer as usize * self.base.node_count() + node.base
    }

    pub fn node(&self, idx: LayeredNodeIdx) -> LayeredNode {
        let n = self.base.node_count();
        LayeredNode {
            base: idx % n,
            layer: (idx / n) as u32,
        }
    }

    pub fn edge_index(&self, layer: u32, base_edge: EdgeIdx) -> LayeredEdgeIdx {
        debug_assert!(layer < self.l_max);
        layer as usize * self.base.edge_count() + base_edge
    }

    pub fn edge(&self, idx: LayeredEdgeIdx) -> LayeredEdge {
        let m = self.base.edge_count();
        let layer = (idx / m) as u32;
        let base_edge = idx % m;
        let e = self.base.edge(base_edge);
        LayeredEdge {
            layer,
            base_edge,
            from: LayeredNode {
                base: e.from,
                layer,
            },
            to: LayeredNode {
                base: e.to,
                layer: layer + 1,
            },
        }
    }

    pub fn capacity(&self, idx: LayeredEdgeIdx) -> f64 {
        self.base.capacity(idx % self.base.edge_count())
    }

    /// Layered edges leaving `node`, ordered by ascending head id.
    pub fn out_edges(&self, node: LayeredNode) -> impl Iterator<Item = LayeredEdgeIdx> + '_ {
        let layer = node.layer;
        let open = layer < self.l_max;
        self.base
            .out_edges(node.base)
            .iter()
            .filter(move |_| open)
            .map(move |&e| self.edge_index(layer, e))
    }

    /// Layered edges entering `node`, ordered by ascending tail id.
    pub fn in_edges(&self, node: LayeredNode) -> impl Iterator<Item = LayeredEdgeIdx> + '_ {
        let layer = node.layer;
        self.base
            .in_edges(node.base)
            .iter()
            .filter(move |_| layer > 0 && layer <= self.l_max)
            .map(move |&e| self.edge_index(layer - 1, e))
    }

    /// Layered edges lying on at least one `s^0 -> e^j` walk of `sub`, ascending by id.
    ///
    /// Everything else carries zero flow in any feasible solution.
    pub fn support(&self, sub: &SubDemand) -> Vec<LayeredEdgeIdx> {
        let j = sub.hops as usize;
        if j == 0 || sub.hops > self.l_max {
            return Vec::new();
        }
        let forward = exact_reach(&self.base, sub.source, j, true);
        let backward = exact_reach(&self.base, sub.sink, j, false);
        let mut out = Vec::new();
        for t in 0..j {
            for (e, edge) in self.base.edges().iter().enumerate() {
                if forward[t][edge.from] && backward[j - 1 - t][edge.to] {
                    out.push(self.edge_index(t as u32, e));
                }
            }
        }
        out
    }

    pub fn debug_document(&self) -> LayeredGraphDocument {
        let g = &self.base;
        LayeredGraphDocument {
            l_max: self.l_max,
            nodes: (0..self.node_count())
                .map(|i| {
                    let n = self.node(i);
                    LayeredNodeEntry {
                        id: g.node_id(n.base).to_string(),
                        layer: n.layer,
                    }
                })
                .collect(),
            edges: (0..self.edge_count())
                .map(|i| {
                    let e = self.edge(i);
                    LayeredEdgeEntry {
                        u: g.node_id(e.from.base).to_string(),
                        v: g.node_id(e.to.base).to_string(),
                        layer: e.layer,
                        capacity: self.capacity(i),
                    }
                })
                .collect(),
        }
    }
}

/// `reach[t][v]`: `v` is reachable from (or, backwards, reaches) `start` in exactly `t` steps.
fn exact_reach(g: &NetworkGraph, start: NodeIdx, depth: usize, forward: bool) -> Vec<Vec<bool>> {
    let n = g.node_count();
    let mut reach = vec![vec![false; n]; depth + 1];
    reach[0][start] = true;
    for t in 0..depth {
        for v in 0..n {
            if !reach[t][v] {
                continue;
            }
            let next: &[EdgeIdx] = if forward {
                g.out_edges(v)
            } else {
                g.in_edges(v)
            };
            for &e in next {
                let edge = g.edge(e);
                let w = if forward { edge.to } else { edge.from };
                reach[t + 1][w] = true;
            }
        }
    }
    reach
}

#[derive(Debug, Clone, Serialize)]
pub struct LayeredNodeEntry {
    pub id: String,
    pub layer: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct LayeredEdgeEntry {
    pub u: String,
    pub v: String,
    pub layer: u32,
    pub capacity: f64,
}

/// Node and edge listing of a layered graph, for inspection.
#[derive(Debug, Clone, Serialize)]
pub struct LayeredGraphDocument {
    pub l_max: u32,
    pub nodes: Vec<LayeredNodeEntry>,
    pub edges: Vec<LayeredEdgeEntry>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demands::{reduce_demands, DemandEntry};
    use crate::topology::GraphBuilder;
    use std::collections::VecDeque;

    /// Five nodes s,u,v,w,e in the shape of a small repeater network.
    fn five_node() -> NetworkGraph {
        let mut b = GraphBuilder::new(0.9925, 0.5);
        for id in ["s", "u", "v", "w", "e"] {
            b.add_node(id);
        }
        for (x, y, c) in [
            ("s", "u", 4.0),
            ("s", "v", 3.0),
            ("u", "e", 2.0),
            ("v", "w", 5.0),
            ("w", "e", 1.0),
            ("u", "v", 2.0),
        ] {
            b.add_edge(x, y, c).unwrap();
        }
        b.build().unwrap()
    }

    #[test]
    fn fifteen_nodes_for_two_hops() {
        let g = five_node();
        let d = reduce_demands(&[DemandEntry::length("s", "e", 2)], &g).unwrap();
        let lg = build_layered_graph(&g, &d);
        assert_eq!(lg.node_count(), 15);
        assert_eq!(lg.edge_count(), 2 * g.edge_count());
        for i in 0..lg.edge_count() {
            let e = lg.edge(i);
            assert_eq!(e.to.layer, e.from.layer + 1);
            assert_eq!(lg.capacity(i), g.capacity(e.base_edge));
        }
    }

    #[test]
    fn degenerate_zero_layers() {
        let g = five_node();
        let lg = LayeredGraph::new(g.clone(), 0);
        assert_eq!(lg.node_count(), g.node_count());
        assert_eq!(lg.edge_count(), 0);
        assert_eq!(lg.out_edges(LayeredNode { base: 0, layer: 0 }).count(), 0);
    }

    #[test]
    fn sub_demands() {
        let g = five_node();
        let d = reduce_demands(&[DemandEntry::length("s", "e", 2)], &g).unwrap();
        let subs = decompose_demands(&d);
        let s = g.node_index("s").unwrap();
        let e = g.node_index("e").unwrap();
        assert_eq!(
            subs.iter()
                .map(|x| (x.source_node(), x.sink_node()))
                .collect::<Vec<_>>(),
            vec![
                (
                    LayeredNode { base: s, layer: 0 },
                    LayeredNode { base: e, layer: 1 }
                ),
                (
                    LayeredNode { base: s, layer: 0 },
                    LayeredNode { base: e, layer: 2 }
                ),
            ]
        );
        let d3 = reduce_demands(
            &[
                DemandEntry::length("s", "e", 3),
                DemandEntry::length("u", "e", 3),
                DemandEntry::length("v", "e", 3),
            ],
            &g,
        )
        .unwrap();
        assert_eq!(decompose_demands(&d3).len(), 9);
        let d1 = reduce_demands(&[DemandEntry::length("s", "e", 1)], &g).unwrap();
        assert_eq!(decompose_demands(&d1).len(), 1);
    }

    #[test]
    fn every_walk_to_layer_j_has_j_edges() {
        let g = five_node();
        let lg = LayeredGraph::new(g.clone(), 4);
        let s = LayeredNode { base: 0, layer: 0 };
        // BFS depth equals layer index
        let mut depth = vec![usize::MAX; lg.node_count()];
        let mut queue = VecDeque::from([s]);
        depth[lg.node_index(s)] = 0;
        while let Some(n) = queue.pop_front() {
            for e in lg.out_edges(n) {
                let to = lg.edge(e).to;
                let idx = lg.node_index(to);
                if depth[idx] == usize::MAX {
                    depth[idx] = depth[lg.node_index(n)] + 1;
                    queue.push_back(to);
                }
                assert_eq!(depth[idx], to.layer as usize);
            }
        }
    }

    #[test]
    fn support_covers_exactly_the_useful_edges() {
        let g = five_node();
        let lg = LayeredGraph::new(g.clone(), 3);
        let ix = |id| g.node_index(id).unwrap();
        let sub = SubDemand {
            demand: 0,
            hops: 2,
            source: ix("s"),
            sink: ix("e"),
        };
        let names: Vec<(String, String, u32)> = lg
            .support(&sub)
            .into_iter()
            .map(|i| {
                let e = lg.edge(i);
                (
                    g.node_id(e.from.base).into(),
                    g.node_id(e.to.base).into(),
                    e.layer,
                )
            })
            .collect();
        assert_eq!(
            names,
            vec![("s".into(), "u".into(), 0), ("u".into(), "e".into(), 1)]
        );
    }

    #[test]
    fn size_bounds() {
        let g = five_node();
        for l in 0..5u32 {
            let lg = LayeredGraph::new(g.clone(), l);
            let v = g.node_count();
            assert!(lg.node_count() <= (l as usize + 1) * v);
            assert!(lg.node_count() <= v * v);
            assert!(lg.edge_count() <= g.edge_count() * v);
        }
        let doc = LayeredGraph::new(g, 2).debug_document();
        assert_eq!(doc.nodes.len(), 15);
    }
}
