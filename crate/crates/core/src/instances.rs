//! Seeded instance generators and small fixed example networks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::demands::DemandEntry;
use crate::topology::{GraphBuilder, NetworkGraph, NodeId};

/// A network with its raw (unreduced) demands.
#[derive(Debug, Clone)]
pub struct Instance {
    pub graph: NetworkGraph,
    pub demands: Vec<DemandEntry>,
}

#[derive(Debug, Clone, Copy)]
pub struct RandomInstanceParams {
    pub max_nodes: usize,
    pub max_edges: usize,
    pub max_demands: usize,
    pub max_length: u32,
    pub swap_success: &'static [f64],
}

impl Default for RandomInstanceParams {
    fn default() -> Self {
        Self {
            max_nodes: 8,
            max_edges: 20,
            max_demands: 3,
            max_length: 4,
            swap_success: &[0.5, 0.75, 1.0],
        }
    }
}

fn length_demand(s: usize, e: usize, l: u32) -> DemandEntry {
    DemandEntry::Length {
        source: NodeId::Str(s.to_string()),
        destination: NodeId::Str(e.to_string()),
        max_length: l,
    }
}

fn distinct_pair(rng: &mut impl Rng, n: usize) -> (usize, usize) {
    let s = rng.random_range(0..n);
    let mut e = rng.random_range(0..n - 1);
    if e >= s {
        e += 1;
    }
    (s, e)
}

/// Small directed instance with hop-bounded demands; nodes are named `0..n`.
pub fn random_instance(seed: u64, p: &RandomInstanceParams) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(3..=p.max_nodes);
    let mut pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v)))
        .collect();
    pairs.shuffle(&mut rng);
    let m = rng.random_range(n - 1..=p.max_edges.min(pairs.len()));
    let q = p.swap_success[rng.random_range(0..p.swap_success.len())];

    let mut b = GraphBuilder::new(0.9925, q);
    for u in 0..n {
        b.add_node(&u.to_string());
    }
    for &(u, v) in &pairs[..m] {
        let cap = (rng.random_range(1.0..20.0_f64) * 100.0).round() / 100.0;
        b.add_edge(&u.to_string(), &v.to_string(), cap)
            .expect("endpoints declared");
    }
    let k = rng.random_range(1..=p.max_demands);
    let demands = (0..k)
        .map(|_| {
            let (s, e) = distinct_pair(&mut rng, n);
            length_demand(s, e, rng.random_range(1..=p.max_length))
        })
        .collect();
    Instance {
        graph: b.build().expect("generated graph is valid"),
        demands,
    }
}

/// A connected 50-node, 68-link network in the size class of a national research
/// backbone, with integer capacities uniform in `[1, 400]` and four random
/// fidelity-targeted demands in `[0.93, 0.99]`. Nodes are named `1..=50`.
pub fn backbone_instance(seed: u64) -> Instance {
    const NODES: usize = 50;
    const LINKS: usize = 68;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut links: Vec<(usize, usize)> = Vec::with_capacity(LINKS);
    let has = |links: &[(usize, usize)], a: usize, b: usize| {
        links
            .iter()
            .any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a))
    };
    for v in 2..=NODES {
        let u = rng.random_range(1..v);
        links.push((u, v));
    }
    while links.len() < LINKS {
        let u = rng.random_range(1..=NODES);
        let v = rng.random_range(1..=NODES);
        if u != v && !has(&links, u, v) {
            links.push((u, v));
        }
    }
    let mut b = GraphBuilder::new(0.9925, 0.5);
    for v in 1..=NODES {
        b.add_node(&v.to_string());
    }
    for (u, v) in links {
        let cap = rng.random_range(1..=400) as f64;
        b.add_undirected_edge(&u.to_string(), &v.to_string(), cap)
            .expect("endpoints declared");
    }
    let demands = (0..4)
        .map(|_| {
            let (s, e) = distinct_pair(&mut rng, NODES);
            DemandEntry::Fidelity {
                source: NodeId::Str((s + 1).to_string()),
                destination: NodeId::Str((e + 1).to_string()),
                target_fidelity: rng.random_range(0.93..=0.99),
            }
        })
        .collect();
    Instance {
        graph: b.build().expect("generated graph is valid"),
        demands,
    }
}

/// Two demands sharing the link `(w, e)` of capacity 20, with `q = 1/2`.
///
/// `s1 -> u -> v -> w -> e` has bottleneck 2 and `s2 -> w -> e` bottleneck 10,
/// so the optimal rates are 0.25 and 5.
pub fn shared_link_instance() -> Instance {
    let mut b = GraphBuilder::new(0.9925, 0.5);
    for id in ["s1", "s2", "u", "v", "w", "e"] {
        b.add_node(id);
    }
    for (u, v, c) in [
        ("s1", "u", 2.0),
        ("u", "v", 2.0),
        ("v", "w", 2.0),
        ("w", "e", 20.0),
        ("s2", "w", 10.0),
    ] {
        b.add_edge(u, v, c).expect("endpoints declared");
    }
    Instance {
        graph: b.build().expect("valid"),
        demands: vec![
            DemandEntry::length("s1", "e", 4),
            DemandEntry::length("s2", "e", 2),
        ],
    }
}

/// Directed chain `n0 -> n1 -> ... -> nk` with the given capacities.
pub fn chain_instance(capacities: &[f64], swap_success: f64) -> Instance {
    let mut b = GraphBuilder::new(0.9925, swap_success);
    let names: Vec<String> = (0..=capacities.len()).map(|i| format!("n{i}")).collect();
    for n in &names {
        b.add_node(n);
    }
    for (i, &c) in capacities.iter().enumerate() {
        b.add_edge(&names[i], &names[i + 1], c)
            .expect("endpoints declared");
    }
    Instance {
        graph: b.build().expect("valid"),
        demands: vec![DemandEntry::length(
            &names[0],
            &names[capacities.len()],
            capacities.len() as u32,
        )],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_instances_respect_limits() {
        let p = RandomInstanceParams::default();
        for seed in 0..200 {
            let inst = random_instance(seed, &p);
            assert!(inst.graph.node_count() <= 8);
            assert!(inst.graph.edge_count() <= 20);
            assert!((1..=3).contains(&inst.demands.len()));
        }
        let a = random_instance(7, &p);
        let b = random_instance(7, &p);
        assert_eq!(a.graph.to_json(), b.graph.to_json());
    }

    #[test]
    fn backbone_shape() {
        let inst = backbone_instance(2020);
        assert_eq!(inst.graph.node_count(), 50);
        assert_eq!(inst.graph.edge_count(), 136);
        assert!(inst
            .graph
            .edges()
            .iter()
            .all(|e| (1.0..=400.0).contains(&e.capacity) && e.capacity.fract() == 0.0));
        assert_eq!(inst.demands.len(), 4);
    }
}
