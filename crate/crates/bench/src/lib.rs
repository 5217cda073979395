//! Fixtures shared by the benchmarks.

use qflow::instances::{backbone_instance, random_instance, Instance, RandomInstanceParams};
use qflow::pipeline::Problem;

pub fn backbone(seed: u64) -> Problem {
    let Instance { graph, demands } = backbone_instance(seed);
    Problem::new(graph, demands).expect("backbone instance reduces")
}

/// Random instances with at most `max_nodes` nodes, `4 * max_nodes` edges and hop bound 5.
pub fn random_problems(count: u64, max_nodes: usize) -> Vec<Problem> {
    let params = RandomInstanceParams {
        max_nodes,
        max_edges: 4 * max_nodes,
        max_demands: 3,
        max_length: 5,
        ..Default::default()
    };
    (0..count)
        .map(|seed| {
            let Instance { graph, demands } = random_instance(seed, &params);
            Problem::new(graph, demands).expect("random instance reduces")
        })
        .collect()
}
