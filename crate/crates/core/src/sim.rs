//! Prepare-and-swap protocol: analytic rates, link time-sharing and Monte-Carlo.
//!
//! Time runs in unit-second trials. In each trial every link along a path
//! deterministically produces that path's elementary pairs; a whole number of
//! pairs plus one extra pair with probability equal to the fractional part.
//! Each candidate end-to-end pair then survives iff all `n - 1` intermediate
//! swaps succeed, each independently with probability `q`.
//!
//! Randomness is drawn from ChaCha8 streams keyed by `(seed, trial, path)`, so
//! results do not depend on how trials are spread over threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::PathAssignment;
use crate::topology::{EdgeIdx, NetworkGraph};

#[derive(Debug, Error, PartialEq)]
pub enum SimulationError {
    #[error("chain needs at least one link")]
    EmptyChain,
    #[error("capacity {0} must be positive and finite")]
    InvalidCapacity(f64),
    #[error("swap success probability {0} outside (0, 1]")]
    InvalidSwapSuccess(f64),
    #[error("at least one trial is required")]
    ZeroTrials,
    #[error("link {edge} is oversubscribed: time shares sum to {total}")]
    Oversubscribed { edge: EdgeIdx, total: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheduling {
    /// Each link serves its paths one after another within the second.
    #[default]
    Sequential,
    /// Each link alternates between its paths one elementary pair at a time.
    RoundRobin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub trials: u64,
    pub seed: u64,
    pub q: f64,
    /// Werner parameter of elementary pairs, used for fidelity tracking.
    pub werner: f64,
    pub scheduling: Scheduling,
}

impl SimulationConfig {
    fn validate(&self) -> Result<(), SimulationError> {
        if self.trials == 0 {
            return Err(SimulationError::ZeroTrials);
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(SimulationError::InvalidSwapSuccess(self.q));
        }
        Ok(())
    }
}

/// Expected end-to-end rate of a chain: `q^(n-1) * min capacity`.
pub fn analytic_chain_rate(capacities: &[f64], q: f64) -> Result<f64, SimulationError> {
    if capacities.is_empty() {
        return Err(SimulationError::EmptyChain);
    }
    if let Some(&c) = capacities.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
        return Err(SimulationError::InvalidCapacity(c));
    }
    let min = capacities.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(q.powi(capacities.len() as i32 - 1) * min)
}

/// Upper bound on average memory storage time for a path, in seconds:
/// `(rate / q^(n-1)) / min capacity along the path`.
pub fn storage_time_bound(g: &NetworkGraph, edges: &[EdgeIdx], rate: f64, q: f64) -> f64 {
    if rate <= 0.0 || edges.is_empty() {
        return 0.0;
    }
    let min = edges
        .iter()
        .map(|&e| g.capacity(e))
        .fold(f64::INFINITY, f64::min);
    rate / q.powi(edges.len() as i32 - 1) / min
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShareEntry {
    /// Index of the path in assignment order.
    pub path: usize,
    pub demand: usize,
    /// Elementary pairs per second this path needs from the link.
    pub elementary_rate: f64,
    /// Fraction of each second the link spends on this path.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeSchedule {
    pub edge: EdgeIdx,
    pub capacity: f64,
    pub entries: Vec<ShareEntry>,
    pub total_share: f64,
}

/// Per-link time shares, for links used by at least one path, ascending by edge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkSchedule {
    pub edges: Vec<EdgeSchedule>,
}

impl LinkSchedule {
    pub fn edge(&self, e: EdgeIdx) -> Option<&EdgeSchedule> {
        self.edges.iter().find(|s| s.edge == e)
    }
}

pub fn build_link_schedule(
    pa: &PathAssignment,
    g: &NetworkGraph,
    q: f64,
    tol_feas: f64,
) -> Result<LinkSchedule, SimulationError> {
    let mut per_edge: Vec<Vec<ShareEntry>> = vec![Vec::new(); g.edge_count()];
    for (k, p) in pa.paths().enumerate() {
        let elementary = p.rate / q.powi(p.len() as i32 - 1);
        for &e in &p.base_edges {
            let list = &mut per_edge[e];
            match list.last_mut() {
                // a walk crossing the same link twice needs twice the pairs
                Some(last) if last.path == k => last.elementary_rate += elementary,
                _ => list.push(ShareEntry {
                    path: k,
                    demand: p.demand,
                    elementary_rate: elementary,
                    share: 0.0,
                }),
            }
        }
    }
    let mut edges = Vec::new();
    for (e, mut entries) in per_edge.into_iter().enumerate() {
        if entries.is_empty() {
            continue;
        }
        let capacity = g.capacity(e);
        for s in &mut entries {
            s.share = s.elementary_rate / capacity;
        }
        let total_share: f64 = entries.iter().map(|s| s.share).sum();
        if total_share > 1.0 + tol_feas {
            return Err(SimulationError::Oversubscribed {
                edge: e,
                total: total_share,
            });
        }
        edges.push(EdgeSchedule {
            edge: e,
            capacity,
            entries,
            total_share,
        });
    }
    Ok(LinkSchedule { edges })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathReport {
    pub demand: usize,
    pub hops: usize,
    pub nodes: Vec<String>,
    pub analytic_rate: f64,
    pub empirical_rate: f64,
    pub std_error: f64,
    /// Fidelity of every delivered pair; `None` if no pair was delivered.
    pub fidelity: Option<f64>,
    pub storage_bound: f64,
    /// Mean time into the second at which the path's last elementary pair is ready.
    pub mean_ready_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub paths: Vec<PathReport>,
}

impl SimulationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "demand,hops,path,analytic_rate,empirical_rate,std_error,fidelity,storage_bound,mean_ready_time\n",
        );
        for p in &self.paths {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                p.demand,
                p.hops,
                p.nodes.join("-"),
                crate::pipeline::format_sig(p.analytic_rate),
                crate::pipeline::format_sig(p.empirical_rate),
                crate::pipeline::format_sig(p.std_error),
                p.fidelity
                    .map_or(String::new(), crate::pipeline::format_sig),
                crate::pipeline::format_sig(p.storage_bound),
                crate::pipeline::format_sig(p.mean_ready_time),
            ));
        }
        out
    }
}

/// A path as seen by the sampler.
struct SimPath {
    elementary: f64,
    swaps: u32,
    /// `(link slot, position in that link's service order)`.
    links: Vec<(usize, usize)>,
}

struct SimLink {
    capacity: f64,
    /// `(path, pairs per candidate)` in service order; a walk may cross a link twice.
    served: Vec<(usize, u64)>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn trial_rng(seed: u64, trial: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(trial)));
    rng.set_stream(path as u64);
    rng
}

/// Candidate pairs and delivered pairs for one path in one trial.
fn sample_path(rng: &mut ChaCha8Rng, p: &SimPath, q: f64) -> (u64, u64) {
    let whole = p.elementary.floor();
    let frac = p.elementary - whole;
    let mut candidates = whole as u64;
    if frac > 0.0 && rng.random_bool(frac) {
        candidates += 1;
    }
    if q >= 1.0 || p.swaps == 0 {
        return (candidates, candidates);
    }
    let mut delivered = 0;
    for _ in 0..candidates {
        if (0..p.swaps).all(|_| rng.random_bool(q)) {
            delivered += 1;
        }
    }
    (candidates, delivered)
}

/// Time at which the path at `pos` in `link`'s service order has all its pairs,
/// given this trial's candidate counts.
fn ready_time(link: &SimLink, pos: usize, candidates: &[u64], scheduling: Scheduling) -> f64 {
    let need = |k: usize| {
        let (p, mult) = link.served[k];
        candidates[p] * mult
    };
    let own = need(pos);
    if own == 0 {
        return 0.0;
    }
    let produced: u64 = match scheduling {
        Scheduling::Sequential => (0..=pos).map(need).sum(),
        Scheduling::RoundRobin => (0..link.served.len())
            .map(|k| {
                if k <= pos {
                    need(k).min(own)
                } else {
                    need(k).min(own - 1)
                }
            })
            .sum(),
    };
    produced as f64 / link.capacity
}

#[derive(Clone)]
struct Tally {
    delivered: Vec<u64>,
    delivered_sq: Vec<u128>,
    ready: Vec<f64>,
}

impl Tally {
    fn new(n: usize) -> Self {
        Self {
            delivered: vec![0; n],
            delivered_sq: vec![0; n],
            ready: vec![0.0; n],
        }
    }

    fn merge(&mut self, other: &Tally) {
        for k in 0..self.delivered.len() {
            self.delivered[k] += other.delivered[k];
            self.delivered_sq[k] += other.delivered_sq[k];
            self.ready[k] += other.ready[k];
        }
    }
}

const CHUNK: u64 = 2048;

fn run_trials(paths: &[SimPath], links: &[SimLink], cfg: &SimulationConfig) -> Tally {
    let n = paths.len();
    let chunks = cfg.trials.div_ceil(CHUNK);
    let partial: Vec<Tally> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut tally = Tally::new(n);
            let mut pairs = vec![0u64; n];
            for trial in c * CHUNK..((c + 1) * CHUNK).min(cfg.trials) {
                for (k, p) in paths.iter().enumerate() {
                    let mut rng = trial_rng(cfg.seed, trial, k);
                    let (candidates, delivered) = sample_path(&mut rng, p, cfg.q);
                    pairs[k] = candidates;
                    tally.delivered[k] += delivered;
                    tally.delivered_sq[k] += (delivered as u128) * (delivered as u128);
                }
                for (k, p) in paths.iter().enumerate() {
                    tally.ready[k] += p
                        .links
                        .iter()
                        .map(|&(slot, pos)| ready_time(&links[slot], pos, &pairs, cfg.scheduling))
                        .fold(0.0, f64::max);
                }
            }
            tally
        })
        .collect();
    let mut total = Tally::new(n);
    for t in &partial {
        total.merge(t);
    }
    total
}

fn mean_and_error(sum: u64, sum_sq: u128, trials: u64) -> (f64, f64) {
    let n = trials as f64;
    let mean = sum as f64 / n;
    if trials < 2 {
        return (mean, 0.0);
    }
    // exact integer arithmetic for the centered sum of squares
    let centered = (sum_sq * trials as u128) as f64 - (sum as u128 * sum as u128) as f64;
    let var = (centered / n).max(0.0) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Empirical rate, its standard error, delivered fidelity and mean ready time of path `k`.
fn summarize(
    tally: &Tally,
    k: usize,
    cfg: &SimulationConfig,
    hops: usize,
) -> (f64, f64, Option<f64>, f64) {
    let (mean, se) = mean_and_error(tally.delivered[k], tally.delivered_sq[k], cfg.trials);
    // every delivered pair carries the Werner parameter w^hops
    let fidelity =
        (tally.delivered[k] > 0).then(|| (1.0 + 3.0 * cfg.werner.powi(hops as i32)) / 4.0);
    (mean, se, fidelity, tally.ready[k] / cfg.trials as f64)
}

/// Simulates a single chain running at full capacity.
pub fn simulate_chain(
    capacities: &[f64],
    cfg: &SimulationConfig,
) -> Result<SimulationReport, SimulationError> {
    cfg.validate()?;
    let analytic = analytic_chain_rate(capacities, cfg.q)?;
    let min = capacities.iter().copied().fold(f64::INFINITY, f64::min);
    let path = SimPath {
        elementary: min,
        swaps: capacities.len() as u32 - 1,
        links: (0..capacities.len()).map(|s| (s, 0)).collect(),
    };
    let links: Vec<SimLink> = capacities
        .iter()
        .map(|&capacity| SimLink {
            capacity,
            served: vec![(0, 1)],
        })
        .collect();
    let tally = run_trials(std::slice::from_ref(&path), &links, cfg);
    let (empirical_rate, std_error, fidelity, mean_ready_time) =
        summarize(&tally, 0, cfg, capacities.len());
    Ok(SimulationReport {
        config: *cfg,
        paths: vec![PathReport {
            demand: 0,
            hops: capacities.len(),
            nodes: (0..=capacities.len()).map(|i| i.to_string()).collect(),
            analytic_rate: analytic,
            empirical_rate,
            std_error,
            fidelity,
            // the bottleneck link is busy the whole second
            storage_bound: 1.0,
            mean_ready_time,
        }],
    })
}

/// Simulates every path of an assignment, with links shared per `cfg.scheduling`.
pub fn simulate_network(
    pa: &PathAssignment,
    g: &NetworkGraph,
    cfg: &SimulationConfig,
) -> Result<SimulationReport, SimulationError> {
    cfg.validate()?;
    let schedule = build_link_schedule(pa, g, cfg.q, f64::INFINITY)?;
    let all: Vec<_> = pa.paths().collect();
    let mut links = Vec::with_capacity(schedule.edges.len());
    let mut path_links: Vec<Vec<(usize, usize)>> = vec![Vec::new(); all.len()];
    for (slot, s) in schedule.edges.iter().enumerate() {
        let mut served = Vec::with_capacity(s.entries.len());
        for (pos, entry) in s.entries.iter().enumerate() {
            let mult = all[entry.path]
                .base_edges
                .iter()
                .filter(|&&e| e == s.edge)
                .count() as u64;
            served.push((entry.path, mult));
            path_links[entry.path].push((slot, pos));
        }
        links.push(SimLink {
            capacity: s.capacity,
            served,
        });
    }
    let paths: Vec<SimPath> = all
        .iter()
        .zip(path_links)
        .map(|(p, links)| SimPath {
            elementary: p.rate / cfg.q.powi(p.len() as i32 - 1),
            swaps: p.len() as u32 - 1,
            links,
        })
        .collect();
    let tally = run_trials(&paths, &links, cfg);
    let rows = pa
        .paths()
        .enumerate()
        .map(|(k, p)| {
            let (empirical_rate, std_error, fidelity, mean_ready_time) =
                summarize(&tally, k, cfg, p.len());
            PathReport {
                demand: p.demand,
                hops: p.len(),
                nodes: p.nodes.iter().map(|&n| g.node_id(n).to_string()).collect(),
                analytic_rate: p.rate,
                empirical_rate,
                std_error,
                fidelity,
                storage_bound: storage_time_bound(g, &p.base_edges, p.rate, cfg.q),
                mean_ready_time,
            }
        })
        .collect();
    Ok(SimulationReport {
        config: *cfg,
        paths: rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::ExtractedPath;
    use crate::topology::GraphBuilder;

    fn cfg(q: f64, trials: u64) -> SimulationConfig {
        SimulationConfig {
            trials,
            seed: 11,
            q,
            werner: 0.99,
            scheduling: Scheduling::Sequential,
        }
    }

    #[test]
    fn analytic_rates() {
        assert_eq!(analytic_chain_rate(&[2.0, 3.0, 5.0, 2.0], 0.5), Ok(0.25));
        assert_eq!(analytic_chain_rate(&[7.5], 0.3), Ok(7.5));
        assert_eq!(analytic_chain_rate(&[4.0, 3.0], 1.0), Ok(3.0));
        assert_eq!(
            analytic_chain_rate(&[], 0.5),
            Err(SimulationError::EmptyChain)
        );
        assert!(analytic_chain_rate(&[1.0, 0.0], 0.5).is_err());
    }

    #[test]
    fn deterministic_chains() {
        let r = simulate_chain(&[5.0, 7.0], &cfg(1.0, 100)).unwrap();
        assert_eq!(r.paths[0].empirical_rate, 5.0);
        assert_eq!(r.paths[0].std_error, 0.0);
        let r = simulate_chain(&[5.0], &cfg(0.2, 100)).unwrap();
        assert_eq!(r.paths[0].empirical_rate, 5.0);
        assert!((r.paths[0].fidelity.unwrap() - 0.9925).abs() < 1e-15);
    }

    #[test]
    fn fractional_capacity_mean() {
        let r = simulate_chain(&[2.5], &cfg(1.0, 20_000)).unwrap();
        let p = &r.paths[0];
        assert!((p.empirical_rate - 2.5).abs() < 4.0 * p.std_error);
    }

    #[test]
    fn seeded_runs_repeat() {
        let a = simulate_chain(&[2.0, 3.0, 2.0], &cfg(0.5, 5000)).unwrap();
        let b = simulate_chain(&[2.0, 3.0, 2.0], &cfg(0.5, 5000)).unwrap();
        assert_eq!(a, b);
        let mut other = cfg(0.5, 5000);
        other.seed = 12;
        assert_ne!(a, simulate_chain(&[2.0, 3.0, 2.0], &other).unwrap());
    }

    fn shared(rates: [f64; 2]) -> (NetworkGraph, PathAssignment) {
        let mut b = GraphBuilder::new(0.9925, 0.5);
        for id in ["a", "b", "c"] {
            b.add_node(id);
        }
        b.add_edge("a", "b", 10.0).unwrap();
        b.add_edge("b", "c", 8.0).unwrap();
        let g = b.build().unwrap();
        let p = |demand, edges: Vec<usize>, rate| {
            let mut nodes = vec![g.edge(edges[0]).from];
            nodes.extend(edges.iter().map(|&e| g.edge(e).to));
            ExtractedPath {
                demand,
                hops: edges.len() as u32,
                layered_edges: vec![],
                base_edges: edges,
                nodes,
                rate,
                simple: true,
            }
        };
        let pa = PathAssignment::from_paths(
            2,
            vec![p(0, vec![0, 1], rates[0]), p(1, vec![1], rates[1])],
        );
        (g, pa)
    }

    #[test]
    fn schedule_shares_and_oversubscription() {
        let (g, pa) = shared([2.0, 4.0]);
        let s = build_link_schedule(&pa, &g, 0.5, 1e-7).unwrap();
        let bc = s.edge(1).unwrap();
        assert_eq!(bc.entries[0].elementary_rate, 4.0);
        assert_eq!(bc.entries[0].share, 0.5);
        assert_eq!(bc.entries[1].share, 0.5);
        assert_eq!(bc.total_share, 1.0);
        let (g, pa) = shared([2.0, 4.5]);
        assert!(matches!(
            build_link_schedule(&pa, &g, 0.5, 1e-7),
            Err(SimulationError::Oversubscribed { edge: 1, .. })
        ));
    }

    #[test]
    fn scheduling_changes_ready_times_only() {
        let (g, pa) = shared([2.0, 4.0]);
        let mut c = cfg(1.0, 10);
        let seq = simulate_network(&pa, &g, &c).unwrap();
        c.scheduling = Scheduling::RoundRobin;
        let rr = simulate_network(&pa, &g, &c).unwrap();
        for (a, b) in seq.paths.iter().zip(&rr.paths) {
            assert_eq!(a.empirical_rate, b.empirical_rate);
        }
        // with q = 1 both paths need 2 and 4 pairs from a link producing 8 per second
        assert_eq!(seq.paths[0].mean_ready_time, 0.25);
        assert_eq!(seq.paths[1].mean_ready_time, 0.75);
        // round robin: a, b, a, b, b, b; path 0 done after the third pair
        assert_eq!(rr.paths[0].mean_ready_time, 0.375);
        assert_eq!(rr.paths[1].mean_ready_time, 0.75);
        assert_eq!(seq.paths[1].empirical_rate, 4.0);
    }

    #[test]
    fn storage_bounds() {
        let (g, pa) = shared([2.0, 4.0]);
        let p = pa.paths().next().unwrap();
        assert_eq!(storage_time_bound(&g, &p.base_edges, p.rate, 0.5), 0.5);
        assert_eq!(storage_time_bound(&g, &p.base_edges, 0.0, 0.5), 0.0);
        assert_eq!(storage_time_bound(&g, &[1], 8.0, 1.0), 1.0);

        // four links of capacity 20 at rate 0.25: 2 elementary pairs/s, 2/20 s
        let chain = crate::instances::chain_instance(&[20.0; 4], 0.5).graph;
        let edges: Vec<EdgeIdx> = (0..chain.edge_count()).collect();
        assert_eq!(edges.len(), 4);
        assert_eq!(storage_time_bound(&chain, &edges, 0.25, 0.5), 0.1);
    }

    #[test]
    fn empty_assignment() {
        let (g, _) = shared([1.0, 1.0]);
        let pa = PathAssignment::from_paths(2, vec![]);
        let r = simulate_network(&pa, &g, &cfg(0.5, 10)).unwrap();
        assert!(r.paths.is_empty());
    }
}
