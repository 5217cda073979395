//! Demands and their reduction from fidelity targets to hop bounds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fidelity::{length_bound, FidelityError, FidelityTarget};
use crate::topology::{NetworkGraph, NodeId, NodeIdx};

#[derive(Debug, Error, PartialEq)]
pub enum DemandError {
    #[error("demand {index}: unknown node `{node}`")]
    UnknownEndpoint { index: usize, node: String },
    #[error("demand {index}: source and destination are both `{node}`")]
    SameEndpoints { index: usize, node: String },
    #[error("demand {index}: {source}")]
    Fidelity {
        index: usize,
        #[source]
        source: FidelityError,
    },
    #[error("demand {index}: max_length must be at least 1")]
    ZeroLength { index: usize },
    #[error("empty demand set")]
    Empty,
    #[error("malformed demand document: {0}")]
    Schema(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDemandEntry {
    source: NodeId,
    destination: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target_fidelity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_length: Option<u32>,
}

impl TryFrom<RawDemandEntry> for DemandEntry {
    type Error = String;

    fn try_from(raw: RawDemandEntry) -> Result<Self, Self::Error> {
        match (raw.target_fidelity, raw.max_length) {
            (Some(target_fidelity), None) => Ok(DemandEntry::Fidelity {
                source: raw.source,
                destination: raw.destination,
                target_fidelity,
            }),
            (None, Some(max_length)) => Ok(DemandEntry::Length {
                source: raw.source,
                destination: raw.destination,
                max_length,
            }),
            _ => Err("exactly one of `target_fidelity` and `max_length` is required".into()),
        }
    }
}

impl From<DemandEntry> for RawDemandEntry {
    fn from(d: DemandEntry) -> Self {
        match d {
            DemandEntry::Fidelity {
                source,
                destination,
                target_fidelity,
            } => RawDemandEntry {
                source,
                destination,
                target_fidelity: Some(target_fidelity),
                max_length: None,
            },
            DemandEntry::Length {
                source,
                destination,
                max_length,
            } => RawDemandEntry {
                source,
                destination,
                target_fidelity: None,
                max_length: Some(max_length),
            },
        }
    }
}

/// One entry of the demand document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDemandEntry", into = "RawDemandEntry")]
pub enum DemandEntry {
    Fidelity {
        source: NodeId,
        destination: NodeId,
        target_fidelity: f64,
    },
    Length {
        source: NodeId,
        destination: NodeId,
        max_length: u32,
    },
}

impl DemandEntry {
    pub fn fidelity(source: &str, destination: &str, target: f64) -> Self {
        DemandEntry::Fidelity {
            source: NodeId::Str(source.into()),
            destination: NodeId::Str(destination.into()),
            target_fidelity: target,
        }
    }

    pub fn length(source: &str, destination: &str, max_length: u32) -> Self {
        DemandEntry::Length {
            source: NodeId::Str(source.into()),
            destination: NodeId::Str(destination.into()),
            max_length,
        }
    }

    fn endpoints(&self) -> (String, String) {
        match self {
            DemandEntry::Fidelity {
                source,
                destination,
                ..
            }
            | DemandEntry::Length {
                source,
                destination,
                ..
            } => (source.as_string(), destination.as_string()),
        }
    }
}

pub fn parse_demand_document(text: &str) -> Result<Vec<DemandEntry>, DemandError> {
    serde_json::from_str(text).map_err(|e| DemandError::Schema(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demand {
    pub source: NodeIdx,
    pub destination: NodeIdx,
    pub target_fidelity: Option<f64>,
    /// Hop bound; `None` when the target cannot be met without distillation.
    pub length_bound: Option<u32>,
}

impl Demand {
    pub fn is_feasible(&self) -> bool {
        self.length_bound.is_some()
    }

    /// Hop bound used by the formulations; zero for infeasible demands.
    pub fn hops(&self) -> u32 {
        self.length_bound.unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandSet {
    demands: Vec<Demand>,
    l_max: u32,
}

impl DemandSet {
    /// Builds a set from already-reduced demands.
    pub fn new(demands: Vec<Demand>) -> Result<Self, DemandError> {
        if demands.is_empty() {
            return Err(DemandError::Empty);
        }
        let l_max = demands.iter().map(Demand::hops).max().unwrap_or(0);
        Ok(Self { demands, l_max })
    }

    pub fn demands(&self) -> &[Demand] {
        &self.demands
    }

    pub fn len(&self) -> usize {
        self.demands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demands.is_empty()
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    pub fn infeasible(&self) -> impl Iterator<Item = usize> + '_ {
        self.demands
            .iter()
            .enumerate()
            .filter(|(_, d)| !d.is_feasible())
            .map(|(i, _)| i)
    }
}

/// Converts raw demands to hop bounds against `g`.
///
/// Targets above the elementary fidelity are kept but marked infeasible. Every
/// bound is capped at `|V| - 1`, the longest simple path.
pub fn reduce_demands(raw: &[DemandEntry], g: &NetworkGraph) -> Result<DemandSet, DemandError> {
    let cap = g.node_count().saturating_sub(1) as u32;
    let elementary = FidelityTarget::new(g.elementary_fidelity())
        .map_err(|source| DemandError::Fidelity { index: 0, source })?;
    let mut demands = Vec::with_capacity(raw.len());
    for (index, entry) in raw.iter().enumerate() {
        let (s, e) = entry.endpoints();
        let lookup = |id: &str| {
            g.node_index(id)
                .ok_or_else(|| DemandError::UnknownEndpoint {
                    index,
                    node: id.to_string(),
                })
        };
        let (source, destination) = (lookup(&s)?, lookup(&e)?);
        if source == destination {
            return Err(DemandError::SameEndpoints { index, node: s });
        }
        let demand = match *entry {
            DemandEntry::Fidelity {
                target_fidelity, ..
            } => {
                let target = FidelityTarget::new(target_fidelity)
                    .map_err(|source| DemandError::Fidelity { index, source })?;
                let bound = match length_bound(target, elementary) {
                    Ok(b) => Some(b.capped(cap)),
                    Err(FidelityError::TargetExceedsElementary { .. }) => None,
                    Err(source) => return Err(DemandError::Fidelity { index, source }),
                };
                Demand {
                    source,
                    destination,
                    target_fidelity: Some(target_fidelity),
                    length_bound: bound,
                }
            }
            DemandEntry::Length { max_length, .. } => {
                if max_length == 0 {
                    return Err(DemandError::ZeroLength { index });
                }
                Demand {
                    source,
                    destination,
                    target_fidelity: None,
                    length_bound: Some(max_length.min(cap)),
                }
            }
        };
        demands.push(demand);
    }
    DemandSet::new(demands)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::GraphBuilder;

    fn numbered(n: usize) -> NetworkGraph {
        let mut b = GraphBuilder::new(0.9925, 0.5);
        for i in 1..=n {
            b.add_node(&i.to_string());
        }
        for i in 1..n {
            b.add_undirected_edge(&i.to_string(), &(i + 1).to_string(), 10.0)
                .unwrap();
        }
        b.build().unwrap()
    }

    #[test]
    fn mixed_targets_and_lengths() {
        let g = numbered(50);
        // a target strictly between lengths 7 and 8
        let f7 = (1.0 + 3.0 * 0.99_f64.powf(7.5)) / 4.0;
        let raw = vec![
            DemandEntry::fidelity("40", "45", f7),
            DemandEntry::length("21", "13", 6),
            DemandEntry::length("30", "50", 7),
            DemandEntry::length("38", "15", 8),
        ];
        let d = reduce_demands(&raw, &g).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.l_max(), 8);
        let hops: Vec<u32> = d.demands().iter().map(Demand::hops).collect();
        assert_eq!(hops, vec![7, 6, 7, 8]);
        assert_eq!(d.demands()[0].source, g.node_index("40").unwrap());
    }

    #[test]
    fn elementary_target_gives_one_hop() {
        let g = numbered(3);
        let d = reduce_demands(&[DemandEntry::fidelity("1", "3", 0.9925)], &g).unwrap();
        assert_eq!(d.demands()[0].length_bound, Some(1));
    }

    #[test]
    fn too_strict_target_is_infeasible() {
        let g = numbered(3);
        let raw = vec![
            DemandEntry::fidelity("1", "3", 0.999),
            DemandEntry::length("1", "2", 1),
        ];
        let d = reduce_demands(&raw, &g).unwrap();
        assert!(!d.demands()[0].is_feasible());
        assert_eq!(d.infeasible().collect::<Vec<_>>(), vec![0]);
        assert_eq!(d.l_max(), 1);
    }

    #[test]
    fn bounds_are_capped() {
        let g = numbered(4).with_parameters(1.0, 0.5);
        let d = reduce_demands(
            &[
                DemandEntry::fidelity("1", "4", 0.9),
                DemandEntry::length("1", "4", 99),
            ],
            &g,
        )
        .unwrap();
        assert_eq!(d.demands()[0].length_bound, Some(3));
        assert_eq!(d.demands()[1].length_bound, Some(3));
    }

    #[test]
    fn ingest_errors() {
        let g = numbered(3);
        assert!(matches!(
            reduce_demands(&[DemandEntry::length("1", "1", 2)], &g),
            Err(DemandError::SameEndpoints { .. })
        ));
        assert!(matches!(
            reduce_demands(&[DemandEntry::length("1", "9", 2)], &g),
            Err(DemandError::UnknownEndpoint { .. })
        ));
        assert!(matches!(
            reduce_demands(&[DemandEntry::length("1", "2", 0)], &g),
            Err(DemandError::ZeroLength { .. })
        ));
        assert!(matches!(
            reduce_demands(&[DemandEntry::fidelity("1", "2", 0.4)], &g),
            Err(DemandError::Fidelity { .. })
        ));
        assert_eq!(reduce_demands(&[], &g), Err(DemandError::Empty));
    }

    #[test]
    fn duplicates_kept_and_order_preserved() {
        let g = numbered(3);
        let raw = vec![
            DemandEntry::length("1", "3", 2),
            DemandEntry::length("1", "3", 2),
        ];
        let d = reduce_demands(&raw, &g).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.demands()[0], d.demands()[1]);
    }

    #[test]
    fn document_parsing() {
        let raw = parse_demand_document(
            r#"[{"source": "a", "destination": "b", "target_fidelity": 0.95},
                {"source": 1, "destination": 2, "max_length": 3}]"#,
        )
        .unwrap();
        assert_eq!(raw[0], DemandEntry::fidelity("a", "b", 0.95));
        assert!(matches!(raw[1], DemandEntry::Length { max_length: 3, .. }));
        assert!(parse_demand_document(r#"[{"source": "a"}]"#).is_err());
        assert!(parse_demand_document(
            r#"[{"source": "a", "destination": "b", "target_fidelity": 0.9, "max_length": 2}]"#
        )
        .is_err());
    }
}
