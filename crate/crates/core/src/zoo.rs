//! Ingest for the graph-markup (GML) files published by the Internet Topology Zoo.
//!
//! Only the subset the zoo uses is understood: nested `key [ ... ]` lists with
//! numeric or quoted-string values. Nodes are keyed by their GML `id`; an edge
//! capacity comes from a `capacity` attribute when present, otherwise it is drawn
//! uniformly from a caller-supplied range with a seeded generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::topology::{GraphBuilder, NetworkGraph, TopologyError};

#[derive(Debug, Clone, PartialEq)]
pub enum GmlValue {
    Number(f64),
    Text(String),
    List(Vec<(String, GmlValue)>),
}

impl GmlValue {
    fn get(&self, key: &str) -> Option<&GmlValue> {
        match self {
            GmlValue::List(items) => items.iter().find(|(k, _)| k == key).map(|(_, v)| v),
            _ => None,
        }
    }

    fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a GmlValue> + 'a {
        let items: &[(String, GmlValue)] = match self {
            GmlValue::List(items) => items,
            _ => &[],
        };
        items.iter().filter(move |(k, _)| k == key).map(|(_, v)| v)
    }

    fn as_id(&self) -> Option<String> {
        match self {
            GmlValue::Number(x) if x.fract() == 0.0 => Some(format!("{}", *x as i64)),
            GmlValue::Number(x) => Some(x.to_string()),
            GmlValue::Text(s) => Some(s.clone()),
            GmlValue::List(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Key(String),
    Number(f64),
    Text(String),
    Open,
    Close,
}

fn tokenize(text: &str) -> Result<Vec<Token>, TopologyError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '#' {
            for c in chars.by_ref() {
                if c == '\n' {
                    break;
                }
            }
        } else if c == '[' {
            chars.next();
            out.push(Token::Open);
        } else if c == ']' {
            chars.next();
            out.push(Token::Close);
        } else if c == '"' {
            chars.next();
            let mut s = String::new();
            loop {
                match chars.next() {
                    Some('"') => break,
                    Some(c) => s.push(c),
                    None => return Err(TopologyError::Schema("unterminated string".into())),
                }
            }
            out.push(Token::Text(s));
        } else {
            let mut word = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() || c == '[' || c == ']' || c == '"' {
                    break;
                }
                word.push(c);
                chars.next();
            }
            match word.parse::<f64>() {
                Ok(x) => out.push(Token::Number(x)),
                Err(_) => out.push(Token::Key(word)),
            }
        }
    }
    Ok(out)
}

fn parse_list(tokens: &[Token], pos: &mut usize, nested: bool) -> Result<GmlValue, TopologyError> {
    let mut items = Vec::new();
    loop {
        let key = match tokens.get(*pos) {
            None if nested => return Err(TopologyError::Schema("missing `]`".into())),
            None => break,
            Some(Token::Close) if nested => {
                *pos += 1;
                break;
            }
            Some(Token::Key(k)) => k.clone(),
            Some(other) => {
                return Err(TopologyError::Schema(format!(
                    "expected a key, found {other:?}"
                )))
            }
        };
        *pos += 1;
        let value = match tokens.get(*pos) {
            Some(Token::Number(x)) => GmlValue::Number(*x),
            Some(Token::Text(s)) => GmlValue::Text(s.clone()),
            Some(Token::Key(s)) => GmlValue::Text(s.clone()),
            Some(Token::Open) => {
                *pos += 1;
                let v = parse_list(tokens, pos, true)?;
                items.push((key, v));
                continue;
            }
            _ => return Err(TopologyError::Schema(format!("key `{key}` has no value"))),
        };
        *pos += 1;
        items.push((key, value));
    }
    Ok(GmlValue::List(items))
}

pub fn parse_gml(text: &str) -> Result<GmlValue, TopologyError> {
    let tokens = tokenize(text)?;
    let mut pos = 0;
    parse_list(&tokens, &mut pos, false)
}

/// Options for filling in what a zoo file does not carry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZooOptions {
    pub fidelity: f64,
    pub swap_success: f64,
    pub capacity_range: (f64, f64),
    pub seed: u64,
}

impl Default for ZooOptions {
    fn default() -> Self {
        Self {
            fidelity: 0.9925,
            swap_success: 0.5,
            capacity_range: (1.0, 400.0),
            seed: 0,
        }
    }
}

/// Converts a zoo GML document to a directed graph. Undirected files (the default)
/// produce both edge orientations at the same capacity.
pub fn graph_from_gml(text: &str, opts: &ZooOptions) -> Result<NetworkGraph, TopologyError> {
    let root = parse_gml(text)?;
    let graph = root
        .get("graph")
        .ok_or_else(|| TopologyError::Schema("no `graph [...]` block".into()))?;
    let directed = matches!(graph.get("directed"), Some(GmlValue::Number(x)) if *x != 0.0);
    let (lo, hi) = opts.capacity_range;
    if !(lo > 0.0 && hi >= lo) {
        return Err(TopologyError::Schema(format!(
            "bad capacity range [{lo}, {hi}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut b = GraphBuilder::new(opts.fidelity, opts.swap_success);
    for node in graph.all("node") {
        let id = node
            .get("id")
            .and_then(GmlValue::as_id)
            .ok_or_else(|| TopologyError::Schema("node without id".into()))?;
        if !b.add_node(&id) {
            return Err(TopologyError::DuplicateNode(id));
        }
    }
    for edge in graph.all("edge") {
        let u = edge
            .get("source")
            .and_then(GmlValue::as_id)
            .ok_or_else(|| TopologyError::Schema("edge without source".into()))?;
        let v = edge
            .get("target")
            .and_then(GmlValue::as_id)
            .ok_or_else(|| TopologyError::Schema("edge without target".into()))?;
        if u == v {
            continue;
        }
        let capacity = match edge.get("capacity") {
            Some(GmlValue::Number(c)) => *c,
            Some(other) => {
                return Err(TopologyError::Schema(format!(
                    "non-numeric capacity {other:?}"
                )))
            }
            None if hi > lo => rng.random_range(lo..=hi),
            None => lo,
        };
        if directed {
            b.add_edge(&u, &v, capacity)?;
        } else {
            b.add_undirected_edge(&u, &v, capacity)?;
        }
    }
    b.build()
}
