//! Initial mesh construction: prune the full mesh so every node degree stays
//! between floor(N/3) and 2*floor(N/3).
//!
//! Each node ranks the others by descending channel gain (ties broken by
//! ascending node id). Mutual-top-ranked pairs are linked first; a bounded
//! sweep then attaches still-unconnected nodes to their highest-priority
//! neighbors whose degree sits at the current fill level.

use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::model::{pairwise_gains, ModelError, NodeId, PhyConfig, Topology};
use crate::scalar::Float;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("need at least 4 nodes, got {0} (degree bounds degenerate)")]
    TooFewNodes(usize),
    #[error("constructed topology is disconnected ({components} components; sizes {sizes:?})")]
    Disconnected { components: usize, sizes: Vec<usize> },
    #[error("explicit gateway list is invalid: {0}")]
    BadGateways(String),
    #[error("topology file is malformed at line {line}: {reason}")]
    BadFile { line: usize, reason: String },
    #[error("stored gain for link ({0}, {1}) disagrees with node positions")]
    GainMismatch(NodeId, NodeId),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How the gateway subset is chosen.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GatewayMode {
    /// The two mutually farthest nodes.
    MaxDistancePair,
    /// Explicit node ids.
    Explicit(Vec<NodeId>),
}

/// Uniform node placement in a `side x side` square, driven by the caller's
/// seeded RNG so experiments are bit-reproducible.
pub fn sample_positions<F: Float>(n: usize, side: F, rng: &mut impl Rng) -> Vec<[F; 2]> {
    (0..n)
        .map(|_| {
            // Draw in f64 so the stream is identical across scalar types.
            let x = rng.gen_range(0.0..side.as_f64());
            let y = rng.gen_range(0.0..side.as_f64());
            [F::of(x), F::of(y)]
        })
        .collect()
}

/// Per node, every other node ordered by descending gain to it, ties by
/// ascending node id. Lists are over 0-based node indices.
#[derive(Clone, Debug)]
pub struct PriorityList {
    lists: Vec<Vec<usize>>,
}

impl PriorityList {
    pub fn of(&self, node: usize) -> &[usize] {
        &self.lists[node]
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }
}

/// Builds the per-node priority lists from the full-mesh gain matrix.
pub fn build_priorities<F: Float>(gains: &[Vec<F>]) -> Result<PriorityList, TopologyError> {
    let n = gains.len();
    if n < 4 {
        return Err(TopologyError::TooFewNodes(n));
    }
    let mut lists = Vec::with_capacity(n);
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| {
            gains[i][b]
                .partial_cmp(&gains[i][a])
                .expect("gains are finite")
                .then(a.cmp(&b))
        });
        lists.push(order);
    }
    Ok(PriorityList { lists })
}

/// Runs the degree-bounded pruning on priority lists, returning undirected
/// edges as 0-based index pairs.
pub fn construct_edges(priorities: &PriorityList) -> Vec<(usize, usize)> {
    let n = priorities.len();
    let top = n / 3;
    let cap = 2 * top;
    let mut connected = vec![vec![false; n]; n];
    let mut degree = vec![0usize; n];
    let mut edges = Vec::new();

    let add = |a: usize,
                   b: usize,
                   connected: &mut Vec<Vec<bool>>,
                   degree: &mut Vec<usize>,
                   edges: &mut Vec<(usize, usize)>| {
        connected[a][b] = true;
        connected[b][a] = true;
        degree[a] += 1;
        degree[b] += 1;
        edges.push((a.min(b), a.max(b)));
    };

    // Mutual top-ranked pairs.
    for i in 0..n {
        for &j in &priorities.of(i)[..top] {
            if j > i && priorities.of(j)[..top].contains(&i) {
                add(i, j, &mut connected, &mut degree, &mut edges);
            }
        }
    }

    // Fill sweep: attach unconnected (node, priority) pairs while the target's
    // degree sits exactly at the fill level k. The cap guard on the joining
    // node keeps every degree at or below 2*floor(N/3).
    for k in top..cap {
        for j in 0..top {
            for i in 0..n {
                let v = priorities.of(i)[j];
                if !connected[i][v] && degree[v] == k && degree[i] < cap {
                    add(i, v, &mut connected, &mut degree, &mut edges);
                }
            }
        }
    }

    edges.sort_unstable();
    edges
}

/// Full construction pipeline: gains, priorities, pruning, gateway selection
/// and a connectivity check (no repair is attempted on a disconnected result).
pub fn build_mesh<F: Float>(
    positions: Vec<[F; 2]>,
    phy: &PhyConfig<F>,
    gateway_mode: &GatewayMode,
) -> Result<Topology<F>, TopologyError> {
    let gains = pairwise_gains(&positions, phy)?;
    let priorities = build_priorities(&gains)?;
    let edges = construct_edges(&priorities);
    let links: Vec<(NodeId, NodeId)> = edges
        .iter()
        .map(|&(a, b)| (NodeId(a as u32 + 1), NodeId(b as u32 + 1)))
        .collect();
    let gateways = select_gateways(&positions, gateway_mode)?;
    let topo = Topology::from_parts(positions, &links, gains, gateways)?;
    ensure_connected(&topo)?;
    Ok(topo)
}

/// Connectivity gate used at construction and again at simulation startup.
pub fn ensure_connected<F: Float>(topo: &Topology<F>) -> Result<(), TopologyError> {
    if topo.is_connected() {
        return Ok(());
    }
    let sizes = component_sizes(topo);
    Err(TopologyError::Disconnected {
        components: sizes.len(),
        sizes,
    })
}

fn component_sizes<F: Float>(topo: &Topology<F>) -> Vec<usize> {
    let n = topo.num_nodes();
    let mut seen = vec![false; n];
    let mut sizes = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 0usize;
        while let Some(u) = stack.pop() {
            count += 1;
            for v in topo.neighbors(NodeId(u as u32 + 1)) {
                let vi = (v.0 - 1) as usize;
                if !seen[vi] {
                    seen[vi] = true;
                    stack.push(vi);
                }
            }
        }
        sizes.push(count);
    }
    sizes
}

/// Picks the gateway set: either explicit ids or the pair of mutually
/// farthest nodes (ties broken by the lexicographically smallest pair).
pub fn select_gateways<F: Float>(
    positions: &[[F; 2]],
    mode: &GatewayMode,
) -> Result<Vec<NodeId>, TopologyError> {
    let n = positions.len();
    match mode {
        GatewayMode::Explicit(ids) => {
            let mut ids = ids.clone();
            ids.sort_unstable();
            ids.dedup();
            if ids.is_empty() {
                return Err(TopologyError::BadGateways("empty gateway list".into()));
            }
            if ids.len() >= n {
                return Err(TopologyError::BadGateways(
                    "gateways must be a strict subset of the nodes".into(),
                ));
            }
            if let Some(bad) = ids.iter().find(|id| !(1..=n as u32).contains(&id.0)) {
                return Err(TopologyError::BadGateways(format!("unknown node {bad}")));
            }
            Ok(ids)
        }
        GatewayMode::MaxDistancePair => {
            if n < 3 {
                return Err(TopologyError::BadGateways(
                    "max-distance pair needs at least 3 nodes".into(),
                ));
            }
            let mut best = (F::neg_infinity(), 0usize, 1usize);
            for i in 0..n {
                for j in (i + 1)..n {
                    let d = crate::model::distance(positions[i], positions[j]);
                    if d > best.0 {
                        best = (d, i, j);
                    }
                }
            }
            Ok(vec![NodeId(best.1 as u32 + 1), NodeId(best.2 as u32 + 1)])
        }
    }
}

/// Renders the edge-list file: `# node id x y` header lines carrying the
/// geometry (needed to recover interference gains between non-adjacent
/// nodes), then one `i j gain` line per undirected edge.
pub fn write_edge_list<F: Float>(topo: &Topology<F>) -> String {
    let mut out = String::new();
    out.push_str("# meshsim topology v1\n");
    for id in topo.node_ids() {
        let p = topo.position(id);
        let _ = writeln!(out, "# node {} {} {}", id, p[0].as_f64(), p[1].as_f64());
    }
    for (i, j) in topo.undirected_edges() {
        let _ = writeln!(out, "{} {} {}", i, j, topo.gain(i, j).as_f64());
    }
    out
}

/// Parses the edge-list format back into positions and edges, verifying the
/// stored gains against the geometry.
pub fn parse_edge_list<F: Float>(
    text: &str,
    phy: &PhyConfig<F>,
) -> Result<(Vec<[F; 2]>, Vec<(NodeId, NodeId)>), TopologyError> {
    let mut nodes: Vec<(u32, [F; 2])> = Vec::new();
    let mut edges: Vec<(NodeId, NodeId, f64)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let bad = |reason: &str| TopologyError::BadFile {
            line: lineno + 1,
            reason: reason.to_string(),
        };
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let fields: Vec<&str> = rest.split_whitespace().collect();
            if fields.first() == Some(&"node") {
                if fields.len() != 4 {
                    return Err(bad("expected '# node <id> <x> <y>'"));
                }
                let id: u32 = fields[1].parse().map_err(|_| bad("bad node id"))?;
                let x: f64 = fields[2].parse().map_err(|_| bad("bad x coordinate"))?;
                let y: f64 = fields[3].parse().map_err(|_| bad("bad y coordinate"))?;
                nodes.push((id, [F::of(x), F::of(y)]));
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(bad("expected '<i> <j> <gain>'"));
        }
        let i: u32 = fields[0].parse().map_err(|_| bad("bad source id"))?;
        let j: u32 = fields[1].parse().map_err(|_| bad("bad target id"))?;
        let g: f64 = fields[2].parse().map_err(|_| bad("bad gain"))?;
        edges.push((NodeId(i), NodeId(j), g));
    }
    if nodes.is_empty() {
        return Err(TopologyError::BadFile {
            line: 0,
            reason: "no '# node' header lines; positions are required".into(),
        });
    }
    nodes.sort_by_key(|&(id, _)| id);
    for (expect, &(id, _)) in (1u32..).zip(nodes.iter()) {
        if id != expect {
            return Err(TopologyError::BadFile {
                line: 0,
                reason: format!("node ids must be contiguous from 1; missing or duplicate {id}"),
            });
        }
    }
    let positions: Vec<[F; 2]> = nodes.into_iter().map(|(_, p)| p).collect();
    let n = positions.len() as u32;
    let mut links = Vec::with_capacity(edges.len());
    for (i, j, stored) in edges {
        if !(1..=n).contains(&i.0) || !(1..=n).contains(&j.0) || i == j {
            return Err(TopologyError::BadFile {
                line: 0,
                reason: format!("edge ({i}, {j}) references an invalid node"),
            });
        }
        let computed = crate::model::channel_gain(
            positions[(i.0 - 1) as usize],
            positions[(j.0 - 1) as usize],
            phy,
        )?
        .as_f64();
        if (stored - computed).abs() > 1e-6 * computed.abs().max(f64::MIN_POSITIVE) {
            return Err(TopologyError::GainMismatch(i, j));
        }
        links.push((i, j));
    }
    Ok((positions, links))
}
