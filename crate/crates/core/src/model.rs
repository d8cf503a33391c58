//! Core domain types and unit conventions.
//!
//! All internal powers are in milliwatts, channel gains are dimensionless,
//! rates are in bits/second and distances in meters. dB/dBm appear only at
//! the config and report boundaries. Positions live in a plane, node ids are
//! 1-based and contiguous.

use std::fmt;

use thiserror::Error;

use crate::scalar::Float;

/// A mesh node identifier. Ids are 1-based and unique within a topology.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> u32 {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("coincident node positions: zero distance is unphysical")]
    CoincidentNodes,
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("rate table must be non-empty, sorted by strictly descending rate")]
    RateTableOrder,
    #[error("rate table thresholds must strictly increase with rate")]
    RateTableThresholds,
    #[error("node ids must be 1..=n, got {0} nodes")]
    BadNodeIds(usize),
    #[error("link ({0}, {1}) is invalid: {2}")]
    BadLink(NodeId, NodeId, &'static str),
    #[error("gateways must be a non-empty strict subset of the nodes")]
    BadGateways,
    #[error("gain matrix must be {0}x{0}")]
    BadGainMatrix(usize),
}

/// Physical-layer constants shared by the whole simulation.
#[derive(Clone, Copy, Debug)]
pub struct PhyConfig<F: Float = f64> {
    /// Background noise power, milliwatts.
    pub noise_mw: F,
    /// Per-node transmit power ceiling, milliwatts.
    pub max_power_mw: F,
    /// Path-loss exponent (dimensionless).
    pub path_loss_exponent: F,
    /// Reference distance for the path-loss model, meters.
    pub reference_distance_m: F,
    /// Slot duration, seconds.
    pub slot_seconds: F,
    /// Packet length, bits.
    pub packet_bits: F,
}

impl<F: Float> PhyConfig<F> {
    pub fn new(
        noise_mw: F,
        max_power_mw: F,
        path_loss_exponent: F,
        reference_distance_m: F,
        slot_seconds: F,
        packet_bits: F,
    ) -> Result<Self, ModelError> {
        let cfg = Self {
            noise_mw,
            max_power_mw,
            path_loss_exponent,
            reference_distance_m,
            slot_seconds,
            packet_bits,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let checks: [(&'static str, F); 6] = [
            ("noise power", self.noise_mw),
            ("max power", self.max_power_mw),
            ("path-loss exponent", self.path_loss_exponent),
            ("reference distance", self.reference_distance_m),
            ("slot duration", self.slot_seconds),
            ("packet length", self.packet_bits),
        ];
        for (name, v) in checks {
            if !(v > F::zero()) || !v.is_finite() {
                return Err(ModelError::NonPositive(name));
            }
        }
        Ok(())
    }

    /// Bits a link at `rate_bps` carries over one full slot.
    pub fn bits_per_slot(&self, rate_bps: F) -> F {
        rate_bps * self.slot_seconds
    }
}

/// -90 dBm noise, 20 dBm power cap, exponent 3, d0 = 10 m, 625 us slots,
/// 1470-byte packets.
impl<F: Float> Default for PhyConfig<F> {
    fn default() -> Self {
        Self {
            noise_mw: dbm_to_mw(F::of(-90.0)),
            max_power_mw: dbm_to_mw(F::of(20.0)),
            path_loss_exponent: F::of(3.0),
            reference_distance_m: F::of(10.0),
            slot_seconds: F::of(625e-6),
            packet_bits: F::of(1470.0 * 8.0),
        }
    }
}

/// dBm -> milliwatts.
pub fn dbm_to_mw<F: Float>(dbm: F) -> F {
    F::of(10.0).powf(dbm / F::of(10.0))
}

/// Milliwatts -> dBm.
pub fn mw_to_dbm<F: Float>(mw: F) -> F {
    F::of(10.0) * mw.log10()
}

/// dB -> linear ratio.
pub fn db_to_linear<F: Float>(db: F) -> F {
    F::of(10.0).powf(db / F::of(10.0))
}

pub fn distance<F: Float>(a: [F; 2], b: [F; 2]) -> F {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Log-distance path gain: `(d/d0)^(-alpha)`.
///
/// Errors on coincident positions; zero distance is unphysical.
pub fn channel_gain<F: Float>(
    pos_i: [F; 2],
    pos_j: [F; 2],
    phy: &PhyConfig<F>,
) -> Result<F, ModelError> {
    let d = distance(pos_i, pos_j);
    if d == F::zero() {
        return Err(ModelError::CoincidentNodes);
    }
    Ok((d / phy.reference_distance_m).powf(-phy.path_loss_exponent))
}

/// One discrete rate with its SINR admission threshold.
#[derive(Clone, Copy, Debug)]
pub struct RateEntry<F: Float = f64> {
    pub rate_bps: F,
    pub threshold_db: F,
    pub threshold_linear: F,
}

/// The ordered set of usable link rates, highest first, each paired with the
/// minimum SINR (linear) that supports it.
#[derive(Clone, Debug)]
pub struct RateTable<F: Float = f64> {
    entries: Vec<RateEntry<F>>,
}

/// (Mbps, dB) pairs of the default 802.11a-style rate set.
const DEFAULT_RATES: [(f64, f64); 8] = [
    (54.0, 24.56),
    (48.0, 24.05),
    (36.0, 18.8),
    (24.0, 17.04),
    (18.0, 10.79),
    (12.0, 9.03),
    (9.0, 7.78),
    (6.0, 6.02),
];

impl<F: Float> RateTable<F> {
    /// Builds a table from (rate_bps, threshold_db) pairs; the linear
    /// thresholds are derived here so comparisons stay in the linear domain.
    pub fn new(pairs: &[(F, F)]) -> Result<Self, ModelError> {
        if pairs.is_empty() {
            return Err(ModelError::RateTableOrder);
        }
        let mut entries = Vec::with_capacity(pairs.len());
        for w in pairs.windows(2) {
            if !(w[0].0 > w[1].0) {
                return Err(ModelError::RateTableOrder);
            }
            if !(w[0].1 > w[1].1) {
                return Err(ModelError::RateTableThresholds);
            }
        }
        for &(rate_bps, threshold_db) in pairs {
            if !(rate_bps > F::zero()) {
                return Err(ModelError::NonPositive("rate"));
            }
            entries.push(RateEntry {
                rate_bps,
                threshold_db,
                threshold_linear: db_to_linear(threshold_db),
            });
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, idx: usize) -> &RateEntry<F> {
        &self.entries[idx]
    }

    pub fn entries(&self) -> &[RateEntry<F>] {
        &self.entries
    }

    /// Linear SINR threshold for the rate at `idx`.
    pub fn threshold(&self, idx: usize) -> F {
        self.entries[idx].threshold_linear
    }

    pub fn rate(&self, idx: usize) -> F {
        self.entries[idx].rate_bps
    }

    /// The smallest rate in the table; used as the unit for cumulative
    /// allocated-rate counters.
    pub fn lowest_rate(&self) -> F {
        self.entries[self.entries.len() - 1].rate_bps
    }

    pub fn index_of_rate(&self, rate_bps: F) -> Option<usize> {
        self.entries.iter().position(|e| e.rate_bps == rate_bps)
    }
}

impl<F: Float> Default for RateTable<F> {
    fn default() -> Self {
        let pairs: Vec<(F, F)> = DEFAULT_RATES
            .iter()
            .map(|&(mbps, db)| (F::of(mbps * 1e6), F::of(db)))
            .collect();
        Self::new(&pairs).expect("default rate table is well-formed")
    }
}

/// The constructed mesh: node positions, the pruned symmetric link set, the
/// full pairwise gain matrix and the gateway set.
///
/// Immutable after construction; shared read-only across runs.
#[derive(Clone, Debug)]
pub struct Topology<F: Float = f64> {
    positions: Vec<[F; 2]>,
    /// Directed links, lexicographically sorted; `(i, j)` present iff `(j, i)` is.
    links: Vec<(NodeId, NodeId)>,
    /// Dense pairwise gains; `gains[i][j]` for i != j, diagonal unused (zero).
    gains: Vec<Vec<F>>,
    /// Sorted ascending.
    gateways: Vec<NodeId>,
    adjacency: Vec<Vec<usize>>,
}

impl<F: Float> Topology<F> {
    /// Assembles and validates a topology from parts. `links` may list each
    /// edge in one or both directions; the symmetric closure is taken.
    pub fn from_parts(
        positions: Vec<[F; 2]>,
        links: &[(NodeId, NodeId)],
        gains: Vec<Vec<F>>,
        gateways: Vec<NodeId>,
    ) -> Result<Self, ModelError> {
        let n = positions.len();
        if n < 2 {
            return Err(ModelError::BadNodeIds(n));
        }
        if gains.len() != n || gains.iter().any(|row| row.len() != n) {
            return Err(ModelError::BadGainMatrix(n));
        }
        let valid = |id: NodeId| (1..=n as u32).contains(&id.0);
        let mut directed: Vec<(NodeId, NodeId)> = Vec::with_capacity(links.len() * 2);
        for &(i, j) in links {
            if !valid(i) || !valid(j) {
                return Err(ModelError::BadLink(i, j, "unknown node id"));
            }
            if i == j {
                return Err(ModelError::BadLink(i, j, "self loop"));
            }
            directed.push((i, j));
            directed.push((j, i));
        }
        directed.sort_unstable();
        directed.dedup();

        let mut gateways = gateways;
        gateways.sort_unstable();
        gateways.dedup();
        if gateways.is_empty() || gateways.len() >= n || gateways.iter().any(|&g| !valid(g)) {
            return Err(ModelError::BadGateways);
        }

        let mut adjacency = vec![Vec::new(); n];
        for &(i, j) in &directed {
            adjacency[(i.0 - 1) as usize].push((j.0 - 1) as usize);
        }

        Ok(Self {
            positions,
            links: directed,
            gains,
            gateways,
            adjacency,
        })
    }

    /// Convenience constructor that derives the gain matrix from positions.
    pub fn from_positions(
        positions: Vec<[F; 2]>,
        links: &[(NodeId, NodeId)],
        phy: &PhyConfig<F>,
        gateways: Vec<NodeId>,
    ) -> Result<Self, ModelError> {
        let gains = pairwise_gains(&positions, phy)?;
        Self::from_parts(positions, links, gains, gateways)
    }

    pub fn num_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (1..=self.positions.len() as u32).map(NodeId)
    }

    pub fn idx(&self, id: NodeId) -> usize {
        debug_assert!((1..=self.positions.len() as u32).contains(&id.0));
        (id.0 - 1) as usize
    }

    pub fn id_of(&self, idx: usize) -> NodeId {
        NodeId(idx as u32 + 1)
    }

    pub fn position(&self, id: NodeId) -> [F; 2] {
        self.positions[self.idx(id)]
    }

    pub fn positions(&self) -> &[[F; 2]] {
        &self.positions
    }

    /// Channel gain between two distinct nodes.
    pub fn gain(&self, from: NodeId, to: NodeId) -> F {
        debug_assert_ne!(from, to, "diagonal gain is undefined");
        self.gains[self.idx(from)][self.idx(to)]
    }

    /// All directed links, lexicographically sorted.
    pub fn links(&self) -> &[(NodeId, NodeId)] {
        &self.links
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn link_index(&self, link: (NodeId, NodeId)) -> Option<usize> {
        self.links.binary_search(&link).ok()
    }

    pub fn has_link(&self, i: NodeId, j: NodeId) -> bool {
        self.link_index((i, j)).is_some()
    }

    /// Each undirected edge once, with i < j.
    pub fn undirected_edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.links.iter().copied().filter(|&(i, j)| i < j)
    }

    pub fn gateways(&self) -> &[NodeId] {
        &self.gateways
    }

    pub fn is_gateway(&self, id: NodeId) -> bool {
        self.gateways.binary_search(&id).is_ok()
    }

    /// Position of `id` within the sorted gateway list.
    pub fn gateway_slot(&self, id: NodeId) -> Option<usize> {
        self.gateways.binary_search(&id).ok()
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.adjacency[self.idx(id)].len()
    }

    pub fn neighbors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency[self.idx(id)]
            .iter()
            .map(|&i| NodeId(i as u32 + 1))
    }

    /// Whether the undirected link graph is connected.
    pub fn is_connected(&self) -> bool {
        let n = self.positions.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }

    /// BFS hop distances from `from` to every node (usize::MAX if unreachable).
    pub fn hop_distances(&self, from: NodeId) -> Vec<usize> {
        let n = self.positions.len();
        let mut dist = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        dist[self.idx(from)] = 0;
        queue.push_back(self.idx(from));
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

/// Full pairwise gain matrix; the diagonal is left at zero and is never read.
pub fn pairwise_gains<F: Float>(
    positions: &[[F; 2]],
    phy: &PhyConfig<F>,
) -> Result<Vec<Vec<F>>, ModelError> {
    let n = positions.len();
    let mut gains = vec![vec![F::zero(); n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let g = channel_gain(positions[i], positions[j], phy)?;
            gains[i][j] = g;
            gains[j][i] = g;
        }
    }
    Ok(gains)
}
