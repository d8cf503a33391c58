//! The per-slot simulation loop: admissions, weights, scheduling, packet
//! transport, queue evolution and ledger updates.
//!
//! Within a slot: (1) each flow's rate controller admits packets at its
//! source, (2) link weights are computed from the updated queues, (3) the
//! scheduler builds the slot plan, (4) active links convert `rate * pi *
//! slot` into a per-link bit credit and forward whole packets of their
//! commodity while the credit lasts, (5) forwarded packets surface at the
//! receivers at the end of the slot (store-and-forward: one slot minimum per
//! hop). Packets reaching their destination gateway leave the network
//! immediately; a delivered packet's delay is delivery slot + 1 minus
//! creation slot.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::config::{FlowMode, RunSpec};
use crate::metrics::MetricsLedger;
use crate::model::{ModelError, NodeId, PhyConfig, RateTable, Topology};
use crate::queue::QueueState;
use crate::scalar::Float;
use crate::scheduler::{build_slot_plan, Schedule, SchedulerConfig, SchedulerError};
use crate::topology::{
    self, ensure_connected, parse_edge_list, sample_positions, TopologyError,
};
use crate::traffic::{FlowId, FlowSpec, Packet, RateController};
use crate::weights::{differential_backlog, policy_weight, LinkWeight, WeightState};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error("flow setup: {0}")]
    Flows(String),
    #[error("cannot read topology file {path}: {source}")]
    TopologyFile {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// RNG streams drawn from the run seed: one for node placement, one for
/// random flow-source selection, so fixed-topology runs keep flow draws
/// stable.
const STREAM_POSITIONS: u64 = 0;
const STREAM_FLOWS: u64 = 1;

/// Builds (or loads) the run topology and checks connectivity.
pub fn build_topology<F: Float>(spec: &RunSpec<F>) -> Result<Topology<F>, EngineError> {
    match &spec.topology_file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| {
                EngineError::TopologyFile {
                    path: path.clone(),
                    source,
                }
            })?;
            let (positions, links) = parse_edge_list::<F>(&text, &spec.phy)?;
            let gateways = topology::select_gateways(&positions, &spec.gateway_mode)?;
            let topo = Topology::from_positions(positions, &links, &spec.phy, gateways)?;
            ensure_connected(&topo)?;
            Ok(topo)
        }
        None => {
            let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
            rng.set_stream(STREAM_POSITIONS);
            let positions = sample_positions::<F>(spec.nodes, spec.area_side_m, &mut rng);
            Ok(topology::build_mesh(positions, &spec.phy, &spec.gateway_mode)?)
        }
    }
}

/// Resolves the flow set against the topology. Flows are numbered 1..K in
/// ascending source-id order and never originate at gateways.
pub fn resolve_flows<F: Float>(
    spec: &RunSpec<F>,
    topo: &Topology<F>,
) -> Result<Vec<FlowSpec<F>>, EngineError> {
    let non_gateways: Vec<NodeId> = topo
        .node_ids()
        .filter(|&id| !topo.is_gateway(id))
        .collect();
    let mut sources: Vec<NodeId> = match &spec.flow_mode {
        FlowMode::FirstNonGateway { count } => {
            if *count > non_gateways.len() {
                return Err(EngineError::Flows(format!(
                    "{count} flows requested but only {} non-gateway nodes",
                    non_gateways.len()
                )));
            }
            non_gateways[..*count].to_vec()
        }
        FlowMode::Random { count } => {
            if *count > non_gateways.len() {
                return Err(EngineError::Flows(format!(
                    "{count} flows requested but only {} non-gateway nodes",
                    non_gateways.len()
                )));
            }
            let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
            rng.set_stream(STREAM_FLOWS);
            let mut pool = non_gateways.clone();
            for k in 0..*count {
                let pick = rand::Rng::gen_range(&mut rng, k..pool.len());
                pool.swap(k, pick);
            }
            pool[..*count].to_vec()
        }
        FlowMode::Explicit(ids) => {
            for id in ids {
                if !(1..=topo.num_nodes() as u32).contains(&id.0) {
                    return Err(EngineError::Flows(format!("unknown source node {id}")));
                }
                if topo.is_gateway(*id) {
                    return Err(EngineError::Flows(format!(
                        "flow source {id} is a gateway"
                    )));
                }
            }
            let mut ids = ids.clone();
            ids.sort_unstable();
            ids.dedup();
            ids
        }
    };
    if sources.is_empty() {
        return Err(EngineError::Flows("no flows configured".to_string()));
    }
    sources.sort_unstable();
    Ok(sources
        .into_iter()
        .enumerate()
        .map(|(k, source)| FlowSpec {
            id: FlowId(k as u32 + 1),
            source,
            max_rate_pkts: spec.max_rate_pkts,
        })
        .collect())
}

/// Per-schedule trace row (reporting units).
#[derive(Clone, Debug)]
pub struct ScheduleTrace {
    pub m: usize,
    pub channel: usize,
    pub pi: f64,
    pub links: Vec<LinkTrace>,
}

#[derive(Clone, Debug)]
pub struct LinkTrace {
    pub i: u32,
    pub j: u32,
    pub rate_mbps: f64,
    pub power_mw: f64,
    pub commodity: u32,
    pub weight: f64,
    /// SINR/threshold - 1 at the committed powers (diagnostic).
    pub residual: f64,
}

/// Everything observable about one slot, enough to replay the queue
/// evolution law offline.
#[derive(Clone, Debug)]
pub struct SlotRecord {
    pub slot: u64,
    /// Queue lengths at the start of the slot, before admissions.
    pub q_start: Vec<Vec<u32>>,
    /// (node index, gateway slot, packets admitted).
    pub admitted: Vec<(usize, usize, u32)>,
    /// (link index, gateway slot, packets moved).
    pub moved: Vec<(usize, usize, u32)>,
    pub schedules: Vec<ScheduleTrace>,
}

#[derive(Clone, Debug)]
pub struct RunTrace {
    pub slots: Vec<SlotRecord>,
    /// Queue lengths after the final slot.
    pub final_queues: Vec<Vec<u32>>,
}

/// A finished run: the topology it ran on, the flow set, the filled ledger
/// and (when requested) the per-slot trace.
#[derive(Debug)]
pub struct RunOutcome<F: Float = f64> {
    pub topology: Topology<F>,
    pub flows: Vec<FlowSpec<F>>,
    pub ledger: MetricsLedger<F>,
    pub trace: Option<RunTrace>,
}

pub struct Simulation<F: Float = f64> {
    topo: Topology<F>,
    phy: PhyConfig<F>,
    rates: RateTable<F>,
    flows: Vec<FlowSpec<F>>,
    sched_cfg: SchedulerConfig,
    queues: QueueState,
    controller: RateController<F>,
    weight_state: WeightState<F>,
    /// Persistent per-link transmission credit, bits.
    credits: Vec<F>,
    ledger: MetricsLedger<F>,
    trace_enabled: bool,
    records: Vec<SlotRecord>,
}

impl<F: Float> Simulation<F> {
    pub fn new(spec: &RunSpec<F>) -> Result<Self, EngineError> {
        let topo = build_topology(spec)?;
        Self::with_topology(spec, topo)
    }

    /// Runs on an already-built topology (shared across policy sweeps).
    pub fn with_topology(spec: &RunSpec<F>, topo: Topology<F>) -> Result<Self, EngineError> {
        ensure_connected(&topo)?;
        let flows = resolve_flows(spec, &topo)?;
        let num_gw = topo.gateways().len();
        let m = spec.num_schedules.unwrap_or(num_gw + 1);
        let sched_cfg = SchedulerConfig::new(m, spec.channels, spec.radios)?;
        let num_links = topo.num_links();
        Ok(Self {
            queues: QueueState::new(topo.num_nodes(), num_gw),
            controller: RateController::new(spec.v_param, flows.len()),
            weight_state: WeightState::new(
                spec.policy,
                num_links,
                num_gw,
                spec.rates.lowest_rate(),
            ),
            credits: vec![F::zero(); num_links],
            ledger: MetricsLedger::new(flows.len(), num_links, num_gw),
            trace_enabled: spec.trace,
            records: Vec::new(),
            phy: spec.phy,
            rates: spec.rates.clone(),
            flows,
            sched_cfg,
            topo,
        })
    }

    pub fn topology(&self) -> &Topology<F> {
        &self.topo
    }

    pub fn flows(&self) -> &[FlowSpec<F>] {
        &self.flows
    }

    pub fn queues(&self) -> &QueueState {
        &self.queues
    }

    fn flow_pos(&self, id: FlowId) -> usize {
        (id.0 - 1) as usize
    }

    /// Current per-link weights under the active policy.
    fn compute_weights(&self, slot: u64) -> Vec<LinkWeight<F>> {
        self.topo
            .links()
            .iter()
            .enumerate()
            .map(|(idx, &(i, j))| {
                let (value, commodity) = differential_backlog(&self.queues, &self.topo, i, j);
                let gw_slot = self
                    .topo
                    .gateway_slot(commodity)
                    .expect("commodity is a gateway");
                let hol = self
                    .queues
                    .front(self.topo.idx(i), gw_slot)
                    .map(|p| slot - p.created_slot)
                    .unwrap_or(0);
                let base = LinkWeight {
                    link_idx: idx,
                    link: (i, j),
                    value,
                    commodity,
                    hol_delay_slots: hol,
                };
                LinkWeight {
                    value: policy_weight(&self.weight_state, &base, gw_slot),
                    ..base
                }
            })
            .collect()
    }

    pub fn step(&mut self, slot: u64) -> Result<(), EngineError> {
        let q_start = self.trace_enabled.then(|| self.queues.snapshot());

        // (1) Admissions: flows in id order share their node's budget.
        let mut budgets = vec![self.flows[0].max_rate_pkts; self.topo.num_nodes()];
        let mut admitted_rec: Vec<(usize, usize, u32)> = Vec::new();
        for pos in 0..self.flows.len() {
            let flow = self.flows[pos];
            let src = self.topo.idx(flow.source);
            let qlens: Vec<(NodeId, usize)> = self
                .topo
                .gateways()
                .iter()
                .enumerate()
                .map(|(g, &gw)| (gw, self.queues.len(src, g)))
                .collect();
            let adm = self
                .controller
                .control_rate(pos, &flow, &qlens, &mut budgets[src]);
            let gw_slot = self.topo.gateway_slot(adm.gateway).expect("gateway");
            for _ in 0..adm.packets {
                self.queues.push(
                    src,
                    gw_slot,
                    Packet {
                        flow: flow.id,
                        source: flow.source,
                        gateway: adm.gateway,
                        created_slot: slot,
                        hops: 0,
                    },
                );
            }
            self.ledger.record_generated(pos, gw_slot, adm.packets);
            if adm.packets > 0 {
                admitted_rec.push((src, gw_slot, adm.packets));
            }
        }

        // (2)+(3) Weights and the slot plan.
        let weights = self.compute_weights(slot);
        let plan = build_slot_plan(&self.topo, &self.rates, &self.phy, &weights, &self.sched_cfg)?;

        // (4) Transport on active links, heaviest first. Receivers see
        // arrivals only at the end of the slot.
        let mut active: Vec<(usize, usize)> = Vec::new();
        for (m, schedule) in plan.iter().enumerate() {
            if schedule.time_fraction > F::zero() {
                for pos in 0..schedule.links.len() {
                    active.push((m, pos));
                }
            }
        }
        active.sort_by(|&(ma, pa), &(mb, pb)| {
            let la = &plan[ma].links[pa];
            let lb = &plan[mb].links[pb];
            lb.weight
                .partial_cmp(&la.weight)
                .expect("weights are finite")
                .then(la.link.cmp(&lb.link))
                .then(plan[ma].channel.cmp(&plan[mb].channel))
        });

        let mut staged: Vec<(usize, usize, Packet)> = Vec::new();
        let mut moved: BTreeMap<(usize, usize), u32> = BTreeMap::new();
        for (m, pos) in active {
            let schedule = &plan[m];
            let sl = &schedule.links[pos];
            self.credits[sl.link_idx] +=
                sl.rate_bps * schedule.time_fraction * self.phy.slot_seconds;
            let (i, j) = sl.link;
            let src = self.topo.idx(i);
            let gw_slot = self.topo.gateway_slot(sl.commodity).expect("gateway");
            while self.credits[sl.link_idx] >= self.phy.packet_bits {
                let Some(mut pkt) = self.queues.pop(src, gw_slot) else {
                    break;
                };
                self.credits[sl.link_idx] -= self.phy.packet_bits;
                pkt.hops += 1;
                *moved.entry((sl.link_idx, gw_slot)).or_insert(0) += 1;
                debug_assert_eq!(pkt.gateway, sl.commodity, "commodity discipline");
                if j == sl.commodity {
                    let delay = slot + 1 - pkt.created_slot;
                    let fp = self.flow_pos(pkt.flow);
                    self.ledger.record_delivery(fp, gw_slot, delay, pkt.hops);
                } else {
                    staged.push((self.topo.idx(j), gw_slot, pkt));
                }
            }
        }

        // (5) Merge staged arrivals; relays through a foreign gateway are
        // legal but counted for diagnostics.
        for (node_idx, gw_slot, pkt) in staged {
            if self.topo.is_gateway(self.topo.id_of(node_idx)) {
                self.ledger.relayed_through_gateway += 1;
            }
            self.queues.push(node_idx, gw_slot, pkt);
        }

        // (6) Cumulative allocated-rate counters for activated links.
        for schedule in &plan {
            if schedule.time_fraction <= F::zero() {
                continue;
            }
            for sl in &schedule.links {
                let gw_slot = self.topo.gateway_slot(sl.commodity).expect("gateway");
                self.weight_state.record_allocation(
                    sl.link_idx,
                    gw_slot,
                    sl.rate_bps,
                    schedule.time_fraction,
                );
                self.ledger.record_link_allocation(
                    sl.link_idx,
                    gw_slot,
                    sl.rate_bps,
                    schedule.time_fraction,
                );
            }
        }

        self.ledger.slots = slot + 1;

        if let Some(q_start) = q_start {
            self.records.push(SlotRecord {
                slot,
                q_start,
                admitted: admitted_rec,
                moved: moved.into_iter().map(|((l, g), c)| (l, g, c)).collect(),
                schedules: trace_rows(&plan, &self.topo, &self.rates, self.phy.noise_mw),
            });
        }
        Ok(())
    }

    pub fn execute(mut self, slots: u64) -> Result<RunOutcome<F>, EngineError> {
        for t in 0..slots {
            self.step(t)?;
        }
        let trace = self.trace_enabled.then(|| RunTrace {
            slots: std::mem::take(&mut self.records),
            final_queues: self.queues.snapshot(),
        });
        let mut ledger = self.ledger;
        ledger.finalize(&self.queues, |id| (id.0 - 1) as usize);
        Ok(RunOutcome {
            topology: self.topo,
            flows: self.flows,
            ledger,
            trace,
        })
    }
}

fn trace_rows<F: Float>(
    plan: &[Schedule<F>],
    topo: &Topology<F>,
    rates: &RateTable<F>,
    noise_mw: F,
) -> Vec<ScheduleTrace> {
    plan.iter()
        .enumerate()
        .map(|(m, s)| {
            let residuals: Vec<F> = if s.links.is_empty() {
                Vec::new()
            } else {
                let cand = crate::power::CandidateSet::new(
                    s.links.iter().map(|l| l.link).collect(),
                    s.links.iter().map(|l| l.rate_idx).collect(),
                )
                .expect("schedules are conflict-free");
                let powers: Vec<F> = s.links.iter().map(|l| l.power_mw).collect();
                crate::power::verify_sinr(&cand, &powers, topo, rates, noise_mw)
            };
            ScheduleTrace {
                m: m + 1,
                channel: s.channel,
                pi: s.time_fraction.as_f64(),
                links: s
                    .links
                    .iter()
                    .zip(residuals)
                    .map(|(l, r)| LinkTrace {
                        i: l.link.0 .0,
                        j: l.link.1 .0,
                        rate_mbps: l.rate_bps.as_f64() / 1e6,
                        power_mw: l.power_mw.as_f64(),
                        commodity: l.commodity.0,
                        weight: l.weight.as_f64(),
                        residual: r.as_f64(),
                    })
                    .collect(),
            }
        })
        .collect()
}

/// Runs a spec end to end.
pub fn run<F: Float>(spec: &RunSpec<F>) -> Result<RunOutcome<F>, EngineError> {
    Simulation::new(spec)?.execute(spec.slots)
}

/// Queue-evolution bound for one (node, gateway, slot) cell:
/// `max(q - out, 0) + generated + inflow`.
pub fn queue_evolution_bound(q: u32, out: u32, generated: u32, inflow: u32) -> u32 {
    q.saturating_sub(out) + generated + inflow
}

/// Replays a trace against the queue-evolution law. Every cell must satisfy
/// the inequality; non-sink cells must additionally balance exactly, and a
/// gateway's own-commodity queue must stay empty.
pub fn verify_queue_evolution<F: Float>(
    topo: &Topology<F>,
    trace: &RunTrace,
) -> Result<(), String> {
    let n = topo.num_nodes();
    let num_gw = topo.gateways().len();
    for (s, rec) in trace.slots.iter().enumerate() {
        let q_next = trace
            .slots
            .get(s + 1)
            .map(|r| &r.q_start)
            .unwrap_or(&trace.final_queues);
        let mut out = vec![vec![0u32; num_gw]; n];
        let mut inflow = vec![vec![0u32; num_gw]; n];
        for &(link_idx, gw_slot, count) in &rec.moved {
            let (i, j) = topo.links()[link_idx];
            out[topo.idx(i)][gw_slot] += count;
            inflow[topo.idx(j)][gw_slot] += count;
        }
        let mut generated = vec![vec![0u32; num_gw]; n];
        for &(node_idx, gw_slot, count) in &rec.admitted {
            generated[node_idx][gw_slot] += count;
        }
        for node in 0..n {
            for g in 0..num_gw {
                let q = rec.q_start[node][g];
                let bound =
                    queue_evolution_bound(q, out[node][g], generated[node][g], inflow[node][g]);
                let next = q_next[node][g];
                if next > bound {
                    return Err(format!(
                        "slot {}: node {} gateway slot {}: {} > bound {}",
                        rec.slot,
                        node + 1,
                        g,
                        next,
                        bound
                    ));
                }
                let is_sink = topo.gateways()[g] == topo.id_of(node);
                if is_sink {
                    if next != 0 || q != 0 {
                        return Err(format!(
                            "slot {}: gateway {} own queue is non-empty",
                            rec.slot,
                            node + 1
                        ));
                    }
                } else {
                    let exact =
                        q as i64 + generated[node][g] as i64 + inflow[node][g] as i64
                            - out[node][g] as i64;
                    if next as i64 != exact {
                        return Err(format!(
                            "slot {}: node {} gateway slot {}: {} != exact {}",
                            rec.slot,
                            node + 1,
                            g,
                            next,
                            exact
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}
