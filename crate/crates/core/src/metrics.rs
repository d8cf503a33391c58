//! Run accounting and reporting: per-flow throughput, delays, delivery
//! ratios, and Jain's fairness indices.

use thiserror::Error;

use crate::model::{PhyConfig, Topology};
use crate::queue::QueueState;
use crate::scalar::Float;
use crate::traffic::{self, FlowSpec};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("fairness index needs a non-empty list of positive values")]
    Domain,
}

/// Jain's fairness index `(sum x)^2 / (n * sum x^2)`, defined for positive
/// samples only; 1 means perfect equality.
pub fn jain_index<F: Float>(values: &[F]) -> Result<F, MetricsError> {
    if values.is_empty() || values.iter().any(|&v| !(v > F::zero())) {
        return Err(MetricsError::Domain);
    }
    let sum: F = values.iter().copied().sum();
    let sum_sq: F = values.iter().map(|&v| v * v).sum();
    Ok(sum * sum / (F::of_usize(values.len()) * sum_sq))
}

/// Per-flow counters, indexed by gateway slot where split.
#[derive(Clone, Debug, Default)]
pub struct FlowCounters {
    pub generated_per_gw: Vec<u64>,
    pub delivered_per_gw: Vec<u64>,
    pub delay_sum_slots: u64,
    pub hop_sum: u64,
    /// Packets still queued at the end of the run, per destination gateway.
    pub backlog_per_gw: Vec<u64>,
}

impl FlowCounters {
    fn new(num_gateways: usize) -> Self {
        Self {
            generated_per_gw: vec![0; num_gateways],
            delivered_per_gw: vec![0; num_gateways],
            delay_sum_slots: 0,
            hop_sum: 0,
            backlog_per_gw: vec![0; num_gateways],
        }
    }

    pub fn generated(&self) -> u64 {
        self.generated_per_gw.iter().sum()
    }

    pub fn delivered(&self) -> u64 {
        self.delivered_per_gw.iter().sum()
    }

    pub fn backlog(&self) -> u64 {
        self.backlog_per_gw.iter().sum()
    }

    pub fn mean_delay_slots(&self) -> Option<f64> {
        let d = self.delivered();
        (d > 0).then(|| self.delay_sum_slots as f64 / d as f64)
    }
}

/// Cumulative counters for a finished (or running) simulation.
#[derive(Clone, Debug)]
pub struct MetricsLedger<F: Float = f64> {
    pub slots: u64,
    pub flows: Vec<FlowCounters>,
    /// Sum of `rate * pi` over slots, per directed link (bits/second units).
    pub link_rate_sum_bps: Vec<F>,
    pub link_rate_sum_bps_per_gw: Vec<Vec<F>>,
    /// Packets relayed into a gateway's queue for a different gateway.
    pub relayed_through_gateway: u64,
}

impl<F: Float> MetricsLedger<F> {
    pub fn new(num_flows: usize, num_links: usize, num_gateways: usize) -> Self {
        Self {
            slots: 0,
            flows: (0..num_flows).map(|_| FlowCounters::new(num_gateways)).collect(),
            link_rate_sum_bps: vec![F::zero(); num_links],
            link_rate_sum_bps_per_gw: vec![vec![F::zero(); num_gateways]; num_links],
            relayed_through_gateway: 0,
        }
    }

    pub fn record_generated(&mut self, flow_pos: usize, gw_slot: usize, packets: u32) {
        self.flows[flow_pos].generated_per_gw[gw_slot] += packets as u64;
    }

    pub fn record_delivery(&mut self, flow_pos: usize, gw_slot: usize, delay_slots: u64, hops: u32) {
        let f = &mut self.flows[flow_pos];
        f.delivered_per_gw[gw_slot] += 1;
        f.delay_sum_slots += delay_slots;
        f.hop_sum += hops as u64;
    }

    pub fn record_link_allocation(&mut self, link_idx: usize, gw_slot: usize, rate_bps: F, pi: F) {
        self.link_rate_sum_bps[link_idx] += rate_bps * pi;
        self.link_rate_sum_bps_per_gw[link_idx][gw_slot] += rate_bps * pi;
    }

    /// Records end-of-run backlogs by scanning the final queues.
    pub fn finalize(&mut self, queues: &QueueState, flow_pos_of: impl Fn(crate::traffic::FlowId) -> usize) {
        for (_, gw_slot, packet) in queues.iter_packets() {
            self.flows[flow_pos_of(packet.flow)].backlog_per_gw[gw_slot] += 1;
        }
    }

    pub fn total_generated(&self) -> u64 {
        self.flows.iter().map(FlowCounters::generated).sum()
    }

    pub fn total_delivered(&self) -> u64 {
        self.flows.iter().map(FlowCounters::delivered).sum()
    }

    pub fn total_backlog(&self) -> u64 {
        self.flows.iter().map(FlowCounters::backlog).sum()
    }
}

/// Delivered-bits throughput of one flow over the whole run, bits/second.
/// Zero when nothing ran or nothing was delivered.
pub fn flow_throughput_bps<F: Float>(
    ledger: &MetricsLedger<F>,
    flow_pos: usize,
    phy: &PhyConfig<F>,
) -> F {
    if ledger.slots == 0 {
        return F::zero();
    }
    let delivered = F::of_u64(ledger.flows[flow_pos].delivered());
    delivered * phy.packet_bits / (F::of_u64(ledger.slots) * phy.slot_seconds)
}

/// One row of the per-flow table.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct FlowRow {
    pub flow: u32,
    pub source: u32,
    pub generated: u64,
    pub delivered: u64,
    pub backlog: u64,
    pub delivered_per_gw: Vec<u64>,
    pub sent_per_gw: Vec<u64>,
    pub mean_delay_slots: Option<f64>,
    pub throughput_mbps: f64,
    /// Realized traffic split across gateways; absent until the flow
    /// generated anything.
    pub split: Option<Vec<f64>>,
}

/// Delivery ratio of one (gateway, flow) pair; `pct` is absent when the flow
/// never sent to that gateway.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct GatewayRow {
    pub gateway: u32,
    pub flow: u32,
    pub sent: u64,
    pub received: u64,
    pub pct: Option<f64>,
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct JfiRow {
    pub metric: String,
    pub value: Option<f64>,
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct AggregateReport {
    pub throughput_mbps: f64,
    pub total_generated: u64,
    pub total_received: u64,
    pub total_backlog: u64,
    pub mean_delay_slots: Option<f64>,
    pub relayed_through_gateway: u64,
}

/// All tables of a finished run.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct RunReport {
    pub flows: Vec<FlowRow>,
    pub gateways: Vec<GatewayRow>,
    pub jfi: Vec<JfiRow>,
    pub aggregate: AggregateReport,
}

/// Builds the report tables from a finished ledger. Cells whose denominator
/// is zero come back as `None`, never fabricated.
pub fn report_tables<F: Float>(
    ledger: &MetricsLedger<F>,
    flows: &[FlowSpec<F>],
    topo: &Topology<F>,
    phy: &PhyConfig<F>,
) -> RunReport {
    let mut flow_rows = Vec::with_capacity(flows.len());
    let mut throughputs = Vec::with_capacity(flows.len());
    let mut inv_delays = Vec::with_capacity(flows.len());
    let mut ratios = Vec::with_capacity(flows.len());

    for (pos, spec) in flows.iter().enumerate() {
        let c = &ledger.flows[pos];
        let throughput_mbps = flow_throughput_bps(ledger, pos, phy).as_f64() / 1e6;
        let mean_delay = c.mean_delay_slots();
        flow_rows.push(FlowRow {
            flow: spec.id.0,
            source: spec.source.0,
            generated: c.generated(),
            delivered: c.delivered(),
            backlog: c.backlog(),
            delivered_per_gw: c.delivered_per_gw.clone(),
            sent_per_gw: c.generated_per_gw.clone(),
            mean_delay_slots: mean_delay,
            throughput_mbps,
            split: traffic::realized_split(&c.generated_per_gw),
        });
        if throughput_mbps > 0.0 {
            throughputs.push(throughput_mbps);
        }
        if let Some(d) = mean_delay {
            if d > 0.0 {
                inv_delays.push(1.0 / d);
                if throughput_mbps > 0.0 {
                    ratios.push(throughput_mbps / d);
                }
            }
        }
    }

    let mut gateway_rows = Vec::new();
    for (gw_slot, &gw) in topo.gateways().iter().enumerate() {
        for (pos, spec) in flows.iter().enumerate() {
            let c = &ledger.flows[pos];
            let sent = c.generated_per_gw[gw_slot];
            let received = c.delivered_per_gw[gw_slot];
            gateway_rows.push(GatewayRow {
                gateway: gw.0,
                flow: spec.id.0,
                sent,
                received,
                pct: (sent > 0).then(|| 100.0 * received as f64 / sent as f64),
            });
        }
    }

    // The three fairness rows: per-flow throughput, inverse mean delay, and
    // throughput over mean delay. A row is defined only when every flow
    // contributes a positive sample.
    let jfi_of = |vals: &[f64], expected: usize| -> Option<f64> {
        (vals.len() == expected)
            .then(|| jain_index(vals).ok())
            .flatten()
    };
    let jfi = vec![
        JfiRow {
            metric: "throughput".to_string(),
            value: jfi_of(&throughputs, flows.len()),
        },
        JfiRow {
            metric: "inv_mean_delay".to_string(),
            value: jfi_of(&inv_delays, flows.len()),
        },
        JfiRow {
            metric: "throughput_over_delay".to_string(),
            value: jfi_of(&ratios, flows.len()),
        },
    ];

    let total_delivered = ledger.total_delivered();
    let delay_sum: u64 = ledger.flows.iter().map(|f| f.delay_sum_slots).sum();
    let aggregate = AggregateReport {
        throughput_mbps: flow_rows.iter().map(|r| r.throughput_mbps).sum(),
        total_generated: ledger.total_generated(),
        total_received: total_delivered,
        total_backlog: ledger.total_backlog(),
        mean_delay_slots: (total_delivered > 0)
            .then(|| delay_sum as f64 / total_delivered as f64),
        relayed_through_gateway: ledger.relayed_through_gateway,
    };

    RunReport {
        flows: flow_rows,
        gateways: gateway_rows,
        jfi,
        aggregate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NodeId, PhyConfig};
    use crate::traffic::FlowId;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn jain_of_equal_values_is_one() {
        assert_relative_eq!(jain_index(&[5.0, 5.0, 5.0, 5.0]).unwrap(), 1.0);
    }

    #[test]
    fn jain_of_one_three_is_point_eight() {
        assert_relative_eq!(jain_index(&[1.0, 3.0]).unwrap(), 0.8);
    }

    #[test]
    fn jain_rejects_bad_domains() {
        assert!(jain_index::<f64>(&[]).is_err());
        assert!(jain_index(&[1.0, 0.0]).is_err());
        assert!(jain_index(&[1.0, -2.0]).is_err());
    }

    #[test]
    fn throughput_arithmetic() {
        let phy: PhyConfig<f64> = PhyConfig::default();
        let mut ledger: MetricsLedger<f64> = MetricsLedger::new(1, 0, 2);
        ledger.slots = 1000;
        // 2 packets per slot sustained.
        ledger.flows[0].delivered_per_gw[0] = 2000;
        let bps = flow_throughput_bps(&ledger, 0, &phy);
        assert_relative_eq!(bps / 1e6, 37.632, max_relative = 1e-12);
    }

    #[test]
    fn zero_delivery_zero_throughput() {
        let phy: PhyConfig<f64> = PhyConfig::default();
        let mut ledger: MetricsLedger<f64> = MetricsLedger::new(1, 0, 2);
        ledger.slots = 100;
        assert_eq!(flow_throughput_bps(&ledger, 0, &phy), 0.0);
    }

    fn report_fixture(deliveries: &[(u64, u64)]) -> RunReport {
        // One flow per entry: (sent to gw0, delivered at gw0), delay 2/packet.
        let positions = vec![[0.0, 0.0], [100.0, 0.0], [200.0, 0.0], [300.0, 0.0]];
        let phy: PhyConfig<f64> = PhyConfig::default();
        let topo = Topology::from_positions(
            positions,
            &[
                (NodeId(1), NodeId(2)),
                (NodeId(2), NodeId(3)),
                (NodeId(3), NodeId(4)),
            ],
            &phy,
            vec![NodeId(1), NodeId(4)],
        )
        .unwrap();
        let flows: Vec<FlowSpec<f64>> = deliveries
            .iter()
            .enumerate()
            .map(|(k, _)| FlowSpec {
                id: FlowId(k as u32 + 1),
                source: NodeId(2),
                max_rate_pkts: 10.0,
            })
            .collect();
        let mut ledger: MetricsLedger<f64> = MetricsLedger::new(flows.len(), 0, 2);
        ledger.slots = 1000;
        for (pos, &(sent, delivered)) in deliveries.iter().enumerate() {
            ledger.flows[pos].generated_per_gw[0] = sent;
            ledger.flows[pos].delivered_per_gw[0] = delivered;
            ledger.flows[pos].delay_sum_slots = delivered * 2;
        }
        report_tables(&ledger, &flows, &topo, &phy)
    }

    #[test]
    fn zero_sent_cells_are_absent() {
        let report = report_fixture(&[(10, 10)]);
        // Gateway 4 (slot 1) never saw traffic from the flow.
        let row = report
            .gateways
            .iter()
            .find(|r| r.gateway == 4)
            .unwrap();
        assert_eq!(row.sent, 0);
        assert_eq!(row.pct, None);
        let g1 = report.gateways.iter().find(|r| r.gateway == 1).unwrap();
        assert_eq!(g1.pct, Some(100.0));
    }

    #[test]
    fn identical_flows_have_unit_jfi() {
        let report = report_fixture(&[(10, 8), (10, 8), (10, 8)]);
        for row in &report.jfi {
            assert_relative_eq!(row.value.unwrap(), 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn jfi_row_matches_direct_composition() {
        let report = report_fixture(&[(20, 16), (20, 4)]);
        let th: Vec<f64> = report.flows.iter().map(|r| r.throughput_mbps).collect();
        assert_relative_eq!(
            report.jfi[0].value.unwrap(),
            jain_index(&th).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn starved_flow_suppresses_the_jfi_cell() {
        let report = report_fixture(&[(20, 16), (20, 0)]);
        assert_eq!(report.jfi[0].value, None);
    }

    #[test]
    fn aggregate_is_the_flow_sum() {
        let report = report_fixture(&[(20, 16), (20, 4), (5, 5)]);
        let sum: f64 = report.flows.iter().map(|r| r.throughput_mbps).sum();
        assert_relative_eq!(report.aggregate.throughput_mbps, sum, max_relative = 1e-12);
        assert_eq!(report.aggregate.total_received, 25);
    }

    proptest! {
        #[test]
        fn jain_is_in_unit_interval(vals in proptest::collection::vec(1e-6f64..1e6, 1..20)) {
            let j = jain_index(&vals).unwrap();
            prop_assert!(j > 0.0 && j <= 1.0 + 1e-12);
        }

        #[test]
        fn jain_is_scale_invariant(vals in proptest::collection::vec(1e-3f64..1e3, 2..10), c in 1e-3f64..1e3) {
            let j1 = jain_index(&vals).unwrap();
            let scaled: Vec<f64> = vals.iter().map(|v| v * c).collect();
            let j2 = jain_index(&scaled).unwrap();
            prop_assert!((j1 - j2).abs() <= 1e-9);
        }

        #[test]
        fn delivery_percentages_bounded(sent in 1u64..1000, frac in 0.0f64..=1.0) {
            let delivered = (sent as f64 * frac).floor() as u64;
            let report = report_fixture(&[(sent, delivered)]);
            for row in &report.gateways {
                if let Some(p) = row.pct {
                    prop_assert!((0.0..=100.0).contains(&p));
                }
            }
        }
    }
}
