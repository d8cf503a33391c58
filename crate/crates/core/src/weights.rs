//! Link weights: the differential backlog and the fairness-oriented variants
//! that rescale it by served history and head-of-line delay.

use std::str::FromStr;

use thiserror::Error;

use crate::model::{NodeId, Topology};
use crate::queue::QueueState;
use crate::scalar::Float;

/// Which per-link weight drives scheduling.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Policy {
    /// Plain differential backlog.
    Backlog,
    /// Backlog over the link's cumulative allocated rate.
    RateNormalized,
    /// Backlog scaled by head-of-line packet delay.
    DelayWeighted,
    /// Delay over cumulative rate, times backlog.
    RateDelay,
    /// Backlog over the cumulative rate served for the link's commodity.
    GatewayRate,
    /// Delay over per-commodity cumulative rate, times backlog.
    GatewayRateDelay,
}

impl Policy {
    pub const ALL: [Policy; 6] = [
        Policy::Backlog,
        Policy::RateNormalized,
        Policy::DelayWeighted,
        Policy::RateDelay,
        Policy::GatewayRate,
        Policy::GatewayRateDelay,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Backlog => "W",
            Policy::RateNormalized => "Wr",
            Policy::DelayWeighted => "WD",
            Policy::RateDelay => "WrD",
            Policy::GatewayRate => "Wrd",
            Policy::GatewayRateDelay => "WrdD",
        }
    }
}

#[derive(Debug, Error)]
#[error("unknown policy {0:?}; expected one of W, Wr, WD, WrD, Wrd, WrdD")]
pub struct ParsePolicyError(String);

impl FromStr for Policy {
    type Err = ParsePolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Policy::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| ParsePolicyError(s.to_string()))
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One directed link's weight for the current slot: the (policy-transformed)
/// value, the commodity achieving the backlog max, and the head-of-line
/// delay that fed the delay-sensitive variants.
#[derive(Clone, Copy, Debug)]
pub struct LinkWeight<F: Float = f64> {
    /// Caller-defined index (the engine uses the topology link index).
    pub link_idx: usize,
    pub link: (NodeId, NodeId),
    pub value: F,
    pub commodity: NodeId,
    pub hol_delay_slots: u64,
}

/// Differential backlog of link `(i, j)`: the maximum over gateways of the
/// queue-length difference, with ties broken toward the lowest gateway id.
/// A gateway's own-commodity queue counts as zero.
pub fn differential_backlog<F: Float>(
    queues: &QueueState,
    topo: &Topology<F>,
    i: NodeId,
    j: NodeId,
) -> (F, NodeId) {
    let ii = topo.idx(i);
    let jj = topo.idx(j);
    let gateways = topo.gateways();
    let mut best_value = i64::MIN;
    let mut best_gw = gateways[0];
    for (slot, &gw) in gateways.iter().enumerate() {
        let qi = queues.len(ii, slot) as i64;
        let qj = queues.len(jj, slot) as i64;
        let diff = qi - qj;
        if diff > best_value {
            best_value = diff;
            best_gw = gw;
        }
    }
    (F::of(best_value as f64), best_gw)
}

/// Cumulative allocated-rate counters backing the rate-normalized variants.
///
/// Rates are accumulated in units of the lowest table rate ("rate steps"),
/// weighted by the slot fraction actually granted, so the `max(., 1)`
/// denominator guard is scale-free.
#[derive(Clone, Debug)]
pub struct WeightState<F: Float = f64> {
    policy: Policy,
    rate_unit: F,
    cum_rate: Vec<F>,
    cum_rate_per_gw: Vec<Vec<F>>,
}

impl<F: Float> WeightState<F> {
    pub fn new(policy: Policy, num_links: usize, num_gateways: usize, rate_unit: F) -> Self {
        Self {
            policy,
            rate_unit,
            cum_rate: vec![F::zero(); num_links],
            cum_rate_per_gw: vec![vec![F::zero(); num_gateways]; num_links],
        }
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    /// Credits `rate * pi` to the link's counters, once per activated link
    /// per slot.
    pub fn record_allocation(&mut self, link_idx: usize, gw_slot: usize, rate_bps: F, pi: F) {
        let steps = rate_bps / self.rate_unit * pi;
        self.cum_rate[link_idx] += steps;
        self.cum_rate_per_gw[link_idx][gw_slot] += steps;
    }

    pub fn cum_rate(&self, link_idx: usize) -> F {
        self.cum_rate[link_idx]
    }

    pub fn cum_rate_for(&self, link_idx: usize, gw_slot: usize) -> F {
        self.cum_rate_per_gw[link_idx][gw_slot]
    }
}

/// Applies the active policy to a base differential-backlog weight.
///
/// Denominators are guarded with `max(., 1)` (never-served links and the
/// first slot would otherwise divide by zero); the head-of-line delay of an
/// empty queue is zero, which zeroes the delay-scaled variants there.
pub fn policy_weight<F: Float>(state: &WeightState<F>, base: &LinkWeight<F>, gw_slot: usize) -> F {
    let w = base.value;
    let d = F::of_u64(base.hol_delay_slots);
    let one = F::one();
    match state.policy {
        Policy::Backlog => w,
        Policy::RateNormalized => w / state.cum_rate(base.link_idx).max(one),
        Policy::DelayWeighted => d * w,
        Policy::RateDelay => d / state.cum_rate(base.link_idx).max(one) * w,
        Policy::GatewayRate => w / state.cum_rate_for(base.link_idx, gw_slot).max(one),
        Policy::GatewayRateDelay => d / state.cum_rate_for(base.link_idx, gw_slot).max(one) * w,
    }
}
