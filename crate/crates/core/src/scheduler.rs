//! Per-slot greedy construction of feasible schedules with joint link-rate
//! and power allocation, plus the slot-fraction assignment and the
//! multi-channel partition.
//!
//! Candidate links are ranked by weight. Each of the `M` schedules is seeded
//! with one of the top-ranked links at the highest rate its solo power check
//! admits; remaining links are then offered, in descending rate order and
//! descending weight order, to the first schedule where they are
//! node-disjoint and the joint minimum-power solve stays within the power
//! cap. Negative-weight links are never scheduled.

use thiserror::Error;

use crate::model::{NodeId, PhyConfig, RateTable, Topology};
use crate::power::{solve_candidate_powers, CandidateSet};
use crate::scalar::Float;
use crate::weights::LinkWeight;

#[derive(Debug, Error)]
pub enum SchedulerError {
    #[error("need at least one schedule per slot")]
    NoSchedules,
    #[error("channel count {channels} exceeds radios per node {radios}")]
    ChannelsExceedRadios { channels: usize, radios: usize },
    #[error("multi-channel mode requires radios = channels (got {radios} radios, {channels} channels)")]
    RadiosMismatch { channels: usize, radios: usize },
}

/// Scheduler shape: number of schedules built per slot, channel count and
/// radios per node. Multi-channel operation supports the radios = channels
/// case only.
#[derive(Clone, Copy, Debug)]
pub struct SchedulerConfig {
    pub num_schedules: usize,
    pub channels: usize,
    pub radios: usize,
}

impl SchedulerConfig {
    pub fn new(num_schedules: usize, channels: usize, radios: usize) -> Result<Self, SchedulerError> {
        if num_schedules == 0 {
            return Err(SchedulerError::NoSchedules);
        }
        if channels > radios {
            return Err(SchedulerError::ChannelsExceedRadios { channels, radios });
        }
        if channels > 1 && radios != channels {
            return Err(SchedulerError::RadiosMismatch { channels, radios });
        }
        Ok(Self {
            num_schedules,
            channels,
            radios,
        })
    }

    pub fn single_channel(num_schedules: usize) -> Self {
        Self {
            num_schedules,
            channels: 1,
            radios: 1,
        }
    }
}

/// One link inside a schedule, with its committed rate, transmit power and
/// the gateway commodity it serves this slot.
#[derive(Clone, Debug)]
pub struct ScheduledLink<F: Float = f64> {
    pub link_idx: usize,
    pub link: (NodeId, NodeId),
    pub rate_idx: usize,
    pub rate_bps: F,
    pub power_mw: F,
    pub commodity: NodeId,
    pub weight: F,
}

/// A conflict-free set of simultaneously active links with jointly feasible
/// powers, the fraction of the slot it runs, and its frequency channel.
#[derive(Clone, Debug, Default)]
pub struct Schedule<F: Float = f64> {
    pub links: Vec<ScheduledLink<F>>,
    pub time_fraction: F,
    pub channel: usize,
}

impl<F: Float> Schedule<F> {
    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn rate_sum(&self) -> F {
        self.links.iter().map(|l| l.rate_bps).sum()
    }

    /// Per-slot objective at a given slot fraction: packets-per-slot rate
    /// term plus the link weights of the active set.
    pub fn objective_with_pi(&self, phy: &PhyConfig<F>, pi: F) -> F {
        self.links
            .iter()
            .map(|l| l.rate_bps * pi * phy.slot_seconds / phy.packet_bits + l.weight)
            .sum()
    }

    pub fn objective(&self, phy: &PhyConfig<F>) -> F {
        self.objective_with_pi(phy, self.time_fraction)
    }

    fn occupies(&self, node: NodeId) -> bool {
        self.links
            .iter()
            .any(|l| l.link.0 == node || l.link.1 == node)
    }

    fn conflicts_with(&self, link: (NodeId, NodeId)) -> bool {
        self.occupies(link.0) || self.occupies(link.1)
    }

    fn member_links(&self) -> Vec<(NodeId, NodeId)> {
        self.links.iter().map(|l| l.link).collect()
    }

    fn member_rates(&self) -> Vec<usize> {
        self.links.iter().map(|l| l.rate_idx).collect()
    }
}

/// Candidate order: weight descending, ties by lexicographic link.
fn ranked_order<F: Float>(weights: &[LinkWeight<F>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        weights[b]
            .value
            .partial_cmp(&weights[a].value)
            .expect("link weights are finite")
            .then(weights[a].link.cmp(&weights[b].link))
    });
    order
}

/// Tries to add `lw` at `rate_idx` to `schedule`; on success commits the new
/// joint power vector to every member.
fn try_add<F: Float>(
    schedule: &mut Schedule<F>,
    lw: &LinkWeight<F>,
    rate_idx: usize,
    topo: &Topology<F>,
    rates: &RateTable<F>,
    phy: &PhyConfig<F>,
) -> bool {
    let mut links = schedule.member_links();
    let mut rate_indices = schedule.member_rates();
    links.push(lw.link);
    rate_indices.push(rate_idx);
    let cand = match CandidateSet::new(links, rate_indices) {
        Ok(c) => c,
        Err(_) => return false,
    };
    match solve_candidate_powers(&cand, topo, rates, phy) {
        Ok(powers) => {
            for (member, &p) in schedule.links.iter_mut().zip(&powers) {
                member.power_mw = p;
            }
            schedule.links.push(ScheduledLink {
                link_idx: lw.link_idx,
                link: lw.link,
                rate_idx,
                rate_bps: rates.rate(rate_idx),
                power_mw: powers[powers.len() - 1],
                commodity: lw.commodity,
                weight: lw.value,
            });
            true
        }
        Err(_) => false,
    }
}

/// Builds `M` feasible schedules for the current slot from the per-link
/// weights. Worst case the schedules come back empty; the caller assigns
/// time fractions and channels afterwards.
pub fn build_schedules<F: Float>(
    topo: &Topology<F>,
    rates: &RateTable<F>,
    phy: &PhyConfig<F>,
    weights: &[LinkWeight<F>],
    cfg: &SchedulerConfig,
) -> Vec<Schedule<F>> {
    let m_count = cfg.num_schedules;
    let mut schedules: Vec<Schedule<F>> = (0..m_count).map(|_| Schedule::default()).collect();
    let order = ranked_order(weights);
    let mut placed = vec![false; weights.len()];

    // Seed schedule m with the m-th ranked link at the highest rate whose
    // solo power check passes; an infeasible seed leaves the schedule empty.
    for m in 0..m_count.min(order.len()) {
        let lw = &weights[order[m]];
        if lw.value < F::zero() {
            continue;
        }
        for rate_idx in 0..rates.len() {
            if try_add(&mut schedules[m], lw, rate_idx, topo, rates, phy) {
                placed[order[m]] = true;
                break;
            }
        }
    }

    // Offer the remaining links at each rate, highest first, to the first
    // schedule that keeps them node-disjoint and power-feasible.
    for rate_idx in 0..rates.len() {
        for &q in &order {
            if placed[q] {
                continue;
            }
            let lw = &weights[q];
            if lw.value < F::zero() {
                break; // order is weight-sorted; the rest are negative too
            }
            for schedule in schedules.iter_mut() {
                if schedule.conflicts_with(lw.link) {
                    continue;
                }
                if try_add(schedule, lw, rate_idx, topo, rates, phy) {
                    placed[q] = true;
                    break;
                }
            }
        }
    }

    schedules
}

fn argmax_rate_sum<F: Float>(schedules: &[Schedule<F>], group: &[usize]) -> usize {
    let mut best = group[0];
    for &m in &group[1..] {
        if schedules[m].rate_sum() > schedules[best].rate_sum() {
            best = m;
        }
    }
    best
}

/// Slot-fraction assignment: the served-traffic objective is linear in the
/// fractions over the simplex, so the optimum is the vertex putting the whole
/// slot on the schedule with the largest active rate sum (ties to the lowest
/// index).
pub fn allocate_time_fractions<F: Float>(
    schedules: &[Schedule<F>],
) -> Result<Vec<F>, SchedulerError> {
    if schedules.is_empty() {
        return Err(SchedulerError::NoSchedules);
    }
    let group: Vec<usize> = (0..schedules.len()).collect();
    let best = argmax_rate_sum(schedules, &group);
    let mut pi = vec![F::zero(); schedules.len()];
    pi[best] = F::one();
    Ok(pi)
}

/// Multi-channel partition: schedule `m` lands on channel `m mod C` and the
/// slot-fraction problem is solved independently per channel. Schedules on
/// different channels never interfere, so the per-schedule power solves
/// remain valid; a node may be active on up to `C` channels at once, one
/// radio each.
pub fn partition_channels<F: Float>(
    schedules: &mut [Schedule<F>],
    cfg: &SchedulerConfig,
) -> Result<(), SchedulerError> {
    if cfg.channels > cfg.radios {
        return Err(SchedulerError::ChannelsExceedRadios {
            channels: cfg.channels,
            radios: cfg.radios,
        });
    }
    for (idx, s) in schedules.iter_mut().enumerate() {
        s.channel = idx % cfg.channels;
        s.time_fraction = F::zero();
    }
    for channel in 0..cfg.channels {
        let group: Vec<usize> = (0..schedules.len())
            .filter(|&m| m % cfg.channels == channel)
            .collect();
        if group.is_empty() {
            continue;
        }
        let best = argmax_rate_sum(schedules, &group);
        schedules[best].time_fraction = F::one();
    }
    Ok(())
}

/// Builds the slot's schedules and assigns fractions and channels.
pub fn build_slot_plan<F: Float>(
    topo: &Topology<F>,
    rates: &RateTable<F>,
    phy: &PhyConfig<F>,
    weights: &[LinkWeight<F>],
    cfg: &SchedulerConfig,
) -> Result<Vec<Schedule<F>>, SchedulerError> {
    let mut schedules = build_schedules(topo, rates, phy, weights, cfg);
    if cfg.channels == 1 {
        let pi = allocate_time_fractions(&schedules)?;
        for (s, p) in schedules.iter_mut().zip(pi) {
            s.time_fraction = p;
            s.channel = 0;
        }
    } else {
        partition_channels(&mut schedules, cfg)?;
    }
    Ok(schedules)
}
