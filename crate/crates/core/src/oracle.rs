//! Brute-force reference solver for the per-slot problem on tiny instances.
//!
//! Enumerates every node-exclusive link subset and every rate assignment,
//! keeps the power-feasible candidates and returns the objective maximizer.
//! Feasibility of returned (and external) schedules is judged by a direct
//! SINR check written against the definition, deliberately independent of
//! the linear-system solve path.

use thiserror::Error;

use crate::model::{NodeId, PhyConfig, RateTable, Topology};
use crate::power::{build_gain_matrix, check_power_bounds, solve_powers, CandidateSet};
use crate::scalar::Float;

/// Enumeration guard: beyond this many links the search space explodes.
pub const MAX_ORACLE_LINKS: usize = 8;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance has {0} links; the oracle enumerates at most {MAX_ORACLE_LINKS}")]
    TooLarge(usize),
    #[error("instance has no links")]
    Empty,
}

/// A small scheduling instance: a topology, candidate directed links and
/// their weights.
#[derive(Clone, Debug)]
pub struct TinyInstance<F: Float = f64> {
    pub topo: Topology<F>,
    pub links: Vec<(NodeId, NodeId)>,
    pub weights: Vec<F>,
    pub rates: RateTable<F>,
    pub phy: PhyConfig<F>,
}

/// The oracle's maximizer: indices into the instance's link list, the rate
/// index per chosen link, the solved powers and the objective value.
#[derive(Clone, Debug)]
pub struct OracleSolution<F: Float = f64> {
    pub link_set: Vec<usize>,
    pub rate_indices: Vec<usize>,
    pub powers: Vec<F>,
    pub objective: F,
}

/// Objective of an activated set at fixed slot fraction `pi`:
/// `sum (rate * pi * slot / packet + weight)`.
pub fn activation_objective<F: Float>(
    inst: &TinyInstance<F>,
    link_set: &[usize],
    rate_indices: &[usize],
    pi: F,
) -> F {
    link_set
        .iter()
        .zip(rate_indices)
        .map(|(&l, &r)| {
            inst.rates.rate(r) * pi * inst.phy.slot_seconds / inst.phy.packet_bits
                + inst.weights[l]
        })
        .sum()
}

/// Direct SINR feasibility check from the definition: every active link's
/// SINR must reach its rate threshold (within `tol` relative) and every
/// power must sit in `(0, P_max]`.
pub fn check_feasible<F: Float>(
    inst: &TinyInstance<F>,
    link_set: &[usize],
    rate_indices: &[usize],
    powers: &[F],
    tol: F,
) -> bool {
    if link_set.len() != rate_indices.len() || link_set.len() != powers.len() {
        return false;
    }
    // Node exclusivity.
    let mut nodes: Vec<NodeId> = Vec::new();
    for &l in link_set {
        let (i, j) = inst.links[l];
        if nodes.contains(&i) || nodes.contains(&j) {
            return false;
        }
        nodes.push(i);
        nodes.push(j);
    }
    let cap = inst.phy.max_power_mw * (F::one() + tol);
    for &p in powers {
        if !(p > F::zero()) || p > cap {
            return false;
        }
    }
    for (k, &l) in link_set.iter().enumerate() {
        let (i, j) = inst.links[l];
        let mut interference = F::zero();
        for (m, &lm) in link_set.iter().enumerate() {
            if m != k {
                let (im, _) = inst.links[lm];
                interference += inst.topo.gain(im, j) * powers[m];
            }
        }
        let sinr = inst.topo.gain(i, j) * powers[k] / (inst.phy.noise_mw + interference);
        if sinr < inst.rates.threshold(rate_indices[k]) * (F::one() - tol) {
            return false;
        }
    }
    true
}

fn node_disjoint<F: Float>(inst: &TinyInstance<F>, set: &[usize]) -> bool {
    let mut nodes: Vec<NodeId> = Vec::new();
    for &l in set {
        let (i, j) = inst.links[l];
        if nodes.contains(&i) || nodes.contains(&j) {
            return false;
        }
        nodes.push(i);
        nodes.push(j);
    }
    true
}

/// Exhaustive per-slot optimum at fixed `pi`. The empty activation (objective
/// zero) is the fallback when nothing feasible beats it.
pub fn optimal_schedule<F: Float>(
    inst: &TinyInstance<F>,
    pi: F,
) -> Result<OracleSolution<F>, OracleError> {
    let l = inst.links.len();
    if l == 0 {
        return Err(OracleError::Empty);
    }
    if l > MAX_ORACLE_LINKS {
        return Err(OracleError::TooLarge(l));
    }
    let num_rates = inst.rates.len();
    let mut best = OracleSolution {
        link_set: Vec::new(),
        rate_indices: Vec::new(),
        powers: Vec::new(),
        objective: F::zero(),
    };
    for mask in 1u32..(1 << l) {
        let set: Vec<usize> = (0..l).filter(|&k| mask & (1 << k) != 0).collect();
        if !node_disjoint(inst, &set) {
            continue;
        }
        let links: Vec<(NodeId, NodeId)> = set.iter().map(|&k| inst.links[k]).collect();
        // Odometer over rate assignments.
        let mut rate_indices = vec![0usize; set.len()];
        loop {
            let cand = CandidateSet::new(links.clone(), rate_indices.clone())
                .expect("set is node-disjoint");
            if let Ok(a) = build_gain_matrix(&cand, &inst.topo, &inst.rates) {
                if let Ok(powers) = solve_powers(&a, inst.phy.noise_mw) {
                    if check_power_bounds(&powers, inst.phy.max_power_mw).is_ok() {
                        let objective =
                            activation_objective(inst, &set, &rate_indices, pi);
                        if objective > best.objective {
                            best = OracleSolution {
                                link_set: set.clone(),
                                rate_indices: rate_indices.clone(),
                                powers,
                                objective,
                            };
                        }
                    }
                }
            }
            // Advance the odometer.
            let mut k = 0;
            loop {
                if k == rate_indices.len() {
                    break;
                }
                rate_indices[k] += 1;
                if rate_indices[k] < num_rates {
                    break;
                }
                rate_indices[k] = 0;
                k += 1;
            }
            if k == rate_indices.len() {
                break;
            }
        }
    }
    debug_assert!(
        best.link_set.is_empty()
            || check_feasible(
                inst,
                &best.link_set,
                &best.rate_indices,
                &best.powers,
                F::of(1e-9)
            )
    );
    Ok(best)
}

/// Builds a random tiny instance: `num_links` directed links over a small
/// node set placed in a square, with signed integer weights. An extra
/// far-away node serves as the gateway the commodities point at.
pub fn random_instance<F: Float>(
    num_links: usize,
    side_m: f64,
    rng: &mut impl rand::Rng,
) -> TinyInstance<F> {
    assert!(num_links >= 1 && num_links <= MAX_ORACLE_LINKS);
    let phy: PhyConfig<F> = PhyConfig::default();
    let rates: RateTable<F> = RateTable::default();
    // Enough nodes for conflicts to be possible but not certain.
    let num_nodes = (num_links + 2).max(4);
    loop {
        let mut positions: Vec<[F; 2]> = (0..num_nodes)
            .map(|_| {
                [
                    F::of(rng.gen_range(0.0..side_m)),
                    F::of(rng.gen_range(0.0..side_m)),
                ]
            })
            .collect();
        // Gateway node, far off to the side.
        positions.push([F::of(-10.0 * side_m), F::of(-10.0 * side_m)]);
        let gateway = NodeId(num_nodes as u32 + 1);

        let mut links: Vec<(NodeId, NodeId)> = Vec::new();
        let mut guard = 0;
        while links.len() < num_links && guard < 1000 {
            guard += 1;
            let i = rng.gen_range(1..=num_nodes as u32);
            let j = rng.gen_range(1..=num_nodes as u32);
            if i == j {
                continue;
            }
            let link = (NodeId(i), NodeId(j));
            if !links.contains(&link) {
                links.push(link);
            }
        }
        if links.len() < num_links {
            continue;
        }
        let weights: Vec<F> = (0..num_links)
            .map(|_| F::of(rng.gen_range(-3i64..=12) as f64))
            .collect();
        let topo = match Topology::from_positions(positions, &links, &phy, vec![gateway]) {
            Ok(t) => t,
            Err(_) => continue, // coincident draw; resample
        };
        return TinyInstance {
            topo,
            links,
            weights,
            rates,
            phy,
        };
    }
}
