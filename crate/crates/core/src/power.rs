//! SINR feasibility and minimum-power computation for a conflict-free set of
//! simultaneously active links.
//!
//! For links `(i_k, j_k)` with assigned rates, the admission constraints
//! `G_kk p_k / (N0 + sum_n G(i_n -> j_k) p_n) >= beta_k` are tightened to
//! equalities, which yields the linear system `A p = N0 * 1` with
//! `A[k][k] = G_kk / beta_k` and `A[k][n] = -G(i_n -> j_k)`. Its solution is
//! the component-wise minimum power vector; the set is accepted when every
//! power lands in `(0, P_max]`.

use thiserror::Error;

use crate::linalg::{self, Matrix};
use crate::model::{NodeId, PhyConfig, RateTable, Topology};
use crate::scalar::Float;

/// Solves whose condition estimate exceeds this are rejected as infeasible.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Error)]
pub enum PowerError {
    #[error("candidate set is empty")]
    Empty,
    #[error("links {0} and {1} share a node")]
    SharedNode(usize, usize),
    #[error("links and rates differ in length")]
    LengthMismatch,
    #[error("rate index {0} out of range")]
    BadRateIndex(usize),
    #[error("gain system is singular")]
    Singular,
    #[error("gain system is ill-conditioned (estimate {0:.3e})")]
    IllConditioned(f64),
    #[error("required power for link {0} is not positive")]
    NonPositivePower(usize),
    #[error("required power for link {0} exceeds the maximum")]
    PowerExceedsMax(usize),
}

/// An ordered set of directed links with no shared endpoints, each carrying a
/// rate index into the [`RateTable`].
#[derive(Clone, Debug)]
pub struct CandidateSet {
    links: Vec<(NodeId, NodeId)>,
    rate_indices: Vec<usize>,
}

impl CandidateSet {
    pub fn new(
        links: Vec<(NodeId, NodeId)>,
        rate_indices: Vec<usize>,
    ) -> Result<Self, PowerError> {
        if links.is_empty() {
            return Err(PowerError::Empty);
        }
        if links.len() != rate_indices.len() {
            return Err(PowerError::LengthMismatch);
        }
        for (m, &(im, jm)) in links.iter().enumerate() {
            for (n, &(in_, jn)) in links.iter().enumerate().skip(m + 1) {
                if im == in_ || im == jn || jm == in_ || jm == jn {
                    return Err(PowerError::SharedNode(m, n));
                }
            }
        }
        Ok(Self {
            links,
            rate_indices,
        })
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn links(&self) -> &[(NodeId, NodeId)] {
        &self.links
    }

    pub fn rate_indices(&self) -> &[usize] {
        &self.rate_indices
    }
}

/// Builds the power-balance matrix for a candidate set: diagonal entries are
/// direct gain over threshold, off-diagonal entries the negated interference
/// gains from other transmitters into each receiver.
pub fn build_gain_matrix<F: Float>(
    cand: &CandidateSet,
    topo: &Topology<F>,
    rates: &RateTable<F>,
) -> Result<Matrix<F>, PowerError> {
    let n = cand.len();
    let mut a = Matrix::zeros(n);
    for (k, (&(ik, jk), &rk)) in cand
        .links()
        .iter()
        .zip(cand.rate_indices().iter())
        .enumerate()
    {
        if rk >= rates.len() {
            return Err(PowerError::BadRateIndex(rk));
        }
        a.set(k, k, topo.gain(ik, jk) / rates.threshold(rk));
        for (m, &(im, _jm)) in cand.links().iter().enumerate() {
            if m != k {
                a.set(k, m, -topo.gain(im, jk));
            }
        }
    }
    Ok(a)
}

/// Solves `A p = N0 * 1` for the minimum power vector. Feasibility against
/// `(0, P_max]` is judged by the caller (see [`check_power_bounds`]).
pub fn solve_powers<F: Float>(a: &Matrix<F>, noise_mw: F) -> Result<Vec<F>, PowerError> {
    let lu = linalg::factor(a).map_err(|_| PowerError::Singular)?;
    let cond = linalg::condition_one(a, &lu);
    if !cond.is_finite() || cond > F::of(CONDITION_LIMIT) {
        return Err(PowerError::IllConditioned(cond.as_f64()));
    }
    let rhs = vec![noise_mw; a.n()];
    Ok(lu.solve(&rhs))
}

/// Rejects power vectors outside `(0, P_max]`, with distinct codes for the
/// two failure directions.
pub fn check_power_bounds<F: Float>(powers: &[F], max_power_mw: F) -> Result<(), PowerError> {
    for (k, &p) in powers.iter().enumerate() {
        if !(p > F::zero()) {
            return Err(PowerError::NonPositivePower(k));
        }
        if p > max_power_mw {
            return Err(PowerError::PowerExceedsMax(k));
        }
    }
    Ok(())
}

/// Matrix build, solve and bounds check in one step.
pub fn solve_candidate_powers<F: Float>(
    cand: &CandidateSet,
    topo: &Topology<F>,
    rates: &RateTable<F>,
    phy: &PhyConfig<F>,
) -> Result<Vec<F>, PowerError> {
    let a = build_gain_matrix(cand, topo, rates)?;
    let powers = solve_powers(&a, phy.noise_mw)?;
    check_power_bounds(&powers, phy.max_power_mw)?;
    Ok(powers)
}

/// Per-link SINR residuals `SINR/beta - 1` for an assigned power vector.
/// Powers from [`solve_powers`] give residuals of zero up to rounding.
pub fn verify_sinr<F: Float>(
    cand: &CandidateSet,
    powers: &[F],
    topo: &Topology<F>,
    rates: &RateTable<F>,
    noise_mw: F,
) -> Vec<F> {
    assert_eq!(powers.len(), cand.len());
    let mut residuals = Vec::with_capacity(cand.len());
    for (k, (&(ik, jk), &rk)) in cand
        .links()
        .iter()
        .zip(cand.rate_indices().iter())
        .enumerate()
    {
        let mut interference = F::zero();
        for (m, &(im, _)) in cand.links().iter().enumerate() {
            if m != k {
                interference += topo.gain(im, jk) * powers[m];
            }
        }
        let sinr = topo.gain(ik, jk) * powers[k] / (noise_mw + interference);
        residuals.push(sinr / rates.threshold(rk) - F::one());
    }
    residuals
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::dbm_to_mw;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn phy() -> PhyConfig<f64> {
        PhyConfig::default()
    }

    /// Two parallel links (1->2, 3->4) on a topology with prescribed direct
    /// and cross gains via positions on two distant horizontal segments.
    fn two_link_topology(separation: f64) -> Topology<f64> {
        let positions = vec![
            [0.0, 0.0],
            [10.0, 0.0],
            [0.0, separation],
            [10.0, separation],
        ];
        let links = [
            (NodeId(1), NodeId(2)),
            (NodeId(3), NodeId(4)),
            (NodeId(1), NodeId(3)),
            (NodeId(2), NodeId(4)),
        ];
        Topology::from_positions(positions, &links, &phy(), vec![NodeId(1)]).unwrap()
    }

    /// Synthetic topology with an exact gain matrix, for pinned examples.
    fn synthetic_gains(direct: f64, cross: f64) -> Topology<f64> {
        let positions = vec![[0.0, 0.0], [10.0, 0.0], [0.0, 100.0], [10.0, 100.0]];
        let mut gains = vec![vec![0.0; 4]; 4];
        // Links 1->2 and 3->4; all other pairs get the cross gain.
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    gains[i][j] = cross;
                }
            }
        }
        gains[0][1] = direct;
        gains[1][0] = direct;
        gains[2][3] = direct;
        gains[3][2] = direct;
        let links = [(NodeId(1), NodeId(2)), (NodeId(3), NodeId(4))];
        Topology::from_parts(positions, &links, gains, vec![NodeId(1)]).unwrap()
    }

    #[test]
    fn single_link_matrix_is_inverse_threshold() {
        let topo = synthetic_gains(1.0, 0.0);
        let rates = RateTable::default();
        let cand = CandidateSet::new(vec![(NodeId(1), NodeId(2))], vec![7]).unwrap();
        let a = build_gain_matrix(&cand, &topo, &rates).unwrap();
        // 6 Mbps threshold is 6.02 dB -> beta ~= 3.999; 1/beta ~= 0.2500.
        assert_relative_eq!(a.at(0, 0), 0.2500, max_relative = 5e-4);
    }

    #[test]
    fn two_link_matrix_entries() {
        let topo = synthetic_gains(1.0, 0.125);
        let rates = RateTable::default();
        let cand = CandidateSet::new(
            vec![(NodeId(1), NodeId(2)), (NodeId(3), NodeId(4))],
            vec![7, 7],
        )
        .unwrap();
        let a = build_gain_matrix(&cand, &topo, &rates).unwrap();
        assert_relative_eq!(a.at(0, 0), 0.25, max_relative = 5e-4);
        assert_relative_eq!(a.at(1, 1), 0.25, max_relative = 5e-4);
        assert_relative_eq!(a.at(0, 1), -0.125, max_relative = 1e-12);
        assert_relative_eq!(a.at(1, 0), -0.125, max_relative = 1e-12);
    }

    #[test]
    fn candidate_with_shared_node_is_rejected() {
        let err = CandidateSet::new(
            vec![(NodeId(1), NodeId(2)), (NodeId(2), NodeId(3))],
            vec![0, 0],
        )
        .unwrap_err();
        assert!(matches!(err, PowerError::SharedNode(0, 1)));
    }

    #[test]
    fn single_link_power_is_closed_form() {
        let topo = synthetic_gains(1.0, 0.0);
        let rates = RateTable::default();
        let cand = CandidateSet::new(vec![(NodeId(1), NodeId(2))], vec![7]).unwrap();
        let a = build_gain_matrix(&cand, &topo, &rates).unwrap();
        let p = solve_powers(&a, 1e-9).unwrap();
        // p = beta * N0 / G ~= 4e-9 mW ~= -84 dBm.
        assert_relative_eq!(p[0], 4e-9, max_relative = 1e-3);
        assert_relative_eq!(crate::model::mw_to_dbm(p[0]), -84.0, max_relative = 1e-3);
    }

    #[test]
    fn two_link_powers_match_hand_solve() {
        let topo = synthetic_gains(1.0, 0.125);
        let rates = RateTable::default();
        let cand = CandidateSet::new(
            vec![(NodeId(1), NodeId(2)), (NodeId(3), NodeId(4))],
            vec![7, 7],
        )
        .unwrap();
        let a = build_gain_matrix(&cand, &topo, &rates).unwrap();
        let p = solve_powers(&a, 1e-9).unwrap();
        assert_relative_eq!(p[0], 8e-9, max_relative = 1e-3);
        assert_relative_eq!(p[1], 8e-9, max_relative = 1e-3);
        // SINR at the solution equals the threshold.
        let sinr = p[0] / (1e-9 + 0.125 * p[1]);
        assert_relative_eq!(sinr, rates.threshold(7), max_relative = 1e-9);
    }

    #[test]
    fn constructed_singular_system_is_infeasible() {
        // Cross gain equal to direct/beta makes the 2x2 system exactly singular.
        let rates: RateTable<f64> = RateTable::default();
        let beta = rates.threshold(7);
        let topo = synthetic_gains(1.0, 1.0 / beta);
        let cand = CandidateSet::new(
            vec![(NodeId(1), NodeId(2)), (NodeId(3), NodeId(4))],
            vec![7, 7],
        )
        .unwrap();
        let a = build_gain_matrix(&cand, &topo, &rates).unwrap();
        let err = solve_powers(&a, 1e-9).unwrap_err();
        assert!(matches!(
            err,
            PowerError::Singular | PowerError::IllConditioned(_)
        ));
    }

    #[test]
    fn residuals_vanish_at_solution_and_fail_when_halved() {
        let topo = two_link_topology(1000.0);
        let rates = RateTable::default();
        let phy = phy();
        let cand = CandidateSet::new(
            vec![(NodeId(1), NodeId(2)), (NodeId(3), NodeId(4))],
            vec![0, 0],
        )
        .unwrap();
        let p = solve_candidate_powers(&cand, &topo, &rates, &phy).unwrap();
        let res = verify_sinr(&cand, &p, &topo, &rates, phy.noise_mw);
        for r in &res {
            assert!(r.abs() <= 1e-9, "residual {r}");
        }
        let halved: Vec<f64> = p.iter().map(|x| x / 2.0).collect();
        for r in verify_sinr(&cand, &halved, &topo, &rates, phy.noise_mw) {
            assert!(r < 0.0);
        }
    }

    #[test]
    fn single_link_exact_power_has_zero_residual() {
        let topo = synthetic_gains(0.5, 0.0);
        let rates = RateTable::default();
        let beta = rates.threshold(7);
        let n0 = 1e-9;
        let cand = CandidateSet::new(vec![(NodeId(1), NodeId(2))], vec![7]).unwrap();
        let res = verify_sinr(&cand, &[beta * n0 / 0.5], &topo, &rates, n0);
        assert_relative_eq!(res[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn f32_pipeline_solves_within_its_precision() {
        let phy: PhyConfig<f32> = PhyConfig::default();
        let rates: RateTable<f32> = RateTable::default();
        let positions = vec![[0.0f32, 0.0], [10.0, 0.0], [0.0, 1000.0], [10.0, 1000.0]];
        let topo = Topology::from_positions(
            positions,
            &[(NodeId(1), NodeId(2)), (NodeId(3), NodeId(4))],
            &phy,
            vec![NodeId(1)],
        )
        .unwrap();
        let cand = CandidateSet::new(
            vec![(NodeId(1), NodeId(2)), (NodeId(3), NodeId(4))],
            vec![0, 0],
        )
        .unwrap();
        let p = solve_candidate_powers(&cand, &topo, &rates, &phy).unwrap();
        for r in verify_sinr(&cand, &p, &topo, &rates, phy.noise_mw) {
            assert!(r.abs() <= 1e-4, "f32 residual {r}");
        }
    }

    #[test]
    fn bounds_check_distinguishes_failures() {
        assert!(matches!(
            check_power_bounds(&[1.0, -0.5], 100.0),
            Err(PowerError::NonPositivePower(1))
        ));
        assert!(matches!(
            check_power_bounds(&[1.0, 200.0], 100.0),
            Err(PowerError::PowerExceedsMax(1))
        ));
        assert!(check_power_bounds(&[1.0, 100.0], 100.0).is_ok());
    }

    #[test]
    fn infeasible_when_power_cap_too_low() {
        let topo = two_link_topology(1000.0);
        let rates = RateTable::default();
        let tight_phy = PhyConfig::new(
            dbm_to_mw(-90.0),
            1e-12, // cap below the single-link requirement
            3.0,
            10.0,
            625e-6,
            11760.0,
        )
        .unwrap();
        let cand = CandidateSet::new(vec![(NodeId(1), NodeId(2))], vec![0]).unwrap();
        let err = solve_candidate_powers(&cand, &topo, &rates, &tight_phy).unwrap_err();
        assert!(matches!(err, PowerError::PowerExceedsMax(0)));
    }

    proptest! {
        /// Equality at the solution: all residuals vanish for feasible
        /// random two-link geometries.
        #[test]
        fn solution_is_tight(separation in 100.0f64..5000.0, rate_idx in 0usize..8) {
            let topo = two_link_topology(separation);
            let rates = RateTable::default();
            let phy = phy();
            let cand = CandidateSet::new(
                vec![(NodeId(1), NodeId(2)), (NodeId(3), NodeId(4))],
                vec![rate_idx, rate_idx],
            )
            .unwrap();
            if let Ok(p) = solve_candidate_powers(&cand, &topo, &rates, &phy) {
                for r in verify_sinr(&cand, &p, &topo, &rates, phy.noise_mw) {
                    prop_assert!(r.abs() <= 1e-9);
                }
            }
        }

        /// Adding a link never lowers an existing link's required power.
        #[test]
        fn interference_is_monotone(separation in 100.0f64..5000.0, rate_idx in 0usize..8) {
            let topo = two_link_topology(separation);
            let rates = RateTable::default();
            let phy = phy();
            let solo = CandidateSet::new(vec![(NodeId(1), NodeId(2))], vec![rate_idx]).unwrap();
            let pair = CandidateSet::new(
                vec![(NodeId(1), NodeId(2)), (NodeId(3), NodeId(4))],
                vec![rate_idx, rate_idx],
            )
            .unwrap();
            let p_solo = solve_candidate_powers(&solo, &topo, &rates, &phy).unwrap();
            if let Ok(p_pair) = solve_candidate_powers(&pair, &topo, &rates, &phy) {
                prop_assert!(p_pair[0] >= p_solo[0] * (1.0 - 1e-12));
            }
        }

        /// Solutions scale linearly in the noise power.
        #[test]
        fn noise_scaling_is_linear(separation in 100.0f64..5000.0, scale in 0.1f64..10.0) {
            let topo = two_link_topology(separation);
            let rates = RateTable::default();
            let cand = CandidateSet::new(
                vec![(NodeId(1), NodeId(2)), (NodeId(3), NodeId(4))],
                vec![0, 0],
            )
            .unwrap();
            let a = build_gain_matrix(&cand, &topo, &rates).unwrap();
            if let (Ok(p1), Ok(p2)) = (solve_powers(&a, 1e-9), solve_powers(&a, 1e-9 * scale)) {
                for (x, y) in p1.iter().zip(&p2) {
                    prop_assert!((y - x * scale).abs() <= 1e-9 * y.abs().max(1e-300));
                }
            }
        }
    }
}
