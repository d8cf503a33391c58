//! Deterministic, seeded, packet-level simulator of multi-gateway wireless
//! mesh networks under a SINR interference model.
//!
//! Per slot, flow sources admit traffic toward the gateway with the shortest
//! queue, links are weighted by differential backlog (or a fairness-oriented
//! variant), and a greedy scheduler builds conflict-free link sets with joint
//! rate and minimum-power allocation, rejecting any set whose power solve
//! leaves `(0, P_max]`. Packets then flow store-and-forward over the winning
//! schedule of each frequency channel.
//!
//! The numeric core is generic over the scalar type ([`scalar::Float`], i.e.
//! `f32` or `f64`); the simulation engine, reports and CLI run on [`Scalar`].

pub mod config;
pub mod engine;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod power;
pub mod queue;
pub mod report;
pub mod scalar;
pub mod scheduler;
pub mod topology;
pub mod traffic;
pub mod weights;

pub use scalar::Float;

/// Default scalar type for simulations and reports.
pub type Scalar = f64;

/// Concrete aliases over [`Scalar`] for the main entry points.
pub type PhyConfig = model::PhyConfig<Scalar>;
pub type RateTable = model::RateTable<Scalar>;
pub type Topology = model::Topology<Scalar>;
pub type RunSpec = config::RunSpec<Scalar>;
pub type RunOutcome = engine::RunOutcome<Scalar>;
pub type Simulation = engine::Simulation<Scalar>;
pub type MetricsLedger = metrics::MetricsLedger<Scalar>;

pub use model::NodeId;
pub use traffic::FlowId;
pub use weights::Policy;
