//! Link-level simulator and optimization library for integrated access and
//! backhaul (IAB) in cell-free massive MIMO at mmWave frequencies.
//!
//! The network has one CPU (IAB-donor) with a large antenna array feeding `M`
//! access points (IAB-nodes) over a wireless backhaul, while the APs jointly
//! serve `K` single-antenna users over the access link. Both links share one
//! band, split by a bandwidth coefficient `eta`.
//!
//! The pipeline implemented here, per Monte-Carlo trial:
//!
//! 1. [`channel`] draws Saleh-Valenzuela access channels and rank-1 LOS
//!    backhaul channels from a [`channel::NetworkTopology`].
//! 2. [`backhaul`] maximizes the minimum backhaul rate with fixed
//!    steering-vector analog beamformers, bisection on the common rate target,
//!    and a second-order cone feasibility subproblem ([`socp`]).
//! 3. [`access`] builds per-AP hybrid precoders: phase-extraction analog
//!    matrices and block-diagonalization digital matrices.
//! 4. [`allocation`] splits the band in closed form and yields the end-to-end
//!    rate.
//!
//! [`sim`] orchestrates trials and sweeps; [`scenario`] holds configuration.

pub mod access;
pub mod allocation;
pub mod backhaul;
pub mod channel;
pub mod error;
pub mod numerics;
pub mod scenario;
pub mod selftest;
pub mod sim;
pub mod socp;

pub use error::Error;
pub use scenario::ScenarioConfig;
pub use numerics::{ComplexMatrix, RandomStream};

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
