//! Bandwidth split between the access and backhaul links.
//!
//! With both links sharing one band, the end-to-end rate min(eta * C_A,
//! (1 - eta) * C_B) is maximized where the two sides meet, giving the closed
//! forms eta = C_B / (C_A + C_B) and rate C_A C_B / (C_A + C_B). The module
//! also accounts for the backhaul signaling each beamforming variant needs.

use std::str::FromStr;

use crate::error::Error;
use crate::Result;

/// Capacities at full band and the optimal split derived from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSummary {
    /// Access sum capacity at full band, bits/s.
    pub c_a: f64,
    /// Minimum backhaul capacity at full band, bits/s.
    pub c_b: f64,
    /// Fraction of the band given to the access link.
    pub eta: f64,
    /// End-to-end rate at the optimal split, bits/s.
    pub end_to_end: f64,
}

impl RateSummary {
    /// Combine full-band capacities. Fails only when both are zero; a single
    /// dead link yields a degenerate (but well-defined) split with zero rate.
    pub fn from_capacities(c_a: f64, c_b: f64) -> Result<Self> {
        let eta = optimal_eta(c_a, c_b)?;
        Ok(Self { c_a, c_b, eta, end_to_end: end_to_end_rate(c_a, c_b) })
    }

    /// True when one link is dead and the split collapsed to 0 or 1.
    pub fn is_degenerate(&self) -> bool {
        self.c_a == 0.0 || self.c_b == 0.0
    }
}

/// Access-bandwidth fraction that balances the two links:
/// (1 - eta) C_B = eta C_A.
pub fn optimal_eta(c_a: f64, c_b: f64) -> Result<f64> {
    assert!(c_a >= 0.0 && c_b >= 0.0, "capacities must be nonnegative");
    if c_a == 0.0 && c_b == 0.0 {
        return Err(Error::UndefinedSplit);
    }
    Ok(c_b / (c_a + c_b))
}

/// End-to-end rate at the optimal split: C_A C_B / (C_A + C_B), zero when
/// either link is dead.
pub fn end_to_end_rate(c_a: f64, c_b: f64) -> f64 {
    assert!(c_a >= 0.0 && c_b >= 0.0, "capacities must be nonnegative");
    if c_a == 0.0 || c_b == 0.0 {
        return 0.0;
    }
    c_a * c_b / (c_a + c_b)
}

/// Where the access-link beamforming runs and with how many RF chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamformingScheme {
    CentralizedFd,
    DecentralizedFd,
    DecentralizedHybrid,
}

impl FromStr for BeamformingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centralized_fd" => Ok(Self::CentralizedFd),
            "decentralized_fd" => Ok(Self::DecentralizedFd),
            "decentralized_hybrid" => Ok(Self::DecentralizedHybrid),
            other => Err(Error::Config(format!("unknown beamforming scheme '{other}'"))),
        }
    }
}

/// Backhaul signaling for the access beamforming, as (uplink, downlink)
/// scalar counts per coherence block.
///
/// Centralized design ships every user's full CSI up (M*N_A*K scalars) and
/// all precoders back down; decentralized variants only report each user's
/// designed signal and interference terms (2*M*K up) against one downlink
/// acknowledgment.
pub fn backhaul_signaling_load(
    scheme: BeamformingScheme,
    m_aps: usize,
    n_ap_antennas: usize,
    k_users: usize,
) -> (u64, u64) {
    assert!(
        m_aps > 0 && n_ap_antennas > 0 && k_users > 0,
        "counts must be positive"
    );
    let (m, n, k) = (m_aps as u64, n_ap_antennas as u64, k_users as u64);
    match scheme {
        BeamformingScheme::CentralizedFd => (m * n * k, 1 + m * n * k),
        BeamformingScheme::DecentralizedFd | BeamformingScheme::DecentralizedHybrid => {
            (2 * m * k, 1)
        }
    }
}
