//! Per-AP hybrid precoding for the access link.
//!
//! Each AP runs two stages. The analog matrix gives every user one RF chain
//! and phase-aligns it to that user's channel (the unit-modulus projection of
//! the matched filter). The digital matrix then removes inter-user
//! interference by block diagonalization: user k's column lives in the null
//! space of all other users' effective channels, pointed along the projected
//! own channel, and the whole matrix is scaled onto the power budget.
//!
//! The fully-digital and random-analog variants used as baselines share the
//! same BD construction, as does the centralized variant that treats the
//! network-wide stacked channel as one big array.

use num_complex::Complex64;

use crate::error::Error;
use crate::numerics::{abs2, null_space, ComplexMatrix, ComplexRow, ComplexVector, RandomStream};
use crate::Result;

/// Hybrid precoder of one AP.
#[derive(Debug, Clone)]
pub struct AccessPrecoder {
    /// N_A x K unit-modulus analog stage.
    pub analog: ComplexMatrix,
    /// K x K digital stage, Frobenius norm pinned to the power budget.
    pub digital: ComplexMatrix,
    pub ap_index: usize,
    /// Users whose channel row was zero; their analog column fell back to
    /// flat phases.
    pub fallback_users: Vec<usize>,
}

impl AccessPrecoder {
    /// The effective N_A x K transmit matrix.
    pub fn composed(&self) -> ComplexMatrix {
        &self.analog * &self.digital
    }
}

/// Access-link evaluation: per-user SINRs and the sum rate at full band.
#[derive(Debug, Clone)]
pub struct AccessLinkResult {
    pub sinrs: Vec<f64>,
    /// Sum of log2(1 + SINR_k), bits/s/Hz.
    pub sum_rate_bpshz: f64,
    pub signal_powers: Vec<f64>,
    pub interference_powers: Vec<f64>,
}

/// Unit-modulus column carrying the phases of the matched filter h^H / ||h||.
/// A zero row has no phase information; the column falls back to flat phases.
pub fn analog_from_phases(channel_row: &ComplexRow) -> ComplexVector {
    let n = channel_row.ncols();
    let scale = 1.0 / (n as f64).sqrt();
    ComplexVector::from_fn(n, |i, _| {
        let h = channel_row[i];
        if h.norm() == 0.0 {
            Complex64::new(scale, 0.0)
        } else {
            (h / h.norm()).conj() * scale
        }
    })
}

/// Stack per-user phase columns into the analog matrix of one AP.
pub fn build_analog(channel_rows: &[ComplexRow]) -> (ComplexMatrix, Vec<usize>) {
    let n = channel_rows[0].ncols();
    let k = channel_rows.len();
    let mut analog = ComplexMatrix::zeros(n, k);
    let mut fallback = Vec::new();
    for (j, row) in channel_rows.iter().enumerate() {
        if row.norm() == 0.0 {
            fallback.push(j);
        }
        analog.set_column(j, &analog_from_phases(row));
    }
    (analog, fallback)
}

/// Block-diagonalization precoder over one set of per-user rows (effective
/// K-dimensional rows for the hybrid stage, raw N_A rows for fully digital).
///
/// Column k is the null-space basis of the other users' stacked rows times
/// the dominant right singular direction of the own projected row; columns
/// are unit norm before the final Frobenius scaling to `power`.
pub fn bd_precoder(rows: &[ComplexRow], power: f64, rank_tol: f64) -> Result<ComplexMatrix> {
    let k_users = rows.len();
    let dim = rows[0].ncols();
    assert!(power > 0.0, "power budget must be positive");
    assert!(
        rows.iter().all(|r| r.ncols() == dim),
        "all channel rows must share one length"
    );
    assert!(
        k_users <= dim,
        "block diagonalization needs at least as many inputs as users"
    );

    let mut w = ComplexMatrix::zeros(dim, k_users);
    for k in 0..k_users {
        let column = if k_users == 1 {
            matched_direction(&rows[0], dim)
        } else {
            let mut stacked = ComplexMatrix::zeros(k_users - 1, dim);
            let mut r = 0;
            for (j, row) in rows.iter().enumerate() {
                if j != k {
                    stacked.set_row(r, row);
                    r += 1;
                }
            }
            let null_basis = null_space(&stacked, rank_tol)?;
            if null_basis.ncols() == 0 {
                return Err(Error::RankDeficient { user: k });
            }
            let projected = &rows[k] * &null_basis; // 1 x null-dim
            if projected.norm() == 0.0 {
                // Zero-gain user: any null-space direction is interference
                // free; take the first basis vector for determinism.
                null_basis.column(0).into_owned()
            } else {
                let direction = projected.adjoint() / Complex64::from(projected.norm());
                &null_basis * direction
            }
        };
        w.set_column(k, &column);
    }

    let norm = w.norm();
    if norm > 0.0 {
        w *= Complex64::from(power.sqrt() / norm);
    }
    Ok(w)
}

fn matched_direction(row: &ComplexRow, dim: usize) -> ComplexVector {
    if row.norm() == 0.0 {
        let mut e = ComplexVector::zeros(dim);
        e[0] = Complex64::new(1.0, 0.0);
        e
    } else {
        row.adjoint() / Complex64::from(row.norm())
    }
}

/// Hybrid precoder of AP `ap_index`: phase-aligned analog stage, then BD on
/// the effective channels.
pub fn hybrid_precoder(
    channel_rows: &[ComplexRow],
    power: f64,
    ap_index: usize,
    rank_tol: f64,
) -> Result<AccessPrecoder> {
    let (analog, fallback_users) = build_analog(channel_rows);
    let effective: Vec<ComplexRow> =
        channel_rows.iter().map(|h| h * &analog).collect();
    let digital = bd_precoder(&effective, power, rank_tol)?;
    Ok(AccessPrecoder { analog, digital, ap_index, fallback_users })
}

/// Fully digital BD on the raw channel rows (one RF chain per antenna).
pub fn fd_bd_precoder(
    channel_rows: &[ComplexRow],
    power: f64,
    rank_tol: f64,
) -> Result<ComplexMatrix> {
    bd_precoder(channel_rows, power, rank_tol)
}

/// Unit-modulus matrix with i.i.d. uniform phases.
pub fn random_analog_precoder(
    rng: &mut RandomStream,
    n_antennas: usize,
    k_users: usize,
) -> ComplexMatrix {
    let scale = 1.0 / (n_antennas as f64).sqrt();
    ComplexMatrix::from_fn(n_antennas, k_users, |_, _| {
        Complex64::from_polar(scale, rng.uniform_phase())
    })
}

/// Hybrid precoder with a random analog stage (baseline): BD still runs on
/// the resulting effective channels.
pub fn random_hybrid_precoder(
    channel_rows: &[ComplexRow],
    power: f64,
    ap_index: usize,
    rank_tol: f64,
    rng: &mut RandomStream,
) -> Result<AccessPrecoder> {
    let analog = random_analog_precoder(rng, channel_rows[0].ncols(), channel_rows.len());
    let effective: Vec<ComplexRow> =
        channel_rows.iter().map(|h| h * &analog).collect();
    let digital = bd_precoder(&effective, power, rank_tol)?;
    Ok(AccessPrecoder { analog, digital, ap_index, fallback_users: Vec::new() })
}

/// Centralized fully-digital baseline: BD on the network-wide stacked rows
/// (dimension M * N_A per user), split back into per-AP blocks. `power` is
/// the network-wide budget; the blocks share one global scaling, since
/// per-block rescaling would break the null-space alignment across APs.
pub fn centralized_fd_precoders(
    channels: &[Vec<ComplexRow>],
    power: f64,
    rank_tol: f64,
) -> Result<Vec<ComplexMatrix>> {
    let k_users = channels.len();
    let m_aps = channels[0].len();
    let n_a = channels[0][0].ncols();
    let stacked: Vec<ComplexRow> = (0..k_users)
        .map(|k| {
            let mut row = ComplexRow::zeros(m_aps * n_a);
            for (m, block) in channels[k].iter().enumerate() {
                row.columns_mut(m * n_a, n_a).copy_from(block);
            }
            row
        })
        .collect();
    let w = bd_precoder(&stacked, power, rank_tol)?;
    Ok((0..m_aps).map(|m| w.rows(m * n_a, n_a).into_owned()).collect())
}

/// Evaluate the access link for composed per-AP precoders (N_A x K each).
///
/// User k's signal is the coherent sum over APs of its own beam; each
/// interferer contributes the squared magnitude of its own coherent AP sum.
pub fn access_link_eval(
    channels: &[Vec<ComplexRow>],
    composed_precoders: &[ComplexMatrix],
    noise_vars: &[f64],
) -> AccessLinkResult {
    let k_users = channels.len();
    let m_aps = composed_precoders.len();
    assert_eq!(noise_vars.len(), k_users, "one noise variance per user");
    assert!(channels.iter().all(|row| row.len() == m_aps));

    // gains[k][j]: coherent sum over APs of h_{k,m} w_{j,m}.
    let mut gains = vec![vec![Complex64::new(0.0, 0.0); k_users]; k_users];
    for k in 0..k_users {
        for m in 0..m_aps {
            let row = &channels[k][m] * &composed_precoders[m]; // 1 x K
            for j in 0..k_users {
                gains[k][j] += row[j];
            }
        }
    }

    let mut sinrs = Vec::with_capacity(k_users);
    let mut signal_powers = Vec::with_capacity(k_users);
    let mut interference_powers = Vec::with_capacity(k_users);
    let mut sum_rate = 0.0;
    for k in 0..k_users {
        let signal = abs2(gains[k][k]);
        let interference: f64 =
            (0..k_users).filter(|&j| j != k).map(|j| abs2(gains[k][j])).sum();
        let sinr = signal / (interference + noise_vars[k]);
        sum_rate += (1.0 + sinr).log2();
        sinrs.push(sinr);
        signal_powers.push(signal);
        interference_powers.push(interference);
    }

    AccessLinkResult { sinrs, sum_rate_bpshz: sum_rate, signal_powers, interference_powers }
}
