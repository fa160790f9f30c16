//! Scenario configuration: physical parameters, solver tolerances, and
//! Monte-Carlo controls, loadable from TOML with unknown keys rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, GeometryRanges};
use crate::error::Error;
use crate::socp::SolverOptions;
use crate::Result;

/// How to interpret `noise_dbm`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// The configured value is the per-receiver noise variance as-is.
    Fixed,
    /// The configured value is a density in dBm/Hz; the total bandwidth is
    /// added on top (both links use the full-band value, since the split is
    /// only known after beamforming).
    PsdPerHz,
}

/// All knobs of one simulation scenario. Defaults are the reference mmWave
/// cell-free setup: 8 users, 64-antenna arrays, 28 GHz carrier, 2 GHz band,
/// -174 dBm noise, LOS/NLOS path loss exponents 2.1 and 3.64.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub m_aps: usize,
    pub k_users: usize,
    /// Antennas per AP.
    pub n_a: usize,
    /// Antennas at the CPU.
    pub n_c: usize,
    pub p_access_dbm: f64,
    pub p_backhaul_dbm: f64,
    pub noise_dbm: f64,
    pub noise_model: NoiseModel,
    pub bandwidth_hz: f64,
    pub carrier_ghz: f64,
    pub alpha_los: f64,
    pub alpha_nlos: f64,
    pub n_nlos_paths: usize,
    pub los_only: bool,
    pub element_spacing_ratio: f64,
    /// AP-to-CPU distance bounds in meters.
    pub ap_cpu_distance_m: (f64, f64),
    /// User-to-AP-cluster distance bounds in meters.
    pub user_ap_distance_m: (f64, f64),
    pub trials: usize,
    pub seed: u64,
    /// Bisection width on the backhaul rate target, bits/s/Hz.
    pub eps_bisect: f64,
    /// Cone solver tolerance.
    pub socp_tol: f64,
    /// Relative singular-value threshold for numerical rank.
    pub rank_tol: f64,
    /// Fixed AP/user positions; when set, only fading varies across trials.
    pub topology_file: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            m_aps: 6,
            k_users: 8,
            n_a: 64,
            n_c: 64,
            p_access_dbm: 20.0,
            p_backhaul_dbm: 20.0,
            noise_dbm: -174.0,
            noise_model: NoiseModel::Fixed,
            bandwidth_hz: 2e9,
            carrier_ghz: 28.0,
            alpha_los: 2.1,
            alpha_nlos: 3.64,
            n_nlos_paths: 5,
            los_only: false,
            element_spacing_ratio: 0.5,
            ap_cpu_distance_m: (30.0, 50.0),
            user_ap_distance_m: (150.0, 200.0),
            trials: 100,
            seed: 1,
            eps_bisect: 1e-3,
            socp_tol: 1e-7,
            rank_tol: 1e-10,
            topology_file: None,
        }
    }
}

/// dBm to watts.
pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::Parse(format!("scenario config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_aps == 0 || self.k_users == 0 || self.n_a == 0 || self.n_c == 0 {
            return Err(Error::Config("counts must be at least 1".into()));
        }
        if self.k_users > self.n_a {
            return Err(Error::Config(format!(
                "access beamforming needs K <= N_A, got K={} N_A={}",
                self.k_users, self.n_a
            )));
        }
        if self.m_aps > self.n_c {
            return Err(Error::Config(format!(
                "backhaul needs one CPU RF chain per AP: M={} > N_C={}",
                self.m_aps, self.n_c
            )));
        }
        if self.bandwidth_hz <= 0.0 {
            return Err(Error::Config("bandwidth must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("at least one trial required".into()));
        }
        if self.eps_bisect <= 0.0 || self.socp_tol <= 0.0 || self.rank_tol <= 0.0 {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.element_spacing_ratio <= 0.0 {
            return Err(Error::Config("element spacing ratio must be positive".into()));
        }
        for (name, (lo, hi)) in [
            ("ap_cpu_distance_m", self.ap_cpu_distance_m),
            ("user_ap_distance_m", self.user_ap_distance_m),
        ] {
            if !(0.0 < lo && lo <= hi) {
                return Err(Error::Config(format!("{name} must satisfy 0 < min <= max")));
            }
        }
        self.channel_params().validate()
    }

    pub fn channel_params(&self) -> ChannelParams {
        ChannelParams {
            carrier_ghz: self.carrier_ghz,
            alpha_los: self.alpha_los,
            alpha_nlos: self.alpha_nlos,
            n_nlos_paths: self.n_nlos_paths,
            los_only: self.los_only,
        }
    }

    pub fn geometry_ranges(&self) -> GeometryRanges {
        GeometryRanges {
            ap_cpu: self.ap_cpu_distance_m,
            user_ap: self.user_ap_distance_m,
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            max_iterations: 500,
            tolerance: self.socp_tol,
            trace: false,
        }
    }

    pub fn access_power_w(&self) -> f64 {
        dbm_to_watt(self.p_access_dbm)
    }

    pub fn backhaul_power_w(&self) -> f64 {
        dbm_to_watt(self.p_backhaul_dbm)
    }

    /// Per-receiver noise variance in watts under the configured model.
    pub fn noise_variance_w(&self) -> f64 {
        match self.noise_model {
            NoiseModel::Fixed => dbm_to_watt(self.noise_dbm),
            NoiseModel::PsdPerHz => dbm_to_watt(self.noise_dbm + 10.0 * self.bandwidth_hz.log10()),
        }
    }
}
