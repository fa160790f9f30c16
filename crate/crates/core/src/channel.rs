//! mmWave channel generation for the access and backhaul links.
//!
//! Access channels follow the Saleh-Valenzuela model: an optional LOS path
//! (present with the UMi distance-dependent probability) plus a configurable
//! number of NLOS paths, each a complex gain times a ULA steering vector at an
//! independently drawn departure angle. Backhaul channels between the CPU and
//! the fixed APs are LOS-only rank-1 outer products of steering vectors, with
//! angles taken from the CPU-AP bearing.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::Error;
use crate::numerics::{ComplexMatrix, ComplexRow, RandomStream};
use crate::Result;

/// Physical channel parameters.
#[derive(Debug, Clone, Copy)]
pub struct ChannelParams {
    /// Carrier frequency in GHz.
    pub carrier_ghz: f64,
    /// Path loss exponent of LOS links.
    pub alpha_los: f64,
    /// Path loss exponent of NLOS links.
    pub alpha_nlos: f64,
    /// Number of NLOS paths per access channel.
    pub n_nlos_paths: usize,
    /// Drop all NLOS paths (coverage studies).
    pub los_only: bool,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            carrier_ghz: 28.0,
            alpha_los: 2.1,
            alpha_nlos: 3.64,
            n_nlos_paths: 5,
            los_only: false,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if self.carrier_ghz <= 0.0 {
            return Err(Error::Config(format!(
                "carrier frequency must be positive, got {} GHz",
                self.carrier_ghz
            )));
        }
        if self.alpha_los <= 0.0 || self.alpha_nlos <= 0.0 {
            return Err(Error::Config("path loss exponents must be positive".into()));
        }
        Ok(())
    }
}

/// AP/CPU/user placement and array geometry for one scenario.
#[derive(Debug, Clone)]
pub struct NetworkTopology {
    pub cpu_position: [f64; 2],
    pub ap_positions: Vec<[f64; 2]>,
    pub user_positions: Vec<[f64; 2]>,
    /// Antennas per AP (N_A).
    pub n_ap_antennas: usize,
    /// Antennas at the CPU (N_C).
    pub n_cpu_antennas: usize,
    /// Element spacing over wavelength (d_A / lambda).
    pub element_spacing_ratio: f64,
}

/// Distance bounds used when synthesizing or validating a topology, meters.
#[derive(Debug, Clone, Copy)]
pub struct GeometryRanges {
    pub ap_cpu: (f64, f64),
    pub user_ap: (f64, f64),
}

impl Default for GeometryRanges {
    fn default() -> Self {
        Self {
            ap_cpu: (30.0, 50.0),
            user_ap: (150.0, 200.0),
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Positions-only topology file schema.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyFile {
    cpu: [f64; 2],
    aps: Vec<[f64; 2]>,
    users: Vec<[f64; 2]>,
}

impl NetworkTopology {
    pub fn n_aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn n_users(&self) -> usize {
        self.user_positions.len()
    }

    pub fn ap_cpu_distance(&self, m: usize) -> f64 {
        dist(self.ap_positions[m], self.cpu_position)
    }

    pub fn user_ap_distance(&self, k: usize, m: usize) -> f64 {
        dist(self.user_positions[k], self.ap_positions[m])
    }

    pub fn ap_centroid(&self) -> [f64; 2] {
        let mut c = [0.0, 0.0];
        for p in &self.ap_positions {
            c[0] += p[0];
            c[1] += p[1];
        }
        let m = self.ap_positions.len() as f64;
        [c[0] / m, c[1] / m]
    }

    /// Backhaul angle pair for AP `m`: departure angle seen from the CPU
    /// array and arrival angle seen from the AP array, both folded into the
    /// front half-plane of the respective ULA.
    pub fn backhaul_angles(&self, m: usize) -> (f64, f64) {
        let ap = self.ap_positions[m];
        let cpu = self.cpu_position;
        let aod = fold_angle((ap[1] - cpu[1]).atan2(ap[0] - cpu[0]));
        let aoa = fold_angle((cpu[1] - ap[1]).atan2(cpu[0] - ap[0]));
        (aoa, aod)
    }

    /// Draw a topology: APs uniform on an annulus around the CPU, users
    /// uniform on an annulus around the AP centroid.
    pub fn synthesize(
        m_aps: usize,
        k_users: usize,
        n_ap_antennas: usize,
        n_cpu_antennas: usize,
        element_spacing_ratio: f64,
        ranges: GeometryRanges,
        rng: &mut RandomStream,
    ) -> Self {
        let cpu = [0.0, 0.0];
        let ap_positions: Vec<[f64; 2]> = (0..m_aps)
            .map(|_| annulus_point(cpu, ranges.ap_cpu, rng))
            .collect();
        let mut topo = Self {
            cpu_position: cpu,
            ap_positions,
            user_positions: Vec::new(),
            n_ap_antennas,
            n_cpu_antennas,
            element_spacing_ratio,
        };
        let centroid = topo.ap_centroid();
        topo.user_positions = (0..k_users)
            .map(|_| annulus_point(centroid, ranges.user_ap, rng))
            .collect();
        topo
    }

    /// Parse a positions-only topology file (TOML), attaching array geometry.
    pub fn from_toml_str(
        text: &str,
        n_ap_antennas: usize,
        n_cpu_antennas: usize,
        element_spacing_ratio: f64,
    ) -> Result<Self> {
        let file: TopologyFile =
            toml::from_str(text).map_err(|e| Error::Parse(format!("topology file: {e}")))?;
        Ok(Self {
            cpu_position: file.cpu,
            ap_positions: file.aps,
            user_positions: file.users,
            n_ap_antennas,
            n_cpu_antennas,
            element_spacing_ratio,
        })
    }

    /// Check counts and distance bounds. User distances are measured to the
    /// AP centroid: with APs spread around the CPU, per-AP distances cannot
    /// all fall in a band narrower than the AP spread.
    pub fn validate(&self, ranges: &GeometryRanges) -> Result<()> {
        if self.ap_positions.is_empty() || self.user_positions.is_empty() {
            return Err(Error::Config("topology needs at least one AP and one user".into()));
        }
        if self.n_ap_antennas == 0 || self.n_cpu_antennas == 0 {
            return Err(Error::Config("antenna counts must be at least 1".into()));
        }
        let tol = 1e-9;
        for m in 0..self.n_aps() {
            let d = self.ap_cpu_distance(m);
            if d < ranges.ap_cpu.0 - tol || d > ranges.ap_cpu.1 + tol {
                return Err(Error::Config(format!(
                    "AP {m} is {d:.2} m from the CPU, outside [{}, {}]",
                    ranges.ap_cpu.0, ranges.ap_cpu.1
                )));
            }
        }
        let centroid = self.ap_centroid();
        for (k, u) in self.user_positions.iter().enumerate() {
            let d = dist(*u, centroid);
            if d < ranges.user_ap.0 - tol || d > ranges.user_ap.1 + tol {
                return Err(Error::Config(format!(
                    "user {k} is {d:.2} m from the AP centroid, outside [{}, {}]",
                    ranges.user_ap.0, ranges.user_ap.1
                )));
            }
        }
        Ok(())
    }
}

fn annulus_point(center: [f64; 2], (r_min, r_max): (f64, f64), rng: &mut RandomStream) -> [f64; 2] {
    // Uniform over the annulus area.
    let r = rng.uniform(r_min * r_min, r_max * r_max).sqrt();
    let theta = rng.uniform_phase();
    [center[0] + r * theta.cos(), center[1] + r * theta.sin()]
}

/// Fold an arbitrary bearing into the ULA front half-plane [-pi/2, pi/2).
/// A ULA cannot distinguish front from back; only sin(angle) matters.
fn fold_angle(theta: f64) -> f64 {
    let a = theta.sin().asin();
    if a >= FRAC_PI_2 {
        FRAC_PI_2 - 1e-12
    } else {
        a
    }
}

/// Normalized ULA response: entry i is exp(j*2*pi*spacing*i*sin(angle))/sqrt(n).
///
/// Panics if `n` is zero.
pub fn ula_response(n: usize, angle: f64, spacing_ratio: f64) -> ComplexRow {
    assert!(n >= 1, "ula_response: array needs at least one element");
    let scale = 1.0 / (n as f64).sqrt();
    let step = std::f64::consts::TAU * spacing_ratio * angle.sin();
    ComplexRow::from_fn(n, |_, i| {
        Complex64::from_polar(scale, step * i as f64)
    })
}

/// Free-space mmWave path loss in dB at `distance_m` meters:
/// 32.4 + 20*log10(f_GHz) + 10*alpha*log10(d).
///
/// Panics on non-positive distance or frequency.
pub fn path_loss_db(carrier_ghz: f64, distance_m: f64, alpha: f64) -> f64 {
    assert!(carrier_ghz > 0.0, "path_loss_db: carrier must be positive");
    assert!(distance_m > 0.0, "path_loss_db: distance must be positive");
    32.4 + 20.0 * carrier_ghz.log10() + 10.0 * alpha * distance_m.log10()
}

/// Linear gain variance corresponding to the path loss: 10^(-0.1*kappa).
pub fn path_gain_variance(carrier_ghz: f64, distance_m: f64, alpha: f64) -> f64 {
    10f64.powf(-0.1 * path_loss_db(carrier_ghz, distance_m, alpha))
}

/// LOS probability at distance `d` meters, UMi model:
/// min(20/d, 1)*(1 - exp(-d/39)) + exp(-d/39).
pub fn los_probability(distance_m: f64) -> f64 {
    assert!(distance_m > 0.0, "los_probability: distance must be positive");
    let e = (-distance_m / 39.0).exp();
    (20.0 / distance_m).min(1.0) * (1.0 - e) + e
}

/// One drawn access channel row plus the bookkeeping the realization records.
#[derive(Debug, Clone)]
pub struct AccessChannelDraw {
    /// 1 x N_A channel row.
    pub row: ComplexRow,
    /// Whether the LOS path was present in this draw.
    pub los: bool,
    /// LOS departure angle, when present.
    pub aod_los: Option<f64>,
    /// NLOS departure angles.
    pub aods_nlos: Vec<f64>,
}

/// Draw one Saleh-Valenzuela access channel for a user-AP pair at the given
/// distance. The LOS term is present with the UMi probability and scaled by
/// sqrt(N_A); each of the L NLOS terms is scaled by sqrt(N_A/L). Gains use the
/// LOS/NLOS path loss exponents respectively; all departure angles are uniform
/// on the front half-plane.
pub fn gen_access_channel(
    n_ap_antennas: usize,
    spacing_ratio: f64,
    params: &ChannelParams,
    distance_m: f64,
    rng: &mut RandomStream,
) -> AccessChannelDraw {
    let n = n_ap_antennas;
    let mut row = ComplexRow::zeros(n);

    let los = rng.bernoulli(los_probability(distance_m));
    let mut aod_los = None;
    if los {
        let var = path_gain_variance(params.carrier_ghz, distance_m, params.alpha_los);
        let gain = rng.sample_cn(var) * (n as f64).sqrt();
        let aod = rng.uniform_angle();
        row += ula_response(n, aod, spacing_ratio) * gain;
        aod_los = Some(aod);
    }

    let l = if params.los_only { 0 } else { params.n_nlos_paths };
    let mut aods_nlos = Vec::with_capacity(l);
    if l > 0 {
        let var = path_gain_variance(params.carrier_ghz, distance_m, params.alpha_nlos);
        let scale = (n as f64 / l as f64).sqrt();
        for _ in 0..l {
            let gain = rng.sample_cn(var) * scale;
            let aod = rng.uniform_angle();
            row += ula_response(n, aod, spacing_ratio) * gain;
            aods_nlos.push(aod);
        }
    }

    AccessChannelDraw { row, los, aod_los, aods_nlos }
}

/// Rank-1 LOS backhaul channel sqrt(N_C*N_A) * zeta * a^H(aoa) * a(aod),
/// of size N_A x N_C.
pub fn backhaul_channel(
    n_ap_antennas: usize,
    n_cpu_antennas: usize,
    spacing_ratio: f64,
    aoa: f64,
    aod: f64,
    zeta: Complex64,
) -> ComplexMatrix {
    let rx = ula_response(n_ap_antennas, aoa, spacing_ratio);
    let tx = ula_response(n_cpu_antennas, aod, spacing_ratio);
    let amp = zeta * ((n_cpu_antennas * n_ap_antennas) as f64).sqrt();
    rx.adjoint() * tx * amp
}

/// Draw the backhaul channel of AP `m`: angles come from the CPU-AP bearing,
/// the gain from the LOS path loss at the AP-CPU distance.
pub fn gen_backhaul_channel(
    topology: &NetworkTopology,
    params: &ChannelParams,
    m: usize,
    rng: &mut RandomStream,
) -> (ComplexMatrix, f64, f64) {
    let (aoa, aod) = topology.backhaul_angles(m);
    let var = path_gain_variance(
        params.carrier_ghz,
        topology.ap_cpu_distance(m),
        params.alpha_los,
    );
    let zeta = rng.sample_cn(var);
    let h = backhaul_channel(
        topology.n_ap_antennas,
        topology.n_cpu_antennas,
        topology.element_spacing_ratio,
        aoa,
        aod,
        zeta,
    );
    (h, aoa, aod)
}

/// One Monte-Carlo draw of every access and backhaul channel in the network.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// access[k][m] is the 1 x N_A row from AP m to user k.
    pub access: Vec<Vec<ComplexRow>>,
    /// backhaul[m] is the N_A x N_C matrix from the CPU to AP m.
    pub backhaul: Vec<ComplexMatrix>,
    /// los_flags[k][m] records whether the LOS path existed in this draw.
    pub los_flags: Vec<Vec<bool>>,
    pub angles: AngleRecord,
}

/// Every angle drawn or derived for one realization, radians in [-pi/2, pi/2).
#[derive(Debug, Clone, Default)]
pub struct AngleRecord {
    pub access_aod_los: Vec<Vec<Option<f64>>>,
    pub access_aod_nlos: Vec<Vec<Vec<f64>>>,
    pub backhaul_aoa: Vec<f64>,
    pub backhaul_aod: Vec<f64>,
}

impl AngleRecord {
    /// All recorded angles as one iterator (for invariant checks).
    pub fn iter_all(&self) -> impl Iterator<Item = f64> + '_ {
        self.access_aod_los
            .iter()
            .flatten()
            .flatten()
            .copied()
            .chain(self.access_aod_nlos.iter().flatten().flatten().copied())
            .chain(self.backhaul_aoa.iter().copied())
            .chain(self.backhaul_aod.iter().copied())
    }
}

/// Draw all K x M access channels and M backhaul channels for a topology.
pub fn gen_realization(
    topology: &NetworkTopology,
    params: &ChannelParams,
    rng: &mut RandomStream,
) -> ChannelRealization {
    let (m_aps, k_users) = (topology.n_aps(), topology.n_users());
    let mut access = Vec::with_capacity(k_users);
    let mut los_flags = Vec::with_capacity(k_users);
    let mut angles = AngleRecord::default();

    for k in 0..k_users {
        let mut row_k = Vec::with_capacity(m_aps);
        let mut flags_k = Vec::with_capacity(m_aps);
        let mut aod_los_k = Vec::with_capacity(m_aps);
        let mut aod_nlos_k = Vec::with_capacity(m_aps);
        for m in 0..m_aps {
            let draw = gen_access_channel(
                topology.n_ap_antennas,
                topology.element_spacing_ratio,
                params,
                topology.user_ap_distance(k, m),
                rng,
            );
            row_k.push(draw.row);
            flags_k.push(draw.los);
            aod_los_k.push(draw.aod_los);
            aod_nlos_k.push(draw.aods_nlos);
        }
        access.push(row_k);
        los_flags.push(flags_k);
        angles.access_aod_los.push(aod_los_k);
        angles.access_aod_nlos.push(aod_nlos_k);
    }

    let mut backhaul = Vec::with_capacity(m_aps);
    for m in 0..m_aps {
        let (h, aoa, aod) = gen_backhaul_channel(topology, params, m, rng);
        backhaul.push(h);
        angles.backhaul_aoa.push(aoa);
        angles.backhaul_aod.push(aod);
    }

    ChannelRealization { access, backhaul, los_flags, angles }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::svd;

    fn test_topology(m_aps: usize, k_users: usize, n_a: usize, n_c: usize) -> NetworkTopology {
        let mut rng = RandomStream::from_seed(100);
        NetworkTopology::synthesize(m_aps, k_users, n_a, n_c, 0.5, GeometryRanges::default(), &mut rng)
    }

    #[test]
    fn ula_single_element_is_one() {
        let a = ula_response(1, 0.83, 0.5);
        assert_eq!(a[0], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn ula_broadside_has_zero_phase() {
        let a = ula_response(2, 0.0, 0.5);
        let s = 1.0 / 2f64.sqrt();
        assert!((a[0] - Complex64::new(s, 0.0)).norm() < 1e-15);
        assert!((a[1] - Complex64::new(s, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn ula_endfire_alternates_sign() {
        // Phase step at pi/2 with half-wavelength spacing is exactly pi.
        let a = ula_response(2, FRAC_PI_2, 0.5);
        let s = 1.0 / 2f64.sqrt();
        assert!((a[0] - Complex64::new(s, 0.0)).norm() < 1e-12);
        assert!((a[1] - Complex64::new(-s, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn ula_is_unit_norm() {
        let mut rng = RandomStream::from_seed(2);
        for _ in 0..200 {
            let n = 1 + (rng.uniform(0.0, 128.0) as usize);
            let a = ula_response(n, rng.uniform_angle(), 0.5);
            assert!((a.norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    #[should_panic(expected = "at least one element")]
    fn ula_rejects_empty_array() {
        ula_response(0, 0.0, 0.5);
    }

    #[test]
    fn path_loss_reference_points() {
        assert!((path_loss_db(1.0, 1.0, 3.0) - 32.4).abs() < 1e-12);
        // 32.4 + 28.944 + 42.0
        assert!((path_loss_db(28.0, 100.0, 2.1) - 103.344).abs() < 5e-3);
        let gap = path_loss_db(28.0, 100.0, 3.64) - path_loss_db(28.0, 100.0, 2.1);
        assert!((gap - 30.8).abs() < 1e-9);
    }

    #[test]
    fn path_loss_monotone_in_distance_and_exponent() {
        let mut prev = f64::MIN;
        for i in 1..100 {
            let d = 1.0 + i as f64;
            let v = path_loss_db(28.0, d, 2.1);
            assert!(v > prev);
            prev = v;
        }
        for i in 0..50 {
            let alpha = 1.5 + 0.1 * i as f64;
            assert!(path_loss_db(28.0, 50.0, alpha + 0.1) > path_loss_db(28.0, 50.0, alpha));
        }
    }

    #[test]
    #[should_panic(expected = "distance must be positive")]
    fn path_loss_rejects_zero_distance() {
        path_loss_db(28.0, 0.0, 2.1);
    }

    #[test]
    fn los_probability_reference_points() {
        assert_eq!(los_probability(10.0), 1.0);
        assert!((los_probability(39.0) - 0.6920).abs() < 1e-4);
        assert!(los_probability(1e6) <= 1e-4);
    }

    #[test]
    fn los_probability_nonincreasing_past_20m() {
        let mut prev = los_probability(20.0);
        for i in 1..2000 {
            let p = los_probability(20.0 + i as f64);
            assert!(p <= prev + 1e-15);
            prev = p;
        }
    }

    #[test]
    fn access_channel_single_los_path_is_rank_one() {
        let params = ChannelParams { los_only: true, ..Default::default() };
        let mut rng = RandomStream::from_seed(5);
        // d = 10 m forces the LOS probability to exactly 1.
        let draw = gen_access_channel(16, 0.5, &params, 10.0, &mut rng);
        assert!(draw.los);
        assert!(draw.aods_nlos.is_empty());
        let aod = draw.aod_los.unwrap();
        // Row must be a scalar multiple of the steering vector.
        let steer = ula_response(16, aod, 0.5);
        let gain = draw.row[0] / steer[0];
        let rebuilt = steer * gain;
        assert!((rebuilt - &draw.row).norm() <= 1e-12 * draw.row.norm());
        // sqrt(N_A) * |gain| accounts for the full norm.
        assert!((draw.row.norm() - gain.norm()).abs() <= 1e-12 * draw.row.norm());
    }

    #[test]
    fn access_channel_mean_energy_matches_model() {
        // With LOS forced on (d <= 20) and L = 5, the expected squared norm is
        // N_A * (10^(-0.1*kappa_los) + 10^(-0.1*kappa_nlos)).
        let params = ChannelParams::default();
        let (n_a, d) = (16, 10.0);
        let expected = n_a as f64
            * (path_gain_variance(params.carrier_ghz, d, params.alpha_los)
                + path_gain_variance(params.carrier_ghz, d, params.alpha_nlos));
        let mut rng = RandomStream::from_seed(77);
        let trials = 10_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let draw = gen_access_channel(n_a, 0.5, &params, d, &mut rng);
            assert!(draw.los);
            acc += draw.row.norm_squared();
        }
        let mean = acc / trials as f64;
        assert!(
            (mean - expected).abs() <= 0.05 * expected,
            "mean {mean:.3e} vs expected {expected:.3e}"
        );
    }

    #[test]
    fn access_channel_no_paths_is_zero() {
        let params = ChannelParams { n_nlos_paths: 0, ..Default::default() };
        let mut rng = RandomStream::from_seed(9);
        // At 1e6 m the LOS probability is ~0, so every draw is the zero row.
        for _ in 0..50 {
            let draw = gen_access_channel(8, 0.5, &params, 1e6, &mut rng);
            if !draw.los {
                assert_eq!(draw.row.norm(), 0.0);
            }
        }
    }

    #[test]
    fn access_channel_deterministic_under_seed() {
        let params = ChannelParams::default();
        let mut a = RandomStream::substream(3, 4);
        let mut b = RandomStream::substream(3, 4);
        let da = gen_access_channel(32, 0.5, &params, 170.0, &mut a);
        let db = gen_access_channel(32, 0.5, &params, 170.0, &mut b);
        assert_eq!(da.row, db.row);
        assert_eq!(da.los, db.los);
    }

    #[test]
    fn backhaul_channel_is_rank_one() {
        let mut rng = RandomStream::from_seed(21);
        let h = backhaul_channel(16, 32, 0.5, 0.3, -0.7, rng.sample_cn(1e-10));
        let s = svd(&h).unwrap();
        assert!(s.s[1] <= 1e-10 * s.s[0]);
        assert_eq!(s.rank(), 1);
    }

    #[test]
    fn backhaul_channel_norm_scales_with_gain() {
        let zeta = Complex64::new(3e-6, -4e-6);
        let (n_a, n_c) = (16, 64);
        let h = backhaul_channel(n_a, n_c, 0.5, 0.5, 0.2, zeta);
        let expected = ((n_a * n_c) as f64).sqrt() * zeta.norm();
        assert!((h.norm() - expected).abs() <= 1e-9 * expected);
        // Every entry has modulus |zeta|.
        for z in h.iter() {
            assert!((z.norm() - zeta.norm()).abs() <= 1e-12 * zeta.norm());
        }
    }

    #[test]
    fn backhaul_channel_unit_gain_singular_value() {
        let (n_a, n_c) = (8, 16);
        let h = backhaul_channel(n_a, n_c, 0.5, -0.4, 1.1, Complex64::new(1.0, 0.0));
        let s = svd(&h).unwrap();
        assert!((s.s[0] - ((n_a * n_c) as f64).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn realization_has_expected_shape_and_angles() {
        let topo = test_topology(3, 4, 8, 16);
        let params = ChannelParams::default();
        let mut rng = RandomStream::substream(1, 0);
        let r = gen_realization(&topo, &params, &mut rng);
        assert_eq!(r.access.len(), 4);
        assert_eq!(r.access[0].len(), 3);
        assert_eq!(r.access[0][0].ncols(), 8);
        assert_eq!(r.backhaul.len(), 3);
        assert_eq!(r.backhaul[0].nrows(), 8);
        assert_eq!(r.backhaul[0].ncols(), 16);
        for a in r.angles.iter_all() {
            assert!((-FRAC_PI_2..FRAC_PI_2).contains(&a), "angle {a} out of range");
        }
    }

    #[test]
    fn realization_deterministic_per_substream() {
        let topo = test_topology(2, 3, 8, 16);
        let params = ChannelParams::default();
        let ra = gen_realization(&topo, &params, &mut RandomStream::substream(11, 7));
        let rb = gen_realization(&topo, &params, &mut RandomStream::substream(11, 7));
        assert_eq!(ra.access, rb.access);
        assert_eq!(ra.backhaul, rb.backhaul);
        assert_eq!(ra.los_flags, rb.los_flags);
    }

    #[test]
    fn synthesized_topology_validates() {
        let topo = test_topology(6, 8, 64, 64);
        topo.validate(&GeometryRanges::default()).unwrap();
    }

    #[test]
    fn validation_rejects_out_of_range_ap() {
        let mut topo = test_topology(2, 2, 8, 8);
        topo.ap_positions[0] = [500.0, 0.0];
        let err = topo.validate(&GeometryRanges::default()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn topology_file_roundtrip() {
        let text = r#"
            cpu = [0.0, 0.0]
            aps = [[35.0, 0.0], [0.0, 40.0]]
            users = [[180.0, 20.0]]
        "#;
        let topo = NetworkTopology::from_toml_str(text, 8, 16, 0.5).unwrap();
        assert_eq!(topo.n_aps(), 2);
        assert_eq!(topo.n_users(), 1);
        assert!((topo.ap_cpu_distance(0) - 35.0).abs() < 1e-12);

        let bad = "cpu = [0.0, 0.0]\naps = []\nusers = []\nextra = 1\n";
        assert!(NetworkTopology::from_toml_str(bad, 8, 16, 0.5).is_err());
    }
}
