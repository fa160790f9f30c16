//! Max-min rate optimization of the wireless backhaul.
//!
//! The CPU transmits one stream per AP through a hybrid beamformer. The
//! analog stage is fixed from geometry: CPU columns steer at each AP's
//! departure angle and each AP combines with the steering vector of its
//! arrival angle. That collapses the problem to the digital precoder `F`,
//! optimized for the worst per-AP SINR by bisection on a common rate target
//! `t`; each candidate `t` is a second-order cone feasibility problem solved
//! through [`crate::socp`].
//!
//! Feasibility at a given `t` is decided by minimizing a slack margin added
//! to every SINR cone: the problem is always strictly feasible in the margin,
//! the optimal margin is negative exactly when the rate target is achievable,
//! and the sign test inherits the solver tolerance.

use num_complex::Complex64;

use crate::channel::{ula_response, NetworkTopology};
use crate::error::Error;
use crate::numerics::{abs2, ComplexMatrix, ComplexRow};
use crate::socp::{self, SocpProblem, SolverOptions};
use crate::Result;

/// Inputs of the digital-precoder stage: effective rows `b_m` (combiner times
/// channel times analog precoder), per-AP noise variances, and the CPU power
/// budget in watts.
#[derive(Debug, Clone)]
pub struct BackhaulProblem {
    pub effective_rows: Vec<ComplexRow>,
    pub noise_vars: Vec<f64>,
    pub power_budget: f64,
}

impl BackhaulProblem {
    fn check(&self) {
        let m = self.effective_rows.len();
        assert_eq!(self.noise_vars.len(), m, "noise variances must match rows");
        assert!(self.power_budget > 0.0, "power budget must be positive");
        assert!(self.noise_vars.iter().all(|&v| v > 0.0), "noise variances must be positive");
        for row in &self.effective_rows {
            assert_eq!(row.ncols(), m, "effective rows must be 1 x M");
        }
    }
}

/// Digital precoder and rate target found by the bisection.
#[derive(Debug, Clone)]
pub struct MaxMinOutcome {
    /// M x M digital precoder, columns phase-rotated so `b_m f_m` is real
    /// nonnegative, scaled to satisfy the power budget.
    pub digital_precoder: ComplexMatrix,
    /// Largest rate target proven feasible, bits/s/Hz.
    pub t_star: f64,
    /// Per-AP SINRs achieved by the returned precoder.
    pub sinrs: Vec<f64>,
    /// Set when no probed target was feasible (e.g. a dead channel); the
    /// precoder is then all zeros.
    pub degenerate: bool,
}

/// Full backhaul design: analog stages plus the bisection outcome.
#[derive(Debug, Clone)]
pub struct BackhaulSolution {
    /// N_C x M analog precoder at the CPU, unit-modulus entries.
    pub analog_precoder: ComplexMatrix,
    /// Per-AP unit-modulus combining rows, 1 x N_A.
    pub combiners: Vec<ComplexRow>,
    pub outcome: MaxMinOutcome,
}

/// CPU analog precoder: column m is the conjugated steering vector of the
/// departure angle toward AP m. Requires one RF chain per AP, so M <= N_C.
pub fn build_cpu_analog(
    angles_of_departure: &[f64],
    n_cpu_antennas: usize,
    spacing_ratio: f64,
) -> Result<ComplexMatrix> {
    let m = angles_of_departure.len();
    if m > n_cpu_antennas {
        return Err(Error::Config(format!(
            "backhaul needs one CPU RF chain per AP: {m} APs > {n_cpu_antennas} antennas"
        )));
    }
    let mut f_rf = ComplexMatrix::zeros(n_cpu_antennas, m);
    for (j, &aod) in angles_of_departure.iter().enumerate() {
        f_rf.set_column(j, &ula_response(n_cpu_antennas, aod, spacing_ratio).adjoint());
    }
    Ok(f_rf)
}

/// Per-AP combining rows: AP m points its array at the arrival angle from
/// the CPU.
pub fn build_ap_combiners(
    angles_of_arrival: &[f64],
    n_ap_antennas: usize,
    spacing_ratio: f64,
) -> Vec<ComplexRow> {
    angles_of_arrival
        .iter()
        .map(|&aoa| ula_response(n_ap_antennas, aoa, spacing_ratio))
        .collect()
}

/// Effective rows b_m = combiner_m * H_m * F_rf, each 1 x M.
pub fn effective_rows(
    channels: &[ComplexMatrix],
    f_rf: &ComplexMatrix,
    combiners: &[ComplexRow],
) -> Vec<ComplexRow> {
    assert_eq!(channels.len(), combiners.len(), "one combiner per channel");
    channels
        .iter()
        .zip(combiners.iter())
        .map(|(h, w)| {
            assert_eq!(w.ncols(), h.nrows(), "combiner length must match channel rows");
            assert_eq!(h.ncols(), f_rf.nrows(), "channel cols must match analog rows");
            w * h * f_rf
        })
        .collect()
}

/// Per-AP SINRs of a digital precoder against the effective rows:
/// |b_m f_m|^2 / (sum_{n != m} |b_m f_n|^2 + noise_m).
pub fn backhaul_sinrs(problem: &BackhaulProblem, f_bb: &ComplexMatrix) -> Vec<f64> {
    let m = problem.effective_rows.len();
    (0..m)
        .map(|i| {
            let b = &problem.effective_rows[i];
            let products = b * f_bb; // 1 x M row of b_i f_n
            let signal = abs2(products[i]);
            let interference: f64 = (0..m).filter(|&n| n != i).map(|n| abs2(products[n])).sum();
            signal / (interference + problem.noise_vars[i])
        })
        .collect()
}

/// Per-AP SINRs computed from raw channels and both beamforming stages,
/// including the combiner norm in the noise term. This is the direct
/// received-signal route, independent of the effective-row shortcut.
pub fn backhaul_sinrs_from_channels(
    channels: &[ComplexMatrix],
    combiners: &[ComplexRow],
    f_rf: &ComplexMatrix,
    f_bb: &ComplexMatrix,
    noise_vars: &[f64],
) -> Vec<f64> {
    let m = channels.len();
    (0..m)
        .map(|i| {
            let row = &combiners[i] * &channels[i] * f_rf * f_bb;
            let signal = abs2(row[i]);
            let interference: f64 = (0..m).filter(|&n| n != i).map(|n| abs2(row[n])).sum();
            signal / (interference + combiners[i].norm_squared() * noise_vars[i])
        })
        .collect()
}

/// Margin by which constraints may overshoot and still count as feasible.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-7;

/// Which scalar the auxiliary variable plays in the cone program: the power
/// form minimizes the norm of the precoder under hard SINR cones (sharp
/// feasible/infeasible discrimination by comparing against the budget); the
/// margin form minimizes a slack added to every SINR cone and is always
/// strictly feasible, so its optimal sign certifies infeasibility even when
/// the SINR set itself is empty.
#[derive(Clone, Copy, PartialEq)]
enum AuxRole {
    PowerRadius,
    SlackMargin,
}

/// Cone program shared by both formulations. Variables are the stacked
/// re/im parts of F scaled by 1/sqrt(P), plus one auxiliary scalar.
fn build_cone_program(problem: &BackhaulProblem, t: f64, role: AuxRole) -> SocpProblem {
    let m = problem.effective_rows.len();
    let n = 2 * m * m + 1;
    let sqrt_p = problem.power_budget.sqrt();
    // sqrt(1 + 1/(2^t - 1)); exp_m1 keeps precision for small targets.
    let amplify = (1.0 + 1.0 / (t * std::f64::consts::LN_2).exp_m1()).sqrt();

    let mut cone_dims = Vec::with_capacity(m + 1);
    let rows_total = m * (2 * m + 2) + (2 * m * m + 1);
    let mut g = nalgebra::DMatrix::<f64>::zeros(rows_total, n);
    let mut h = nalgebra::DVector::<f64>::zeros(rows_total);
    let aux_col = 2 * m * m;

    // Writes -scale * (complex row functional) into two G rows: the real part
    // into `row` and, when `with_imag` is set, the imaginary part below it.
    let write_products = |g: &mut nalgebra::DMatrix<f64>,
                          row: usize,
                          coeffs: &ComplexRow,
                          block: usize,
                          scale: f64,
                          with_imag: bool| {
        for j in 0..coeffs.ncols() {
            let c = coeffs[j];
            let col = block * 2 * m + 2 * j;
            g[(row, col)] -= scale * c.re;
            g[(row, col + 1)] += scale * c.im;
            if with_imag {
                g[(row + 1, col)] -= scale * c.im;
                g[(row + 1, col + 1)] -= scale * c.re;
            }
        }
    };

    let mut row = 0;
    for i in 0..m {
        let b = &problem.effective_rows[i];
        let sigma = problem.noise_vars[i].sqrt();
        let scale = 1.0 / (sqrt_p * b.norm()).max(sigma);
        cone_dims.push(2 * m + 2);

        // Cone head: amplified real part of b_i f_i (plus the slack in the
        // margin form).
        write_products(&mut g, row, b, i, amplify * sqrt_p * scale, false);
        if role == AuxRole::SlackMargin {
            g[(row, aux_col)] = -1.0;
        }
        row += 1;
        // Norm body: all products b_i f_n, then the noise standard deviation.
        for block in 0..m {
            write_products(&mut g, row, b, block, sqrt_p * scale, true);
            row += 2;
        }
        h[row] = sigma * scale;
        row += 1;
    }

    // Power cone over the normalized precoder entries: the head is the fixed
    // unit budget, or the radius variable being minimized.
    cone_dims.push(2 * m * m + 1);
    match role {
        AuxRole::PowerRadius => g[(row, aux_col)] = -1.0,
        AuxRole::SlackMargin => h[row] = 1.0,
    }
    row += 1;
    for i in 0..2 * m * m {
        g[(row + i, i)] = -1.0;
    }

    let mut c = nalgebra::DVector::zeros(n);
    c[aux_col] = 1.0;
    SocpProblem { c, g, h, cone_dims }
}

/// Extract F from solver variables, pin column phases so b_m f_m is real
/// nonnegative, and spend the whole budget (a common scaling moves signal and
/// interference together, so every SINR is nondecreasing in it).
fn extract_precoder(
    problem: &BackhaulProblem,
    x: &nalgebra::DVector<f64>,
) -> ComplexMatrix {
    let m = problem.effective_rows.len();
    let sqrt_p = problem.power_budget.sqrt();
    let mut f_bb = ComplexMatrix::from_fn(m, m, |j, col| {
        Complex64::new(x[col * 2 * m + 2 * j], x[col * 2 * m + 2 * j + 1]) * sqrt_p
    });
    for i in 0..m {
        let prod = (&problem.effective_rows[i] * f_bb.column(i))[0];
        if prod.norm() > 0.0 {
            let rot = (prod / prod.norm()).conj();
            for j in 0..m {
                f_bb[(j, i)] *= rot;
            }
        }
    }
    let used = f_bb.norm_squared();
    if used > 0.0 {
        f_bb *= Complex64::from((problem.power_budget / used).sqrt());
    }
    f_bb
}

/// The objective scalars of both formulations are modeling devices; the
/// contract is the SINR itself, so accept only precoders whose achieved
/// SINRs back the claimed target.
fn verified(problem: &BackhaulProblem, f_bb: &ComplexMatrix, t: f64) -> bool {
    let floor = (t * std::f64::consts::LN_2).exp_m1() * (1.0 - FEASIBILITY_TOLERANCE);
    backhaul_sinrs(problem, f_bb).iter().all(|&s| s >= floor)
}

/// Test whether rate target `t` (bits/s/Hz) is achievable and return a
/// satisfying digital precoder if so.
///
/// The primary route minimizes the transmit power needed for the target and
/// compares it against the budget; required power varies first-order in `t`,
/// so the decision stays sharp even at very high SNR where constraint slacks
/// flatten out. When that subproblem breaks down (e.g. the SINR set itself is
/// empty beyond the interference-limited ceiling), the slack-margin form
/// settles the question: it is always strictly feasible and its optimal value
/// is positive exactly on infeasible targets.
///
/// Returns `Ok(None)` when the target is certified infeasible at
/// [`FEASIBILITY_TOLERANCE`]; `Err` is reserved for solver breakdown, which
/// callers must treat differently from infeasibility.
pub fn socp_feasible(
    problem: &BackhaulProblem,
    t: f64,
    options: &SolverOptions,
) -> Result<Option<ComplexMatrix>> {
    problem.check();
    assert!(t > 0.0, "rate target must be positive");

    match socp::solve(&build_cone_program(problem, t, AuxRole::PowerRadius), options) {
        Ok(solution) => {
            let radius = solution.primal_objective; // ||F|| / sqrt(P) at optimum
            if radius > 1.0 + FEASIBILITY_TOLERANCE {
                return Ok(None);
            }
            let f_bb = extract_precoder(problem, &solution.x);
            Ok(verified(problem, &f_bb, t).then_some(f_bb))
        }
        Err(_) => {
            // Power minimization has no feasible point at all when t exceeds
            // the interference-limited ceiling; fall back to the margin form
            // for a certificate.
            let solution =
                socp::solve(&build_cone_program(problem, t, AuxRole::SlackMargin), options)?;
            let margin = solution.primal_objective;
            if margin > FEASIBILITY_TOLERANCE {
                return Ok(None);
            }
            let f_bb = extract_precoder(problem, &solution.x);
            if verified(problem, &f_bb, t) {
                return Ok(Some(f_bb));
            }
            if margin > -FEASIBILITY_TOLERANCE {
                // Not strictly feasible beyond tolerance and no verifiable
                // point: infeasible at tolerance.
                return Ok(None);
            }
            Err(Error::Numerical(format!(
                "backhaul feasibility at t = {t}: margin {margin:e} claims slack but no \
                 verifiable precoder was produced"
            )))
        }
    }
}

/// Rate-target upper bound that ignores interference: the best row SNR at
/// full power.
pub fn bisection_upper_bound(problem: &BackhaulProblem) -> f64 {
    let best = problem
        .effective_rows
        .iter()
        .zip(problem.noise_vars.iter())
        .map(|(b, &v)| problem.power_budget * b.norm_squared() / v)
        .fold(0.0f64, f64::max);
    (1.0 + best).log2()
}

/// Maximize the minimum backhaul rate by bisection on the target `t`.
///
/// Returns the last feasible precoder with `t_star` within `eps` of the
/// supremum. If no probed target is feasible the outcome is the degenerate
/// all-zeros precoder with `t_star = 0` and the `degenerate` flag set.
pub fn maxmin_bisection(
    problem: &BackhaulProblem,
    t_min: f64,
    t_max: f64,
    eps: f64,
    options: &SolverOptions,
) -> Result<MaxMinOutcome> {
    problem.check();
    assert!(eps > 0.0, "bisection tolerance must be positive");
    assert!(t_max > t_min && t_min >= 0.0, "bisection needs t_max > t_min >= 0");
    let m = problem.effective_rows.len();

    let mut lo = t_min;
    let mut hi = t_max;
    let mut best: Option<(f64, ComplexMatrix)> = None;
    let mut lowest_infeasible = f64::INFINITY;

    while hi - lo >= eps {
        let t = 0.5 * (lo + hi);
        match socp_feasible(problem, t, options)? {
            Some(f_bb) => {
                // Feasibility is monotone in t; a success above a recorded
                // failure would mean the solver misclassified one of them.
                debug_assert!(
                    t <= lowest_infeasible,
                    "feasible at {t} above infeasible {lowest_infeasible}"
                );
                best = Some((t, f_bb));
                lo = t;
            }
            None => {
                lowest_infeasible = lowest_infeasible.min(t);
                hi = t;
            }
        }
    }

    Ok(match best {
        Some((t_star, f_bb)) => {
            let sinrs = backhaul_sinrs(problem, &f_bb);
            MaxMinOutcome { digital_precoder: f_bb, t_star, sinrs, degenerate: false }
        }
        None => MaxMinOutcome {
            digital_precoder: ComplexMatrix::zeros(m, m),
            t_star: 0.0,
            sinrs: vec![0.0; m],
            degenerate: true,
        },
    })
}

/// Per-node backhaul rates at a bandwidth split, bits/s.
#[derive(Debug, Clone)]
pub struct BackhaulRates {
    pub per_node: Vec<f64>,
    /// The effective backhaul rate: every AP must receive its full stream.
    pub min: f64,
}

/// Rates (1 - eta) * B * log2(1 + SINR) for each node and their minimum.
pub fn backhaul_rates(sinrs: &[f64], bandwidth_hz: f64, eta: f64) -> BackhaulRates {
    assert!(eta > 0.0 && eta <= 1.0, "eta must lie in (0, 1]");
    let per_node: Vec<f64> = sinrs
        .iter()
        .map(|&s| (1.0 - eta) * bandwidth_hz * (1.0 + s).log2())
        .collect();
    let min = per_node.iter().cloned().fold(f64::INFINITY, f64::min);
    BackhaulRates { per_node, min }
}

/// End-to-end backhaul design from channels: fixed analog stages from the
/// topology bearings, then the max-min digital precoder.
pub fn optimize_backhaul(
    topology: &NetworkTopology,
    channels: &[ComplexMatrix],
    noise_vars: &[f64],
    power_budget: f64,
    eps_bisect: f64,
    options: &SolverOptions,
) -> Result<BackhaulSolution> {
    let m = topology.n_aps();
    assert_eq!(channels.len(), m, "one backhaul channel per AP");
    let (aoas, aods): (Vec<f64>, Vec<f64>) =
        (0..m).map(|i| topology.backhaul_angles(i)).unzip();

    let analog_precoder =
        build_cpu_analog(&aods, topology.n_cpu_antennas, topology.element_spacing_ratio)?;
    let combiners =
        build_ap_combiners(&aoas, topology.n_ap_antennas, topology.element_spacing_ratio);
    let rows = effective_rows(channels, &analog_precoder, &combiners);

    let problem = BackhaulProblem {
        effective_rows: rows,
        noise_vars: noise_vars.to_vec(),
        power_budget,
    };
    let t_max = bisection_upper_bound(&problem);
    let outcome = if t_max <= 0.0 {
        MaxMinOutcome {
            digital_precoder: ComplexMatrix::zeros(m, m),
            t_star: 0.0,
            sinrs: vec![0.0; m],
            degenerate: true,
        }
    } else {
        maxmin_bisection(&problem, 0.0, t_max, eps_bisect, options)?
    };

    Ok(BackhaulSolution { analog_precoder, combiners, outcome })
}
