//! Fast invariant suite behind the `selftest` CLI subcommand.
//!
//! Each check re-derives an expected value through an independent route
//! (closed forms, grid searches, re-multiplication) and compares against the
//! library path. One line per check; returns whether everything passed.

use std::io::Write;

use num_complex::Complex64;

use crate::access::{access_link_eval, bd_precoder, hybrid_precoder};
use crate::allocation::{end_to_end_rate, optimal_eta};
use crate::backhaul::{bisection_upper_bound, maxmin_bisection, BackhaulProblem};
use crate::channel::{gen_realization, los_probability, ula_response, ChannelParams, GeometryRanges, NetworkTopology};
use crate::numerics::{abs2, svd, ComplexMatrix, ComplexRow, RandomStream, RANK_TOLERANCE};
use crate::scenario::ScenarioConfig;
use crate::sim::run_trial;
use crate::socp::SolverOptions;

type Check = (&'static str, fn() -> std::result::Result<(), String>);

fn check_ula_norms() -> std::result::Result<(), String> {
    let mut rng = RandomStream::from_seed(1);
    for _ in 0..100 {
        let n = 1 + rng.uniform(0.0, 100.0) as usize;
        let a = ula_response(n, rng.uniform_angle(), 0.5);
        let err = (a.norm() - 1.0).abs();
        if err > 1e-12 {
            return Err(format!("steering vector norm off by {err:e}"));
        }
    }
    Ok(())
}

fn check_svd_reconstruction() -> std::result::Result<(), String> {
    let mut rng = RandomStream::from_seed(2);
    let a = ComplexMatrix::from_fn(6, 4, |_, _| rng.sample_cn(1.0));
    let d = svd(&a).map_err(|e| e.to_string())?;
    let resid = (&a - d.reconstruct()).norm() / a.norm();
    if resid > 1e-9 {
        return Err(format!("reconstruction residual {resid:e}"));
    }
    let u_defect = (d.u.adjoint() * &d.u - ComplexMatrix::identity(4, 4)).norm();
    if u_defect > 1e-10 {
        return Err(format!("left vectors not orthonormal: {u_defect:e}"));
    }
    Ok(())
}

fn check_los_probability() -> std::result::Result<(), String> {
    if los_probability(10.0) != 1.0 {
        return Err("short-range probability must be exactly 1".into());
    }
    let mut prev = los_probability(20.0);
    for i in 1..500 {
        let p = los_probability(20.0 + i as f64);
        if p > prev + 1e-15 {
            return Err(format!("not monotone at {} m", 20 + i));
        }
        prev = p;
    }
    Ok(())
}

fn check_backhaul_scalar_closed_form() -> std::result::Result<(), String> {
    let gamma: f64 = 10.0;
    let problem = BackhaulProblem {
        effective_rows: vec![ComplexRow::from_element(1, Complex64::new(gamma.sqrt(), 0.0))],
        noise_vars: vec![1.0],
        power_budget: 1.0,
    };
    let t_max = bisection_upper_bound(&problem);
    let out = maxmin_bisection(&problem, 0.0, t_max, 1e-3, &SolverOptions::default())
        .map_err(|e| e.to_string())?;
    let expected = (1.0 + gamma).log2();
    if (out.t_star - expected).abs() > 1e-3 {
        return Err(format!("t* {} vs closed form {expected}", out.t_star));
    }
    Ok(())
}

fn check_bd_interference() -> std::result::Result<(), String> {
    let mut rng = RandomStream::from_seed(3);
    let rows: Vec<ComplexRow> =
        (0..4).map(|_| ComplexRow::from_fn(8, |_, _| rng.sample_cn(1.0))).collect();
    let w = bd_precoder(&rows, 1.0, RANK_TOLERANCE).map_err(|e| e.to_string())?;
    let mut max_desired = 0.0f64;
    for (k, row) in rows.iter().enumerate() {
        max_desired = max_desired.max(abs2((row * w.column(k))[0]));
    }
    for (j, row) in rows.iter().enumerate() {
        for k in 0..4 {
            if j != k {
                let cross = abs2((row * w.column(k))[0]);
                if cross > 1e-12 * max_desired {
                    return Err(format!("cross term [{j},{k}] = {cross:e}"));
                }
            }
        }
    }
    Ok(())
}

fn check_eta_closed_form() -> std::result::Result<(), String> {
    let (c_a, c_b) = (7.3e9, 2.1e9);
    let eta = optimal_eta(c_a, c_b).map_err(|e| e.to_string())?;
    let rate = end_to_end_rate(c_a, c_b);
    let grid = 10_000;
    let mut best = (0.0, 0.0f64);
    for i in 0..=grid {
        let e = i as f64 / grid as f64;
        let r = (e * c_a).min((1.0 - e) * c_b);
        if r > best.1 {
            best = (e, r);
        }
    }
    if (best.0 - eta).abs() > 1.0 / grid as f64 {
        return Err(format!("grid peak {} vs closed form {eta}", best.0));
    }
    if (best.1 - rate).abs() > 1e-4 * rate {
        return Err(format!("grid value {} vs closed form {rate}", best.1));
    }
    Ok(())
}

fn check_trial_determinism() -> std::result::Result<(), String> {
    let config = ScenarioConfig {
        m_aps: 2,
        k_users: 2,
        n_a: 8,
        n_c: 8,
        trials: 1,
        seed: 77,
        ..Default::default()
    };
    let a = run_trial(&config, None, 0).map_err(|e| e.to_string())?;
    let b = run_trial(&config, None, 0).map_err(|e| e.to_string())?;
    if a.c_a != b.c_a || a.c_b != b.c_b || a.end_to_end != b.end_to_end {
        return Err("repeated trial differs".into());
    }
    Ok(())
}

fn check_constraint_compliance() -> std::result::Result<(), String> {
    let mut rng = RandomStream::from_seed(4);
    let topo = NetworkTopology::synthesize(3, 3, 16, 16, 0.5, GeometryRanges::default(), &mut rng);
    let real = gen_realization(&topo, &ChannelParams::default(), &mut rng);

    let power = 0.05;
    let mut composed = Vec::new();
    for m in 0..3 {
        let rows: Vec<ComplexRow> = (0..3).map(|k| real.access[k][m].clone()).collect();
        let p = hybrid_precoder(&rows, power, m, RANK_TOLERANCE).map_err(|e| e.to_string())?;
        for z in p.analog.iter() {
            if (z.norm_sqr() - 1.0 / 16.0).abs() > 1e-12 {
                return Err(format!("analog modulus off: {}", z.norm_sqr()));
            }
        }
        let used = p.digital.norm_squared();
        if used > power * (1.0 + 1e-9) {
            return Err(format!("digital power {used} above budget {power}"));
        }
        composed.push(p.composed());
    }
    let eval = access_link_eval(&real.access, &composed, &[1e-12; 3]);
    for k in 0..3 {
        if eval.interference_powers[k] > 1e-12 * eval.signal_powers[k].max(1e-300) {
            return Err(format!("residual interference for user {k}"));
        }
    }
    Ok(())
}

/// Run every check, printing one line each. Returns true if all passed.
pub fn run<W: Write>(out: &mut W) -> std::io::Result<bool> {
    let checks: &[Check] = &[
        ("ula_unit_norm", check_ula_norms),
        ("svd_reconstruction", check_svd_reconstruction),
        ("los_probability_model", check_los_probability),
        ("backhaul_scalar_closed_form", check_backhaul_scalar_closed_form),
        ("bd_zero_interference", check_bd_interference),
        ("bandwidth_split_closed_form", check_eta_closed_form),
        ("trial_determinism", check_trial_determinism),
        ("constraint_compliance", check_constraint_compliance),
    ];
    let mut all_ok = true;
    for (name, check) in checks {
        match check() {
            Ok(()) => writeln!(out, "selftest {name}: ok")?,
            Err(msg) => {
                all_ok = false;
                writeln!(out, "selftest {name}: FAIL ({msg})")?;
            }
        }
    }
    Ok(all_ok)
}
