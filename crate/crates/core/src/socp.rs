//! Dense second-order cone programming by a primal-dual interior-point method.
//!
//! Solves
//!
//! ```text
//!     minimize    c'x
//!     subject to  G x + s = h,   s in K,
//! ```
//!
//! where `K` is a Cartesian product of second-order cones
//! `{ (u0, u1) : u0 >= ||u1|| }`. The implementation is a Mehrotra
//! predictor-corrector with Nesterov-Todd scaling; each iteration factors the
//! Schur complement `G' W^-2 G` once and reuses it for both directions.
//!
//! Per-cone Gram matrices `G_k' G_k` are precomputed so the per-iteration
//! assembly reduces to scaled adds plus one rank-2 update per cone (the NT
//! scaling of a second-order cone is a multiple of the identity plus rank
//! two). That keeps the solver fast for the many small problems a bisection
//! sweep generates.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;

/// Cone program data. `cone_dims` partitions the rows of `g`/`h`.
#[derive(Debug, Clone)]
pub struct SocpProblem {
    pub c: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub cone_dims: Vec<usize>,
}

/// Solver knobs. The defaults match the tolerances used by the backhaul
/// feasibility subproblem. `tolerance` bounds the primal/dual residuals and
/// the absolute duality gap (relative gap gets 10x).
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Print one residual/gap line per iteration to stderr.
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-7,
            trace: false,
        }
    }
}

/// Converged primal-dual pair.
#[derive(Debug, Clone)]
pub struct SocpSolution {
    pub x: DVector<f64>,
    pub s: DVector<f64>,
    pub z: DVector<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub duality_gap: f64,
    pub iterations: usize,
}

/// Offsets of each cone into the stacked slack vector.
fn cone_offsets(dims: &[usize]) -> Vec<usize> {
    let mut off = Vec::with_capacity(dims.len());
    let mut acc = 0;
    for &d in dims {
        off.push(acc);
        acc += d;
    }
    off
}

/// Jordan product u o v = (u'v; u0 v1 + v0 u1), per cone.
fn jordan_mul(a: &DVector<f64>, b: &DVector<f64>, dims: &[usize], off: &[usize]) -> DVector<f64> {
    let mut out = DVector::zeros(a.len());
    for (k, &d) in dims.iter().enumerate() {
        let o = off[k];
        let mut dot = 0.0;
        for i in 0..d {
            dot += a[o + i] * b[o + i];
        }
        out[o] = dot;
        for i in 1..d {
            out[o + i] = a[o] * b[o + i] + b[o] * a[o + i];
        }
    }
    out
}

/// Solve lambda o y = d for y, per cone.
fn jordan_div(
    lambda: &DVector<f64>,
    d: &DVector<f64>,
    dims: &[usize],
    off: &[usize],
) -> Result<DVector<f64>, Error> {
    let mut out = DVector::zeros(d.len());
    for (k, &dim) in dims.iter().enumerate() {
        let o = off[k];
        let l0 = lambda[o];
        let mut l1_sq = 0.0;
        let mut l1_d1 = 0.0;
        for i in 1..dim {
            l1_sq += lambda[o + i] * lambda[o + i];
            l1_d1 += lambda[o + i] * d[o + i];
        }
        let det = l0 * l0 - l1_sq;
        if det <= 0.0 || l0 <= 0.0 {
            return Err(Error::Numerical("cone solver: scaled point left the cone".into()));
        }
        let y0 = (l0 * d[o] - l1_d1) / det;
        out[o] = y0;
        for i in 1..dim {
            out[o + i] = (d[o + i] - y0 * lambda[o + i]) / l0;
        }
    }
    Ok(out)
}

/// Unit element (1, 0, ..., 0) of each cone.
fn cone_identity(dims: &[usize], off: &[usize], len: usize) -> DVector<f64> {
    let mut e = DVector::zeros(len);
    for (k, _) in dims.iter().enumerate() {
        e[off[k]] = 1.0;
    }
    e
}

/// Largest step `alpha` with `u + alpha*du` still in the cone product
/// (possibly infinite).
fn max_step(u: &DVector<f64>, du: &DVector<f64>, dims: &[usize], off: &[usize]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (k, &d) in dims.iter().enumerate() {
        let o = off[k];
        // f(a) = (u0 + a du0)^2 - ||u1 + a du1||^2 stays positive until the
        // first root, starting from f(0) > 0 in the interior.
        let mut qa = du[o] * du[o];
        let mut qb = 2.0 * u[o] * du[o];
        let mut qc = u[o] * u[o];
        for i in 1..d {
            qa -= du[o + i] * du[o + i];
            qb -= 2.0 * u[o + i] * du[o + i];
            qc -= u[o + i] * u[o + i];
        }
        let root = smallest_positive_root(qa, qb, qc);
        alpha = alpha.min(root);
        // Guard the u0 > 0 half-space directly as well.
        if du[o] < 0.0 {
            alpha = alpha.min(-u[o] / du[o]);
        }
    }
    alpha
}

fn smallest_positive_root(a: f64, b: f64, c: f64) -> f64 {
    let tiny = 1e-14 * (a.abs() + b.abs() + c.abs()).max(1.0);
    if a.abs() < tiny {
        if b < 0.0 {
            return -c / b;
        }
        return f64::INFINITY;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let sq = disc.sqrt();
    // Numerically stable pair of roots.
    let q = -0.5 * (b + b.signum() * sq);
    let mut roots = [f64::INFINITY; 2];
    if a != 0.0 {
        roots[0] = q / a;
    }
    if q != 0.0 {
        roots[1] = c / q;
    }
    let mut best = f64::INFINITY;
    for r in roots {
        if r > 0.0 && r < best {
            best = r;
        }
    }
    best
}

/// Nesterov-Todd scaling of one second-order cone: W = beta * (2 v v' - J)
/// with v'Jv = 1, J = diag(1, -I). W is symmetric, W z = W^-1 s, and
/// W^-1 = (1/beta) * (2 (Jv)(Jv)' - J).
struct NtScaling {
    beta: Vec<f64>,
    v: Vec<DVector<f64>>,
}

fn jnorm(u: &[f64]) -> Result<f64, Error> {
    let mut n1 = 0.0;
    for &x in &u[1..] {
        n1 += x * x;
    }
    let n1 = n1.sqrt();
    // (u0 - ||u1||)(u0 + ||u1||) avoids cancellation near the boundary.
    let diff = u[0] - n1;
    if diff <= 0.0 || u[0] <= 0.0 {
        return Err(Error::Numerical("cone solver: iterate left the cone interior".into()));
    }
    Ok((diff * (u[0] + n1)).sqrt())
}

fn compute_scaling(
    s: &DVector<f64>,
    z: &DVector<f64>,
    dims: &[usize],
    off: &[usize],
) -> Result<NtScaling, Error> {
    let mut beta = Vec::with_capacity(dims.len());
    let mut vs = Vec::with_capacity(dims.len());
    for (k, &d) in dims.iter().enumerate() {
        let o = off[k];
        let ss = &s.as_slice()[o..o + d];
        let zs = &z.as_slice()[o..o + d];
        let snorm = jnorm(ss)?;
        let znorm = jnorm(zs)?;
        let mut sbar_dot_zbar = 0.0;
        for i in 0..d {
            sbar_dot_zbar += (ss[i] / snorm) * (zs[i] / znorm);
        }
        let gamma = ((1.0 + sbar_dot_zbar) / 2.0).sqrt();
        // wbar = (sbar + J zbar) / (2 gamma), a unit hyperbolic vector.
        let mut v = DVector::zeros(d);
        v[0] = (ss[0] / snorm + zs[0] / znorm) / (2.0 * gamma);
        for i in 1..d {
            v[i] = (ss[i] / snorm - zs[i] / znorm) / (2.0 * gamma);
        }
        // v = (wbar + e) / sqrt(2 (wbar0 + 1)).
        v[0] += 1.0;
        let scale = 1.0 / (2.0 * v[0]).sqrt();
        v *= scale;
        beta.push((snorm / znorm).sqrt());
        vs.push(v);
    }
    Ok(NtScaling { beta, v: vs })
}

impl NtScaling {
    /// W u, per cone: beta * (2 v (v'u) - J u).
    fn mul(&self, u: &DVector<f64>, dims: &[usize], off: &[usize]) -> DVector<f64> {
        let mut out = DVector::zeros(u.len());
        for (k, &d) in dims.iter().enumerate() {
            let o = off[k];
            let v = &self.v[k];
            let mut vu = 0.0;
            for i in 0..d {
                vu += v[i] * u[o + i];
            }
            out[o] = self.beta[k] * (2.0 * v[0] * vu - u[o]);
            for i in 1..d {
                out[o + i] = self.beta[k] * (2.0 * v[i] * vu + u[o + i]);
            }
        }
        out
    }

    /// W^-1 u, per cone: (1/beta) * (2 (Jv) ((Jv)'u) - J u).
    fn inv_mul(&self, u: &DVector<f64>, dims: &[usize], off: &[usize]) -> DVector<f64> {
        let mut out = DVector::zeros(u.len());
        for (k, &d) in dims.iter().enumerate() {
            let o = off[k];
            let v = &self.v[k];
            let mut wu = v[0] * u[o];
            for i in 1..d {
                wu -= v[i] * u[o + i];
            }
            let ib = 1.0 / self.beta[k];
            out[o] = ib * (2.0 * v[0] * wu - u[o]);
            for i in 1..d {
                out[o + i] = ib * (-2.0 * v[i] * wu + u[o + i]);
            }
        }
        out
    }
}

/// Solve the cone program. Fails with [`Error::Numerical`] if the iteration
/// stalls or exceeds the cap without meeting the tolerance.
pub fn solve(problem: &SocpProblem, options: &SolverOptions) -> Result<SocpSolution, Error> {
    let n = problem.c.len();
    let m = problem.h.len();
    assert_eq!(problem.g.nrows(), m, "socp: G rows must match h");
    assert_eq!(problem.g.ncols(), n, "socp: G cols must match c");
    assert_eq!(
        problem.cone_dims.iter().sum::<usize>(),
        m,
        "socp: cone dims must partition the rows"
    );
    assert!(problem.cone_dims.iter().all(|&d| d >= 1));

    let dims = &problem.cone_dims;
    let off = cone_offsets(dims);
    let g = &problem.g;
    let n_cones = dims.len() as f64;
    let e = cone_identity(dims, &off, m);

    // Per-cone Gram matrices; their scaled sum plus rank-2 terms form the
    // Schur complement each iteration.
    let grams: Vec<DMatrix<f64>> = dims
        .iter()
        .zip(off.iter())
        .map(|(&d, &o)| {
            let block = g.rows(o, d);
            block.transpose() * block
        })
        .collect();

    // Least-squares initialization: x0 minimizes ||Gx - h||, shifted into the
    // cone interior; z0 is the least-norm dual shifted the same way.
    let mut gram_sum = DMatrix::zeros(n, n);
    for gm in &grams {
        gram_sum += gm;
    }
    let chol0 = cholesky_with_bump(&gram_sum)
        .ok_or_else(|| Error::Numerical("cone solver: G has deficient column rank".into()))?;
    let mut x = chol0.solve(&(g.transpose() * &problem.h));
    let mut s = &problem.h - g * &x;
    shift_into_cone(&mut s, dims, &off);
    let mut z = -(g * chol0.solve(&problem.c));
    shift_into_cone(&mut z, dims, &off);

    let norm_c = problem.c.norm().max(1.0);
    let norm_h = problem.h.norm().max(1.0);
    let mut schur = DMatrix::zeros(n, n);

    // Iterates can degrade once the duality gap reaches the numerical floor;
    // keep the best one seen so failures late in the run can still return a
    // usable (slightly less accurate) solution.
    let mut best: Option<(f64, SocpSolution)> = None;
    let grace = 100.0 * options.tolerance;
    let finish = |best: Option<(f64, SocpSolution)>, err: Error| match best {
        Some((metric, sol)) if metric <= grace => Ok(sol),
        _ => Err(err),
    };

    for iteration in 0..options.max_iterations {
        let r_dual = &problem.c + g.transpose() * &z;
        let r_prim = g * &x + &s - &problem.h;
        let gap = s.dot(&z);
        let pcost = problem.c.dot(&x);
        let dcost = -problem.h.dot(&z);
        let pres = r_prim.norm() / norm_h;
        let dres = r_dual.norm() / norm_c;
        let relgap = gap / pcost.abs().max(1.0);

        if options.trace {
            eprintln!(
                "socp iter {iteration:3}: pcost {pcost:+.6e} dcost {dcost:+.6e} \
                 gap {gap:.3e} pres {pres:.3e} dres {dres:.3e}"
            );
        }

        if pres <= options.tolerance
            && dres <= options.tolerance
            && (gap <= options.tolerance || relgap <= 10.0 * options.tolerance)
        {
            return Ok(SocpSolution {
                x,
                s,
                z,
                primal_objective: pcost,
                dual_objective: dcost,
                duality_gap: gap,
                iterations: iteration,
            });
        }

        let metric = pres.max(dres).max(gap.min(relgap).max(0.0));
        if best.as_ref().is_none_or(|(m, _)| metric < *m) {
            best = Some((
                metric,
                SocpSolution {
                    x: x.clone(),
                    s: s.clone(),
                    z: z.clone(),
                    primal_objective: pcost,
                    dual_objective: dcost,
                    duality_gap: gap,
                    iterations: iteration,
                },
            ));
        }

        let nt = match compute_scaling(&s, &z, dims, &off) {
            Ok(nt) => nt,
            Err(e) => return finish(best, e),
        };
        let lambda = nt.mul(&z, dims, &off);
        let mu = gap / n_cones;

        // Schur complement G' W^-2 G via Gram matrices plus rank-2 updates:
        // W^-2 = (1/b^2) (I - 2 v w' - 2 w v' + 4 (v'v) w w'), w = Jv.
        schur.fill(0.0);
        for (k, &d) in dims.iter().enumerate() {
            let o = off[k];
            let ib2 = 1.0 / (nt.beta[k] * nt.beta[k]);
            schur
                .as_mut_slice()
                .iter_mut()
                .zip(grams[k].as_slice().iter())
                .for_each(|(acc, &gv)| *acc += ib2 * gv);

            let v = &nt.v[k];
            let mut w = v.clone();
            for i in 1..d {
                w[i] = -w[i];
            }
            let block = g.rows(o, d);
            let gv = block.transpose() * v;
            let gw = block.transpose() * &w;
            let vtv = v.dot(v);
            // (1/b^2) [gv gw] [[0, -2], [-2, 4 v'v]] [gv gw]'
            let a = &gw * 4.0 * vtv - &gv * 2.0;
            schur.ger(ib2, &a, &gw, 1.0);
            schur.ger(-2.0 * ib2, &gw, &gv, 1.0);
        }
        let chol = match cholesky_with_bump(&schur) {
            Some(c) => c,
            None => {
                return finish(
                    best,
                    Error::Numerical("cone solver: Schur complement factorization failed".into()),
                )
            }
        };

        let solve_direction = |d_c: &DVector<f64>| -> Result<_, Error> {
            let dtilde = jordan_div(&lambda, d_c, dims, &off)?;
            let t2 = &r_prim + nt.mul(&dtilde, dims, &off);
            let winv2_t2 = nt.inv_mul(&nt.inv_mul(&t2, dims, &off), dims, &off);
            let rhs = -(&r_dual) - g.transpose() * &winv2_t2;
            let mut dx = chol.solve(&rhs);
            // One refinement pass on the Schur system.
            let resid = &schur * &dx - &rhs;
            dx -= chol.solve(&resid);
            let t3 = g * &dx + &t2;
            let dz = nt.inv_mul(&nt.inv_mul(&t3, dims, &off), dims, &off);
            let ds = -(&r_prim) - g * &dx;
            Ok((dx, ds, dz))
        };

        // Predictor.
        let d_aff = -jordan_mul(&lambda, &lambda, dims, &off);
        let (_, ds_aff, dz_aff) = match solve_direction(&d_aff) {
            Ok(d) => d,
            Err(e) => return finish(best, e),
        };
        let alpha_aff = max_step(&s, &ds_aff, dims, &off)
            .min(max_step(&z, &dz_aff, dims, &off))
            .min(1.0);
        let gap_aff = (&s + &ds_aff * alpha_aff).dot(&(&z + &dz_aff * alpha_aff));
        let sigma = (gap_aff / gap).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let corr = jordan_mul(
            &nt.inv_mul(&ds_aff, dims, &off),
            &nt.mul(&dz_aff, dims, &off),
            dims,
            &off,
        );
        let d_comb = &d_aff - corr + &e * (sigma * mu);
        let (dx, ds, dz) = match solve_direction(&d_comb) {
            Ok(d) => d,
            Err(e) => return finish(best, e),
        };

        let alpha = max_step(&s, &ds, dims, &off)
            .min(max_step(&z, &dz, dims, &off))
            .min(1.0 / 0.99)
            * 0.99;
        let alpha = alpha.min(1.0);
        if alpha <= 1e-13 {
            return finish(
                best,
                Error::Numerical("cone solver: step length collapsed".into()),
            );
        }

        x += &dx * alpha;
        s += &ds * alpha;
        z += &dz * alpha;
    }

    finish(
        best,
        Error::Numerical(format!(
            "cone solver: no convergence within {} iterations",
            options.max_iterations
        )),
    )
}

/// Shift a point into the cone interior the way a cold start needs:
/// if u is not safely interior, add (1 + defect) to each cone's first entry.
fn shift_into_cone(u: &mut DVector<f64>, dims: &[usize], off: &[usize]) {
    let mut worst = f64::NEG_INFINITY;
    for (k, &d) in dims.iter().enumerate() {
        let o = off[k];
        let mut n1 = 0.0;
        for i in 1..d {
            n1 += u[o + i] * u[o + i];
        }
        worst = worst.max(n1.sqrt() - u[o]);
    }
    if worst >= 0.0 {
        for (k, _) in dims.iter().enumerate() {
            u[off[k]] += 1.0 + worst;
        }
    }
}

fn cholesky_with_bump(a: &DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = a.clone().cholesky() {
        return Some(c);
    }
    // Mild diagonal regularization, then give up.
    let bump = 1e-12 * a.diagonal().amax().max(1.0);
    let mut b = a.clone();
    for i in 0..b.nrows() {
        b[(i, i)] += bump;
    }
    b.cholesky()
}
