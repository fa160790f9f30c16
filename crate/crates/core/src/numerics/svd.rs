use num_complex::Complex64;

use super::ComplexMatrix;
use crate::error::Error;

/// Relative threshold below which a singular value counts as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Iteration cap for the implicit QR sweep inside the SVD.
const SVD_MAX_ITERATIONS: usize = 1000;

/// Thin singular value decomposition `A = U * diag(S) * V^H`.
///
/// Column phases follow a fixed convention: the largest-magnitude entry of
/// each `U` column is real nonnegative. This makes singular vectors (and
/// everything derived from them, e.g. precoders) reproducible even though the
/// SVD is only unique up to per-column phase.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// Left singular vectors, `m x r` with orthonormal columns.
    pub u: ComplexMatrix,
    /// Singular values, nonnegative and descending, length `r = min(m, n)`.
    pub s: Vec<f64>,
    /// Right singular vectors, `n x r` with orthonormal columns.
    pub v: ComplexMatrix,
}

impl SvdResult {
    /// Numerical rank: singular values above `RANK_TOLERANCE * s[0]`.
    pub fn rank(&self) -> usize {
        self.rank_with(RANK_TOLERANCE)
    }

    /// Numerical rank at a caller-chosen relative threshold.
    pub fn rank_with(&self, rel_tol: f64) -> usize {
        match self.s.first() {
            None | Some(0.0) => 0,
            Some(&s0) => self.s.iter().take_while(|&&x| x > rel_tol * s0).count(),
        }
    }

    /// Reconstruct `U * diag(S) * V^H`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let d = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.s.len(),
            self.s.iter().map(|&x| Complex64::new(x, 0.0)),
        ));
        &self.u * d * self.v.adjoint()
    }

}

/// Orthonormal basis of the right null space of `a` (all x with A x = 0),
/// with rank decided at the relative threshold `rel_tol`.
///
/// The thin decomposition of a wide matrix only carries min(m, n) right
/// vectors, so wide inputs are padded with zero rows first; that leaves the
/// singular values and row space untouched while exposing the full basis.
pub fn null_space(a: &ComplexMatrix, rel_tol: f64) -> Result<ComplexMatrix, Error> {
    let (m, n) = a.shape();
    let d = if m >= n {
        svd(a)?
    } else {
        let mut padded = ComplexMatrix::zeros(n, n);
        padded.rows_mut(0, m).copy_from(a);
        svd(&padded)?
    };
    let r = d.rank_with(rel_tol);
    Ok(d.v.columns(r, d.v.ncols() - r).into_owned())
}

/// Thin SVD of a non-empty complex matrix with the fixed phase convention.
///
/// The input is normalized by its Frobenius norm before decomposition so the
/// iteration behaves identically across absolute scales (channel matrices here
/// have norms around 1e-5).
pub fn svd(a: &ComplexMatrix) -> Result<SvdResult, Error> {
    assert!(a.nrows() > 0 && a.ncols() > 0, "svd: empty matrix");
    let norm = a.norm();
    if !norm.is_finite() {
        return Err(Error::Numerical("svd: input has non-finite entries".into()));
    }
    if norm == 0.0 {
        // Zero matrix: pick canonical bases.
        let r = a.nrows().min(a.ncols());
        return Ok(SvdResult {
            u: ComplexMatrix::identity(a.nrows(), r),
            s: vec![0.0; r],
            v: ComplexMatrix::identity(a.ncols(), r),
        });
    }

    let scaled = a.map(|z| z / norm);
    let svd = scaled
        .try_svd(true, true, f64::EPSILON, SVD_MAX_ITERATIONS)
        .ok_or_else(|| Error::Numerical("svd: QR sweep did not converge".into()))?;

    let mut u = svd.u.expect("svd: U requested");
    let mut v = svd.v_t.expect("svd: V^H requested").adjoint();
    let s: Vec<f64> = svd.singular_values.iter().map(|&x| x * norm).collect();

    // Rotate each singular pair so the largest-|.| entry of the U column is
    // real nonnegative.
    for j in 0..u.ncols() {
        let (mut best, mut best_mag) = (0, 0.0);
        for i in 0..u.nrows() {
            let m = u[(i, j)].norm_sqr();
            if m > best_mag {
                best_mag = m;
                best = i;
            }
        }
        if best_mag > 0.0 {
            let phase = u[(best, j)] / u[(best, j)].norm();
            let rot = phase.conj();
            for i in 0..u.nrows() {
                u[(i, j)] *= rot;
            }
            for i in 0..v.nrows() {
                v[(i, j)] *= rot;
            }
        }
    }

    Ok(SvdResult { u, s, v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{all_finite, RandomStream};

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
        let mut rng = RandomStream::from_seed(seed);
        ComplexMatrix::from_fn(rows, cols, |_, _| rng.sample_cn(1.0))
    }

    fn orthonormal_defect(m: &ComplexMatrix) -> f64 {
        let g = m.adjoint() * m;
        (g - ComplexMatrix::identity(m.ncols(), m.ncols())).norm()
    }

    #[test]
    fn identity_two_by_two() {
        let a = ComplexMatrix::identity(2, 2);
        let r = svd(&a).unwrap();
        assert!((r.s[0] - 1.0).abs() < 1e-14);
        assert!((r.s[1] - 1.0).abs() < 1e-14);
        let uv = &r.u * r.v.adjoint();
        assert!((uv - ComplexMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn zero_matrix() {
        let a = ComplexMatrix::zeros(3, 2);
        let r = svd(&a).unwrap();
        assert_eq!(r.s, vec![0.0, 0.0]);
        assert_eq!(r.rank(), 0);
        assert_eq!(null_space(&a, RANK_TOLERANCE).unwrap().ncols(), 2);
    }

    #[test]
    fn null_space_of_wide_matrix_annihilates_rows() {
        let a = random_matrix(3, 5, 71);
        let basis = null_space(&a, RANK_TOLERANCE).unwrap();
        assert_eq!(basis.ncols(), 2);
        assert!((&a * &basis).norm() <= 1e-12 * a.norm());
        assert!(orthonormal_defect(&basis) <= 1e-10);
    }

    #[test]
    fn random_reconstruction_residual() {
        let a = random_matrix(4, 6, 11);
        let r = svd(&a).unwrap();
        assert!((a.clone() - r.reconstruct()).norm() <= 1e-9 * a.norm());
        assert!(orthonormal_defect(&r.u) <= 1e-10);
        assert!(orthonormal_defect(&r.v) <= 1e-10);
        assert!(r.s.windows(2).all(|w| w[0] >= w[1]));
        assert!(r.s.iter().all(|&x| x >= 0.0));
        assert!(all_finite(&r.u) && all_finite(&r.v));
    }

    #[test]
    fn tiny_scale_reconstruction() {
        // Channel-magnitude matrices (norms ~1e-5) must decompose as cleanly.
        let a = random_matrix(8, 8, 5).map(|z| z * 1e-11);
        let r = svd(&a).unwrap();
        assert!((a.clone() - r.reconstruct()).norm() <= 1e-9 * a.norm());
    }

    #[test]
    fn phase_convention_pins_columns() {
        let a = random_matrix(5, 3, 17);
        let r = svd(&a).unwrap();
        for j in 0..r.u.ncols() {
            let col = r.u.column(j);
            let best = col.iter().cloned().max_by(|x, y| {
                x.norm_sqr().partial_cmp(&y.norm_sqr()).unwrap()
            });
            let z = best.unwrap();
            assert!(z.im.abs() < 1e-12 && z.re >= 0.0, "column {j} not pinned: {z}");
        }
    }

    #[test]
    fn deterministic_bitwise() {
        let a = random_matrix(6, 4, 23);
        let r1 = svd(&a).unwrap();
        let r2 = svd(&a).unwrap();
        assert_eq!(r1.s, r2.s);
        assert_eq!(r1.u, r2.u);
        assert_eq!(r1.v, r2.v);
    }

    #[test]
    fn unitary_invariance_of_singular_values() {
        let a = random_matrix(5, 5, 31);
        let q = random_matrix(5, 5, 32).qr().q();
        let ra = svd(&a).unwrap();
        let rqa = svd(&(q * &a)).unwrap();
        for (x, y) in ra.s.iter().zip(rqa.s.iter()) {
            assert!((x - y).abs() <= 1e-10 * ra.s[0]);
        }
    }

    #[test]
    fn rank_of_outer_product_is_one() {
        let u = random_matrix(6, 1, 41);
        let v = random_matrix(4, 1, 42);
        let a = &u * v.adjoint();
        let r = svd(&a).unwrap();
        assert_eq!(r.rank(), 1);
        assert!(r.s[1] <= RANK_TOLERANCE * r.s[0]);
    }
}
