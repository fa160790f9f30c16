//! Complex dense linear algebra and random sampling primitives.
//!
//! Matrices are dense `nalgebra` matrices over `Complex64`; everything else in
//! the crate builds on the aliases and the [`svd`] / [`RandomStream`]
//! primitives exported here.

mod rng;
mod svd;

pub use rng::RandomStream;
pub use svd::{null_space, svd, SvdResult, RANK_TOLERANCE};

use num_complex::Complex64;

/// Dense complex matrix, the workhorse for channels and beamformers.
pub type ComplexMatrix = nalgebra::DMatrix<Complex64>;

/// Dense complex column vector.
pub type ComplexVector = nalgebra::DVector<Complex64>;

/// Dense complex row vector (1 x n), used for per-user channels and combiners.
pub type ComplexRow = nalgebra::RowDVector<Complex64>;

/// True iff every entry has finite real and imaginary parts.
pub fn all_finite(a: &ComplexMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Squared magnitude of a complex scalar.
#[inline]
pub fn abs2(z: Complex64) -> f64 {
    z.re * z.re + z.im * z.im
}
