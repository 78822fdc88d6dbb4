//! Seeded random matrices, states and channels for tests and benchmarks.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channels::KrausSet;
use crate::quantum::DensityMatrix;
use crate::scalar::{lit, CMatrix, Real, C};

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn random_complex_matrix<T: Real>(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix<T> {
    DMatrix::from_fn(rows, cols, |_, _| {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        C::new(lit(a), lit(b))
    })
}

/// Haar-ish unitary from the QR decomposition of a Gaussian matrix.
pub fn random_unitary<T: Real>(rng: &mut impl Rng, d: usize) -> CMatrix<T> {
    random_isometry(rng, d, d)
}

fn random_isometry<T: Real>(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix<T> {
    let g = random_complex_matrix::<T>(rng, rows, cols);
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    // Fix the phase ambiguity of QR.
    let mut q = q;
    for j in 0..cols {
        let rjj = r[(j, j)];
        let n = rjj.norm_sqr().sqrt();
        if n > T::zero() {
            let phase = rjj.unscale(n);
            for i in 0..rows {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

/// Random full-rank density matrix `G G† / Tr(G G†)`.
pub fn random_density_matrix<T: Real>(rng: &mut impl Rng, d: usize) -> DensityMatrix<T> {
    let g = random_complex_matrix::<T>(rng, d, d);
    let m = &g * g.adjoint();
    DensityMatrix::normalized(m).expect("Gram matrix is a valid state")
}

/// Random CPTP map with `rank` Kraus operators, cut from a random isometry.
pub fn random_channel<T: Real>(rng: &mut impl Rng, d: usize, rank: usize) -> KrausSet<T> {
    let v = random_isometry::<T>(rng, d * rank, d);
    let ops = (0..rank).map(|k| v.rows(k * d, d).into_owned()).collect();
    KrausSet::new(ops).expect("equal square blocks")
}
