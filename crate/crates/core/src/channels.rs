//! Completely positive trace-preserving maps in Kraus, supermatrix and Choi form.
//!
//! Conventions (column stacking, `vec(X)[k + l d] = X[k, l]`):
//!
//! * supermatrix `S = Σ_k conj(M_k) ⊗ M_k`, so `vec(Λ(ρ)) = S vec(ρ)`;
//! * Choi matrix `Λ_C = Σ_ij E_ij ⊗ Λ(E_ij)`, unnormalized (trace `d`), with
//!   `Λ_C[i d + k, j d + l] = Λ(E_ij)[k, l]`;
//! * the two are related by the index reshuffle
//!   `Λ_C[i d + k, j d + l] = S[k + l d, i + j d]`, which is an involution.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, hermitian_eigen, identity, norm, square_root_dim, unvec, vec};
use crate::quantum::{partial_trace_matrix, tol, DensityMatrix, Subsystem};
use crate::scalar::{lit, re, to_f64, CMatrix, Real, C};

/// Default tolerance for `Σ M†M = 𝟙`.
pub const DEFAULT_CPTP_TOLERANCE: f64 = 1e-9;
/// Eigenvalues of a supermatrix this close to 1 count towards the fixed-point space.
pub const FIXED_POINT_DEGENERACY: f64 = 1e-9;
/// Relative rank cutoff for Kraus extraction (times the largest Choi eigenvalue).
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-10;

/// Operator-sum representation `ρ ↦ Σ_k M_k ρ M_k†`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet<T: Real> {
    ops: Vec<CMatrix<T>>,
    dim: usize,
}

impl<T: Real> KrausSet<T> {
    /// Builds a set of equally sized square operators. Trace preservation is
    /// not enforced here; see [`validate_cptp`] and [`KrausSet::new_cptp`].
    pub fn new(ops: Vec<CMatrix<T>>) -> Result<Self> {
        let first = ops.first().ok_or_else(|| Error::dim("at least one operator", 0))?;
        let dim = first.nrows();
        for m in &ops {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::dim(format!("{dim}x{dim}"), format!("{}x{}", m.nrows(), m.ncols())));
            }
        }
        Ok(Self { ops, dim })
    }

    /// Like [`KrausSet::new`] but rejects sets violating `Σ M†M = 𝟙` beyond `tolerance`.
    pub fn new_cptp(ops: Vec<CMatrix<T>>, tolerance: f64) -> Result<Self> {
        let set = Self::new(ops)?;
        let dev = set.completeness_deviation();
        if dev > tolerance {
            return Err(Error::Numeric(format!("Kraus completeness violated by {dev:.3e}")));
        }
        Ok(set)
    }

    pub fn unitary(u: CMatrix<T>) -> Self {
        let dim = u.nrows();
        Self { ops: vec![u], dim }
    }

    pub fn identity(dim: usize) -> Self {
        Self::unitary(identity(dim))
    }

    pub fn ops(&self) -> &[CMatrix<T>] {
        &self.ops
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// `‖Σ M†M − 𝟙‖_F`.
    pub fn completeness_deviation(&self) -> f64 {
        let mut acc = linalg::zeros::<T>(self.dim);
        for m in &self.ops {
            acc += m.adjoint() * m;
        }
        to_f64(norm(&(acc - identity::<T>(self.dim))))
    }

    pub fn apply_matrix(&self, rho: &CMatrix<T>) -> Result<CMatrix<T>> {
        if rho.nrows() != self.dim || rho.ncols() != self.dim {
            return Err(Error::dim(
                format!("{0}x{0}", self.dim),
                format!("{}x{}", rho.nrows(), rho.ncols()),
            ));
        }
        let mut out = linalg::zeros::<T>(self.dim);
        for m in &self.ops {
            out += m * rho * m.adjoint();
        }
        Ok(out)
    }
}

/// `ρ' = Σ_k M_k ρ M_k†`.
pub fn apply<T: Real>(k: &KrausSet<T>, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
    Ok(DensityMatrix::from_trusted(k.apply_matrix(rho.matrix())?))
}

/// Map `ρ ↦ outer(inner(ρ))`: all products `A_k B_l`.
pub fn compose<T: Real>(outer: &KrausSet<T>, inner: &KrausSet<T>) -> Result<KrausSet<T>> {
    if outer.dim != inner.dim {
        return Err(Error::dim(outer.dim, inner.dim));
    }
    let mut ops = Vec::with_capacity(outer.len() * inner.len());
    for a in &outer.ops {
        for b in &inner.ops {
            ops.push(a * b);
        }
    }
    Ok(KrausSet { ops, dim: outer.dim })
}

/// Column-stacking supermatrix of a linear map on `d × d` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperMatrix<T: Real> {
    matrix: CMatrix<T>,
    dim: usize,
}

impl<T: Real> SuperMatrix<T> {
    pub fn new(matrix: CMatrix<T>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::dim("square", format!("{}x{}", matrix.nrows(), matrix.ncols())));
        }
        let dim = square_root_dim(matrix.nrows())?;
        Ok(Self { matrix, dim })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: identity(dim * dim),
            dim,
        }
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }

    /// Hilbert-space dimension `d` (the supermatrix is `d² × d²`).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply_matrix(&self, rho: &CMatrix<T>) -> Result<CMatrix<T>> {
        if rho.nrows() != self.dim || rho.ncols() != self.dim {
            return Err(Error::dim(self.dim, rho.nrows()));
        }
        Ok(unvec(&(&self.matrix * vec(rho)), self.dim))
    }

    pub fn apply(&self, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
        Ok(DensityMatrix::from_trusted(self.apply_matrix(rho.matrix())?))
    }

    /// `self ∘ inner` (inner acts first).
    pub fn then_after(&self, inner: &SuperMatrix<T>) -> Result<SuperMatrix<T>> {
        if self.dim != inner.dim {
            return Err(Error::dim(self.dim, inner.dim));
        }
        Ok(SuperMatrix {
            matrix: &self.matrix * &inner.matrix,
            dim: self.dim,
        })
    }

    /// `n`-fold composition by repeated squaring.
    pub fn power(&self, mut n: u64) -> SuperMatrix<T> {
        let mut result = identity::<T>(self.matrix.nrows());
        let mut base = self.matrix.clone();
        while n > 0 {
            if n & 1 == 1 {
                result = &result * &base;
            }
            base = &base * &base;
            n >>= 1;
        }
        SuperMatrix {
            matrix: result,
            dim: self.dim,
        }
    }

    /// Same map expressed in the basis whose vectors are the columns of `w`
    /// (operators transform as `X ↦ W† X W`).
    pub fn change_basis(&self, w: &CMatrix<T>) -> Result<SuperMatrix<T>> {
        if w.nrows() != self.dim {
            return Err(Error::dim(self.dim, w.nrows()));
        }
        let to_new = w.transpose().kronecker(&w.adjoint());
        let from_new = w.conjugate().kronecker(w);
        Ok(SuperMatrix {
            matrix: to_new * &self.matrix * from_new,
            dim: self.dim,
        })
    }

    /// `‖⟨⟨𝟙| S − ⟨⟨𝟙|‖`: zero for trace-preserving maps.
    pub fn trace_preservation_deviation(&self) -> f64 {
        let id = vec(&identity::<T>(self.dim));
        let row = id.adjoint() * &self.matrix;
        to_f64((row - id.adjoint()).norm())
    }

    /// Largest eigenvalue modulus.
    pub fn spectral_radius(&self) -> f64 {
        let schur = nalgebra::linalg::Schur::new(self.matrix.clone());
        let (_, t) = schur.unpack();
        (0..t.nrows()).map(|i| to_f64(t[(i, i)].norm_sqr().sqrt())).fold(0.0, f64::max)
    }
}

/// `S = Σ_k conj(M_k) ⊗ M_k`.
pub fn kraus_to_super<T: Real>(k: &KrausSet<T>) -> SuperMatrix<T> {
    let n = k.dim * k.dim;
    let mut matrix = linalg::zeros::<T>(n);
    for m in &k.ops {
        matrix += m.conjugate().kronecker(m);
    }
    SuperMatrix { matrix, dim: k.dim }
}

/// Choi matrix `Σ_ij E_ij ⊗ Λ(E_ij)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix<T: Real> {
    matrix: CMatrix<T>,
    dim: usize,
}

impl<T: Real> ChoiMatrix<T> {
    pub fn new(matrix: CMatrix<T>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::dim("square", format!("{}x{}", matrix.nrows(), matrix.ncols())));
        }
        let dim = square_root_dim(matrix.nrows())?;
        Ok(Self { matrix, dim })
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Λ(ρ)[k,l] = Σ_ij ρ[i,j] Λ_C[i d + k, j d + l]`.
    pub fn apply_matrix(&self, rho: &CMatrix<T>) -> Result<CMatrix<T>> {
        let d = self.dim;
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::dim(d, rho.nrows()));
        }
        Ok(DMatrix::from_fn(d, d, |k, l| {
            let mut acc = C::new(T::zero(), T::zero());
            for i in 0..d {
                for j in 0..d {
                    acc += rho[(i, j)] * self.matrix[(i * d + k, j * d + l)];
                }
            }
            acc
        }))
    }

    /// Eigenvalues ascending.
    pub fn eigenvalues(&self) -> Vec<T> {
        hermitian_eigen(&self.matrix).0
    }
}

fn reshuffle<T: Real>(m: &CMatrix<T>, d: usize) -> CMatrix<T> {
    // out[i d + k, j d + l] = m[k + l d, i + j d]
    DMatrix::from_fn(d * d, d * d, |r, c| {
        let (i, k) = (r / d, r % d);
        let (j, l) = (c / d, c % d);
        m[(k + l * d, i + j * d)]
    })
}

pub fn super_to_choi<T: Real>(s: &SuperMatrix<T>) -> ChoiMatrix<T> {
    ChoiMatrix {
        matrix: reshuffle(&s.matrix, s.dim),
        dim: s.dim,
    }
}

pub fn choi_to_super<T: Real>(c: &ChoiMatrix<T>) -> SuperMatrix<T> {
    SuperMatrix {
        matrix: reshuffle(&c.matrix, c.dim),
        dim: c.dim,
    }
}

/// Minimal Kraus set from the Choi eigendecomposition.
///
/// Eigenpairs with eigenvalue above `rank_tol` become `√λ · unvec(v)`. When
/// `rank_tol` is `None` the cutoff is `1e-10 · λ_max`. An eigenvalue below
/// `−max(rank_tol, 1e-9·λ_max)` rejects the input as not completely positive.
pub fn choi_to_kraus<T: Real>(c: &ChoiMatrix<T>, rank_tol: Option<f64>) -> Result<KrausSet<T>> {
    let d = c.dim;
    let (values, vectors) = hermitian_eigen(&c.matrix);
    let largest = to_f64(*values.last().expect("non-empty spectrum")).max(0.0);
    let cutoff = rank_tol.unwrap_or(DEFAULT_RANK_TOLERANCE * largest);
    let negative_limit = cutoff.max(tol::<T>(DEFAULT_CPTP_TOLERANCE) * largest.max(1.0));
    if to_f64(values[0]) < -negative_limit {
        return Err(Error::NotCompletelyPositive {
            min_eigenvalue: to_f64(values[0]),
        });
    }
    let mut ops = Vec::new();
    // Largest eigenvalues first.
    for k in (0..values.len()).rev() {
        let lambda = to_f64(values[k]);
        if lambda > cutoff {
            let v = vectors.column(k).into_owned() * re(lit::<T>(lambda.sqrt()));
            ops.push(unvec(&v, d));
        }
    }
    if ops.is_empty() {
        ops.push(linalg::zeros(d));
    }
    KrausSet::new(ops)
}

/// Minimal Kraus set of a supermatrix.
pub fn minimal_kraus<T: Real>(s: &SuperMatrix<T>) -> Result<KrausSet<T>> {
    choi_to_kraus(&super_to_choi(s), None)
}

/// Reduced map on the nucleus: `Λ_n(ρ_n) = Tr_E[Λ(ρ_E ⊗ ρ_n)]` as a 4×4 supermatrix.
pub fn reduce_to_nuclear<T: Real>(s: &SuperMatrix<T>, rho_e: &DensityMatrix<T>) -> Result<SuperMatrix<T>> {
    if s.dim != 4 {
        return Err(Error::dim("16x16 supermatrix", format!("{0}x{0}", s.dim * s.dim)));
    }
    if rho_e.dim() != 2 {
        return Err(Error::dim("2x2 electron state", rho_e.dim()));
    }
    let mut out = linalg::zeros::<T>(4);
    for j in 0..2 {
        for i in 0..2 {
            let mut e = linalg::zeros::<T>(2);
            e[(i, j)] = re(T::one());
            let input = rho_e.matrix().kronecker(&e);
            let image = partial_trace_matrix(&s.apply_matrix(&input)?, Subsystem::Electron)?;
            out.set_column(i + 2 * j, &vec(&image));
        }
    }
    SuperMatrix::new(out)
}

/// Unique stationary state of a trace-preserving supermatrix.
///
/// The null space of `S − 𝟙` is read off its singular value decomposition;
/// singular values below [`FIXED_POINT_DEGENERACY`] count as eigenvalue-1
/// directions, and more than one of them is reported as degeneracy.
pub fn fixed_point<T: Real>(s: &SuperMatrix<T>) -> Result<DensityMatrix<T>> {
    let n = s.matrix.nrows();
    let shifted = &s.matrix - identity::<T>(n);
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[a]
            .partial_cmp(&svd.singular_values[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let threshold = tol::<T>(FIXED_POINT_DEGENERACY);
    let near: Vec<f64> = order
        .iter()
        .map(|&k| to_f64(svd.singular_values[k]))
        .take_while(|&sv| sv < threshold)
        .collect();
    if near.len() > 1 {
        return Err(Error::DegenerateFixedPoint {
            count: near.len(),
            candidates: near,
        });
    }
    let best = order[0];
    let smallest = to_f64(svd.singular_values[best]);
    // A trace-preserving map always has eigenvalue 1; a large residual means
    // the input was not trace preserving.
    if smallest > 1e-6_f64.max(threshold) {
        return Err(Error::NoFixedPoint { closest: smallest });
    }
    let v = v_t.row(best).adjoint();
    let rho = unvec(&v, s.dim);
    DensityMatrix::normalized(rho)
}

/// `Σ_k |Tr(U† M_k)|² / D²` with `D` the Hilbert-space dimension; equals 1 for `{U}`.
pub fn gate_fidelity<T: Real>(u: &CMatrix<T>, k: &KrausSet<T>) -> Result<T> {
    if u.nrows() != k.dim || u.ncols() != k.dim {
        return Err(Error::dim(k.dim, u.nrows()));
    }
    let dev = linalg::unitarity_deviation(u);
    if dev > tol::<T>(1e-8) {
        return Err(Error::NotUnitary { deviation: dev });
    }
    let ud = u.adjoint();
    let total = k
        .ops
        .iter()
        .fold(T::zero(), |acc, m| acc + (&ud * m).trace().norm_sqr());
    let d = lit::<T>(k.dim as f64);
    Ok(total / (d * d))
}

/// Diagnostic for complete positivity and trace preservation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CptpReport {
    /// `‖Σ M†M − 𝟙‖_F`, or `‖Tr_out Λ_C − 𝟙‖_F` for Choi input.
    pub trace_deviation: f64,
    pub min_choi_eigenvalue: f64,
}

impl CptpReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.trace_deviation <= tolerance && self.min_choi_eigenvalue >= -tolerance
    }
}

/// Anything [`validate_cptp`] can inspect.
pub enum MapRef<'a, T: Real> {
    Kraus(&'a KrausSet<T>),
    Choi(&'a ChoiMatrix<T>),
}

impl<'a, T: Real> From<&'a KrausSet<T>> for MapRef<'a, T> {
    fn from(k: &'a KrausSet<T>) -> Self {
        MapRef::Kraus(k)
    }
}

impl<'a, T: Real> From<&'a ChoiMatrix<T>> for MapRef<'a, T> {
    fn from(c: &'a ChoiMatrix<T>) -> Self {
        MapRef::Choi(c)
    }
}

pub fn validate_cptp<'a, T: Real>(map: impl Into<MapRef<'a, T>>) -> CptpReport {
    match map.into() {
        MapRef::Kraus(k) => {
            let choi = super_to_choi(&kraus_to_super(k));
            CptpReport {
                trace_deviation: k.completeness_deviation(),
                min_choi_eigenvalue: to_f64(choi.eigenvalues()[0]),
            }
        }
        MapRef::Choi(c) => {
            // Tracing the output factor of Λ_C gives Σ_ij E_ij Tr(Λ(E_ij)) = 𝟙 for TP maps.
            let d = c.dim;
            let reduced = DMatrix::from_fn(d, d, |i, j| {
                (0..d).fold(C::new(T::zero(), T::zero()), |acc, k| acc + c.matrix[(i * d + k, j * d + k)])
            });
            CptpReport {
                trace_deviation: to_f64(norm(&(reduced.transpose() - identity::<T>(d)))),
                min_choi_eigenvalue: to_f64(c.eigenvalues()[0]),
            }
        }
    }
}

/// Human-readable dump of a supermatrix (see [`linalg::dump_matrix`]).
pub fn dump_super<T: Real>(s: &SuperMatrix<T>) -> String {
    linalg::dump_matrix(&s.matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{paulis, SpinSystemParams};
    use crate::random::{random_channel, random_density_matrix, random_unitary};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type M = CMatrix<f64>;

    fn dist(a: &M, b: &M) -> f64 {
        norm(&(a - b))
    }

    #[test]
    fn identity_channel_forms() {
        let k = KrausSet::<f64>::identity(3);
        let s = kraus_to_super(&k);
        assert_eq!(s.matrix(), &identity::<f64>(9));
        let c = super_to_choi(&s);
        let mut expected = linalg::zeros::<f64>(9);
        for i in 0..3 {
            for j in 0..3 {
                expected[(i * 3 + i, j * 3 + j)] = re(1.0);
            }
        }
        assert_eq!(c.matrix(), &expected);
    }

    #[test]
    fn reshuffle_is_an_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = crate::random::random_complex_matrix::<f64>(&mut rng, 16, 16);
        let s = SuperMatrix::new(m.clone()).unwrap();
        assert_eq!(choi_to_super(&super_to_choi(&s)).matrix(), &m);
    }

    #[test]
    fn unitary_channel_has_one_kraus_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_unitary::<f64>(&mut rng, 4);
        let s = kraus_to_super(&KrausSet::unitary(u.clone()));
        assert!(linalg::unitarity_deviation(s.matrix()) < 1e-12);
        let k = minimal_kraus(&s).unwrap();
        assert_eq!(k.len(), 1);
        // Equal to U up to a global phase.
        let overlap = (u.adjoint() * &k.ops()[0]).trace() / 4.0;
        assert!((overlap.norm() - 1.0).abs() < 1e-10);
        assert!(dist(&(u * overlap), &k.ops()[0]) < 1e-9);
    }

    #[test]
    fn three_ways_to_apply_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = random_channel::<f64>(&mut rng, 4, 3);
        let rho = random_density_matrix::<f64>(&mut rng, 4);
        let s = kraus_to_super(&k);
        let c = super_to_choi(&s);
        let a = k.apply_matrix(rho.matrix()).unwrap();
        assert!(dist(&a, &s.apply_matrix(rho.matrix()).unwrap()) < 1e-12);
        assert!(dist(&a, &c.apply_matrix(rho.matrix()).unwrap()) < 1e-12);
    }

    #[test]
    fn compose_matches_nested_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_channel::<f64>(&mut rng, 4, 2);
        let b = random_channel::<f64>(&mut rng, 4, 3);
        let u = KrausSet::unitary(random_unitary::<f64>(&mut rng, 4));
        let rho = random_density_matrix::<f64>(&mut rng, 4);
        let nested = a.apply_matrix(&b.apply_matrix(&u.apply_matrix(rho.matrix()).unwrap()).unwrap()).unwrap();
        let composed = compose(&a, &compose(&b, &u).unwrap()).unwrap();
        assert!(dist(&nested, &composed.apply_matrix(rho.matrix()).unwrap()) < 1e-12);
        assert!(validate_cptp(&composed).passes(1e-9));
        let with_identity = compose(&KrausSet::identity(4), &a).unwrap();
        assert!(dist(kraus_to_super(&with_identity).matrix(), kraus_to_super(&a).matrix()) < 1e-12);
        assert!(compose(&KrausSet::<f64>::identity(2), &a).is_err());
    }

    #[test]
    fn scaled_identity_fails_validation() {
        let k = KrausSet::new(vec![identity::<f64>(2).scale(0.5)]).unwrap();
        let report = validate_cptp(&k);
        // Σ M†M = 0.25·𝟙 on 2 levels: ‖−0.75·𝟙‖_F = 0.75·√2. Per diagonal entry 0.75.
        assert!((report.trace_deviation - 0.75 * 2f64.sqrt()).abs() < 1e-12);
        assert!(!report.passes(1e-9));
        assert!(KrausSet::new_cptp(k.ops().to_vec(), 1e-9).is_err());
    }

    #[test]
    fn choi_validation_detects_trace_loss() {
        let k = KrausSet::new(vec![identity::<f64>(2).scale(0.5)]).unwrap();
        let report = validate_cptp(&super_to_choi(&kraus_to_super(&k)));
        assert!(report.trace_deviation > 1.0);
    }

    #[test]
    fn non_cp_choi_is_rejected() {
        // Transpose map: Choi is the swap operator with eigenvalue −1.
        let mut m = linalg::zeros::<f64>(4);
        for i in 0..2 {
            for j in 0..2 {
                m[(i * 2 + j, j * 2 + i)] = re(1.0);
            }
        }
        let c = ChoiMatrix::new(m).unwrap();
        assert!(matches!(choi_to_kraus(&c, None), Err(Error::NotCompletelyPositive { .. })));
    }

    #[test]
    fn gate_fidelity_cases() {
        let p = paulis::<f64>();
        assert!((gate_fidelity(&p[1], &KrausSet::unitary(p[1].clone())).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(gate_fidelity(&p[1], &KrausSet::unitary(p[3].clone())).unwrap(), 0.0);
        let depolarizing = KrausSet::new(p.iter().map(|m| m.scale(0.5)).collect()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_unitary::<f64>(&mut rng, 2);
        // Oracle: Σ_k |Tr(U† σ_k)/2|² / 4 = (Σ_k |⟨σ_k, U⟩|²/4)/4 = 1/4 by Pauli completeness.
        let oracle: f64 = p.iter().map(|s| ((u.adjoint() * s).trace() * 0.5).norm_sqr()).sum::<f64>() / 4.0;
        let f = gate_fidelity(&u, &depolarizing).unwrap();
        assert!((f - 0.25).abs() < 1e-12 && (f - oracle).abs() < 1e-12);
        assert!(gate_fidelity(&p[1].scale(2.0), &depolarizing).is_err());
    }

    #[test]
    fn reduced_map_of_identity_and_electron_only_unitaries() {
        let params = SpinSystemParams::<f64>::malonic_acid();
        let rho_e = crate::quantum::electron_thermal_state(&params);
        let id = reduce_to_nuclear(&SuperMatrix::<f64>::identity(4), &rho_e).unwrap();
        assert!(dist(id.matrix(), &identity(4)) < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ue = random_unitary::<f64>(&mut rng, 2);
        let s = kraus_to_super(&KrausSet::unitary(ue.kronecker(&identity::<f64>(2))));
        let r = reduce_to_nuclear(&s, &rho_e).unwrap();
        assert!(dist(r.matrix(), &identity(4)) < 1e-14);
        assert!(reduce_to_nuclear(&r, &rho_e).is_err());
    }

    #[test]
    fn fixed_point_of_amplitude_damping() {
        let g = 0.3f64;
        let k = KrausSet::new(vec![
            linalg::from_real_rows::<f64>(2, &[1.0, 0.0, 0.0, (1.0 - g).sqrt()]),
            linalg::from_real_rows::<f64>(2, &[0.0, g.sqrt(), 0.0, 0.0]),
        ])
        .unwrap();
        let s = kraus_to_super(&k);
        let rho = fixed_point(&s).unwrap();
        assert!((rho.matrix()[(0, 0)].re - 1.0).abs() < 1e-12);
        let residual = s.apply_matrix(rho.matrix()).unwrap() - rho.matrix();
        assert!(norm(&residual) < 1e-8);
        assert!(matches!(
            fixed_point(&SuperMatrix::<f64>::identity(2)),
            Err(Error::DegenerateFixedPoint { count: 4, .. })
        ));
    }

    #[test]
    fn spectral_radius_of_cptp_map_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let s = kraus_to_super(&random_channel::<f64>(&mut rng, 2, 2));
        assert!((s.spectral_radius() - 1.0).abs() < 1e-9);
        assert!(s.trace_preservation_deviation() < 1e-12);
    }

    fn channel_strategy() -> impl Strategy<Value = (KrausSet<f64>, DensityMatrix<f64>, M)> {
        (any::<u64>(), 1usize..=4, prop_oneof![Just(2usize), Just(4usize)]).prop_map(|(seed, rank, d)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = random_channel::<f64>(&mut rng, d, rank);
            let rho = random_density_matrix::<f64>(&mut rng, d);
            let u = random_unitary::<f64>(&mut rng, d);
            (k, rho, u)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn representation_round_trip((k, _, _) in channel_strategy()) {
            let s = kraus_to_super(&k);
            let back = kraus_to_super(&choi_to_kraus(&super_to_choi(&s), None).unwrap());
            prop_assert!(dist(s.matrix(), back.matrix()) < 1e-9);
        }

        #[test]
        fn three_applications_agree((k, rho, _) in channel_strategy()) {
            let s = kraus_to_super(&k);
            let a = k.apply_matrix(rho.matrix()).unwrap();
            prop_assert!(dist(&a, &s.apply_matrix(rho.matrix()).unwrap()) < 1e-10);
            prop_assert!(dist(&a, &super_to_choi(&s).apply_matrix(rho.matrix()).unwrap()) < 1e-10);
        }

        #[test]
        fn composition_is_associative(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let [a, b, c] = [1, 2, 3].map(|r| kraus_to_super(&random_channel::<f64>(&mut rng, 3, r)));
            let left = a.then_after(&b).unwrap().then_after(&c).unwrap();
            let right = a.then_after(&b.then_after(&c).unwrap()).unwrap();
            prop_assert!(dist(left.matrix(), right.matrix()) < 1e-10);
        }

        #[test]
        fn fixed_point_residual((k, _, _) in channel_strategy()) {
            prop_assume!(k.len() > 1);
            let s = kraus_to_super(&k);
            let rho = fixed_point(&s).unwrap();
            let residual = s.apply_matrix(rho.matrix()).unwrap() - rho.matrix();
            prop_assert!(norm(&residual) < 1e-8);
        }

        #[test]
        fn gate_fidelity_invariances((k, _, u) in channel_strategy(), phase in 0.0f64..std::f64::consts::TAU) {
            let f = gate_fidelity(&u, &k).unwrap();
            let rotated = &u * C::new(phase.cos(), phase.sin());
            prop_assert!((gate_fidelity(&rotated, &k).unwrap() - f).abs() < 1e-12);
            let remixed = minimal_kraus(&kraus_to_super(&k)).unwrap();
            prop_assert!((gate_fidelity(&u, &remixed).unwrap() - f).abs() < 1e-9);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
        }
    }

    #[test]
    fn change_basis_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let w = random_unitary::<f64>(&mut rng, 4);
        let k = random_channel::<f64>(&mut rng, 4, 2);
        let s = kraus_to_super(&k);
        let moved = s.change_basis(&w).unwrap();
        // Oracle: conjugate each Kraus operator.
        let direct = kraus_to_super(&KrausSet::new(k.ops().iter().map(|m| w.adjoint() * m * &w).collect()).unwrap());
        assert!(dist(moved.matrix(), direct.matrix()) < 1e-12);
        let back = moved.change_basis(&w.adjoint()).unwrap();
        assert!(dist(back.matrix(), s.matrix()) < 1e-12);
    }
}
