//! Small dense complex linear algebra helpers.
//!
//! Vectorization is column stacking everywhere: `vec(A)[i + j*d] = A[(i, j)]`,
//! so `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{lit, re, to_f64, CMatrix, CVector, Real, C};

pub fn zeros<T: Real>(n: usize) -> CMatrix<T> {
    DMatrix::zeros(n, n)
}

pub fn identity<T: Real>(n: usize) -> CMatrix<T> {
    DMatrix::identity(n, n)
}

pub fn from_real_rows<T: Real>(n: usize, rows: &[f64]) -> CMatrix<T> {
    assert_eq!(rows.len(), n * n);
    DMatrix::from_row_iterator(n, n, rows.iter().map(|&x| re(lit::<T>(x))))
}

pub fn diag<T: Real>(entries: &[C<T>]) -> CMatrix<T> {
    DMatrix::from_diagonal(&DVector::from_column_slice(entries))
}

pub fn dagger<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    m.adjoint()
}

pub fn kron<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a.kronecker(b)
}

pub fn commutator<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a * b - b * a
}

pub fn trace<T: Real>(m: &CMatrix<T>) -> C<T> {
    m.trace()
}

/// Frobenius norm.
pub fn norm<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
}

pub fn hermiticity_deviation<T: Real>(m: &CMatrix<T>) -> f64 {
    to_f64(norm(&(m - m.adjoint())))
}

pub fn unitarity_deviation<T: Real>(u: &CMatrix<T>) -> f64 {
    let n = u.nrows();
    to_f64(norm(&(u.adjoint() * u - identity::<T>(n))))
}

pub fn hermitize<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    (m + m.adjoint()).scale(lit(0.5))
}

pub fn vec<T: Real>(m: &CMatrix<T>) -> CVector<T> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unvec<T: Real>(v: &CVector<T>, d: usize) -> CMatrix<T> {
    assert_eq!(v.len(), d * d);
    DMatrix::from_column_slice(d, d, v.as_slice())
}

/// Integer square root of a perfect square, used to recover `d` from `d²`.
pub fn square_root_dim(n: usize) -> Result<usize> {
    let d = (n as f64).sqrt().round() as usize;
    if d * d == n {
        Ok(d)
    } else {
        Err(Error::dim("a perfect square", n))
    }
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues ascending.
///
/// Each eigenvector is rephased so its largest-magnitude entry is real and
/// positive (first such entry on magnitude ties). Equal eigenvalues are ordered
/// lexicographically on the rephased eigenvector entries (real, then imaginary).
pub fn hermitian_eigen<T: Real>(h: &CMatrix<T>) -> (Vec<T>, CMatrix<T>) {
    let n = h.nrows();
    let eig = hermitize(h).symmetric_eigen();
    let mut pairs: Vec<(T, CVector<T>)> = (0..n)
        .map(|k| (eig.eigenvalues[k], rephase(eig.eigenvectors.column(k).into_owned())))
        .collect();
    let scale = pairs.iter().fold(T::zero(), |m, (l, _)| m.max(l.abs()));
    let tie = lit::<T>(64.0) * T::default_epsilon() * (T::one() + scale);
    pairs.sort_by(|(la, va), (lb, vb)| {
        if (*la - *lb).abs() <= tie {
            lexicographic(va, vb)
        } else {
            la.partial_cmp(lb).unwrap_or(std::cmp::Ordering::Equal)
        }
    });
    let values = pairs.iter().map(|(l, _)| *l).collect();
    let mut vectors = zeros::<T>(n);
    for (k, (_, v)) in pairs.iter().enumerate() {
        vectors.set_column(k, v);
    }
    (values, vectors)
}

fn rephase<T: Real>(v: CVector<T>) -> CVector<T> {
    let mut best = 0;
    let mut best_mag = T::zero();
    let guard = lit::<T>(1.0 + 1e-9);
    for (i, z) in v.iter().enumerate() {
        let m = z.norm_sqr().sqrt();
        if m > best_mag * guard {
            best = i;
            best_mag = m;
        }
    }
    if best_mag == T::zero() {
        return v;
    }
    let phase = v[best].unscale(best_mag).conj();
    v.map(|z| z * phase)
}

fn lexicographic<T: Real>(a: &CVector<T>, b: &CVector<T>) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let o = x
            .re
            .partial_cmp(&y.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.im.partial_cmp(&y.im).unwrap_or(std::cmp::Ordering::Equal));
        if o != std::cmp::Ordering::Equal {
            return o;
        }
    }
    std::cmp::Ordering::Equal
}

/// `f(H)` for Hermitian `H`, applied through its eigendecomposition.
pub fn hermitian_function<T: Real>(h: &CMatrix<T>, f: impl Fn(T) -> C<T>) -> CMatrix<T> {
    let (values, vectors) = hermitian_eigen(h);
    let d = diag(&values.iter().map(|&l| f(l)).collect::<Vec<_>>());
    &vectors * d * vectors.adjoint()
}

/// Matrix exponential computed separately on each block of the exact-zero
/// sparsity pattern, so small decoupled blocks keep their own scaling.
pub fn block_exp<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let zero = C::<T>::new(T::zero(), T::zero());
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)] != zero {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut root_of = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_of[r] == usize::MAX {
            root_of[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[root_of[r]].push(i);
    }
    let mut out = zeros(n);
    for idx in blocks {
        let k = idx.len();
        let sub = DMatrix::from_fn(k, k, |a, b| m[(idx[a], idx[b])]).exp();
        for a in 0..k {
            for b in 0..k {
                out[(idx[a], idx[b])] = sub[(a, b)];
            }
        }
    }
    out
}

pub fn complex<T: Real>(re: f64, im: f64) -> C<T> {
    Complex::new(lit(re), lit(im))
}

/// Plain-text dump of a matrix: one row per line, `re,im` pairs separated by spaces.
pub fn dump_matrix<T: Real>(m: &CMatrix<T>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:e},{:e}", to_f64(m[(i, j)].re), to_f64(m[(i, j)].im)))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Inverse of [`dump_matrix`].
pub fn parse_matrix<T: Real>(text: &str) -> Result<CMatrix<T>> {
    let rows: Vec<Vec<C<T>>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            line.split_whitespace()
                .map(|pair| {
                    let (a, b) = pair
                        .split_once(',')
                        .ok_or_else(|| Error::Numeric(format!("bad entry `{pair}`")))?;
                    let a: f64 = a.parse().map_err(|_| Error::Numeric(format!("bad number `{a}`")))?;
                    let b: f64 = b.parse().map_err(|_| Error::Numeric(format!("bad number `{b}`")))?;
                    Ok(Complex::new(lit(a), lit(b)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::dim("square matrix", "ragged rows"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}
