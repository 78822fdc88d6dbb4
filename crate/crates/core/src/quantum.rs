//! Operators, Hamiltonians and states of the electron–nucleus spin pair.
//!
//! The Hilbert space is `electron ⊗ nucleus`, with product basis ordered
//! `|↑α⟩, |↑β⟩, |↓α⟩, |↓β⟩` (`↑`/`α` are the `+½` projections). Frequencies are
//! carried in Hz and converted to angular frequency inside the Hamiltonian
//! builders.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{
    self, dagger, diag, hermitian_eigen, hermitian_function, hermiticity_deviation, identity,
    kron, norm,
};
use crate::scalar::{im, lit, re, to_f64, CMatrix, Real, C};

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Temperature used when a configuration does not give one (kelvin).
pub const DEFAULT_TEMPERATURE: f64 = 293.0;

/// Tolerance helper: `nominal`, widened to a few hundred ulps for narrow scalar types.
pub(crate) fn tol<T: Real>(nominal: f64) -> f64 {
    nominal.max(512.0 * crate::scalar::epsilon::<T>())
}

/// Pauli matrices `[I, X, Y, Z]`.
pub fn paulis<T: Real>() -> [CMatrix<T>; 4] {
    let z = C::<T>::new(T::zero(), T::zero());
    let o = re(T::one());
    let i = im(T::one());
    [
        identity(2),
        DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    ]
}

/// Spin-½ operators of both spins, embedded in the 4-level space, plus the
/// bare single-spin operators.
#[derive(Debug, Clone)]
pub struct SpinOperators<T: Real> {
    pub sx: CMatrix<T>,
    pub sy: CMatrix<T>,
    pub sz: CMatrix<T>,
    pub ix: CMatrix<T>,
    pub iy: CMatrix<T>,
    pub iz: CMatrix<T>,
    /// `σ_x/2`, `σ_y/2`, `σ_z/2` on a single spin.
    pub single: [CMatrix<T>; 3],
}

impl<T: Real> SpinOperators<T> {
    pub fn new() -> Self {
        let [one, x, y, z] = paulis::<T>();
        let half = lit::<T>(0.5);
        let single = [x.scale(half), y.scale(half), z.scale(half)];
        Self {
            sx: kron(&single[0], &one),
            sy: kron(&single[1], &one),
            sz: kron(&single[2], &one),
            ix: kron(&one, &single[0]),
            iy: kron(&one, &single[1]),
            iz: kron(&one, &single[2]),
            single,
        }
    }

    /// Operators by name: `Sx, Sy, Sz, Ix, Iy, Iz` (4×4) and `sx, sy, sz` (2×2).
    pub fn named(&self) -> BTreeMap<&'static str, CMatrix<T>> {
        BTreeMap::from([
            ("Sx", self.sx.clone()),
            ("Sy", self.sy.clone()),
            ("Sz", self.sz.clone()),
            ("Ix", self.ix.clone()),
            ("Iy", self.iy.clone()),
            ("Iz", self.iz.clone()),
            ("sx", self.single[0].clone()),
            ("sy", self.single[1].clone()),
            ("sz", self.single[2].clone()),
        ])
    }
}

impl<T: Real> Default for SpinOperators<T> {
    fn default() -> Self {
        Self::new()
    }
}

pub fn spin_operators<T: Real>() -> SpinOperators<T> {
    SpinOperators::new()
}

/// Physical constants of the hyperfine-coupled pair. Frequencies in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinSystemParams<T> {
    /// Electron Larmor frequency.
    pub omega_s: T,
    /// Nuclear Larmor frequency.
    pub omega_i: T,
    /// Isotropic hyperfine coupling `A`.
    pub a_iso: T,
    /// Anisotropic hyperfine coupling `B`.
    pub b_aniso: T,
    /// Kelvin.
    pub temperature: T,
}

impl<T: Real> SpinSystemParams<T> {
    /// Irradiated malonic acid at 3406 G in the orientation of maximal nuclear
    /// state mixing.
    pub fn malonic_acid() -> Self {
        Self {
            omega_s: lit(9.59e9),
            omega_i: lit(14.57e6),
            a_iso: lit(-42.7e6),
            b_aniso: lit(14.7e6),
            temperature: lit(DEFAULT_TEMPERATURE),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega_s", self.omega_s),
            ("omega_i", self.omega_i),
            ("a_iso", self.a_iso),
            ("b_aniso", self.b_aniso),
            ("temperature", self.temperature),
        ];
        for (name, v) in fields {
            if !to_f64(v).is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        if self.omega_s <= T::zero() {
            return Err(Error::param("omega_s", "must be positive"));
        }
        if self.omega_i <= T::zero() {
            return Err(Error::param("omega_i", "must be positive"));
        }
        if self.temperature <= T::zero() {
            return Err(Error::param("temperature", "must be positive"));
        }
        if to_f64(self.omega_s / self.omega_i) < 100.0 {
            log::warn!(
                "omega_s/omega_i = {:.1} < 100: the secular high-field approximation is questionable",
                to_f64(self.omega_s / self.omega_i)
            );
        }
        Ok(())
    }

    /// Thermal upper-level population of a two-level system with splitting
    /// `frequency` (Hz): `1 / (1 + exp(hν/k_BT))`.
    pub fn upper_population(&self, frequency: T) -> T {
        let x = to_f64(frequency) * PLANCK / (BOLTZMANN * to_f64(self.temperature));
        lit(1.0 / (1.0 + x.exp()))
    }

    /// Thermal polarization `tanh(hν/2k_BT)` of a two-level system with splitting `frequency`.
    pub fn thermal_polarization(&self, frequency: T) -> T {
        let x = to_f64(frequency) * PLANCK / (2.0 * BOLTZMANN * to_f64(self.temperature));
        lit(x.tanh())
    }
}

/// Reference frame in which the drift Hamiltonian is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HamiltonianFrame {
    Lab,
    /// Rotating at the electron Larmor frequency; the `ω_S S_z` term drops out.
    ElectronRotating,
}

/// `2π(ω_S S_z + ω_I I_z + A S_z I_z + B S_z I_x)` in rad/s.
pub fn drift_hamiltonian<T: Real>(params: &SpinSystemParams<T>, frame: HamiltonianFrame) -> Result<CMatrix<T>> {
    params.validate()?;
    let ops = spin_operators::<T>();
    let two_pi = lit::<T>(2.0 * PI);
    let mut h = ops.iz.scale(params.omega_i)
        + (&ops.sz * &ops.iz).scale(params.a_iso)
        + (&ops.sz * &ops.ix).scale(params.b_aniso);
    if frame == HamiltonianFrame::Lab {
        h += ops.sz.scale(params.omega_s);
    }
    Ok(h.scale(two_pi))
}

/// Which DNP pathway a microwave drive addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mechanism {
    /// Drive on the electron transitions, `ω_d S_x ⊗ 𝟙`.
    Overhauser,
    /// Drive on the zero-quantum transition, `ω_d (S_x I_x + S_y I_y)`.
    SolidEffect,
}

impl std::str::FromStr for Mechanism {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "oe" | "overhauser" => Ok(Mechanism::Overhauser),
            "se" | "solid" | "solid-effect" => Ok(Mechanism::SolidEffect),
            other => Err(Error::param("kind", format!("unknown mechanism `{other}`"))),
        }
    }
}

/// Control Hamiltonian in the electron rotating frame, rad/s. `omega_d` in Hz.
pub fn control_hamiltonian<T: Real>(kind: Mechanism, omega_d: T) -> Result<CMatrix<T>> {
    if !to_f64(omega_d).is_finite() || omega_d < T::zero() {
        return Err(Error::param("omega_d", "must be finite and non-negative"));
    }
    let ops = spin_operators::<T>();
    let scale = lit::<T>(2.0 * PI) * omega_d;
    Ok(match kind {
        Mechanism::Overhauser => ops.sx.scale(scale),
        Mechanism::SolidEffect => (&ops.sx * &ops.ix + &ops.sy * &ops.iy).scale(scale),
    })
}

/// Electron and nuclear quantum numbers attached to a drift eigenstate.
///
/// `nuclear_up` marks the eigenstate of its electron manifold with the larger
/// `⟨I_z⟩`, i.e. the one that continues to `α` as the hyperfine mixing vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelLabel {
    pub electron_up: bool,
    pub nuclear_up: bool,
}

impl LevelLabel {
    /// Position in the product-like order `↑α, ↑β, ↓α, ↓β`.
    pub fn index(&self) -> usize {
        (!self.electron_up as usize) * 2 + (!self.nuclear_up as usize)
    }
}

/// Eigenbasis of a Hamiltonian: `H = V diag(λ) V†`, `λ` ascending.
#[derive(Debug, Clone)]
pub struct Frame<T: Real> {
    pub vectors: CMatrix<T>,
    /// rad/s, ascending.
    pub energies: Vec<T>,
    /// Quantum-number labels per column; present when every eigenvector has a
    /// definite electron spin projection.
    pub labels: Option<Vec<LevelLabel>>,
}

impl<T: Real> Frame<T> {
    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    /// Unitary whose columns are the eigenvectors reordered into the labelled
    /// order `↑α, ↑β, ↓α, ↓β`. Operators written in "eigen-product" form map to
    /// the product basis as `W M W†`.
    pub fn label_basis(&self) -> Result<CMatrix<T>> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::Numeric("frame eigenvectors lack definite electron spin labels".into()))?;
        let mut w = linalg::zeros::<T>(4);
        for (col, label) in labels.iter().enumerate() {
            w.set_column(label.index(), &self.vectors.column(col));
        }
        Ok(w)
    }

    /// The same eigenbasis seen from itself: identity vectors in labelled
    /// order. Operators built against it are expressed in the label basis.
    pub fn labelled(&self) -> Result<Frame<T>> {
        let energies = self.labelled_energies()?.to_vec();
        let labels = (0..4)
            .map(|i| LevelLabel {
                electron_up: i < 2,
                nuclear_up: i % 2 == 0,
            })
            .collect();
        Ok(Frame {
            vectors: linalg::identity(4),
            energies,
            labels: Some(labels),
        })
    }

    /// Eigen-energies (rad/s) in labelled order `↑α, ↑β, ↓α, ↓β`.
    pub fn labelled_energies(&self) -> Result<[T; 4]> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::Numeric("frame eigenvectors lack definite electron spin labels".into()))?;
        let mut out = [T::zero(); 4];
        for (col, label) in labels.iter().enumerate() {
            out[label.index()] = self.energies[col];
        }
        Ok(out)
    }

    /// Converts an operator written in the labelled eigenbasis to the product basis.
    pub fn to_product(&self, m: &CMatrix<T>) -> Result<CMatrix<T>> {
        let w = self.label_basis()?;
        Ok(&w * m * w.adjoint())
    }
}

/// Eigenframe of a Hermitian Hamiltonian with the crate's deterministic ordering
/// and phase conventions (see [`linalg::hermitian_eigen`]).
pub fn eigenframe<T: Real>(h: &CMatrix<T>) -> Result<Frame<T>> {
    let dev = hermiticity_deviation(h);
    let scale = to_f64(norm(h)).max(1.0);
    if dev > tol::<T>(1e-10) * scale {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let (energies, vectors) = hermitian_eigen(h);
    let labels = if h.nrows() == 4 { assign_labels(&vectors) } else { None };
    Ok(Frame {
        vectors,
        energies,
        labels,
    })
}

/// Eigenframe of a secular two-spin Hamiltonian (one commuting with `S_z`).
///
/// Each electron manifold is diagonalized on its own so that eigenvectors keep
/// a definite electron projection even when levels of different manifolds are
/// degenerate.
pub fn secular_eigenframe<T: Real>(h: &CMatrix<T>) -> Result<Frame<T>> {
    if h.nrows() != 4 || h.ncols() != 4 {
        return Err(Error::dim("4x4", format!("{}x{}", h.nrows(), h.ncols())));
    }
    let ops = spin_operators::<T>();
    let leak = to_f64(norm(&linalg::commutator(h, &ops.sz)));
    if leak > tol::<T>(1e-9) * to_f64(norm(h)).max(1.0) {
        return Err(Error::Numeric(format!(
            "Hamiltonian is not secular in the electron spin (‖[H,S_z]‖ = {leak:.3e})"
        )));
    }
    let dev = hermiticity_deviation(h);
    if dev > tol::<T>(1e-10) * to_f64(norm(h)).max(1.0) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let mut pairs: Vec<(T, nalgebra::DVector<C<T>>, LevelLabel)> = Vec::with_capacity(4);
    for (offset, electron_up) in [(0usize, true), (2usize, false)] {
        let block = h.view((offset, offset), (2, 2)).into_owned();
        let (values, vectors) = hermitian_eigen(&block);
        let iz = [vectors[(0, 0)].norm_sqr() - vectors[(1, 0)].norm_sqr(), vectors[(0, 1)].norm_sqr() - vectors[(1, 1)].norm_sqr()];
        let up_col = if iz[0] >= iz[1] { 0 } else { 1 };
        for k in 0..2 {
            let mut v = nalgebra::DVector::zeros(4);
            v[offset] = vectors[(0, k)];
            v[offset + 1] = vectors[(1, k)];
            pairs.push((
                values[k],
                v,
                LevelLabel {
                    electron_up,
                    nuclear_up: k == up_col,
                },
            ));
        }
    }
    // Reuse the global ordering rule so frames compare equal to `eigenframe` on
    // non-degenerate spectra.
    pairs.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.2.index().cmp(&b.2.index()))
    });
    let mut vectors = linalg::zeros::<T>(4);
    for (k, (_, v, _)) in pairs.iter().enumerate() {
        vectors.set_column(k, v);
    }
    Ok(Frame {
        vectors,
        energies: pairs.iter().map(|p| p.0).collect(),
        labels: Some(pairs.iter().map(|p| p.2).collect()),
    })
}

fn assign_labels<T: Real>(vectors: &CMatrix<T>) -> Option<Vec<LevelLabel>> {
    let ops = spin_operators::<T>();
    let mut labels = Vec::with_capacity(4);
    let mut iz = Vec::with_capacity(4);
    for k in 0..4 {
        let v = vectors.column(k);
        let sz = to_f64((v.adjoint() * &ops.sz * v)[(0, 0)].re);
        if (sz.abs() - 0.5).abs() > 1e-6 {
            return None;
        }
        iz.push(to_f64((v.adjoint() * &ops.iz * v)[(0, 0)].re));
        labels.push(LevelLabel {
            electron_up: sz > 0.0,
            nuclear_up: false,
        });
    }
    for manifold in [true, false] {
        let cols: Vec<usize> = (0..4).filter(|&k| labels[k].electron_up == manifold).collect();
        if cols.len() != 2 {
            return None;
        }
        let up = if iz[cols[0]] >= iz[cols[1]] { cols[0] } else { cols[1] };
        labels[up].nuclear_up = true;
    }
    Some(labels)
}

/// `exp(−i H dt)` for Hermitian `H` (rad/s) and `dt` in seconds.
pub fn propagator<T: Real>(h: &CMatrix<T>, dt: T) -> Result<CMatrix<T>> {
    if !to_f64(dt).is_finite() {
        return Err(Error::param("dt", "must be finite"));
    }
    if dt < T::zero() {
        return Err(Error::param("dt", "must be non-negative"));
    }
    if dt == T::zero() {
        return Ok(identity(h.nrows()));
    }
    Ok(hermitian_function(h, |e| {
        let phase = -e * dt;
        C::new(phase.cos(), phase.sin())
    }))
}

/// Positive semidefinite, unit-trace Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Real> {
    matrix: CMatrix<T>,
}

impl<T: Real> DensityMatrix<T> {
    /// Validates trace (1e-10), Hermiticity (1e-12) and positivity (−1e-10).
    pub fn new(matrix: CMatrix<T>) -> Result<Self> {
        let d = matrix.nrows();
        if matrix.ncols() != d || !(d == 2 || d == 4) {
            return Err(Error::dim("2x2 or 4x4", format!("{}x{}", matrix.nrows(), matrix.ncols())));
        }
        let herm = hermiticity_deviation(&matrix);
        if herm > tol::<T>(1e-12) {
            return Err(Error::NotHermitian { deviation: herm });
        }
        let tr = matrix.trace();
        if (to_f64(tr.re) - 1.0).abs() > tol::<T>(1e-10) || to_f64(tr.im).abs() > tol::<T>(1e-10) {
            return Err(Error::Numeric(format!("trace {} ≠ 1", to_f64(tr.re))));
        }
        let (values, _) = hermitian_eigen(&matrix);
        let min = to_f64(values[0]);
        if min < -tol::<T>(1e-10) {
            return Err(Error::Numeric(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self { matrix })
    }

    /// Hermitizes and renormalizes a matrix that is a density matrix up to roundoff.
    pub fn normalized(matrix: CMatrix<T>) -> Result<Self> {
        let h = linalg::hermitize(&matrix);
        let tr = h.trace().re;
        if tr.abs() <= T::default_epsilon() {
            return Err(Error::Numeric("zero trace".into()));
        }
        Self::new(h.unscale(tr))
    }

    pub(crate) fn from_trusted(matrix: CMatrix<T>) -> Self {
        Self { matrix }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            matrix: identity::<T>(d).unscale(lit(d as f64)),
        }
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn expectation(&self, op: &CMatrix<T>) -> T {
        (&self.matrix * op).trace().re
    }

    pub fn purity(&self) -> T {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn tensor(&self, other: &DensityMatrix<T>) -> DensityMatrix<T> {
        DensityMatrix {
            matrix: kron(&self.matrix, &other.matrix),
        }
    }
}

/// Populations of the electron levels `(↑, ↓)` at thermal equilibrium.
pub fn electron_thermal_state<T: Real>(params: &SpinSystemParams<T>) -> DensityMatrix<T> {
    let p = params.upper_population(params.omega_s);
    DensityMatrix::from_trusted(diag(&[re(p), re(T::one() - p)]))
}

/// Populations of the nuclear levels `(α, β)` for the Zeeman term `ω_I I_z`.
pub fn nuclear_thermal_state<T: Real>(params: &SpinSystemParams<T>) -> DensityMatrix<T> {
    let p = params.upper_population(params.omega_i);
    DensityMatrix::from_trusted(diag(&[re(p), re(T::one() - p)]))
}

/// Normalized Gibbs state of the Zeeman Hamiltonian `ω_S S_z + ω_I I_z`.
pub fn thermal_state<T: Real>(params: &SpinSystemParams<T>) -> DensityMatrix<T> {
    electron_thermal_state(params).tensor(&nuclear_thermal_state(params))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    Electron,
    Nucleus,
}

/// Partial trace over `traced` of a 4×4 matrix, leaving a 2×2 matrix.
pub fn partial_trace_matrix<T: Real>(m: &CMatrix<T>, traced: Subsystem) -> Result<CMatrix<T>> {
    if m.nrows() != 4 || m.ncols() != 4 {
        return Err(Error::dim("4x4", format!("{}x{}", m.nrows(), m.ncols())));
    }
    let mut out = linalg::zeros::<T>(2);
    for a in 0..2 {
        for b in 0..2 {
            for k in 0..2 {
                out[(a, b)] += match traced {
                    Subsystem::Electron => m[(2 * k + a, 2 * k + b)],
                    Subsystem::Nucleus => m[(2 * a + k, 2 * b + k)],
                };
            }
        }
    }
    Ok(out)
}

/// Reduced state after tracing out `traced`.
pub fn partial_trace<T: Real>(rho: &DensityMatrix<T>, traced: Subsystem) -> Result<DensityMatrix<T>> {
    Ok(DensityMatrix::from_trusted(partial_trace_matrix(rho.matrix(), traced)?))
}

/// Labels of the two-qubit Pauli strings in row order `II, IX, …, ZZ`.
pub const PAULI_LABELS: [&str; 16] = [
    "II", "IX", "IY", "IZ", "XI", "XX", "XY", "XZ", "YI", "YX", "YY", "YZ", "ZI", "ZX", "ZY", "ZZ",
];

/// Coefficients `c_ab = Tr((σ_a ⊗ σ_b)† op)/4`, index `4a + b` with `a` the electron Pauli.
pub fn pauli_decompose<T: Real>(op: &CMatrix<T>) -> Result<[C<T>; 16]> {
    if op.nrows() != 4 || op.ncols() != 4 {
        return Err(Error::dim("4x4", format!("{}x{}", op.nrows(), op.ncols())));
    }
    let p = paulis::<T>();
    let mut out = [C::new(T::zero(), T::zero()); 16];
    for a in 0..4 {
        for b in 0..4 {
            let basis = kron(&p[a], &p[b]);
            out[4 * a + b] = (dagger(&basis) * op).trace().unscale(lit(4.0));
        }
    }
    Ok(out)
}

pub fn pauli_reconstruct<T: Real>(coefficients: &[C<T>; 16]) -> CMatrix<T> {
    let p = paulis::<T>();
    let mut out = linalg::zeros::<T>(4);
    for a in 0..4 {
        for b in 0..4 {
            out += kron(&p[a], &p[b]) * coefficients[4 * a + b];
        }
    }
    out
}
