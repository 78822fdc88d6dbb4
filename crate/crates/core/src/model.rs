//! Relaxation channels, time-stepped open evolution, idealized DNP cycles and
//! the reduced polarizing maps on the nucleus.
//!
//! Relaxation operators are written in the labelled drift eigenbasis
//! `↑α, ↑β, ↓α, ↓β` (see [`Frame::label_basis`]) and conjugated back to the
//! product basis.

use nalgebra::DMatrix;

use crate::channels::{compose, kraus_to_super, reduce_to_nuclear, KrausSet, SuperMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, block_exp, diag, hermitian_eigen, identity};
use crate::quantum::{
    drift_hamiltonian, electron_thermal_state, partial_trace, propagator, secular_eigenframe, spin_operators, DensityMatrix, Frame,
    HamiltonianFrame, LevelLabel, Mechanism, SpinSystemParams, Subsystem, DEFAULT_TEMPERATURE,
};
use crate::scalar::{im, lit, re, to_f64, CMatrix, Real, C};

/// Relaxation times in seconds and bath temperature in kelvin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationParams<T> {
    pub t1e: T,
    /// Zero-quantum cross relaxation time `T_x`.
    pub tzq: T,
    /// Double-quantum relaxation time; `None` disables double-quantum leakage.
    pub tdq: Option<T>,
    pub temperature: T,
}

impl<T: Real> Default for RelaxationParams<T> {
    fn default() -> Self {
        Self {
            t1e: lit(1e-3),
            tzq: lit(0.1),
            tdq: None,
            temperature: lit(DEFAULT_TEMPERATURE),
        }
    }
}

impl<T: Real> RelaxationParams<T> {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &'static str, v: T| {
            if !to_f64(v).is_finite() || v <= T::zero() {
                Err(Error::param(name, "must be finite and positive"))
            } else {
                Ok(())
            }
        };
        check("t1e", self.t1e)?;
        check("tzq", self.tzq)?;
        check("temperature", self.temperature)?;
        if let Some(tdq) = self.tdq {
            check("tdq", tdq)?;
        }
        Ok(())
    }

    /// Shortest active relaxation time.
    pub fn shortest(&self) -> T {
        let m = self.t1e.min(self.tzq);
        self.tdq.map_or(m, |t| m.min(t))
    }

    fn bath(&self, sys: &SpinSystemParams<T>) -> SpinSystemParams<T> {
        SpinSystemParams {
            temperature: self.temperature,
            ..*sys
        }
    }
}

/// Which relaxation processes an evolution step includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RelaxationSet {
    pub t1e: bool,
    pub tx: bool,
    pub tdq: bool,
}

impl RelaxationSet {
    pub const NONE: Self = Self {
        t1e: false,
        tx: false,
        tdq: false,
    };
    pub const STANDARD: Self = Self {
        t1e: true,
        tx: true,
        tdq: false,
    };
    pub const WITH_DQ: Self = Self {
        t1e: true,
        tx: true,
        tdq: true,
    };

    /// Standard set, plus double-quantum relaxation when `r` configures it.
    pub fn for_params<T: Real>(r: &RelaxationParams<T>) -> Self {
        if r.tdq.is_some() {
            Self::WITH_DQ
        } else {
            Self::STANDARD
        }
    }
}

/// Level pairs addressed by a transition-selective rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transition {
    /// `↑α ↔ ↓α`
    Electron1,
    /// `↑β ↔ ↓β`
    Electron2,
    /// `↑β ↔ ↓α`
    ZeroQuantum,
    /// `↑α ↔ ↓β`
    DoubleQuantum,
}

impl Transition {
    pub const ALL: [Transition; 4] = [
        Transition::Electron1,
        Transition::Electron2,
        Transition::ZeroQuantum,
        Transition::DoubleQuantum,
    ];

    /// Label-basis indices `(electron up member, electron down member)`.
    pub fn levels(self) -> (usize, usize) {
        let idx = |e, n| LevelLabel {
            electron_up: e,
            nuclear_up: n,
        }
        .index();
        match self {
            Transition::Electron1 => (idx(true, true), idx(false, true)),
            Transition::Electron2 => (idx(true, false), idx(false, false)),
            Transition::ZeroQuantum => (idx(true, false), idx(false, true)),
            Transition::DoubleQuantum => (idx(true, true), idx(false, false)),
        }
    }
}

/// Labelled eigenframe of the rotating-frame drift Hamiltonian.
pub fn relaxation_frame<T: Real>(sys: &SpinSystemParams<T>) -> Result<Frame<T>> {
    secular_eigenframe(&drift_hamiltonian(sys, HamiltonianFrame::ElectronRotating)?)
}

fn check_dt<T: Real>(dt: T) -> Result<()> {
    if !to_f64(dt).is_finite() || dt < T::zero() {
        return Err(Error::param("dt", "must be finite and non-negative"));
    }
    Ok(())
}

fn check_frame<T: Real>(frame: &Frame<T>) -> Result<CMatrix<T>> {
    if frame.dim() != 4 {
        return Err(Error::dim("4-level frame", frame.dim()));
    }
    frame.label_basis()
}

fn sqrt<T: Real>(x: T) -> T {
    x.max(T::zero()).sqrt()
}

/// Generalized amplitude damping on the label-basis pair `(upper, lower)`,
/// identity elsewhere. `p_upper` is the stationary upper fraction within the pair.
fn pair_damping<T: Real>(upper: usize, lower: usize, eps: T, p_upper: T) -> Vec<CMatrix<T>> {
    let one = T::one();
    let w_up = sqrt(p_upper);
    let w_down = sqrt(one - p_upper);
    let decay = sqrt(one - eps);
    let mut b1 = identity::<T>(4).scale(w_up);
    b1[(lower, lower)] = re(w_up * eps.sqrt());
    let mut b2 = linalg::zeros::<T>(4);
    b2[(upper, lower)] = re(w_up * decay);
    let mut b3 = identity::<T>(4).scale(w_down);
    b3[(upper, upper)] = re(w_down * eps.sqrt());
    let mut b4 = linalg::zeros::<T>(4);
    b4[(lower, upper)] = re(w_down * decay);
    vec![b1, b2, b3, b4]
}

fn to_product<T: Real>(w: &CMatrix<T>, ops: Vec<CMatrix<T>>) -> Result<KrausSet<T>> {
    KrausSet::new(ops.into_iter().map(|m| w * m * w.adjoint()).collect())
}

/// Electron spin-lattice relaxation (operators `A₁…A₄`) over `dt` seconds.
///
/// Acts as `(2×2) ⊗ 𝟙` in the labelled eigenbasis with `ε = exp(−dt/T1e)`.
pub fn t1e_channel<T: Real>(
    dt: T,
    r: &RelaxationParams<T>,
    sys: &SpinSystemParams<T>,
    frame: &Frame<T>,
) -> Result<KrausSet<T>> {
    check_dt(dt)?;
    let w = check_frame(frame)?;
    let bath = r.bath(sys);
    let p = bath.upper_population(sys.omega_s);
    let eps = (-dt / r.t1e).exp();
    let one = T::one();
    let id2 = identity::<T>(2);
    let e = |rows: [f64; 4]| DMatrix::from_row_iterator(2, 2, rows.iter().map(|&x| re(lit::<T>(x))));
    let se = to_f64(eps.sqrt());
    let decay = to_f64(sqrt(one - eps));
    let ops = vec![
        e([1.0, 0.0, 0.0, se]).scale(sqrt(p)),
        e([0.0, decay, 0.0, 0.0]).scale(sqrt(p)),
        e([se, 0.0, 0.0, 1.0]).scale(sqrt(one - p)),
        e([0.0, 0.0, decay, 0.0]).scale(sqrt(one - p)),
    ]
    .into_iter()
    .map(|a| a.kronecker(&id2))
    .collect();
    to_product(&w, ops)
}

/// Zero-quantum cross relaxation (operators `B₁…B₄`) over `dt` seconds.
pub fn tx_channel<T: Real>(
    dt: T,
    r: &RelaxationParams<T>,
    sys: &SpinSystemParams<T>,
    frame: &Frame<T>,
) -> Result<KrausSet<T>> {
    check_dt(dt)?;
    let w = check_frame(frame)?;
    let p = r.bath(sys).upper_population(sys.omega_s - sys.omega_i);
    let (upper, lower) = Transition::ZeroQuantum.levels();
    to_product(&w, pair_damping(upper, lower, (-dt / r.tzq).exp(), p))
}

/// Double-quantum relaxation on `↑α ↔ ↓β`, built like [`tx_channel`].
pub fn tdq_channel<T: Real>(
    dt: T,
    r: &RelaxationParams<T>,
    sys: &SpinSystemParams<T>,
    frame: &Frame<T>,
) -> Result<KrausSet<T>> {
    check_dt(dt)?;
    let tdq = r
        .tdq
        .ok_or_else(|| Error::param("tdq", "double-quantum relaxation time not configured"))?;
    let w = check_frame(frame)?;
    let p = r.bath(sys).upper_population(sys.omega_s + sys.omega_i);
    let (upper, lower) = Transition::DoubleQuantum.levels();
    to_product(&w, pair_damping(upper, lower, (-dt / tdq).exp(), p))
}

fn warn_step<T: Real>(dt: T, r: &RelaxationParams<T>, include: RelaxationSet) {
    let mut shortest = f64::INFINITY;
    if include.t1e {
        shortest = shortest.min(to_f64(r.t1e));
    }
    if include.tx {
        shortest = shortest.min(to_f64(r.tzq));
    }
    if include.tdq {
        if let Some(t) = r.tdq {
            shortest = shortest.min(to_f64(t));
        }
    }
    if to_f64(dt) > shortest / 20.0 {
        log::warn!(
            "time step {:.3e} s exceeds 1/20 of the shortest relaxation time {:.3e} s",
            to_f64(dt),
            shortest
        );
    }
}

fn relaxation_kraus<T: Real>(
    dt: T,
    r: &RelaxationParams<T>,
    sys: &SpinSystemParams<T>,
    frame: &Frame<T>,
    include: RelaxationSet,
) -> Result<Vec<KrausSet<T>>> {
    // Innermost first.
    let mut parts = Vec::new();
    if include.tdq {
        parts.push(tdq_channel(dt, r, sys, frame)?);
    }
    if include.tx {
        parts.push(tx_channel(dt, r, sys, frame)?);
    }
    if include.t1e {
        parts.push(t1e_channel(dt, r, sys, frame)?);
    }
    Ok(parts)
}

/// One step of open evolution: propagate under `h_total` (rad/s), then the
/// selected relaxation channels in the order `T_dq`, `T_x`, `T1ᵉ`.
pub fn evolution_step<T: Real>(
    h_total: &CMatrix<T>,
    dt: T,
    r: &RelaxationParams<T>,
    sys: &SpinSystemParams<T>,
    frame: &Frame<T>,
    include: RelaxationSet,
) -> Result<KrausSet<T>> {
    check_dt(dt)?;
    warn_step(dt, r, include);
    let mut map = KrausSet::unitary(propagator(h_total, dt)?);
    for part in relaxation_kraus(dt, r, sys, frame, include)? {
        map = compose(&part, &map)?;
    }
    Ok(map)
}

/// Supermatrix of the relaxation part of [`evolution_step`].
pub fn relaxation_super<T: Real>(
    dt: T,
    r: &RelaxationParams<T>,
    sys: &SpinSystemParams<T>,
    frame: &Frame<T>,
    include: RelaxationSet,
) -> Result<SuperMatrix<T>> {
    let mut s = SuperMatrix::identity(4);
    for part in relaxation_kraus(dt, r, sys, frame, include)? {
        s = kraus_to_super(&part).then_after(&s)?;
    }
    Ok(s)
}

/// Supermatrix of [`evolution_step`], without enumerating Kraus products.
pub fn evolution_step_super<T: Real>(
    h_total: &CMatrix<T>,
    dt: T,
    r: &RelaxationParams<T>,
    sys: &SpinSystemParams<T>,
    frame: &Frame<T>,
    include: RelaxationSet,
) -> Result<SuperMatrix<T>> {
    check_dt(dt)?;
    warn_step(dt, r, include);
    let u = kraus_to_super(&KrausSet::unitary(propagator(h_total, dt)?));
    relaxation_super(dt, r, sys, frame, include)?.then_after(&u)
}

/// `vec(L ρ L†) − ½ vec({L†L, ρ})` as a matrix on column-stacked `vec(ρ)`.
fn dissipator<T: Real>(l: &CMatrix<T>) -> CMatrix<T> {
    let n = l.nrows();
    let id = identity::<T>(n);
    let ldl = l.adjoint() * l;
    l.map(|z| z.conj()).kronecker(l) - (id.kronecker(&ldl) + ldl.transpose().kronecker(&id)).scale(lit(0.5))
}

/// `−i(𝟙 ⊗ H − Hᵀ ⊗ 𝟙)`: the generator of `ρ ↦ e^{−iHt} ρ e^{iHt}`.
pub fn hamiltonian_generator<T: Real>(h: &CMatrix<T>) -> CMatrix<T> {
    let id = identity::<T>(h.nrows());
    (id.kronecker(h) - h.transpose().kronecker(&id)).map(|z| z * im(-T::one()))
}

/// Generator of the selected relaxation channels in the limit of vanishing
/// step, with jump operators `√(p/T) |u⟩⟨l|` and `√((1−p)/T) |l⟩⟨u|` in the
/// labelled eigenbasis. For `T1ᵉ` the two electron transitions share one
/// operator pair (`σ± ⊗ 𝟙`).
pub fn relaxation_generator<T: Real>(
    r: &RelaxationParams<T>,
    sys: &SpinSystemParams<T>,
    frame: &Frame<T>,
    include: RelaxationSet,
) -> Result<CMatrix<T>> {
    r.validate()?;
    let w = check_frame(frame)?;
    let bath = r.bath(sys);
    let one = T::one();
    // Each entry: the (upper, lower) pairs sharing one jump operator, p, T.
    let mut channels: Vec<(Vec<(usize, usize)>, T, T)> = Vec::new();
    if include.t1e {
        let electron = vec![Transition::Electron1.levels(), Transition::Electron2.levels()];
        channels.push((electron, bath.upper_population(sys.omega_s), r.t1e));
    }
    if include.tx {
        let p = bath.upper_population(sys.omega_s - sys.omega_i);
        channels.push((vec![Transition::ZeroQuantum.levels()], p, r.tzq));
    }
    if include.tdq {
        let tdq = r
            .tdq
            .ok_or_else(|| Error::param("tdq", "double-quantum relaxation time not configured"))?;
        let p = bath.upper_population(sys.omega_s + sys.omega_i);
        channels.push((vec![Transition::DoubleQuantum.levels()], p, tdq));
    }
    let mut g = linalg::zeros::<T>(16);
    for (pairs, p, t) in channels {
        let mut raise = linalg::zeros::<T>(4);
        let mut lower = linalg::zeros::<T>(4);
        for &(u, l) in &pairs {
            raise[(u, l)] = re(sqrt(p / t));
            lower[(l, u)] = re(sqrt((one - p) / t));
        }
        g += dissipator(&(&w * raise * w.adjoint()));
        g += dissipator(&(&w * lower * w.adjoint()));
    }
    Ok(g)
}

/// `exp(t (L_H + L_relax))`: the limit of [`evolution_step`] products as the
/// step shrinks to zero.
pub fn open_evolution_super<T: Real>(
    h: &CMatrix<T>,
    t: T,
    r: &RelaxationParams<T>,
    sys: &SpinSystemParams<T>,
    frame: &Frame<T>,
    include: RelaxationSet,
) -> Result<SuperMatrix<T>> {
    check_dt(t)?;
    let g = hamiltonian_generator(h) + relaxation_generator(r, sys, frame, include)?;
    SuperMatrix::new(block_exp(&g.scale(t)))
}

/// Stationary state of the relaxation channels: the Gibbs populations of the
/// Zeeman levels placed on the labelled drift eigenstates.
pub fn relaxation_equilibrium<T: Real>(
    r: &RelaxationParams<T>,
    sys: &SpinSystemParams<T>,
    frame: &Frame<T>,
) -> Result<DensityMatrix<T>> {
    let w = check_frame(frame)?;
    let bath = r.bath(sys);
    let pe = bath.upper_population(sys.omega_s);
    let pn = bath.upper_population(sys.omega_i);
    let one = T::one();
    let pops = [pe * pn, pe * (one - pn), (one - pe) * pn, (one - pe) * (one - pn)];
    let d = diag(&pops.map(re));
    DensityMatrix::new(&w * d * w.adjoint())
}

/// Rotation by `angle` (Bloch-sphere angle, `exp(−i θ/2 X)`) on one transition
/// of the labelled eigenbasis, returned in the product basis.
pub fn transition_rotation<T: Real>(frame: &Frame<T>, transition: Transition, angle: T) -> Result<CMatrix<T>> {
    let w = check_frame(frame)?;
    Ok(&w * label_rotation(transition, angle) * w.adjoint())
}

pub(crate) fn label_rotation<T: Real>(transition: Transition, angle: T) -> CMatrix<T> {
    let (a, b) = transition.levels();
    let half = angle * lit(0.5);
    let mut u = identity::<T>(4);
    u[(a, a)] = re(half.cos());
    u[(b, b)] = re(half.cos());
    u[(a, b)] = im(-half.sin());
    u[(b, a)] = im(-half.sin());
    u
}

/// Ideal rotation for a mechanism: both electron transitions (Overhauser) or
/// the zero-quantum transition (solid effect).
pub fn ideal_rotation<T: Real>(kind: Mechanism, frame: &Frame<T>, angle: T) -> Result<CMatrix<T>> {
    match kind {
        Mechanism::Overhauser => Ok(transition_rotation(frame, Transition::Electron1, angle)?
            * transition_rotation(frame, Transition::Electron2, angle)?),
        Mechanism::SolidEffect => transition_rotation(frame, Transition::ZeroQuantum, angle),
    }
}

/// Idealized DNP cycle repeated `n_cycles` times: a perfect rotation on the
/// mechanism's transitions followed by `dt` of `T_x` and `T1ᵉ` relaxation.
///
/// The cycle is written in the interaction frame of the drift Hamiltonian, so
/// free precession between rotations does not appear.
pub fn ideal_dnp_map<T: Real>(
    kind: Mechanism,
    sys: &SpinSystemParams<T>,
    r: &RelaxationParams<T>,
    pulse_angle: T,
    n_cycles: u64,
    dt: T,
) -> Result<SuperMatrix<T>> {
    if n_cycles == 0 {
        return Err(Error::param("n_cycles", "must be at least 1"));
    }
    r.validate()?;
    let frame = relaxation_frame(sys)?;
    let rotation = kraus_to_super(&KrausSet::unitary(ideal_rotation(kind, &frame, pulse_angle)?));
    let relax = relaxation_super(dt, r, sys, &frame, RelaxationSet::STANDARD)?;
    Ok(relax.then_after(&rotation)?.power(n_cycles))
}

/// Nuclear reduced state in the labelled eigenbasis: the full state is rotated
/// into `↑α, ↑β, ↓α, ↓β` order before the electron is traced out, so `⟨2I_z⟩`
/// is measured along each manifold's own quantization axis.
pub fn label_nuclear_state<T: Real>(rho: &DensityMatrix<T>, frame: &Frame<T>) -> Result<DensityMatrix<T>> {
    partial_trace(&to_label_state(rho, frame)?, Subsystem::Electron)
}

/// Full state expressed in the labelled eigenbasis.
pub fn to_label_state<T: Real>(rho: &DensityMatrix<T>, frame: &Frame<T>) -> Result<DensityMatrix<T>> {
    let w = check_frame(frame)?;
    Ok(DensityMatrix::from_trusted(w.adjoint() * rho.matrix() * &w))
}

/// Parameters of the reduced polarizing channel on the nucleus.
///
/// Both mechanisms share the layout
/// `M₁ = α√Γ |α⟩⟨β|`, `M₂ = α√(1−Γ) |β⟩⟨α|`, `M₃ = β₋ diag(Δ₋, 1)`, `M₄ = β₊ diag(Δ₊, 1)`;
/// for the Overhauser set `α` and `Γ` play the roles of `α′` and `1 − γ_x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedKrausParams<T: Real> {
    pub kind: Mechanism,
    /// Time step, seconds.
    pub t: T,
    /// Fraction of jumps that raise the nucleus (`β → α`).
    pub gamma: T,
    pub alpha: T,
    pub beta_plus: C<T>,
    pub beta_minus: C<T>,
    pub delta_plus: C<T>,
    pub delta_minus: C<T>,
    /// Normalized Boltzmann weights of the upper electron level (`γ₁`) and of
    /// the upper zero-quantum level (`γ_x`).
    pub gamma1: T,
    pub gamma_x: T,
    /// `sqrt(4A² + 4B² ± 4Aω_I + ω_I²)` in Hz.
    pub eta_plus: T,
    pub eta_minus: T,
    /// Nuclear precession frequencies (rad/s) entering the coherence factor.
    pub frequencies: [T; 4],
}

/// `η±` in Hz.
pub fn eta<T: Real>(sys: &SpinSystemParams<T>) -> (T, T) {
    let (a, b, w) = (sys.a_iso, sys.b_aniso, sys.omega_i);
    let four = lit::<T>(4.0);
    let base = four * a * a + four * b * b + w * w;
    (sqrt(base + four * a * w), sqrt(base - four * a * w))
}

/// Closed-form reduced Kraus operators on the nucleus after a step of length `t`.
///
/// Relaxation enters to first order in `t`; precession phases are kept exact.
/// Operators are in the nuclear label basis `(α, β)` of the drift eigenframe.
/// The Overhauser set assumes a saturated electron (`ρ_E = 𝟙/2`) under `T_x`;
/// the solid-effect set assumes a thermal electron with the zero-quantum pair
/// saturated and `T1ᵉ` relaxation.
pub fn analytic_reduced_kraus<T: Real>(
    kind: Mechanism,
    t: T,
    sys: &SpinSystemParams<T>,
    r: &RelaxationParams<T>,
) -> Result<(KrausSet<T>, ReducedKrausParams<T>)> {
    check_dt(t)?;
    r.validate()?;
    let relevant = match kind {
        Mechanism::Overhauser => r.tzq,
        Mechanism::SolidEffect => r.t1e,
    };
    if to_f64(t) > to_f64(relevant) / 10.0 {
        log::warn!("t = {:.3e} s is outside the first-order regime (T = {:.3e} s)", to_f64(t), to_f64(relevant));
    }
    let frame = relaxation_frame(sys)?;
    let e = frame.labelled_energies()?;
    let bath = r.bath(sys);
    let gamma1 = bath.upper_population(sys.omega_s);
    let gamma_x = bath.upper_population(sys.omega_s - sys.omega_i);
    let one = T::one();
    let half = lit::<T>(0.5);
    let phase = |w: T| C::new((w * t).cos(), -(w * t).sin());

    // Jump weights (β→α, α→β) and coherence factor λ = Λ(|α⟩⟨β|)[α,β].
    let (up, down, lambda, frequencies) = match kind {
        Mechanism::Overhauser => {
            let x = t / r.tzq;
            let w_up = e[0] - e[1];
            let w_down = e[2] - e[3];
            let up = (one - gamma_x) * x * half;
            let down = gamma_x * x * half;
            let lambda = (phase(w_up) * (one - up) + phase(w_down) * (one - down)).scale(half);
            (up, down, lambda, [w_up, w_down, T::zero(), T::zero()])
        }
        Mechanism::SolidEffect => {
            let x = t / r.t1e;
            let w_up = e[0] - e[1];
            let w_down = e[2] - e[3];
            let w_up_swapped = e[0] - e[2];
            let w_down_swapped = e[1] - e[3];
            let up = gamma1 * x * half;
            let down = (one - gamma1) * x * half;
            let direct = phase(w_up).scale(gamma1) + phase(w_down).scale(one - gamma1);
            let swapped = (phase(w_up_swapped).scale(gamma1) + phase(w_down_swapped).scale(one - gamma1))
                .scale(one - x * half);
            (up, down, (direct + swapped).scale(half), [w_up, w_down, w_up_swapped, w_down_swapped])
        }
    };
    let alpha = (up + down).sqrt();
    let gamma = if alpha > T::zero() { up / (up + down) } else { half };

    let mut m1 = linalg::zeros::<T>(2);
    m1[(0, 1)] = re(up.sqrt());
    let mut m2 = linalg::zeros::<T>(2);
    m2[(1, 0)] = re(down.sqrt());

    // Diagonal operators from the Gram matrix of their (α, β) entries.
    let gram = DMatrix::from_row_slice(2, 2, &[re(one - down), lambda, lambda.conj(), re(one - up)]);
    let (values, vectors) = hermitian_eigen(&gram);
    let mut diag_ops = Vec::with_capacity(2);
    let mut betas = [C::new(T::zero(), T::zero()); 2];
    let mut deltas = [C::new(T::zero(), T::zero()); 2];
    for k in 0..2 {
        let s = sqrt(values[k]);
        let x = vectors[(0, k)].scale(s);
        let y = vectors[(1, k)].scale(s);
        let yn = y.norm_sqr().sqrt();
        // Phase chosen so β is real and non-negative.
        let (beta, delta) = if yn > T::zero() {
            let ph = y.unscale(yn).conj();
            (re(yn), x * ph / re(yn))
        } else {
            (re(T::zero()), re(T::zero()))
        };
        betas[k] = beta;
        deltas[k] = delta;
        diag_ops.push(diag(&[x, y]));
    }
    let (eta_plus, eta_minus) = eta(sys);
    let params = ReducedKrausParams {
        kind,
        t,
        gamma,
        alpha,
        beta_minus: betas[0],
        beta_plus: betas[1],
        delta_minus: deltas[0],
        delta_plus: deltas[1],
        gamma1,
        gamma_x,
        eta_plus,
        eta_minus,
        frequencies,
    };
    let mut ops = vec![m1, m2];
    ops.extend(diag_ops);
    Ok((KrausSet::new(ops)?, params))
}

/// Overhauser short-time jump operators `√(t/2T_x)·√(1−γ_x) |α⟩⟨β|` and
/// `√(t/2T_x)·√γ_x |β⟩⟨α|`.
pub fn overhauser_short_time<T: Real>(t: T, sys: &SpinSystemParams<T>, r: &RelaxationParams<T>) -> [CMatrix<T>; 2] {
    let gamma_x = r.bath(sys).upper_population(sys.omega_s - sys.omega_i);
    let pref = (t / (lit::<T>(2.0) * r.tzq)).sqrt();
    let mut m1 = linalg::zeros::<T>(2);
    m1[(0, 1)] = re(pref * (T::one() - gamma_x).sqrt());
    let mut m2 = linalg::zeros::<T>(2);
    m2[(1, 0)] = re(pref * gamma_x.sqrt());
    [m1, m2]
}

/// ZQ swap `↑β ↔ ↓α` in the label basis.
fn zq_swap<T: Real>() -> CMatrix<T> {
    let (a, b) = Transition::ZeroQuantum.levels();
    let mut p = identity::<T>(4);
    p[(a, a)] = re(T::zero());
    p[(b, b)] = re(T::zero());
    p[(a, b)] = re(T::one());
    p[(b, a)] = re(T::one());
    p
}

/// Reduced map on the nucleus computed from the full four-level evolution,
/// the numerical counterpart of [`analytic_reduced_kraus`].
///
/// The step is expressed in the labelled eigenbasis before tracing out the
/// electron. Overhauser: one `evolution_step` with `T_x` and `T1ᵉ`, electron
/// saturated. Solid effect: equal mixture of a `T1ᵉ` step and the same step
/// conjugated by the zero-quantum swap, electron thermal.
pub fn numeric_reduced_map<T: Real>(
    kind: Mechanism,
    t: T,
    sys: &SpinSystemParams<T>,
    r: &RelaxationParams<T>,
) -> Result<SuperMatrix<T>> {
    r.validate()?;
    let frame = relaxation_frame(sys)?;
    let w = frame.label_basis()?;
    let h = drift_hamiltonian(sys, HamiltonianFrame::ElectronRotating)?;
    match kind {
        Mechanism::Overhauser => {
            let step = evolution_step_super(&h, t, r, sys, &frame, RelaxationSet::STANDARD)?.change_basis(&w)?;
            reduce_to_nuclear(&step, &DensityMatrix::maximally_mixed(2))
        }
        Mechanism::SolidEffect => {
            let include = RelaxationSet {
                t1e: true,
                ..RelaxationSet::NONE
            };
            let step = evolution_step_super(&h, t, r, sys, &frame, include)?.change_basis(&w)?;
            let swap = kraus_to_super(&KrausSet::unitary(zq_swap::<T>()));
            let swapped = swap.then_after(&step)?.then_after(&swap)?;
            let mixed = SuperMatrix::new((step.matrix() + swapped.matrix()).scale(lit(0.5)))?;
            reduce_to_nuclear(&mixed, &electron_thermal_state(&r.bath(sys)))
        }
    }
}

/// `p` in `Λ(𝟙) = 𝟙 + p Z` for a single-qubit map.
pub fn polarizing_strength<T: Real>(s: &SuperMatrix<T>) -> Result<T> {
    if s.dim() != 2 {
        return Err(Error::dim("2-level map", s.dim()));
    }
    let out = s.apply_matrix(&identity(2))?;
    Ok((out[(0, 0)].re - out[(1, 1)].re) * lit(0.5))
}

/// Nuclear polarization figures of merit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnhancementMetrics<T> {
    /// `⟨2I_z⟩`.
    pub nuclear_polarization: T,
    /// `⟨2I_z⟩` divided by the magnitude of the thermal nuclear polarization.
    pub enhancement: T,
    /// `p` of the map that produced the state, when known.
    pub polarizing_strength: Option<T>,
}

/// Enhancement of a nuclear state relative to `|tanh(hω_I / 2k_BT)|`.
///
/// The reference is a magnitude, so the sign of the enhancement is the sign of
/// `⟨2I_z⟩`. The nuclear thermal state of `ω_I I_z` favours `β`, giving −1.
pub fn enhancement<T: Real>(rho_n: &DensityMatrix<T>, sys: &SpinSystemParams<T>) -> Result<EnhancementMetrics<T>> {
    if rho_n.dim() != 2 {
        return Err(Error::dim("2-level nuclear state", rho_n.dim()));
    }
    let reference = sys.thermal_polarization(sys.omega_i).abs();
    if !(to_f64(reference) > 0.0) {
        return Err(Error::param("temperature", "thermal nuclear polarization vanishes"));
    }
    let pz = rho_n.expectation(&(spin_operators::<T>().single[2].scale(lit(2.0))));
    Ok(EnhancementMetrics {
        nuclear_polarization: pz,
        enhancement: pz / reference,
        polarizing_strength: None,
    })
}

/// Enhancement of a nucleus carrying the full thermal electron polarization,
/// `tanh(hω_S/2k_BT) / tanh(hω_I/2k_BT) ≈ ω_S/ω_I`.
pub fn enhancement_cap<T: Real>(sys: &SpinSystemParams<T>) -> T {
    sys.thermal_polarization(sys.omega_s) / sys.thermal_polarization(sys.omega_i)
}

/// Supermatrix in the labelled eigenbasis.
pub fn to_label_basis<T: Real>(s: &SuperMatrix<T>, frame: &Frame<T>) -> Result<SuperMatrix<T>> {
    s.change_basis(&check_frame(frame)?)
}
