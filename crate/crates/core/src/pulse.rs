//! On/off microwave pulse sequences, their open- and closed-system maps, and
//! the pulse-design objective.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channels::{gate_fidelity, kraus_to_super, minimal_kraus, reduce_to_nuclear, KrausSet, SuperMatrix};
use crate::error::{Error, Result};
use crate::linalg::{identity, kron};
use crate::model::{
    ideal_rotation, open_evolution_super, relaxation_equilibrium, relaxation_frame, relaxation_super, RelaxationParams,
    RelaxationSet,
};
use crate::quantum::{
    control_hamiltonian, electron_thermal_state, paulis, propagator, DensityMatrix, Frame, Mechanism,
    SpinSystemParams,
};
use crate::simplex::{nelder_mead_simplex, NelderMeadConfig};
use crate::{Complex, Matrix};

/// Default Rabi frequency of the microwave drive, Hz.
pub const DEFAULT_OMEGA_D: f64 = 8e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegmentState {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub state: SegmentState,
    /// Seconds.
    pub duration: f64,
}

impl Segment {
    pub fn on(duration: f64) -> Self {
        Self {
            state: SegmentState::On,
            duration,
        }
    }

    pub fn off(duration: f64) -> Self {
        Self {
            state: SegmentState::Off,
            duration,
        }
    }
}

/// Square-pulse sequence in the electron rotating frame. The drive is
/// `ω_d S_x ⊗ 𝟙` while a segment is on.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    segments: Vec<Segment>,
    omega_d: f64,
}

impl PulseSequence {
    pub fn new(segments: Vec<Segment>, omega_d: f64) -> Result<Self> {
        if !omega_d.is_finite() || omega_d < 0.0 {
            return Err(Error::param("omega_d", "must be finite and non-negative"));
        }
        if segments.iter().any(|s| !s.duration.is_finite() || s.duration < 0.0) {
            return Err(Error::param("duration", "segment durations must be finite and non-negative"));
        }
        Ok(Self { segments, omega_d })
    }

    /// Single on-segment of nominal π/2 duration `1/(4ω_d)`.
    pub fn hard_pulse(omega_d: f64) -> Result<Self> {
        if !(omega_d > 0.0) {
            return Err(Error::param("omega_d", "must be positive"));
        }
        Self::new(vec![Segment::on(0.25 / omega_d)], omega_d)
    }

    /// `τ₁, p₁, τ₂, …, p_n, τ_{n+1}` from `2n + 1` durations.
    pub fn from_pattern(n_pulses: usize, durations: &[f64], omega_d: f64) -> Result<Self> {
        if durations.len() != 2 * n_pulses + 1 {
            return Err(Error::dim(2 * n_pulses + 1, durations.len()));
        }
        let segments = durations
            .iter()
            .enumerate()
            .map(|(i, &d)| if i % 2 == 0 { Segment::off(d) } else { Segment::on(d) })
            .collect();
        Self::new(segments, omega_d)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn omega_d(&self) -> f64 {
        self.omega_d
    }

    pub fn with_omega_d(&self, omega_d: f64) -> Result<Self> {
        Self::new(self.segments.clone(), omega_d)
    }

    pub fn durations(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.duration).collect()
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for PulseSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "omega_d {}", self.omega_d)?;
        for s in &self.segments {
            let state = match s.state {
                SegmentState::On => "on",
                SegmentState::Off => "off",
            };
            writeln!(f, "{state} {}", s.duration)?;
        }
        Ok(())
    }
}

impl FromStr for PulseSequence {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut omega_d = None;
        let mut segments = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = || Error::Numeric(format!("pulse line {}: cannot parse `{}`", n + 1, raw.trim()));
            let mut parts = line.split_whitespace();
            let (key, value) = (parts.next().ok_or_else(bad)?, parts.next().ok_or_else(bad)?);
            if parts.next().is_some() {
                return Err(bad());
            }
            let value: f64 = value.parse().map_err(|_| bad())?;
            match key {
                "omega_d" if omega_d.is_none() => omega_d = Some(value),
                "on" => segments.push(Segment::on(value)),
                "off" => segments.push(Segment::off(value)),
                _ => return Err(bad()),
            }
        }
        let omega_d = omega_d.ok_or_else(|| Error::param("omega_d", "missing from pulse record"))?;
        Self::new(segments, omega_d)
    }
}

/// `exp(−i π/2 S_x ⊗ 𝟙)`.
pub fn target_unitary() -> Matrix {
    let [id, x, _, _] = paulis::<f64>();
    let c = std::f64::consts::FRAC_PI_4;
    kron(&(id.scale(c.cos()) - x.map(|z| z * Complex::new(0.0, c.sin()))), &identity(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Unitary evolution only.
    Closed,
    /// Unitary evolution interleaved with relaxation.
    Open,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open" => Ok(Mode::Open),
            "closed" => Ok(Mode::Closed),
            other => Err(Error::param("mode", format!("expected `open` or `closed`, got `{other}`"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Open => "open",
            Mode::Closed => "closed",
        })
    }
}

/// Precomputed Hamiltonians and frames for evaluating many sequences on one system.
///
/// Internally everything is expressed in the labelled drift eigenbasis
/// `↑α, ↑β, ↓α, ↓β`, where the drift Hamiltonian, the relaxation operators and
/// the relaxation equilibrium are exactly diagonal or sparse. Methods named
/// `*_label` return label-basis objects; the others return product-basis ones.
#[derive(Debug, Clone)]
pub struct PulseSystem {
    pub sys: SpinSystemParams<f64>,
    pub relaxation: RelaxationParams<f64>,
    /// Longest internal time step in open mode, seconds.
    pub dt_max: f64,
    /// Drift eigenframe in the product basis.
    pub frame: Frame<f64>,
    /// The same frame with identity vectors (label basis).
    pub label_frame: Frame<f64>,
    w: Matrix,
    h_drift: Matrix,
    sx: Matrix,
    target: Matrix,
}

impl PulseSystem {
    /// `dt_max = None` selects `min(T1e, T_zq)/100`.
    pub fn new(sys: SpinSystemParams<f64>, relaxation: RelaxationParams<f64>, dt_max: Option<f64>) -> Result<Self> {
        relaxation.validate()?;
        let dt_max = dt_max.unwrap_or(relaxation.t1e.min(relaxation.tzq) / 100.0);
        if !(dt_max > 0.0) || !dt_max.is_finite() {
            return Err(Error::param("dt_max", "must be finite and positive"));
        }
        let frame = relaxation_frame(&sys)?;
        let label_frame = frame.labelled()?;
        let w = frame.label_basis()?;
        let energies: Vec<Complex> = label_frame.energies.iter().map(|&e| Complex::new(e, 0.0)).collect();
        let sx = control_hamiltonian(Mechanism::Overhauser, 1.0)?;
        Ok(Self {
            h_drift: crate::linalg::diag(&energies),
            sx: w.adjoint() * sx * &w,
            target: w.adjoint() * target_unitary() * &w,
            w,
            frame,
            label_frame,
            sys,
            relaxation,
            dt_max,
        })
    }

    pub fn include(&self) -> RelaxationSet {
        RelaxationSet::for_params(&self.relaxation)
    }

    /// Label-basis matrix of columns `↑α, ↑β, ↓α, ↓β` in the product basis.
    pub fn label_basis(&self) -> &Matrix {
        &self.w
    }

    /// Label-basis operator mapped to the product basis.
    pub fn to_product(&self, m: &Matrix) -> Matrix {
        &self.w * m * self.w.adjoint()
    }

    /// Label-basis supermatrix mapped to the product basis.
    pub fn super_to_product(&self, s: &SuperMatrix<f64>) -> Result<SuperMatrix<f64>> {
        s.change_basis(&self.w.adjoint())
    }

    fn hamiltonian(&self, state: SegmentState, omega_d: f64) -> Matrix {
        match state {
            SegmentState::Off => self.h_drift.clone(),
            SegmentState::On => &self.h_drift + self.sx.scale(omega_d),
        }
    }

    /// Closed-system propagator of the whole sequence, label basis.
    pub fn unitary_label(&self, seq: &PulseSequence) -> Result<Matrix> {
        let mut u = identity::<f64>(4);
        for s in seq.segments() {
            u = propagator(&self.hamiltonian(s.state, seq.omega_d()), s.duration)? * u;
        }
        Ok(u)
    }

    /// Closed-system propagator of the whole sequence.
    pub fn unitary(&self, seq: &PulseSequence) -> Result<Matrix> {
        Ok(self.to_product(&self.unitary_label(seq)?))
    }

    /// Open-system evolution of `duration` seconds under the label-basis `h`:
    /// the zero-step limit of repeated
    /// [`evolution_step`](crate::model::evolution_step)s, evaluated as
    /// `exp(dt L)^n` with `dt ≤ dt_max`.
    pub fn evolve_label(&self, h: &Matrix, duration: f64) -> Result<SuperMatrix<f64>> {
        if duration == 0.0 {
            return Ok(SuperMatrix::identity(4));
        }
        let steps = (duration / self.dt_max).ceil().max(1.0) as u64;
        let dt = duration / steps as f64;
        Ok(open_evolution_super(h, dt, &self.relaxation, &self.sys, &self.label_frame, self.include())?.power(steps))
    }

    /// Free evolution (drift plus relaxation in open mode) for `duration` seconds, label basis.
    pub fn delay_label(&self, duration: f64, mode: Mode) -> Result<SuperMatrix<f64>> {
        match mode {
            Mode::Open => self.evolve_label(&self.h_drift, duration),
            Mode::Closed => Ok(kraus_to_super(&KrausSet::unitary(propagator(&self.h_drift, duration)?))),
        }
    }

    /// Supermatrix of the sequence, label basis.
    pub fn sequence_super_label(&self, seq: &PulseSequence, mode: Mode) -> Result<SuperMatrix<f64>> {
        match mode {
            Mode::Closed => Ok(kraus_to_super(&KrausSet::unitary(self.unitary_label(seq)?))),
            Mode::Open => {
                let mut s = SuperMatrix::identity(4);
                for seg in seq.segments() {
                    s = self
                        .evolve_label(&self.hamiltonian(seg.state, seq.omega_d()), seg.duration)?
                        .then_after(&s)?;
                }
                Ok(s)
            }
        }
    }

    /// Supermatrix of the sequence.
    pub fn sequence_super(&self, seq: &PulseSequence, mode: Mode) -> Result<SuperMatrix<f64>> {
        self.super_to_product(&self.sequence_super_label(seq, mode)?)
    }

    fn map_label(&self, seq: &PulseSequence, mode: Mode) -> Result<KrausSet<f64>> {
        match mode {
            Mode::Closed => Ok(KrausSet::unitary(self.unitary_label(seq)?)),
            Mode::Open => minimal_kraus(&self.sequence_super_label(seq, mode)?),
        }
    }

    /// Kraus map of the sequence: one unitary in closed mode, the minimal set in open mode.
    pub fn pulse_map(&self, seq: &PulseSequence, mode: Mode) -> Result<KrausSet<f64>> {
        let k = self.map_label(seq, mode)?;
        KrausSet::new(k.ops().iter().map(|m| self.to_product(m)).collect())
    }

    /// Gate fidelity of the sequence against [`target_unitary`].
    pub fn gate_fidelity(&self, seq: &PulseSequence, mode: Mode) -> Result<f64> {
        gate_fidelity(&self.target, &self.map_label(seq, mode)?)
    }

    /// `1 − gate fidelity`.
    pub fn objective(&self, seq: &PulseSequence, mode: Mode) -> Result<f64> {
        Ok((1.0 - self.gate_fidelity(seq, mode)?).clamp(0.0, 1.0))
    }

    /// One period of a saturation train, label basis: the sequence followed by
    /// `delay` seconds of free open evolution.
    pub fn train_cycle(&self, seq: &PulseSequence, delay: f64) -> Result<SuperMatrix<f64>> {
        self.delay_label(delay, Mode::Open)?
            .then_after(&self.sequence_super_label(seq, Mode::Open)?)
    }

    /// Relaxation equilibrium, label basis.
    pub fn equilibrium_label(&self) -> Result<DensityMatrix<f64>> {
        relaxation_equilibrium(&self.relaxation, &self.sys, &self.label_frame)
    }

    /// Nuclear map of `n_cycles` periods of a label-basis cycle, with a thermal
    /// electron as environment.
    pub fn reduced_train_map(&self, cycle: &SuperMatrix<f64>, n_cycles: u64) -> Result<SuperMatrix<f64>> {
        let env = electron_thermal_state(&SpinSystemParams {
            temperature: self.relaxation.temperature,
            ..self.sys
        });
        reduce_to_nuclear(&cycle.power(n_cycles), &env)
    }

    /// Label-basis cycle of the ideal Overhauser train with the given period:
    /// π/2 on both electron transitions, then relaxation.
    pub fn ideal_cycle(&self, period: f64) -> Result<SuperMatrix<f64>> {
        let u = ideal_rotation(Mechanism::Overhauser, &self.label_frame, std::f64::consts::FRAC_PI_2)?;
        let relax = relaxation_super(period, &self.relaxation, &self.sys, &self.label_frame, RelaxationSet::STANDARD)?;
        relax.then_after(&kraus_to_super(&KrausSet::unitary(u)))
    }

    /// Reduced map of the ideal Overhauser train with the given period.
    pub fn ideal_reduced_map(&self, period: f64, n_cycles: u64) -> Result<SuperMatrix<f64>> {
        self.reduced_train_map(&self.ideal_cycle(period)?, n_cycles)
    }

    /// Agreement between the polarizing action of the sequence's train and the
    /// ideal Overhauser train of the same period.
    pub fn reduced_map_fidelity(&self, seq: &PulseSequence, delay: f64, n_cycles: u64) -> Result<f64> {
        if n_cycles == 0 {
            return Err(Error::param("n_cycles", "must be at least 1"));
        }
        let period = seq.total_duration() + delay;
        let actual = self.reduced_train_map(&self.train_cycle(seq, delay)?, n_cycles)?;
        let ideal = self.ideal_reduced_map(period, n_cycles)?;
        reduced_fidelity(&actual, &ideal)
    }
}

/// Bloch vector of `Λ(𝟙/2) − 𝟙/2` for a qubit map.
pub fn polarization_vector(s: &SuperMatrix<f64>) -> Result<[f64; 3]> {
    if s.dim() != 2 {
        return Err(Error::dim("2-level map", s.dim()));
    }
    let out = s.apply(&DensityMatrix::maximally_mixed(2))?;
    let p = paulis::<f64>();
    Ok([1, 2, 3].map(|k| out.expectation(&p[k])))
}

/// Overlap `2 v·w / (|v|² + |w|²)` of the polarization vectors of two qubit
/// maps, clipped to `[0, 1]`. Equal maps score 1; maps polarizing in opposite
/// directions, or not at all, score 0.
pub fn reduced_fidelity(actual: &SuperMatrix<f64>, ideal: &SuperMatrix<f64>) -> Result<f64> {
    let v = polarization_vector(actual)?;
    let w = polarization_vector(ideal)?;
    let dot: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
    let norms: f64 = v.iter().chain(&w).map(|a| a * a).sum();
    if norms == 0.0 {
        return Ok(1.0);
    }
    Ok((2.0 * dot / norms).clamp(0.0, 1.0))
}

/// Free functions mirroring [`PulseSystem`] for one-off evaluations.
pub fn pulse_map(
    seq: &PulseSequence,
    sys: &SpinSystemParams<f64>,
    r: &RelaxationParams<f64>,
    mode: Mode,
) -> Result<KrausSet<f64>> {
    PulseSystem::new(*sys, *r, None)?.pulse_map(seq, mode)
}

pub fn objective(
    seq: &PulseSequence,
    sys: &SpinSystemParams<f64>,
    r: &RelaxationParams<f64>,
    mode: Mode,
) -> Result<f64> {
    PulseSystem::new(*sys, *r, None)?.objective(seq, mode)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub mode: Mode,
    pub n_pulses: usize,
    pub max_iterations: usize,
    /// Stop when the objective spread over the simplex falls below this.
    pub convergence_tol: f64,
    pub restarts: usize,
    pub seed: u64,
    /// `None` selects `min(T1e, T_zq)/100`.
    pub dt_max: Option<f64>,
    pub omega_d: f64,
    /// Train parameters used for the reported reduced-map fidelity.
    pub train_delay: f64,
    pub train_cycles: u64,
}

impl OptimizerConfig {
    /// Default pulse shapes: two pulses closed, three pulses open.
    pub fn for_mode(mode: Mode) -> Self {
        Self {
            mode,
            n_pulses: match mode {
                Mode::Closed => 2,
                Mode::Open => 3,
            },
            max_iterations: 1500,
            convergence_tol: 1e-10,
            restarts: 8,
            seed: 1,
            dt_max: None,
            omega_d: DEFAULT_OMEGA_D,
            train_delay: 0.0,
            train_cycles: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pulses == 0 {
            return Err(Error::param("n_pulses", "must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(Error::param("restarts", "must be at least 1"));
        }
        if !(self.omega_d > 0.0) || !self.omega_d.is_finite() {
            return Err(Error::param("omega_d", "must be finite and positive"));
        }
        if !(self.train_delay >= 0.0) || !self.train_delay.is_finite() {
            return Err(Error::param("train_delay", "must be finite and non-negative"));
        }
        if self.train_cycles == 0 {
            return Err(Error::param("train_cycles", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseResult {
    pub sequence: PulseSequence,
    /// Gate fidelity in the optimization mode.
    pub gate_fidelity: f64,
    pub gate_fidelity_closed: f64,
    pub gate_fidelity_open: f64,
    pub reduced_map_fidelity: f64,
    /// Best objective per iteration of the winning restart.
    pub objective_history: Vec<f64>,
    /// Final objective of every restart, in restart order.
    pub restart_objectives: Vec<f64>,
    pub best_restart: usize,
}

/// Fills a result record for a fixed sequence.
pub fn evaluate_pulse(system: &PulseSystem, seq: &PulseSequence, config: &OptimizerConfig) -> Result<PulseResult> {
    let closed = system.gate_fidelity(seq, Mode::Closed)?;
    let open = system.gate_fidelity(seq, Mode::Open)?;
    Ok(PulseResult {
        sequence: seq.clone(),
        gate_fidelity: match config.mode {
            Mode::Closed => closed,
            Mode::Open => open,
        },
        gate_fidelity_closed: closed,
        gate_fidelity_open: open,
        reduced_map_fidelity: system.reduced_map_fidelity(seq, config.train_delay, config.train_cycles)?,
        objective_history: Vec::new(),
        restart_objectives: Vec::new(),
        best_restart: 0,
    })
}

/// Seed of restart `index`.
fn restart_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64)
}

/// Best-of-restarts Nelder–Mead search over segment durations.
///
/// Each restart draws its `2n + 2` simplex vertices uniformly from
/// `[0, 4/ω_d]^(2n+1)`. Restarts run in parallel; the winner is the lowest
/// objective, ties going to the lowest restart index.
pub fn optimize_pulse(config: &OptimizerConfig, system: &PulseSystem) -> Result<PulseResult> {
    config.validate()?;
    let dim = 2 * config.n_pulses + 1;
    let bound = 4.0 / config.omega_d;
    let nm = NelderMeadConfig {
        max_iterations: config.max_iterations,
        tolerance: config.convergence_tol,
        initial_step: 0.0,
    };
    let runs: Vec<Result<(Vec<f64>, f64, Vec<f64>)>> = (0..config.restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(config.seed, i));
            let simplex: Vec<Vec<f64>> = (0..=dim)
                .map(|_| (0..dim).map(|_| rng.random::<f64>() * bound).collect())
                .collect();
            let mut failure = None;
            let f = |x: &[f64]| {
                let value = PulseSequence::from_pattern(config.n_pulses, x, config.omega_d)
                    .and_then(|seq| system.objective(&seq, config.mode));
                match value {
                    Ok(v) => v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                }
            };
            let r = nelder_mead_simplex(f, simplex, &nm);
            if let Some(e) = failure {
                return Err(e);
            }
            let r = r?;
            Ok((r.x, r.f, r.history))
        })
        .collect();
    let mut best: Option<(usize, Vec<f64>, f64, Vec<f64>)> = None;
    let mut restart_objectives = Vec::with_capacity(runs.len());
    for (i, run) in runs.into_iter().enumerate() {
        let (x, f, history) = run?;
        restart_objectives.push(f);
        if best.as_ref().map_or(true, |b| f < b.2) {
            best = Some((i, x, f, history));
        }
    }
    let (index, x, _, history) = best.expect("at least one restart");
    let seq = PulseSequence::from_pattern(config.n_pulses, &x, config.omega_d)?;
    let mut result = evaluate_pulse(system, &seq, config)?;
    result.objective_history = history;
    result.restart_objectives = restart_objectives;
    result.best_restart = index;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{drift_hamiltonian, HamiltonianFrame};
    use crate::linalg::{norm, unitarity_deviation};
    use rand::Rng;

    fn system() -> PulseSystem {
        PulseSystem::new(SpinSystemParams::malonic_acid(), RelaxationParams::default(), None).unwrap()
    }

    fn random_sequence(rng: &mut ChaCha8Rng, n: usize) -> PulseSequence {
        let d: Vec<f64> = (0..2 * n + 1).map(|_| rng.random::<f64>() * 4.0 / DEFAULT_OMEGA_D).collect();
        PulseSequence::from_pattern(n, &d, DEFAULT_OMEGA_D).unwrap()
    }

    #[test]
    fn text_round_trip_is_exact() {
        let seq = PulseSequence::new(
            vec![Segment::off(1e-7 / 3.0), Segment::on(0.1e-6), Segment::off(0.0), Segment::on(2.2250738585072014e-308)],
            8e6 + 0.1,
        )
        .unwrap();
        let back: PulseSequence = seq.to_text().parse().unwrap();
        assert_eq!(back, seq);
    }

    #[test]
    fn text_format_accepts_comments_and_rejects_garbage() {
        let seq: PulseSequence = "# hard pulse\nomega_d 8e6\non 3.125e-8 # π/2\n".parse().unwrap();
        assert_eq!(seq, PulseSequence::hard_pulse(8e6).unwrap());
        assert!("omega_d 8e6\nsideways 1e-9\n".parse::<PulseSequence>().is_err());
        assert!("on 1e-9\n".parse::<PulseSequence>().is_err());
        assert!("omega_d 8e6\non -1e-9\n".parse::<PulseSequence>().is_err());
    }

    #[test]
    fn pattern_needs_odd_duration_count() {
        assert!(PulseSequence::from_pattern(2, &[1e-9; 4], 8e6).is_err());
        let seq = PulseSequence::from_pattern(1, &[1e-9, 2e-9, 3e-9], 8e6).unwrap();
        assert_eq!(seq.segments()[1], Segment::on(2e-9));
        assert!((seq.total_duration() - 6e-9).abs() < 1e-24);
    }

    #[test]
    fn target_is_an_electron_quarter_turn() {
        let u = target_unitary();
        assert!(unitarity_deviation(&u) < 1e-12);
        let u4 = &u * &u * &u * &u;
        assert!(norm(&(u4 + identity::<f64>(4))) < 1e-12);
        for p in paulis::<f64>() {
            let n = kron(&identity(2), &p);
            assert!(norm(&(&u * &n - &n * &u)) < 1e-12);
        }
    }

    #[test]
    fn empty_sequence_is_identity() {
        let s = system();
        let seq = PulseSequence::from_pattern(2, &[0.0; 5], DEFAULT_OMEGA_D).unwrap();
        for mode in [Mode::Closed, Mode::Open] {
            let m = s.sequence_super(&seq, mode).unwrap();
            assert!(norm(&(m.matrix() - identity::<f64>(16))) < 1e-12);
        }
    }

    #[test]
    fn closed_map_matches_direct_exponential() {
        let sys = SpinSystemParams {
            b_aniso: 0.0,
            ..SpinSystemParams::malonic_acid()
        };
        let s = PulseSystem::new(sys, RelaxationParams::default(), None).unwrap();
        let seq = PulseSequence::hard_pulse(DEFAULT_OMEGA_D).unwrap();
        let h = drift_hamiltonian(&sys, HamiltonianFrame::ElectronRotating).unwrap()
            + control_hamiltonian(Mechanism::Overhauser, DEFAULT_OMEGA_D).unwrap();
        let direct = propagator(&h, 0.25 / DEFAULT_OMEGA_D).unwrap();
        let k = s.pulse_map(&seq, Mode::Closed).unwrap();
        assert_eq!(k.len(), 1);
        assert!(norm(&(&k.ops()[0] - &direct)) < 1e-12);
        let f = s.gate_fidelity(&seq, Mode::Closed).unwrap();
        assert!((0.0..=1.0).contains(&f));
    }

    #[test]
    fn bare_hard_pulse_is_the_target() {
        let u = propagator(&control_hamiltonian(Mechanism::Overhauser, DEFAULT_OMEGA_D).unwrap(), 0.25 / DEFAULT_OMEGA_D).unwrap();
        let f = gate_fidelity(&target_unitary(), &KrausSet::unitary(u)).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn open_equals_closed_without_relaxation() {
        let r = RelaxationParams {
            t1e: 1e300,
            tzq: 1e300,
            ..Default::default()
        };
        let s = PulseSystem::new(SpinSystemParams::malonic_acid(), r, Some(1e-8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..3 {
            let seq = random_sequence(&mut rng, 2);
            let open = s.sequence_super(&seq, Mode::Open).unwrap();
            let closed = s.sequence_super(&seq, Mode::Closed).unwrap();
            assert!(norm(&(open.matrix() - closed.matrix())) < 1e-9);
        }
    }

    #[test]
    fn open_map_is_cptp() {
        let s = system();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let seq = random_sequence(&mut rng, 3);
        let k = s.pulse_map(&seq, Mode::Open).unwrap();
        assert!(crate::channels::validate_cptp(&k).passes(1e-9));
    }

    #[test]
    fn splitting_a_segment_leaves_objective_unchanged() {
        let s = system();
        let whole = PulseSequence::new(vec![Segment::off(4e-8), Segment::on(9e-8), Segment::off(1e-8)], DEFAULT_OMEGA_D).unwrap();
        let split = PulseSequence::new(
            vec![Segment::off(4e-8), Segment::on(3e-8), Segment::on(6e-8), Segment::off(0.5e-8), Segment::off(0.5e-8)],
            DEFAULT_OMEGA_D,
        )
        .unwrap();
        for mode in [Mode::Closed, Mode::Open] {
            let a = s.objective(&whole, mode).unwrap();
            let b = s.objective(&split, mode).unwrap();
            assert!((a - b).abs() < 1e-8, "{mode}: {a} vs {b}");
        }
    }

    #[test]
    fn objective_is_bounded() {
        let s = system();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let seq = random_sequence(&mut rng, 2);
            let f = s.objective(&seq, Mode::Closed).unwrap();
            assert!((0.0..=1.0).contains(&f));
        }
        for _ in 0..5 {
            let seq = random_sequence(&mut rng, 3);
            let f = s.objective(&seq, Mode::Open).unwrap();
            assert!((0.0..=1.0).contains(&f));
        }
    }

    #[test]
    fn reduced_fidelity_of_ideal_map_with_itself_is_one() {
        let s = system();
        let ideal = s.ideal_reduced_map(1e-6, 4).unwrap();
        assert!((reduced_fidelity(&ideal, &ideal).unwrap() - 1.0).abs() < 1e-12);
        let v = polarization_vector(&ideal).unwrap();
        assert!(v[2] > 0.0);
    }

    #[test]
    fn optimizer_is_deterministic() {
        let s = system();
        let config = OptimizerConfig {
            restarts: 3,
            max_iterations: 40,
            ..OptimizerConfig::for_mode(Mode::Closed)
        };
        let a = optimize_pulse(&config, &s).unwrap();
        let b = optimize_pulse(&config, &s).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.restart_objectives.len(), 3);
        let best = a.restart_objectives.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(a.restart_objectives[a.best_restart], best);
        assert!(a.objective_history.windows(2).all(|w| w[1] <= w[0]));
        assert!((0.0..=1.0).contains(&a.gate_fidelity) && (0.0..=1.0).contains(&a.reduced_map_fidelity));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = OptimizerConfig::for_mode(Mode::Open);
        c.n_pulses = 0;
        assert!(c.validate().is_err());
        let mut c = OptimizerConfig::for_mode(Mode::Open);
        c.restarts = 0;
        assert!(c.validate().is_err());
        assert!(PulseSystem::new(SpinSystemParams::malonic_acid(), RelaxationParams::default(), Some(0.0)).is_err());
    }
}
