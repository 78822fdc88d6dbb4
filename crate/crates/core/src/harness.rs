//! Scenario engine: saturation trains, transition-angle maps, parameter sweeps,
//! double-quantum leakage, exponential fits and final-state reports.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::channels::{fixed_point, kraus_to_super, KrausSet, SuperMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, hermitian_function};
use crate::model::{enhancement, enhancement_cap, relaxation_super, to_label_state, RelaxationParams, RelaxationSet, Transition};
use crate::pulse::{PulseSequence, PulseSystem, DEFAULT_OMEGA_D};
use crate::quantum::{partial_trace, pauli_decompose, DensityMatrix, Frame, Subsystem, PAULI_LABELS};
use crate::{Complex, Matrix};

/// `exp(−i Σ_k θ_k/2 X_k)` with `X_k` the Pauli-x generator on transition `k`'s
/// eigenstate pair (order: 1, 2, zero quantum, double quantum), in the product basis.
pub fn transition_angle_unitary(theta: [f64; 4], frame: &Frame<f64>) -> Result<Matrix> {
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::param("theta", "angles must be finite"));
    }
    let w = frame.label_basis()?;
    let mut g = linalg::zeros::<f64>(4);
    for (t, tr) in theta.iter().zip(Transition::ALL) {
        let (a, b) = tr.levels();
        g[(a, b)] += Complex::new(t / 2.0, 0.0);
        g[(b, a)] += Complex::new(t / 2.0, 0.0);
    }
    let u = hermitian_function(&g, |e| Complex::new(e.cos(), -e.sin()));
    Ok(&w * u * w.adjoint())
}

/// What a saturation train repeats.
#[derive(Debug, Clone, PartialEq)]
pub enum Drive {
    /// A pulse sequence followed by a free-evolution delay (seconds).
    Pulse { sequence: PulseSequence, delay: f64 },
    /// An ideal transition-angle rotation followed by `period` seconds of
    /// relaxation, in the interaction frame of the drift Hamiltonian.
    Angles { theta: [f64; 4], period: f64 },
}

impl Drive {
    pub fn period(&self) -> f64 {
        match self {
            Drive::Pulse { sequence, delay } => sequence.total_duration() + delay,
            Drive::Angles { period, .. } => *period,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Drive::Pulse { sequence, delay } => {
                let segs: Vec<String> = sequence
                    .segments()
                    .iter()
                    .map(|s| format!("{:?}:{}", s.state, s.duration).to_lowercase())
                    .collect();
                format!("pulse omega_d={} segments=[{}] delay={}", sequence.omega_d(), segs.join(" "), delay)
            }
            Drive::Angles { theta, period } => {
                format!("angles theta=[{} {} {} {}] period={}", theta[0], theta[1], theta[2], theta[3], period)
            }
        }
    }
}

/// Single train period as a supermatrix acting on label-basis states.
pub fn cycle_map(system: &PulseSystem, drive: &Drive) -> Result<SuperMatrix<f64>> {
    match drive {
        Drive::Pulse { sequence, delay } => {
            if !(*delay >= 0.0) || !delay.is_finite() {
                return Err(Error::param("delay", "must be finite and non-negative"));
            }
            system.train_cycle(sequence, *delay)
        }
        Drive::Angles { theta, period } => {
            if !(*period > 0.0) || !period.is_finite() {
                return Err(Error::param("period", "must be finite and positive"));
            }
            let u = kraus_to_super(&KrausSet::unitary(transition_angle_unitary(*theta, &system.label_frame)?));
            let relax = relaxation_super(*period, &system.relaxation, &system.sys, &system.label_frame, system.include())?;
            relax.then_after(&u)
        }
    }
}

/// Enhancement of the nucleus in a label-basis state.
pub fn state_enhancement(system: &PulseSystem, rho: &DensityMatrix<f64>) -> Result<f64> {
    Ok(enhancement(&partial_trace(rho, Subsystem::Electron)?, &system.sys)?.enhancement)
}

/// Enhancement at the fixed point of one train period.
pub fn asymptotic_enhancement(system: &PulseSystem, drive: &Drive) -> Result<f64> {
    let rho = fixed_point(&cycle_map(system, drive)?)?;
    let e = state_enhancement(system, &rho)?;
    let cap = enhancement_cap(&system.sys);
    if e.abs() > cap * (1.0 + 1e-6) {
        log::warn!("enhancement {e:.3} exceeds the electron-to-nuclear polarization ratio {cap:.3}");
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildupCurve {
    pub times: Vec<f64>,
    pub enhancements: Vec<f64>,
    pub metadata: Vec<(String, String)>,
}

/// Repeats the drive from the relaxation equilibrium for at least `total_time`
/// seconds, reading the enhancement every `readout_stride` periods.
pub fn run_saturation_train(
    system: &PulseSystem,
    drive: &Drive,
    total_time: f64,
    readout_stride: u64,
) -> Result<BuildupCurve> {
    if !(total_time > 0.0) || !total_time.is_finite() {
        return Err(Error::param("total_time", "must be finite and positive"));
    }
    if readout_stride == 0 {
        return Err(Error::param("readout_stride", "must be at least 1"));
    }
    let period = drive.period();
    if !(period > 0.0) {
        return Err(Error::param("period", "drive period must be positive"));
    }
    let cycles = (total_time / period).ceil() as u64;
    let readouts = cycles.div_ceil(readout_stride);
    let step = cycle_map(system, drive)?.power(readout_stride);
    let mut rho = system.equilibrium_label()?;
    let mut times = vec![0.0];
    let mut enhancements = vec![state_enhancement(system, &rho)?];
    for k in 1..=readouts {
        rho = step.apply(&rho)?;
        times.push((k * readout_stride) as f64 * period);
        enhancements.push(state_enhancement(system, &rho)?);
    }
    Ok(BuildupCurve {
        times,
        enhancements,
        metadata: vec![
            ("drive".into(), drive.describe()),
            ("period".into(), format!("{period}")),
            ("cycles".into(), format!("{}", readouts * readout_stride)),
            ("readout_stride".into(), format!("{readout_stride}")),
        ],
    })
}

/// Duration of a hard π/2 pulse at the default Rabi frequency.
pub const DEFAULT_ANGLE_PERIOD: f64 = 0.25 / DEFAULT_OMEGA_D;

/// Grid of transition angles for a two-dimensional DNP map.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleMapSpec {
    pub name: String,
    /// Angles of transitions not on a swept axis.
    pub base: [f64; 4],
    /// Transitions (0-based: 1, 2, zero quantum, double quantum) driven by the x angle.
    pub x_axis: Vec<usize>,
    pub y_axis: Vec<usize>,
    pub nx: usize,
    pub ny: usize,
    /// Largest grid angle; grid values are `k·max/n`, `k = 0 … n−1`.
    pub max_angle: f64,
    /// Seconds of relaxation between rotations.
    pub period: f64,
    pub n_cycles: u64,
}

impl AngleMapSpec {
    fn preset(name: &str, base: [f64; 4], x_axis: Vec<usize>, y_axis: Vec<usize>) -> Self {
        Self {
            name: name.into(),
            base,
            x_axis,
            y_axis,
            nx: 32,
            ny: 32,
            max_angle: PI,
            period: DEFAULT_ANGLE_PERIOD,
            n_cycles: 1,
        }
    }

    /// Panel presets:
    ///
    /// * `a`: 1 against zero quantum, π/2 on 2
    /// * `b`: 2 against zero quantum, π/2 on 1
    /// * `c`: 2 against double quantum, π/2 on 1
    /// * `d`: zero quantum against double quantum, π/2 on both electron transitions
    /// * `e`: both electron transitions together against double quantum, π/2 on zero quantum
    pub fn panel(name: &str) -> Result<Self> {
        let h = PI / 2.0;
        Ok(match name {
            "a" => Self::preset("a", [0.0, h, 0.0, 0.0], vec![0], vec![2]),
            "b" => Self::preset("b", [h, 0.0, 0.0, 0.0], vec![1], vec![2]),
            "c" => Self::preset("c", [h, 0.0, 0.0, 0.0], vec![1], vec![3]),
            "d" => Self::preset("d", [h, h, 0.0, 0.0], vec![2], vec![3]),
            "e" => Self::preset("e", [0.0, 0.0, h, 0.0], vec![0, 1], vec![3]),
            other => return Err(Error::param("panel", format!("unknown panel `{other}` (expected a-e)"))),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::param("grid", "each axis needs at least 2 points"));
        }
        if !(0.0..=PI).contains(&self.max_angle) || self.base.iter().any(|t| !(0.0..=PI).contains(t)) {
            return Err(Error::param("theta", "angles must lie in [0, π]"));
        }
        let mut used = [false; 4];
        for &i in self.x_axis.iter().chain(&self.y_axis) {
            if i >= 4 || used[i] {
                return Err(Error::param("axes", "axes must name distinct transitions 0-3"));
            }
            used[i] = true;
        }
        if self.x_axis.is_empty() || self.y_axis.is_empty() {
            return Err(Error::param("axes", "both axes need at least one transition"));
        }
        if !(self.period > 0.0) || !self.period.is_finite() {
            return Err(Error::param("period", "must be finite and positive"));
        }
        if self.n_cycles == 0 {
            return Err(Error::param("n_cycles", "must be at least 1"));
        }
        Ok(())
    }

    pub fn x_values(&self) -> Vec<f64> {
        (0..self.nx).map(|k| k as f64 * self.max_angle / self.nx as f64).collect()
    }

    pub fn y_values(&self) -> Vec<f64> {
        (0..self.ny).map(|k| k as f64 * self.max_angle / self.ny as f64).collect()
    }

    pub fn angles(&self, x: f64, y: f64) -> [f64; 4] {
        let mut theta = self.base;
        for &i in &self.x_axis {
            theta[i] = x;
        }
        for &i in &self.y_axis {
            theta[i] = y;
        }
        theta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleMap {
    pub x_values: Vec<f64>,
    pub y_values: Vec<f64>,
    /// `values[iy][ix]`.
    pub values: Vec<Vec<f64>>,
}

impl AngleMap {
    /// `(ix, iy, value)` of the largest entry; ties go to the first in row-major order.
    pub fn argmax(&self) -> (usize, usize, f64) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for (iy, row) in self.values.iter().enumerate() {
            for (ix, &v) in row.iter().enumerate() {
                if v > best.2 {
                    best = (ix, iy, v);
                }
            }
        }
        best
    }
}

/// Asymptotic enhancement over an angle grid.
pub fn dnp_angle_map(spec: &AngleMapSpec, system: &PulseSystem) -> Result<AngleMap> {
    spec.validate()?;
    let xs = spec.x_values();
    let ys = spec.y_values();
    let relax = relaxation_super(spec.period, &system.relaxation, &system.sys, &system.label_frame, system.include())?;
    let cells: Vec<(usize, usize)> = (0..ys.len()).flat_map(|iy| (0..xs.len()).map(move |ix| (ix, iy))).collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(ix, iy)| {
            let u = kraus_to_super(&KrausSet::unitary(transition_angle_unitary(
                spec.angles(xs[ix], ys[iy]),
                &system.label_frame,
            )?));
            let cycle = relax.then_after(&u)?.power(spec.n_cycles);
            state_enhancement(system, &fixed_point(&cycle)?)
        })
        .collect::<Result<_>>()?;
    Ok(AngleMap {
        values: values.chunks(xs.len()).map(|c| c.to_vec()).collect(),
        x_values: xs,
        y_values: ys,
    })
}

/// Pulse entry of a sweep or leakage run.
#[derive(Debug, Clone, PartialEq)]
pub enum PulseSpec {
    /// Nominal π/2 square pulse, re-derived from the Rabi frequency.
    Hard,
    Fixed(PulseSequence),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedPulse {
    pub name: String,
    pub pulse: PulseSpec,
}

impl NamedPulse {
    pub fn hard() -> Self {
        Self {
            name: "hard".into(),
            pulse: PulseSpec::Hard,
        }
    }

    pub fn fixed(name: impl Into<String>, sequence: PulseSequence) -> Self {
        Self {
            name: name.into(),
            pulse: PulseSpec::Fixed(sequence),
        }
    }

    /// Sequence at the given Rabi frequency.
    pub fn sequence(&self, omega_d: f64) -> Result<PulseSequence> {
        match &self.pulse {
            PulseSpec::Hard => PulseSequence::hard_pulse(omega_d),
            PulseSpec::Fixed(seq) => seq.with_omega_d(omega_d),
        }
    }

    pub fn default_omega_d(&self) -> f64 {
        match &self.pulse {
            PulseSpec::Hard => DEFAULT_OMEGA_D,
            PulseSpec::Fixed(seq) => seq.omega_d(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepParameter {
    /// Hz.
    RabiFrequency,
    /// Hz.
    AnisotropicB,
    /// `T_dq / T_zq`; infinity disables double-quantum relaxation.
    TdqRatio,
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rabi_frequency" => Ok(Self::RabiFrequency),
            "anisotropic_b" => Ok(Self::AnisotropicB),
            "tdq_ratio" => Ok(Self::TdqRatio),
            other => Err(Error::param(
                "parameter",
                format!("unknown sweep parameter `{other}` (rabi_frequency, anisotropic_b, tdq_ratio)"),
            )),
        }
    }
}

impl std::fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::RabiFrequency => "rabi_frequency",
            Self::AnisotropicB => "anisotropic_b",
            Self::TdqRatio => "tdq_ratio",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Free evolution after each pulse, seconds.
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub pulse: String,
    pub value: f64,
    pub enhancement: f64,
}

fn with_relaxation(system: &PulseSystem, r: RelaxationParams<f64>) -> Result<PulseSystem> {
    PulseSystem::new(system.sys, r, Some(system.dt_max))
}

/// Asymptotic enhancement for every `(pulse, value)` pair, pulse-major.
pub fn sweep(spec: &SweepSpec, pulses: &[NamedPulse], base: &PulseSystem) -> Result<Vec<SweepRow>> {
    if spec.values.is_empty() {
        return Err(Error::param("values", "sweep needs at least one value"));
    }
    if pulses.is_empty() {
        return Err(Error::param("pulses", "sweep needs at least one pulse"));
    }
    let jobs: Vec<(usize, usize)> = (0..pulses.len())
        .flat_map(|p| (0..spec.values.len()).map(move |v| (p, v)))
        .collect();
    jobs.par_iter()
        .map(|&(p, v)| {
            let pulse = &pulses[p];
            let value = spec.values[v];
            let (system, omega_d) = match spec.parameter {
                SweepParameter::RabiFrequency => (base.clone(), value),
                SweepParameter::AnisotropicB => {
                    let mut sys = base.sys;
                    sys.b_aniso = value;
                    (PulseSystem::new(sys, base.relaxation, Some(base.dt_max))?, pulse.default_omega_d())
                }
                SweepParameter::TdqRatio => {
                    let mut r = base.relaxation;
                    r.tdq = if value.is_finite() { Some(value * r.tzq) } else { None };
                    (with_relaxation(base, r)?, pulse.default_omega_d())
                }
            };
            let drive = Drive::Pulse {
                sequence: pulse.sequence(omega_d)?,
                delay: spec.delay,
            };
            Ok(SweepRow {
                pulse: pulse.name.clone(),
                value,
                enhancement: asymptotic_enhancement(&system, &drive)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeakageRow {
    pub pulse: String,
    pub baseline: f64,
    pub with_leakage: f64,
}

/// Asymptotic enhancement of each pulse without and with double-quantum
/// relaxation `T_dq = tdq_ratio · T_zq`.
pub fn dq_leakage_run(base: &PulseSystem, tdq_ratio: f64, pulses: &[NamedPulse], delay: f64) -> Result<Vec<LeakageRow>> {
    if !(tdq_ratio > 0.0) || !tdq_ratio.is_finite() {
        return Err(Error::param("tdq_ratio", "must be finite and positive"));
    }
    let mut off = base.relaxation;
    off.tdq = None;
    let mut on = base.relaxation;
    on.tdq = Some(tdq_ratio * on.tzq);
    let without = with_relaxation(base, off)?;
    let with = with_relaxation(base, on)?;
    pulses
        .par_iter()
        .map(|p| {
            let drive = Drive::Pulse {
                sequence: p.sequence(p.default_omega_d())?,
                delay,
            };
            Ok(LeakageRow {
                pulse: p.name.clone(),
                baseline: asymptotic_enhancement(&without, &drive)?,
                with_leakage: asymptotic_enhancement(&with, &drive)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModel {
    /// `a (1 − e^{−t/τ})`
    Buildup,
    /// `a e^{−t/τ}`
    Decay,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialFit {
    pub amplitude: f64,
    pub time_constant: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    /// The data carry no usable time constant (flat curve or τ at a search bound).
    pub degenerate: bool,
}

fn basis(model: FitModel, t: f64, tau: f64) -> f64 {
    match model {
        FitModel::Buildup => -(-t / tau).exp_m1(),
        FitModel::Decay => (-t / tau).exp(),
    }
}

/// Best amplitude and squared error for a fixed `τ`.
fn profile(model: FitModel, t: &[f64], y: &[f64], tau: f64) -> (f64, f64) {
    let (mut gy, mut gg) = (0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        let g = basis(model, ti, tau);
        gy += g * yi;
        gg += g * g;
    }
    let a = if gg > 0.0 { gy / gg } else { 0.0 };
    let sse = t
        .iter()
        .zip(y)
        .map(|(&ti, &yi)| (yi - a * basis(model, ti, tau)).powi(2))
        .sum();
    (a, sse)
}

/// Least-squares fit of a single exponential.
///
/// The amplitude is solved in closed form for each `τ`; `τ` is searched on a
/// logarithmic grid spanning the sampling range and refined by golden-section
/// search, so the result depends only on the data.
pub fn fit_exponential(times: &[f64], values: &[f64], model: FitModel) -> Result<ExponentialFit> {
    if times.len() != values.len() {
        return Err(Error::dim(times.len(), values.len()));
    }
    if times.len() < 4 {
        return Err(Error::param("curve", "need at least 4 points"));
    }
    if times.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::param("curve", "non-finite sample"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("times", "must be strictly increasing"));
    }
    let span = times[times.len() - 1] - times[0];
    let min_gap = times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if !(span > 0.0) {
        return Err(Error::param("times", "zero time span"));
    }
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let n = times.len() as f64;
    if scale == 0.0 {
        return Ok(ExponentialFit {
            amplitude: 0.0,
            time_constant: f64::NAN,
            residual: 0.0,
            degenerate: true,
        });
    }
    let lo = (min_gap / 10.0).ln();
    let hi = (span * 100.0).ln();
    let cost = |u: f64| profile(model, times, values, u.exp()).1;
    let grid = 200;
    let us: Vec<f64> = (0..=grid).map(|k| lo + (hi - lo) * k as f64 / grid as f64).collect();
    let costs: Vec<f64> = us.iter().map(|&u| cost(u)).collect();
    let k = (0..costs.len()).min_by(|&a, &b| costs[a].total_cmp(&costs[b])).unwrap_or(0);
    let (mut a, mut b) = (us[k.saturating_sub(1)], us[(k + 1).min(grid)]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = cost(d);
        }
    }
    let u = (a + b) / 2.0;
    let tau = u.exp();
    let (amplitude, sse) = profile(model, times, values, tau);
    let at_bound = k == 0 || k == grid;
    let flat = amplitude.abs() < 1e-9 * scale.max(1e-300) || values.iter().all(|v| (v - values[0]).abs() <= 1e-12 * scale);
    if !sse.is_finite() {
        return Err(Error::FitFailed {
            reason: format!("non-finite residual at tau = {tau:e}"),
        });
    }
    Ok(ExponentialFit {
        amplitude,
        time_constant: tau,
        residual: (sse / n).sqrt(),
        degenerate: at_bound || flat,
    })
}

/// Fit of a buildup curve.
pub fn fit_buildup(curve: &BuildupCurve) -> Result<ExponentialFit> {
    let base = curve.enhancements.first().copied().unwrap_or(0.0);
    let shifted: Vec<f64> = curve.enhancements.iter().map(|e| e - base).collect();
    fit_exponential(&curve.times, &shifted, FitModel::Buildup)
}

/// Pauli coefficients `Tr(P ρ)/4` of the fixed point of a 16×16 supermatrix,
/// in the labelled eigenbasis, rows `II … ZZ`.
pub fn final_state_report(s: &SuperMatrix<f64>, frame: &Frame<f64>) -> Result<Vec<(&'static str, f64)>> {
    if s.dim() != 4 {
        return Err(Error::dim("16x16 supermatrix", format!("{0}x{0}", s.dim() * s.dim())));
    }
    if s.trace_preservation_deviation() > 1e-9 {
        return Err(Error::Numeric("supermatrix is not trace preserving".into()));
    }
    let rho = to_label_state(&fixed_point(s)?, frame)?;
    let c = pauli_decompose(rho.matrix())?;
    Ok(PAULI_LABELS.iter().zip(c.iter()).map(|(l, z)| (*l, z.re)).collect())
}

/// Value that goes into a CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Formats `v` with 12 significant digits.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    format!("{v:.11e}")
}

/// A CSV table with a commented `key=value` header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            header: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.header.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.header {
            let _ = writeln!(out, "# {k}={}", v.replace('\n', " "));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(v) => format_number(*v),
                    Cell::Int(v) => v.to_string(),
                    Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
                    Cell::Text(s) => s.clone(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Header entries describing a simulated system.
pub fn system_snapshot(system: &PulseSystem) -> Vec<(String, String)> {
    let s = &system.sys;
    let r = &system.relaxation;
    vec![
        ("omega_s".into(), format!("{}", s.omega_s)),
        ("omega_i".into(), format!("{}", s.omega_i)),
        ("a_iso".into(), format!("{}", s.a_iso)),
        ("b_aniso".into(), format!("{}", s.b_aniso)),
        ("temperature".into(), format!("{}", s.temperature)),
        ("t1e".into(), format!("{}", r.t1e)),
        ("tzq".into(), format!("{}", r.tzq)),
        ("tdq".into(), r.tdq.map_or("none".into(), |t| format!("{t}"))),
        ("bath_temperature".into(), format!("{}", r.temperature)),
        ("dt_max".into(), format!("{}", system.dt_max)),
    ]
}

/// Relaxation set used when the standard channels are requested explicitly.
pub const STANDARD_RELAXATION: RelaxationSet = RelaxationSet::STANDARD;
