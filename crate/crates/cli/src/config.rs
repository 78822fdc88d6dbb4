//! Run configuration: a TOML document with one table per concern.
//!
//! Parsing is strict. Unknown keys, missing required fields and invalid values
//! are all collected and reported together.

use std::path::{Path, PathBuf};

use dnp_core::harness::{AngleMapSpec, SweepParameter, DEFAULT_ANGLE_PERIOD};
use dnp_core::model::RelaxationParams;
use dnp_core::pulse::{Mode, PulseSequence, DEFAULT_OMEGA_D};
use dnp_core::quantum::{SpinSystemParams, DEFAULT_TEMPERATURE};
use dnp_core::Error as CoreError;
use toml::{Table, Value};

/// Default profile shipped with the binary.
pub const MALONIC_ACID: &str = include_str!("../configs/malonic-acid.cfg");

const TOP_KEYS: &[&str] = &[
    "seed",
    "output",
    "system",
    "relaxation",
    "simulation",
    "channel_check",
    "optimize",
    "buildup",
    "angle_map",
    "sweep",
    "dq_leakage",
];

/// Which pulse a scenario drives the system with.
#[derive(Debug, Clone, PartialEq)]
pub enum PulseRef {
    Hard,
    /// Result of the optimizer run in the given mode.
    Optimized(Mode),
    File { path: PathBuf, sequence: PulseSequence },
}

impl PulseRef {
    pub fn name(&self) -> String {
        match self {
            PulseRef::Hard => "hard".into(),
            PulseRef::Optimized(mode) => format!("optimized-{mode}"),
            PulseRef::File { path, .. } => path
                .file_stem()
                .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned()),
        }
    }

    /// Resolves `hard`, `optimized-open`, `optimized-closed` or a pulse file
    /// path (relative paths are taken from `base`).
    pub fn parse(text: &str, base: &Path) -> Result<Self, String> {
        match text {
            "hard" => Ok(PulseRef::Hard),
            "optimized-open" => Ok(PulseRef::Optimized(Mode::Open)),
            "optimized-closed" => Ok(PulseRef::Optimized(Mode::Closed)),
            path => {
                let path = base.join(path);
                let body = std::fs::read_to_string(&path).map_err(|e| format!("cannot read pulse file {}: {e}", path.display()))?;
                let sequence = body
                    .parse::<PulseSequence>()
                    .map_err(|e| format!("pulse file {}: {e}", path.display()))?;
                Ok(PulseRef::File { path, sequence })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    /// `None` selects `min(T1e, T_zq)/100`.
    pub dt_max: Option<f64>,
    pub omega_d: f64,
    /// Free evolution after every pulse of a train, seconds.
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelCheck {
    pub dt: Vec<f64>,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimize {
    pub modes: Vec<Mode>,
    /// `None` selects two pulses closed, three open.
    pub n_pulses: Option<usize>,
    pub max_iterations: usize,
    pub convergence_tol: f64,
    pub restarts: usize,
    pub train_cycles: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Buildup {
    pub pulse: PulseRef,
    pub total_time: f64,
    /// `None` picks a stride giving about `points` readouts.
    pub readout_stride: Option<u64>,
    pub points: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleMapConfig {
    pub panels: Vec<String>,
    pub grid: usize,
    pub period: f64,
    pub n_cycles: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub pulses: Vec<PulseRef>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DqLeakage {
    pub tdq_ratio: f64,
    pub pulses: Vec<PulseRef>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub system: SpinSystemParams<f64>,
    pub relaxation: RelaxationParams<f64>,
    pub simulation: Simulation,
    pub channel_check: ChannelCheck,
    pub optimize: Optimize,
    pub buildup: Buildup,
    pub angle_map: AngleMapConfig,
    pub sweep: Sweep,
    pub dq_leakage: DqLeakage,
    /// Verbatim configuration text.
    pub source: String,
}

/// Typed access to one table, recording every problem in `errors`.
struct Section<'a> {
    path: String,
    table: Option<&'a Table>,
    allowed: &'static [&'static str],
    errors: &'a mut Vec<String>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Table, name: &str, allowed: &'static [&'static str], errors: &'a mut Vec<String>) -> Self {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                errors.push(format!("{name}: expected a table"));
                None
            }
        };
        let mut s = Section {
            path: name.into(),
            table,
            allowed,
            errors,
        };
        s.reject_unknown();
        s
    }

    fn reject_unknown(&mut self) {
        if let Some(t) = self.table {
            for key in t.keys() {
                if !self.allowed.contains(&key.as_str()) {
                    self.errors.push(format!("{}.{key}: unknown key", self.path));
                }
            }
        }
    }

    fn key(&self, key: &str) -> String {
        format!("{}.{key}", self.path)
    }

    fn value(&self, key: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn error(&mut self, key: &str, msg: impl std::fmt::Display) {
        let k = self.key(key);
        self.errors.push(format!("{k}: {msg}"));
    }

    fn opt_number(&mut self, key: &str) -> Option<f64> {
        match self.value(key)? {
            Value::Float(v) => Some(*v),
            Value::Integer(v) => Some(*v as f64),
            Value::String(s) if s == "inf" => Some(f64::INFINITY),
            _ => {
                self.error(key, "expected a number");
                None
            }
        }
    }

    fn number(&mut self, key: &str, default: Option<f64>) -> f64 {
        match (self.opt_number(key), default) {
            (Some(v), _) => v,
            (None, Some(d)) if self.value(key).is_none() => d,
            (None, None) if self.value(key).is_none() => {
                self.error(key, "missing required field");
                f64::NAN
            }
            _ => f64::NAN,
        }
    }

    fn positive(&mut self, key: &str, default: Option<f64>) -> f64 {
        let v = self.number(key, default);
        if !v.is_nan() && !(v > 0.0 && v.is_finite()) {
            self.error(key, format!("must be finite and positive, got {v}"));
        }
        v
    }

    fn non_negative(&mut self, key: &str, default: f64) -> f64 {
        let v = self.number(key, Some(default));
        if !v.is_nan() && !(v >= 0.0 && v.is_finite()) {
            self.error(key, format!("must be finite and non-negative, got {v}"));
        }
        v
    }

    fn integer(&mut self, key: &str, default: u64, min: u64) -> u64 {
        match self.value(key) {
            None => default,
            Some(Value::Integer(v)) if *v >= min as i64 => *v as u64,
            Some(Value::Integer(v)) => {
                self.error(key, format!("must be at least {min}, got {v}"));
                default
            }
            Some(_) => {
                self.error(key, "expected an integer");
                default
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<&'a str> {
        match self.value(key)? {
            Value::String(s) => Some(s),
            _ => {
                self.error(key, "expected a string");
                None
            }
        }
    }

    fn strings(&mut self, key: &str) -> Option<Vec<&'a str>> {
        match self.value(key)? {
            Value::String(s) => Some(vec![s.as_str()]),
            Value::Array(items) => {
                let mut out = Vec::new();
                for item in items {
                    match item {
                        Value::String(s) => out.push(s.as_str()),
                        _ => {
                            self.error(key, "expected a list of strings");
                            return None;
                        }
                    }
                }
                Some(out)
            }
            _ => {
                self.error(key, "expected a string or a list of strings");
                None
            }
        }
    }

    fn numbers(&mut self, key: &str) -> Option<Vec<f64>> {
        match self.value(key)? {
            Value::Array(items) => {
                let mut out = Vec::new();
                for item in items {
                    match item {
                        Value::Float(v) => out.push(*v),
                        Value::Integer(v) => out.push(*v as f64),
                        Value::String(s) if s == "inf" => out.push(f64::INFINITY),
                        _ => {
                            self.error(key, "expected a list of numbers");
                            return None;
                        }
                    }
                }
                Some(out)
            }
            _ => {
                self.error(key, "expected a list of numbers");
                None
            }
        }
    }

    fn pulses(&mut self, key: &str, default: &[&str], base: &Path) -> Vec<PulseRef> {
        let names = self.strings(key).unwrap_or_else(|| default.to_vec());
        if names.is_empty() {
            self.error(key, "needs at least one pulse");
        }
        let mut out = Vec::new();
        for n in names {
            match PulseRef::parse(n, base) {
                Ok(p) => out.push(p),
                Err(e) => self.error(key, e),
            }
        }
        out
    }

    /// Records a validation failure reported by the physics crate.
    fn core(&mut self, result: dnp_core::Result<()>) {
        match result {
            Ok(()) => {}
            Err(CoreError::InvalidParameter { name, reason }) => self.error(name, reason),
            Err(e) => {
                let p = self.path.clone();
                self.errors.push(format!("{p}: {e}"));
            }
        }
    }
}

/// Default channel-check steps: six decades.
fn default_steps() -> Vec<f64> {
    (0..7).map(|k| 10f64.powi(-12 + k)).collect()
}

/// Parses configuration text. `base` resolves relative pulse-file paths.
pub fn parse_config_str(text: &str, base: &Path) -> Result<RunConfig, Vec<String>> {
    let root: Table = toml::from_str(text).map_err(|e| vec![format!("syntax: {}", e.message())])?;
    let mut errors = Vec::new();
    for key in root.keys() {
        if !TOP_KEYS.contains(&key.as_str()) {
            errors.push(format!("{key}: unknown key"));
        }
    }
    let seed = match root.get("seed") {
        None => 1,
        Some(Value::Integer(v)) if *v >= 0 => *v as u64,
        Some(_) => {
            errors.push("seed: expected a non-negative integer".into());
            1
        }
    };
    let output = match root.get("output") {
        None => None,
        Some(Value::String(s)) => Some(base.join(s)),
        Some(_) => {
            errors.push("output: expected a path string".into());
            None
        }
    };

    let system = {
        let mut s = Section::new(&root, "system", &["omega_s", "omega_i", "a_iso", "b_aniso", "temperature"], &mut errors);
        let system = SpinSystemParams {
            omega_s: s.number("omega_s", None),
            omega_i: s.number("omega_i", None),
            a_iso: s.number("a_iso", None),
            b_aniso: s.number("b_aniso", None),
            temperature: s.number("temperature", Some(DEFAULT_TEMPERATURE)),
        };
        let fields = [system.omega_s, system.omega_i, system.a_iso, system.b_aniso, system.temperature];
        if fields.iter().all(|v| !v.is_nan()) {
            s.core(system.validate());
        }
        system
    };

    let relaxation = {
        let mut s = Section::new(&root, "relaxation", &["t1e", "tzq", "tdq", "temperature"], &mut errors);
        let r = RelaxationParams {
            t1e: s.positive("t1e", None),
            tzq: s.positive("tzq", None),
            tdq: s.opt_number("tdq"),
            temperature: s.positive("temperature", Some(system.temperature)),
        };
        if let Some(t) = r.tdq {
            if !(t > 0.0 && t.is_finite()) {
                s.error("tdq", format!("must be finite and positive, got {t}"));
            }
        }
        r
    };

    let simulation = {
        let mut s = Section::new(&root, "simulation", &["dt_max", "omega_d", "delay"], &mut errors);
        let dt_max = s.opt_number("dt_max");
        if let Some(v) = dt_max {
            if !(v > 0.0 && v.is_finite()) {
                s.error("dt_max", format!("must be finite and positive, got {v}"));
            }
        }
        Simulation {
            dt_max,
            omega_d: s.positive("omega_d", Some(DEFAULT_OMEGA_D)),
            delay: s.non_negative("delay", 0.0),
        }
    };

    let channel_check = {
        let mut s = Section::new(&root, "channel_check", &["dt", "tolerance"], &mut errors);
        let dt = s.numbers("dt").unwrap_or_else(default_steps);
        if dt.is_empty() || dt.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            s.error("dt", "needs at least one finite non-negative step");
        }
        ChannelCheck {
            dt,
            tolerance: s.positive("tolerance", Some(1e-9)),
        }
    };

    let optimize = {
        let mut s = Section::new(
            &root,
            "optimize",
            &["modes", "n_pulses", "max_iterations", "convergence_tol", "restarts", "train_cycles"],
            &mut errors,
        );
        let mut modes = Vec::new();
        for m in s.strings("modes").unwrap_or_else(|| vec!["closed", "open"]) {
            match m.parse::<Mode>() {
                Ok(mode) if !modes.contains(&mode) => modes.push(mode),
                Ok(_) => s.error("modes", format!("`{m}` listed twice")),
                Err(e) => s.error("modes", e),
            }
        }
        if modes.is_empty() {
            s.error("modes", "needs at least one mode");
        }
        Optimize {
            modes,
            n_pulses: s.value("n_pulses").map(|_| s.integer("n_pulses", 1, 1) as usize),
            max_iterations: s.integer("max_iterations", 1500, 1) as usize,
            convergence_tol: s.positive("convergence_tol", Some(1e-10)),
            restarts: s.integer("restarts", 8, 1) as usize,
            train_cycles: s.integer("train_cycles", 1, 1),
        }
    };

    let buildup = {
        let mut s = Section::new(&root, "buildup", &["pulse", "total_time", "readout_stride", "points"], &mut errors);
        let pulse = match s.string("pulse").map(|p| PulseRef::parse(p, base)) {
            None => PulseRef::Hard,
            Some(Ok(p)) => p,
            Some(Err(e)) => {
                s.error("pulse", e);
                PulseRef::Hard
            }
        };
        Buildup {
            pulse,
            total_time: s.positive("total_time", Some(1.0)),
            readout_stride: s.value("readout_stride").map(|_| s.integer("readout_stride", 1, 1)),
            points: s.integer("points", 100, 1),
        }
    };

    let angle_map = {
        let mut s = Section::new(&root, "angle_map", &["panels", "grid", "period", "n_cycles"], &mut errors);
        let panels: Vec<String> = s
            .strings("panels")
            .unwrap_or_else(|| vec!["a", "b", "c", "d", "e"])
            .into_iter()
            .map(String::from)
            .collect();
        for p in &panels {
            if let Err(e) = AngleMapSpec::panel(p) {
                s.error("panels", e);
            }
        }
        if panels.is_empty() {
            s.error("panels", "needs at least one panel");
        }
        AngleMapConfig {
            panels,
            grid: s.integer("grid", 32, 2) as usize,
            period: s.positive("period", Some(DEFAULT_ANGLE_PERIOD)),
            n_cycles: s.integer("n_cycles", 1, 1),
        }
    };

    let sweep = {
        let mut s = Section::new(&root, "sweep", &["parameter", "values", "pulses"], &mut errors);
        let parameter = match s.string("parameter").map(str::parse::<SweepParameter>) {
            None => SweepParameter::RabiFrequency,
            Some(Ok(p)) => p,
            Some(Err(e)) => {
                s.error("parameter", e);
                SweepParameter::RabiFrequency
            }
        };
        let values = s
            .numbers("values")
            .unwrap_or_else(|| (2..=30).map(|k| k as f64 * 1e6).collect());
        if values.is_empty() {
            s.error("values", "needs at least one value");
        }
        let bad = values.iter().any(|v| match parameter {
            SweepParameter::TdqRatio => !(*v > 0.0),
            _ => !(*v > 0.0 && v.is_finite()),
        });
        if bad {
            s.error("values", format!("invalid value for {parameter}"));
        }
        Sweep {
            parameter,
            values,
            pulses: s.pulses("pulses", &["hard"], base),
        }
    };

    let dq_leakage = {
        let mut s = Section::new(&root, "dq_leakage", &["tdq_ratio", "pulses"], &mut errors);
        DqLeakage {
            tdq_ratio: s.positive("tdq_ratio", Some(2.0)),
            pulses: s.pulses("pulses", &["hard"], base),
        }
    };

    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(RunConfig {
        seed,
        output,
        system,
        relaxation,
        simulation,
        channel_check,
        optimize,
        buildup,
        angle_map,
        sweep,
        dq_leakage,
        source: text.to_string(),
    })
}

/// Reads and parses a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig, Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| vec![format!("cannot read {}: {e}", path.display())])?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base)
}
