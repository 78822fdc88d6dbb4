//! Scenario dispatch and output writing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use dnp_core::channels::{dump_super, kraus_to_super, validate_cptp, KrausSet};
use dnp_core::harness::{
    asymptotic_enhancement, cycle_map, dnp_angle_map, dq_leakage_run, final_state_report, fit_buildup,
    run_saturation_train, sweep, system_snapshot, AngleMapSpec, Cell, Drive, NamedPulse, SweepParameter, SweepSpec,
    Table,
};
use dnp_core::model::{evolution_step, relaxation_frame, t1e_channel, tdq_channel, tx_channel, RelaxationSet};
use dnp_core::pulse::{evaluate_pulse, optimize_pulse, Mode, OptimizerConfig, PulseResult, PulseSequence, PulseSystem};
use dnp_core::quantum::{control_hamiltonian, drift_hamiltonian, HamiltonianFrame, Mechanism};

use crate::config::{PulseRef, RunConfig};
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    ChannelCheck,
    Optimize,
    Buildup,
    AngleMap,
    Sweep,
    DqLeakage,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::ChannelCheck => "channel-check",
            Command::Optimize => "optimize",
            Command::Buildup => "buildup",
            Command::AngleMap => "angle-map",
            Command::Sweep => "sweep",
            Command::DqLeakage => "dq-leakage",
        }
    }
}

/// Everything needed to run one command.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config: RunConfig,
    /// `None` when the bundled profile is used.
    pub config_path: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
}

/// Files produced by a command, keyed by file name.
#[derive(Debug, Default)]
struct Outputs {
    files: BTreeMap<String, String>,
    summary: Vec<String>,
    /// Set when the run completed but its checks did not pass.
    failure: Option<String>,
}

impl Outputs {
    fn csv(&mut self, name: impl Into<String>, table: &Table) {
        self.files.insert(name.into(), table.to_csv());
    }

    fn line(&mut self, text: impl Into<String>) {
        self.summary.push(text.into());
    }
}

struct Context<'a> {
    cfg: &'a RunConfig,
    command: Command,
    seed: u64,
    system: PulseSystem,
    optimized: Mutex<BTreeMap<String, PulseResult>>,
}

impl Context<'_> {
    fn table(&self, columns: &[&str]) -> Table {
        let mut t = Table::new(columns);
        t.meta("command", self.command.name())
            .meta("version", VERSION)
            .meta("seed", self.seed);
        for (k, v) in system_snapshot(&self.system) {
            t.meta(k, v);
        }
        t.meta("omega_d", self.cfg.simulation.omega_d)
            .meta("delay", self.cfg.simulation.delay);
        t
    }

    fn optimizer_config(&self, mode: Mode) -> OptimizerConfig {
        let o = &self.cfg.optimize;
        let mut c = OptimizerConfig::for_mode(mode);
        if let Some(n) = o.n_pulses {
            c.n_pulses = n;
        }
        c.max_iterations = o.max_iterations;
        c.convergence_tol = o.convergence_tol;
        c.restarts = o.restarts;
        c.seed = self.seed;
        c.dt_max = self.cfg.simulation.dt_max;
        c.omega_d = self.cfg.simulation.omega_d;
        c.train_delay = self.cfg.simulation.delay;
        c.train_cycles = o.train_cycles;
        c
    }

    /// Optimizes once per mode and caches the result for the rest of the run.
    fn optimized(&self, mode: Mode) -> Result<PulseResult, CliError> {
        let key = mode.to_string();
        if let Some(r) = self.optimized.lock().expect("cache lock").get(&key) {
            return Ok(r.clone());
        }
        let r = optimize_pulse(&self.optimizer_config(mode), &self.system)?;
        self.optimized.lock().expect("cache lock").insert(key, r.clone());
        Ok(r)
    }

    fn hard(&self) -> Result<PulseSequence, CliError> {
        Ok(PulseSequence::hard_pulse(self.cfg.simulation.omega_d)?)
    }

    fn sequence(&self, pulse: &PulseRef) -> Result<PulseSequence, CliError> {
        match pulse {
            PulseRef::Hard => self.hard(),
            PulseRef::Optimized(mode) => Ok(self.optimized(*mode)?.sequence),
            PulseRef::File { sequence, .. } => Ok(sequence.clone()),
        }
    }

    /// Harness pulse; a hard pulse re-derives its duration in Rabi sweeps.
    fn named(&self, pulse: &PulseRef, rabi_sweep: bool) -> Result<NamedPulse, CliError> {
        Ok(match pulse {
            PulseRef::Hard if rabi_sweep => NamedPulse::hard(),
            other => NamedPulse::fixed(other.name(), self.sequence(other)?),
        })
    }
}

/// Runs the command, writes its outputs and returns the written paths.
pub fn run(inv: &Invocation) -> Result<Vec<PathBuf>, CliError> {
    let outputs = match inv.threads {
        Some(0) => return Err(CliError::Config(vec!["--threads: must be at least 1".into()])),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Internal(e.to_string()))?
            .install(|| execute(inv))?,
        None => execute(inv)?,
    };
    let written = write_outputs(inv, &outputs)?;
    match outputs.failure {
        Some(msg) => Err(CliError::Numeric(msg)),
        None => Ok(written),
    }
}

fn execute(inv: &Invocation) -> Result<Outputs, CliError> {
    let cfg = &inv.config;
    let system = PulseSystem::new(cfg.system, cfg.relaxation, cfg.simulation.dt_max)?;
    let ctx = Context {
        cfg,
        command: inv.command,
        seed: inv.seed,
        system,
        optimized: Mutex::new(BTreeMap::new()),
    };
    let mut out = Outputs::default();
    out.line(format!("dnp {} {} (seed {})", VERSION, inv.command.name(), inv.seed));
    match inv.command {
        Command::ChannelCheck => channel_check(&ctx, &mut out)?,
        Command::Optimize => optimize(&ctx, &mut out)?,
        Command::Buildup => buildup(&ctx, &mut out)?,
        Command::AngleMap => angle_map(&ctx, &mut out)?,
        Command::Sweep => run_sweep(&ctx, &mut out)?,
        Command::DqLeakage => dq_leakage(&ctx, &mut out)?,
    }
    Ok(out)
}

fn write_outputs(inv: &Invocation, out: &Outputs) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(&inv.out)?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: &str| -> Result<(), CliError> {
        let path = inv.out.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    for (name, body) in &out.files {
        put(name, body)?;
    }
    let mut summary = out.summary.join("\n");
    summary.push('\n');
    put("summary.txt", &summary)?;
    put("manifest.txt", &manifest(inv, out))?;
    Ok(written)
}

fn manifest(inv: &Invocation, out: &Outputs) -> String {
    let config = inv
        .config_path
        .as_ref()
        .map_or_else(|| "bundled:malonic-acid.cfg".to_string(), |p| p.display().to_string());
    let mut m = String::new();
    m.push_str(&format!("command={}\n", inv.command.name()));
    m.push_str(&format!("version={VERSION}\n"));
    m.push_str(&format!("seed={}\n", inv.seed));
    m.push_str(&format!(
        "threads={}\n",
        inv.threads.map_or_else(|| "default".to_string(), |n| n.to_string())
    ));
    m.push_str(&format!("config={config}\n"));
    let files: Vec<&str> = out.files.keys().map(String::as_str).collect();
    m.push_str(&format!("outputs={}\n", files.join(",")));
    m.push_str("--- config ---\n");
    m.push_str(&inv.config.source);
    if !inv.config.source.ends_with('\n') {
        m.push('\n');
    }
    m
}

fn channel_check(ctx: &Context, out: &mut Outputs) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let (sys, r) = (&cfg.system, &cfg.relaxation);
    let frame = relaxation_frame(sys)?;
    let include = RelaxationSet::for_params(r);
    let h = drift_hamiltonian(sys, HamiltonianFrame::ElectronRotating)?
        + control_hamiltonian(Mechanism::Overhauser, cfg.simulation.omega_d)?;
    let mut names = vec!["t1e", "tx"];
    if r.tdq.is_some() {
        names.push("tdq");
    }
    names.push("evolution_step");
    let build = |name: &str, dt: f64| -> Result<KrausSet<f64>, CliError> {
        Ok(match name {
            "t1e" => t1e_channel(dt, r, sys, &frame)?,
            "tx" => tx_channel(dt, r, sys, &frame)?,
            "tdq" => tdq_channel(dt, r, sys, &frame)?,
            _ => evolution_step(&h, dt, r, sys, &frame, include)?,
        })
    };
    let tol = cfg.channel_check.tolerance;
    let mut table = ctx.table(&["channel", "dt", "trace_deviation", "min_choi_eigenvalue", "cptp"]);
    table.meta("tolerance", tol);
    let mut failures = Vec::new();
    for name in &names {
        let (mut worst_trace, mut worst_eig) = (0.0f64, f64::INFINITY);
        let mut last = None;
        for &dt in &cfg.channel_check.dt {
            let k = build(name, dt)?;
            let report = validate_cptp(&k);
            let ok = report.passes(tol);
            if !ok {
                failures.push(format!("{name} at dt={dt:e}"));
            }
            worst_trace = worst_trace.max(report.trace_deviation);
            worst_eig = worst_eig.min(report.min_choi_eigenvalue);
            table.push(vec![
                Cell::from(*name),
                dt.into(),
                report.trace_deviation.into(),
                report.min_choi_eigenvalue.into(),
                Cell::from(if ok { "yes" } else { "no" }),
            ]);
            last = Some((dt, k));
        }
        if let Some((dt, k)) = last {
            let mut dump = format!("# {name} supermatrix, dt={dt}\n");
            dump.push_str(&dump_super(&kraus_to_super(&k)));
            out.files.insert(format!("supermatrix-{name}.txt"), dump);
        }
        out.line(format!(
            "{name}: {} steps, max trace deviation {worst_trace:.3e}, min Choi eigenvalue {worst_eig:.3e}",
            cfg.channel_check.dt.len()
        ));
    }
    out.csv("channels.csv", &table);
    if failures.is_empty() {
        out.line(format!("all channels CPTP within {tol:e}"));
    } else {
        let msg = format!("not CPTP within {tol:e}: {}", failures.join(", "));
        out.line(msg.clone());
        out.failure = Some(msg);
    }
    Ok(())
}

fn result_row(name: &str, r: &PulseResult, enhancement: f64) -> Vec<Cell> {
    vec![
        Cell::from(name),
        Cell::Int(r.sequence.segments().len() as i64),
        r.gate_fidelity_closed.into(),
        r.gate_fidelity_open.into(),
        r.reduced_map_fidelity.into(),
        enhancement.into(),
    ]
}

fn optimize(ctx: &Context, out: &mut Outputs) -> Result<(), CliError> {
    let o = &ctx.cfg.optimize;
    let mut table = ctx.table(&[
        "pulse",
        "segments",
        "gate_fidelity_closed",
        "gate_fidelity_open",
        "reduced_map_fidelity",
        "asymptotic_enhancement",
    ]);
    table
        .meta("max_iterations", o.max_iterations)
        .meta("convergence_tol", o.convergence_tol)
        .meta("restarts", o.restarts)
        .meta("train_cycles", o.train_cycles);
    let delay = ctx.cfg.simulation.delay;
    let enhancement = |seq: &PulseSequence| {
        asymptotic_enhancement(
            &ctx.system,
            &Drive::Pulse {
                sequence: seq.clone(),
                delay,
            },
        )
    };
    let hard = ctx.hard()?;
    let baseline = evaluate_pulse(&ctx.system, &hard, &ctx.optimizer_config(Mode::Open))?;
    let e = enhancement(&hard)?;
    table.push(result_row("hard", &baseline, e));
    out.line(format!(
        "hard: gate fidelity closed {:.4} open {:.4}, reduced-map fidelity {:.4}, enhancement {e:.3}",
        baseline.gate_fidelity_closed, baseline.gate_fidelity_open, baseline.reduced_map_fidelity
    ));
    for &mode in &o.modes {
        let r = ctx.optimized(mode)?;
        let e = enhancement(&r.sequence)?;
        let name = format!("optimized-{mode}");
        table.push(result_row(&name, &r, e));
        let mut history = ctx.table(&["iteration", "objective"]);
        history.meta("mode", mode).meta("best_restart", r.best_restart);
        for (i, v) in r.objective_history.iter().enumerate() {
            history.push(vec![Cell::Int(i as i64), (*v).into()]);
        }
        out.csv(format!("history-{mode}.csv"), &history);
        out.files.insert(format!("pulse-{mode}.txt"), r.sequence.to_text());
        let objectives: Vec<String> = r.restart_objectives.iter().map(|v| format!("{v:.4e}")).collect();
        out.line(format!(
            "{name}: gate fidelity closed {:.4} open {:.4} (change with relaxation {:+.4}), reduced-map fidelity {:.4}, enhancement {e:.3}",
            r.gate_fidelity_closed,
            r.gate_fidelity_open,
            r.gate_fidelity_open - r.gate_fidelity_closed,
            r.reduced_map_fidelity
        ));
        out.line(format!("  restarts: [{}], best {}", objectives.join(", "), r.best_restart));
        out.line(format!("  durations: {:?}", r.sequence.durations()));
    }
    out.csv("optimize.csv", &table);
    Ok(())
}

fn buildup(ctx: &Context, out: &mut Outputs) -> Result<(), CliError> {
    let b = &ctx.cfg.buildup;
    let drive = Drive::Pulse {
        sequence: ctx.sequence(&b.pulse)?,
        delay: ctx.cfg.simulation.delay,
    };
    let period = drive.period();
    if !(period > 0.0) {
        return Err(CliError::Config(vec!["buildup.pulse: drive period must be positive".into()]));
    }
    let cycles = (b.total_time / period).ceil().max(1.0) as u64;
    let stride = b.readout_stride.unwrap_or_else(|| cycles.div_ceil(b.points).max(1));
    let curve = run_saturation_train(&ctx.system, &drive, b.total_time, stride)?;
    let mut table = ctx.table(&["time", "enhancement"]);
    table.meta("pulse", b.pulse.name());
    for (k, v) in &curve.metadata {
        table.meta(k.clone(), v);
    }
    for (t, e) in curve.times.iter().zip(&curve.enhancements) {
        table.push(vec![(*t).into(), (*e).into()]);
    }
    out.csv("buildup.csv", &table);

    let cycle = cycle_map(&ctx.system, &drive)?;
    let asymptote = asymptotic_enhancement(&ctx.system, &drive)?;
    let mut state = ctx.table(&["term", "coefficient"]);
    state.meta("pulse", b.pulse.name());
    for (label, c) in final_state_report(&cycle, &ctx.system.label_frame)? {
        state.push(vec![Cell::from(label), c.into()]);
    }
    out.csv("final-state.csv", &state);

    let last = *curve.enhancements.last().expect("curve has its initial point");
    let monotone = curve.enhancements.windows(2).all(|w| w[1] >= w[0]);
    out.line(format!("pulse: {} ({})", b.pulse.name(), drive.describe()));
    out.line(format!("period {period:e} s, {} readouts every {stride} cycles", curve.times.len() - 1));
    out.line(format!("final enhancement {last:.6}, asymptotic (fixed point) {asymptote:.6}"));
    out.line(format!("monotone increasing: {}", if monotone { "yes" } else { "no" }));
    match fit_buildup(&curve) {
        Ok(f) => out.line(format!(
            "fit a(1-exp(-t/tau)): a={:.6} tau={:.6e} s rms residual {:.3e}{}",
            f.amplitude,
            f.time_constant,
            f.residual,
            if f.degenerate { " (degenerate)" } else { "" }
        )),
        Err(e) => out.line(format!("fit failed: {e}")),
    }
    Ok(())
}

fn angle_map(ctx: &Context, out: &mut Outputs) -> Result<(), CliError> {
    let a = &ctx.cfg.angle_map;
    let cap = dnp_core::model::enhancement_cap(&ctx.system.sys);
    for panel in &a.panels {
        let mut spec = AngleMapSpec::panel(panel)?;
        spec.nx = a.grid;
        spec.ny = a.grid;
        spec.period = a.period;
        spec.n_cycles = a.n_cycles;
        let map = dnp_angle_map(&spec, &ctx.system)?;
        let mut table = ctx.table(&["x_angle", "y_angle", "enhancement"]);
        table
            .meta("panel", panel)
            .meta("base", format!("{:?}", spec.base))
            .meta("x_axis", format!("{:?}", spec.x_axis))
            .meta("y_axis", format!("{:?}", spec.y_axis))
            .meta("period", spec.period)
            .meta("n_cycles", spec.n_cycles);
        let mut extreme = 0.0f64;
        for (iy, row) in map.values.iter().enumerate() {
            for (ix, &v) in row.iter().enumerate() {
                extreme = extreme.max(v.abs());
                table.push(vec![map.x_values[ix].into(), map.y_values[iy].into(), v.into()]);
            }
        }
        out.csv(format!("angle-map-{panel}.csv"), &table);
        let (ix, iy, best) = map.argmax();
        out.line(format!(
            "panel {panel}: max {best:.4} at (x={:.6}, y={:.6}), max |enhancement| {extreme:.4} (cap {cap:.4})",
            map.x_values[ix], map.y_values[iy]
        ));
    }
    Ok(())
}

fn run_sweep(ctx: &Context, out: &mut Outputs) -> Result<(), CliError> {
    let s = &ctx.cfg.sweep;
    let rabi = s.parameter == SweepParameter::RabiFrequency;
    let pulses = s
        .pulses
        .iter()
        .map(|p| ctx.named(p, rabi))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = SweepSpec {
        parameter: s.parameter,
        values: s.values.clone(),
        delay: ctx.cfg.simulation.delay,
    };
    let rows = sweep(&spec, &pulses, &ctx.system)?;
    let column = s.parameter.to_string();
    let mut table = ctx.table(&["pulse", &column, "enhancement"]);
    table.meta("parameter", &column);
    for p in &pulses {
        if let dnp_core::harness::PulseSpec::Fixed(seq) = &p.pulse {
            table.meta(format!("pulse.{}", p.name), format!("{:?}", seq.durations()));
        }
    }
    for r in &rows {
        table.push(vec![Cell::from(r.pulse.as_str()), r.value.into(), r.enhancement.into()]);
    }
    out.csv("sweep.csv", &table);
    for p in &pulses {
        let mine: Vec<_> = rows.iter().filter(|r| r.pulse == p.name).collect();
        let best = mine.iter().max_by(|a, b| a.enhancement.total_cmp(&b.enhancement)).expect("non-empty sweep");
        let lo = mine.iter().map(|r| r.enhancement).fold(f64::INFINITY, f64::min);
        let hi = mine.iter().map(|r| r.enhancement).fold(f64::NEG_INFINITY, f64::max);
        out.line(format!(
            "{}: argmax {column}={:e} (enhancement {:.4}), range {:.4} [{lo:.4}, {hi:.4}]",
            p.name,
            best.value,
            best.enhancement,
            hi - lo
        ));
    }
    Ok(())
}

fn dq_leakage(ctx: &Context, out: &mut Outputs) -> Result<(), CliError> {
    let d = &ctx.cfg.dq_leakage;
    let pulses = d
        .pulses
        .iter()
        .map(|p| ctx.named(p, false))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = dq_leakage_run(&ctx.system, d.tdq_ratio, &pulses, ctx.cfg.simulation.delay)?;
    let mut table = ctx.table(&["pulse", "baseline", "with_leakage", "ratio"]);
    table.meta("tdq_ratio", d.tdq_ratio);
    for r in &rows {
        table.push(vec![
            Cell::from(r.pulse.as_str()),
            r.baseline.into(),
            r.with_leakage.into(),
            (r.with_leakage / r.baseline).into(),
        ]);
        out.line(format!(
            "{}: {:.4} -> {:.4} ({})",
            r.pulse,
            r.baseline,
            r.with_leakage,
            if r.with_leakage < r.baseline { "lowered" } else { "not lowered" }
        ));
    }
    out.csv("dq-leakage.csv", &table);
    Ok(())
}

/// Output directory for an invocation: flag, then config, then `out`.
pub fn output_dir(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}
