//! Acceptance checks, one line per criterion.
//!
//! Runs every criterion even when an earlier one fails and exits non-zero if
//! any failed.

use std::f64::consts::FRAC_PI_2;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use dnp_cli::config::MALONIC_ACID;
use dnp_core::channels::{
    choi_to_kraus, choi_to_super, kraus_to_super, super_to_choi, validate_cptp, KrausSet, DEFAULT_CPTP_TOLERANCE,
};
use dnp_core::harness::{
    asymptotic_enhancement, dnp_angle_map, dq_leakage_run, final_state_report, sweep, AngleMapSpec, Drive, NamedPulse,
    SweepParameter, SweepSpec, DEFAULT_ANGLE_PERIOD,
};
use dnp_core::linalg::{identity, norm};
use dnp_core::model::{
    analytic_reduced_kraus, enhancement_cap, ideal_dnp_map, numeric_reduced_map, relaxation_equilibrium,
    relaxation_frame, t1e_channel, tdq_channel, tx_channel, RelaxationParams,
};
use dnp_core::pulse::{evaluate_pulse, optimize_pulse, Mode, OptimizerConfig, PulseSequence, PulseSystem, DEFAULT_OMEGA_D};
use dnp_core::quantum::{Mechanism, SpinSystemParams};
use dnp_core::random::{random_channel, random_density_matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn system() -> PulseSystem {
    PulseSystem::new(SpinSystemParams::malonic_acid(), RelaxationParams::default(), None).unwrap()
}

struct Pulses {
    closed: PulseSequence,
    open: PulseSequence,
    elapsed: Duration,
}

fn optimized() -> &'static Pulses {
    static CELL: OnceLock<Pulses> = OnceLock::new();
    CELL.get_or_init(|| {
        let s = system();
        let start = Instant::now();
        let closed = optimize_pulse(&OptimizerConfig::for_mode(Mode::Closed), &s).unwrap().sequence;
        let open = optimize_pulse(&OptimizerConfig::for_mode(Mode::Open), &s).unwrap().sequence;
        Pulses {
            closed,
            open,
            elapsed: start.elapsed(),
        }
    })
}

fn named_pulses() -> Vec<NamedPulse> {
    let p = optimized();
    vec![
        NamedPulse::hard(),
        NamedPulse::fixed("optimized-closed", p.closed.clone()),
        NamedPulse::fixed("optimized-open", p.open.clone()),
    ]
}

fn channel_algebra() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut round_trip, mut apply) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let d = if rng.random::<bool>() { 2 } else { 4 };
        let rank = rng.random_range(1..=d * d);
        let k: KrausSet<f64> = random_channel(&mut rng, d, rank);
        let s = kraus_to_super(&k);
        let c = super_to_choi(&s);
        let k2 = choi_to_kraus(&c, None).unwrap();
        let s2 = kraus_to_super(&k2);
        round_trip = round_trip
            .max(norm(&(s2.matrix() - s.matrix())))
            .max(norm(&(choi_to_super(&c).matrix() - s.matrix())))
            .max(norm(&(super_to_choi(&s2).matrix() - c.matrix())));
        let rho = random_density_matrix::<f64>(&mut rng, d);
        let a = k.apply_matrix(rho.matrix()).unwrap();
        let b = s.apply_matrix(rho.matrix()).unwrap();
        let e = c.apply_matrix(rho.matrix()).unwrap();
        apply = apply.max(norm(&(&a - &b))).max(norm(&(&a - &e)));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        round_trip < 1e-9 && apply < 1e-10 && secs < 10.0,
        format!("round trip {round_trip:.1e} (< 1e-9), apply {apply:.1e} (< 1e-10), {secs:.2} s (< 10 s)"),
    )
}

fn relaxation_contract() -> Outcome {
    let sys = SpinSystemParams::<f64>::malonic_acid();
    let mut r = RelaxationParams::<f64>::default();
    r.tdq = Some(2.0 * r.tzq);
    let frame = relaxation_frame(&sys).unwrap();
    let channels = |dt: f64| {
        [
            t1e_channel(dt, &r, &sys, &frame).unwrap(),
            tx_channel(dt, &r, &sys, &frame).unwrap(),
            tdq_channel(dt, &r, &sys, &frame).unwrap(),
        ]
    };
    let mut cptp = true;
    for k in 0..=12 {
        let dt = 1e-9 * 10f64.powf(k as f64 * 0.5);
        cptp &= channels(dt).iter().all(|c| validate_cptp(c).passes(DEFAULT_CPTP_TOLERANCE));
    }
    let id = channels(0.0)
        .iter()
        .map(|c| norm(&(kraus_to_super(c).matrix() - identity::<f64>(16))))
        .fold(0.0, f64::max);
    let eq = relaxation_equilibrium(&r, &sys, &frame).unwrap();
    let w = frame.label_basis().unwrap();
    let m = w.adjoint() * eq.matrix() * &w;
    let pe = sys.upper_population(sys.omega_s);
    let pn = sys.upper_population(sys.omega_i);
    let boltzmann = [pe * pn, pe * (1.0 - pn), (1.0 - pe) * pn, (1.0 - pe) * (1.0 - pn)];
    let mut stationary = (0..4).map(|i| (m[(i, i)].re - boltzmann[i]).abs()).fold(0.0, f64::max);
    for dt in [1e-9, 1e-6, 1e-3, 1.0] {
        for c in channels(dt) {
            stationary = stationary.max(norm(&(c.apply_matrix(eq.matrix()).unwrap() - eq.matrix())));
        }
    }
    outcome(
        cptp && id < 1e-12 && stationary < 1e-9,
        format!(
            "CPTP over dt 1e-9..1e-3: {}, dt=0 identity {id:.1e}, Boltzmann stationarity {stationary:.1e} (< 1e-9)",
            if cptp { "yes" } else { "no" }
        ),
    )
}

fn log_log_slope(t: &[f64], e: &[f64]) -> f64 {
    let x: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn reduced_map_scaling() -> Outcome {
    let start = Instant::now();
    let sys = SpinSystemParams::<f64>::malonic_acid();
    let r = RelaxationParams::<f64>::default();
    let times: Vec<f64> = (0..=8).map(|k| r.t1e / 1000.0 * 10f64.powf(k as f64 / 4.0)).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in [Mechanism::Overhauser, Mechanism::SolidEffect] {
        let errors: Vec<f64> = times
            .iter()
            .map(|&t| {
                let (k, _) = analytic_reduced_kraus(kind, t, &sys, &r).unwrap();
                norm(&(kraus_to_super(&k).matrix() - numeric_reduced_map(kind, t, &sys, &r).unwrap().matrix()))
            })
            .collect();
        let slope = log_log_slope(&times, &errors);
        pass &= (slope - 2.0).abs() <= 0.2;
        parts.push(format!("{kind:?} slope {slope:.3}"));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        pass && secs < 30.0,
        format!("{} (2.0 ± 0.2), {secs:.2} s (< 30 s)", parts.join(", ")),
    )
}

// Sign pattern of the final states: +1, -1, or 0 for an exact zero.
const OE_PATTERN: [i8; 16] = [1, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 1, -1, 0, 0, 1];
const SE_PATTERN: [i8; 16] = [1, 0, 0, -1, 0, 0, -1, 0, 0, 1, 0, 0, -1, 0, 0, 1];

fn sign(v: f64) -> i8 {
    if v.abs() < 1e-12 {
        0
    } else if v > 0.0 {
        1
    } else {
        -1
    }
}

fn opposite_polarization() -> Outcome {
    let sys = SpinSystemParams::<f64>::malonic_acid();
    let r = RelaxationParams::<f64>::default();
    let frame = relaxation_frame(&sys).unwrap();
    let report = |kind| {
        let s = ideal_dnp_map(kind, &sys, &r, FRAC_PI_2, 1, DEFAULT_ANGLE_PERIOD).unwrap();
        final_state_report(&s, &frame).unwrap()
    };
    let oe = report(Mechanism::Overhauser);
    let se = report(Mechanism::SolidEffect);
    let get = |rep: &[(&str, f64)], l: &str| rep.iter().find(|(k, _)| *k == l).unwrap().1;
    let opposite = get(&oe, "IZ") * get(&se, "IZ") < 0.0;
    let thermal_zi = sys.thermal_polarization(sys.omega_s) / 4.0;
    let zi_ratio = get(&oe, "ZI").abs() / thermal_zi;
    let coherent = get(&se, "XY") != 0.0 && get(&se, "YX") != 0.0;
    let mut mismatches = Vec::new();
    for (name, rep, pattern) in [("OE", &oe, OE_PATTERN), ("SE", &se, SE_PATTERN)] {
        for ((label, v), want) in rep.iter().zip(pattern) {
            if sign(*v) != want {
                mismatches.push(format!("{name} {label}={v:.2e} expected {}", ["-", "0", "+"][(want + 1) as usize]));
            }
        }
    }
    let pattern = if mismatches.is_empty() {
        "16-coefficient pattern matches".to_string()
    } else {
        format!("pattern mismatches: {}", mismatches.join("; "))
    };
    outcome(
        opposite && zi_ratio < 0.1 && coherent && mismatches.is_empty(),
        format!(
            "IZ OE {:.3e} SE {:.3e}, OE |ZI|/thermal {zi_ratio:.1e} (< 0.1), SE XY {:.2e} YX {:.2e}, {pattern}",
            get(&oe, "IZ"),
            get(&se, "IZ"),
            get(&se, "XY"),
            get(&se, "YX")
        ),
    )
}

fn angle_map() -> Outcome {
    let start = Instant::now();
    let s = system();
    let cap = enhancement_cap(&s.sys);
    let mut largest = 0.0f64;
    let mut d_map = None;
    for panel in ["a", "b", "c", "d", "e"] {
        let m = dnp_angle_map(&AngleMapSpec::panel(panel).unwrap(), &s).unwrap();
        largest = m.values.iter().flatten().fold(largest, |acc, v| acc.max(v.abs()));
        if panel == "d" {
            d_map = Some(m);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let m = d_map.unwrap();
    let (ix, iy, best) = m.argmax();
    let at_target = (m.x_values[ix], m.y_values[iy]) == (0.0, 0.0);
    let row = &m.values[0];
    let monotone = row.windows(2).all(|w| w[1] < w[0]);
    outcome(
        at_target && monotone && largest <= cap && secs < 120.0,
        format!(
            "32x32 argmax at theta3={:.4} theta4={:.4} value {best:.4} (theta1=theta2=pi/2), theta3 decreasing: {}, max |e| {largest:.4} vs cap {cap:.4}, {secs:.1} s (< 120 s)",
            m.x_values[ix],
            m.y_values[iy],
            if monotone { "yes" } else { "no" }
        ),
    )
}

fn rabi_sweep() -> Outcome {
    let s = system();
    let spec = SweepSpec {
        parameter: SweepParameter::RabiFrequency,
        values: (2..=30).map(|k| k as f64 * 1e6).collect(),
        delay: 0.0,
    };
    let pulses = named_pulses();
    let rows = sweep(&spec, &pulses, &s).unwrap();
    let of = |name: &str| rows.iter().filter(|r| r.pulse == name).collect::<Vec<_>>();
    let range = |name: &str| {
        let v: Vec<f64> = of(name).iter().map(|r| r.enhancement).collect();
        v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let hard = of("hard");
    let argmax = hard.iter().max_by(|a, b| a.enhancement.total_cmp(&b.enhancement)).unwrap();
    let at_b = (argmax.value - 14e6).abs() <= 1e6;
    let (rh, rc, ro) = (range("hard"), range("optimized-closed"), range("optimized-open"));
    outcome(
        at_b && rc < rh && ro < rh,
        format!(
            "hard argmax {:.0} MHz (14 ± 1) value {:.3}, ranges hard {rh:.3} closed {rc:.3} open {ro:.3}",
            argmax.value / 1e6,
            argmax.enhancement
        ),
    )
}

fn optimizer_ordering() -> Outcome {
    let s = system();
    let p = optimized();
    let config = OptimizerConfig::for_mode(Mode::Open);
    let hard = PulseSequence::hard_pulse(DEFAULT_OMEGA_D).unwrap();
    let eval = |seq: &PulseSequence| {
        let fid = evaluate_pulse(&s, seq, &config).unwrap().reduced_map_fidelity;
        let e = asymptotic_enhancement(
            &s,
            &Drive::Pulse {
                sequence: seq.clone(),
                delay: 0.0,
            },
        )
        .unwrap();
        (fid, e)
    };
    let (fo, eo) = eval(&p.open);
    let (fc, ec) = eval(&p.closed);
    let (fh, eh) = eval(&hard);
    let secs = p.elapsed.as_secs_f64();
    outcome(
        fo > fc && fc > fh && eo > ec && ec > eh && secs < 300.0,
        format!(
            "reduced fidelity open {fo:.4} closed {fc:.4} hard {fh:.4}, enhancement open {eo:.3} closed {ec:.3} hard {eh:.3}, optimization {secs:.1} s (< 300 s)"
        ),
    )
}

fn dq_leakage() -> Outcome {
    let rows = dq_leakage_run(&system(), 2.0, &named_pulses(), 0.0).unwrap();
    let get = |n: &str| rows.iter().find(|r| r.pulse == n).unwrap();
    let lowered = rows.iter().all(|r| r.with_leakage < r.baseline);
    let (h, c, o) = (get("hard"), get("optimized-closed"), get("optimized-open"));
    let ordered = o.with_leakage > c.with_leakage && c.with_leakage > h.with_leakage;
    outcome(
        lowered && ordered,
        format!(
            "baseline -> leakage: open {:.3} -> {:.3}, closed {:.3} -> {:.3}, hard {:.3} -> {:.3}",
            o.baseline, o.with_leakage, c.baseline, c.with_leakage, h.baseline, h.with_leakage
        ),
    )
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    let text = MALONIC_ACID
        .replace("restarts = 8", "restarts = 4")
        .replace("max_iterations = 1500", "max_iterations = 200");
    std::fs::write(&cfg, text).unwrap();
    let commands = ["channel-check", "optimize", "buildup", "angle-map", "sweep", "dq-leakage"];
    let mut differing = Vec::new();
    let mut files = 0;
    for command in commands {
        let runs: Vec<_> = ["1", "4", "4"]
            .iter()
            .enumerate()
            .map(|(i, threads)| {
                let out = tmp.path().join(format!("{command}-{i}"));
                let status = Command::new(env!("CARGO_BIN_EXE_dnp"))
                    .args([command, "--config", cfg.to_str().unwrap(), "--seed", "5", "--threads", threads])
                    .arg("--out")
                    .arg(&out)
                    .output()
                    .unwrap()
                    .status;
                assert!(status.success(), "{command} exited with {status}");
                csv_bytes(&out)
            })
            .collect();
        files += runs[0].len();
        if runs[0] != runs[1] || runs[1] != runs[2] || runs[0].is_empty() {
            differing.push(command);
        }
    }
    outcome(
        differing.is_empty(),
        format!(
            "{} commands, {files} CSV files, threads 1/4/4 byte-identical{}",
            commands.len(),
            if differing.is_empty() {
                String::new()
            } else {
                format!(", differing: {}", differing.join(" "))
            }
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("channel algebra", channel_algebra),
        ("relaxation channels", relaxation_contract),
        ("analytic reduced maps", reduced_map_scaling),
        ("opposite-sign polarization", opposite_polarization),
        ("angle map", angle_map),
        ("hard-pulse Rabi sweep", rabi_sweep),
        ("optimizer ordering", optimizer_ordering),
        ("double-quantum leakage", dq_leakage),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} {name}: {}",
            i + 1,
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
