use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dnp_cli::config::MALONIC_ACID;

fn dnp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

/// Bundled profile trimmed to something quick to evaluate.
fn small_config() -> String {
    MALONIC_ACID
        .replace("restarts = 8", "restarts = 3")
        .replace("max_iterations = 1500", "max_iterations = 60")
        .replace("grid = 32", "grid = 6")
        .replace("panels = [\"a\", \"b\", \"c\", \"d\", \"e\"]", "panels = [\"a\", \"e\"]")
        .replace("total_time = 1.0", "total_time = 0.2")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn channel_check_passes_on_default_profile() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cc");
    let o = dnp(&["channel-check", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read(&out, "summary.txt").contains("all channels CPTP within 1e-9"));
    let csv = read(&out, "channels.csv");
    assert!(csv.lines().filter(|l| !l.starts_with('#')).skip(1).all(|l| l.ends_with(",yes")));
    let dump = read(&out, "supermatrix-t1e.txt");
    assert_eq!(dump.lines().filter(|l| !l.starts_with('#')).count(), 16);
}

#[test]
fn config_errors_exit_with_code_two_and_list_every_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let text = MALONIC_ACID
        .replace("t1e = 1e-3", "t1e = -1e-3")
        .replace("[system]", "[system]\nomega_x = 3.0");
    let cfg = write_config(tmp.path(), "bad.cfg", &text);
    let o = dnp(&["channel-check", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("relaxation.t1e"), "{err}");
    assert!(err.contains("system.omega_x: unknown key"), "{err}");
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn degenerate_dynamics_exit_with_code_three() {
    let tmp = tempfile::tempdir().unwrap();
    let text = small_config()
        .replace("t1e = 1e-3", "t1e = 1e300")
        .replace("tzq = 0.1", "tzq = 1e300");
    let cfg = write_config(tmp.path(), "frozen.cfg", &text);
    let o = dnp(&["dq-leakage", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unwritable_output_exits_with_code_four() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = dnp(&["channel-check", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn hard_pulse_buildup_is_monotone() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.cfg", &small_config());
    let out = tmp.path().join("b");
    let o = dnp(&["buildup", "--pulse", "hard", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&out, "buildup.csv");
    let values: Vec<f64> = csv
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(values.len() > 10);
    assert!((values[0] + 1.0).abs() < 1e-6);
    assert!(values.windows(2).all(|w| w[1] >= w[0]));
    assert!(read(&out, "summary.txt").contains("monotone increasing: yes"));
    assert_eq!(read(&out, "final-state.csv").lines().filter(|l| !l.starts_with('#')).count(), 17);
}

#[test]
fn runs_are_byte_identical_across_repeats_and_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.cfg", &small_config());
    let cfg = cfg.to_str().unwrap();
    for command in ["optimize", "angle-map", "sweep"] {
        let mut runs = Vec::new();
        for (i, threads) in ["1", "4", "4"].iter().enumerate() {
            let out = tmp.path().join(format!("{command}-{i}"));
            let o = dnp(&[command, "--config", cfg, "--seed", "7", "--threads", threads, "--out", out.to_str().unwrap()]);
            assert!(o.status.success(), "{command}: {}", String::from_utf8_lossy(&o.stderr));
            runs.push(csv_files(&out));
        }
        assert!(!runs[0].is_empty());
        assert_eq!(runs[0], runs[1], "{command}: thread count changed the output");
        assert_eq!(runs[1], runs[2], "{command}: repeat changed the output");
    }
}

#[test]
fn manifest_records_the_run_and_config_is_untouched() {
    let tmp = tempfile::tempdir().unwrap();
    let text = small_config();
    let cfg = write_config(tmp.path(), "run.cfg", &text);
    let out = tmp.path().join("m");
    let o = dnp(&["angle-map", "--config", cfg.to_str().unwrap(), "--seed", "42", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let manifest = read(&out, "manifest.txt");
    assert!(manifest.contains("command=angle-map"));
    assert!(manifest.contains("seed=42"));
    assert!(manifest.contains(&format!("version={}", env!("CARGO_PKG_VERSION"))));
    assert!(manifest.ends_with(&text));
    assert_eq!(std::fs::read_to_string(&cfg).unwrap(), text);
    let csv = read(&out, "angle-map-a.csv");
    assert!(csv.starts_with("# command=angle-map\n"));
    assert!(csv.contains("# seed=42\n"));
}

#[test]
fn optimized_pulse_file_feeds_back_into_buildup() {
    let tmp = tempfile::tempdir().unwrap();
    let text = small_config().replace("modes = [\"closed\", \"open\"]", "modes = [\"closed\"]");
    let cfg = write_config(tmp.path(), "run.cfg", &text);
    let out = tmp.path().join("opt");
    let o = dnp(&["optimize", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let pulse = out.join("pulse-closed.txt");
    let b = tmp.path().join("b");
    let o = dnp(&["buildup", "--pulse", pulse.to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read(&b, "buildup.csv").contains("# pulse=pulse-closed\n"));
}
