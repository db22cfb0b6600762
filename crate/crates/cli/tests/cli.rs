//! End-to-end tests of the `viscopt` binary: config validation (all errors
//! collected, strict schema), exit codes, output formats and reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_viscopt")
}

fn repo_configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_with_config(text: &str, extra: &[&str]) -> Output {
    let dir = std::env::temp_dir().join(format!(
        "viscopt-test-{}-{}",
        std::process::id(),
        text.len() ^ text.as_bytes().iter().map(|&b| b as usize).sum::<usize>()
    ));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("run.cfg");
    std::fs::write(&path, text).unwrap();
    Command::new(bin())
        .arg("--config")
        .arg(&path)
        .args(extra)
        .output()
        .unwrap()
}

const TOY: &str = r#"
[system]
type = custom
mass_file = MASS
stiffness_file = STIFF

[internal]
model = critical_proportional
alpha = 0.03

[dampers]
damper = grounded 3
viscosities = 25

[criterion]
s = 2

[run]
command = trace
seed = 7
"#;

fn toy_config(command: &str) -> String {
    let configs = repo_configs();
    TOY.replace("MASS", configs.join("toy5_mass.txt").to_str().unwrap())
        .replace("STIFF", configs.join("toy5_stiffness.txt").to_str().unwrap())
        .replace("command = trace", &format!("command = {command}"))
}

#[test]
fn missing_config_flag_exits_one() {
    let out = Command::new(bin()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_keys_are_rejected_with_all_errors() {
    let cfg = "
[system]
type = homogeneous
typo_key = 1

[criterion]
s = 0

[internal]
alpha = 0.02

[run]
command = optimize
";
    let out = run_with_config(cfg, &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    // every problem is reported, not just the first
    assert!(err.contains("unknown key 'system.typo_key'"), "stderr: {err}");
    assert!(err.contains("criterion.s"), "stderr: {err}");
    assert!(err.contains("at least one damper"), "stderr: {err}");
}

#[test]
fn s_larger_than_n_names_the_bound() {
    let cfg = toy_config("trace").replace("s = 2", "s = 9");
    let out = run_with_config(&cfg, &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("1 <= s <= n = 5"), "stderr: {err}");
}

#[test]
fn trace_on_desk_scale_system_embeds_oracle() {
    let out = run_with_config(&toy_config("trace"), &["--format", "records"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let objective: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("objective="))
        .unwrap()
        .parse()
        .unwrap();
    let oracle: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("oracle="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((objective - oracle).abs() <= 1e-8 * oracle.abs());
}

#[test]
fn records_reproducible_modulo_timings() {
    let strip = |s: &str| -> String {
        s.lines()
            .filter(|l| !l.starts_with("time_ms."))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let a = run_with_config(&toy_config("optimize"), &["--format", "records"]);
    let b = run_with_config(&toy_config("optimize"), &["--format", "records"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(
        strip(&String::from_utf8_lossy(&a.stdout)),
        strip(&String::from_utf8_lossy(&b.stdout))
    );
}

#[test]
fn table_and_records_carry_identical_numbers() {
    let rec = run_with_config(&toy_config("optimize"), &["--format", "records"]);
    let tab = run_with_config(&toy_config("optimize"), &["--format", "table"]);
    let rec_text = String::from_utf8_lossy(&rec.stdout).to_string();
    let tab_text = String::from_utf8_lossy(&tab.stdout).to_string();
    let objective = rec_text
        .lines()
        .find_map(|l| l.strip_prefix("objective="))
        .unwrap()
        .to_string();
    let viscosities = rec_text
        .lines()
        .find_map(|l| l.strip_prefix("viscosities="))
        .unwrap()
        .to_string();
    assert!(tab_text.contains(&objective), "table lacks '{objective}':\n{tab_text}");
    assert!(tab_text.contains(&viscosities));
}

#[test]
fn out_flag_writes_report() {
    let dir = std::env::temp_dir().join(format!("viscopt-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.txt");
    let out = run_with_config(&toy_config("trace"), &["--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let written = std::fs::read_to_string(&path).unwrap();
    assert_eq!(written, String::from_utf8_lossy(&out.stdout));
}

#[test]
fn shipped_large_config_parses_to_expected_problem() {
    // run it as trace instead of the expensive optimize: rewrite command
    let text = std::fs::read_to_string(repo_configs().join("large.cfg")).unwrap();
    let cfg = text.replace("command = optimize", "command = trace");
    let out = run_with_config(&cfg, &["--format", "records"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("n=1601"));
    assert!(text.contains("linearized=3202"));
    assert!(text.contains("s=27"));
    assert!(text.contains("damper.3=connecting 220 620"));
    let objective: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("objective="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(objective > 0.0 && objective.is_finite());
}

#[test]
fn homogeneous_config_parses() {
    let text = std::fs::read_to_string(repo_configs().join("homogeneous.cfg")).unwrap();
    let cfg = text.replace("command = optimize", "command = trace");
    let out = run_with_config(&cfg, &["--format", "records"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("n=2001"));
    assert!(text.contains("s=20"));
}

#[test]
fn numerical_failure_exits_two() {
    // a completely undamped configuration leaves eigenvalues on the
    // imaginary axis; the pipeline must surface that as exit code 2
    let cfg = toy_config("trace")
        .replace("alpha = 0.03", "alpha = 0")
        .replace("viscosities = 25", "viscosities = 0");
    let out = run_with_config(&cfg, &[]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sweep_command_ranks_candidates() {
    let cfg = toy_config("sweep").replace(
        "[run]",
        "[sweep]\ncandidate = grounded 1\ncandidate = grounded 3\ncandidate = grounded 1\n\n[run]",
    );
    let out = run_with_config(&cfg, &["--format", "records"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("sweep.")).collect();
    assert_eq!(rows.len(), 3);
    // objectives come back sorted ascending
    let objs: Vec<f64> = rows
        .iter()
        .map(|r| {
            r.split("objective=")
                .nth(1)
                .unwrap()
                .split_whitespace()
                .next()
                .unwrap()
                .parse()
                .unwrap()
        })
        .collect();
    assert!(objs[0] <= objs[1] && objs[1] <= objs[2]);
}

#[test]
fn check_command_reports_oracle_agreement() {
    let cfg = toy_config("check");
    let out = run_with_config(&cfg, &["--format", "records"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let max_rel: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("check.max_rel_err="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(max_rel <= 1e-8);
}
