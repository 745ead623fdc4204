use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_fluctavg");

const GG: &str = "sum a; ext mu; Q: -; w: 1/N; g(mu,a) g(a,mu)";
const Z_EXAMPLE: &str = "sum a b; ext mu nu; Q: b; w: s(mu,a) s(rho,b); g(mu,a) g(a,b) g*(b,nu) g*(a,b) g(nu,a)";

const SMALL: &str = r#"
seed = 3
specs = ["sum a; ext mu; Q: -; w: 1/N; g(mu,a) g(a,mu)"]

[identities]
sizes = [20, 30]
configs = 10

[verifier]
ladder = [{ side = 32, width = 8 }, { side = 48, width = 12 }, { side = 64, width = 16 }]
energies = [0.0]
etas = [0.2]
samples = 64
"#;

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("FLUCTAVG_CONFIG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

fn header(path: &Path) -> serde_json::Value {
    let text = fs::read_to_string(path).unwrap();
    serde_json::from_str(text.lines().next().unwrap()).unwrap()
}

#[test]
fn predict_prints_the_bound() {
    let o = run(&["predict", Z_EXAMPLE]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("q_average: Ψ^6 Φ^2"), "{text}");
    assert!(text.contains("vertex b: ν=1 ν*=2 Q charged"));
    let o = run(&["predict", "sum a; ext mu; Q: a; w: 1/N; g(mu,a) g*(a,mu)"]);
    assert!(stdout(&o).contains("q_average: Ψ^3 Φ\n"));
}

#[test]
fn parse_errors_carry_positions() {
    let o = run(&["predict", "sum a; ext mu; Q: -; w: 1/N; g(mu,x)"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("spec 0: parse error at byte 34: unknown index x"), "{}", stderr(&o));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 1\nsede = 2\n");
    let o = run(&["--config", cfg.to_str().unwrap(), "predict", GG]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown field"), "{}", stderr(&o));
    let cfg = write_config(dir.path(), "[verifier]\nsamples = 64\nladder = [{ side = 32, width = 8, height = 1 }]\n");
    assert_eq!(run(&["--config", cfg.to_str().unwrap(), "predict", GG]).status.code(), Some(2));
}

#[test]
fn spec_files_resolve_against_the_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("z.spec"), format!("{Z_EXAMPLE}\n")).unwrap();
    let cfg = write_config(dir.path(), "specs = [{ file = \"z.spec\" }]\n");
    let out = dir.path().join("out");
    let o = run(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "predict"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("Ψ^6 Φ^2"));
    let h = header(&out.join("predict.jsonl"));
    assert_eq!(h["kind"], "header");
    assert_eq!(h["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(h["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn config_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("specs = [\"{GG}\"]\n"));
    let o = Command::new(BIN)
        .args(["predict"])
        .env("FLUCTAVG_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("spec 0: sum a; ext mu"));
}

#[test]
fn identity_check_and_its_negative_control() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = run(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "check-identities"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(out.join("check-identities.jsonl").exists());

    let corrupt = SMALL.replace("configs = 10\n", "configs = 10\ncorrupt_hermiticity = true\n");
    let cfg = write_config(dir.path(), &corrupt);
    let o = run(&["--config", cfg.to_str().unwrap(), "check-identities"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
}

#[test]
fn expand_reports_and_records() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "--out",
        dir.path().to_str().unwrap(),
        "expand",
        "sum a; ext mu; Q: a; w: 1/N; g(mu,a) g*(a,mu)",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("target Ψ^6 Φ^2 stop_k=6"), "{text}");
    assert!(text.contains("violations 0"));
    assert!(text.ends_with("verdict: PASS\n"));
    let records = fs::read_to_string(dir.path().join("expand.jsonl")).unwrap();
    let second: serde_json::Value = serde_json::from_str(records.lines().nth(1).unwrap()).unwrap();
    assert_eq!(second["kind"], "expansion");
    assert_eq!(second["violation_count"], 0);
    assert!(run(&["expand", "--p", "3", GG]).status.code() == Some(2));
}

#[test]
fn verify_report_round_trip_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o1 = run(&["--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "verify"]);
    let o2 = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
        "--workers",
        "1",
        "verify",
    ]);
    let code = o1.status.code().unwrap();
    assert!(code == 0 || code == 1, "{}", stderr(&o1));
    assert_eq!(o2.status.code(), Some(code));
    for f in ["results.jsonl", "summary.txt", "columns.tsv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let h = header(&a.join("results.jsonl"));
    assert!(h["config_hash"].is_string() && h["version"].is_string());

    let r = run(&["--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "report"]);
    assert_eq!(r.status.code(), Some(code));
    assert_eq!(stdout(&r), stdout(&o1));

    let summary = fs::read_to_string(a.join("summary.txt")).unwrap();
    let verdict = summary.lines().last().unwrap().to_string();
    let relaxed = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        a.to_str().unwrap(),
        "--allow-inconclusive",
        "report",
    ]);
    let expected = if verdict.contains("FAIL") { 1 } else { 0 };
    assert_eq!(relaxed.status.code(), Some(expected), "{verdict}");
}

#[test]
fn report_without_results_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["--out", dir.path().to_str().unwrap(), "report"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(&["verify"]).status.code(), Some(2));
}
