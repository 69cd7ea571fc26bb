use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_humanbell"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn analyze_fixtures() {
    let o = run(&["analyze", fixture("timebin_bellster.csv").to_str().unwrap(), "--inequality", "k"]);
    assert_eq!(o.status.code(), Some(0));
    let t = stdout(&o);
    assert!(t.contains("(1.70 ± 0.18)e-4"), "{t}");
    assert!(t.contains("9.4σ"), "{t}");

    let o = run(&[
        "analyze",
        fixture("correlators_hrn.csv").to_str().unwrap(),
        "--inequality",
        "chsh",
        "--signs",
        "+,-,-,-",
        "--format",
        "json-lines",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let line = stdout(&o);
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    let s = v["result"]["value"].as_f64().unwrap();
    assert!((s - 2.6387).abs() < 1e-3, "{line}");

    // A correlator table is the wrong shape for K.
    let o = run(&["analyze", fixture("correlators_hrn.csv").to_str().unwrap(), "--inequality", "k"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["analyze", "--inequality", "nope", "x.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

const SMALL: &str = r#"
seed = 3
duration = 12
log = "LOG"

[hub]
archive_len = 20000

[users]
users = 10
bits_per_second = 10.0
robots = 1

[[lab]]
id = "chsh"
kind = "chsh"
rate = 150
visibility = 0.95

[[lab]]
id = "bellster"
kind = "timebin"
rate = 400
burst = true
eta = 0.9
"#;

fn small_config(dir: &Path) -> (PathBuf, PathBuf) {
    let log = dir.join("hub.log");
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, SMALL.replace("LOG", log.to_str().unwrap())).unwrap();
    (cfg, log)
}

fn table_rows(text: &str) -> Vec<String> {
    text.lines().filter(|l| !l.starts_with('#')).map(str::to_string).collect()
}

#[test]
fn virtual_serve_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, log) = small_config(dir.path());
    let c = cfg.to_str().unwrap();
    let first = run(&["serve", "--virtual", "--config", c]);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let first_log = std::fs::read(&log).unwrap();
    let second = run(&["serve", "--virtual", "--config", c]);
    assert_eq!(std::fs::read(&log).unwrap(), first_log);
    assert_eq!(stdout(&first), stdout(&second));

    let rep = run(&["replay", log.to_str().unwrap(), "--config", c]);
    assert_eq!(rep.status.code(), Some(0), "{}", String::from_utf8_lossy(&rep.stderr));
    let r = stdout(&rep);
    assert!(r.contains("streams identical for 2 labs"), "{r}");
    // Re-running the labs over the rebuilt streams gives the same table.
    assert_eq!(table_rows(&r), table_rows(&stdout(&first)));

    // A different seed gives a different log.
    let other = run(&["serve", "--virtual", "--config", c, "--seed", "4"]);
    assert_eq!(other.status.code(), Some(0));
    assert_ne!(std::fs::read(&log).unwrap(), first_log);
}

#[test]
fn damaged_logs_exit_with_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, log) = small_config(dir.path());
    let o = run(&["serve", "--virtual", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&log).unwrap();

    let cut = dir.path().join("cut.log");
    std::fs::write(&cut, &text[..text.len() - 5]).unwrap();
    let o = run(&["replay", cut.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("truncated at byte"));

    let bad = dir.path().join("bad.log");
    let mut lines: Vec<&str> = text.lines().collect();
    lines[3] = "{\"type\":\"bit\"";
    std::fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let o = run(&["replay", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));

    let empty = dir.path().join("empty.log");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(run(&["replay", empty.to_str().unwrap()]).status.code(), Some(0));
}

fn predict_with(input: &str) -> Output {
    let mut child = bin()
        .arg("predict")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

#[test]
fn predictor_cannot_beat_a_fair_coin() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let bits: String = (0..10_000).map(|_| if rng.random::<bool>() { '1' } else { '0' }).collect();
    let o = predict_with(&bits);
    assert_eq!(o.status.code(), Some(0));
    let t = stdout(&o);
    let acc: f64 = t.lines().last().unwrap().rsplit(' ').next().unwrap().parse().unwrap();
    assert!((acc - 0.5).abs() < 0.015, "{acc}");
    assert_eq!(t.lines().filter(|l| l.contains("accuracy")).count(), 501);

    let o = predict_with("0101x");
    assert_eq!(o.status.code(), Some(2));
}
