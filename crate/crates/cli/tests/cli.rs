use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rics(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rics"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn rics")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = "[onn]\nepochs = 2\ntrain_per_class = 10\ntest_per_class = 10\n";

#[test]
fn usage_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["bogus"][..],
        &[][..],
        &["secrecy", "--elements", "twenty"][..],
        &["secrecy", "--seed", "-3"][..],
    ] {
        let o = rics(dir.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn config_errors_exit_with_1_and_say_why() {
    let dir = tempfile::tempdir().unwrap();
    let o = rics(dir.path(), &["--config", "missing.toml", "secrecy"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("not found"));

    fs::write(dir.path().join("bad.toml"), "[surface]\nalpha = [1.5]\n").unwrap();
    let o = rics(dir.path(), &["--config", "bad.toml", "secrecy"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("surface.alpha"), "{}", stderr(&o));

    fs::write(dir.path().join("typo.toml"), "[secrecy]\nalhpa_step = 0.1\n").unwrap();
    let o = rics(dir.path(), &["--config", "typo.toml", "secrecy"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown key `secrecy.alhpa_step`"), "{}", stderr(&o));

    let o = rics(dir.path(), &["secrecy", "--alpha", "0.5,1.2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn secrecy_row_count_contract() {
    let dir = tempfile::tempdir().unwrap();
    let o = rics(dir.path(), &["--config", "default", "--out", "out", "secrecy"]);
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("out/secrecy.csv")).unwrap();
    assert_eq!(csv, String::from_utf8(o.stdout).unwrap());
    assert_eq!(csv.lines().count(), 1 + 3 * 5 + 5);
    assert_eq!(csv.lines().filter(|l| l.starts_with("baseline,")).count(), 5);
}

#[test]
fn model_mode_needs_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let o = rics(dir.path(), &["--out", "out", "throughput", "--trials", "10"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("checkpoint"), "{}", stderr(&o));
}

#[test]
fn eval_accuracy_equals_confusion_trace_mean() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let base = ["--config", "small.toml", "--out", "out"];
    assert!(rics(dir.path(), &[&base[..], &["train", "--layers", "2"]].concat()).status.success());
    let o = rics(dir.path(), &[&base[..], &["eval", "--layers", "2"]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let accuracy: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("accuracy "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((0.0..=1.0).contains(&accuracy));
    let confusion = fs::read_to_string(dir.path().join("out/eval_2layer.confusion.csv")).unwrap();
    let diagonal: Vec<f64> = confusion
        .lines()
        .skip(1)
        .enumerate()
        .map(|(k, line)| line.split(',').nth(k + 1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(diagonal.len(), 8);
    let trace_mean = diagonal.iter().sum::<f64>() / 8.0;
    assert!((accuracy - trace_mean).abs() <= 1e-12, "{accuracy} vs {trace_mean}");
}

#[test]
fn operators_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let base = ["--config", "small.toml", "--out", "out"];
    assert!(rics(dir.path(), &[&base[..], &["synth"]].concat()).status.success());
    let o = rics(dir.path(), &[&base[..], &["operators", "--input", "out/test/000002.iq", "--op", "frequency_shift"]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("out/frequency_shift.iq").exists());
    let o = rics(dir.path(), &[&base[..], &["operators", "--input", "out/test/000002.iq", "--op", "hilbert"]].concat());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unsupported operator"));
}
