use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_phonalign");

fn phonalign(args: &[&str], extra: &[&Path]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env("RUST_LOG", "warn");
    for p in extra {
        cmd.arg(p);
    }
    cmd.output().expect("spawn phonalign")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn synth_small(dir: &Path, noise: &str) {
    let out = Command::new(BIN)
        .args(["synth", "--n-utts", "12", "--n-dev", "3", "--vocab-size", "5", "--feature-dim", "4"])
        .args(["--noise-std", noise, "--out"])
        .arg(dir)
        .output()
        .unwrap();
    ok(&out);
}

fn quick_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("quick.conf");
    let text = format!(
        "omega = 0.1\nembed_dim = 4\nhidden_channels = 6\nlayers = 1\nlr = 0.002\n\
         batch_size = 2\nmax_steps = 6\neval_interval = 3\nanneal_interval = 2\n{extra}"
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn references_score_as_perfect_predictions() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path(), "0.1");
    let stdout = ok(&phonalign(
        &["eval", "--pred"],
        &[&dir.path().join("refs"), Path::new("--manifest"), &dir.path().join("dev.tsv")],
    ));
    assert!(stdout.contains("| MAE (ms) | Median (ms) | 20 ms tol (%) | 50 ms tol (%) |"));
    assert!(stdout.contains("mae_ms=0.00 median_ms=0.00 tol20=0.00 tol50=0.00"), "{stdout}");
}

#[test]
fn train_then_align_writes_label_ordered_boundaries() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path(), "0.1");
    let conf = quick_config(dir.path(), "");
    let run = dir.path().join("run");
    let stdout = ok(&phonalign(
        &["train", "--config"],
        &[
            &conf,
            Path::new("--manifest"),
            &dir.path().join("train.tsv"),
            Path::new("--dev"),
            &dir.path().join("dev.tsv"),
            Path::new("--out"),
            &run,
        ],
    ));
    assert!(stdout.contains("dev step 6:"), "{stdout}");
    let log = std::fs::read_to_string(run.join("metrics.tsv")).unwrap();
    assert_eq!(log.lines().count(), 7);
    let ckpt = run.join("step_00000006.ckpt");
    assert!(ckpt.exists());

    let pred = dir.path().join("pred");
    let stdout = ok(&phonalign(
        &["align", "--checkpoint"],
        &[&ckpt, Path::new("--manifest"), &dir.path().join("dev.tsv"), Path::new("--out"), &pred],
    ));
    assert!(stdout.contains("aligned 3 utterances, skipped 0"), "{stdout}");
    for i in 0..3 {
        let id = format!("dev_{i:04}");
        let labels = std::fs::read_to_string(dir.path().join(format!("labels/{id}.lab"))).unwrap();
        let tsv = std::fs::read_to_string(pred.join(format!("{id}.tsv"))).unwrap();
        let reference = std::fs::read_to_string(dir.path().join(format!("refs/{id}.tsv"))).unwrap();
        let phones: Vec<&str> = tsv.lines().skip(1).map(|l| l.split('\t').next().unwrap()).collect();
        assert_eq!(phones, labels.split_whitespace().collect::<Vec<_>>());
        let last_end = |s: &str| s.lines().last().unwrap().split('\t').nth(2).unwrap().to_string();
        assert_eq!(last_end(&tsv), last_end(&reference));
        assert_eq!(tsv.lines().nth(1).unwrap().split('\t').nth(1), Some("0"));
    }
    let stdout = ok(&phonalign(&["eval", "--pred"], &[&pred, Path::new("--manifest"), &dir.path().join("dev.tsv")]));
    assert!(stdout.contains("mae_ms="));
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path(), "0.1");
    let conf = quick_config(dir.path(), "warmup = 3\n");
    let out = phonalign(
        &["train", "--config"],
        &[&conf, Path::new("--manifest"), &dir.path().join("train.tsv"), Path::new("--out"), &dir.path().join("run")],
    );
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 10") && stderr.contains("warmup"), "{stderr}");
    assert!(!dir.path().join("run").exists());
}

#[test]
fn missing_inputs_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.tsv");
    let out = phonalign(&["eval", "--pred"], &[dir.path(), Path::new("--manifest"), &missing]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.tsv"));

    synth_small(dir.path(), "0.1");
    std::fs::remove_file(dir.path().join("features/dev_0001.faf")).unwrap();
    let out = phonalign(&["eval", "--pred"], &[&dir.path().join("refs"), Path::new("--manifest"), &dir.path().join("dev.tsv")]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("dev_0001.faf"));
}

#[test]
fn check_passes() {
    let stdout = ok(&phonalign(&["check", "--seed", "3"], &[]));
    assert!(stdout.contains("all checks passed"), "{stdout}");
}
