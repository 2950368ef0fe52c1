use std::path::Path;
use std::process::{Command, Output};

fn laserfault(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_laserfault"));
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.arg("--out").arg(out).args(args).output().unwrap()
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("small.toml");
    std::fs::write(
        &path,
        "seed = 3\n[generation]\nsamples_per_mode = 20\n[training]\nmax_epochs = 1\n[forest]\nn_trees = 5\n",
    )
    .unwrap();
    path
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn help_and_version_succeed() {
    let dir = tempfile::tempdir().unwrap();
    for flag in ["--help", "--version"] {
        assert_eq!(laserfault(&[flag], None, dir.path()).status.code(), Some(0));
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(laserfault(&["frobnicate"], None, dir.path()).status.code(), Some(1));
    assert_eq!(
        laserfault(&["train", "--model", "svm"], None, dir.path()).status.code(),
        Some(1)
    );
    assert_eq!(laserfault(&["train"], None, dir.path()).status.code(), Some(1));
    assert_eq!(laserfault(&[], None, dir.path()).status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    // nothing generated yet
    let o = laserfault(&["preprocess"], None, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[knn]\nk = 0\n").unwrap();
    assert_eq!(laserfault(&["generate"], Some(&bad), &out).status.code(), Some(2));
    // invalid configs are rejected before anything is written
    assert!(!out.exists());
    assert_eq!(
        laserfault(&["generate"], Some(&dir.path().join("missing.toml")), &out)
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        laserfault(&["generate", "--samples-per-mode", "0"], None, &out)
            .status
            .code(),
        Some(2)
    );
    assert!(!out.exists());
}

#[test]
fn step_by_step_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let out = dir.path().join("run");

    let o = laserfault(&["generate"], Some(&config), &out);
    assert!(o.status.success());
    assert!(stdout(&o).contains("sudden   20"));
    assert!(out.join("data/dataset.csv").exists());

    let o = laserfault(&["preprocess"], Some(&config), &out);
    assert!(o.status.success());
    assert!(stdout(&o).contains("train 48  val 16  test 16"), "{}", stdout(&o));

    let o = laserfault(&["evaluate"], Some(&config), &out);
    assert_eq!(o.status.code(), Some(2), "no checkpoints and no threshold flag");

    for model in ["lstm", "knn"] {
        assert!(laserfault(&["train", "--model", model], Some(&config), &out)
            .status
            .success());
    }
    assert!(out.join("models/lstm_history.csv").exists());

    let o = laserfault(&["evaluate", "--threshold-baseline"], Some(&config), &out);
    assert!(o.status.success());
    let table = stdout(&o);
    for name in ["lstm", "knn", "threshold"] {
        assert!(table.contains(name), "{table}");
        assert!(out.join(format!("reports/{name}_confusion.csv")).exists());
    }
    assert!(!table.contains("logreg"));
    let csv = std::fs::read_to_string(out.join("reports/comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn seed_flag_changes_data() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let read = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        assert!(laserfault(&["--seed", seed, "generate"], Some(&config), &out)
            .status
            .success());
        std::fs::read(out.join("data/dataset.csv")).unwrap()
    };
    assert_eq!(read("11", "a"), read("11", "b"));
    assert_ne!(read("11", "a"), read("12", "c"));
}
