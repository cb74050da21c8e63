use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::thread;
use std::time::Duration;

use sha2::{Digest, Sha256};

const SMALL: &str = r#"
seed = 5
[femgen]
samples = 150
[embedding]
projection = 8
[quantum]
layers = 2
[nn.train]
max_epochs = 4
[clustering]
sweep_epochs = 2
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qsurrogate"))
}

struct Run {
    dir: tempfile::TempDir,
}

impl Run {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("small.toml"), SMALL).unwrap();
        Self { dir }
    }

    fn path(&self, p: &str) -> PathBuf {
        self.dir.path().join(p)
    }

    fn cmd(&self, args: &[&str]) -> Output {
        bin()
            .arg("--config")
            .arg(self.path("small.toml"))
            .arg("--out-dir")
            .arg(self.dir.path())
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.cmd(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }
}

fn sha(path: &Path) -> String {
    Sha256::digest(fs::read(path).unwrap())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

/// Sensor columns of the dataset rows named in a predictions file, with a header.
fn sensor_input(run: &Run, predictions: &str) -> String {
    let rows = data_rows(&run.path("dataset.csv"));
    let mut text = String::from("S1_rx,S1_ry,S1_rz,S2_rx,S2_ry,S3_rx,S3_ry\n");
    for line in fs::read_to_string(run.path(predictions)).unwrap().lines() {
        let idx: usize = line.split(',').next().unwrap().parse().unwrap();
        text.push_str(&rows[idx][..7].join(","));
        text.push('\n');
    }
    text
}

fn prediction_values(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split_once(',').unwrap().1.to_string())
        .collect()
}

#[test]
fn gen_data_row_count_and_repeatability() {
    let run = Run::new();
    let out = run.ok(&["gen-data", "--samples", "100"]);
    assert!(out.contains("rank 7"));
    assert_eq!(data_rows(&run.path("dataset.csv")).len(), 100);
    assert!(run.path("effective_config.toml").exists());
    let first = sha(&run.path("dataset.csv"));
    run.ok(&["gen-data", "--samples", "100"]);
    assert_eq!(first, sha(&run.path("dataset.csv")));
    let other = run.cmd(&["--seed", "6", "gen-data", "--samples", "100"]);
    assert!(other.status.success());
    assert_ne!(first, sha(&run.path("dataset.csv")));
}

#[test]
fn exit_codes() {
    let run = Run::new();
    assert_eq!(run.cmd(&["train", "NoSuchModel"]).status.code(), Some(2));
    assert_eq!(run.cmd(&["train", "BaselineMLP"]).status.code(), Some(3));
    fs::write(run.path("bad.toml"), "[nn]\nhiden = [3]\n").unwrap();
    let out = bin()
        .arg("--config")
        .arg(run.path("bad.toml"))
        .args(["complexity"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(run.cmd(&["complexity", "--h3", "0"]).status.code(), Some(2));
}

#[test]
fn train_evaluate_and_infer_agree() {
    let run = Run::new();
    run.ok(&["gen-data"]);
    let trained = run.ok(&["train", "PolySPD_HC_Clustered"]);
    let ck = run.path("checkpoints/PolySPD_HC_Clustered.json");
    for f in ["history.csv", "metrics.json", "predictions.csv"] {
        assert!(run
            .path(&format!("reports/PolySPD_HC_Clustered_{f}"))
            .exists());
    }
    let evaluated = run.ok(&["evaluate", "--checkpoint", ck.to_str().unwrap()]);
    let metric_lines = |s: &str| {
        s.lines()
            .filter(|l| l.starts_with("test "))
            .map(String::from)
            .collect::<Vec<_>>()
    };
    assert_eq!(metric_lines(&trained).len(), 2);
    assert_eq!(metric_lines(&trained), metric_lines(&evaluated));

    let mut input = sensor_input(&run, "reports/PolySPD_HC_Clustered_predictions.csv");
    input.push_str("1,2,3,4,5,6\n");
    fs::write(run.path("stream.csv"), &input).unwrap();
    let out = bin()
        .args(["infer", "--checkpoint", ck.to_str().unwrap(), "--input"])
        .arg(run.path("stream.csv"))
        .arg("--dump-state")
        .arg(run.path("states"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("skipped: expected 7 fields, found 6"));
    assert!(stderr.contains("skipped 1 malformed"));
    let got = prediction_values(&String::from_utf8(out.stdout).unwrap());
    let want = prediction_values(
        &fs::read_to_string(run.path("reports/PolySPD_HC_Clustered_predictions.csv")).unwrap(),
    );
    assert_eq!(got.len(), 30);
    assert_eq!(got, want);
    let state = fs::read_to_string(run.path("states/state_0.csv")).unwrap();
    assert_eq!(state.lines().count(), 1 + 64);
}

#[test]
fn dump_state_needs_a_quantum_model() {
    let run = Run::new();
    run.ok(&["gen-data", "--samples", "60"]);
    run.ok(&["train", "BaselineMLP", "--epochs", "1"]);
    let out = bin()
        .args(["infer", "--checkpoint"])
        .arg(run.path("checkpoints/BaselineMLP.json"))
        .arg("--input")
        .arg(run.path("dataset.csv"))
        .arg("--dump-state")
        .arg(run.path("states"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn follow_mode_keeps_arrival_order() {
    let run = Run::new();
    run.ok(&["gen-data", "--samples", "80"]);
    run.ok(&["train", "BaselineMLP", "--epochs", "2"]);
    let rows: Vec<String> = data_rows(&run.path("dataset.csv"))
        .iter()
        .take(12)
        .map(|r| r[..7].join(","))
        .collect();
    let live = run.path("live.csv");
    fs::write(&live, "").unwrap();
    let child = bin()
        .args(["infer", "--follow", "--idle-timeout", "1.5", "--checkpoint"])
        .arg(run.path("checkpoints/BaselineMLP.json"))
        .arg("--input")
        .arg(&live)
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    for chunk in rows.chunks(4) {
        thread::sleep(Duration::from_millis(150));
        let mut f = fs::OpenOptions::new().append(true).open(&live).unwrap();
        for r in chunk {
            writeln!(f, "{r}").unwrap();
        }
    }
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let followed = String::from_utf8(out.stdout).unwrap();

    fs::write(run.path("batch.csv"), rows.join("\n") + "\n").unwrap();
    let once = bin()
        .args(["infer", "--checkpoint"])
        .arg(run.path("checkpoints/BaselineMLP.json"))
        .arg("--input")
        .arg(run.path("batch.csv"))
        .output()
        .unwrap();
    let indices: Vec<usize> = followed
        .lines()
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(indices, (0..12).collect::<Vec<_>>());
    assert_eq!(followed, String::from_utf8(once.stdout).unwrap());
}

#[test]
fn compare_single_variant_and_repeatability() {
    let a = Run::new();
    let b = Run::new();
    for run in [&a, &b] {
        run.ok(&["gen-data", "--samples", "100"]);
        let text = run.ok(&["compare", "--variants", "ClusteredMLP"]);
        assert!(text.contains("NRMSE(range)"));
    }
    let csv = fs::read_to_string(a.path("reports/comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert_eq!(
        csv.lines().next().unwrap(),
        "model,params,mse,rmse,r2,nrmse_range,nrmse_std,raw_mse_m2,raw_rmse_m,raw_r2,note"
    );
    assert_eq!(
        sha(&a.path("reports/comparison.csv")),
        sha(&b.path("reports/comparison.csv"))
    );
}

#[test]
fn cluster_analyze_writes_one_row_per_k() {
    let run = Run::new();
    run.ok(&["gen-data", "--samples", "120"]);
    let out = run.ok(&["cluster-analyze"]);
    assert!(out.contains("lowest Davies"));
    let table = fs::read_to_string(run.path("reports/k_sweep.csv")).unwrap();
    assert_eq!(
        table.lines().next().unwrap(),
        "k,wcss,silhouette,davies_bouldin,nrmse,r2,note"
    );
    assert_eq!(table.lines().count(), 1 + 9);
}

#[test]
fn complexity_defaults() {
    let out = bin().arg("complexity").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("= 35040 ≈ 3.5e4"), "{text}");
    assert!(text.contains("= 87780 ≈ 8.8e4"), "{text}");
    assert!(text.contains("≈ 2.5\n"), "{text}");
}
