mod support;

use std::fs;

use kanvision_cli::records::{read_rows, ResultRow, BENCH_HEADER, RESULTS_HEADER, SWEEP_HEADER};
use support::{code, kanvision, Workspace};

fn stderr(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn result_rows(path: &std::path::Path) -> Vec<ResultRow> {
    read_rows(path, &RESULTS_HEADER)
        .unwrap()
        .iter()
        .map(|r| ResultRow::from_record(r).unwrap())
        .collect()
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&kanvision(&["--help"])), 0);
    assert_eq!(code(&kanvision(&["--version"])), 0);
}

#[test]
fn config_errors_exit_2() {
    assert_eq!(code(&kanvision(&["train", "--no-such-flag"])), 2);
    assert_eq!(code(&kanvision(&["frobnicate"])), 2);
    assert_eq!(code(&kanvision(&["train", "--epochs", "ten"])), 2);
    assert_eq!(code(&kanvision(&["train", "--dataset", "imagenet"])), 2);
    assert_eq!(code(&kanvision(&["reproduce", "table9"])), 2);
    assert_eq!(code(&kanvision(&["sweep", "--grids", "0,1"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "epochs = 1\nmomentum = 0.9\n").unwrap();
    let out = kanvision(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("momentum"), "{}", stderr(&out));
}

#[test]
fn missing_data_exits_3_with_fetch_hint() {
    let dir = tempfile::tempdir().unwrap();
    let out = kanvision(&[
        "train",
        "--cache-dir",
        dir.path().to_str().unwrap(),
        "--out-dir",
        dir.path().join("runs").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("kanvision fetch mnist"), "{}", stderr(&out));
}

#[test]
fn conv_kind_without_registry_entry_is_a_config_error() {
    let ws = Workspace::new(50, 20);
    let out = ws.run(&["train"], "runs", &["--model", "cnn", "--epochs", "0"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn train_writes_run_files_and_replays_bitwise_from_its_manifest() {
    let ws = Workspace::new(300, 100);
    let args = ["--model", "efficient_kan", "--widths", "784,8,10", "--epochs", "2", "--subset", "200", "--seed", "9"];
    let out = ws.run(&["train"], "a", &args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let run = "efficient_kan-784x8x10-mnist-g3k3-e2-s9";
    let run_dir = ws.path("a").join(run);
    for f in ["manifest.cfg", "model.ckpt", "epochs.csv"] {
        assert!(run_dir.join(f).is_file(), "{f} missing");
    }
    let rows_a = result_rows(&ws.path("a/results.csv"));
    assert_eq!(rows_a.len(), 1);
    assert_eq!(rows_a[0].train_size, 200);
    assert_eq!(rows_a[0].epoch_losses.len(), 2);
    let timings = fs::read_to_string(ws.path("a/timings.csv")).unwrap();
    assert!(timings.starts_with("run,wall_seconds"));

    // Replay from the manifest alone.
    let manifest = run_dir.join("manifest.cfg");
    let out = ws.run(&["train", "--config", manifest.to_str().unwrap()], "b", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows_b = result_rows(&ws.path("b/results.csv"));
    assert_eq!(rows_a, rows_b);
    let ck_a = fs::read(run_dir.join("model.ckpt")).unwrap();
    let ck_b = fs::read(ws.path("b").join(run).join("model.ckpt")).unwrap();
    assert!(ck_a == ck_b, "checkpoints differ");

    // Flags override the config file.
    let out = ws.run(&["train", "--config", manifest.to_str().unwrap()], "c", &["--epochs", "1"]);
    assert_eq!(code(&out), 0);
    assert_eq!(result_rows(&ws.path("c/results.csv"))[0].epochs, 1);

    // Evaluating the checkpoint reproduces the recorded accuracy.
    let out = ws.run(&["eval", "--checkpoint", run_dir.join("model.ckpt").to_str().unwrap()], "a", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let printed = String::from_utf8_lossy(&out.stdout);
    assert!(printed.contains(&format!("{:.4}", rows_a[0].test_accuracy)), "{printed}");
}

#[test]
fn untrained_model_scores_near_chance_on_mnist() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    if !root.join("mnist/test").is_dir() {
        eprintln!("skipping: mnist is not cached");
        return;
    }
    let out_dir = tempfile::tempdir().unwrap();
    for model in ["efficient_kan", "mlp"] {
        let out = kanvision(&[
            "train", "--model", model, "--widths", "784,16,10", "--epochs", "0", "--seed", "42",
            "--cache-dir", root.to_str().unwrap(), "--out-dir", out_dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    for row in result_rows(&out_dir.path().join("results.csv")) {
        assert!((row.test_accuracy - 0.10).abs() <= 0.05, "{}: {}", row.model, row.test_accuracy);
        assert!(row.final_train_loss.is_none());
    }
}

#[test]
fn interrupted_sweep_resumes_to_the_identical_csv() {
    let ws = Workspace::new(120, 60);
    let common = ["--widths", "784,4,10", "--epochs", "1", "--grids", "1,2", "--orders", "1,2,3", "--subset", "100"];

    let out = ws.run(&["sweep"], "whole", &common);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let whole = fs::read_to_string(ws.path("whole/sweep.csv")).unwrap();
    let rows = read_rows(&ws.path("whole/sweep.csv"), &SWEEP_HEADER).unwrap();
    assert_eq!(rows.len(), 6);

    // Stop after two cells, then after three more, then finish.
    for step in [Some("2"), Some("3"), None] {
        let mut args = common.to_vec();
        if let Some(n) = step {
            args.extend(["--max-cells", n]);
        }
        let out = ws.run(&["sweep"], "staged", &args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    assert_eq!(fs::read_to_string(ws.path("staged/sweep.csv")).unwrap(), whole);

    // Parameter counts grow along both axes.
    let params: Vec<usize> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    for g in 0..2 {
        assert!(params[g * 3] < params[g * 3 + 1] && params[g * 3 + 1] < params[g * 3 + 2]);
    }
    for k in 0..3 {
        assert!(params[k] < params[3 + k]);
    }

    // A different configuration refuses to reuse the directory.
    let mut args = common.to_vec();
    args[5] = "2";
    let out = ws.run(&["sweep"], "whole", &args);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn bench_schema_is_independent_of_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let mut headers = Vec::new();
    for repeats in ["1", "9"] {
        let out_csv = dir.path().join(format!("bench{repeats}.csv"));
        let out = kanvision(&[
            "bench", "--widths", "32,8", "--batch", "4", "--repeats", repeats, "--out", out_csv.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let rows = read_rows(&out_csv, &BENCH_HEADER).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(&rows[0][0], "expanded");
        assert_eq!(&rows[1][0], "efficient");
        headers.push(fs::read_to_string(&out_csv).unwrap().lines().next().unwrap().to_string());
    }
    assert_eq!(headers[0], headers[1]);
}

#[test]
fn reproduce_negative_control_fails_with_exit_4() {
    let ws = Workspace::new(60, 200);
    let out = ws.run(&["reproduce", "table2"], "runs", &["--epochs", "0"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    let csv = ws.path("runs/table2.csv");
    let rows = read_rows(&csv, &kanvision_cli::records::REPRODUCE_HEADER).unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| &r[11] == "false"));
    let md = fs::read_to_string(ws.path("runs/table2.md")).unwrap();
    assert_eq!(md.matches("FAIL").count(), 6);
}

#[test]
fn reproduce_rows_filter_and_report_only_suite() {
    let ws = Workspace::new(60, 40);
    let out = ws.run(&["reproduce", "figure4"], "runs", &["--epochs", "0", "--rows", "mlp_784x32x10"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = read_rows(&ws.path("runs/figure4.csv"), &kanvision_cli::records::REPRODUCE_HEADER).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][10], "false");

    let out = ws.run(&["reproduce", "figure4"], "runs", &["--rows", "nope"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn audit_prints_layer_counts() {
    let out = kanvision(&["audit", "--model", "cnn_small"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("32086"), "{text}");
}
