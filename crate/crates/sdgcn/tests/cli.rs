//! End-to-end tests of the `sdgcn` binary: exit codes, artifact layout,
//! checkpoint re-evaluation, sweeps, and the config-file merge.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sdgcn::graph::random_signed_digraph;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_sdgcn")
}

fn write_toy_dataset(dir: &Path) -> PathBuf {
    let g = random_signed_digraph(30, 0.2, 0.35, 7);
    let mut buf = Vec::new();
    g.write_edge_list(&mut buf).unwrap();
    let path = dir.join("toy.txt");
    fs::write(&path, &buf).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process exited with a code")
}

#[test]
fn verify_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_toy_dataset(dir.path());
    let out_dir = dir.path().join("v");
    let out = run(&[
        "verify",
        "--dataset",
        data.to_str().unwrap(),
        "--q",
        "0",
        "--q",
        "0.25pi",
        "--q",
        "0.5pi",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    // 3 q values x 2 kinds
    assert_eq!(stdout.matches("PASS").count(), 6);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("verify_report.json")).unwrap())
            .unwrap();
    assert_eq!(report.as_array().unwrap().len(), 6);
    assert!(report
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["pass"].as_bool().unwrap()));
}

#[test]
fn verify_corruption_hook_fails_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_toy_dataset(dir.path());
    let out = run(&[
        "verify",
        "--dataset",
        data.to_str().unwrap(),
        "--corrupt",
        "--out",
        dir.path().join("v").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn missing_dataset_is_exit_2() {
    let out = run(&["train", "--dataset", "/nonexistent/graph.txt"]);
    assert_eq!(code(&out), 2);
    let out = run(&["verify"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn divergence_is_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_toy_dataset(dir.path());
    let out = run(&[
        "train",
        "--dataset",
        data.to_str().unwrap(),
        "--dim",
        "8",
        "--epochs",
        "5",
        "--seeds",
        "0",
        "--lr",
        "1e100",
        "--out",
        dir.path().join("d").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn train_emits_all_artifacts_and_eval_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_toy_dataset(dir.path());
    let out_dir = dir.path().join("t");
    let out = run(&[
        "train",
        "--dataset",
        data.to_str().unwrap(),
        "--dim",
        "8",
        "--epochs",
        "5",
        "--seeds",
        "0",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in [
        "checkpoint_seed0.json",
        "history_seed0.csv",
        "split_seed0.json",
        "eval_seed0.json",
        "results.csv",
        "node_id_map.tsv",
        "run.log",
    ] {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }
    let history = fs::read_to_string(out_dir.join("history_seed0.csv")).unwrap();
    assert!(history.starts_with("epoch,train_loss,val_loss,val_auc\n"));
    assert_eq!(history.lines().count(), 6); // header + 5 epochs
    let results = fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert!(results.starts_with("dataset,seed,auc,macro_f1,micro_f1,binary_f1\n"));
    assert!(results.lines().nth(1).unwrap().starts_with("toy,0,"));

    // re-evaluating the checkpoint reproduces the training-time eval exactly
    let eval_dir = dir.path().join("e");
    let out = run(&[
        "eval",
        "--dataset",
        data.to_str().unwrap(),
        "--checkpoint",
        out_dir.join("checkpoint_seed0.json").to_str().unwrap(),
        "--dim",
        "8",
        "--seeds",
        "0",
        "--out",
        eval_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        fs::read(out_dir.join("eval_seed0.json")).unwrap(),
        fs::read(eval_dir.join("eval_seed0.json")).unwrap()
    );
}

#[test]
fn sweep_q_emits_grid_and_aggregate_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_toy_dataset(dir.path());
    let out_dir = dir.path().join("s");
    let out = run(&[
        "sweep-q",
        "--dataset",
        data.to_str().unwrap(),
        "--dim",
        "8",
        "--epochs",
        "3",
        "--seeds",
        "0,1",
        "--sweep-q",
        "0",
        "--sweep-q",
        "0.1pi",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("sweep_q.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "param,seed,auc,macro_f1,micro_f1,binary_f1");
    // 2 q values x (2 seeds + mean + std)
    assert_eq!(lines.len(), 1 + 2 * 4);
    // q column is in units of pi and echoes the requested grid
    assert!(lines[1].starts_with("0,0,"));
    assert!(csv.contains("0.1,mean,"));
    // every data cell parses back as a float
    for line in &lines[1..] {
        for cell in line.split(',').skip(2) {
            cell.parse::<f64>().unwrap();
        }
    }
}

#[test]
fn sweep_ratio_matches_plain_train() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_toy_dataset(dir.path());
    let sweep_dir = dir.path().join("sr");
    let out = run(&[
        "sweep-ratio",
        "--dataset",
        data.to_str().unwrap(),
        "--dim",
        "8",
        "--epochs",
        "4",
        "--seeds",
        "3",
        "--sweep-ratio",
        "3",
        "--out",
        sweep_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let train_dir = dir.path().join("tr");
    let out = run(&[
        "train",
        "--dataset",
        data.to_str().unwrap(),
        "--dim",
        "8",
        "--epochs",
        "4",
        "--seeds",
        "3",
        "--ratio",
        "3",
        "--out",
        train_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let sweep_csv = fs::read_to_string(sweep_dir.join("sweep_ratio.csv")).unwrap();
    let results = fs::read_to_string(train_dir.join("results.csv")).unwrap();
    // row "3,3,<metrics>" in the sweep equals "toy,3,<metrics>" from train
    let sweep_row = sweep_csv
        .lines()
        .find(|l| l.starts_with("3,3,"))
        .unwrap()
        .strip_prefix("3,3,")
        .unwrap()
        .to_string();
    let train_row = results
        .lines()
        .find(|l| l.starts_with("toy,3,"))
        .unwrap()
        .strip_prefix("toy,3,")
        .unwrap()
        .to_string();
    assert_eq!(sweep_row, train_row);
}

#[test]
fn export_laplacian_matrix_market_shape() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_toy_dataset(dir.path());
    let out_dir = dir.path().join("x");
    let out = run(&[
        "export-laplacian",
        "--dataset",
        data.to_str().unwrap(),
        "--q",
        "0.1pi",
        "--kind",
        "normalized",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mtx = fs::read_to_string(out_dir.join("laplacian_normalized.mtx")).unwrap();
    let mut lines = mtx.lines();
    assert_eq!(
        lines.next().unwrap(),
        "%%MatrixMarket matrix coordinate complex general"
    );
    let mut data_lines = 0usize;
    let mut header: Option<(usize, usize, usize)> = None;
    for line in lines {
        if line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if header.is_none() {
            header = Some((
                fields[0].parse().unwrap(),
                fields[1].parse().unwrap(),
                fields[2].parse().unwrap(),
            ));
        } else {
            assert_eq!(fields.len(), 4);
            let (rows, cols, _) = header.unwrap();
            let i: usize = fields[0].parse().unwrap();
            let j: usize = fields[1].parse().unwrap();
            assert!(1 <= i && i <= rows && 1 <= j && j <= cols);
            fields[2].parse::<f64>().unwrap();
            fields[3].parse::<f64>().unwrap();
            data_lines += 1;
        }
    }
    assert_eq!(data_lines, header.unwrap().2);
    assert!(out_dir.join("node_id_map.tsv").exists());
}

#[test]
fn config_file_merges_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_toy_dataset(dir.path());
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let config = dir.path().join("run.conf");
    fs::write(
        &config,
        format!(
            "dataset = {}\ndim = 8\nepochs = 4\nseeds = 0\nq = 0.2pi\n",
            data.display()
        ),
    )
    .unwrap();
    // file-only run vs flag-override run (q differs -> different histories)
    let out = run(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_a.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--q",
        "0.4pi",
        "--out",
        out_b.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let a = fs::read_to_string(out_a.join("history_seed0.csv")).unwrap();
    let b = fs::read_to_string(out_b.join("history_seed0.csv")).unwrap();
    assert_eq!(a.lines().count(), 5);
    assert_ne!(a, b, "flag override should change the run");
    // checkpoints record the q actually used
    let ckpt: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(out_b.join("checkpoint_seed0.json")).unwrap(),
    )
    .unwrap();
    let q = ckpt["q"].as_f64().unwrap();
    assert!((q - 0.4 * std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn csv_format_and_gzip_ingestion() {
    use flate2::write::GzEncoder;
    use flate2::Compression;
    use std::io::Write as _;

    let dir = tempfile::tempdir().unwrap();
    let g = random_signed_digraph(20, 0.25, 0.35, 11);
    // SNAP-style CSV: src,dst,weight
    let mut csv = String::new();
    for e in &g.edges {
        csv.push_str(&format!("{},{},{}\n", e.source, e.target, e.sign * 4));
    }
    let gz_path = dir.path().join("toy.csv.gz");
    let mut enc = GzEncoder::new(fs::File::create(&gz_path).unwrap(), Compression::default());
    enc.write_all(csv.as_bytes()).unwrap();
    enc.finish().unwrap();

    let out = run(&[
        "verify",
        "--dataset",
        gz_path.to_str().unwrap(),
        "--out",
        dir.path().join("v").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sdgraph_threads_env_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_toy_dataset(dir.path());
    let out_dir = dir.path().join("p");
    let output = Command::new(bin())
        .env("SDGRAPH_THREADS", "2")
        .args([
            "train",
            "--dataset",
            data.to_str().unwrap(),
            "--dim",
            "8",
            "--epochs",
            "3",
            "--seeds",
            "0,1",
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&output), 0, "{}", String::from_utf8_lossy(&output.stderr));
    // per-seed results present and still ordered deterministically
    let results = fs::read_to_string(out_dir.join("results.csv")).unwrap();
    let seeds: Vec<&str> = results
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(seeds, vec!["0", "1"]);
}
