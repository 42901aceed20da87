use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spinrbm::Checkpoint;
use spinrbm_cli::grid::{parse_pgm, TileGrid};

const SIDE: usize = 8;

fn rbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbm"))
        .args(args)
        .output()
        .expect("failed to launch rbm")
}

fn ok(args: &[&str]) -> Output {
    let out = rbm(args);
    assert!(
        out.status.success(),
        "rbm {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Horizontal or vertical bars with a little pixel noise.
fn bar_images(count: usize, seed: u64) -> Vec<u8> {
    let mut state = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    let mut pixels = Vec::with_capacity(count * SIDE * SIDE);
    for i in 0..count {
        let line = (next() % SIDE as u64) as usize;
        for r in 0..SIDE {
            for c in 0..SIDE {
                let on = if i % 2 == 0 { r == line } else { c == line };
                let noise = next() % 20 == 0;
                pixels.push(if on ^ noise { 230 } else { 10 });
            }
        }
    }
    pixels
}

fn write_idx(path: &Path, count: usize, pixels: &[u8]) {
    let mut bytes = Vec::new();
    for x in [0x0803u32, count as u32, SIDE as u32, SIDE as u32] {
        bytes.extend_from_slice(&x.to_be_bytes());
    }
    bytes.extend_from_slice(pixels);
    std::fs::write(path, bytes).unwrap();
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        std::fs::create_dir(&data).unwrap();
        write_idx(
            &data.join("train-images-idx3-ubyte"),
            300,
            &bar_images(300, 1),
        );
        write_idx(&data.join("t10k-images-idx3-ubyte"), 40, &bar_images(40, 2));
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    fn train(&self, out: &str, extra: &[&str]) -> PathBuf {
        let data = self.s("data");
        let out_dir = self.s(out);
        let mut args = vec![
            "train",
            "--data",
            &data,
            "--out",
            &out_dir,
            "--preset",
            "desk",
            "--hidden",
            "16",
            "--epochs",
            "6",
            "--batch-size",
            "50",
            "--lr",
            "0.01",
            "--eval-every",
            "2",
        ];
        args.extend_from_slice(extra);
        ok(&args);
        self.path(out).join("checkpoint.rbm")
    }
}

fn grid_size(rows: usize, cols: usize) -> (usize, usize) {
    let g = TileGrid::new(rows, cols, SIDE, SIDE);
    (g.width(), g.height())
}

fn read_pgm(path: &Path) -> (usize, usize, Vec<u8>) {
    let bytes = std::fs::read(path).unwrap();
    let (w, h, px) = parse_pgm(&bytes).unwrap();
    (w, h, px.to_vec())
}

#[test]
fn train_writes_checkpoint_metrics_and_manifest() {
    let fx = Fixture::new();
    let ck_path = fx.train("run", &["--seed", "3"]);
    let ck = Checkpoint::load(&ck_path).unwrap();
    assert_eq!(ck.model.n_visible(), 64);
    assert_eq!(ck.model.n_hidden(), 16);
    assert_eq!(ck.config.seed, 3);
    assert_eq!(ck.adam.t, 6 * 6);

    let csv = std::fs::read_to_string(fx.path("run/metrics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "epoch,energy_coefficient,recon_error,wall_ms");
    assert_eq!(lines.len(), 1 + 3);
    for (line, epoch) in lines[1..].iter().zip([2, 4, 6]) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0], epoch.to_string());
        let recon: f64 = fields[2].parse().unwrap();
        assert!((0.0..=1.0).contains(&recon));
        assert_eq!(fields[3], "");
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fx.path("run/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["train_samples"], 300);
    assert_eq!(manifest["holdout_samples"], 40);
}

#[test]
fn wall_time_flag_fills_the_timing_column() {
    let fx = Fixture::new();
    fx.train("run", &["--epochs", "2", "--wall-time"]);
    let csv = std::fs::read_to_string(fx.path("run/metrics.csv")).unwrap();
    for line in csv.lines().skip(1) {
        line.rsplit(',').next().unwrap().parse::<u64>().unwrap();
    }
}

#[test]
fn missing_data_fails_without_writing_a_checkpoint() {
    let fx = Fixture::new();
    let missing = fx.s("nowhere");
    let out = fx.s("run");
    let res = rbm(&[
        "train", "--data", &missing, "--out", &out, "--preset", "desk",
    ]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("error"));
    assert!(!fx.path("run/checkpoint.rbm").exists());
}

#[test]
fn bad_flags_are_rejected() {
    assert!(!rbm(&["train", "--epochs", "many"]).status.success());
    assert!(!rbm(&["sample"]).status.success());
    assert!(!rbm(&["frobnicate"]).status.success());
}

#[test]
fn same_seed_gives_identical_outputs() {
    let fx = Fixture::new();
    let a = fx.train("a", &["--seed", "9"]);
    let b = fx.train("b", &["--seed", "9"]);
    let c = fx.train("c", &["--seed", "10"]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    assert_eq!(
        std::fs::read(fx.path("a/metrics.csv")).unwrap(),
        std::fs::read(fx.path("b/metrics.csv")).unwrap()
    );
}

#[test]
fn sample_grid_has_one_row_per_step_count() {
    let fx = Fixture::new();
    let ck = fx.train("run", &[]);
    let ck = ck.to_string_lossy().into_owned();

    let out = fx.s("samples.pgm");
    ok(&["sample", "--checkpoint", &ck, "--out", &out, "--seed", "1"]);
    let (w, h, px) = read_pgm(&fx.path("samples.pgm"));
    assert_eq!((w, h), grid_size(7, 16));
    assert!(px.iter().all(|&p| p == 0 || p == 255 || p == 128));

    let out1 = fx.s("s1.pgm");
    ok(&[
        "sample",
        "--checkpoint",
        &ck,
        "--out",
        &out1,
        "--steps",
        "0",
        "--chains",
        "5",
    ]);
    let (w, h, _) = read_pgm(&fx.path("s1.pgm"));
    assert_eq!((w, h), grid_size(1, 5));

    let out2 = fx.s("s2.pgm");
    ok(&["sample", "--checkpoint", &ck, "--out", &out2, "--seed", "1"]);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&out2).unwrap());

    assert!(!rbm(&[
        "sample",
        "--checkpoint",
        &ck,
        "--out",
        &out1,
        "--steps",
        "4,2"
    ])
    .status
    .success());
}

#[test]
fn reconstruct_pairs_originals_with_readbacks() {
    let fx = Fixture::new();
    let ck = fx.train("run", &[]).to_string_lossy().into_owned();
    let data = fx.s("data");
    let out = fx.s("recon.pgm");
    let res = ok(&[
        "reconstruct",
        "--checkpoint",
        &ck,
        "--data",
        &data,
        "--out",
        &out,
    ]);
    let (w, h, _) = read_pgm(&fx.path("recon.pgm"));
    assert_eq!((w, h), grid_size(2, 16));
    assert!(String::from_utf8_lossy(&res.stdout).contains("disagreement"));
}

#[test]
fn eval_is_reproducible_and_bounded() {
    let fx = Fixture::new();
    let ck = fx.train("run", &[]).to_string_lossy().into_owned();
    let data = fx.s("data");
    let (a, b, one) = (fx.s("a.csv"), fx.s("b.csv"), fx.s("one.csv"));
    let common = [
        "--checkpoint",
        &ck,
        "--data",
        &data,
        "--batch-size",
        "40",
        "--seed",
        "4",
    ];
    let run = |out: &str, extra: &[&str]| {
        let mut args = vec!["eval", "--out", out];
        args.extend_from_slice(&common);
        args.extend_from_slice(extra);
        ok(&args);
        std::fs::read_to_string(out).unwrap()
    };
    let first = run(&a, &[]);
    assert_eq!(first, run(&b, &[]));
    let lines: Vec<&str> = first.lines().collect();
    assert_eq!(lines[0], "step,recon_error,energy_coefficient");
    let steps: Vec<&str> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(steps, ["0", "2", "4", "8", "16", "32"]);
    for line in &lines[1..] {
        let f: Vec<f64> = line
            .split(',')
            .skip(1)
            .map(|x| x.parse().unwrap())
            .collect();
        assert!((0.0..=1.0).contains(&f[0]));
        assert!((-1e-9..=1.0).contains(&f[1]));
    }
    assert_eq!(run(&one, &["--steps", "0"]).lines().count(), 2);
}

#[test]
fn weights_grid_and_blank_model() {
    let fx = Fixture::new();
    let ck = fx
        .train("run", &["--hidden", "70"])
        .to_string_lossy()
        .into_owned();
    let out = fx.s("w.pgm");
    ok(&["weights", "--checkpoint", &ck, "--out", &out]);
    assert_eq!(read_pgm(&fx.path("w.pgm")).0, grid_size(8, 8).0);
    assert_eq!(read_pgm(&fx.path("w.pgm")).1, grid_size(8, 8).1);

    // untrained zero weights render as flat mid-grey tiles
    let blank = fx
        .train(
            "blank",
            &["--hidden", "4", "--epochs", "0", "--init-std", "0"],
        )
        .to_string_lossy()
        .into_owned();
    ok(&["weights", "--checkpoint", &blank, "--out", &out]);
    let (_, _, px) = read_pgm(&fx.path("w.pgm"));
    assert!(px.iter().all(|&p| p == 128));
}

#[test]
fn config_file_supplies_flags() {
    let fx = Fixture::new();
    let cfg = fx.path("run.json");
    let body = serde_json::json!({
        "data": fx.path("data"),
        "out": fx.path("from_config"),
        "preset": "desk",
        "hidden": 8,
        "epochs": 2,
        "batch_size": 60,
        "seed": 21,
    });
    std::fs::write(&cfg, body.to_string()).unwrap();
    let cfg = cfg.to_string_lossy().into_owned();
    ok(&["train", "--config", &cfg, "--epochs", "1"]);
    let ck = Checkpoint::load(&fx.path("from_config/checkpoint.rbm")).unwrap();
    assert_eq!(ck.model.n_hidden(), 8);
    assert_eq!(ck.config.epochs, 1);
    assert_eq!(ck.config.seed, 21);
    assert_eq!(ck.config.batch_size, 60);

    std::fs::write(fx.path("bad.json"), r#"{"hiden": 8}"#).unwrap();
    let bad = fx.s("bad.json");
    assert!(!rbm(&["train", "--config", &bad]).status.success());
}
