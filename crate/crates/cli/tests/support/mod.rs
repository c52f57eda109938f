#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bridgenet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bridgenet"))
        .args(args)
        .output()
        .expect("spawn bridgenet")
}

/// Runs a command and returns its stdout, or a message with the exit code and
/// stderr.
pub fn run_ok(args: &[&str]) -> Result<String, String> {
    let out = bridgenet(args);
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!(
            "bridgenet {} exited {:?}: {}",
            args.first().unwrap_or(&""),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

/// Sizes for a run config; optimizer settings are shared by all three stages
/// except for the step counts.
#[derive(Clone, Copy)]
pub struct Sizes {
    pub width: usize,
    pub blocks: usize,
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub bridge_width: usize,
    pub bridge_steps: usize,
}

impl Sizes {
    pub const TINY: Sizes = Sizes {
        width: 8,
        blocks: 1,
        steps: 60,
        batch: 16,
        lr: 0.05,
        bridge_width: 4,
        bridge_steps: 40,
    };

    pub const TOY: Sizes = Sizes {
        width: 32,
        blocks: 2,
        steps: 4000,
        batch: 64,
        lr: 0.05,
        bridge_width: 32,
        bridge_steps: 4000,
    };
}

pub fn config_json(s: Sizes, seed: u64) -> String {
    let opt = |steps: usize| {
        format!(
            r#"{{"base_lr": {}, "momentum": 0.9, "weight_decay": 0.0005, "total_steps": {steps}, "batch_size": {}}}"#,
            s.lr, s.batch
        )
    };
    format!(
        r#"{{
  "arch": {{"width": {}, "blocks": {}, "feature_tap": 2}},
  "optimizer": {{"mode": {}, "curve": {}, "bridge": {}}},
  "mixup": {{"alpha": 0.4}},
  "bridge": {{"kind": "type_ii", "width": {}, "target_r": 0.5}},
  "eval": {{"n_bins": 15}},
  "seed": {seed}
}}
"#,
        s.width,
        s.blocks,
        opt(s.steps),
        opt(s.steps),
        opt(s.bridge_steps),
        s.bridge_width
    )
}

pub struct Run {
    pub dir: PathBuf,
}

impl Run {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn s(&self, name: &str) -> String {
        p(&self.path(name)).to_string()
    }
}

/// The quick-start sequence: data, split, two modes, a curve, a type II
/// bridge, a calibrated DE-{1,2} baseline and an evaluation of
/// {mode a, mode b, bridge}. Returns the eval command's stdout.
pub fn quickstart(run: &Run, sizes: Sizes, seed: u64, n_per_class: usize, noise: f64) -> Result<String, String> {
    std::fs::write(run.path("config.json"), config_json(sizes, seed)).map_err(|e| e.to_string())?;
    let seed_s = seed.to_string();
    let (m1, m2) = ((100 * seed + 1).to_string(), (100 * seed + 2).to_string());
    let n = n_per_class.to_string();
    let noise = noise.to_string();
    let r = |n: &str| run.s(n);
    run_ok(&[
        "gen-data",
        "--kind",
        "spirals",
        "--n",
        &n,
        "--classes",
        "3",
        "--noise",
        &noise,
        "--seed",
        &seed_s,
        "--out",
        &r("data.csv"),
    ])?;
    run_ok(&[
        "split",
        "--data",
        &r("data.csv"),
        "--ratios",
        "0.2,0.2,0.6",
        "--seed",
        &seed_s,
        "--out-dir",
        &r(""),
    ])?;
    for (seed, out) in [(&m1, "a.ckpt"), (&m2, "b.ckpt")] {
        run_ok(&[
            "train-mode",
            "--config",
            &r("config.json"),
            "--train",
            &r("train.csv"),
            "--val",
            &r("val.csv"),
            "--seed",
            seed,
            "--out",
            &r(out),
        ])?;
    }
    run_ok(&[
        "train-curve",
        "--mode-a",
        &r("a.ckpt"),
        "--mode-b",
        &r("b.ckpt"),
        "--config",
        &r("config.json"),
        "--train",
        &r("train.csv"),
        "--out",
        &r("ab.curve"),
    ])?;
    run_ok(&[
        "train-bridge",
        "--type",
        "2",
        "--curve",
        &r("ab.curve"),
        "--config",
        &r("config.json"),
        "--train",
        &r("train.csv"),
        "--base",
        &r("a.ckpt"),
        "--base",
        &r("b.ckpt"),
        "--out",
        &r("ab.bridge"),
    ])?;
    run_ok(&[
        "dee-baseline",
        "--modes",
        &r("a.ckpt"),
        &r("b.ckpt"),
        "--test",
        &r("test.csv"),
        "--val",
        &r("val.csv"),
        "--out",
        &r("de.csv"),
    ])?;
    run_ok(&[
        "eval",
        "--members",
        &format!("mode:{}", r("a.ckpt")),
        &format!("mode:{}", r("b.ckpt")),
        &format!("bridge:{}", r("ab.bridge")),
        "--test",
        &r("test.csv"),
        "--val",
        &r("val.csv"),
        "--dee-baseline",
        &r("de.csv"),
        "--out",
        &r("report.json"),
    ])
}
