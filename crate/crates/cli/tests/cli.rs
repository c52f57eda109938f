mod support;

use std::collections::BTreeMap;
use std::path::Path;

use support::{bridgenet, config_json, p, quickstart, run_ok, Run, Sizes};

fn tiny_run(dir: &Path) -> Run {
    let run = Run { dir: dir.to_path_buf() };
    quickstart(&run, Sizes::TINY, 3, 60, 0.1).unwrap();
    run
}

fn code(args: &[&str]) -> (Option<i32>, String) {
    let out = bridgenet(args);
    (out.status.code(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

#[test]
fn quickstart_emits_a_complete_report() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tiny_run(tmp.path());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(run.path("report.json")).unwrap()).unwrap();
    for key in ["acc", "nll", "ece", "bs", "dee", "temperature", "n"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert!(report["dee"].as_f64().unwrap() >= 0.0);
    assert_eq!(report["n"], 108);
    for log in ["a.ckpt.log.csv", "ab.curve.log.csv", "ab.bridge.log.csv"] {
        let text = std::fs::read_to_string(run.path(log)).unwrap();
        let rows = text.lines().count() - 1;
        let want = if log.contains("bridge") {
            Sizes::TINY.bridge_steps
        } else {
            Sizes::TINY.steps
        };
        assert_eq!(rows, want, "{log}");
    }
    let val: serde_json::Value = serde_json::from_slice(&std::fs::read(run.path("a.ckpt.val.json")).unwrap()).unwrap();
    assert_eq!(val["n"], 36);
}

#[test]
fn every_command_is_bitwise_reproducible() {
    let extra = |run: &Run| {
        let r = |n: &str| run.s(n);
        run_ok(&[
            "scan-curve",
            "--curve",
            &r("ab.curve"),
            "--data",
            &r("test.csv"),
            "--grid",
            "5",
            "--out",
            &r("scan.csv"),
            "--plot",
            &r("scan.svg"),
        ])
        .unwrap();
        run_ok(&[
            "train-mode",
            "--config",
            &r("config.json"),
            "--train",
            &r("train.csv"),
            "--val",
            &r("val.csv"),
            "--seed",
            "77",
            "--out",
            &r("c.ckpt"),
        ])
        .unwrap();
        run_ok(&[
            "train-curve",
            "--mode-a",
            &r("a.ckpt"),
            "--mode-b",
            &r("c.ckpt"),
            "--config",
            &r("config.json"),
            "--train",
            &r("train.csv"),
            "--out",
            &r("ac.curve"),
        ])
        .unwrap();
        run_ok(&[
            "train-bridge",
            "--curve",
            &r("ac.curve"),
            "--config",
            &r("config.json"),
            "--train",
            &r("train.csv"),
            "--out",
            &r("ac.bridge"),
        ])
        .unwrap();
        run_ok(&[
            "train-bridge",
            "--type",
            "1",
            "--curve",
            &r("ab.curve"),
            "--config",
            &r("config.json"),
            "--train",
            &r("train.csv"),
            "--width",
            "2",
            "--out",
            &r("ab1.bridge"),
        ])
        .unwrap();
        run_ok(&[
            "correspondence",
            "--target-curve",
            &r("ab.curve"),
            "--bridge",
            &r("ab.bridge"),
            "--others",
            &r("ac.bridge"),
            &format!("{}@0.5", r("ac.curve")),
            "--test",
            &r("test.csv"),
            "--out",
            &r("corr.csv"),
        ])
        .unwrap();
        let flops = run_ok(&["flops", "--ckpt", &r("ab1.bridge"), "--relative", &r("a.ckpt")]).unwrap();
        std::fs::write(run.path("flops.json"), flops).unwrap();
    };
    let (t1, t2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (r1, r2) = (tiny_run(t1.path()), tiny_run(t2.path()));
    extra(&r1);
    extra(&r2);
    let (s1, s2) = (snapshot(t1.path()), snapshot(t2.path()));
    assert_eq!(s1.keys().collect::<Vec<_>>(), s2.keys().collect::<Vec<_>>());
    assert!(s1.len() >= 25, "{:?}", s1.keys());
    for (name, bytes) in &s1 {
        assert!(bytes == &s2[name], "{name} differs between identical runs");
    }

    let corr = String::from_utf8(s1["corr.csv"].clone()).unwrap();
    for label in ["match bridge", "other bridge", "other Bezier"] {
        assert!(corr.contains(label), "{corr}");
    }
    let flops: serde_json::Value = serde_json::from_slice(&s1["flops.json"]).unwrap();
    assert!(flops["relative_flops"].as_f64().unwrap() < 0.5);
}

#[test]
fn scan_rows_match_grid_and_plot_is_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tiny_run(tmp.path());
    let r = |n: &str| run.s(n);
    run_ok(&[
        "scan-curve",
        "--curve",
        &r("ab.curve"),
        "--data",
        &r("test.csv"),
        "--grid",
        "11",
        "--out",
        &r("scan.csv"),
        "--plot",
        &r("scan.svg"),
    ])
    .unwrap();
    let csv = std::fs::read_to_string(run.path("scan.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
    let svg = std::fs::read_to_string(run.path("scan.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert_eq!(svg.matches('<').count(), svg.matches('>').count());
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d.csv");
    let d = p(&data);
    assert_eq!(
        code(&[
            "gen-data",
            "--kind",
            "spirals",
            "--n",
            "10",
            "--classes",
            "3",
            "--noise",
            "0.1",
            "--seed",
            "1"
        ])
        .0,
        Some(2)
    );
    assert_eq!(
        code(&[
            "gen-data",
            "--kind",
            "spirals",
            "--n",
            "10",
            "--classes",
            "1",
            "--noise",
            "0.1",
            "--seed",
            "1",
            "--out",
            d
        ])
        .0,
        Some(2)
    );
    assert_eq!(
        code(&[
            "gen-data",
            "--kind",
            "spirals",
            "--n",
            "0",
            "--classes",
            "3",
            "--noise",
            "0.1",
            "--seed",
            "1",
            "--out",
            d
        ])
        .0,
        Some(2)
    );
    assert_eq!(code(&["no-such-command"]).0, Some(2));
    assert!(!data.exists());

    let cfg = tmp.path().join("bad.json");
    let good = config_json(Sizes::TINY, 0);
    std::fs::write(&cfg, good.replace("\"seed\"", "\"sed\"")).unwrap();
    run_ok(&[
        "gen-data",
        "--kind",
        "blobs",
        "--n",
        "20",
        "--classes",
        "2",
        "--noise",
        "1",
        "--seed",
        "1",
        "--out",
        d,
    ])
    .unwrap();
    let train = |cfg: &Path| {
        code(&[
            "train-mode",
            "--config",
            p(cfg),
            "--train",
            d,
            "--val",
            d,
            "--seed",
            "1",
            "--out",
            p(&tmp.path().join("m.ckpt")),
        ])
    };
    let (c, err) = train(&cfg);
    assert_eq!(c, Some(2), "{err}");
    assert!(err.contains("sed"), "{err}");
    std::fs::write(&cfg, good.replace("\"base_lr\": 0.05", "\"base_lr\": -1")).unwrap();
    assert_eq!(train(&cfg).0, Some(2));
    assert!(!tmp.path().join("m.ckpt").exists());
}

#[test]
fn bridge_base_mismatch_and_missing_bases_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tiny_run(tmp.path());
    let r = |n: &str| run.s(n);
    let bridge = |extra: &[&str]| {
        let mut args = vec![
            "train-bridge",
            "--curve",
            &r("ab.curve"),
            "--config",
            &r("config.json"),
            "--train",
            &r("train.csv"),
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
        args.extend(extra.iter().map(|s| s.to_string()));
        args.extend(["--out".to_string(), r("x.bridge")]);
        code(&args.iter().map(String::as_str).collect::<Vec<_>>())
    };
    assert_eq!(bridge(&["--type", "2", "--base", &r("a.ckpt")]).0, Some(2));
    assert_eq!(
        bridge(&["--type", "2", "--base", &r("b.ckpt"), "--base", &r("a.ckpt")]).0,
        Some(2)
    );
    assert_eq!(bridge(&["--type", "3"]).0, Some(2));
    assert!(!run.path("x.bridge").exists());

    let (c, err) = code(&[
        "eval",
        "--members",
        &format!("mode:{}", r("a.ckpt")),
        &format!("bridge:{}", r("ab.bridge")),
        "--test",
        &r("test.csv"),
        "--val",
        &r("val.csv"),
        "--out",
        &r("r.json"),
    ]);
    assert_eq!(c, Some(2), "{err}");
    let out = run_ok(&[
        "eval",
        "--members",
        &format!("bridge:{},base={},base={}", r("ab.bridge"), r("a.ckpt"), r("b.ckpt")),
        "--test",
        &r("test.csv"),
        "--val",
        &r("val.csv"),
        "--out",
        &r("r.json"),
    ])
    .unwrap();
    let flops: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(flops["relative_flops"].as_f64().unwrap() > 2.0);
    assert_eq!(
        code(&[
            "dee-baseline",
            "--modes",
            &r("a.ckpt"),
            "--test",
            &r("test.csv"),
            "--out",
            &r("d.csv")
        ])
        .0,
        Some(2)
    );
}

#[test]
fn runtime_failures_exit_1_with_distinct_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.ckpt");
    let (c, err) = code(&["flops", "--ckpt", p(&missing)]);
    assert_eq!(c, Some(1), "{err}");

    let run = tiny_run(tmp.path());
    let good = std::fs::read(run.path("a.ckpt")).unwrap();
    let check = |name: &str, bytes: &[u8], needle: &str| {
        let path = run.path(name);
        std::fs::write(&path, bytes).unwrap();
        let (c, err) = code(&["flops", "--ckpt", p(&path)]);
        assert_eq!(c, Some(1), "{name}: {err}");
        assert!(err.contains(needle), "{name}: {err}");
    };
    let mut bad = good.clone();
    bad[..4].copy_from_slice(b"NOPE");
    check("magic.ckpt", &bad, "bad magic");
    let mut bad = good.clone();
    bad[4] = 9;
    check("version.ckpt", &bad, "version mismatch");
    check("short.ckpt", &good[..good.len() - 3], "truncated payload");
    let mut long = good.clone();
    long.extend_from_slice(&[0; 8]);
    check("long.ckpt", &long, "param_count mismatch");

    let csv = run.path("broken.csv");
    std::fs::write(&csv, "label,f0,f1\n1,0.1,oops\n").unwrap();
    let (c, err) = code(&[
        "scan-curve",
        "--curve",
        &run.s("ab.curve"),
        "--data",
        p(&csv),
        "--grid",
        "3",
        "--out",
        &run.s("s.csv"),
    ]);
    assert_eq!(c, Some(1));
    assert!(err.contains("broken.csv:2"), "{err}");
}

#[test]
fn shipped_toy_config_parses() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/toy.json");
    let d = tmp.path().join("d.csv");
    run_ok(&[
        "gen-data",
        "--kind",
        "blobs",
        "--n",
        "5",
        "--classes",
        "2",
        "--noise",
        "1",
        "--seed",
        "1",
        "--out",
        p(&d),
    ])
    .unwrap();
    // a zero-length validation file is a runtime failure, reached only after the config is accepted
    let empty = tmp.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let (c, err) = code(&[
        "train-mode",
        "--config",
        p(&cfg),
        "--train",
        p(&d),
        "--val",
        p(&empty),
        "--seed",
        "1",
        "--out",
        p(&tmp.path().join("m")),
    ]);
    assert_eq!(c, Some(1), "{err}");
}
