use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ridgeprompt::{BinaryMask, GrayImage};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ridgeprompt"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&fs::read(p).unwrap()).unwrap()
}

const SPEC: &str = r#"{"width":80,"height":64,
  "ridges":[{"path":{"kind":"line","from":[30,-1],"to":[30,64]},"sigma":2,"amplitude":0.9}],
  "noise_sigma":0.03,"seed":4}"#;

/// Writes the synthetic fixture and returns the image path.
fn synth(dir: &Path) -> PathBuf {
    let spec = dir.join("spec.json");
    fs::write(&spec, SPEC).unwrap();
    let out = run(&[
        "synth",
        "--spec",
        s(&spec),
        "-o",
        s(&dir.join("imgs")),
        "--name",
        "ridge",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("imgs/ridge.png")
}

#[test]
fn synth_writes_image_mask_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let img = synth(dir.path());
    let gray = ridgeprompt::load_gray(&img, false).unwrap();
    assert_eq!((gray.width(), gray.height()), (80, 64));
    let mask = BinaryMask::load_png(&dir.path().join("imgs/ridge.mask.png")).unwrap();
    assert!(mask.get(30, 10) && !mask.get(5, 10));
    let truth = read_json(&dir.path().join("imgs/ridge.truth.json"));
    assert_eq!(truth["ridges"][0]["centerline"].as_array().unwrap().len(), 64);
    assert_eq!(truth["config"]["command"], "synth");
}

#[test]
fn detect_writes_ridges_and_curves_with_config() {
    let dir = tempfile::tempdir().unwrap();
    let img = synth(dir.path());
    let out_dir = dir.path().join("out");
    let out = run(&[
        "detect",
        "-i",
        s(&img),
        "-o",
        s(&out_dir),
        "--rel-threshold",
        "0.05",
        "--viz",
    ]);
    assert!(out.status.success());
    let ridges = read_json(&out_dir.join("ridge.ridges.json"));
    assert_eq!(ridges["dims"], serde_json::json!([64, 80, 9]));
    let points = ridges["points"].as_array().unwrap();
    assert!(!points.is_empty());
    assert!(points.iter().all(|p| p.as_array().unwrap().len() == 4));
    assert_eq!(ridges["config"]["rel_threshold"], 0.05);
    assert_eq!(ridges["config"]["scales"].as_array().unwrap().len(), 9);
    assert_eq!(ridges["config"]["measure"], "curvature_difference");
    let curves = read_json(&out_dir.join("ridge.curves.json"));
    assert!(curves["curves"][0]["salience"].as_f64().unwrap() > 0.0);
    assert_eq!(curves["config"], ridges["config"]);
    assert!(out_dir.join("ridge.strength.png").exists());
}

#[test]
fn prompts_modes_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    let img = synth(dir.path());
    let out_dir = dir.path().join("out");
    for (mode, expect) in [("ridge", 20), ("random", 20), ("grid", 16)] {
        let out = run(&[
            "prompts",
            "-i",
            s(&img),
            "-o",
            s(&out_dir),
            "--mode",
            mode,
            "--budget",
            "20",
            "--grid-side",
            "4",
            "--seed",
            "9",
        ]);
        assert!(out.status.success(), "{mode}");
        let p = read_json(&out_dir.join("ridge.prompts.json"));
        assert_eq!(p["points"].as_array().unwrap().len(), expect, "{mode}");
        assert_eq!(p["labels"].as_array().unwrap().len(), expect);
        assert!(p["labels"].as_array().unwrap().iter().all(|l| l == 1));
        assert_eq!(p["config"]["mode"], mode);
        assert_eq!((p["width"].as_u64(), p["height"].as_u64()), (Some(80), Some(64)));
        match mode {
            "grid" => {
                assert!(p["seed"].is_null());
                assert!(p["provenance"].as_array().unwrap().iter().all(|v| v == "grid"));
            }
            _ => assert_eq!(p["seed"], 9),
        }
    }
}

#[test]
fn grid_command_batches_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    let imgs = dir.path().join("imgs");
    fs::create_dir(&imgs).unwrap();
    for (name, w, h) in [("a", 40, 30), ("b", 64, 64), ("c", 33, 17)] {
        GrayImage::from_fn(w, h, |x, _| x as f64 / w as f64)
            .unwrap()
            .save_png(&imgs.join(format!("{name}.png")))
            .unwrap();
    }
    fs::write(imgs.join("notes.txt"), "ignored").unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "grid",
        "-i",
        s(&imgs),
        "-o",
        s(&out_dir),
        "--grid-side",
        "8",
        "--jobs",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["a", "b", "c"] {
        let p = read_json(&out_dir.join(format!("{name}.grid.json")));
        assert_eq!(p["points"].as_array().unwrap().len(), 64);
    }
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let img = synth(dir.path());
    let out = dir.path().join("out");
    let files = ["ridge.ridges.json", "ridge.curves.json", "ridge.prompts.json"];
    let mut snapshots = Vec::new();
    for jobs in ["1", "3"] {
        assert!(run(&["detect", "-i", s(&img), "-o", s(&out), "--jobs", jobs])
            .status
            .success());
        assert!(run(&[
            "prompts",
            "-i",
            s(&img),
            "-o",
            s(&out),
            "--budget",
            "32",
            "--seed",
            "5",
            "--jobs",
            jobs
        ])
        .status
        .success());
        snapshots.push(files.map(|f| fs::read(out.join(f)).unwrap()));
    }
    for (i, f) in files.iter().enumerate() {
        assert!(snapshots[0][i] == snapshots[1][i], "{f} differs between runs");
    }
}

#[test]
fn constant_image_gives_empty_ridge_prompts() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("flat.png");
    GrayImage::from_fn(32, 32, |_, _| 0.5).unwrap().save_png(&img).unwrap();
    let out = run(&["prompts", "-i", s(&img), "-o", s(&dir.path().join("out"))]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no ridges"));
    let p = read_json(&dir.path().join("out/flat.prompts.json"));
    assert!(p["points"].as_array().unwrap().is_empty());
}

#[test]
fn invalid_parameters_exit_2_and_name_the_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let img = synth(dir.path());
    let out_dir = dir.path().join("out");
    let cases: [(&[&str], &str); 5] = [
        (&["--scales", "1,2"], "scales"),
        (&["--rel-threshold", "1.5"], "rel_threshold"),
        (&["--gamma", "0"], "gamma"),
        (&["--budget", "0"], "prompt_budget"),
        (&["--mode", "grid", "--grid-side", "100"], "grid_side"),
    ];
    for (extra, name) in cases {
        let mut args = vec!["prompts", "-i", s(&img), "-o", s(&out_dir)];
        args.extend_from_slice(extra);
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{extra:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains(name), "{extra:?}");
    }
    let out = run(&["prompts", "-i", s(&img), "-o", s(&out_dir), "--mode", "spiral"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn io_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.png");
    let out = run(&["detect", "-i", s(&missing), "-o", s(&dir.path().join("out"))]);
    assert_eq!(out.status.code(), Some(3));
    let not_png = dir.path().join("x.png");
    fs::write(&not_png, "not an image").unwrap();
    let out = run(&["detect", "-i", s(&not_png), "-o", s(&dir.path().join("out"))]);
    assert_eq!(out.status.code(), Some(3));
    let out = run(&["synth", "--spec", s(&dir.path().join("nope.json")), "-o", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
}

fn write_masks(dir: &Path, masks: &[(&str, &BinaryMask)]) {
    fs::create_dir_all(dir).unwrap();
    for (name, m) in masks {
        m.save_png(&dir.join(format!("{name}.png"))).unwrap();
    }
}

#[test]
fn eval_reports_counts_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (pred, refd, out_dir) = (dir.path().join("pred"), dir.path().join("ref"), dir.path().join("out"));
    let r1 = BinaryMask::from_fn(4, 4, |x, _| x < 2);
    let p1 = BinaryMask::from_fn(4, 4, |x, y| x < 2 && y < 3 || x == 3 && y == 0);
    let r2 = BinaryMask::from_fn(3, 2, |_, _| false);
    write_masks(&refd, &[("one", &r1), ("two", &r2), ("orphan", &r2)]);
    write_masks(&pred, &[("one", &p1), ("two", &r2)]);
    let out = run(&["eval", "--pred", s(&pred), "--reference", s(&refd), "-o", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&out_dir.join("report.json"));
    // one: tp 6, fp 1, fn 2, tn 7; two: tn 6
    assert_eq!(report["rows"][0]["image"], "one");
    assert_eq!(report["rows"][0]["tp"], 6);
    assert_eq!(report["rows"][1]["tpr"], Value::Null);
    assert_eq!(report["aggregate"]["fn"], 2);
    assert_eq!(report["aggregate"]["tn"], 13);
    assert_eq!(report["aggregate"]["iou"], 6.0 / 9.0);
    assert_eq!(report["unmatched"], serde_json::json!(["orphan"]));
    assert_eq!(report["config"]["filter"]["max_area_fraction"], 0.25);
    let csv = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "image,tp,fp,tn,fn,tpr,fpr,iou,segments,kept,quality_rate");
    assert!(lines[1].starts_with("one,6,1,7,2,0.75,"));
    assert!(lines[3].starts_with("aggregate,6,1,13,2,"));
}

#[test]
fn eval_filters_segmenter_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (pred, refd, out_dir) = (dir.path().join("pred"), dir.path().join("ref"), dir.path().join("out"));
    let reference = BinaryMask::from_fn(10, 10, |x, _| x == 4 || x == 5);
    write_masks(&refd, &[("img", &reference)]);
    let run_dir = pred.join("img");
    let good = BinaryMask::from_fn(10, 10, |x, y| x == 4 && y < 5);
    let huge = BinaryMask::from_fn(10, 10, |_, y| y < 5);
    let shaky = BinaryMask::from_fn(10, 10, |x, y| x == 5 && y >= 5);
    write_masks(&run_dir, &[("m0", &good), ("m1", &huge), ("m2", &shaky)]);
    let meta = serde_json::json!([
        {"point": [4, 1], "mask": "m0.png", "pred_iou": 0.9, "stability": 0.95, "kept": true, "reject_reason": null},
        {"point": [0, 0], "mask": "m1.png", "pred_iou": 0.9, "stability": 0.95, "kept": false, "reject_reason": "area"},
        {"point": [5, 7], "mask": "m2.png", "pred_iou": 0.9, "stability": 0.5, "kept": false, "reject_reason": "stability"}
    ]);
    fs::write(run_dir.join("metadata.json"), meta.to_string()).unwrap();
    let out = run(&["eval", "--pred", s(&pred), "--reference", s(&refd), "-o", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&out_dir.join("report.json"));
    let row = &report["rows"][0];
    assert_eq!((row["tp"].as_u64(), row["fp"].as_u64()), (Some(5), Some(0)));
    assert_eq!(row["segments"]["segments"], 3);
    assert_eq!(row["segments"]["kept"], 1);
    // a looser policy keeps the unstable mask too
    let out = run(&[
        "eval",
        "--pred",
        s(&pred),
        "--reference",
        s(&refd),
        "-o",
        s(&out_dir),
        "--stability-thresh",
        "0.4",
    ]);
    assert!(out.status.success());
    let report = read_json(&out_dir.join("report.json"));
    assert_eq!(report["rows"][0]["tp"], 10);
}

#[test]
fn eval_rejects_empty_or_unmatched_directories() {
    let dir = tempfile::tempdir().unwrap();
    let (pred, refd) = (dir.path().join("pred"), dir.path().join("ref"));
    fs::create_dir_all(&refd).unwrap();
    write_masks(&pred, &[("a", &BinaryMask::empty(3, 3))]);
    let out = run(&[
        "eval",
        "--pred",
        s(&pred),
        "--reference",
        s(&refd),
        "-o",
        s(&dir.path().join("o")),
    ]);
    assert_ne!(out.status.code(), Some(0));
    write_masks(&refd, &[("b", &BinaryMask::empty(3, 3))]);
    let out = run(&[
        "eval",
        "--pred",
        s(&pred),
        "--reference",
        s(&refd),
        "-o",
        s(&dir.path().join("o")),
    ]);
    assert_ne!(out.status.code(), Some(0));
}
