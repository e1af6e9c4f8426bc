mod common;

use std::fs;

use common::*;
use lidarprior::io::read_ply;

#[test]
fn simgen_default_map_mode_has_no_dynamic_labels() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("frames");
    ok(lidarprior(&["simgen", "--mode", "map", "--out", s(&out)]));
    let labels: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "labels"))
        .collect();
    assert_eq!(labels.len(), 50);
    for p in labels {
        let text = fs::read_to_string(&p).unwrap();
        assert!(!text.is_empty());
        assert!(text.lines().all(|l| l == "0" || l == "1"), "{}", p.display());
    }
    assert!(out.join("manifest.txt").exists() && out.join("poses.txt").exists());
}

#[test]
fn simgen_is_reproducible_across_runs_and_threads() {
    let t = tempfile::tempdir().unwrap();
    let spec = short_street(t.path(), 4);
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    ok(lidarprior(&["simgen", s(&spec), "--out", s(&a), "--threads", "1"]));
    ok(lidarprior(&["simgen", s(&spec), "--out", s(&b), "--threads", "4"]));
    assert_eq!(tree(&a), tree(&b));
    let c = t.path().join("c");
    ok(lidarprior(&["simgen", s(&spec), "--out", s(&c), "--seed", "9"]));
    assert_ne!(tree(&a), tree(&c));
}

#[test]
fn simgen_negative_frame_rate_names_field() {
    let t = tempfile::tempdir().unwrap();
    let spec = t.path().join("bad.toml");
    fs::write(&spec, "frame_rate = -10.0\n").unwrap();
    let o = lidarprior(&["simgen", s(&spec), "--out", s(&t.path().join("x"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("frame_rate"), "{}", stderr(&o));
}

#[test]
fn map_exit_codes() {
    let t = tempfile::tempdir().unwrap();
    let spec = short_street(t.path(), 10);
    let frames = t.path().join("frames");
    ok(lidarprior(&["simgen", s(&spec), "--mode", "map", "--out", s(&frames)]));
    let out = t.path().join("m.priormap");
    ok(lidarprior(&["map", s(&frames.join("manifest.txt")), "--out", s(&out)]));
    assert!(fs::read_to_string(&out).unwrap().starts_with("priormap v1"));

    let missing = t.path().join("missing.txt");
    fs::write(&missing, "poses: nowhere.txt\nframes/frame_000000.bin\n").unwrap();
    assert_eq!(code(&lidarprior(&["map", s(&missing), "--out", s(&out)])), 2);

    fs::write(t.path().join("empty_poses.txt"), "").unwrap();
    let empty = t.path().join("empty.txt");
    fs::write(&empty, "poses: empty_poses.txt\n").unwrap();
    assert_eq!(code(&lidarprior(&["map", s(&empty), "--out", s(&out)])), 3);
}

#[test]
fn config_errors_exit_2() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("c.toml");
    fs::write(&cfg, "[mapping.clustering]\neps = -1.0\n").unwrap();
    let o = lidarprior(&["--config", s(&cfg), "map", "m.txt", "--out", "x"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("eps"));
    fs::write(&cfg, "bogus = 1\n").unwrap();
    assert_eq!(code(&lidarprior(&["--config", s(&cfg), "map", "m.txt", "--out", "x"])), 2);
    assert_eq!(code(&lidarprior(&["map", "m.txt", "--out", "x", "--eps", "0"])), 2);
    assert_eq!(code(&lidarprior(&["map", "m.txt", "--out", "x", "--threads", "0"])), 2);
    assert_eq!(code(&lidarprior(&["frobnicate"])), 2);
}

#[test]
fn detect_eval_and_plot() {
    let t = tempfile::tempdir().unwrap();
    let (_, drive, map) = pipeline_inputs(t.path(), 6, &[]);
    let det = t.path().join("det");
    let manifest = drive.join("manifest.txt");
    ok(lidarprior(&["detect", "--map", s(&map), s(&manifest), "--out-dir", s(&det)]));
    let plys: Vec<_> = (0..6).map(|i| det.join(format!("frame_{i:06}.ply"))).collect();
    assert!(plys.iter().all(|p| p.exists()));
    assert!(det.join("stats.tsv").exists() && det.join("stages.tsv").exists());
    assert!(!det.join("timings.tsv").exists());
    let stats = fs::read_to_string(det.join("stats.tsv")).unwrap();
    assert_eq!(stats.lines().count(), 7);

    let o = ok(lidarprior(&["eval", s(&det), s(&drive), "--iou", "0.5"]));
    let table = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 8);
    assert!(rows[0].starts_with("frame\t"));
    assert!(rows[7].starts_with("TOTAL\t"));
    assert!(rows.iter().all(|r| r.split('\t').count() == 13));

    // Labeled PLY to colors keeps the point count.
    let colored = t.path().join("colored.ply");
    ok(lidarprior(&["plot", s(&plys[0]), "--out", s(&colored)]));
    let a = read_ply(&plys[0]).unwrap();
    let b = read_ply(&colored).unwrap();
    assert_eq!(a.cloud.len(), b.cloud.len());
    assert!(b.column("red").is_some());

    // Scan to histogram to SVG.
    let hist = t.path().join("h.vdisp");
    let svg = t.path().join("scan.svg");
    ok(lidarprior(&["plot", s(&drive.join("frame_000000.bin")), "--out", s(&svg), "--histogram-out", s(&hist)]));
    let svg2 = t.path().join("hist.svg");
    ok(lidarprior(&["plot", s(&hist), "--out", s(&svg2)]));
    let text = fs::read_to_string(&svg2).unwrap();
    assert_eq!(text.matches("<polyline").count(), 1);
    assert_eq!(text, fs::read_to_string(&svg).unwrap());
}

#[test]
fn detect_input_errors() {
    let t = tempfile::tempdir().unwrap();
    let (_, drive, map) = pipeline_inputs(t.path(), 2, &[]);
    let manifest = drive.join("manifest.txt");

    let v2 = t.path().join("v2.priormap");
    let text = fs::read_to_string(&map).unwrap().replacen("priormap v1", "priormap v2", 1);
    fs::write(&v2, text).unwrap();
    let o = lidarprior(&["detect", "--map", s(&v2), s(&manifest), "--out-dir", s(&t.path().join("d"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("version"), "{}", stderr(&o));

    let blocker = t.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = lidarprior(&["detect", "--map", s(&map), s(&manifest), "--out-dir", s(&blocker.join("sub"))]);
    assert_eq!(code(&o), 2);

    let o = lidarprior(&["detect", "--map", s(&map), s(&manifest), "--out-dir", s(&t.path().join("d")), "--margin-box", "-1"]);
    assert_eq!(code(&o), 2);
}

fn total_row(table: &str) -> Vec<String> {
    table.lines().last().unwrap().split('\t').map(str::to_string).collect()
}

#[test]
fn eval_examples() {
    let t = tempfile::tempdir().unwrap();
    let spec = short_street(t.path(), 3);
    let truth = t.path().join("truth");
    ok(lidarprior(&["simgen", s(&spec), "--out", s(&truth)]));

    // Perfect detections: survivors are exactly the foreground truth, boxes are the truth boxes.
    let perfect = t.path().join("perfect");
    fs::create_dir(&perfect).unwrap();
    for i in 0..3 {
        let stem = format!("frame_{i:06}");
        let labels = fs::read_to_string(truth.join(format!("{stem}.labels"))).unwrap();
        let mut ply = format!("ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nproperty int stage_rejected\nend_header\n", labels.lines().count());
        for l in labels.lines() {
            ply.push_str(if l == "2" || l == "3" { "0 0 0 -1\n" } else { "0 0 0 0\n" });
        }
        fs::write(perfect.join(format!("{stem}.ply")), ply).unwrap();
        fs::copy(truth.join(format!("{stem}.boxes")), perfect.join(format!("{stem}.boxes"))).unwrap();
    }
    let o = ok(lidarprior(&["eval", s(&perfect), s(&truth)]));
    let row = total_row(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(row[4], "1.000000");
    assert_eq!(row[5], "1.000000");
    assert_eq!(row[10], "1.000000");
    assert_eq!(row[11], "1.000000");

    let empty = t.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let report = t.path().join("report.tsv");
    let o = ok(lidarprior(&["eval", s(&empty), s(&truth), "--out", s(&report)]));
    let row = total_row(&String::from_utf8(o.stdout.clone()).unwrap());
    assert_eq!(row[5], "0.000000");
    assert_eq!(fs::read(&report).unwrap(), o.stdout);

    fs::remove_file(perfect.join("frame_000002.ply")).unwrap();
    assert_eq!(code(&lidarprior(&["eval", s(&perfect), s(&truth)])), 2);
    assert_eq!(code(&lidarprior(&["eval", s(&empty), s(&truth), "--iou", "1.5"])), 2);
}

#[test]
fn plot_examples() {
    let t = tempfile::tempdir().unwrap();
    let empty = t.path().join("empty.vdisp");
    let mut text = String::from("vdisparity v1\nshape 3 4 0.25 horizontal_range\nline none\n");
    text.push_str(&"0 0 0 0\n".repeat(3));
    fs::write(&empty, text).unwrap();
    let svg = t.path().join("e.svg");
    ok(lidarprior(&["plot", s(&empty), "--out", s(&svg)]));
    let out = fs::read_to_string(&svg).unwrap();
    assert!(out.starts_with("<svg") && out.contains("heatmap"));

    let odd = t.path().join("thing.xyz");
    fs::write(&odd, "1 2 3\n").unwrap();
    assert_eq!(code(&lidarprior(&["plot", s(&odd), "--out", s(&svg)])), 2);

    let bare = t.path().join("bare.ply");
    fs::write(&bare, "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n").unwrap();
    assert_eq!(code(&lidarprior(&["plot", s(&bare), "--out", s(&svg)])), 2);
}

#[test]
fn map_and_detect_independent_of_threads() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    fs::create_dir_all(&a).unwrap();
    fs::create_dir_all(&b).unwrap();
    let (_, drive_a, map_a) = pipeline_inputs(&a, 4, &["--threads", "1"]);
    let (_, _, map_b) = pipeline_inputs(&b, 4, &["--threads", "3"]);
    assert_eq!(fs::read(&map_a).unwrap(), fs::read(&map_b).unwrap());
    let (da, db) = (t.path().join("da"), t.path().join("db"));
    let m = drive_a.join("manifest.txt");
    ok(lidarprior(&["--threads", "1", "detect", "--map", s(&map_a), s(&m), "--out-dir", s(&da)]));
    ok(lidarprior(&["--threads", "3", "detect", "--map", s(&map_a), s(&m), "--out-dir", s(&db)]));
    assert_eq!(tree(&da), tree(&db));
}
