use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lidarprior::cascade::{calibrate_stages, order_stages};
use lidarprior::io::{self, StampedPose};
use lidarprior::simgen::{self, box_metrics, point_metrics, BoxMetrics, PointMetrics, SceneSpec, SimMode, TruthKind};
use lidarprior::{build_prior_map, Detector, ObjectLabel, PriorMap, RejectionCascade};

use crate::config::RunConfig;
use crate::failure::Failure;
use crate::formats::{self, BoxRecord};

fn frame_name(i: usize) -> String {
    format!("frame_{i:06}")
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::io(path, e))
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| Failure::io(path, e))
}

pub fn map(cfg: &RunConfig, manifest: &Path, out: &Path) -> Result<(), Failure> {
    let frames = io::load_frames(&io::read_manifest(manifest)?)?;
    let map = build_prior_map(&frames, &cfg.mapping)?;
    write(out, map.to_text())?;
    eprintln!(
        "map: {} frames, {} planes, {} planar boxes, {} volumetric boxes",
        map.frame_count,
        map.ground_planes.len(),
        map.planar_boxes.len(),
        map.volumetric_boxes.len()
    );
    Ok(())
}

fn label_kind(l: ObjectLabel) -> &'static str {
    match l {
        ObjectLabel::Unknown => "unknown",
        ObjectLabel::Nsso => "nsso",
        ObjectLabel::Dynamic => "dynamic",
    }
}

pub fn detect(cfg: &RunConfig, map_path: &Path, manifest: &Path, out_dir: &Path, timings: bool) -> Result<(), Failure> {
    let map = PriorMap::load(map_path)?;
    let frames = io::load_frames(&io::read_manifest(manifest)?)?;
    create_dir(out_dir)?;
    let params = cfg.detection;
    let stages = RejectionCascade::default_stages(&map, params.ground_margin, params.box_margin);
    let cascade = if cfg.calibration_frames > 0 {
        let n = cfg.calibration_frames.min(frames.len());
        order_stages(calibrate_stages(&stages, &map, &frames.frames()[..n], false)?)?
    } else {
        RejectionCascade::new(stages)?
    };

    let mut order = String::from("position\tmodel\tmargin\tcost\trejection\n");
    for (k, s) in cascade.stages().iter().enumerate() {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| v.to_string());
        let _ = writeln!(
            order,
            "{k}\t{}\t{}\t{}\t{}",
            s.model.label(),
            s.margin,
            opt(s.measured_cost),
            opt(s.measured_rejection)
        );
    }
    write(&out_dir.join("stages.tsv"), order)?;

    let mut stats = String::from("frame\tpoints\tsurvivors");
    for s in cascade.stages() {
        let _ = write!(stats, "\trejected:{}", s.model.label());
    }
    stats.push_str("\tclusters\tunknown\tnsso\tdynamic\tvacated\n");
    let mut times = String::from("frame\tmillis\n");

    let mut detector = Detector::new(map, cascade, params)?;
    for (i, (cloud, pose)) in frames.frames().iter().enumerate() {
        let start = Instant::now();
        let det = detector.process(cloud, pose)?;
        let _ = writeln!(times, "{i}\t{:.3}", start.elapsed().as_secs_f64() * 1e3);
        let r = &det.result;

        let rejected: Vec<i64> = r.rejected_by.iter().map(|&s| s as i64).collect();
        let mut track = vec![-1i64; r.input_points];
        for c in &r.clusters {
            for &p in &c.points {
                track[p] = c.track_id.map_or(-1, |t| t as i64);
            }
        }
        let labels = r.point_labels();
        let name = frame_name(i);
        io::write_ply(
            &out_dir.join(format!("{name}.ply")),
            cloud,
            &[("stage_rejected", &rejected), ("fg_label", &labels), ("track_id", &track)],
        )?;
        let boxes: Vec<BoxRecord> = r
            .clusters
            .iter()
            .map(|c| BoxRecord { kind: label_kind(c.label).into(), id: c.track_id.unwrap_or(0), bbox: c.bbox })
            .collect();
        write(&out_dir.join(format!("{name}.boxes")), formats::format_boxes(&boxes))?;

        let count = |l: ObjectLabel| r.clusters.iter().filter(|c| c.label == l).count();
        let _ = write!(stats, "{i}\t{}\t{}", r.input_points, r.survivors.len());
        for n in &r.stage_rejected {
            let _ = write!(stats, "\t{n}");
        }
        let _ = writeln!(
            stats,
            "\t{}\t{}\t{}\t{}\t{}",
            r.clusters.len(),
            count(ObjectLabel::Unknown),
            count(ObjectLabel::Nsso),
            count(ObjectLabel::Dynamic),
            det.vacated.len()
        );
    }
    write(&out_dir.join("stats.tsv"), stats)?;
    if timings {
        write(&out_dir.join("timings.tsv"), times)?;
    }
    Ok(())
}

pub fn simgen(spec_path: Option<&Path>, seed: Option<u64>, out_dir: &Path, mode: SimMode) -> Result<(), Failure> {
    let mut spec = match spec_path {
        Some(p) => SceneSpec::from_toml(&fs::read_to_string(p).map_err(|e| Failure::io(p, e))?)?,
        None => SceneSpec::street(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate()?;
    let (frames, truth) = simgen::generate_sequence(&spec, mode)?;
    create_dir(out_dir)?;
    let mut names = Vec::with_capacity(frames.len());
    let mut poses = Vec::with_capacity(frames.len());
    for (i, (cloud, pose)) in frames.frames().iter().enumerate() {
        let name = frame_name(i);
        write(&out_dir.join(format!("{name}.bin")), io::encode_kitti_bin(cloud))?;
        write(&out_dir.join(format!("{name}.labels")), formats::format_labels(&truth.labels[i]))?;
        let boxes: Vec<BoxRecord> = truth.boxes[i]
            .iter()
            .map(|b| BoxRecord {
                kind: match b.kind {
                    TruthKind::Nsso => "nsso",
                    TruthKind::Dynamic => "dynamic",
                }
                .into(),
                id: b.object as u64,
                bbox: b.bbox,
            })
            .collect();
        write(&out_dir.join(format!("{name}.boxes")), formats::format_boxes(&boxes))?;
        names.push(format!("{name}.bin"));
        poses.push(StampedPose { timestamp: cloud.timestamp, pose: *pose });
    }
    write(&out_dir.join("poses.txt"), io::format_pose_track(&poses))?;
    write(&out_dir.join("manifest.txt"), io::format_manifest("poses.txt", &names))?;
    write(&out_dir.join("scene.toml"), spec.to_toml())?;
    Ok(())
}

fn files_with_ext(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, Failure> {
    let entries = fs::read_dir(dir).map_err(|e| Failure::io(dir, e))?;
    let mut out = Vec::new();
    for e in entries {
        let p = e.map_err(|e| Failure::io(dir, e))?.path();
        if p.extension().and_then(|x| x.to_str()) == Some(ext) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.6}")
    }
}

fn metrics_row(name: &str, p: &PointMetrics, b: &BoxMetrics) -> String {
    format!(
        "{name}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
        p.true_positives,
        p.false_positives,
        p.false_negatives,
        num(p.precision()),
        num(p.recall()),
        num(p.f1()),
        b.predicted,
        b.truth,
        b.detected,
        num(b.precision()),
        num(b.recall()),
        num(b.mean_iou())
    )
}

/// Per-frame and total metrics as a TSV table. Predicted foreground points
/// are those no stage rejected; predicted boxes are the NSSO and Dynamic
/// ones. An empty detection directory scores as no detections.
pub fn eval(detections: &Path, truth: &Path, iou: f64) -> Result<String, Failure> {
    if !(iou > 0.0 && iou <= 1.0) {
        return Err(Failure::input(format!("--iou must be in (0, 1], got {iou}")));
    }
    let truth_frames = files_with_ext(truth, "labels")?;
    let det_frames = files_with_ext(detections, "ply")?;
    if !det_frames.is_empty() && det_frames.len() != truth_frames.len() {
        return Err(Failure::input(format!(
            "{} detection frames but {} truth frames",
            det_frames.len(),
            truth_frames.len()
        )));
    }
    let mut table = String::from(
        "frame\ttp\tfp\tfn\tprecision\trecall\tf1\tboxes_pred\tboxes_truth\tboxes_matched\tbox_precision\tbox_recall\tmean_iou\n",
    );
    let (mut pt, mut bt) = (PointMetrics::default(), BoxMetrics::default());
    for (i, tpath) in truth_frames.iter().enumerate() {
        let labels = formats::read_labels(tpath)?;
        let truth_boxes: Vec<_> = formats::read_boxes(&tpath.with_extension("boxes"))?.into_iter().map(|b| b.bbox).collect();
        let (mask, pred_boxes) = match det_frames.get(i) {
            Some(dpath) => {
                let ply = io::read_ply(dpath)?;
                let rejected = ply
                    .column("stage_rejected")
                    .ok_or_else(|| Failure::input(format!("{}: no stage_rejected column", dpath.display())))?;
                let mask: Vec<bool> = rejected.iter().map(|&s| s < 0.0).collect();
                let boxes: Vec<_> = formats::read_boxes(&dpath.with_extension("boxes"))?
                    .into_iter()
                    .filter(|b| b.kind != "unknown")
                    .map(|b| b.bbox)
                    .collect();
                (mask, boxes)
            }
            None => (vec![false; labels.len()], Vec::new()),
        };
        let p = point_metrics(&mask, &labels)
            .map_err(|e| Failure::input(format!("{}: {e}", tpath.display())))?;
        let b = box_metrics(&pred_boxes, &truth_boxes, iou)?;
        let stem = tpath.file_stem().and_then(|s| s.to_str()).unwrap_or("?");
        table.push_str(&metrics_row(stem, &p, &b));
        pt.merge(&p);
        bt.merge(&b);
    }
    table.push_str(&metrics_row("TOTAL", &pt, &bt));
    Ok(table)
}
