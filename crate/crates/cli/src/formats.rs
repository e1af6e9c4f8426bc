//! Text files exchanged between subcommands.
//!
//! * boxes: `boxes v1 <n>` then `<kind> <id> cx cy cz yaw hx hy hz` per box.
//! * labels: one integer truth code per point and line.
//! * histogram: `vdisparity v1`, a `shape rows bins delta_max model` line, a
//!   `line slope intercept tolerance` (or `line none`) line, then one row of
//!   bin counts per layer.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use lidarprior::ground::{DisparityModel, RoadLine, VDisparityHistogram};
use lidarprior::simgen::TruthLabel;
use lidarprior::{OrientedBox, Point3};

use crate::failure::Failure;

#[derive(Debug, Clone, PartialEq)]
pub struct BoxRecord {
    /// `dynamic`, `nsso` or `unknown`.
    pub kind: String,
    pub id: u64,
    pub bbox: OrientedBox,
}

pub fn format_boxes(boxes: &[BoxRecord]) -> String {
    let mut s = format!("boxes v1 {}\n", boxes.len());
    for b in boxes {
        let (c, h) = (b.bbox.center, b.bbox.half_extents);
        let _ = writeln!(s, "{} {} {} {} {} {} {} {} {}", b.kind, b.id, c.x, c.y, c.z, b.bbox.yaw, h.x, h.y, h.z);
    }
    s
}

pub fn parse_boxes(text: &str, what: &str) -> Result<Vec<BoxRecord>, Failure> {
    let err = |line: usize, msg: &str| Failure::input(format!("{what}:{line}: {msg}"));
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty box file"))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 3 || head[0] != "boxes" {
        return Err(err(1, "expected `boxes v1 <count>`"));
    }
    if head[1] != "v1" {
        return Err(err(1, &format!("unsupported boxes version `{}`, supported `v1`", head[1])));
    }
    let n: usize = head[2].parse().map_err(|_| err(1, "bad box count"))?;
    let mut out = Vec::with_capacity(n);
    for (ln, line) in lines {
        if line.is_empty() {
            continue;
        }
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 9 {
            return Err(err(ln, &format!("expected 9 fields, found {}", t.len())));
        }
        let id: u64 = t[1].parse().map_err(|_| err(ln, "bad box id"))?;
        let v: Vec<f64> = t[2..]
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| err(ln, "bad number"))?;
        if v.iter().any(|x| !x.is_finite()) || v[4..].iter().any(|&h| h < 0.0) {
            return Err(err(ln, "non-finite value or negative extent"));
        }
        out.push(BoxRecord {
            kind: t[0].to_string(),
            id,
            bbox: OrientedBox {
                center: Point3::new(v[0], v[1], v[2]),
                yaw: v[3],
                half_extents: Point3::new(v[4], v[5], v[6]),
                margin: 0.0,
            },
        });
    }
    if out.len() != n {
        return Err(err(0, &format!("declared {n} boxes, found {}", out.len())));
    }
    Ok(out)
}

pub fn read_boxes(path: &Path) -> Result<Vec<BoxRecord>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    parse_boxes(&text, &path.display().to_string())
}

pub fn format_labels(labels: &[TruthLabel]) -> String {
    let mut s = String::with_capacity(2 * labels.len());
    for l in labels {
        let _ = writeln!(s, "{}", l.code());
    }
    s
}

pub fn read_labels(path: &Path) -> Result<Vec<TruthLabel>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<u8>()
                .ok()
                .and_then(TruthLabel::from_code)
                .ok_or_else(|| Failure::input(format!("{}:{}: bad label `{}`", path.display(), i + 1, l.trim())))
        })
        .collect()
}

fn model_name(m: DisparityModel) -> &'static str {
    match m {
        DisparityModel::HorizontalRange => "horizontal_range",
        DisparityModel::Forward => "forward",
    }
}

pub fn format_histogram(h: &VDisparityHistogram, line: Option<&RoadLine>) -> String {
    let mut s = String::from("vdisparity v1\n");
    let _ = writeln!(s, "shape {} {} {} {}", h.rows, h.n_bins(), h.delta_max(), model_name(h.model));
    match line {
        Some(l) => {
            let _ = writeln!(s, "line {} {} {}", l.slope, l.intercept, l.tolerance);
        }
        None => s.push_str("line none\n"),
    }
    for r in 0..h.rows {
        let row: Vec<String> = h.row(r).iter().map(u32::to_string).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn parse_histogram(text: &str, what: &str) -> Result<(VDisparityHistogram, Option<RoadLine>), Failure> {
    let err = |line: usize, msg: String| Failure::input(format!("{what}:{line}: {msg}"));
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut next = |expect: &str| lines.next().ok_or_else(|| err(0, format!("truncated before {expect}")));
    let (ln, magic) = next("header")?;
    match magic.split_whitespace().collect::<Vec<_>>()[..] {
        ["vdisparity", "v1"] => {}
        ["vdisparity", v] => return Err(err(ln, format!("unsupported vdisparity version `{v}`, supported `v1`"))),
        _ => return Err(err(ln, "expected `vdisparity v1`".into())),
    }
    let (ln, shape) = next("shape")?;
    let t: Vec<&str> = shape.split_whitespace().collect();
    if t.len() != 5 || t[0] != "shape" {
        return Err(err(ln, "expected `shape rows bins delta_max model`".into()));
    }
    let rows: usize = t[1].parse().map_err(|_| err(ln, "bad row count".into()))?;
    let bins: usize = t[2].parse().map_err(|_| err(ln, "bad bin count".into()))?;
    let dmax: f64 = t[3].parse().map_err(|_| err(ln, "bad delta_max".into()))?;
    let model = match t[4] {
        "horizontal_range" => DisparityModel::HorizontalRange,
        "forward" => DisparityModel::Forward,
        m => return Err(err(ln, format!("unknown disparity model `{m}`"))),
    };
    let mut h = VDisparityHistogram::empty(rows, bins, dmax, model).map_err(|e| err(ln, e.to_string()))?;
    let (ln, line) = next("line")?;
    let t: Vec<&str> = line.split_whitespace().collect();
    let road = match t[..] {
        ["line", "none"] => None,
        ["line", a, b, c] => {
            let p = |s: &str| s.parse::<f64>().map_err(|_| err(ln, format!("bad number `{s}`")));
            Some(RoadLine { slope: p(a)?, intercept: p(b)?, tolerance: p(c)? })
        }
        _ => return Err(err(ln, "expected `line slope intercept tolerance` or `line none`".into())),
    };
    for r in 0..rows {
        let (ln, row) = next("row")?;
        let counts: Vec<u32> = row
            .split_whitespace()
            .map(|s| s.parse::<u32>())
            .collect::<Result<_, _>>()
            .map_err(|_| err(ln, "bad count".into()))?;
        if counts.len() != bins {
            return Err(err(ln, format!("expected {bins} counts, found {}", counts.len())));
        }
        h.counts[r * bins..(r + 1) * bins].copy_from_slice(&counts);
    }
    Ok((h, road))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boxes_round_trip() {
        let b = vec![
            BoxRecord {
                kind: "dynamic".into(),
                id: 3,
                bbox: OrientedBox::new(Point3::new(1.5, -2.0, 0.25), 0.3, Point3::new(2.3, 1.0, 1.0)),
            },
            BoxRecord {
                kind: "nsso".into(),
                id: 0,
                bbox: OrientedBox::new(Point3::new(0.1, 0.2, 0.3), -1.1, Point3::new(0.5, 0.5, 0.5)),
            },
        ];
        assert_eq!(parse_boxes(&format_boxes(&b), "t").unwrap(), b);
        assert!(parse_boxes("boxes v1 0\n", "t").unwrap().is_empty());
    }

    #[test]
    fn boxes_reject_bad_input() {
        assert!(parse_boxes("", "t").is_err());
        assert!(parse_boxes("boxes v2 0\n", "t").is_err());
        assert!(parse_boxes("boxes v1 1\n", "t").is_err());
        assert!(parse_boxes("boxes v1 1\nnsso 0 1 2 3 0 1 1\n", "t").is_err());
        assert!(parse_boxes("boxes v1 1\nnsso 0 1 2 3 0 1 -1 1\n", "t").is_err());
    }

    #[test]
    fn histogram_round_trip() {
        let mut h = VDisparityHistogram::empty(3, 4, 0.5, DisparityModel::HorizontalRange).unwrap();
        h.counts = vec![0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11];
        let line = RoadLine { slope: 0.01, intercept: 0.2, tolerance: 0.1875 };
        let (g, l) = parse_histogram(&format_histogram(&h, Some(&line)), "t").unwrap();
        assert_eq!(g.counts, h.counts);
        assert_eq!(g.bin_edges, h.bin_edges);
        assert_eq!(l, Some(line));
        let (_, l) = parse_histogram(&format_histogram(&h, None), "t").unwrap();
        assert_eq!(l, None);
    }

    #[test]
    fn histogram_rejects_short_rows() {
        assert!(parse_histogram("vdisparity v1\nshape 2 3 1 forward\nline none\n1 2 3\n", "t").is_err());
        assert!(parse_histogram("vdisparity v1\nshape 1 3 1 forward\nline none\n1 2\n", "t").is_err());
        assert!(parse_histogram("vdisparity v9\n", "t").is_err());
    }
}
