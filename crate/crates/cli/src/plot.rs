use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use lidarprior::ground::{build_depth_image, compute_vdisparity, fit_road_line, RoadLine, VDisparityHistogram};
use lidarprior::io;
use lidarprior::priormap::VDisparityConfig;
use lidarprior::simgen::SensorSpec;

use crate::failure::Failure;
use crate::formats;

const CELL_W: f64 = 8.0;
const CELL_H: f64 = 12.0;

/// Heat map of the histogram, lowest layer at the bottom, with the road line
/// drawn over it when there is one.
pub fn histogram_svg(h: &VDisparityHistogram, line: Option<&RoadLine>) -> String {
    let (w, ht) = (h.n_bins() as f64 * CELL_W, h.rows as f64 * CELL_H);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{ht}" viewBox="0 0 {w} {ht}">"#
    );
    let _ = writeln!(s, r#"<clipPath id="area"><rect x="0" y="0" width="{w}" height="{ht}"/></clipPath>"#);
    let _ = writeln!(s, r#"<rect class="background" x="0" y="0" width="{w}" height="{ht}" fill="white"/>"#);
    let max = h.counts.iter().copied().max().unwrap_or(0);
    s.push_str("<g class=\"heatmap\">\n");
    if max > 0 {
        let norm = (1.0 + max as f64).ln();
        for r in 0..h.rows {
            let y = (h.rows - 1 - r) as f64 * CELL_H;
            for (b, &c) in h.row(r).iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let t = (1.0 + c as f64).ln() / norm;
                let shade = (255.0 * (1.0 - t)).round() as u8;
                let _ = writeln!(
                    s,
                    r#"<rect x="{}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="rgb({shade},{shade},255)"/>"#,
                    b as f64 * CELL_W
                );
            }
        }
    }
    s.push_str("</g>\n");
    if let (Some(l), true) = (line, h.rows > 0) {
        let px = |row: usize| l.at(row) / h.bin_width() * CELL_W;
        let py = |row: usize| (h.rows - 1 - row) as f64 * CELL_H + 0.5 * CELL_H;
        let pts: Vec<String> = (0..h.rows).map(|r| format!("{:.3},{:.3}", px(r), py(r))).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="road-line" clip-path="url(#area)" points="{}" fill="none" stroke="red" stroke-width="2"/>"#,
            pts.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}

fn color(label: i64) -> [u8; 3] {
    match label {
        0 => [160, 160, 160],
        1 => [230, 200, 40],
        2 => [255, 255, 255],
        3 => [40, 90, 230],
        4 => [230, 40, 40],
        n => {
            let h = (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            [(h >> 40) as u8, (h >> 48) as u8, (h >> 56) as u8]
        }
    }
}

/// PLY with `x y z label red green blue`.
pub fn colored_ply(data: &io::PlyData, column: &str) -> Result<String, Failure> {
    let labels = data
        .column(column)
        .ok_or_else(|| Failure::input(format!("no `{column}` column")))?;
    let mut s = String::from("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", data.cloud.len());
    s.push_str("property float x\nproperty float y\nproperty float z\nproperty int label\n");
    s.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n");
    for (p, &l) in data.cloud.points.iter().zip(labels) {
        let l = l as i64;
        let [r, g, b] = color(l);
        let _ = writeln!(s, "{} {} {} {l} {r} {g} {b}", p.x, p.y, p.z);
    }
    Ok(s)
}

const LABEL_COLUMNS: &[&str] = &["fg_label", "label", "stage_rejected"];

/// Renders `input` by kind: a `.vdisp` histogram or a `.bin` scan to SVG, a
/// labeled `.ply` to a colored PLY.
pub fn plot(input: &Path, out: &Path, vdisp: &VDisparityConfig, histogram_out: Option<&Path>) -> Result<(), Failure> {
    let ext = input.extension().and_then(|e| e.to_str()).unwrap_or("");
    let output = match ext {
        "vdisp" => {
            let text = fs::read_to_string(input).map_err(|e| Failure::io(input, e))?;
            let (h, line) = formats::parse_histogram(&text, &input.display().to_string())?;
            histogram_svg(&h, line.as_ref())
        }
        "bin" => {
            let cloud = io::load_cloud(input, io::CloudFormat::KittiBin)?;
            let layers: Vec<f64> = if vdisp.layer_angles_deg.is_empty() {
                SensorSpec::default().layer_angles()
            } else {
                vdisp.layer_angles_deg.iter().map(|d| d.to_radians()).collect()
            };
            let img = build_depth_image(&cloud, &layers, vdisp.azimuth_bin_deg.to_radians())?;
            let h = compute_vdisparity(&img, vdisp.n_bins, vdisp.delta_max, vdisp.model)?;
            let line = fit_road_line(&h, &vdisp.line).ok();
            if let Some(p) = histogram_out {
                fs::write(p, formats::format_histogram(&h, line.as_ref())).map_err(|e| Failure::io(p, e))?;
            }
            histogram_svg(&h, line.as_ref())
        }
        "ply" => {
            let data = io::read_ply(input)?;
            let column = LABEL_COLUMNS
                .iter()
                .find(|c| data.column(c).is_some())
                .ok_or_else(|| {
                    Failure::input(format!("{}: unknown input kind, PLY has no label column", input.display()))
                })?;
            colored_ply(&data, column)?
        }
        _ => {
            return Err(Failure::input(format!(
                "{}: unknown input kind (expected .vdisp, .bin or labeled .ply)",
                input.display()
            )))
        }
    };
    fs::write(out, output).map_err(|e| Failure::io(out, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use lidarprior::ground::DisparityModel;

    #[test]
    fn empty_histogram_has_no_cells() {
        let h = VDisparityHistogram::empty(4, 10, 0.25, DisparityModel::HorizontalRange).unwrap();
        let svg = histogram_svg(&h, None);
        assert!(svg.contains("heatmap"));
        assert!(!svg.contains("fill=\"rgb("));
        assert!(!svg.contains("polyline"));
    }

    #[test]
    fn line_drawn_once() {
        let mut h = VDisparityHistogram::empty(4, 10, 0.25, DisparityModel::HorizontalRange).unwrap();
        h.counts[3] = 5;
        let l = RoadLine { slope: 0.01, intercept: 0.05, tolerance: 0.03 };
        let svg = histogram_svg(&h, Some(&l));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("fill=\"rgb(").count(), 1);
    }

    #[test]
    fn known_labels_have_distinct_colors() {
        let c: Vec<_> = (0..5).map(color).collect();
        for i in 0..5 {
            for j in 0..i {
                assert_ne!(c[i], c[j]);
            }
        }
    }
}
