//! Point-cloud, pose-track and manifest files.
//!
//! * `kitti_bin`: headerless little-endian `f32` quadruples `x y z intensity`.
//! * `ply_ascii`: a single `vertex` element with `x y z` and optional
//!   `intensity`; further scalar vertex properties are carried through as
//!   extra columns so labeled outputs can be read back.
//! * pose track: `timestamp tx ty tz yaw pitch roll` per line.
//! * manifest: a `poses: <path>` header followed by one cloud path per line.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::cloud::{FrameSequence, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::{Point3, Pose};

const KITTI_RECORD: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    KittiBin,
    PlyAscii,
}

impl FromStr for CloudFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kitti_bin" => Ok(CloudFormat::KittiBin),
            "ply_ascii" => Ok(CloudFormat::PlyAscii),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

impl CloudFormat {
    /// Guess from the file extension (`.bin` or `.ply`).
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => Ok(CloudFormat::KittiBin),
            Some("ply") => Ok(CloudFormat::PlyAscii),
            _ => Err(Error::UnknownFormat(path.display().to_string())),
        }
    }
}

pub fn load_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud> {
    match format {
        CloudFormat::KittiBin => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            decode_kitti_bin(&bytes)
        }
        CloudFormat::PlyAscii => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Ok(parse_ply(&text)?.cloud)
        }
    }
}

pub fn save_cloud(path: &Path, cloud: &PointCloud, format: CloudFormat) -> Result<()> {
    let bytes = match format {
        CloudFormat::KittiBin => encode_kitti_bin(cloud),
        CloudFormat::PlyAscii => format_ply(cloud, &[]).into_bytes(),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn decode_kitti_bin(bytes: &[u8]) -> Result<PointCloud> {
    let whole = bytes.len() / KITTI_RECORD * KITTI_RECORD;
    if whole != bytes.len() {
        return Err(Error::parse(
            "kitti_bin",
            whole,
            format!(
                "truncated record: {} trailing byte(s) after {} complete records",
                bytes.len() - whole,
                whole / KITTI_RECORD
            ),
        ));
    }
    let mut points = Vec::with_capacity(whole / KITTI_RECORD);
    let mut intensity = Vec::with_capacity(whole / KITTI_RECORD);
    for rec in bytes.chunks_exact(KITTI_RECORD) {
        let f = |k: usize| f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().unwrap()) as f64;
        points.push(Point3::new(f(0), f(1), f(2)));
        intensity.push(f(3));
    }
    Ok(PointCloud {
        points,
        intensity: Some(intensity),
        ..Default::default()
    })
}

/// Coordinates are narrowed to `f32`; missing intensity is written as 0.
pub fn encode_kitti_bin(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * KITTI_RECORD);
    for (i, p) in cloud.points.iter().enumerate() {
        let inten = cloud.intensity.as_ref().map_or(0.0, |v| v[i]);
        for v in [p.x, p.y, p.z, inten] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

/// A parsed PLY vertex table.
#[derive(Debug, Clone, PartialEq)]
pub struct PlyData {
    pub cloud: PointCloud,
    /// Scalar vertex properties other than `x y z intensity`, in file order.
    pub extra: Vec<(String, Vec<f64>)>,
}

impl PlyData {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.extra
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }
}

const PLY_SCALARS: &[&str] = &[
    "char", "uchar", "short", "ushort", "int", "uint", "float", "double", "int8", "uint8", "int16",
    "uint16", "int32", "uint32", "float32", "float64",
];

pub fn read_ply(path: &Path) -> Result<PlyData> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&text)
}

pub fn parse_ply(text: &str) -> Result<PlyData> {
    let err = |line: usize, msg: String| Error::parse("ply_ascii", line, msg);
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(err(1, "missing `ply` magic".into())),
    }
    let mut n_vertices: Option<usize> = None;
    let mut props: Vec<String> = Vec::new();
    let mut saw_format = false;
    let mut header_done = false;
    for (ln, line) in lines.by_ref() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] => continue,
            ["comment", ..] | ["obj_info", ..] => continue,
            ["format", "ascii", "1.0"] => saw_format = true,
            ["format", other, ..] => return Err(err(ln, format!("unsupported format `{other}`"))),
            ["element", "vertex", n] => {
                if n_vertices.is_some() {
                    return Err(err(ln, "duplicate vertex element".into()));
                }
                n_vertices = Some(n.parse().map_err(|_| err(ln, format!("bad vertex count `{n}`")))?);
            }
            ["element", name, ..] => return Err(err(ln, format!("unsupported element `{name}`"))),
            ["property", "list", ..] => return Err(err(ln, "list properties are not supported".into())),
            ["property", ty, name] => {
                if n_vertices.is_none() {
                    return Err(err(ln, "property before element".into()));
                }
                if !PLY_SCALARS.contains(ty) {
                    return Err(err(ln, format!("unknown property type `{ty}`")));
                }
                if props.iter().any(|p| p == name) {
                    return Err(err(ln, format!("duplicate property `{name}`")));
                }
                props.push(name.to_string());
            }
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => return Err(err(ln, format!("unexpected header line `{line}`"))),
        }
    }
    if !header_done {
        return Err(err(0, "missing end_header".into()));
    }
    if !saw_format {
        return Err(err(0, "missing `format ascii 1.0`".into()));
    }
    let n = n_vertices.ok_or_else(|| err(0, "missing vertex element".into()))?;
    let col = |name: &str| props.iter().position(|p| p == name);
    let (ix, iy, iz) = match (col("x"), col("y"), col("z")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(err(0, "vertex element needs x, y and z".into())),
    };
    let ii = col("intensity");

    let mut values = vec![Vec::with_capacity(n); props.len()];
    let mut read = 0;
    for (ln, line) in lines {
        if line.is_empty() {
            continue;
        }
        if read == n {
            return Err(err(ln, "more vertex lines than declared".into()));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != props.len() {
            return Err(err(ln, format!("expected {} values, found {}", props.len(), toks.len())));
        }
        for (k, t) in toks.iter().enumerate() {
            let v: f64 = t.parse().map_err(|_| err(ln, format!("bad number `{t}`")))?;
            values[k].push(v);
        }
        read += 1;
    }
    if read != n {
        return Err(err(0, format!("declared {n} vertices, found {read}")));
    }

    let points = (0..n)
        .map(|r| Point3::new(values[ix][r], values[iy][r], values[iz][r]))
        .collect();
    let intensity = ii.map(|k| values[k].clone());
    let extra = props
        .iter()
        .enumerate()
        .filter(|(k, _)| ![Some(ix), Some(iy), Some(iz), ii].contains(&Some(*k)))
        .map(|(k, name)| (name.clone(), std::mem::take(&mut values[k])))
        .collect();
    Ok(PlyData {
        cloud: PointCloud {
            points,
            intensity,
            ..Default::default()
        },
        extra,
    })
}

/// ASCII PLY with optional integer columns appended after the coordinates.
pub fn format_ply(cloud: &PointCloud, int_columns: &[(&str, &[i64])]) -> String {
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", cloud.len());
    s.push_str("property float x\nproperty float y\nproperty float z\n");
    if cloud.intensity.is_some() {
        s.push_str("property float intensity\n");
    }
    for (name, col) in int_columns {
        debug_assert_eq!(col.len(), cloud.len());
        let _ = writeln!(s, "property int {name}");
    }
    s.push_str("end_header\n");
    for (i, p) in cloud.points.iter().enumerate() {
        let _ = write!(s, "{} {} {}", p.x, p.y, p.z);
        if let Some(v) = &cloud.intensity {
            let _ = write!(s, " {}", v[i]);
        }
        for (_, col) in int_columns {
            let _ = write!(s, " {}", col[i]);
        }
        s.push('\n');
    }
    s
}

pub fn write_ply(path: &Path, cloud: &PointCloud, int_columns: &[(&str, &[i64])]) -> Result<()> {
    fs::write(path, format_ply(cloud, int_columns)).map_err(|e| Error::io(path, e))
}

/// One entry of a pose track file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StampedPose {
    pub timestamp: f64,
    pub pose: Pose,
}

pub fn parse_pose_track(text: &str) -> Result<Vec<StampedPose>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse("pose track", i + 1, e.to_string()))?;
        if vals.len() != 7 {
            return Err(Error::parse(
                "pose track",
                i + 1,
                format!("expected 7 fields, found {}", vals.len()),
            ));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse("pose track", i + 1, "non-finite value"));
        }
        out.push(StampedPose {
            timestamp: vals[0],
            pose: Pose::new(Point3::new(vals[1], vals[2], vals[3]), vals[4], vals[5], vals[6]),
        });
    }
    Ok(out)
}

pub fn read_pose_track(path: &Path) -> Result<Vec<StampedPose>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pose_track(&text)
}

pub fn format_pose_track(poses: &[StampedPose]) -> String {
    let mut s = String::new();
    for sp in poses {
        let p = &sp.pose;
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {}",
            sp.timestamp, p.translation.x, p.translation.y, p.translation.z, p.yaw, p.pitch, p.roll
        );
    }
    s
}

/// Cloud paths plus the pose track they are registered with. Relative paths
/// are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub poses: PathBuf,
    pub clouds: Vec<PathBuf>,
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<Manifest> {
    let mut poses = None;
    let mut clouds = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("poses:") {
            if poses.is_some() {
                return Err(Error::parse("manifest", i + 1, "duplicate `poses:` header"));
            }
            poses = Some(base.join(rest.trim()));
        } else {
            clouds.push(base.join(line));
        }
    }
    let poses = poses.ok_or_else(|| Error::parse("manifest", 0, "missing `poses:` header"))?;
    Ok(Manifest { poses, clouds })
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}

pub fn format_manifest(poses: &str, clouds: &[String]) -> String {
    let mut s = format!("poses: {poses}\n");
    for c in clouds {
        s.push_str(c);
        s.push('\n');
    }
    s
}

/// Loads every cloud of a manifest and pairs it with its pose. Frame ids are
/// the manifest order; timestamps come from the pose track.
pub fn load_frames(manifest: &Manifest) -> Result<FrameSequence> {
    let poses = read_pose_track(&manifest.poses)?;
    if poses.len() != manifest.clouds.len() {
        return Err(Error::parse(
            "manifest",
            0,
            format!(
                "{} cloud paths but {} poses in {}",
                manifest.clouds.len(),
                poses.len(),
                manifest.poses.display()
            ),
        ));
    }
    let frames = manifest
        .clouds
        .iter()
        .zip(&poses)
        .enumerate()
        .map(|(i, (path, sp))| {
            let mut cloud = load_cloud(path, CloudFormat::from_path(path)?)?;
            cloud.frame_id = i as u64;
            cloud.timestamp = sp.timestamp;
            Ok((cloud, sp.pose))
        })
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames).map_err(|e| Error::parse("pose track", 0, e.to_string()))
}
