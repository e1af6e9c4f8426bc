#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lidarprior::simgen::SceneSpec;

pub fn lidarprior(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lidarprior"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn ok(o: Output) -> Output {
    assert_eq!(code(&o), 0, "stderr: {}", stderr(&o));
    o
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// The street scene cut to `frames` frames, written as TOML.
pub fn short_street(dir: &Path, frames: usize) -> PathBuf {
    let spec = SceneSpec { frames, ..SceneSpec::street() };
    let path = dir.join("scene.toml");
    fs::write(&path, spec.to_toml()).unwrap();
    path
}

/// Every file under `dir` with its bytes, keyed by relative path.
pub fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Simulates map and drive sequences of `frames` frames and builds the map.
/// Returns (map dir, drive dir, map file).
pub fn pipeline_inputs(root: &Path, frames: usize, extra: &[&str]) -> (PathBuf, PathBuf, PathBuf) {
    let spec = short_street(root, frames);
    let (m, d, map) = (root.join("map_frames"), root.join("drive_frames"), root.join("street.priormap"));
    ok(lidarprior(&[&["simgen", s(&spec), "--mode", "map", "--out", s(&m)], extra].concat()));
    ok(lidarprior(&[&["simgen", s(&spec), "--mode", "drive", "--out", s(&d)], extra].concat()));
    ok(lidarprior(&[&["map", s(&m.join("manifest.txt")), "--out", s(&map)], extra].concat()));
    (m, d, map)
}
