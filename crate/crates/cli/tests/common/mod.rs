#![allow(dead_code)]

use serde_json::Value;
use std::path::Path;
use std::process::Command;

pub struct Run {
    pub code: i32,
    pub summary: Value,
    pub stderr: String,
}

pub fn teegen(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_teegen"))
        .args(args)
        .output()
        .expect("spawn teegen");
    let stdout = String::from_utf8_lossy(&out.stdout);
    Run {
        code: out.status.code().unwrap_or(-1),
        summary: serde_json::from_str(&stdout).unwrap_or(Value::Null),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Small raster so debug builds stay quick.
pub fn small_config(dir: &Path, tissue: f64) -> std::path::PathBuf {
    let path = dir.join(format!("settings_{tissue}.json"));
    let cfg = serde_json::json!({
        "raster": {"width": 96, "height": 96, "spacing_mm": 1.4},
        "palette": teegen_core::pseudo::PaletteSpec::phantom_with(tissue, 0.05)
    });
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

/// Every file under `dir`, relative path and contents, sorted.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                walk(base, &path, out);
            } else if path.file_name().unwrap() != "summary.json" {
                let rel = path.strip_prefix(base).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
