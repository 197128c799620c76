#![allow(dead_code)]

pub mod enumeration;

use std::path::Path;

use zimage::model::reference;

/// The reference scene as a scenario file inside `dir`.
pub fn reference_scenario_file(dir: &Path, q_foreground: f64) -> std::path::PathBuf {
    let path = dir.join("scene.txt");
    std::fs::write(&path, zimage::io::scenario::reference_scenario_text(q_foreground)).unwrap();
    path
}

pub fn reference_len() -> usize {
    reference::LENGTH
}
