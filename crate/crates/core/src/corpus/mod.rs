//! Reference oracles and the in-language corpus that is checked against them.

pub mod kz1;
pub mod monoid;
pub mod transcript;

use std::path::PathBuf;

/// Directory holding `sessions/`, `programs/` and `families/`.
///
/// `CLOSUREVM_CORPUS` wins; otherwise the corpus checked in next to the
/// workspace, falling back to `./corpus`.
pub fn corpus_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os("CLOSUREVM_CORPUS") {
        return PathBuf::from(dir);
    }
    let bundled = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    if let Ok(dir) = bundled.canonicalize() {
        return dir;
    }
    PathBuf::from("corpus")
}

pub fn program_path(name: &str) -> PathBuf {
    corpus_dir().join("programs").join(format!("{name}.fl"))
}

/// Session transcripts in name order.
pub fn session_paths() -> std::io::Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(corpus_dir().join("sessions"))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    paths.sort();
    Ok(paths)
}
