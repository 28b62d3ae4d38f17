#![allow(dead_code)]

pub mod graphs;

use std::fs;
use std::path::{Path, PathBuf};

use dejaboom_core::narrative::PlayerLogs;
use dejaboom_core::session::parse_jsonl;
use dejaboom_core::LogRecord;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn read_log(path: impl AsRef<Path>) -> Vec<LogRecord> {
    let path = path.as_ref();
    parse_jsonl(&fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

pub fn script(path: impl AsRef<Path>) -> Vec<String> {
    fs::read_to_string(path.as_ref())
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect()
}

/// `(stem, log)` for every `.jsonl` in `dir`, sorted by name.
pub fn logs_in(dir: &str) -> Vec<(String, Vec<LogRecord>)> {
    let mut paths: Vec<PathBuf> = fs::read_dir(fixtures().join(dir))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| (p.file_stem().unwrap().to_string_lossy().into_owned(), read_log(&p)))
        .collect()
}

pub fn designer_logs() -> Vec<(String, Vec<LogRecord>)> {
    logs_in("designer")
}

pub fn player_logs() -> Vec<PlayerLogs> {
    logs_in("players")
        .into_iter()
        .map(|(player_id, log)| PlayerLogs { player_id, log })
        .collect()
}
