//! On-disk sessions: `<id>.json` holds the mutable session state and
//! `<id>.jsonl` the append-only log.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::gateway::HistoryWindow;
use crate::world::WorldState;

use super::{LogRecord, PlayerMetadata, Session, SessionStatus};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("session `{0}` not found")]
    NotFound(String),
    #[error("session `{id}` is corrupt at record {seq}: {message}")]
    Corrupt { id: String, seq: u64, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Serialize, Deserialize)]
struct SessionFile {
    id: String,
    player: PlayerMetadata,
    world: WorldState,
    history: HistoryWindow,
    status: SessionStatus,
    created: u64,
    log_len: usize,
}

#[derive(Clone, Debug)]
pub struct SessionStore {
    dir: PathBuf,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl SessionStore {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn meta_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    pub fn log_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    /// Append records not yet on disk, then rewrite the session file.
    pub fn persist(&self, session: &Session) -> Result<(), StoreError> {
        if !valid_id(&session.id) {
            return Err(StoreError::NotFound(session.id.clone()));
        }
        let on_disk = match fs::read_to_string(self.meta_path(&session.id)) {
            Ok(text) => serde_json::from_str::<SessionFile>(&text)
                .map(|f| f.log_len)
                .unwrap_or(0),
            Err(e) if e.kind() == io::ErrorKind::NotFound => 0,
            Err(e) => return Err(e.into()),
        };
        let fresh = session.log.get(on_disk..).unwrap_or_default();
        if !fresh.is_empty() || on_disk == 0 {
            let mut out = OpenOptions::new()
                .create(true)
                .append(true)
                .open(self.log_path(&session.id))?;
            let mut buf = String::new();
            for r in fresh {
                buf.push_str(&r.to_json_line());
                buf.push('\n');
            }
            out.write_all(buf.as_bytes())?;
            out.sync_data()?;
        }
        let file = SessionFile {
            id: session.id.clone(),
            player: session.player.clone(),
            world: session.world.clone(),
            history: session.history.clone(),
            status: session.status,
            created: session.created,
            log_len: session.log.len(),
        };
        let tmp = self.dir.join(format!("{}.json.tmp", session.id));
        fs::write(&tmp, serde_json::to_vec_pretty(&file).expect("session serializes"))?;
        fs::rename(tmp, self.meta_path(&session.id))?;
        Ok(())
    }

    pub fn load(&self, id: &str) -> Result<Session, StoreError> {
        if !valid_id(id) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        let text = match fs::read_to_string(self.meta_path(id)) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::NotFound(id.to_string())),
            Err(e) => return Err(e.into()),
        };
        let corrupt = |seq: u64, message: String| StoreError::Corrupt {
            id: id.to_string(),
            seq,
            message,
        };
        let file: SessionFile = serde_json::from_str(&text).map_err(|e| corrupt(0, e.to_string()))?;
        let log = match File::open(self.log_path(id)) {
            Ok(f) => self.read_log(id, f, file.log_len)?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        if log.len() < file.log_len {
            let seq = log.last().map_or(1, |r| r.seq + 1);
            return Err(corrupt(seq, format!("log has {} of {} records", log.len(), file.log_len)));
        }
        Ok(Session {
            id: file.id,
            player: file.player,
            world: file.world,
            history: file.history,
            status: file.status,
            created: file.created,
            log,
        })
    }

    /// Read at most `expected` records. Extra lines from a write that was
    /// interrupted before the session file was updated are ignored.
    fn read_log(&self, id: &str, f: File, expected: usize) -> Result<Vec<LogRecord>, StoreError> {
        let mut out: Vec<LogRecord> = Vec::new();
        for line in BufReader::new(f).lines() {
            if out.len() == expected {
                break;
            }
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let seq = out.last().map_or(1, |r| r.seq + 1);
            let rec: LogRecord = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
                id: id.to_string(),
                seq,
                message: e.to_string(),
            })?;
            if rec.seq != seq {
                return Err(StoreError::Corrupt {
                    id: id.to_string(),
                    seq,
                    message: format!("found seq {}", rec.seq),
                });
            }
            out.push(rec);
        }
        Ok(out)
    }

    /// Ids of every stored session, sorted.
    pub fn list(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let name = entry?.file_name();
            if let Some(id) = name.to_str().and_then(|n| n.strip_suffix(".json")) {
                ids.push(id.to_string());
            }
        }
        ids.sort();
        Ok(ids)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::gateway::Gateway;
    use crate::session::GameRuntime;
    use crate::world::dejaboom;

    fn played() -> (GameRuntime, Session) {
        let rt = GameRuntime::new(Arc::new(dejaboom()), Gateway::rule_based());
        let mut s = rt.start_session(PlayerMetadata::new("p"));
        rt.step(&mut s, "take water bucket").unwrap();
        rt.step(&mut s, "go west").unwrap();
        (rt, s)
    }

    #[test]
    fn round_trip_and_incremental_append() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let (rt, mut s) = played();
        store.persist(&s).unwrap();
        rt.step(&mut s, "look").unwrap();
        store.persist(&s).unwrap();
        assert_eq!(store.load(&s.id).unwrap(), s);
        assert_eq!(store.list().unwrap(), vec![s.id.clone()]);
    }

    #[test]
    fn missing_and_corrupt_sessions_are_typed() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        assert!(matches!(store.load("nope"), Err(StoreError::NotFound(_))));
        assert!(matches!(store.load("../etc"), Err(StoreError::NotFound(_))));

        let (_, s) = played();
        store.persist(&s).unwrap();
        let path = store.log_path(&s.id);
        let text = fs::read_to_string(&path).unwrap();
        let cut = text.len() - 20;
        fs::write(&path, &text[..cut]).unwrap();
        let last = s.log.last().unwrap().seq;
        match store.load(&s.id) {
            Err(StoreError::Corrupt { seq, .. }) => assert_eq!(seq, last),
            other => panic!("expected corrupt, got {other:?}"),
        }
    }
}
