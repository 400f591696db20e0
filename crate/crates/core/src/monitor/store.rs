//! One NDJSON file per session plus an `index.json`. Live sessions are
//! appended line by line; closing a session rewrites its file through a
//! temporary file and a rename, so readers see either the old or the new
//! version.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::session::{ClassifiedFrame, LabelMark, SessionRecord};
use crate::error::{Error, Result};

const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Line {
    Header { session_id: String },
    Frame(ClassifiedFrame),
    Label(LabelMark),
    Closed { n_frames: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub start_ms: Option<u64>,
    pub end_ms: Option<u64>,
    pub n_frames: usize,
    pub closed: bool,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Index {
    next: u64,
    sessions: BTreeMap<String, IndexEntry>,
}

#[derive(Debug)]
pub struct SessionStore {
    dir: PathBuf,
    index: Mutex<Index>,
}

/// Writes `bytes` to a sibling temporary file, syncs it and renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path)?;
    Ok(())
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

fn line(l: &Line) -> Result<String> {
    let mut s = serde_json::to_string(l)?;
    s.push('\n');
    Ok(s)
}

impl SessionStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let path = dir.join(INDEX_FILE);
        let index = if path.exists() { serde_json::from_slice(&fs::read(&path)?)? } else { Index::default() };
        Ok(Self { dir, index: Mutex::new(index) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn session_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.ndjson"))
    }

    fn save_index(&self, index: &Index) -> Result<()> {
        write_atomic(&self.dir.join(INDEX_FILE), &serde_json::to_vec_pretty(index)?)
    }

    /// Allocates the next id and starts its append log.
    pub fn create(&self) -> Result<SessionWriter> {
        let mut index = self.index.lock().unwrap();
        index.next += 1;
        let id = format!("S{:06}", index.next);
        let path = self.session_path(&id);
        let mut out = BufWriter::new(OpenOptions::new().create_new(true).append(true).open(&path)?);
        out.write_all(line(&Line::Header { session_id: id.clone() })?.as_bytes())?;
        out.flush()?;
        index.sessions.insert(
            id.clone(),
            IndexEntry { id: id.clone(), start_ms: None, end_ms: None, n_frames: 0, closed: false },
        );
        self.save_index(&index)?;
        Ok(SessionWriter { id, out })
    }

    /// Stores a closed session, replacing any earlier version atomically.
    pub fn persist_session(&self, s: &SessionRecord) -> Result<String> {
        if !s.closed {
            return Err(Error::InvalidInput(format!("session {} is still open", s.session_id)));
        }
        if !valid_id(&s.session_id) {
            return Err(Error::InvalidInput(format!("session id {:?} is not a plain name", s.session_id)));
        }
        let mut text = line(&Line::Header { session_id: s.session_id.clone() })?;
        for f in &s.frames {
            text.push_str(&line(&Line::Frame(f.clone()))?);
        }
        for l in &s.labels {
            text.push_str(&line(&Line::Label(*l))?);
        }
        text.push_str(&line(&Line::Closed { n_frames: s.frames.len() })?);
        write_atomic(&self.session_path(&s.session_id), text.as_bytes())?;

        let mut index = self.index.lock().unwrap();
        index.sessions.insert(
            s.session_id.clone(),
            IndexEntry {
                id: s.session_id.clone(),
                start_ms: s.start_ms(),
                end_ms: s.end_ms(),
                n_frames: s.frames.len(),
                closed: true,
            },
        );
        self.save_index(&index)?;
        Ok(s.session_id.clone())
    }

    /// Reads a session file, open or closed.
    pub fn load_session(&self, id: &str) -> Result<SessionRecord> {
        if !valid_id(id) {
            return Err(Error::NotFound(id.to_string()));
        }
        let file = match File::open(self.session_path(id)) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::NotFound(id.to_string())),
            Err(e) => return Err(e.into()),
        };
        let mut rec = SessionRecord::new(id);
        for (i, text) in BufReader::new(file).lines().enumerate() {
            let text = text?;
            if text.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&text)
                .map_err(|e| Error::Parse { line: i as u64 + 1, message: e.to_string() })?;
            match parsed {
                Line::Header { session_id } => rec.session_id = session_id,
                Line::Frame(f) => rec.push_frame(f)?,
                Line::Label(l) => rec.labels.push(l),
                Line::Closed { .. } => rec.closed = true,
            }
        }
        Ok(rec)
    }

    pub fn list(&self) -> Vec<IndexEntry> {
        self.index.lock().unwrap().sessions.values().cloned().collect()
    }

    pub fn entry(&self, id: &str) -> Option<IndexEntry> {
        self.index.lock().unwrap().sessions.get(id).cloned()
    }
}

/// Append handle for a live session. Each line is flushed before the call
/// returns.
#[derive(Debug)]
pub struct SessionWriter {
    id: String,
    out: BufWriter<File>,
}

impl SessionWriter {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn append_frame(&mut self, f: &ClassifiedFrame) -> Result<()> {
        self.write(&Line::Frame(f.clone()))
    }

    pub fn append_label(&mut self, l: &LabelMark) -> Result<()> {
        self.write(&Line::Label(*l))
    }

    fn write(&mut self, l: &Line) -> Result<()> {
        self.out.write_all(line(l)?.as_bytes())?;
        self.out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posture::PostureLabel;
    use crate::monitor::session::Window;

    fn session(id: &str, n: usize) -> SessionRecord {
        let mut s = SessionRecord::new(id);
        for i in 0..n {
            let p = PostureLabel::ALL[(i / 97) % 8];
            s.push_frame(ClassifiedFrame {
                t: 5_000 + 333 * i as u64,
                counts: std::array::from_fn(|k| ((i * 31 + k * 7) % 4096) as u16),
                raw: p,
                raw_conf: 0.1 + (i % 9) as f64 / 10.0,
                posture: p,
                conf: 1.0 / (1.0 + i as f64),
                bpm: (i > 20).then(|| 60.0 + (i as f64).sqrt()),
                manual: (i % 3 == 0).then_some(PostureLabel::Upright),
            })
            .unwrap();
        }
        s.labels.push(LabelMark { t: 5_000, label: Some(PostureLabel::Upright) });
        s.labels.push(LabelMark { t: 9_000, label: None });
        s.closed = true;
        s
    }

    #[test]
    fn thousand_frame_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let s = session("S000042", 1000);
        let before = s.stats(Window::all());
        store.persist_session(&s).unwrap();
        let back = store.load_session("S000042").unwrap();
        assert_eq!(back, s);
        assert_eq!(back.stats(Window::all()), before);
        // The index survives a reopen.
        let reopened = SessionStore::open(dir.path()).unwrap();
        assert_eq!(reopened.entry("S000042").unwrap().n_frames, 1000);
    }

    #[test]
    fn unknown_ids_are_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        assert!(matches!(store.load_session("S999999"), Err(Error::NotFound(_))));
        assert!(matches!(store.load_session("../index"), Err(Error::NotFound(_))));
    }

    #[test]
    fn open_sessions_cannot_be_persisted() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let mut s = session("S000001", 3);
        s.closed = false;
        assert!(store.persist_session(&s).is_err());
    }

    #[test]
    fn failed_replace_keeps_the_old_version() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let old = session("S000007", 50);
        store.persist_session(&old).unwrap();
        // A directory squatting on the temporary path makes the write fail.
        fs::create_dir(dir.path().join("S000007.ndjson.tmp")).unwrap();
        assert!(store.persist_session(&session("S000007", 80)).is_err());
        assert_eq!(store.load_session("S000007").unwrap(), old);
    }

    #[test]
    fn append_log_reads_back_as_open_session() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let mut w = store.create().unwrap();
        assert_eq!(w.id(), "S000001");
        let s = session("S000001", 10);
        for f in &s.frames {
            w.append_frame(f).unwrap();
        }
        w.append_label(&s.labels[0]).unwrap();
        let back = store.load_session("S000001").unwrap();
        assert!(!back.closed);
        assert_eq!(back.frames, s.frames);
        assert_eq!(back.labels, vec![s.labels[0]]);
        assert_eq!(store.create().unwrap().id(), "S000002");
    }
}
