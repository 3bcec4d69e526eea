//! Append-only JSON-lines journal.
//!
//! Every record is one JSON object on its own line, flushed and synced before
//! `append` returns. On open, the whole file is replayed. A final line that
//! does not parse is treated as a torn write: it is cut off and reported. Any
//! other unparseable line is corruption and refuses to open.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JournalError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: line {line} is corrupt ({message}); repair or remove the file before restarting")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("could not encode record: {0}")]
    Encode(#[from] serde_json::Error),
}

/// A discarded torn trailing line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TornLine {
    pub line: usize,
    pub bytes: usize,
}

#[derive(Debug)]
pub struct Recovered<T> {
    pub records: Vec<T>,
    pub torn: Option<TornLine>,
}

#[derive(Debug)]
pub struct Journal<T> {
    path: PathBuf,
    file: File,
    _record: PhantomData<fn(T)>,
}

impl<T: Serialize + DeserializeOwned> Journal<T> {
    /// Opens (creating if needed) and replays the journal at `path`.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Recovered<T>), JournalError> {
        let path = path.as_ref().to_path_buf();
        let io_err = |source| JournalError::Io { path: path.clone(), source };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err)?;
        }
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io_err(e)),
        };

        let mut records = Vec::new();
        let mut torn = None;
        let mut keep_len = bytes.len();
        let mut needs_newline = false;

        let mut lines: Vec<(usize, usize, &[u8])> = Vec::new();
        let mut start = 0;
        for (n, chunk) in bytes.split(|&b| b == b'\n').enumerate() {
            if !chunk.iter().all(u8::is_ascii_whitespace) {
                lines.push((n + 1, start, chunk));
            }
            start += chunk.len() + 1;
        }
        let last = lines.len().checked_sub(1);
        for (i, &(line, offset, chunk)) in lines.iter().enumerate() {
            let parsed = std::str::from_utf8(chunk)
                .map_err(|e| e.to_string())
                .and_then(|s| serde_json::from_str::<T>(s).map_err(|e| e.to_string()));
            match parsed {
                Ok(r) => {
                    records.push(r);
                    if Some(i) == last {
                        needs_newline = !bytes.ends_with(b"\n");
                    }
                }
                Err(_) if Some(i) == last => {
                    tracing::warn!(path = %path.display(), line, "discarding torn trailing journal line");
                    torn = Some(TornLine { line, bytes: bytes.len() - offset });
                    keep_len = offset;
                }
                Err(message) => return Err(JournalError::Corrupt { path, line, message }),
            }
        }

        let mut file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err)?;
        if torn.is_some() {
            file.set_len(keep_len as u64).map_err(io_err)?;
            file.sync_all().map_err(io_err)?;
        } else if needs_newline {
            file.write_all(b"\n").map_err(io_err)?;
            file.sync_data().map_err(io_err)?;
        }
        Ok((Self { path, file, _record: PhantomData }, Recovered { records, torn }))
    }

    pub fn append(&mut self, record: &T) -> Result<(), JournalError> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        let io_err = |source| JournalError::Io { path: self.path.clone(), source };
        self.file.write_all(&line).map_err(io_err)?;
        self.file.sync_data().map_err(io_err)
    }

    /// Atomically replaces the journal contents with `records`.
    pub fn compact<'a, I>(&mut self, records: I) -> Result<(), JournalError>
    where
        I: IntoIterator<Item = &'a T>,
        T: 'a,
    {
        let io_err = |source| JournalError::Io { path: self.path.clone(), source };
        let mut tmp_name = self.path.as_os_str().to_owned();
        tmp_name.push(".compact");
        let tmp = PathBuf::from(tmp_name);
        {
            let mut out = io::BufWriter::new(File::create(&tmp).map_err(io_err)?);
            for r in records {
                serde_json::to_writer(&mut out, r)?;
                out.write_all(b"\n").map_err(io_err)?;
            }
            let file = out.into_inner().map_err(|e| io_err(e.into_error()))?;
            file.sync_all().map_err(io_err)?;
        }
        fs::rename(&tmp, &self.path).map_err(io_err)?;
        self.file = OpenOptions::new().append(true).open(&self.path).map_err(io_err)?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    struct Rec {
        n: u32,
        s: String,
    }

    fn rec(n: u32) -> Rec {
        Rec { n, s: format!("record {n}") }
    }

    #[test]
    fn missing_file_starts_empty() {
        let dir = tempfile::tempdir().unwrap();
        let (_, rec) = Journal::<Rec>::open(dir.path().join("sub/j.jsonl")).unwrap();
        assert!(rec.records.is_empty() && rec.torn.is_none());
    }

    #[test]
    fn append_then_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let (mut j, _) = Journal::<Rec>::open(&path).unwrap();
        for n in 0..10 {
            j.append(&rec(n)).unwrap();
        }
        drop(j);
        let (_, got) = Journal::<Rec>::open(&path).unwrap();
        assert_eq!(got.records, (0..10).map(rec).collect::<Vec<_>>());
    }

    #[test]
    fn compact_rewrites_and_keeps_appending() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let (mut j, _) = Journal::<Rec>::open(&path).unwrap();
        for n in 0..10 {
            j.append(&rec(n)).unwrap();
        }
        let keep: Vec<Rec> = (7..10).map(rec).collect();
        j.compact(&keep).unwrap();
        j.append(&rec(42)).unwrap();
        drop(j);
        let (_, got) = Journal::<Rec>::open(&path).unwrap();
        assert_eq!(got.records, [rec(7), rec(8), rec(9), rec(42)]);
    }

    #[test]
    fn torn_tail_is_cut_and_appends_continue() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let (mut j, _) = Journal::<Rec>::open(&path).unwrap();
        for n in 0..3 {
            j.append(&rec(n)).unwrap();
        }
        drop(j);
        let len = fs::metadata(&path).unwrap().len();
        OpenOptions::new().write(true).open(&path).unwrap().set_len(len - 7).unwrap();

        let (mut j, got) = Journal::<Rec>::open(&path).unwrap();
        assert_eq!(got.records.len(), 2);
        assert_eq!(got.torn.as_ref().map(|t| t.line), Some(3));
        j.append(&rec(9)).unwrap();
        drop(j);
        let (_, got) = Journal::<Rec>::open(&path).unwrap();
        assert_eq!(got.records, vec![rec(0), rec(1), rec(9)]);
        assert!(got.torn.is_none());
    }

    #[test]
    fn mid_file_corruption_refuses_to_open() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        fs::write(&path, "{\"n\":1,\"s\":\"a\"}\n{garbage\n{\"n\":2,\"s\":\"b\"}\n").unwrap();
        match Journal::<Rec>::open(&path) {
            Err(JournalError::Corrupt { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected corruption error, got {other:?}"),
        }
    }

    #[test]
    fn missing_final_newline_is_repaired() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        fs::write(&path, "{\"n\":1,\"s\":\"a\"}").unwrap();
        let (mut j, got) = Journal::<Rec>::open(&path).unwrap();
        assert_eq!(got.records.len(), 1);
        j.append(&rec(2)).unwrap();
        drop(j);
        let (_, got) = Journal::<Rec>::open(&path).unwrap();
        assert_eq!(got.records.len(), 2);
    }
}
