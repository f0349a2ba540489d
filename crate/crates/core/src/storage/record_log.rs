//! Append-only record log with a versioned header.
//!
//! Layout: `TPPLOG` magic, `u16` LE format version, one store-kind byte, then
//! frames of `u32` LE payload length, `u32` LE CRC-32 of the payload, and the
//! JSON payload. A torn or corrupt tail is truncated on open and reported.

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::StorageError;

pub const MAGIC: &[u8; 6] = b"TPPLOG";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: u64 = 9;
const MAX_PAYLOAD: u32 = 64 << 20;

/// What `open` found on disk.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Recovery {
    pub records: usize,
    /// Bytes dropped from a torn or corrupt tail.
    pub truncated_bytes: u64,
}

#[derive(Debug)]
pub struct RecordLog {
    path: PathBuf,
    file: File,
    kind: u8,
    appended: usize,
}

impl RecordLog {
    /// Opens or creates the log at `path`, replaying every intact record.
    pub fn open<R: DeserializeOwned>(
        path: &Path,
        kind: u8,
    ) -> Result<(Self, Vec<R>, Recovery), StorageError> {
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(path)?;
        let len = file.metadata()?.len();
        if len == 0 {
            write_header(&mut file, kind)?;
            file.sync_all()?;
            let log = RecordLog { path: path.to_owned(), file, kind, appended: 0 };
            return Ok((log, Vec::new(), Recovery::default()));
        }

        let mut reader = BufReader::new(&mut file);
        let mut header = [0u8; HEADER_LEN as usize];
        reader
            .read_exact(&mut header)
            .map_err(|_| StorageError::CorruptLog("truncated header".into()))?;
        if &header[..6] != MAGIC {
            return Err(StorageError::CorruptLog("bad magic".into()));
        }
        let version = u16::from_le_bytes([header[6], header[7]]);
        if version != FORMAT_VERSION {
            return Err(StorageError::CorruptLog(format!("unsupported version {version}")));
        }
        if header[8] != kind {
            return Err(StorageError::WrongStore {
                expected: kind as char,
                found: header[8] as char,
            });
        }

        let mut records = Vec::new();
        let mut good_end = HEADER_LEN;
        loop {
            let mut frame = [0u8; 8];
            if reader.read_exact(&mut frame).is_err() {
                break;
            }
            let size = u32::from_le_bytes(frame[..4].try_into().unwrap());
            let crc = u32::from_le_bytes(frame[4..].try_into().unwrap());
            if size > MAX_PAYLOAD {
                break;
            }
            let mut payload = vec![0u8; size as usize];
            if reader.read_exact(&mut payload).is_err() || crc32fast::hash(&payload) != crc {
                break;
            }
            match serde_json::from_slice(&payload) {
                Ok(r) => records.push(r),
                Err(_) => break,
            }
            good_end += 8 + size as u64;
        }
        drop(reader);

        let truncated_bytes = len - good_end;
        if truncated_bytes > 0 {
            file.set_len(good_end)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::End(0))?;
        let recovery = Recovery { records: records.len(), truncated_bytes };
        let log = RecordLog { path: path.to_owned(), file, kind, appended: records.len() };
        Ok((log, records, recovery))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Records written since the last rewrite.
    pub fn appended(&self) -> usize {
        self.appended
    }

    /// Appends one record and syncs it to disk before returning.
    pub fn append<R: Serialize>(&mut self, record: &R) -> Result<(), StorageError> {
        let frame = encode_frame(record)?;
        self.file.write_all(&frame)?;
        self.file.sync_data()?;
        self.appended += 1;
        Ok(())
    }

    /// Replaces the log with `records` via a synced temporary file and rename.
    pub fn rewrite<'a, R, I>(&mut self, records: I) -> Result<(), StorageError>
    where
        R: Serialize + 'a,
        I: IntoIterator<Item = &'a R>,
    {
        let tmp = self.path.with_extension("compact");
        let mut count = 0;
        {
            let mut out = BufWriter::new(File::create(&tmp)?);
            write_header(&mut out, self.kind)?;
            for r in records {
                out.write_all(&encode_frame(r)?)?;
                count += 1;
            }
            out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        }
        fs::rename(&tmp, &self.path)?;
        if let Some(dir) = self.path.parent() {
            if let Ok(d) = File::open(dir) {
                let _ = d.sync_all();
            }
        }
        let mut file = OpenOptions::new().read(true).write(true).open(&self.path)?;
        file.seek(SeekFrom::End(0))?;
        self.file = file;
        self.appended = count;
        Ok(())
    }
}

fn write_header<W: Write>(w: &mut W, kind: u8) -> Result<(), StorageError> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&[kind])?;
    Ok(())
}

fn encode_frame<R: Serialize>(record: &R) -> Result<Vec<u8>, StorageError> {
    let payload = serde_json::to_vec(record)?;
    let mut frame = Vec::with_capacity(payload.len() + 8);
    frame.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    frame.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    frame.extend_from_slice(&payload);
    Ok(frame)
}
