use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use argon2::{Algorithm, Argon2, Params, Version};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use subtle::ConstantTimeEq;

use super::record_log::{RecordLog, Recovery};
use super::{needs_compaction, RetiredPasswordFilter, StorageError};

/// Default minimum first-password length.
pub const MIN_P1_LEN: usize = 6;
const STORE_KIND: u8 = b'A';
const SALT_LEN: usize = 16;
const DIGEST_LEN: usize = 32;

/// Argon2id cost parameters, kept with each record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashCost {
    pub memory_kib: u32,
    pub iterations: u32,
    pub parallelism: u32,
}

impl Default for HashCost {
    fn default() -> Self {
        HashCost { memory_kib: 19 * 1024, iterations: 2, parallelism: 1 }
    }
}

impl HashCost {
    /// Minimal cost for simulations and tests.
    pub const FAST: HashCost = HashCost { memory_kib: 64, iterations: 1, parallelism: 1 };

    fn digest(&self, password: &str, salt: &[u8]) -> Result<[u8; DIGEST_LEN], StorageError> {
        let params = Params::new(self.memory_kib, self.iterations, self.parallelism, Some(DIGEST_LEN))
            .map_err(|e| StorageError::Hash(e.to_string()))?;
        let mut out = [0u8; DIGEST_LEN];
        Argon2::new(Algorithm::Argon2id, Version::V0x13, params)
            .hash_password_into(password.as_bytes(), salt, &mut out)
            .map_err(|e| StorageError::Hash(e.to_string()))?;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct P1Record {
    pub username: String,
    #[serde(with = "hex")]
    pub salt: Vec<u8>,
    #[serde(with = "hex")]
    pub digest: Vec<u8>,
    pub cost: HashCost,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum Record {
    Put(P1Record),
    Retire { positions: Vec<u64> },
    Filter(RetiredPasswordFilter),
}

/// Store A: first-password digests.
#[derive(Debug)]
pub struct CredentialStore {
    records: BTreeMap<String, P1Record>,
    retired: RetiredPasswordFilter,
    log: Option<RecordLog>,
    cost: HashCost,
    min_len: usize,
}

impl CredentialStore {
    pub fn in_memory(cost: HashCost) -> Self {
        CredentialStore {
            records: BTreeMap::new(),
            retired: RetiredPasswordFilter::default(),
            log: None,
            cost,
            min_len: MIN_P1_LEN,
        }
    }

    /// Opens the store's log at `path`, replaying it.
    pub fn open(path: &Path, cost: HashCost) -> Result<(Self, Recovery), StorageError> {
        let (log, records, recovery) = RecordLog::open::<Record>(path, STORE_KIND)?;
        let mut store = Self::in_memory(cost);
        for r in records {
            store.apply(r);
        }
        store.log = Some(log);
        Ok((store, recovery))
    }

    pub fn with_min_len(mut self, min_len: usize) -> Self {
        self.min_len = min_len;
        self
    }

    fn apply(&mut self, record: Record) {
        match record {
            Record::Put(r) => {
                self.records.insert(r.username.clone(), r);
            }
            Record::Retire { positions } => self.retired.set_positions(&positions),
            Record::Filter(f) => self.retired = f,
        }
    }

    fn commit(&mut self, record: Record) -> Result<(), StorageError> {
        if let Some(log) = &mut self.log {
            log.append(&record)?;
        }
        self.apply(record);
        let compact = self
            .log
            .as_ref()
            .is_some_and(|log| needs_compaction(log.appended(), self.records.len()));
        if compact {
            self.compact()?;
        }
        Ok(())
    }

    /// Rewrites the log as one snapshot.
    pub fn compact(&mut self) -> Result<(), StorageError> {
        if let Some(log) = &mut self.log {
            let snapshot: Vec<Record> = std::iter::once(Record::Filter(self.retired.clone()))
                .chain(self.records.values().cloned().map(Record::Put))
                .collect();
            log.rewrite(&snapshot)?;
        }
        Ok(())
    }

    pub fn contains(&self, username: &str) -> bool {
        self.records.contains_key(username)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_retired(&self, p1: &str) -> bool {
        self.retired.contains(p1)
    }

    /// Validates a candidate first password without storing anything.
    pub fn check_new_p1(&self, p1: &str) -> Result<(), StorageError> {
        if p1.chars().count() < self.min_len {
            return Err(StorageError::WeakPassword(format!(
                "first password needs at least {} characters",
                self.min_len
            )));
        }
        if !p1.chars().all(|c| (' '..='~').contains(&c)) {
            return Err(StorageError::WeakPassword(
                "first password must use printable ASCII".into(),
            ));
        }
        if self.is_retired(p1) {
            return Err(StorageError::RetiredPassword);
        }
        Ok(())
    }

    fn make_record<R: RngCore + ?Sized>(
        &self,
        username: &str,
        p1: &str,
        rng: &mut R,
    ) -> Result<P1Record, StorageError> {
        let mut salt = vec![0u8; SALT_LEN];
        rng.fill_bytes(&mut salt);
        let digest = self.cost.digest(p1, &salt)?.to_vec();
        Ok(P1Record { username: username.to_owned(), salt, digest, cost: self.cost })
    }

    pub fn register<R: RngCore + ?Sized>(
        &mut self,
        username: &str,
        p1: &str,
        rng: &mut R,
    ) -> Result<(), StorageError> {
        if self.contains(username) {
            return Err(StorageError::DuplicateUser);
        }
        self.check_new_p1(p1)?;
        let record = self.make_record(username, p1, rng)?;
        self.commit(Record::Put(record))
    }

    /// Constant-time digest comparison. Unknown users still pay for one hash.
    pub fn verify_p1(&self, username: &str, p1: &str) -> Result<bool, StorageError> {
        let Some(record) = self.records.get(username) else {
            self.cost.digest(p1, &[0u8; SALT_LEN])?;
            return Err(StorageError::UnknownUser);
        };
        let digest = record.cost.digest(p1, &record.salt)?;
        Ok(bool::from(digest.as_slice().ct_eq(&record.digest)))
    }

    /// Replaces the first password, retiring the old one.
    pub fn change_p1<R: RngCore + ?Sized>(
        &mut self,
        username: &str,
        old: &str,
        new: &str,
        rng: &mut R,
    ) -> Result<(), StorageError> {
        if !self.verify_p1(username, old)? {
            return Err(StorageError::WrongPassword);
        }
        self.check_new_p1(new)?;
        if old == new {
            return Err(StorageError::RetiredPassword);
        }
        let positions = self.retired.positions(old);
        self.commit(Record::Retire { positions })?;
        let record = self.make_record(username, new, rng)?;
        self.commit(Record::Put(record))
    }

    /// Removes a user. Used to roll back a half-finished registration.
    pub fn remove(&mut self, username: &str) -> Result<(), StorageError> {
        if self.records.remove(username).is_some() {
            self.compact()?;
        }
        Ok(())
    }

    pub fn export_jsonl<W: Write>(&self, mut out: W) -> Result<(), StorageError> {
        serde_json::to_writer(&mut out, &Record::Filter(self.retired.clone()))?;
        writeln!(out)?;
        for r in self.records.values() {
            serde_json::to_writer(&mut out, &Record::Put(r.clone()))?;
            writeln!(out)?;
        }
        Ok(())
    }

    /// Loads records exported by [`export_jsonl`](Self::export_jsonl),
    /// replacing entries with the same username.
    pub fn import_jsonl<R: BufRead>(&mut self, input: R) -> Result<usize, StorageError> {
        let mut count = 0;
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            self.apply(serde_json::from_str(&line)?);
            count += 1;
        }
        self.compact()?;
        Ok(count)
    }

    pub fn records(&self) -> impl Iterator<Item = &P1Record> {
        self.records.values()
    }
}
