use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::record_log::{RecordLog, Recovery};
use super::{needs_compaction, RetiredPasswordFilter, StorageError};
use crate::grid::CharIndex;
use crate::protocol::{ChallengeIndex, DetectionEvent, GroupState, P2_LEN};

const STORE_KIND: u8 = b'B';

/// The second password: four characters of the grid alphabet.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct P2Secret([CharIndex; P2_LEN]);

impl P2Secret {
    pub fn parse(p2: &str) -> Result<Self, StorageError> {
        let chars: Vec<CharIndex> = p2
            .chars()
            .map(CharIndex::from_char)
            .collect::<Result<_, _>>()
            .map_err(|e| StorageError::WeakPassword(e.to_string()))?;
        let chars: [CharIndex; P2_LEN] = chars.try_into().map_err(|_| {
            StorageError::WeakPassword(format!("second password must be {P2_LEN} characters"))
        })?;
        Ok(P2Secret(chars))
    }

    pub fn at(&self, index: ChallengeIndex) -> CharIndex {
        self.0[index.slot()]
    }

    pub fn chars(&self) -> &[CharIndex; P2_LEN] {
        &self.0
    }
}

impl fmt::Display for P2Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|c| write!(f, "{c}"))
    }
}

impl fmt::Debug for P2Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("P2Secret(****)")
    }
}

impl Serialize for P2Secret {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for P2Secret {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        P2Secret::parse(&String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// One row of the challenge database.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct P2Record {
    pub username: String,
    pub p2: P2Secret,
    pub group_states: [GroupState; P2_LEN],
    #[serde(default)]
    pub blocked: bool,
}

impl P2Record {
    fn is_consistent(&self) -> bool {
        ChallengeIndex::all().all(|t| self.group_states[t.slot()].is_consistent_with(self.p2.at(t)))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum Record {
    Put(P2Record),
    Group { username: String, index: ChallengeIndex, state: GroupState },
    Blocked { username: String, blocked: bool },
    Detection { event: DetectionEvent, block: bool },
    /// A failed session; carries no state but costs the same durable write
    /// as a detection.
    Failure { username: String },
    Retire { positions: Vec<u64> },
    Filter(RetiredPasswordFilter),
}

/// Store B: second passwords and their group lifecycle.
#[derive(Debug, Default)]
pub struct ChallengeStore {
    records: BTreeMap<String, P2Record>,
    detections: Vec<DetectionEvent>,
    retired: RetiredPasswordFilter,
    log: Option<RecordLog>,
}

impl ChallengeStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: &Path) -> Result<(Self, Recovery), StorageError> {
        let (log, records, recovery) = RecordLog::open::<Record>(path, STORE_KIND)?;
        let mut store = Self::default();
        for r in records {
            store.apply(r);
        }
        store.log = Some(log);
        Ok((store, recovery))
    }

    fn apply(&mut self, record: Record) {
        match record {
            Record::Put(r) => {
                self.records.insert(r.username.clone(), r);
            }
            Record::Group { username, index, state } => {
                if let Some(r) = self.records.get_mut(&username) {
                    r.group_states[index.slot()] = state;
                }
            }
            Record::Blocked { username, blocked } => {
                if let Some(r) = self.records.get_mut(&username) {
                    r.blocked = blocked;
                }
            }
            Record::Detection { event, block } => {
                if block {
                    if let Some(r) = self.records.get_mut(&event.username) {
                        r.blocked = true;
                    }
                }
                self.detections.push(event);
            }
            Record::Failure { .. } => {}
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
            .is_some_and(|log| needs_compaction(log.appended(), self.records.len() + self.detections.len()));
        if compact {
            self.compact()?;
        }
        Ok(())
    }

    fn snapshot(&self) -> Vec<Record> {
        std::iter::once(Record::Filter(self.retired.clone()))
            .chain(self.records.values().cloned().map(Record::Put))
            .chain(
                self.detections
                    .iter()
                    .cloned()
                    .map(|event| Record::Detection { event, block: false }),
            )
            .collect()
    }

    pub fn compact(&mut self) -> Result<(), StorageError> {
        let snapshot = self.snapshot();
        if let Some(log) = &mut self.log {
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

    pub fn record(&self, username: &str) -> Result<&P2Record, StorageError> {
        self.records.get(username).ok_or(StorageError::UnknownUser)
    }

    pub fn is_retired(&self, p2: &str) -> bool {
        self.retired.contains(p2)
    }

    pub fn check_new_p2(&self, p2: &str) -> Result<P2Secret, StorageError> {
        let secret = P2Secret::parse(p2)?;
        if self.is_retired(p2) {
            return Err(StorageError::RetiredPassword);
        }
        Ok(secret)
    }

    /// Adds a user with every index unused.
    pub fn register(&mut self, username: &str, p2: &str) -> Result<(), StorageError> {
        if self.contains(username) {
            return Err(StorageError::DuplicateUser);
        }
        let p2 = self.check_new_p2(p2)?;
        self.commit(Record::Put(P2Record {
            username: username.to_owned(),
            p2,
            group_states: [GroupState::Unused; P2_LEN],
            blocked: false,
        }))
    }

    pub fn load_group(&self, username: &str, index: ChallengeIndex) -> Result<GroupState, StorageError> {
        Ok(self.record(username)?.group_states[index.slot()])
    }

    /// Replaces one slot. The new state must be the next lifecycle stage,
    /// narrow the previous set, and contain the stored character. The write
    /// is synced before this returns.
    pub fn store_group(
        &mut self,
        username: &str,
        index: ChallengeIndex,
        state: GroupState,
    ) -> Result<(), StorageError> {
        let record = self.record(username)?;
        let current = record.group_states[index.slot()];
        if !current.advances_to(&state) {
            return Err(StorageError::StaleWrite {
                from: format!("{current:?}"),
                to: format!("{state:?}"),
            });
        }
        if !state.is_consistent_with(record.p2.at(index)) {
            return Err(StorageError::InconsistentGroup);
        }
        self.commit(Record::Group { username: username.to_owned(), index, state })
    }

    pub fn set_blocked(&mut self, username: &str, blocked: bool) -> Result<(), StorageError> {
        self.record(username)?;
        self.commit(Record::Blocked { username: username.to_owned(), blocked })
    }

    /// Logs a detection and, with `block`, blocks the account in the same
    /// write.
    pub fn record_detection(&mut self, event: DetectionEvent, block: bool) -> Result<(), StorageError> {
        self.record(&event.username)?;
        self.commit(Record::Detection { event, block })
    }

    pub fn record_failure(&mut self, username: &str) -> Result<(), StorageError> {
        self.record(username)?;
        self.commit(Record::Failure { username: username.to_owned() })
    }

    pub fn detections(&self) -> &[DetectionEvent] {
        &self.detections
    }

    /// Replaces the second password, retiring the old one and resetting
    /// every index to unused.
    pub fn change_p2(&mut self, username: &str, new_p2: &str) -> Result<(), StorageError> {
        let old = self.record(username)?.clone();
        let old_text = old.p2.to_string();
        if old_text == new_p2 {
            return Err(StorageError::RetiredPassword);
        }
        let p2 = self.check_new_p2(new_p2)?;
        let positions = self.retired.positions(&old_text);
        self.commit(Record::Retire { positions })?;
        self.commit(Record::Put(P2Record {
            p2,
            group_states: [GroupState::Unused; P2_LEN],
            ..old
        }))
    }

    pub fn remove(&mut self, username: &str) -> Result<(), StorageError> {
        if self.records.remove(username).is_some() {
            self.compact()?;
        }
        Ok(())
    }

    pub fn export_jsonl<W: Write>(&self, mut out: W) -> Result<(), StorageError> {
        for r in self.snapshot() {
            serde_json::to_writer(&mut out, &r)?;
            writeln!(out)?;
        }
        Ok(())
    }

    /// Loads exported records. Rows whose group states do not contain the
    /// stored characters are rejected.
    pub fn import_jsonl<R: BufRead>(&mut self, input: R) -> Result<usize, StorageError> {
        let mut count = 0;
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: Record = serde_json::from_str(&line)?;
            if let Record::Put(r) = &record {
                if !r.is_consistent() {
                    return Err(StorageError::InconsistentGroup);
                }
            }
            self.apply(record);
            count += 1;
        }
        self.compact()?;
        Ok(count)
    }

    pub fn records(&self) -> impl Iterator<Item = &P2Record> {
        self.records.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CharSet;

    fn t(i: u8) -> ChallengeIndex {
        ChallengeIndex::new(i).unwrap()
    }

    fn ch(c: char) -> CharIndex {
        CharIndex::from_char(c).unwrap()
    }

    fn set(s: &str) -> CharSet {
        CharSet::parse(s).unwrap()
    }

    /// Walks slots to the Table 1 row for alice / S7Ay.
    pub(crate) fn table1(store: &mut ChallengeStore) {
        store.register("alice", "S7Ay").unwrap();
        let s_group = set("STUVWXYZabcdefgh");
        store.store_group("alice", t(1), GroupState::AfterFirst(s_group)).unwrap();
        store.store_group("alice", t(1), GroupState::AfterSecond(set("STUV"))).unwrap();
        store.store_group("alice", t(1), GroupState::Exhausted(ch('S'))).unwrap();
        store
            .store_group("alice", t(3), GroupState::AfterFirst(set("ADGJLdeflovxy068")))
            .unwrap();
        let y_group = set("GRy#ABCDEFHIJKLM");
        store.store_group("alice", t(4), GroupState::AfterFirst(y_group)).unwrap();
        store.store_group("alice", t(4), GroupState::AfterSecond(set("GRy#"))).unwrap();
    }

    #[test]
    fn table1_row() {
        let mut s = ChallengeStore::in_memory();
        table1(&mut s);
        let r = s.record("alice").unwrap();
        assert_eq!(r.p2.to_string(), "S7Ay");
        assert_eq!(
            r.group_states,
            [
                GroupState::Exhausted(ch('S')),
                GroupState::Unused,
                GroupState::AfterFirst(set("ADGJLdeflovxy068")),
                GroupState::AfterSecond(set("GRy#")),
            ]
        );
        let uses: Vec<u8> = r.group_states.iter().map(GroupState::uses_remaining).collect();
        assert_eq!(uses, [0, 3, 2, 1]);
    }

    #[test]
    fn registration_gates() {
        let mut s = ChallengeStore::in_memory();
        s.register("alice", "S7Ay").unwrap();
        assert!(matches!(s.register("alice", "S7Ay"), Err(StorageError::DuplicateUser)));
        assert!(matches!(s.register("bob", "S7A!"), Err(StorageError::WeakPassword(_))));
        assert!(matches!(s.register("bob", "S7Ayy"), Err(StorageError::WeakPassword(_))));
        let r = s.record("alice").unwrap();
        assert_eq!(r.group_states, [GroupState::Unused; 4]);
    }

    #[test]
    fn writes_must_advance() {
        let mut s = ChallengeStore::in_memory();
        table1(&mut s);
        let err = s.store_group("alice", t(1), GroupState::AfterFirst(set("ADGJLdeflovxy068")));
        assert!(matches!(err, Err(StorageError::StaleWrite { .. })));
        // Skipping a stage is stale too.
        let err = s.store_group("alice", t(2), GroupState::Exhausted(ch('7')));
        assert!(matches!(err, Err(StorageError::StaleWrite { .. })));
        // A set without the stored character is refused.
        let err = s.store_group("alice", t(2), GroupState::AfterFirst(set("ABCDEFGHIJKLMNOP")));
        assert!(matches!(err, Err(StorageError::InconsistentGroup)));
        assert!(matches!(
            s.load_group("nobody", t(1)),
            Err(StorageError::UnknownUser)
        ));
    }

    #[test]
    fn change_resets_and_retires() {
        let mut s = ChallengeStore::in_memory();
        table1(&mut s);
        s.change_p2("alice", "k9#Q").unwrap();
        let r = s.record("alice").unwrap();
        assert_eq!(r.group_states, [GroupState::Unused; 4]);
        assert!(s.is_retired("S7Ay"));
        assert!(matches!(s.register("bob", "S7Ay"), Err(StorageError::RetiredPassword)));
    }

    #[test]
    fn export_import_roundtrip() {
        let mut s = ChallengeStore::in_memory();
        table1(&mut s);
        let mut out = Vec::new();
        s.export_jsonl(&mut out).unwrap();
        let mut copy = ChallengeStore::in_memory();
        copy.import_jsonl(out.as_slice()).unwrap();
        assert_eq!(copy.record("alice").unwrap(), s.record("alice").unwrap());

        let bad = r#"{"op":"put","username":"eve","p2":"S7Ay","group_states":[{"stage":"exhausted","members":"Q"},{"stage":"unused"},{"stage":"unused"},{"stage":"unused"}]}"#;
        assert!(matches!(
            ChallengeStore::in_memory().import_jsonl(bad.as_bytes()),
            Err(StorageError::InconsistentGroup)
        ));
    }

    #[test]
    fn durable_across_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store-b.log");
        {
            let (mut s, _) = ChallengeStore::open(&path).unwrap();
            table1(&mut s);
            s.set_blocked("alice", true).unwrap();
        }
        let (s, _) = ChallengeStore::open(&path).unwrap();
        let r = s.record("alice").unwrap();
        assert!(r.blocked);
        assert_eq!(r.group_states[3], GroupState::AfterSecond(set("GRy#")));
    }
}
