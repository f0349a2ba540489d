//! Two isolated credential stores.
//!
//! Store A ([`CredentialStore`]) holds salted, slow hashes of the first
//! password. Store B ([`ChallengeStore`]) holds the second password in clear,
//! as the colored-grid challenge requires, together with the per-index group
//! state. Each store has its own persistence root and its own retired-password
//! filter; nothing in this module reads from both.

mod bloom;
mod challenge;
mod credential;
mod record_log;

pub use bloom::{RetiredPasswordFilter, DEFAULT_CAPACITY, DEFAULT_FALSE_POSITIVE_RATE};
pub use challenge::{ChallengeStore, P2Record, P2Secret};
pub use credential::{CredentialStore, HashCost, P1Record, MIN_P1_LEN};
pub use record_log::{RecordLog, Recovery, FORMAT_VERSION, MAGIC};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("unknown user")]
    UnknownUser,
    #[error("current password does not match")]
    WrongPassword,
    #[error("username already registered")]
    DuplicateUser,
    #[error("weak password: {0}")]
    WeakPassword(String),
    #[error("password was retired and may not be reused")]
    RetiredPassword,
    #[error("stale write: {from} cannot advance to {to}")]
    StaleWrite { from: String, to: String },
    #[error("group state does not contain the stored password character")]
    InconsistentGroup,
    #[error("log belongs to store {found}, expected store {expected}")]
    WrongStore { expected: char, found: char },
    #[error("corrupt log: {0}")]
    CorruptLog(String),
    #[error("password hashing failed: {0}")]
    Hash(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Compact once the log holds this many records beyond four per live entry.
const COMPACTION_SLACK: usize = 1024;

fn needs_compaction(appended: usize, live: usize) -> bool {
    appended > COMPACTION_SLACK + 4 * live
}
