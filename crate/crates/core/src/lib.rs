//! Two-password authentication with colored-grid challenges.
//!
//! A user proves knowledge of a conventional first password and then one
//! character of a short second password by pressing, for six rounds, the
//! color key painted on that character's cell. What an eavesdropper learns
//! per session is controlled by group-locked colorings, and responses that
//! track a decoy subgroup are detected.

pub mod adversary;
pub mod analysis;
pub mod grid;
pub mod protocol;
pub mod storage;

pub use grid::{CharIndex, CharSet, ColorKey, GridColoring, Palette, SubgroupPartition};
pub use protocol::{
    Authenticator, ChallengeIndex, DetectionEvent, DetectionPolicy, GroupState, Scheme,
    SessionSpec, SessionState, Verdict,
};
pub use storage::{ChallengeStore, CredentialStore, HashCost};
