use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{
    draw_challenge, ProtocolError, Result, Scheme, SessionSpec, SessionState, Verdict,
};
use crate::storage::{ChallengeStore, CredentialStore, StorageError};

/// What happens to an account when a decoy response sequence is seen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionPolicy {
    #[default]
    Block,
    Alarm,
}

/// The one place where both stores meet: verifies the first password in
/// store A, then challenges and updates the second password in store B.
#[derive(Debug)]
pub struct Authenticator {
    store_a: CredentialStore,
    store_b: ChallengeStore,
    policy: DetectionPolicy,
}

fn lift(e: StorageError) -> ProtocolError {
    match e {
        StorageError::UnknownUser => ProtocolError::UnknownUser,
        other => ProtocolError::Storage(other),
    }
}

impl Authenticator {
    pub fn new(store_a: CredentialStore, store_b: ChallengeStore, policy: DetectionPolicy) -> Self {
        Authenticator { store_a, store_b, policy }
    }

    pub fn policy(&self) -> DetectionPolicy {
        self.policy
    }

    pub fn set_policy(&mut self, policy: DetectionPolicy) {
        self.policy = policy;
    }

    pub fn store_a(&self) -> &CredentialStore {
        &self.store_a
    }

    pub fn store_b(&self) -> &ChallengeStore {
        &self.store_b
    }

    pub fn store_b_mut(&mut self) -> &mut ChallengeStore {
        &mut self.store_b
    }

    pub fn detections(&self) -> &[crate::protocol::DetectionEvent] {
        self.store_b.detections()
    }

    pub fn register<R: RngCore + ?Sized>(
        &mut self,
        username: &str,
        p1: &str,
        p2: &str,
        rng: &mut R,
    ) -> Result<()> {
        if self.store_a.contains(username) || self.store_b.contains(username) {
            return Err(StorageError::DuplicateUser.into());
        }
        self.store_a.check_new_p1(p1)?;
        self.store_b.check_new_p2(p2)?;
        self.store_a.register(username, p1, rng)?;
        if let Err(e) = self.store_b.register(username, p2) {
            self.store_a.remove(username)?;
            return Err(e.into());
        }
        Ok(())
    }

    /// Verifies the first password and opens an ICIP session on a uniformly
    /// drawn eligible index.
    pub fn start_session<R: Rng + ?Sized>(
        &mut self,
        username: &str,
        p1: &str,
        rng: &mut R,
    ) -> Result<SessionState> {
        if !self.store_a.verify_p1(username, p1).map_err(lift)? {
            return Err(ProtocolError::BadFirstPassword);
        }
        let record = self.store_b.record(username).map_err(lift)?;
        if record.blocked {
            return Err(ProtocolError::AccountBlocked);
        }
        let challenge = draw_challenge(&record.group_states, rng)?;
        let mut id = [0u8; 16];
        rng.fill_bytes(&mut id);
        let spec = SessionSpec {
            session_id: hex::encode(id),
            username: username.to_owned(),
            challenge,
            secret: record.p2.at(challenge),
            stage: record.group_states[challenge.slot()],
            scheme: Scheme::Icip,
        };
        SessionState::begin(spec, rng)
    }

    /// Persists the outcome of a completed session. Every final verdict costs
    /// exactly one synced write to store B, so detection is not visible in
    /// timing.
    pub fn finish(&mut self, session: &SessionState) -> Result<Verdict> {
        let username = session.username();
        match session.verdict() {
            Verdict::InProgress => return Err(ProtocolError::SessionIncomplete),
            Verdict::Success => {
                let next = session.commit_success()?;
                self.store_b
                    .store_group(username, session.challenge(), next)
                    .map_err(lift)?;
            }
            Verdict::Failure => self.store_b.record_failure(username).map_err(lift)?,
            Verdict::Detected => {
                let event = session
                    .detection_event()
                    .cloned()
                    .expect("detected sessions carry an event");
                let block = self.policy == DetectionPolicy::Block;
                self.store_b.record_detection(event, block).map_err(lift)?;
            }
        }
        Ok(session.verdict())
    }

    pub fn unblock(&mut self, username: &str) -> Result<()> {
        self.store_b.set_blocked(username, false).map_err(lift)
    }

    /// Changes the second password (and optionally the first) after
    /// verifying the current first password.
    pub fn change_password<R: RngCore + ?Sized>(
        &mut self,
        username: &str,
        p1: &str,
        new_p2: &str,
        new_p1: Option<&str>,
        rng: &mut R,
    ) -> Result<()> {
        if !self.store_a.verify_p1(username, p1).map_err(lift)? {
            return Err(ProtocolError::BadFirstPassword);
        }
        self.store_b.check_new_p2(new_p2)?;
        if let Some(new_p1) = new_p1 {
            self.store_a.change_p1(username, p1, new_p1, rng)?;
        }
        self.store_b.change_p2(username, new_p2).map_err(lift)
    }
}
