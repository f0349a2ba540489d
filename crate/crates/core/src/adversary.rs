//! Eavesdropper model: what a recording adversary learns from transcripts,
//! and how it tries to log in with partial knowledge.

use std::io::{BufRead, Write};

use rand::seq::IndexedRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{CharSet, ColorKey, GridColoring, SubgroupPartition};
use crate::protocol::SessionState;

pub const TRANSCRIPT_FORMAT: &str = "tpp-transcript";
pub const TRANSCRIPT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error("transcripts are inconsistent: empty intersection")]
    Inconsistent,
    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("candidate set {after:?} is not a subset of {before:?}")]
    NotShrunk { before: CharSet, after: CharSet },
    #[error("known set does not equal the union of the partition")]
    PartitionMismatch,
    #[error("bad transcript file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One recorded round: the coloring shown and the key pressed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub coloring: GridColoring,
    pub response: ColorKey,
}

/// Everything the wire carried during one session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    /// Which use of the character this session was, 1-based.
    pub session_index: u32,
    pub rounds: Vec<Round>,
}

impl Transcript {
    pub fn capture(session: &SessionState, session_index: u32) -> Self {
        Transcript {
            session_index,
            rounds: session
                .wire_rounds()
                .map(|(coloring, response)| Round { coloring: coloring.clone(), response })
                .collect(),
        }
    }
}

/// The adversary's surviving candidates for the secret character.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidateSet(CharSet);

impl CandidateSet {
    pub fn everything() -> Self {
        CandidateSet(CharSet::FULL)
    }

    pub fn new(members: CharSet) -> Self {
        CandidateSet(members)
    }

    pub fn members(self) -> CharSet {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.len()
    }

    pub fn is_empty(self) -> bool {
        self.0.is_empty()
    }

    /// Narrows by one observed round.
    pub fn observe(self, round: &Round) -> Self {
        CandidateSet(self.0.intersection(observe_round(&round.coloring, round.response).0))
    }
}

/// The 16 cells that carry the pressed key.
pub fn observe_round(coloring: &GridColoring, response: ColorKey) -> CandidateSet {
    let cells = coloring.cells_with(response);
    debug_assert_eq!(cells.len(), crate::grid::CELLS_PER_KEY, "coloring is balanced");
    CandidateSet(cells)
}

/// Intersects every round of every transcript.
pub fn intersect<'a, I>(transcripts: I) -> Result<CandidateSet, AdversaryError>
where
    I: IntoIterator<Item = &'a Transcript>,
{
    let result = transcripts
        .into_iter()
        .flat_map(|t| &t.rounds)
        .fold(CandidateSet::everything(), |acc, r| acc.observe(r));
    if result.is_empty() {
        Err(AdversaryError::Inconsistent)
    } else {
        Ok(result)
    }
}

/// `|before| / |after|`.
pub fn shrinking_factor(before: CandidateSet, after: CandidateSet) -> Result<f64, AdversaryError> {
    if after.is_empty() {
        return Err(AdversaryError::EmptyCandidates);
    }
    if !after.0.is_subset(before.0) {
        return Err(AdversaryError::NotShrunk { before: before.0, after: after.0 });
    }
    Ok(before.len() as f64 / after.len() as f64)
}

/// Recovers the subgroups a session uses by splitting the known candidates
/// by their round-1 key.
pub fn infer_partition(known: CandidateSet, first_round: &GridColoring) -> SubgroupPartition {
    let groups = first_round
        .classes()
        .into_iter()
        .map(|class| class.intersection(known.0))
        .filter(|g| !g.is_empty())
        .collect();
    SubgroupPartition::new(groups).expect("color classes are disjoint and at most four")
}

/// A committed guess: respond every round with the key of `target`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlannedAttack {
    pub target: CharSet,
}

impl PlannedAttack {
    pub fn respond(&self, coloring: &GridColoring) -> ColorKey {
        coloring.key_at(self.target.first().expect("target is non-empty"))
    }

    /// The key sequence this plan produces over the given rounds.
    pub fn responses<'a, I>(&self, colorings: I) -> Vec<ColorKey>
    where
        I: IntoIterator<Item = &'a GridColoring>,
    {
        colorings.into_iter().map(|c| self.respond(c)).collect()
    }
}

/// Picks one subgroup uniformly and tracks it for the whole session.
pub fn premature_attack<R: RngCore + ?Sized>(
    known: CandidateSet,
    partition_view: &SubgroupPartition,
    rng: &mut R,
) -> Result<PlannedAttack, AdversaryError> {
    if partition_view.covered() != known.0 || partition_view.is_empty() {
        return Err(AdversaryError::PartitionMismatch);
    }
    let target = *partition_view
        .subgroups()
        .choose(rng)
        .expect("partition is non-empty");
    Ok(PlannedAttack { target })
}

/// Intersection across recordings of the same character on two systems.
pub fn msv_attack(
    transcripts_sys1: &[Transcript],
    transcripts_sys2: &[Transcript],
) -> Result<CandidateSet, AdversaryError> {
    intersect(transcripts_sys1.iter().chain(transcripts_sys2))
}

/// Common interface for simulated adversaries: observe recorded sessions,
/// plan at the start of an impersonation attempt, respond each round.
pub trait Adversary {
    /// Records a session. Returns `false` once the recording budget is spent
    /// and the transcript was not kept.
    fn observe(&mut self, transcript: Transcript) -> bool;
    fn plan(&mut self, first_round: &GridColoring, rng: &mut dyn RngCore);
    fn respond(&mut self, coloring: &GridColoring, rng: &mut dyn RngCore) -> ColorKey;
}

/// Records up to `budget` sessions, then impersonates by guessing a
/// subgroup of what it learned. Type-1 is `budget == 1`.
#[derive(Debug, Clone)]
pub struct Eavesdropper {
    budget: usize,
    transcripts: Vec<Transcript>,
    plan: Option<PlannedAttack>,
}

impl Eavesdropper {
    pub fn new(budget: usize) -> Self {
        Eavesdropper { budget, transcripts: Vec::new(), plan: None }
    }

    pub fn transcripts(&self) -> &[Transcript] {
        &self.transcripts
    }

    pub fn candidates(&self) -> CandidateSet {
        intersect(&self.transcripts).unwrap_or(CandidateSet::everything())
    }

    pub fn planned(&self) -> Option<PlannedAttack> {
        self.plan
    }
}

impl Adversary for Eavesdropper {
    fn observe(&mut self, transcript: Transcript) -> bool {
        if self.transcripts.len() >= self.budget {
            return false;
        }
        self.transcripts.push(transcript);
        true
    }

    fn plan(&mut self, first_round: &GridColoring, rng: &mut dyn RngCore) {
        let known = self.candidates();
        let view = infer_partition(known, first_round);
        self.plan = premature_attack(known, &view, rng).ok();
    }

    fn respond(&mut self, coloring: &GridColoring, rng: &mut dyn RngCore) -> ColorKey {
        match self.plan {
            Some(plan) => plan.respond(coloring),
            None => *ColorKey::ALL.choose(rng).unwrap(),
        }
    }
}

/// Presses a uniformly random key every round.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomKeys;

impl Adversary for RandomKeys {
    fn observe(&mut self, _: Transcript) -> bool {
        false
    }

    fn plan(&mut self, _: &GridColoring, _: &mut dyn RngCore) {}

    fn respond(&mut self, _: &GridColoring, rng: &mut dyn RngCore) -> ColorKey {
        *ColorKey::ALL.choose(rng).unwrap()
    }
}

#[derive(Serialize, Deserialize)]
struct FileHeader {
    format: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
struct FileRound {
    session: u32,
    round: u32,
    coloring: GridColoring,
    response: ColorKey,
}

/// Writes transcripts as a header line followed by one JSON line per round.
pub fn write_transcripts<W: Write>(mut out: W, transcripts: &[Transcript]) -> Result<(), AdversaryError> {
    let header = FileHeader { format: TRANSCRIPT_FORMAT.into(), version: TRANSCRIPT_VERSION };
    serde_json::to_writer(&mut out, &header)?;
    writeln!(out)?;
    for t in transcripts {
        for (i, r) in t.rounds.iter().enumerate() {
            let line = FileRound {
                session: t.session_index,
                round: i as u32 + 1,
                coloring: r.coloring.clone(),
                response: r.response,
            };
            serde_json::to_writer(&mut out, &line)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Reads a file written by [`write_transcripts`]. Consecutive rounds with the
/// same session index and increasing round numbers form one transcript.
pub fn read_transcripts<R: BufRead>(input: R) -> Result<Vec<Transcript>, AdversaryError> {
    let mut lines = input.lines();
    let header: FileHeader = match lines.next() {
        Some(line) => serde_json::from_str(&line?)?,
        None => return Err(AdversaryError::Format("empty file".into())),
    };
    if header.format != TRANSCRIPT_FORMAT || header.version != TRANSCRIPT_VERSION {
        return Err(AdversaryError::Format(format!(
            "unsupported {} v{}",
            header.format, header.version
        )));
    }
    let mut transcripts: Vec<Transcript> = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: FileRound = serde_json::from_str(&line)?;
        let round = Round { coloring: r.coloring, response: r.response };
        match transcripts.last_mut() {
            Some(t) if t.session_index == r.session && r.round as usize == t.rounds.len() + 1 => {
                t.rounds.push(round)
            }
            _ if r.round == 1 => transcripts.push(Transcript {
                session_index: r.session,
                rounds: vec![round],
            }),
            _ => {
                return Err(AdversaryError::Format(format!(
                    "round {} of session {} is out of order",
                    r.round, r.session
                )))
            }
        }
    }
    Ok(transcripts)
}
