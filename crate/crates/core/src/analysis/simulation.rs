use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::wilson_interval;
use super::{domain, Result};
use crate::adversary::{msv_attack, Adversary, CandidateSet, Eavesdropper, Transcript};
use crate::grid::{CharIndex, CELL_COUNT};
use crate::protocol::{ChallengeIndex, GroupState, Scheme, SessionSpec, SessionState, Verdict};

/// What the simulated adversary does with its recordings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Records up to `budget` sessions and intersects.
    Record,
    /// Records `budget` sessions, then logs in tracking a guessed subgroup.
    Premature,
    /// Records `budget` sessions on each of two systems sharing the character.
    Msv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub scheme: Scheme,
    pub strategy: Strategy,
    pub trials: u64,
    /// Recording sessions available to the adversary.
    pub budget: u32,
    pub seed: u64,
}

/// What one simulated history produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    /// Session and round (1-based) at which one candidate remained.
    pub reveal: Option<(u32, u32)>,
    /// Candidate count after each recorded session.
    pub candidates: Vec<u32>,
    pub verdict: Option<Verdict>,
    /// Soundness or lifecycle checks that failed in this trial.
    pub violations: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    /// Index `i` counts histories revealed in session `i + 1`; the last
    /// entry counts histories never revealed within the budget.
    pub reveal_histogram: Vec<u64>,
    /// Rounds (1..=6) at which the reveal happened, over revealed histories.
    pub reveal_round_histogram: [u64; 6],
    /// `(session, candidate count) -> histories`.
    pub candidate_histogram: BTreeMap<(u32, u32), u64>,
    pub success: u64,
    pub failure: u64,
    pub detected: u64,
    pub invariant_violations: u64,
}

impl SimulationReport {
    pub fn trials(&self) -> u64 {
        self.config.trials
    }

    /// Fraction of histories revealed within `sessions` sessions.
    pub fn revealed_within(&self, sessions: u32) -> f64 {
        let n = self.reveal_histogram.len() - 1;
        let hits: u64 = self.reveal_histogram[..(sessions as usize).min(n)].iter().sum();
        hits as f64 / self.trials() as f64
    }

    /// Fraction of histories still hiding the secret after `sessions`.
    pub fn surviving_beyond(&self, sessions: u32) -> f64 {
        1.0 - self.revealed_within(sessions)
    }

    pub fn attempts(&self) -> u64 {
        self.success + self.failure + self.detected
    }

    pub fn detection_rate(&self) -> f64 {
        self.detected as f64 / self.attempts().max(1) as f64
    }

    pub fn success_rate(&self) -> f64 {
        self.success as f64 / self.attempts().max(1) as f64
    }

    /// Fraction of histories whose session-`session` candidate count is `size`.
    pub fn candidate_fraction(&self, session: u32, size: u32) -> f64 {
        let n = self.candidate_histogram.get(&(session, size)).copied().unwrap_or(0);
        n as f64 / self.trials() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,key,count,trials,fraction,ci_low,ci_high\n");
        let trials = self.trials();
        let mut line = |metric: &str, key: &str, count: u64, of: u64| {
            let frac = if of == 0 { 0.0 } else { count as f64 / of as f64 };
            let (lo, hi) = wilson_interval(count, of);
            writeln!(out, "{metric},{key},{count},{of},{frac:.6},{lo:.6},{hi:.6}").unwrap();
        };
        let last = self.reveal_histogram.len() - 1;
        for (i, &count) in self.reveal_histogram.iter().enumerate() {
            let key = if i == last { "never".to_owned() } else { (i + 1).to_string() };
            line("reveal_session", &key, count, trials);
        }
        let revealed: u64 = self.reveal_round_histogram.iter().sum();
        for (i, &count) in self.reveal_round_histogram.iter().enumerate() {
            line("reveal_round", &(i + 1).to_string(), count, revealed);
        }
        for (&(session, size), &count) in &self.candidate_histogram {
            line("candidates", &format!("s{session}:{size}"), count, trials);
        }
        let attempts = self.attempts();
        if attempts > 0 {
            line("verdict", "success", self.success, attempts);
            line("verdict", "failure", self.failure, attempts);
            line("verdict", "detected", self.detected, attempts);
        }
        line("invariant", "violations", self.invariant_violations, trials);
        out
    }
}

/// Runs `config.trials` independent histories in parallel. Trial `i` uses
/// stream `i` of a ChaCha generator keyed by the master seed, so results do
/// not depend on thread scheduling.
pub fn monte_carlo(config: &SimulationConfig) -> Result<SimulationReport> {
    if config.trials == 0 {
        return domain("trials must be at least 1");
    }
    let lifecycle_limit = 3;
    match (config.scheme, config.strategy) {
        (Scheme::Icip, Strategy::Premature) if config.budget >= lifecycle_limit => {
            return domain("icip premature attack needs budget <= 2")
        }
        (Scheme::Bcip, Strategy::Msv) => return domain("msv applies to icip only"),
        (_, Strategy::Msv) if config.budget == 0 || config.budget >= lifecycle_limit => {
            return domain("msv needs budget 1 or 2")
        }
        (_, Strategy::Record) if config.budget == 0 => return domain("record needs budget >= 1"),
        _ => {}
    }
    let outcomes: Vec<TrialOutcome> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(trial);
            run_trial(config, &mut rng)
        })
        .collect();
    Ok(aggregate(config, &outcomes))
}

fn aggregate(config: &SimulationConfig, outcomes: &[TrialOutcome]) -> SimulationReport {
    let sessions = outcomes.iter().map(|o| o.candidates.len()).max().unwrap_or(0);
    let mut report = SimulationReport {
        config: *config,
        reveal_histogram: vec![0; sessions + 1],
        reveal_round_histogram: [0; 6],
        candidate_histogram: BTreeMap::new(),
        success: 0,
        failure: 0,
        detected: 0,
        invariant_violations: 0,
    };
    for o in outcomes {
        match o.reveal {
            Some((s, r)) => {
                report.reveal_histogram[s as usize - 1] += 1;
                report.reveal_round_histogram[r as usize - 1] += 1;
            }
            None => report.reveal_histogram[sessions] += 1,
        }
        for (i, &size) in o.candidates.iter().enumerate() {
            *report.candidate_histogram.entry((i as u32 + 1, size)).or_default() += 1;
        }
        match o.verdict {
            Some(Verdict::Success) => report.success += 1,
            Some(Verdict::Failure) => report.failure += 1,
            Some(Verdict::Detected) => report.detected += 1,
            _ => {}
        }
        report.invariant_violations += o.violations as u64;
    }
    report
}

fn spec(secret: CharIndex, stage: GroupState, scheme: Scheme) -> SessionSpec {
    SessionSpec {
        session_id: String::new(),
        username: "sim".into(),
        challenge: ChallengeIndex::new(1).expect("1 is a valid index"),
        secret,
        stage,
        scheme,
    }
}

/// Plays one honest session; returns its transcript and the next stage.
fn honest_session(
    secret: CharIndex,
    stage: GroupState,
    scheme: Scheme,
    index: u32,
    rng: &mut ChaCha8Rng,
    violations: &mut u32,
) -> (Transcript, GroupState) {
    let mut s = SessionState::begin(spec(secret, stage, scheme), rng).expect("stage has uses left");
    while !s.verdict().is_final() {
        s.submit_response(s.expected_key()).expect("session is open");
    }
    if s.verdict() != Verdict::Success {
        *violations += 1;
    }
    let next = match scheme {
        Scheme::Icip => s.commit_success().unwrap_or(stage),
        Scheme::Bcip => stage,
    };
    (Transcript::capture(&s, index), next)
}

fn run_trial(config: &SimulationConfig, rng: &mut ChaCha8Rng) -> TrialOutcome {
    let secret = CharIndex::new(rng.random_range(0..CELL_COUNT)).expect("in range");
    match config.strategy {
        Strategy::Record => record_trial(config, secret, rng),
        Strategy::Premature => premature_trial(config, secret, rng),
        Strategy::Msv => msv_trial(config, secret, rng),
    }
}

fn record_trial(config: &SimulationConfig, secret: CharIndex, rng: &mut ChaCha8Rng) -> TrialOutcome {
    let mut outcome = TrialOutcome { reveal: None, candidates: Vec::new(), verdict: None, violations: 0 };
    let mut known = CandidateSet::everything();
    let mut stage = GroupState::Unused;
    for session in 1..=config.budget {
        if stage.uses_remaining() == 0 {
            break;
        }
        let (t, next) = honest_session(secret, stage, config.scheme, session, rng, &mut outcome.violations);
        stage = next;
        for (round, r) in t.rounds.iter().enumerate() {
            known = known.observe(r);
            if known.len() == 1 && outcome.reveal.is_none() {
                outcome.reveal = Some((session, round as u32 + 1));
            }
        }
        if !known.members().contains(secret) {
            outcome.violations += 1;
        }
        if config.scheme == Scheme::Icip && stage.members() != Some(known.members()) {
            outcome.violations += 1;
        }
        outcome.candidates.push(known.len() as u32);
    }
    outcome
}

fn premature_trial(config: &SimulationConfig, secret: CharIndex, rng: &mut ChaCha8Rng) -> TrialOutcome {
    let mut outcome = TrialOutcome { reveal: None, candidates: Vec::new(), verdict: None, violations: 0 };
    let mut adversary = Eavesdropper::new(config.budget as usize);
    let mut stage = GroupState::Unused;
    for session in 1..=config.budget {
        let (t, next) = honest_session(secret, stage, config.scheme, session, rng, &mut outcome.violations);
        stage = next;
        adversary.observe(t);
        outcome.candidates.push(adversary.candidates().len() as u32);
    }
    let mut attack = SessionState::begin(spec(secret, stage, config.scheme), rng).expect("stage has uses left");
    adversary.plan(attack.current_coloring(), rng);
    while !attack.verdict().is_final() {
        let key = adversary.respond(attack.current_coloring(), rng);
        attack.submit_response(key).expect("session is open");
    }
    outcome.verdict = Some(attack.verdict());
    outcome
}

fn msv_trial(config: &SimulationConfig, secret: CharIndex, rng: &mut ChaCha8Rng) -> TrialOutcome {
    let mut outcome = TrialOutcome { reveal: None, candidates: Vec::new(), verdict: None, violations: 0 };
    let mut systems: [Vec<Transcript>; 2] = [Vec::new(), Vec::new()];
    for recorded in systems.iter_mut() {
        let mut stage = GroupState::Unused;
        for session in 1..=config.budget {
            let (t, next) = honest_session(secret, stage, Scheme::Icip, session, rng, &mut outcome.violations);
            stage = next;
            recorded.push(t);
        }
    }
    match msv_attack(&systems[0], &systems[1]) {
        Ok(result) => {
            if !result.members().contains(secret) {
                outcome.violations += 1;
            }
            if result.len() == 1 {
                outcome.reveal = Some((1, crate::protocol::ROUNDS_PER_SESSION as u32));
            }
            outcome.candidates.push(result.len() as u32);
        }
        Err(_) => outcome.violations += 1,
    }
    outcome
}
