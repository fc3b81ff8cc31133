//! Multi-queue matching engine.
//!
//! Each sequence is a queue of signatures. A FIFO of *ready* sequences holds
//! every sequence whose head has not yet been examined. A step takes the next
//! ready sequence and registers its head with the matcher for that signature.
//! If the matcher already holds a pending head from the other sequence the two
//! heads rendezvous: both cursors advance and both sequences go back on the
//! ready queue if they have more to examine. Otherwise the sequence blocks on
//! the matcher until its partner arrives.
//!
//! Every occurrence is registered at most once, so a full run takes at most
//! `n` steps and `O(n)` space. Sequences may grow at the tail between drains
//! (streaming); a verdict is only final once every sequence is closed.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::model::{
    validate_sequences, DeadlockReport, IllegalKind, IllegalReason, MessageOccurrence, Mode,
    Model, Rank, Sequence, Signature, Verdict,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("process {0} already exists")]
    DuplicateRank(Rank),
    #[error("engine already loaded")]
    AlreadyLoaded,
    #[error("process {0} is unknown")]
    UnknownRank(Rank),
    #[error("process {0} is closed")]
    Closed(Rank),
    #[error("engine has reached a final verdict")]
    Finished,
    #[error("strict engine requires an envelope on every occurrence (process {0})")]
    MissingEnvelope(Rank),
}

/// Per-signature matcher. Holds at most two member ranks and at most one
/// pending head, so its size is constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatcherRecord {
    pub signature: Signature,
    members: [Option<u32>; 2],
    pending: Option<(u32, usize)>,
    pub matched_count: usize,
}

impl MatcherRecord {
    fn new(signature: Signature) -> Self {
        MatcherRecord {
            signature,
            members: [None; 2],
            pending: None,
            matched_count: 0,
        }
    }

    /// Records `slot` as a member. Returns `false` if it would be a third.
    fn admit(&mut self, slot: u32) -> bool {
        match self.members {
            [Some(a), _] if a == slot => true,
            [_, Some(b)] if b == slot => true,
            [None, _] => {
                self.members[0] = Some(slot);
                true
            }
            [Some(_), None] => {
                self.members[1] = Some(slot);
                true
            }
            _ => false,
        }
    }

    pub fn member_count(&self) -> usize {
        self.members.iter().flatten().count()
    }

    pub fn is_pending(&self) -> bool {
        self.pending.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    Progressed,
    QueueEmpty,
    Halted(Verdict),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DrainOutcome {
    /// Nothing left to examine but some sequence may still grow.
    StillOpen,
    Verdict(Verdict),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Phase {
    Running,
    /// Illegality detected while sequences were still open. Matching has
    /// stopped; appends and closes are still recorded so the final reason
    /// can be computed over the complete model.
    Halted(IllegalReason),
    Finished(Verdict),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineStats {
    pub steps: usize,
    pub matched_pairs: usize,
    /// Matchers created so far.
    pub table_size: usize,
    pub appended: usize,
    pub idle_wakeups: usize,
}

#[derive(Debug, Clone)]
pub struct Engine {
    mode: Mode,
    sequences: Vec<Sequence>,
    slot_of: HashMap<Rank, u32>,
    matchers: Vec<Option<MatcherRecord>>,
    ready: VecDeque<u32>,
    open: usize,
    loaded: bool,
    stats: EngineStats,
    phase: Phase,
}

impl Engine {
    pub fn new(mode: Mode) -> Self {
        Engine {
            mode,
            sequences: Vec::new(),
            slot_of: HashMap::new(),
            matchers: Vec::new(),
            ready: VecDeque::new(),
            open: 0,
            loaded: false,
            stats: EngineStats::default(),
            phase: Phase::Running,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn stats(&self) -> EngineStats {
        self.stats
    }

    pub fn sequences(&self) -> &[Sequence] {
        &self.sequences
    }

    pub fn sequence(&self, rank: Rank) -> Option<&Sequence> {
        self.slot_of.get(&rank).map(|&s| &self.sequences[s as usize])
    }

    pub fn matcher(&self, sig: Signature) -> Option<&MatcherRecord> {
        self.matchers.get(sig.index()).and_then(Option::as_ref)
    }

    /// Whether `rank`'s head is registered and waiting for its partner.
    pub fn is_blocked(&self, rank: Rank) -> bool {
        let Some(&slot) = self.slot_of.get(&rank) else {
            return false;
        };
        let seq = &self.sequences[slot as usize];
        seq.head()
            .and_then(|h| self.matcher(h.signature))
            .and_then(|m| m.pending)
            .is_some_and(|(s, pos)| s == slot && pos == seq.cursor)
    }

    pub fn ready_ranks(&self) -> Vec<Rank> {
        self.ready
            .iter()
            .map(|&s| self.sequences[s as usize].rank)
            .collect()
    }

    pub fn is_finished(&self) -> bool {
        matches!(self.phase, Phase::Finished(_))
    }

    pub fn verdict(&self) -> Option<&Verdict> {
        match &self.phase {
            Phase::Finished(v) => Some(v),
            _ => None,
        }
    }

    pub fn message_count(&self) -> usize {
        self.sequences.iter().map(Sequence::len).sum()
    }

    /// Attaches all sequences of `model`, enqueueing the nonempty ones in
    /// model order. Allowed once, on an engine with no sequences.
    pub fn load(&mut self, model: &Model) -> Result<(), EngineError> {
        if self.loaded || !self.sequences.is_empty() {
            return Err(EngineError::AlreadyLoaded);
        }
        for seq in model.sequences() {
            if self.slot_of.contains_key(&seq.rank) {
                return Err(EngineError::DuplicateRank(seq.rank));
            }
            if self.mode == Mode::Strict && seq.occurrences.iter().any(|o| o.envelope.is_none()) {
                return Err(EngineError::MissingEnvelope(seq.rank));
            }
        }
        self.sequences.reserve(model.sequences().len());
        for seq in model.sequences() {
            let slot = self.sequences.len() as u32;
            self.slot_of.insert(seq.rank, slot);
            let mut copy = seq.clone();
            copy.cursor = 0;
            self.stats.appended += copy.len();
            if !copy.closed {
                self.open += 1;
            }
            if !copy.is_empty() {
                self.ready.push_back(slot);
            }
            self.sequences.push(copy);
        }
        self.loaded = true;
        Ok(())
    }

    /// Appends occurrences at the tail of `rank`, creating an open empty
    /// sequence on first use.
    pub fn append(&mut self, rank: Rank, occurrences: &[MessageOccurrence]) -> Result<(), EngineError> {
        if self.is_finished() {
            return Err(EngineError::Finished);
        }
        if self.mode == Mode::Strict && occurrences.iter().any(|o| o.envelope.is_none()) {
            return Err(EngineError::MissingEnvelope(rank));
        }
        let slot = match self.slot_of.get(&rank) {
            Some(&s) => s,
            None => {
                let s = self.sequences.len() as u32;
                self.slot_of.insert(rank, s);
                let mut seq = Sequence::new(rank, Vec::new());
                seq.closed = false;
                self.sequences.push(seq);
                self.open += 1;
                s
            }
        };
        let seq = &mut self.sequences[slot as usize];
        if seq.closed {
            return Err(EngineError::Closed(rank));
        }
        let idle = seq.cursor == seq.len();
        seq.occurrences.extend_from_slice(occurrences);
        self.stats.appended += occurrences.len();
        if idle && !occurrences.is_empty() && matches!(self.phase, Phase::Running) {
            self.ready.push_back(slot);
            self.stats.idle_wakeups += 1;
        }
        Ok(())
    }

    pub fn close(&mut self, rank: Rank) -> Result<(), EngineError> {
        if self.is_finished() {
            return Err(EngineError::Finished);
        }
        let slot = *self.slot_of.get(&rank).ok_or(EngineError::UnknownRank(rank))?;
        let seq = &mut self.sequences[slot as usize];
        if seq.closed {
            return Err(EngineError::Closed(rank));
        }
        seq.closed = true;
        self.open -= 1;
        Ok(())
    }

    /// Examines the head of the next ready sequence.
    pub fn step(&mut self) -> Result<StepOutcome, EngineError> {
        match &self.phase {
            Phase::Finished(_) => return Err(EngineError::Finished),
            Phase::Halted(reason) => return Ok(StepOutcome::Halted(Verdict::Illegal(reason.clone()))),
            Phase::Running => {}
        }
        let Some(slot) = self.ready.pop_front() else {
            return Ok(StepOutcome::QueueEmpty);
        };
        self.stats.steps += 1;

        let seq = &self.sequences[slot as usize];
        let cursor = seq.cursor;
        let head = seq.occurrences[cursor];
        if !head.consistent_with(seq.rank, self.mode) {
            let trigger = IllegalReason {
                kind: IllegalKind::RoleMismatch,
                signature: head.signature,
                envelope: head.envelope,
                ranks: vec![seq.rank],
                position: Some(cursor),
            };
            return Ok(StepOutcome::Halted(self.halt(trigger)));
        }

        let idx = head.signature.index();
        if idx >= self.matchers.len() {
            self.matchers.resize(idx + 1, None);
        }
        let matcher = self.matchers[idx].get_or_insert_with(|| {
            self.stats.table_size += 1;
            MatcherRecord::new(head.signature)
        });

        if !matcher.admit(slot) {
            let mut ranks: Vec<Rank> = matcher
                .members
                .iter()
                .flatten()
                .map(|&s| self.sequences[s as usize].rank)
                .chain(std::iter::once(self.sequences[slot as usize].rank))
                .collect();
            ranks.sort_unstable();
            let trigger = IllegalReason {
                kind: IllegalKind::TooManySequences,
                signature: head.signature,
                envelope: head.envelope,
                ranks,
                position: None,
            };
            return Ok(StepOutcome::Halted(self.halt(trigger)));
        }

        match matcher.pending.take() {
            Some((partner, _)) => {
                debug_assert_ne!(partner, slot);
                matcher.matched_count += 1;
                self.stats.matched_pairs += 1;
                self.sequences[slot as usize].cursor += 1;
                self.sequences[partner as usize].cursor += 1;
                let (lo, hi) = if self.sequences[slot as usize].rank < self.sequences[partner as usize].rank {
                    (slot, partner)
                } else {
                    (partner, slot)
                };
                for s in [lo, hi] {
                    let seq = &self.sequences[s as usize];
                    if seq.cursor < seq.len() {
                        self.ready.push_back(s);
                    }
                }
            }
            None => matcher.pending = Some((slot, cursor)),
        }
        Ok(StepOutcome::Progressed)
    }

    /// Steps until the ready queue is empty, then decides if every sequence
    /// is closed.
    pub fn drain(&mut self) -> DrainOutcome {
        match &self.phase {
            Phase::Finished(v) => return DrainOutcome::Verdict(v.clone()),
            Phase::Halted(trigger) => {
                let trigger = trigger.clone();
                return DrainOutcome::Verdict(self.halt(trigger));
            }
            Phase::Running => {}
        }
        if let Some(v) = self.advance() {
            return DrainOutcome::Verdict(v);
        }
        if self.open > 0 {
            return DrainOutcome::StillOpen;
        }
        let verdict = self.final_verdict();
        self.phase = Phase::Finished(verdict.clone());
        DrainOutcome::Verdict(verdict)
    }

    /// Steps until the ready queue is empty without deciding anything about
    /// leftovers. Returns the illegal verdict if matching halted.
    pub fn advance(&mut self) -> Option<Verdict> {
        loop {
            match self.step() {
                Ok(StepOutcome::Progressed) => continue,
                Ok(StepOutcome::QueueEmpty) => return None,
                Ok(StepOutcome::Halted(v)) => return Some(v),
                Err(_) => return self.verdict().cloned(),
            }
        }
    }

    /// Number of sequences that may still grow.
    pub fn open_count(&self) -> usize {
        self.open
    }

    /// Verdict once the queue is empty and everything is closed.
    fn final_verdict(&self) -> Verdict {
        let matched_pairs = self.stats.matched_pairs;
        if self.sequences.iter().all(|s| s.cursor == s.len()) {
            return Verdict::NoDeadlock { matched_pairs };
        }
        // Leftovers: either a structural violation that never surfaced as a
        // third registration, or a genuine deadlock.
        if let Err(reason) = validate_sequences(&self.sequences, self.mode) {
            return Verdict::Illegal(reason);
        }
        Verdict::Deadlock(DeadlockReport::from_sequences(
            self.sequences.iter().map(|s| (s, s.cursor)),
            matched_pairs,
        ))
    }

    fn halt(&mut self, trigger: IllegalReason) -> Verdict {
        self.ready.clear();
        if self.open == 0 {
            let reason = validate_sequences(&self.sequences, self.mode)
                .err()
                .unwrap_or(trigger);
            let v = Verdict::Illegal(reason);
            self.phase = Phase::Finished(v.clone());
            v
        } else {
            self.phase = Phase::Halted(trigger.clone());
            Verdict::Illegal(trigger)
        }
    }
}

/// One-shot batch check: load, drain, verdict.
pub fn engine_check(model: &Model) -> Verdict {
    engine_check_with_stats(model).0
}

pub fn engine_check_with_stats(model: &Model) -> (Verdict, EngineStats) {
    let mut engine = Engine::new(model.mode());
    if let Err(e) = engine.load(model) {
        unreachable!("fresh engine rejected a model: {e}");
    }
    let verdict = match engine.drain() {
        DrainOutcome::Verdict(v) => v,
        DrainOutcome::StillOpen => unreachable!("parsed models are closed"),
    };
    (verdict, engine.stats())
}
