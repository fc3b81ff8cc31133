//! Domain types shared by every backend: envelopes, signatures, sequences,
//! models and verdicts, plus the static legality check.
//!
//! A model is a set of per-process sequences of message occurrences. Each
//! occurrence carries a [`Signature`], the dense integer standing for one
//! message kind. A model is *legal* when every signature occurs in exactly
//! two distinct sequences (one sender, one receiver); in strict mode each
//! occurrence must additionally sit in the sequence its envelope names.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signatures::SignatureSpace;

/// Process rank. Ranks are opaque distinct integers, not necessarily `0..n`.
pub type Rank = u32;

/// The identity of a point-to-point message kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Envelope {
    pub tag: u32,
    pub source: Rank,
    pub destination: Rank,
    pub communicator: u32,
}

impl Envelope {
    pub fn new(tag: u32, source: Rank, destination: Rank, communicator: u32) -> Self {
        Envelope {
            tag,
            source,
            destination,
            communicator,
        }
    }

    /// A message from a process to itself is not a point-to-point message.
    pub fn is_self_message(&self) -> bool {
        self.source == self.destination
    }
}

impl fmt::Display for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "tag={},src={},dst={},comm={}",
            self.tag, self.source, self.destination, self.communicator
        )
    }
}

/// Dense nonnegative integer naming one message kind within a [`SignatureSpace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Signature(pub u32);

impl Signature {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Send,
    Recv,
    Unspecified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Occurrences carry envelopes and send/recv roles.
    Strict,
    /// Bare characters; no envelopes, no direction.
    Abstract,
}

/// 1-based line/column of the statement an occurrence was parsed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SourcePos {
    pub line: u32,
    pub column: u32,
}

impl fmt::Display for SourcePos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

/// One send/recv statement (strict) or one character (abstract).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageOccurrence {
    pub signature: Signature,
    pub role: Role,
    pub envelope: Option<Envelope>,
    pub location: Option<SourcePos>,
}

impl MessageOccurrence {
    pub fn abstract_char(signature: Signature) -> Self {
        MessageOccurrence {
            signature,
            role: Role::Unspecified,
            envelope: None,
            location: None,
        }
    }

    pub fn strict(signature: Signature, role: Role, envelope: Envelope) -> Self {
        MessageOccurrence {
            signature,
            role,
            envelope: Some(envelope),
            location: None,
        }
    }

    pub fn at(mut self, location: SourcePos) -> Self {
        self.location = Some(location);
        self
    }

    /// Whether this occurrence may legally appear in the sequence of `rank`.
    /// Abstract occurrences are always consistent.
    pub fn consistent_with(&self, rank: Rank, mode: Mode) -> bool {
        match mode {
            Mode::Abstract => true,
            Mode::Strict => match (self.role, self.envelope) {
                (Role::Send, Some(env)) => env.source == rank && !env.is_self_message(),
                (Role::Recv, Some(env)) => env.destination == rank && !env.is_self_message(),
                _ => false,
            },
        }
    }
}

/// One process's ordered occurrences with a consumption cursor.
///
/// Occurrences before `cursor` have been consumed by rendezvous. Parsed
/// models always have `cursor == 0` and `closed == true`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    pub rank: Rank,
    pub occurrences: Vec<MessageOccurrence>,
    pub cursor: usize,
    pub closed: bool,
}

impl Sequence {
    pub fn new(rank: Rank, occurrences: Vec<MessageOccurrence>) -> Self {
        Sequence {
            rank,
            occurrences,
            cursor: 0,
            closed: true,
        }
    }

    pub fn len(&self) -> usize {
        self.occurrences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occurrences.is_empty()
    }

    pub fn head(&self) -> Option<&MessageOccurrence> {
        self.occurrences.get(self.cursor)
    }

    pub fn remaining(&self) -> usize {
        self.occurrences.len() - self.cursor
    }

    pub fn signatures(&self) -> impl Iterator<Item = Signature> + '_ {
        self.occurrences.iter().map(|o| o.signature)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("process {0} is declared twice")]
    DuplicateRank(Rank),
}

/// A closed set of sequences together with the signature space that issued
/// their signatures.
#[derive(Debug, Clone)]
pub struct Model {
    mode: Mode,
    sequences: Vec<Sequence>,
    space: SignatureSpace,
}

impl Model {
    pub fn new(mode: Mode) -> Self {
        Model {
            mode,
            sequences: Vec::new(),
            space: SignatureSpace::new(),
        }
    }

    pub fn with_space(mode: Mode, space: SignatureSpace) -> Self {
        Model {
            mode,
            sequences: Vec::new(),
            space,
        }
    }

    pub fn push_sequence(&mut self, sequence: Sequence) -> Result<(), ModelError> {
        if self.sequences.iter().any(|s| s.rank == sequence.rank) {
            return Err(ModelError::DuplicateRank(sequence.rank));
        }
        self.sequences.push(sequence);
        Ok(())
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn sequences(&self) -> &[Sequence] {
        &self.sequences
    }

    pub fn sequence(&self, rank: Rank) -> Option<&Sequence> {
        self.sequences.iter().find(|s| s.rank == rank)
    }

    pub fn space(&self) -> &SignatureSpace {
        &self.space
    }

    pub fn space_mut(&mut self) -> &mut SignatureSpace {
        &mut self.space
    }

    /// Total occurrences across all sequences (`n`).
    pub fn message_count(&self) -> usize {
        self.sequences.iter().map(Sequence::len).sum()
    }

    /// Number of distinct signatures actually used by occurrences.
    pub fn distinct_signatures(&self) -> usize {
        let mut seen = vec![false; self.space.len()];
        let mut count = 0;
        for sig in self.sequences.iter().flat_map(Sequence::signatures) {
            if sig.index() >= seen.len() {
                seen.resize(sig.index() + 1, false);
            }
            if !seen[sig.index()] {
                seen[sig.index()] = true;
                count += 1;
            }
        }
        count
    }

    /// Drop roles and envelopes, keeping signatures and the signature space.
    pub fn to_abstract(&self) -> Model {
        let sequences = self
            .sequences
            .iter()
            .map(|s| {
                let occs = s
                    .occurrences
                    .iter()
                    .map(|o| MessageOccurrence {
                        location: o.location,
                        ..MessageOccurrence::abstract_char(o.signature)
                    })
                    .collect();
                Sequence::new(s.rank, occs)
            })
            .collect();
        Model {
            mode: Mode::Abstract,
            sequences,
            space: self.space.clone(),
        }
    }

    /// Same model with sequences listed in the given rank order.
    /// Ranks missing from `order` keep their relative order at the end.
    pub fn reordered(&self, order: &[Rank]) -> Model {
        let mut sequences = Vec::with_capacity(self.sequences.len());
        for r in order {
            if let Some(s) = self.sequence(*r) {
                if !sequences.iter().any(|x: &Sequence| x.rank == *r) {
                    sequences.push(s.clone());
                }
            }
        }
        for s in &self.sequences {
            if !sequences.iter().any(|x| x.rank == s.rank) {
                sequences.push(s.clone());
            }
        }
        Model {
            mode: self.mode,
            sequences,
            space: self.space.clone(),
        }
    }
}

/// Why a model is structurally illegal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IllegalKind {
    /// Signature occurs in more than two distinct sequences.
    TooManySequences,
    /// Signature occurs in only one sequence.
    TooFewSequences,
    /// Strict mode: occurrence sits in a sequence its envelope and role do not name.
    RoleMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IllegalReason {
    pub kind: IllegalKind,
    pub signature: Signature,
    pub envelope: Option<Envelope>,
    /// Distinct ranks containing the signature, ascending. For a role
    /// mismatch, the single offending rank.
    pub ranks: Vec<Rank>,
    /// Position of the offending occurrence for role mismatches.
    pub position: Option<usize>,
}

impl fmt::Display for IllegalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ranks = self
            .ranks
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        match self.kind {
            IllegalKind::TooManySequences => write!(
                f,
                "signature {} occurs in {} processes ({ranks}); expected exactly 2",
                self.signature,
                self.ranks.len()
            ),
            IllegalKind::TooFewSequences => write!(
                f,
                "signature {} occurs only in process {ranks}; expected exactly 2",
                self.signature
            ),
            IllegalKind::RoleMismatch => write!(
                f,
                "signature {} in process {ranks} does not match its envelope or role",
                self.signature
            ),
        }
    }
}

/// Entry of a deadlock report: a sequence stuck at its head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockedHead {
    pub rank: Rank,
    pub position: usize,
    pub signature: Signature,
    pub envelope: Option<Envelope>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeadlockReport {
    /// Every sequence with unconsumed occurrences, ascending by rank.
    pub blocked: Vec<BlockedHead>,
    pub matched_pairs: usize,
    pub residual_messages: usize,
}

impl DeadlockReport {
    /// Builds the report from final cursor positions. Sequences that were
    /// fully consumed are omitted.
    pub fn from_sequences<'a, I>(sequences: I, matched_pairs: usize) -> Self
    where
        I: IntoIterator<Item = (&'a Sequence, usize)>,
    {
        let mut blocked = Vec::new();
        let mut residual = 0;
        for (seq, cursor) in sequences {
            if let Some(head) = seq.occurrences.get(cursor) {
                residual += seq.len() - cursor;
                blocked.push(BlockedHead {
                    rank: seq.rank,
                    position: cursor,
                    signature: head.signature,
                    envelope: head.envelope,
                });
            }
        }
        blocked.sort_by_key(|b| b.rank);
        DeadlockReport {
            blocked,
            matched_pairs,
            residual_messages: residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    NoDeadlock { matched_pairs: usize },
    Deadlock(DeadlockReport),
    Illegal(IllegalReason),
}

impl Verdict {
    pub fn class(&self) -> VerdictClass {
        match self {
            Verdict::NoDeadlock { .. } => VerdictClass::Ok,
            Verdict::Deadlock(_) => VerdictClass::Deadlock,
            Verdict::Illegal(_) => VerdictClass::Illegal,
        }
    }

    pub fn matched_pairs(&self) -> Option<usize> {
        match self {
            Verdict::NoDeadlock { matched_pairs } => Some(*matched_pairs),
            Verdict::Deadlock(r) => Some(r.matched_pairs),
            Verdict::Illegal(_) => None,
        }
    }

    pub fn is_deadlock(&self) -> bool {
        matches!(self, Verdict::Deadlock(_))
    }
}

/// Coarse verdict used when comparing backends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictClass {
    Ok,
    Deadlock,
    Illegal,
}

impl fmt::Display for VerdictClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerdictClass::Ok => "ok",
            VerdictClass::Deadlock => "deadlock",
            VerdictClass::Illegal => "illegal",
        })
    }
}

/// Static legality check over a model.
pub fn validate_static(model: &Model) -> Result<(), IllegalReason> {
    validate_sequences(model.sequences(), model.mode())
}

/// Static legality check over any collection of sequences.
///
/// The reported violation is canonical: sequences are scanned in ascending
/// rank order, and among offending signatures the one whose first occurrence
/// comes earliest in that scan is reported. Sequence-count violations take
/// precedence over role mismatches. The result therefore does not depend on
/// the order sequences are listed in, nor on how signatures were numbered.
pub fn validate_sequences(sequences: &[Sequence], mode: Mode) -> Result<(), IllegalReason> {
    struct Seen {
        first: (usize, usize),
        envelope: Option<Envelope>,
        ranks: Vec<Rank>,
    }

    let mut order: Vec<usize> = (0..sequences.len()).collect();
    order.sort_by_key(|&i| sequences[i].rank);

    let mut seen: HashMap<Signature, Seen> = HashMap::new();
    for (ord, &i) in order.iter().enumerate() {
        let seq = &sequences[i];
        for (pos, occ) in seq.occurrences.iter().enumerate() {
            let entry = seen.entry(occ.signature).or_insert_with(|| Seen {
                first: (ord, pos),
                envelope: occ.envelope,
                ranks: Vec::new(),
            });
            if entry.ranks.last() != Some(&seq.rank) {
                entry.ranks.push(seq.rank);
            }
        }
    }

    let worst = seen
        .iter()
        .filter(|(_, s)| s.ranks.len() != 2)
        .min_by_key(|(_, s)| s.first);
    if let Some((sig, s)) = worst {
        return Err(IllegalReason {
            kind: if s.ranks.len() > 2 {
                IllegalKind::TooManySequences
            } else {
                IllegalKind::TooFewSequences
            },
            signature: *sig,
            envelope: s.envelope,
            ranks: s.ranks.clone(),
            position: None,
        });
    }

    if mode == Mode::Strict {
        for &i in &order {
            let seq = &sequences[i];
            for (pos, occ) in seq.occurrences.iter().enumerate() {
                if !occ.consistent_with(seq.rank, mode) {
                    return Err(IllegalReason {
                        kind: IllegalKind::RoleMismatch,
                        signature: occ.signature,
                        envelope: occ.envelope,
                        ranks: vec![seq.rank],
                        position: Some(pos),
                    });
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abstract_model(lines: &[&str]) -> Model {
        let mut m = Model::new(Mode::Abstract);
        for (rank, line) in lines.iter().enumerate() {
            let occs = line
                .chars()
                .map(|c| MessageOccurrence::abstract_char(m.space_mut().intern_character(c)))
                .collect();
            m.push_sequence(Sequence::new(rank as Rank, occs)).unwrap();
        }
        m
    }

    #[test]
    fn ring_cycle_is_legal() {
        assert_eq!(validate_static(&abstract_model(&["ab", "bc", "ca"])), Ok(()));
    }

    #[test]
    fn three_way_signature_is_illegal() {
        let err = validate_static(&abstract_model(&["a", "a", "a"])).unwrap_err();
        assert_eq!(err.kind, IllegalKind::TooManySequences);
        assert_eq!(err.signature, Signature(0));
        assert_eq!(err.ranks, vec![0, 1, 2]);
    }

    #[test]
    fn empty_model_is_legal() {
        assert_eq!(validate_static(&Model::new(Mode::Abstract)), Ok(()));
    }

    #[test]
    fn imbalance_is_not_illegal() {
        assert_eq!(validate_static(&abstract_model(&["aa", "a"])), Ok(()));
    }

    #[test]
    fn lone_signature_is_illegal() {
        let err = validate_static(&abstract_model(&["ab", "a"])).unwrap_err();
        assert_eq!(err.kind, IllegalKind::TooFewSequences);
        assert_eq!(err.ranks, vec![0]);
    }

    #[test]
    fn validation_ignores_sequence_order() {
        let m = abstract_model(&["ab", "bc", "cd", "c"]);
        let a = validate_static(&m);
        let b = validate_static(&m.reordered(&[3, 1, 2, 0]));
        assert!(a.is_err());
        assert_eq!(a, b);
    }

    #[test]
    fn strict_role_mismatch() {
        let mut m = Model::new(Mode::Strict);
        let env = Envelope::new(1, 0, 1, 0);
        let sig = m.space_mut().set_signature_for(env).unwrap();
        m.push_sequence(Sequence::new(0, vec![MessageOccurrence::strict(sig, Role::Send, env)]))
            .unwrap();
        // rank 1 claims to send a message whose source is 0
        m.push_sequence(Sequence::new(1, vec![MessageOccurrence::strict(sig, Role::Send, env)]))
            .unwrap();
        let err = validate_static(&m).unwrap_err();
        assert_eq!(err.kind, IllegalKind::RoleMismatch);
        assert_eq!(err.ranks, vec![1]);
        assert_eq!(err.position, Some(0));
    }

    #[test]
    fn duplicate_rank_rejected() {
        let mut m = Model::new(Mode::Abstract);
        m.push_sequence(Sequence::new(4, vec![])).unwrap();
        assert_eq!(
            m.push_sequence(Sequence::new(4, vec![])),
            Err(ModelError::DuplicateRank(4))
        );
    }

    #[test]
    fn report_conservation() {
        let m = abstract_model(&["aa", "a"]);
        let seqs = m.sequences();
        let r = DeadlockReport::from_sequences([(&seqs[0], 1), (&seqs[1], 1)], 1);
        assert_eq!(r.blocked.len(), 1);
        assert_eq!(2 * r.matched_pairs + r.residual_messages, m.message_count());
    }
}
