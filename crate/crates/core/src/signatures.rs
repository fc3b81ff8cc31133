//! Signature space: dense, create-or-retrieve integer names for message kinds.
//!
//! Envelopes are keyed through nested hash maps ordered
//! communicator → source → destination → tag, so traffic on one communicator
//! shares its outer buckets. Abstract characters use a flat map. Both kinds
//! draw from one counter, so the `k`-th distinct key always receives `k - 1`.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::model::{Envelope, Signature};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SignatureError {
    #[error("envelope {0} names the same process as source and destination")]
    SelfMessage(Envelope),
    #[error("signature {0} was never issued by this space")]
    Unknown(Signature),
    #[error("signature space exhausted")]
    Exhausted,
}

/// What a signature was registered from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignatureKey {
    Envelope(Envelope),
    Char(char),
}

impl fmt::Display for SignatureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignatureKey::Envelope(e) => e.fmt(f),
            SignatureKey::Char(c) => write!(f, "{c}"),
        }
    }
}

type TagMap = HashMap<u32, Signature>;
type DestMap = HashMap<u32, TagMap>;
type SourceMap = HashMap<u32, DestMap>;

#[derive(Debug, Clone, Default)]
pub struct SignatureSpace {
    envelopes: HashMap<u32, SourceMap>,
    chars: HashMap<char, Signature>,
    reverse: Vec<SignatureKey>,
}

impl SignatureSpace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the signature for `envelope`, issuing the next dense value on
    /// first sight.
    pub fn set_signature_for(&mut self, envelope: Envelope) -> Result<Signature, SignatureError> {
        if envelope.is_self_message() {
            return Err(SignatureError::SelfMessage(envelope));
        }
        let next = self.next_value()?;
        let slot = self
            .envelopes
            .entry(envelope.communicator)
            .or_default()
            .entry(envelope.source)
            .or_default()
            .entry(envelope.destination)
            .or_default()
            .entry(envelope.tag);
        let sig = *slot.or_insert(next);
        if sig == next {
            self.reverse.push(SignatureKey::Envelope(envelope));
        }
        Ok(sig)
    }

    /// Abstract-mode analogue of [`set_signature_for`](Self::set_signature_for).
    pub fn intern_character(&mut self, ch: char) -> Signature {
        let next = Signature(self.reverse.len() as u32);
        let sig = *self.chars.entry(ch).or_insert(next);
        if sig == next {
            self.reverse.push(SignatureKey::Char(ch));
        }
        sig
    }

    /// Lookup without registering.
    pub fn get(&self, envelope: &Envelope) -> Option<Signature> {
        self.envelopes
            .get(&envelope.communicator)?
            .get(&envelope.source)?
            .get(&envelope.destination)?
            .get(&envelope.tag)
            .copied()
    }

    pub fn get_char(&self, ch: char) -> Option<Signature> {
        self.chars.get(&ch).copied()
    }

    /// The envelope a signature was registered from; `None` for characters.
    pub fn envelope_of(&self, sig: Signature) -> Result<Option<Envelope>, SignatureError> {
        match self.key_of(sig)? {
            SignatureKey::Envelope(e) => Ok(Some(e)),
            SignatureKey::Char(_) => Ok(None),
        }
    }

    pub fn key_of(&self, sig: Signature) -> Result<SignatureKey, SignatureError> {
        self.reverse
            .get(sig.index())
            .copied()
            .ok_or(SignatureError::Unknown(sig))
    }

    /// Human-readable name: the envelope when there is one, else the character.
    pub fn label(&self, sig: Signature) -> String {
        match self.key_of(sig) {
            Ok(key) => key.to_string(),
            Err(_) => sig.to_string(),
        }
    }

    /// Number of issued signatures (equals the next value to be issued).
    pub fn len(&self) -> usize {
        self.reverse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reverse.is_empty()
    }

    fn next_value(&self) -> Result<Signature, SignatureError> {
        u32::try_from(self.reverse.len())
            .map(Signature)
            .map_err(|_| SignatureError::Exhausted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_and_idempotent() {
        let mut space = SignatureSpace::new();
        let e1 = Envelope::new(7, 0, 2, 0);
        let e2 = Envelope::new(7, 0, 1, 0);
        assert_eq!(space.set_signature_for(e1), Ok(Signature(0)));
        assert_eq!(space.set_signature_for(e1), Ok(Signature(0)));
        assert_eq!(space.len(), 1);
        assert_eq!(space.set_signature_for(e2), Ok(Signature(1)));
        assert_eq!(space.get(&e2), Some(Signature(1)));
    }

    #[test]
    fn rejects_self_message() {
        let mut space = SignatureSpace::new();
        let e = Envelope::new(0, 3, 3, 0);
        assert_eq!(space.set_signature_for(e), Err(SignatureError::SelfMessage(e)));
        assert!(space.is_empty());
    }

    #[test]
    fn interning_characters() {
        let mut space = SignatureSpace::new();
        assert_eq!(space.intern_character('a'), Signature(0));
        assert_eq!(space.intern_character('b'), Signature(1));
        assert_eq!(space.intern_character('a'), Signature(0));
        for c in "abbcca".chars() {
            space.intern_character(c);
        }
        assert_eq!(space.len(), 3);
    }

    #[test]
    fn reverse_lookup() {
        let mut space = SignatureSpace::new();
        let e = Envelope::new(7, 0, 2, 0);
        let sig = space.set_signature_for(e).unwrap();
        assert_eq!(space.envelope_of(sig), Ok(Some(e)));

        let mut abs = SignatureSpace::new();
        for c in ['x', 'y', 'z'] {
            abs.intern_character(c);
        }
        assert_eq!(abs.envelope_of(Signature(0)), Ok(None));
        assert_eq!(
            abs.envelope_of(Signature(99)),
            Err(SignatureError::Unknown(Signature(99)))
        );
    }

    #[test]
    fn every_field_distinguishes() {
        let mut space = SignatureSpace::new();
        let base = Envelope::new(1, 2, 3, 4);
        let variants = [
            base,
            Envelope { tag: 9, ..base },
            Envelope { source: 9, ..base },
            Envelope { destination: 9, ..base },
            Envelope { communicator: 9, ..base },
        ];
        let sigs: Vec<_> = variants
            .iter()
            .map(|e| space.set_signature_for(*e).unwrap())
            .collect();
        assert_eq!(sigs, (0..5).map(Signature).collect::<Vec<_>>());
    }

    #[test]
    fn label_prefers_envelope() {
        let mut space = SignatureSpace::new();
        space.intern_character('q');
        space.set_signature_for(Envelope::new(1, 0, 2, 0)).unwrap();
        assert_eq!(space.label(Signature(0)), "q");
        assert_eq!(space.label(Signature(1)), "tag=1,src=0,dst=2,comm=0");
        assert_eq!(space.label(Signature(5)), "#5");
    }
}
