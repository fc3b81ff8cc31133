//! Line-oriented event protocol for incremental checking.
//!
//! ```text
//! append <rank> <token>...   # abstract characters, or tag,src,dst[,comm]
//! close <rank>
//! end
//! ```
//!
//! The session runs the engine to quiescence after every event and decides
//! the verdict at `end`, since new processes may appear until then. A stream
//! is abstract or strict depending on its first token unless the mode is
//! fixed up front.

use thiserror::Error;

use crate::engine::{DrainOutcome, Engine, EngineError};
use crate::model::{Envelope, MessageOccurrence, Mode, Rank, Role, Verdict};
use crate::report::{Report, Stats};
use crate::signatures::{SignatureError, SignatureSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Token {
    Char(char),
    Envelope(Envelope),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Append { rank: Rank, tokens: Vec<Token> },
    Close(Rank),
    End,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StreamError {
    #[error("malformed event: {0}")]
    Malformed(String),
    #[error("{0}")]
    Engine(#[from] EngineError),
    #[error("{0}")]
    Signature(#[from] SignatureError),
    #[error("stream mixes abstract characters and envelopes")]
    MixedModes,
    #[error("stream ended with open processes: {0:?}")]
    StillOpen(Vec<Rank>),
    #[error("event after `end`")]
    AfterEnd,
}

impl Event {
    /// Parses one line. Blank lines and `#` comments yield `None`.
    pub fn parse(line: &str) -> Result<Option<Event>, StreamError> {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            return Ok(None);
        }
        let mut words = line.split_whitespace();
        let verb = words.next().unwrap_or_default();
        let rank = |w: Option<&str>| -> Result<Rank, StreamError> {
            let w = w.ok_or_else(|| StreamError::Malformed(format!("`{verb}` needs a process rank")))?;
            w.parse()
                .map_err(|_| StreamError::Malformed(format!("invalid process rank `{w}`")))
        };
        match verb {
            "append" => {
                let rank = rank(words.next())?;
                let mut tokens = Vec::new();
                for w in words {
                    if w.contains(',') {
                        tokens.push(Token::Envelope(parse_quad(w)?));
                    } else {
                        tokens.extend(w.chars().map(Token::Char));
                    }
                }
                Ok(Some(Event::Append { rank, tokens }))
            }
            "close" => {
                let r = rank(words.next())?;
                if let Some(extra) = words.next() {
                    return Err(StreamError::Malformed(format!("unexpected `{extra}` after close")));
                }
                Ok(Some(Event::Close(r)))
            }
            "end" => match words.next() {
                None => Ok(Some(Event::End)),
                Some(extra) => Err(StreamError::Malformed(format!("unexpected `{extra}` after end"))),
            },
            other => Err(StreamError::Malformed(format!("unknown event `{other}`"))),
        }
    }
}

fn parse_quad(w: &str) -> Result<Envelope, StreamError> {
    let parts: Vec<&str> = w.split(',').collect();
    if !(3..=4).contains(&parts.len()) {
        return Err(StreamError::Malformed(format!(
            "envelope `{w}` must be tag,src,dst[,comm]"
        )));
    }
    let mut vals = [0u32; 4];
    for (v, p) in vals.iter_mut().zip(&parts) {
        *v = p
            .parse()
            .map_err(|_| StreamError::Malformed(format!("invalid integer `{p}` in `{w}`")))?;
    }
    Ok(Envelope::new(vals[0], vals[1], vals[2], vals[3]))
}

/// Engine plus signature space driven by events.
#[derive(Debug)]
pub struct StreamSession {
    mode: Option<Mode>,
    engine: Option<Engine>,
    space: SignatureSpace,
    deferred: Vec<Event>,
    last: Option<DrainOutcome>,
    ended: bool,
}

impl StreamSession {
    /// `mode = None` picks the mode from the first token.
    pub fn new(mode: Option<Mode>) -> Self {
        StreamSession {
            mode,
            engine: mode.map(Engine::new),
            space: SignatureSpace::new(),
            deferred: Vec::new(),
            last: None,
            ended: false,
        }
    }

    pub fn space(&self) -> &SignatureSpace {
        &self.space
    }

    pub fn engine(&self) -> Option<&Engine> {
        self.engine.as_ref()
    }

    /// Latest drain result.
    pub fn last_outcome(&self) -> Option<&DrainOutcome> {
        self.last.as_ref()
    }

    pub fn apply(&mut self, event: Event) -> Result<(), StreamError> {
        if self.ended {
            return Err(StreamError::AfterEnd);
        }
        if self.engine.is_none() {
            let first_token = match &event {
                Event::Append { tokens, .. } => tokens.first().copied(),
                _ => None,
            };
            let mode = match (first_token, &event) {
                (Some(Token::Char(_)), _) => Mode::Abstract,
                (Some(Token::Envelope(_)), _) => Mode::Strict,
                (None, Event::End) => Mode::Abstract,
                (None, _) => {
                    self.deferred.push(event);
                    return Ok(());
                }
            };
            self.mode = Some(mode);
            self.engine = Some(Engine::new(mode));
            for ev in std::mem::take(&mut self.deferred) {
                self.apply_to_engine(ev)?;
            }
        }
        self.apply_to_engine(event)
    }

    fn apply_to_engine(&mut self, event: Event) -> Result<(), StreamError> {
        let mode = self.mode.expect("mode fixed before engine use");
        let engine = self.engine.as_mut().expect("engine created");
        match event {
            Event::Append { rank, tokens } => {
                let mut occs = Vec::with_capacity(tokens.len());
                for t in tokens {
                    occs.push(match (t, mode) {
                        (Token::Char(c), Mode::Abstract) => {
                            MessageOccurrence::abstract_char(self.space.intern_character(c))
                        }
                        (Token::Envelope(env), Mode::Strict) => {
                            let sig = self.space.set_signature_for(env)?;
                            let role = if env.source == rank {
                                Role::Send
                            } else if env.destination == rank {
                                Role::Recv
                            } else {
                                Role::Unspecified
                            };
                            MessageOccurrence {
                                signature: sig,
                                role,
                                envelope: Some(env),
                                location: None,
                            }
                        }
                        _ => return Err(StreamError::MixedModes),
                    });
                }
                engine.append(rank, &occs)?;
            }
            Event::Close(rank) => engine.close(rank)?,
            Event::End => {
                self.ended = true;
                let open: Vec<Rank> = engine
                    .sequences()
                    .iter()
                    .filter(|s| !s.closed)
                    .map(|s| s.rank)
                    .collect();
                if !open.is_empty() {
                    return Err(StreamError::StillOpen(open));
                }
            }
        }
        self.last = Some(if self.ended {
            engine.drain()
        } else {
            match engine.advance() {
                Some(v) => DrainOutcome::Verdict(v),
                None => DrainOutcome::StillOpen,
            }
        });
        Ok(())
    }

    /// Final verdict once `end` has been applied.
    pub fn verdict(&self) -> Option<&Verdict> {
        self.engine.as_ref().and_then(Engine::verdict)
    }

    pub fn report(&self) -> Option<Report> {
        let engine = self.engine.as_ref()?;
        let verdict = engine.verdict()?;
        let stats = Stats {
            messages: engine.message_count(),
            steps: engine.stats().steps,
            distinct_signatures: self.space.len(),
        };
        Some(Report::new(verdict, &self.space, stats))
    }
}
