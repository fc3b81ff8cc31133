//! Input formats.
//!
//! Abstract format, one sequence per nonempty line:
//!
//! ```text
//! #abstract
//! P0: ab
//! P1: bc
//! ca
//! ```
//!
//! Every non-whitespace character after the optional `P<rank>:` prefix is one
//! occurrence. Bare lines take the rank equal to their index among sequence
//! lines. Lines whose first non-blank character is `#` are comments.
//!
//! DSL format:
//!
//! ```text
//! process 0 { send tag=1 to 2; send tag=2 to 1; }
//! process 1 { recv tag=2 from 0; send tag=3 to 2 comm=0; }
//! ```

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::model::{
    Envelope, MessageOccurrence, Mode, Model, Rank, Role, Sequence, Signature, SourcePos,
};
use crate::signatures::{SignatureError, SignatureKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    SelfMessage,
    DuplicateProcess,
    BadInteger,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::SelfMessage => "self message",
            ParseErrorKind::DuplicateProcess => "duplicate process",
            ParseErrorKind::BadInteger => "bad integer",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub column: u32,
    pub message: String,
    pub kind: ParseErrorKind,
}

impl ParseError {
    fn new(pos: SourcePos, kind: ParseErrorKind, message: impl Into<String>) -> Self {
        ParseError {
            line: pos.line,
            column: pos.column,
            message: message.into(),
            kind,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Abstract,
    Dsl,
}

/// A file whose first meaningful token is `process` is DSL; anything else,
/// including a `#abstract` header, is the abstract format.
pub fn detect_format(text: &str) -> Format {
    for line in text.lines() {
        let trimmed = line.trim_start();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with("#abstract") {
            return Format::Abstract;
        }
        if trimmed.starts_with('#') {
            continue;
        }
        let first = trimmed
            .split(|c: char| c.is_whitespace() || c == '{')
            .next()
            .unwrap_or("");
        return if first == "process" {
            Format::Dsl
        } else {
            Format::Abstract
        };
    }
    Format::Abstract
}

pub fn parse_auto(text: &str) -> Result<Model, ParseError> {
    match detect_format(text) {
        Format::Abstract => parse_abstract(text),
        Format::Dsl => parse_dsl(text),
    }
}

pub fn parse_abstract(text: &str) -> Result<Model, ParseError> {
    let mut model = Model::new(Mode::Abstract);
    let mut seq_lines = 0u32;
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno as u32 + 1;
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let indent = (line.chars().count() - trimmed.chars().count()) as u32;
        let (rank, body, body_col) = match split_rank_prefix(trimmed) {
            Some((digits, rest_offset)) => {
                let pos = SourcePos {
                    line: lineno,
                    column: indent + 2,
                };
                let rank: Rank = digits.parse().map_err(|_| {
                    ParseError::new(
                        pos,
                        ParseErrorKind::BadInteger,
                        format!("invalid process rank `{digits}`"),
                    )
                })?;
                let col = indent + trimmed[..rest_offset].chars().count() as u32 + 1;
                (rank, &trimmed[rest_offset..], col)
            }
            None => (seq_lines, trimmed, indent + 1),
        };
        let mut occs = Vec::new();
        for (i, ch) in body.chars().enumerate() {
            if ch.is_whitespace() {
                continue;
            }
            let sig = model.space_mut().intern_character(ch);
            occs.push(MessageOccurrence::abstract_char(sig).at(SourcePos {
                line: lineno,
                column: body_col + i as u32,
            }));
        }
        model
            .push_sequence(Sequence::new(rank, occs))
            .map_err(|_| {
                ParseError::new(
                    SourcePos {
                        line: lineno,
                        column: indent + 1,
                    },
                    ParseErrorKind::DuplicateProcess,
                    format!("process {rank} is declared twice"),
                )
            })?;
        seq_lines += 1;
    }
    Ok(model)
}

/// Recognizes `P<token>:` at the start of a line. Returns the rank token and
/// the byte offset just past the colon.
fn split_rank_prefix(line: &str) -> Option<(&str, usize)> {
    let rest = line.strip_prefix('P')?;
    let colon = rest.find(':')?;
    let token = &rest[..colon];
    if token.is_empty() || token.chars().any(char::is_whitespace) {
        return None;
    }
    Some((token, 1 + colon + 1))
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok<'a> {
    Word(&'a str),
    Punct(char),
    Eof,
}

impl fmt::Display for Tok<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "`{w}`"),
            Tok::Punct(c) => write!(f, "`{c}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

struct Lexer<'a> {
    toks: Vec<(Tok<'a>, SourcePos)>,
    at: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Result<Self, ParseError> {
        let mut toks = Vec::new();
        let mut line = 1u32;
        let mut col = 1u32;
        let mut iter = text.char_indices().peekable();
        while let Some((start, ch)) = iter.next() {
            let pos = SourcePos { line, column: col };
            match ch {
                '\n' => {
                    line += 1;
                    col = 1;
                    continue;
                }
                c if c.is_whitespace() => {}
                '#' => {
                    while let Some(&(_, c)) = iter.peek() {
                        if c == '\n' {
                            break;
                        }
                        iter.next();
                    }
                }
                '{' | '}' | '=' | ';' => toks.push((Tok::Punct(ch), pos)),
                c if is_word_char(c) => {
                    let mut end = start + c.len_utf8();
                    while let Some(&(i, c)) = iter.peek() {
                        if !is_word_char(c) {
                            break;
                        }
                        end = i + c.len_utf8();
                        col += 1;
                        iter.next();
                    }
                    toks.push((Tok::Word(&text[start..end]), pos));
                }
                other => {
                    return Err(ParseError::new(
                        pos,
                        ParseErrorKind::Syntax,
                        format!("unexpected character `{other}`"),
                    ))
                }
            }
            col += 1;
        }
        toks.push((Tok::Eof, SourcePos { line, column: col }));
        Ok(Lexer { toks, at: 0 })
    }

    fn peek(&self) -> &(Tok<'a>, SourcePos) {
        &self.toks[self.at]
    }

    fn bump(&mut self) -> (Tok<'a>, SourcePos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn keyword(&mut self, kw: &str) -> Result<SourcePos, ParseError> {
        match self.bump() {
            (Tok::Word(w), pos) if w == kw => Ok(pos),
            (tok, pos) => Err(ParseError::new(
                pos,
                ParseErrorKind::Syntax,
                format!("expected `{kw}`, found {tok}"),
            )),
        }
    }

    fn punct(&mut self, p: char) -> Result<SourcePos, ParseError> {
        match self.bump() {
            (Tok::Punct(c), pos) if c == p => Ok(pos),
            (tok, pos) => Err(ParseError::new(
                pos,
                ParseErrorKind::Syntax,
                format!("expected `{p}`, found {tok}"),
            )),
        }
    }

    fn integer(&mut self) -> Result<u32, ParseError> {
        match self.bump() {
            (Tok::Word(w), pos) => w.parse().map_err(|_| {
                ParseError::new(
                    pos,
                    ParseErrorKind::BadInteger,
                    format!("expected a nonnegative integer, found `{w}`"),
                )
            }),
            (tok, pos) => Err(ParseError::new(
                pos,
                ParseErrorKind::Syntax,
                format!("expected an integer, found {tok}"),
            )),
        }
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-' || c == '+'
}

pub fn parse_dsl(text: &str) -> Result<Model, ParseError> {
    let mut lx = Lexer::new(text)?;
    let mut model = Model::new(Mode::Strict);
    let mut declared: HashMap<Rank, SourcePos> = HashMap::new();

    while lx.peek().0 != Tok::Eof {
        let block_pos = lx.keyword("process")?;
        let rank = lx.integer()?;
        if let Some(prev) = declared.insert(rank, block_pos) {
            return Err(ParseError::new(
                block_pos,
                ParseErrorKind::DuplicateProcess,
                format!("process {rank} already declared at {prev}"),
            ));
        }
        lx.punct('{')?;
        let mut occs = Vec::new();
        loop {
            if lx.peek().0 == Tok::Punct('}') {
                lx.bump();
                break;
            }
            occs.push(parse_statement(&mut lx, rank, &mut model)?);
        }
        model
            .push_sequence(Sequence::new(rank, occs))
            .expect("ranks checked above");
    }
    Ok(model)
}

fn parse_statement(
    lx: &mut Lexer<'_>,
    rank: Rank,
    model: &mut Model,
) -> Result<MessageOccurrence, ParseError> {
    let (role, pos) = match lx.bump() {
        (Tok::Word("send"), pos) => (Role::Send, pos),
        (Tok::Word("recv"), pos) => (Role::Recv, pos),
        (tok, pos) => {
            return Err(ParseError::new(
                pos,
                ParseErrorKind::Syntax,
                format!("expected `send`, `recv` or `}}`, found {tok}"),
            ))
        }
    };
    lx.keyword("tag")?;
    lx.punct('=')?;
    let tag = lx.integer()?;
    lx.keyword(if role == Role::Send { "to" } else { "from" })?;
    let peer = lx.integer()?;
    let mut comm = 0;
    if lx.peek().0 == Tok::Word("comm") {
        lx.bump();
        lx.punct('=')?;
        comm = lx.integer()?;
    }
    lx.punct(';')?;

    let envelope = match role {
        Role::Send => Envelope::new(tag, rank, peer, comm),
        _ => Envelope::new(tag, peer, rank, comm),
    };
    let sig = model.space_mut().set_signature_for(envelope).map_err(|e| match e {
        SignatureError::SelfMessage(_) => ParseError::new(
            pos,
            ParseErrorKind::SelfMessage,
            format!("process {rank} cannot communicate with itself"),
        ),
        other => ParseError::new(pos, ParseErrorKind::Syntax, other.to_string()),
    })?;
    Ok(MessageOccurrence::strict(sig, role, envelope).at(pos))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("strict rendering needs an envelope and role on every occurrence (process {0})")]
    MissingEnvelope(Rank),
    #[error("too many distinct signatures ({0}) to render as characters")]
    TooManySignatures(usize),
}

/// Renders a strict model back into the DSL.
pub fn render_dsl(model: &Model) -> Result<String, RenderError> {
    let mut out = String::new();
    for seq in model.sequences() {
        if seq.is_empty() {
            let _ = writeln!(out, "process {} {{}}", seq.rank);
            continue;
        }
        let _ = writeln!(out, "process {} {{", seq.rank);
        for occ in &seq.occurrences {
            let env = occ.envelope.ok_or(RenderError::MissingEnvelope(seq.rank))?;
            let (kw, dir, peer) = match occ.role {
                Role::Send => ("send", "to", env.destination),
                Role::Recv => ("recv", "from", env.source),
                Role::Unspecified => return Err(RenderError::MissingEnvelope(seq.rank)),
            };
            let _ = write!(out, "    {kw} tag={} {dir} {peer}", env.tag);
            if env.communicator != 0 {
                let _ = write!(out, " comm={}", env.communicator);
            }
            out.push_str(";\n");
        }
        out.push_str("}\n");
    }
    Ok(out)
}

/// Renders any model in the abstract format with explicit rank prefixes.
///
/// Character-keyed signatures keep their character. Envelope-keyed ones are
/// assigned printable characters in order of first appearance.
pub fn render_abstract(model: &Model) -> Result<String, RenderError> {
    let mut assigned: HashMap<Signature, char> = HashMap::new();
    let mut taken: std::collections::HashSet<char> = model
        .sequences()
        .iter()
        .flat_map(|s| s.signatures())
        .filter_map(|sig| match model.space().key_of(sig) {
            Ok(SignatureKey::Char(c)) => Some(c),
            _ => None,
        })
        .collect();
    let mut pool = char_pool();

    let mut out = String::from("#abstract\n");
    for seq in model.sequences() {
        let _ = write!(out, "P{}:", seq.rank);
        if !seq.is_empty() {
            out.push(' ');
        }
        for sig in seq.signatures() {
            let ch = match assigned.get(&sig) {
                Some(c) => *c,
                None => {
                    let c = match model.space().key_of(sig) {
                        Ok(SignatureKey::Char(c)) => c,
                        _ => loop {
                            let c = pool
                                .next()
                                .ok_or(RenderError::TooManySignatures(model.space().len()))?;
                            if taken.insert(c) {
                                break c;
                            }
                        },
                    };
                    assigned.insert(sig, c);
                    c
                }
            };
            out.push(ch);
        }
        out.push('\n');
    }
    Ok(out)
}

fn char_pool() -> impl Iterator<Item = char> {
    ('a'..='z')
        .chain('A'..='Z')
        .chain('0'..='9')
        .chain('\u{4E00}'..='\u{9FFF}')
        .chain('\u{AC00}'..='\u{D7A3}')
        .chain('\u{3400}'..='\u{4DBF}')
}

#[cfg(test)]
mod tests {
    use super::*;

    const RING_DSL: &str = "process 0 {send tag=1 to 2; send tag=2 to 1;}
process 1 {recv tag=2 from 0; send tag=3 to 2;}
process 2 {recv tag=3 from 1; recv tag=1 from 0;}";

    #[test]
    fn abstract_ring_example() {
        let m = parse_abstract("ab\nbc\nca").unwrap();
        assert_eq!(m.sequences().len(), 3);
        assert_eq!(m.message_count(), 6);
        assert_eq!(m.space().len(), 3);
        let ranks: Vec<_> = m.sequences().iter().map(|s| s.rank).collect();
        assert_eq!(ranks, vec![0, 1, 2]);
    }

    #[test]
    fn abstract_empty_input() {
        let m = parse_abstract("").unwrap();
        assert!(m.sequences().is_empty());
        assert_eq!(m.message_count(), 0);
    }

    #[test]
    fn abstract_duplicate_rank() {
        let err = parse_abstract("P0: a\nP0: b").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::DuplicateProcess);
        assert_eq!((err.line, err.column), (2, 1));
    }

    #[test]
    fn abstract_bad_rank() {
        let err = parse_abstract("Pxy: ab").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::BadInteger);
        assert_eq!((err.line, err.column), (1, 2));
    }

    #[test]
    fn abstract_explicit_ranks_whitespace_and_empty() {
        let m = parse_abstract("#abstract\n# comment\nP7: a b\n\nP3:\n  P9:a").unwrap();
        let seqs = m.sequences();
        assert_eq!(seqs.len(), 3);
        assert_eq!((seqs[0].rank, seqs[0].len()), (7, 2));
        assert_eq!((seqs[1].rank, seqs[1].len()), (3, 0));
        assert_eq!((seqs[2].rank, seqs[2].len()), (9, 1));
        assert_eq!(
            seqs[0].occurrences[1].location,
            Some(SourcePos { line: 3, column: 7 })
        );
    }

    #[test]
    fn dsl_ring_program() {
        let m = parse_dsl(RING_DSL).unwrap();
        assert_eq!(m.mode(), Mode::Strict);
        assert_eq!(m.sequences().len(), 3);
        assert_eq!(m.message_count(), 6);
        assert_eq!(m.space().len(), 3);
        // same signature structure as "ab","bc","ca"
        let sigs: Vec<Vec<u32>> = m
            .sequences()
            .iter()
            .map(|s| s.signatures().map(|x| x.0).collect())
            .collect();
        assert_eq!(sigs, vec![vec![0, 1], vec![1, 2], vec![2, 0]]);
    }

    #[test]
    fn dsl_self_message() {
        let err = parse_dsl("process 0 {send tag=1 to 0;}").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::SelfMessage);
        assert_eq!((err.line, err.column), (1, 12));
    }

    #[test]
    fn dsl_empty_blocks() {
        let m = parse_dsl("process 0 {} process 1 {}").unwrap();
        assert_eq!(m.sequences().len(), 2);
        assert!(m.sequences().iter().all(Sequence::is_empty));
    }

    #[test]
    fn dsl_errors() {
        let cases = [
            ("process 0 {} process 0 {}", ParseErrorKind::DuplicateProcess),
            ("process x {}", ParseErrorKind::BadInteger),
            ("process 0 { send tag=-1 to 1; }", ParseErrorKind::BadInteger),
            ("process 0 { send tag=1 from 1; }", ParseErrorKind::Syntax),
            ("process 0 { send tag=1 to 1 }", ParseErrorKind::Syntax),
            ("process 0 { send tag=1 to 1;", ParseErrorKind::Syntax),
            ("process 0 { send tag=1 to 1; } $", ParseErrorKind::Syntax),
            ("proc 0 {}", ParseErrorKind::Syntax),
        ];
        for (src, kind) in cases {
            assert_eq!(parse_dsl(src).unwrap_err().kind, kind, "{src}");
        }
    }

    #[test]
    fn dsl_comments_and_comm() {
        let src = "# header\nprocess 0 { # trailing\n send tag=4 to 1 comm=3;\n}\nprocess 1 { recv tag=4 from 0 comm=3; }";
        let m = parse_dsl(src).unwrap();
        let occ = m.sequences()[0].occurrences[0];
        assert_eq!(occ.envelope, Some(Envelope::new(4, 0, 1, 3)));
        assert_eq!(occ.location, Some(SourcePos { line: 3, column: 2 }));
        assert_eq!(m.space().len(), 1);
    }

    #[test]
    fn dsl_roles_match_ranks() {
        let m = parse_dsl(RING_DSL).unwrap();
        for seq in m.sequences() {
            for occ in &seq.occurrences {
                assert!(occ.consistent_with(seq.rank, Mode::Strict));
            }
        }
    }

    #[test]
    fn format_detection() {
        assert_eq!(detect_format(RING_DSL), Format::Dsl);
        assert_eq!(detect_format("# c\n\nprocess 0 {}"), Format::Dsl);
        assert_eq!(detect_format("#abstract\nprocess"), Format::Abstract);
        assert_eq!(detect_format("ab\nbc"), Format::Abstract);
        assert_eq!(detect_format(""), Format::Abstract);
    }

    #[test]
    fn render_roundtrips() {
        let m = parse_dsl(RING_DSL).unwrap();
        let again = parse_dsl(&render_dsl(&m).unwrap()).unwrap();
        for (a, b) in m.sequences().iter().zip(again.sequences()) {
            assert_eq!(a.rank, b.rank);
            let sa: Vec<_> = a.occurrences.iter().map(|o| (o.signature, o.role, o.envelope)).collect();
            let sb: Vec<_> = b.occurrences.iter().map(|o| (o.signature, o.role, o.envelope)).collect();
            assert_eq!(sa, sb);
        }

        let text = render_abstract(&m).unwrap();
        assert_eq!(text, "#abstract\nP0: ab\nP1: bc\nP2: ca\n");
    }
}
