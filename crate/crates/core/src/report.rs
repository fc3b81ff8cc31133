//! Machine-readable verdict reports (JSON) and their text rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{Envelope, IllegalKind, IllegalReason, Rank, Verdict, VerdictClass};
use crate::oracle::{Confluence, Witness};
use crate::signatures::SignatureSpace;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BlockedEntry {
    pub process: Rank,
    pub position: usize,
    pub signature: String,
    pub envelope: Option<Envelope>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReasonEntry {
    pub kind: IllegalKind,
    pub signature: String,
    pub envelope: Option<Envelope>,
    pub processes: Vec<Rank>,
    pub position: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Stats {
    pub messages: usize,
    pub steps: usize,
    pub distinct_signatures: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WitnessEntry {
    pub signature: String,
    pub processes: Vec<Rank>,
    pub positions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub verdict: VerdictClass,
    /// Blocked heads, ascending by process rank. Empty unless deadlocked.
    pub blocked: Vec<BlockedEntry>,
    /// Absent for illegal models.
    pub matched_pairs: Option<usize>,
    pub residual: Option<usize>,
    pub reason: Option<ReasonEntry>,
    pub stats: Stats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<WitnessEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confluence: Option<String>,
}

impl Report {
    pub fn new(verdict: &Verdict, space: &SignatureSpace, stats: Stats) -> Self {
        let mut report = Report {
            verdict: verdict.class(),
            blocked: Vec::new(),
            matched_pairs: None,
            residual: None,
            reason: None,
            stats,
            witness: None,
            confluence: None,
        };
        match verdict {
            Verdict::NoDeadlock { matched_pairs } => {
                report.matched_pairs = Some(*matched_pairs);
                report.residual = Some(0);
            }
            Verdict::Deadlock(d) => {
                report.matched_pairs = Some(d.matched_pairs);
                report.residual = Some(d.residual_messages);
                report.blocked = d
                    .blocked
                    .iter()
                    .map(|b| BlockedEntry {
                        process: b.rank,
                        position: b.position,
                        signature: space.label(b.signature),
                        envelope: b.envelope,
                    })
                    .collect();
                report.blocked.sort_by_key(|b| b.process);
            }
            Verdict::Illegal(reason) => report.reason = Some(reason_entry(reason, space)),
        }
        report
    }

    /// Result of static validation alone.
    pub fn validation(result: &Result<(), IllegalReason>, space: &SignatureSpace, stats: Stats) -> Self {
        match result {
            Ok(()) => Report {
                verdict: VerdictClass::Ok,
                blocked: Vec::new(),
                matched_pairs: None,
                residual: None,
                reason: None,
                stats,
                witness: None,
                confluence: None,
            },
            Err(reason) => Report::new(&Verdict::Illegal(reason.clone()), space, stats),
        }
    }

    pub fn with_witness(mut self, witness: &Witness, space: &SignatureSpace) -> Self {
        self.witness = Some(match witness {
            Witness::Cycle(nodes) => nodes
                .iter()
                .map(|n| WitnessEntry {
                    signature: space.label(n.signature),
                    processes: n.ranks.to_vec(),
                    positions: n.positions.to_vec(),
                })
                .collect(),
            Witness::Unpaired(occs) => occs
                .iter()
                .map(|u| WitnessEntry {
                    signature: space.label(u.signature),
                    processes: vec![u.rank],
                    positions: vec![u.position],
                })
                .collect(),
        });
        self
    }

    pub fn with_confluence(mut self, confluence: Confluence) -> Self {
        self.confluence = Some(
            match confluence {
                Confluence::Agreed => "agreed",
                Confluence::Disagreed => "disagreed",
            }
            .to_string(),
        );
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "verdict: {}", self.verdict);
        for b in &self.blocked {
            let _ = writeln!(
                out,
                "  process {} blocked at position {} on {}",
                b.process, b.position, b.signature
            );
        }
        if let Some(r) = &self.reason {
            let _ = writeln!(out, "  reason: {}", r.message);
        }
        if let Some(w) = &self.witness {
            let chain = w
                .iter()
                .map(|e| {
                    let procs = e.processes.iter().map(|p| p.to_string()).collect::<Vec<_>>();
                    format!("{} [{}]", e.signature, procs.join("<->"))
                })
                .collect::<Vec<_>>();
            let _ = writeln!(out, "  witness: {}", chain.join(" -> "));
        }
        if let Some(c) = &self.confluence {
            let _ = writeln!(out, "  confluence: {c}");
        }
        if let (Some(m), Some(r)) = (self.matched_pairs, self.residual) {
            let _ = writeln!(out, "matched pairs: {m}, residual messages: {r}");
        }
        let _ = writeln!(
            out,
            "messages: {}, steps: {}, distinct signatures: {}",
            self.stats.messages, self.stats.steps, self.stats.distinct_signatures
        );
        out
    }

    /// Same report without the fields that legitimately differ between
    /// batch and streaming runs.
    pub fn body(&self) -> Report {
        let mut r = self.clone();
        r.stats.steps = 0;
        r
    }
}

fn reason_entry(reason: &IllegalReason, space: &SignatureSpace) -> ReasonEntry {
    let label = space.label(reason.signature);
    let procs = reason
        .ranks
        .iter()
        .map(|r| r.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    let message = match reason.kind {
        IllegalKind::TooManySequences => format!(
            "message {label} occurs in {} processes ({procs}); a message needs exactly one sender and one receiver",
            reason.ranks.len()
        ),
        IllegalKind::TooFewSequences => {
            format!("message {label} occurs only in process {procs}; it has no partner")
        }
        IllegalKind::RoleMismatch => format!(
            "message {label} at position {} of process {procs} does not match its envelope",
            reason.position.unwrap_or(0)
        ),
    };
    ReasonEntry {
        kind: reason.kind,
        signature: label,
        envelope: reason.envelope,
        processes: reason.ranks.clone(),
        position: reason.position,
        message,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::engine_check;
    use crate::parser::parse_abstract;

    #[test]
    fn deadlock_report_fields() {
        let m = parse_abstract("ab\nbc\nca").unwrap();
        let r = Report::new(&engine_check(&m), m.space(), Stats::default());
        assert_eq!(r.verdict, VerdictClass::Deadlock);
        let procs: Vec<_> = r.blocked.iter().map(|b| (b.process, b.position, b.signature.as_str())).collect();
        assert_eq!(procs, vec![(0, 0, "a"), (1, 0, "b"), (2, 0, "c")]);
        assert_eq!((r.matched_pairs, r.residual), (Some(0), Some(6)));
        let text = r.render_text();
        assert!(text.starts_with("verdict: deadlock\n"));
        assert!(text.contains("process 2 blocked at position 0 on c"));
    }

    #[test]
    fn illegal_report_names_processes() {
        let m = parse_abstract("a\na\na").unwrap();
        let r = Report::new(&engine_check(&m), m.space(), Stats::default());
        let reason = r.reason.as_ref().unwrap();
        assert_eq!(reason.signature, "a");
        assert_eq!(reason.processes, vec![0, 1, 2]);
        assert_eq!(r.matched_pairs, None);
    }

    #[test]
    fn json_shape_is_stable() {
        let m = parse_abstract("a\na").unwrap();
        let r = Report::new(&engine_check(&m), m.space(), Stats { messages: 2, steps: 2, distinct_signatures: 1 });
        let json = r.to_json();
        let at: Vec<usize> = ["\"verdict\"", "\"blocked\"", "\"matchedPairs\"", "\"residual\"", "\"reason\"", "\"stats\""]
            .iter()
            .map(|k| json.find(k).unwrap())
            .collect();
        assert!(at.windows(2).all(|w| w[0] < w[1]), "{json}");
        assert!(!json.contains("witness"));
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["stats"]["distinctSignatures"], 1);
        let back: Report = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
