//! Synthetic workloads and the engine-vs-cycle-detection timing harness.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::engine_check_with_stats;
use crate::model::{Envelope, MessageOccurrence, Mode, Model, Rank, Role, Sequence, VerdictClass};
use crate::oracle::cycle_check;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    /// Disjoint process pairs exchanging messages in matching order.
    Pairs,
    /// One wait cycle through every process.
    Ring,
    /// Random rendezvous with bounded local reordering.
    RandomLegal,
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pattern::Pairs => "pairs",
            Pattern::Ring => "ring",
            Pattern::RandomLegal => "random",
        })
    }
}

impl FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pairs" => Ok(Pattern::Pairs),
            "ring" => Ok(Pattern::Ring),
            "random" | "random-legal" => Ok(Pattern::RandomLegal),
            other => Err(format!("unknown pattern `{other}` (pairs, ring, random)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenSpec {
    pub pattern: Pattern,
    pub processes: u32,
    pub messages_per_process: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("pattern {pattern} needs at least {min} processes, got {got}")]
    TooFewProcesses { pattern: Pattern, min: u32, got: u32 },
    #[error("messages per process must be at least 1")]
    NoMessages,
    #[error("model too large: tag space exhausted")]
    TooLarge,
}

impl GenSpec {
    pub fn new(pattern: Pattern, processes: u32, messages_per_process: u32, seed: u64) -> Self {
        GenSpec {
            pattern,
            processes,
            messages_per_process,
            seed,
        }
    }

    fn check(&self) -> Result<(), GenError> {
        let min = match self.pattern {
            Pattern::Ring => 3,
            _ => 2,
        };
        if self.processes < min {
            return Err(GenError::TooFewProcesses {
                pattern: self.pattern,
                min,
                got: self.processes,
            });
        }
        if self.messages_per_process == 0 {
            return Err(GenError::NoMessages);
        }
        Ok(())
    }
}

/// Builds a strict model for `spec`. Deterministic in all four fields.
///
/// * Pairs: ranks `2k` and `2k+1` alternate sending `M` distinct messages to
///   each other; an odd last process gets an empty sequence. `n = 2M·⌊P/2⌋`.
/// * Ring: `M` rounds. In each round process `i > 0` receives from `i−1` and
///   then sends to `i+1`, while process 0 sends both of its messages first, so
///   every process waits on a partner that has the message second. Each
///   process holds `2M` occurrences.
/// * RandomLegal: `⌊P·M/2⌋` rendezvous between random distinct processes,
///   each with a fresh tag, appended to both participants; then each sequence
///   is perturbed by random swaps within a window of 0..=3 drawn per seed.
pub fn generate(spec: &GenSpec) -> Result<Model, GenError> {
    spec.check()?;
    let p = spec.processes;
    let m = spec.messages_per_process;
    let mut seqs: Vec<Vec<(Envelope, Role)>> = vec![Vec::new(); p as usize];

    match spec.pattern {
        Pattern::Pairs => {
            for k in 0..p / 2 {
                let (a, b) = (2 * k, 2 * k + 1);
                for i in 0..m {
                    let (src, dst) = if i % 2 == 0 { (a, b) } else { (b, a) };
                    let env = Envelope::new(i, src, dst, 0);
                    seqs[src as usize].push((env, Role::Send));
                    seqs[dst as usize].push((env, Role::Recv));
                }
            }
        }
        Pattern::Ring => {
            for round in 0..m {
                let tag = |i: u32| round.checked_mul(p).and_then(|x| x.checked_add(i));
                for i in 0..p {
                    // message `i` links process i with its predecessor
                    let prev = (i + p - 1) % p;
                    let next = (i + 1) % p;
                    let t_in = tag(i).ok_or(GenError::TooLarge)?;
                    let t_out = tag(next).ok_or(GenError::TooLarge)?;
                    let ops = if i == 0 {
                        [
                            (Envelope::new(t_in, 0, prev, 0), Role::Send),
                            (Envelope::new(t_out, 0, next, 0), Role::Send),
                        ]
                    } else if next == 0 {
                        [
                            (Envelope::new(t_in, prev, i, 0), Role::Recv),
                            (Envelope::new(t_out, 0, i, 0), Role::Recv),
                        ]
                    } else {
                        [
                            (Envelope::new(t_in, prev, i, 0), Role::Recv),
                            (Envelope::new(t_out, i, next, 0), Role::Send),
                        ]
                    };
                    seqs[i as usize].extend(ops);
                }
            }
        }
        Pattern::RandomLegal => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let pairs = (u64::from(p) * u64::from(m) / 2).max(1);
            let pairs = u32::try_from(pairs).map_err(|_| GenError::TooLarge)?;
            for tag in 0..pairs {
                let src = rng.gen_range(0..p);
                let mut dst = rng.gen_range(0..p - 1);
                if dst >= src {
                    dst += 1;
                }
                let env = Envelope::new(tag, src, dst, 0);
                seqs[src as usize].push((env, Role::Send));
                seqs[dst as usize].push((env, Role::Recv));
            }
            let window = rng.gen_range(0..=3usize);
            if window > 0 {
                for seq in &mut seqs {
                    let len = seq.len();
                    for i in 0..len {
                        if rng.gen_bool(0.25) {
                            let j = (i + rng.gen_range(1..=window)).min(len - 1);
                            seq.swap(i, j);
                        }
                    }
                }
            }
        }
    }

    let mut model = Model::new(Mode::Strict);
    for (rank, ops) in seqs.into_iter().enumerate() {
        let mut occs = Vec::with_capacity(ops.len());
        for (env, role) in ops {
            let sig = model
                .space_mut()
                .set_signature_for(env)
                .expect("generated envelopes never target their own sender");
            occs.push(MessageOccurrence::strict(sig, role, env));
        }
        model
            .push_sequence(Sequence::new(rank as Rank, occs))
            .expect("ranks are distinct");
    }
    Ok(model)
}

/// Random abstract model for differential tests: `sequences` strings of
/// length at most `max_len` over the first `alphabet` lowercase letters.
/// Not necessarily legal.
pub fn random_abstract(rng: &mut impl Rng, sequences: usize, max_len: usize, alphabet: u8) -> Model {
    let mut model = Model::new(Mode::Abstract);
    for rank in 0..sequences {
        let len = rng.gen_range(0..=max_len);
        let occs = (0..len)
            .map(|_| {
                let c = (b'a' + rng.gen_range(0..alphabet)) as char;
                MessageOccurrence::abstract_char(model.space_mut().intern_character(c))
            })
            .collect();
        model
            .push_sequence(Sequence::new(rank as Rank, occs))
            .expect("distinct ranks");
    }
    model
}

/// Random legal abstract model: `pairs` rendezvous between random sequences,
/// where a pair sometimes reuses one of its existing characters so repeated
/// signatures occur. Each sequence is then shuffled.
pub fn random_legal_abstract(rng: &mut impl Rng, sequences: usize, pairs: usize) -> Model {
    assert!(sequences >= 2);
    let mut rows: Vec<Vec<char>> = vec![Vec::new(); sequences];
    let mut owner: std::collections::HashMap<char, (usize, usize)> = Default::default();
    let mut next_char = 'a' as u32;
    for _ in 0..pairs {
        let a = rng.gen_range(0..sequences);
        let mut b = rng.gen_range(0..sequences - 1);
        if b >= a {
            b += 1;
        }
        let (a, b) = (a.min(b), a.max(b));
        // reuse a kind already owned by this pair half the time
        let reuse = owner
            .iter()
            .filter(|(_, &o)| o == (a, b))
            .map(|(c, _)| *c)
            .min();
        let c = match reuse {
            Some(c) if rng.gen_bool(0.5) => c,
            _ => {
                let c = char::from_u32(next_char).expect("valid char");
                next_char += 1;
                owner.insert(c, (a, b));
                c
            }
        };
        rows[a].push(c);
        rows[b].push(c);
    }
    for row in &mut rows {
        row.shuffle(rng);
    }
    let mut model = Model::new(Mode::Abstract);
    for (rank, row) in rows.into_iter().enumerate() {
        let occs = row
            .into_iter()
            .map(|c| MessageOccurrence::abstract_char(model.space_mut().intern_character(c)))
            .collect();
        model
            .push_sequence(Sequence::new(rank as Rank, occs))
            .expect("distinct ranks");
    }
    model
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Engine,
    Cycle,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Engine => "engine",
            Backend::Cycle => "cycle",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub backend: Backend,
    pub pattern: Pattern,
    pub processes: u32,
    pub messages_per_process: u32,
    pub n: usize,
    pub median_ms: f64,
    /// Engine: matching steps. Cycle: nodes plus edges.
    pub steps: usize,
    /// Engine: matchers created. Cycle: graph nodes.
    pub table_size: usize,
    pub verdict: VerdictClass,
}

pub const CSV_HEADER: &str = "backend,pattern,P,M,n,median_ms,steps";

impl BenchRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{:.3},{}",
            self.backend,
            self.pattern,
            self.processes,
            self.messages_per_process,
            self.n,
            self.median_ms,
            self.steps
        )
    }
}

fn median(mut samples: Vec<Duration>) -> Duration {
    samples.sort_unstable();
    samples[samples.len() / 2]
}

/// Times both backends on the same generated model. One warm-up run per
/// backend is discarded; the median of `repetitions` runs is reported.
pub fn bench_run(spec: &GenSpec, repetitions: usize) -> Result<Vec<BenchRow>, GenError> {
    let model = generate(spec)?;
    Ok(bench_model(&model, spec, repetitions))
}

pub fn bench_model(model: &Model, spec: &GenSpec, repetitions: usize) -> Vec<BenchRow> {
    let reps = repetitions.max(1);
    let n = model.message_count();

    let (verdict, stats) = engine_check_with_stats(model);
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        let out = engine_check_with_stats(model);
        samples.push(t.elapsed());
        std::hint::black_box(out);
    }
    let engine_row = BenchRow {
        backend: Backend::Engine,
        pattern: spec.pattern,
        processes: spec.processes,
        messages_per_process: spec.messages_per_process,
        n,
        median_ms: median(samples).as_secs_f64() * 1e3,
        steps: stats.steps,
        table_size: stats.table_size,
        verdict: verdict.class(),
    };

    let warm = cycle_check(model);
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        let out = cycle_check(model);
        samples.push(t.elapsed());
        std::hint::black_box(out);
    }
    let cycle_row = BenchRow {
        backend: Backend::Cycle,
        median_ms: median(samples).as_secs_f64() * 1e3,
        steps: warm.nodes + warm.edges,
        table_size: warm.nodes,
        verdict: warm.verdict.class(),
        ..engine_row.clone()
    };
    vec![engine_row, cycle_row]
}
