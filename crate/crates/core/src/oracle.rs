//! Independent ground-truth backends.
//!
//! [`simulate_exhaustive`] explores every interleaving of rendezvous over
//! cursor vectors. [`cycle_check`] pairs occurrences into message nodes,
//! links them in per-process order and looks for a directed cycle, the
//! classic wait-for formulation. Neither shares code with the engine beyond
//! the model types and the static legality check.

use std::collections::{BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::model::{validate_static, DeadlockReport, Model, Rank, Signature, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("state space exceeds the cap of {0} cursor vectors")]
    StateCapExceeded(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Confluence {
    /// Every maximal schedule ends in the same cursor vector.
    Agreed,
    Disagreed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Simulation {
    pub verdict: Verdict,
    pub confluence: Confluence,
    pub states: usize,
    pub transitions: usize,
}

pub const DEFAULT_STATE_CAP: usize = 1_000_000;

/// Explores all rendezvous interleavings of `model`. Returns `NoDeadlock` iff
/// some maximal schedule consumes every occurrence.
pub fn simulate_exhaustive(model: &Model, cap: usize) -> Result<Simulation, OracleError> {
    if let Err(reason) = validate_static(model) {
        return Ok(Simulation {
            verdict: Verdict::Illegal(reason),
            confluence: Confluence::Agreed,
            states: 0,
            transitions: 0,
        });
    }
    let seqs = model.sequences();
    let lens: Vec<usize> = seqs.iter().map(|s| s.len()).collect();
    let total: usize = lens.iter().sum();

    let start = vec![0usize; seqs.len()];
    let mut visited: HashSet<Vec<usize>> = HashSet::new();
    let mut terminals: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut stack = vec![start.clone()];
    visited.insert(start);
    let mut transitions = 0;

    while let Some(state) = stack.pop() {
        let mut fired = false;
        for i in 0..seqs.len() {
            let Some(hi) = seqs[i].occurrences.get(state[i]) else { continue };
            for j in i + 1..seqs.len() {
                let Some(hj) = seqs[j].occurrences.get(state[j]) else { continue };
                if hi.signature != hj.signature {
                    continue;
                }
                fired = true;
                transitions += 1;
                let mut next = state.clone();
                next[i] += 1;
                next[j] += 1;
                if !visited.contains(&next) {
                    if visited.len() >= cap {
                        return Err(OracleError::StateCapExceeded(cap));
                    }
                    visited.insert(next.clone());
                    stack.push(next);
                }
            }
        }
        if !fired {
            terminals.insert(state);
        }
    }

    let confluence = if terminals.len() == 1 {
        Confluence::Agreed
    } else {
        Confluence::Disagreed
    };
    let complete = terminals.iter().find(|t| **t == lens);
    let verdict = match complete {
        Some(_) => Verdict::NoDeadlock {
            matched_pairs: total / 2,
        },
        None => {
            let end = terminals.iter().next().expect("at least the start state is reachable");
            let consumed: usize = end.iter().sum();
            Verdict::Deadlock(DeadlockReport::from_sequences(
                seqs.iter().zip(end.iter().copied()),
                consumed / 2,
            ))
        }
    };
    Ok(Simulation {
        verdict,
        confluence,
        states: visited.len(),
        transitions,
    })
}

/// One node of the message-order graph: the `k`-th occurrence of a
/// signature in each of its two sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderNode {
    pub signature: Signature,
    pub ranks: [Rank; 2],
    pub positions: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnpairedOccurrence {
    pub rank: Rank,
    pub position: usize,
    pub signature: Signature,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    /// Nodes along a directed cycle, each waiting on the next.
    Cycle(Vec<OrderNode>),
    /// Occurrences with no partner, from signatures whose counts differ
    /// between their two sequences.
    Unpaired(Vec<UnpairedOccurrence>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleCheck {
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub nodes: usize,
    pub edges: usize,
}

/// Message-order graph over a legal model.
#[derive(Debug, Clone)]
pub struct OrderGraph {
    pub nodes: Vec<OrderNode>,
    /// At most two successors per node.
    succ: Vec<Vec<u32>>,
    /// Per sequence, per position: the node or `None` if unpaired.
    node_at: Vec<Vec<Option<u32>>>,
    pub unpaired: Vec<UnpairedOccurrence>,
}

impl OrderGraph {
    /// Pairs the `k`-th occurrence of each signature in its first sequence
    /// with the `k`-th in its second. Assumes the model passed
    /// [`validate_static`].
    pub fn build(model: &Model) -> Self {
        let seqs = model.sequences();
        // signature -> ((slot, positions), (slot, positions))
        let mut by_sig: HashMap<Signature, Vec<(usize, Vec<usize>)>> = HashMap::new();
        for (slot, seq) in seqs.iter().enumerate() {
            for (pos, occ) in seq.occurrences.iter().enumerate() {
                let lists = by_sig.entry(occ.signature).or_default();
                match lists.iter_mut().find(|(s, _)| *s == slot) {
                    Some((_, p)) => p.push(pos),
                    None => lists.push((slot, vec![pos])),
                }
            }
        }
        let mut sigs: Vec<_> = by_sig.into_iter().collect();
        sigs.sort_by_key(|(sig, _)| *sig);

        let mut node_at: Vec<Vec<Option<u32>>> = seqs.iter().map(|s| vec![None; s.len()]).collect();
        let mut nodes = Vec::new();
        let mut unpaired = Vec::new();
        for (sig, lists) in sigs {
            assert_eq!(lists.len(), 2, "order graph needs a legal model");
            let (a, pa) = &lists[0];
            let (b, pb) = &lists[1];
            let k = pa.len().min(pb.len());
            for i in 0..k {
                let id = nodes.len() as u32;
                nodes.push(OrderNode {
                    signature: sig,
                    ranks: [seqs[*a].rank, seqs[*b].rank],
                    positions: [pa[i], pb[i]],
                });
                node_at[*a][pa[i]] = Some(id);
                node_at[*b][pb[i]] = Some(id);
            }
            for (slot, extra) in [(a, &pa[k..]), (b, &pb[k..])] {
                for &position in extra {
                    unpaired.push(UnpairedOccurrence {
                        rank: seqs[*slot].rank,
                        position,
                        signature: sig,
                    });
                }
            }
        }
        unpaired.sort_by_key(|u| (u.rank, u.position));

        let mut succ = vec![Vec::with_capacity(2); nodes.len()];
        for row in &node_at {
            for w in row.windows(2) {
                if let (Some(from), Some(to)) = (w[0], w[1]) {
                    succ[from as usize].push(to);
                }
            }
        }
        OrderGraph {
            nodes,
            succ,
            node_at,
            unpaired,
        }
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    /// Depth-first search for a directed cycle; returns one if present.
    pub fn find_cycle(&self) -> Option<Vec<u32>> {
        const WHITE: u8 = 0;
        const GREY: u8 = 1;
        const BLACK: u8 = 2;
        let n = self.nodes.len();
        let mut color = vec![WHITE; n];
        let mut parent = vec![u32::MAX; n];
        for root in 0..n {
            if color[root] != WHITE {
                continue;
            }
            // (node, next successor index)
            let mut stack: Vec<(u32, usize)> = vec![(root as u32, 0)];
            color[root] = GREY;
            while let Some(top) = stack.last_mut() {
                let (v, i) = *top;
                if let Some(&w) = self.succ[v as usize].get(i) {
                    top.1 += 1;
                    match color[w as usize] {
                        WHITE => {
                            color[w as usize] = GREY;
                            parent[w as usize] = v;
                            stack.push((w, 0));
                        }
                        GREY => {
                            let mut cycle = vec![w];
                            let mut x = v;
                            while x != w {
                                cycle.push(x);
                                x = parent[x as usize];
                            }
                            cycle[1..].reverse();
                            return Some(cycle);
                        }
                        _ => {}
                    }
                } else {
                    color[v as usize] = BLACK;
                    stack.pop();
                }
            }
        }
        None
    }

    /// Releases nodes whose predecessors have all fired (Kahn order) and
    /// returns, per sequence, the position of the first occurrence that
    /// never fires, plus the number of fired nodes.
    pub fn release(&self) -> (Vec<usize>, usize) {
        let n = self.nodes.len();
        let mut indeg = vec![0u8; n];
        for row in &self.node_at {
            for id in row.iter().skip(1).flatten() {
                indeg[*id as usize] += 1;
            }
        }
        let mut ready: Vec<u32> = (0..n as u32).filter(|&v| indeg[v as usize] == 0).collect();
        let mut fired = vec![false; n];
        let mut count = 0;
        while let Some(v) = ready.pop() {
            fired[v as usize] = true;
            count += 1;
            for &w in &self.succ[v as usize] {
                indeg[w as usize] -= 1;
                if indeg[w as usize] == 0 {
                    ready.push(w);
                }
            }
        }
        let cursors = self
            .node_at
            .iter()
            .map(|row| {
                row.iter()
                    .position(|occ| !occ.is_some_and(|id| fired[id as usize]))
                    .unwrap_or(row.len())
            })
            .collect();
        (cursors, count)
    }
}

/// Deadlock check by cycle detection on the message-order graph.
pub fn cycle_check(model: &Model) -> CycleCheck {
    if let Err(reason) = validate_static(model) {
        return CycleCheck {
            verdict: Verdict::Illegal(reason),
            witness: None,
            nodes: 0,
            edges: 0,
        };
    }
    let graph = OrderGraph::build(model);
    let witness = if !graph.unpaired.is_empty() {
        Some(Witness::Unpaired(graph.unpaired.clone()))
    } else {
        graph
            .find_cycle()
            .map(|c| Witness::Cycle(c.into_iter().map(|id| graph.nodes[id as usize]).collect()))
    };
    let (cursors, fired) = graph.release();
    let verdict = match witness {
        None => Verdict::NoDeadlock {
            matched_pairs: fired,
        },
        Some(_) => Verdict::Deadlock(DeadlockReport::from_sequences(
            model.sequences().iter().zip(cursors),
            fired,
        )),
    };
    CycleCheck {
        verdict,
        witness,
        nodes: graph.nodes.len(),
        edges: graph.edge_count(),
    }
}
