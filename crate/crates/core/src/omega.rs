//! Acceptance of ultimately periodic words `u·v^ω`.
//!
//! An infinite run is accepting when configurations with stack exactly
//! `[#, q]`, `q` final, occur infinitely often. Move kinds depend only on the
//! matrix and the input, so the positions where the stack empties can be
//! found without states; between two such positions the automaton only has
//! to be tracked as a relation on states.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::automaton::{Configuration, FloydAutomaton};
use crate::opm::{EqCheck, OpmError, PrecRel, PrecedenceAlphabet, ShapeStack, Symbol};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OmegaError {
    #[error(transparent)]
    Opm(#[from] OpmError),
    #[error("the loop of a lasso word must not be empty")]
    EmptyPeriod,
    #[error("the ≐ relation has a cycle: {}", .0.join(" = "))]
    EqCycle(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LassoWord {
    prefix: Vec<Symbol>,
    period: Vec<Symbol>,
}

impl LassoWord {
    pub fn new(prefix: Vec<Symbol>, period: Vec<Symbol>) -> Result<Self, OmegaError> {
        if period.is_empty() {
            return Err(OmegaError::EmptyPeriod);
        }
        if prefix.iter().chain(&period).any(|s| s.is_end()) {
            return Err(OpmError::InvalidTerminal("#".into()).into());
        }
        Ok(LassoWord { prefix, period })
    }

    pub fn parse<S: AsRef<str>>(alphabet: &PrecedenceAlphabet, prefix: &[S], period: &[S]) -> Result<Self, OmegaError> {
        LassoWord::new(alphabet.word(prefix)?, alphabet.word(period)?)
    }

    pub fn prefix(&self) -> &[Symbol] {
        &self.prefix
    }

    pub fn period(&self) -> &[Symbol] {
        &self.period
    }

    /// Token at absolute position `i`.
    pub fn at(&self, i: usize) -> Symbol {
        if i < self.prefix.len() {
            self.prefix[i]
        } else {
            self.period[(i - self.prefix.len()) % self.period.len()]
        }
    }

    pub fn slice(&self, from: usize, to: usize) -> Vec<Symbol> {
        (from..to).map(|i| self.at(i)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Returns {
    /// The stack is `[#]` at `start`, `start + period`, ... and the structure
    /// repeats from `start` on. `positions` lists every return up to
    /// `start + period`.
    Periodic {
        start: usize,
        period: usize,
        positions: Vec<usize>,
    },
    /// The structural run dies; these are all the returns before death.
    Finite(Vec<usize>),
    /// No verdict after reading `budget` tokens.
    Undetermined { budget: usize },
}

/// Positions `p ≥ 1` where, after the flushes triggered by the lookahead at
/// `p`, the state-free stack holds only `#`.
pub fn return_positions(alphabet: &PrecedenceAlphabet, lasso: &LassoWord, budget: usize) -> Returns {
    let mut stack = ShapeStack::new(Symbol::End);
    let mut positions = Vec::new();
    let mut by_offset: BTreeMap<usize, usize> = BTreeMap::new();
    let u = lasso.prefix.len();
    let v = lasso.period.len();
    let mut p = 0;
    loop {
        let la = lasso.at(p);
        if alphabet.rel(stack.top(), la) == Some(PrecRel::Takes) {
            if stack.advance(alphabet, la).is_err() {
                return Returns::Finite(positions);
            }
            continue;
        }
        if stack.depth() == 0 && p >= 1 {
            positions.push(p);
            if p >= u {
                if let Some(&r) = by_offset.get(&((p - u) % v)) {
                    return Returns::Periodic {
                        start: r,
                        period: p - r,
                        positions,
                    };
                }
                by_offset.insert((p - u) % v, p);
            }
        }
        if p >= budget {
            return Returns::Undetermined { budget };
        }
        if stack.advance(alphabet, la).is_err() {
            return Returns::Finite(positions);
        }
        p += 1;
    }
}

/// `|u| + (|Q|² + 2)·|v|`
pub fn default_budget(a: &FloydAutomaton, lasso: &LassoWord) -> usize {
    let q = a.states().len();
    lasso.prefix.len() + (q * q + 2) * lasso.period.len()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    /// `(state, absolute position)` at consecutive returns; the first and the
    /// last entries carry the same final state and positions a whole number
    /// of periods apart.
    pub cycle: Vec<(usize, usize)>,
}

impl Witness {
    pub fn render(&self, a: &FloydAutomaton) -> String {
        self.cycle
            .iter()
            .map(|&(q, p)| format!("{}@{}", a.states()[q], p))
            .collect::<Vec<_>>()
            .join(" -> ")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RejectReason {
    NoReturns,
    NoAcceptingCycle,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::NoReturns => "no-returns",
            RejectReason::NoAcceptingCycle => "no-accepting-cycle",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OmegaVerdict {
    Accepted(Witness),
    Rejected(RejectReason),
    Undetermined { budget: usize },
}

/// States `q'` such that, from stack `[#, q]` with `q ∈ from`, reading
/// `lasso[start..end]` ends in stack `[#, q']` once the lookahead at `end`
/// has triggered all its flushes.
pub fn segment_reach(
    a: &FloydAutomaton,
    lasso: &LassoWord,
    start: usize,
    end: usize,
    from: &BTreeSet<usize>,
) -> BTreeSet<usize> {
    // the token at `end` only serves as lookahead
    let input = lasso.slice(start, end + 1);
    let len = end - start;
    let mut out = BTreeSet::new();
    let mut seen: HashSet<Configuration> = HashSet::new();
    let mut todo: Vec<Configuration> = from.iter().map(|&q| Configuration::initial(q)).collect();
    while let Some(c) = todo.pop() {
        if c.pos > len || !seen.insert(c.clone()) {
            continue;
        }
        if c.pos == len && c.is_bottom_only() {
            out.insert(c.top().state);
            continue;
        }
        todo.extend(a.step(&c, &input).into_iter().map(|(_, c)| c));
    }
    out
}

pub fn omega_accepts(a: &FloydAutomaton, lasso: &LassoWord, budget: usize) -> Result<OmegaVerdict, OmegaError> {
    if let EqCheck::Cycle(c) = a.eq_check() {
        return Err(OmegaError::EqCycle(c.clone()));
    }
    let (start, positions) = match return_positions(a.alphabet(), lasso, budget) {
        Returns::Finite(_) => return Ok(OmegaVerdict::Rejected(RejectReason::NoReturns)),
        Returns::Undetermined { budget } => return Ok(OmegaVerdict::Undetermined { budget }),
        Returns::Periodic { start, positions, .. } => (start, positions),
    };
    // returns inside one period of the tail: marks[0] = start, marks[k] = start + ρ
    let marks: Vec<usize> = positions.into_iter().filter(|&p| p >= start).collect();
    let k = marks.len() - 1;

    let entry = segment_reach(a, lasso, 0, start, a.initial());
    let mut rel: Vec<BTreeMap<usize, BTreeSet<usize>>> = Vec::with_capacity(k);
    for i in 0..k {
        let mut r = BTreeMap::new();
        for q in 0..a.states().len() {
            let to = segment_reach(a, lasso, marks[i], marks[i + 1], &BTreeSet::from([q]));
            if !to.is_empty() {
                r.insert(q, to);
            }
        }
        rel.push(r);
    }
    let succ = |(q, i): (usize, usize)| -> Vec<(usize, usize)> {
        rel[i]
            .get(&q)
            .into_iter()
            .flatten()
            .map(|&t| (t, (i + 1) % k))
            .collect()
    };

    // nodes reachable from the entry states, in breadth-first order, with the
    // absolute position at which each is first reached
    let mut reach: Vec<(usize, usize)> = entry.iter().map(|&q| (q, 0)).collect();
    let mut first_at: BTreeMap<(usize, usize), usize> = reach.iter().map(|&n| (n, marks[0])).collect();
    let mut head = 0;
    while head < reach.len() {
        let cur = reach[head];
        let next = first_at[&cur] + marks[cur.1 + 1] - marks[cur.1];
        for n in succ(cur) {
            if let std::collections::btree_map::Entry::Vacant(e) = first_at.entry(n) {
                e.insert(next);
                reach.push(n);
            }
        }
        head += 1;
    }
    for &node in &reach {
        if !a.is_final(node.0) {
            continue;
        }
        if let Some(path) = cycle_through(node, &succ) {
            let mut pos = first_at[&node];
            let mut cycle = vec![(node.0, pos)];
            for w in path.windows(2) {
                let (i, j) = (w[0].1, w[1].1);
                pos += marks[i + 1] - marks[i];
                debug_assert_eq!((pos - marks[j]) % (marks[k] - marks[0]), 0);
                cycle.push((w[1].0, pos));
            }
            return Ok(OmegaVerdict::Accepted(Witness { cycle }));
        }
    }
    Ok(OmegaVerdict::Rejected(RejectReason::NoAcceptingCycle))
}

/// Shortest path `node → … → node` of length ≥ 1, both ends included.
fn cycle_through<F>(node: (usize, usize), succ: &F) -> Option<Vec<(usize, usize)>>
where
    F: Fn((usize, usize)) -> Vec<(usize, usize)>,
{
    let mut parent: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
    for n in succ(node) {
        if n == node {
            return Some(vec![node, node]);
        }
        if let std::collections::btree_map::Entry::Vacant(e) = parent.entry(n) {
            e.insert(node);
            queue.push_back(n);
        }
    }
    while let Some(cur) = queue.pop_front() {
        for n in succ(cur) {
            if n == node {
                let mut back = vec![cur];
                let mut at = cur;
                while let Some(&p) = parent.get(&at) {
                    if p == node {
                        break;
                    }
                    back.push(p);
                    at = p;
                }
                let mut path = vec![node];
                path.extend(back.into_iter().rev());
                path.push(node);
                return Some(path);
            }
            if let std::collections::btree_map::Entry::Vacant(e) = parent.entry(n) {
                e.insert(cur);
                queue.push_back(n);
            }
        }
    }
    None
}

/// Replays a witness with the plain interpreter: every hop must be a real
/// run between stacks `[#, q]`, the cycle must close on the same final state
/// a whole number of periods later, and the start must be reachable from an
/// initial state.
pub fn replay_witness(a: &FloydAutomaton, lasso: &LassoWord, w: &Witness) -> bool {
    let (Some(&(q_first, p_first)), Some(&(q_last, p_last))) = (w.cycle.first(), w.cycle.last()) else {
        return false;
    };
    let v = lasso.period.len();
    let closes = q_first == q_last
        && a.is_final(q_first)
        && p_first >= lasso.prefix.len()
        && p_last > p_first
        && (p_last - p_first) % v == 0;
    if !closes {
        return false;
    }
    let hops_ok = w
        .cycle
        .windows(2)
        .all(|h| segment_reach(a, lasso, h[0].1, h[1].1, &BTreeSet::from([h[0].0])).contains(&h[1].0));
    let whole = segment_reach(a, lasso, p_first, p_last, &BTreeSet::from([q_first])).contains(&q_first);
    let entered = segment_reach(a, lasso, 0, p_first, a.initial()).contains(&q_first);
    hops_ok && whole && entered
}
