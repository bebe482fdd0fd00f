//! Floyd automata and their runs.

mod determinize;
mod text;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::opm::{valid_token, EqCheck, MoveKind, OpmError, PrecRel, PrecedenceAlphabet, Symbol};

pub use determinize::{determinize, determinize_detailed, Determinized, SubsetState};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AutomatonError {
    #[error(transparent)]
    Opm(#[from] OpmError),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("state `{0}` declared twice")]
    DuplicateState(String),
    #[error("invalid token `{0}`")]
    InvalidToken(String),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RunError {
    #[error("the ≐ relation has a cycle: {}", .0.join(" = "))]
    EqCycle(Vec<String>),
    #[error(transparent)]
    Opm(#[from] OpmError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StackEntry {
    pub symbol: Symbol,
    pub marked: bool,
    pub state: usize,
}

/// A stack plus the number of input tokens already consumed. The input word
/// itself is passed alongside; the terminator `#` is implicit past its end.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub stack: Vec<StackEntry>,
    pub pos: usize,
}

impl Configuration {
    pub fn initial(state: usize) -> Self {
        Configuration {
            stack: vec![StackEntry {
                symbol: Symbol::End,
                marked: false,
                state,
            }],
            pos: 0,
        }
    }

    pub fn top(&self) -> &StackEntry {
        self.stack.last().expect("stack always holds the bottom entry")
    }

    pub fn lookahead(&self, input: &[Symbol]) -> Symbol {
        input.get(self.pos).copied().unwrap_or(Symbol::End)
    }

    pub fn is_bottom_only(&self) -> bool {
        self.stack.len() == 1
    }

    pub fn marked_count(&self) -> usize {
        self.stack.iter().filter(|e| e.marked).count()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub input: Vec<Symbol>,
    pub start: Configuration,
    pub moves: Vec<(MoveKind, Configuration)>,
    /// Largest number of marked entries on the stack along the run.
    pub depth: usize,
}

impl Trace {
    pub fn move_kinds(&self) -> Vec<MoveKind> {
        self.moves.iter().map(|m| m.0).collect()
    }

    pub fn configurations(&self) -> impl Iterator<Item = &Configuration> {
        std::iter::once(&self.start).chain(self.moves.iter().map(|m| &m.1))
    }

    /// One line per configuration: `<move>  <stack> | <remaining> #`, the
    /// first line labelled `start`.
    pub fn render(&self, a: &FloydAutomaton) -> String {
        let mut out = String::new();
        let lines = std::iter::once(("start", &self.start)).chain(self.moves.iter().map(|(k, c)| (k.name(), c)));
        for (label, c) in lines {
            out.push_str(&format!("{label}  {}\n", a.render_configuration(c, &self.input)));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("no accepting run; longest prefix read: {}", if .longest_prefix.is_empty() { "ε".to_string() } else { .longest_prefix.join(" ") })]
pub struct NoAcceptingRun {
    pub longest_prefix: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FloydAutomaton {
    alphabet: PrecedenceAlphabet,
    states: Vec<String>,
    state_index: HashMap<String, usize>,
    initial: BTreeSet<usize>,
    finals: BTreeSet<usize>,
    push: BTreeMap<(usize, usize), BTreeSet<usize>>,
    flush: BTreeMap<(usize, usize), BTreeSet<usize>>,
    eq: EqCheck,
}

impl FloydAutomaton {
    /// Builds an automaton from named parts. `push` entries are
    /// `(q, a, p)` meaning `p ∈ δ_push(q, a)`; `flush` entries are `(q, r, p)`
    /// meaning `p ∈ δ_flush(q, r)`.
    pub fn new<S: AsRef<str>>(
        alphabet: PrecedenceAlphabet,
        states: &[S],
        initial: &[S],
        finals: &[S],
        push: &[(S, S, S)],
        flush: &[(S, S, S)],
    ) -> Result<Self, AutomatonError> {
        let states: Vec<String> = states.iter().map(|s| s.as_ref().to_string()).collect();
        let mut index = HashMap::new();
        for (i, s) in states.iter().enumerate() {
            if !valid_token(s) {
                return Err(AutomatonError::InvalidToken(s.clone()));
            }
            if index.insert(s.clone(), i).is_some() {
                return Err(AutomatonError::DuplicateState(s.clone()));
            }
        }
        let st = |s: &S| {
            index
                .get(s.as_ref())
                .copied()
                .ok_or_else(|| AutomatonError::UnknownState(s.as_ref().to_string()))
        };
        let term = |s: &S| match alphabet.lookup(s.as_ref())? {
            Symbol::Term(i) => Ok(i),
            Symbol::End => Err(OpmError::InvalidTerminal(s.as_ref().to_string())),
        };
        let initial = initial.iter().map(st).collect::<Result<_, _>>()?;
        let finals = finals.iter().map(st).collect::<Result<_, _>>()?;
        let mut push_map: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
        for (q, a, p) in push {
            push_map.entry((st(q)?, term(a)?)).or_default().insert(st(p)?);
        }
        let mut flush_map: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
        for (q, r, p) in flush {
            flush_map.entry((st(q)?, st(r)?)).or_default().insert(st(p)?);
        }
        let eq = alphabet.eq_cycle_check();
        Ok(FloydAutomaton {
            alphabet,
            states,
            state_index: index,
            initial,
            finals,
            push: push_map,
            flush: flush_map,
            eq,
        })
    }

    /// Index-based constructor for generated automata; indices must be in range.
    pub fn from_indices(
        alphabet: PrecedenceAlphabet,
        states: Vec<String>,
        initial: impl IntoIterator<Item = usize>,
        finals: impl IntoIterator<Item = usize>,
        push: impl IntoIterator<Item = (usize, usize, usize)>,
        flush: impl IntoIterator<Item = (usize, usize, usize)>,
    ) -> Result<Self, AutomatonError> {
        let names = |v: Vec<usize>| v.into_iter().map(|i| states[i].clone()).collect::<Vec<_>>();
        let initial = names(initial.into_iter().collect());
        let finals = names(finals.into_iter().collect());
        let push: Vec<(String, String, String)> = push
            .into_iter()
            .map(|(q, a, p)| (states[q].clone(), alphabet.terminals()[a].clone(), states[p].clone()))
            .collect();
        let flush: Vec<(String, String, String)> = flush
            .into_iter()
            .map(|(q, r, p)| (states[q].clone(), states[r].clone(), states[p].clone()))
            .collect();
        FloydAutomaton::new(alphabet, &states, &initial, &finals, &push, &flush)
    }

    pub fn alphabet(&self) -> &PrecedenceAlphabet {
        &self.alphabet
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn state(&self, name: &str) -> Option<usize> {
        self.state_index.get(name).copied()
    }

    pub fn initial(&self) -> &BTreeSet<usize> {
        &self.initial
    }

    pub fn finals(&self) -> &BTreeSet<usize> {
        &self.finals
    }

    pub fn is_final(&self, q: usize) -> bool {
        self.finals.contains(&q)
    }

    pub fn push_edges(&self) -> &BTreeMap<(usize, usize), BTreeSet<usize>> {
        &self.push
    }

    pub fn flush_edges(&self) -> &BTreeMap<(usize, usize), BTreeSet<usize>> {
        &self.flush
    }

    pub fn push_targets(&self, q: usize, a: usize) -> impl Iterator<Item = usize> + '_ {
        self.push.get(&(q, a)).into_iter().flatten().copied()
    }

    pub fn flush_targets(&self, q: usize, r: usize) -> impl Iterator<Item = usize> + '_ {
        self.flush.get(&(q, r)).into_iter().flatten().copied()
    }

    pub fn eq_check(&self) -> &EqCheck {
        &self.eq
    }

    /// Same automaton with a different final set.
    pub fn with_finals(&self, finals: impl IntoIterator<Item = usize>) -> Self {
        FloydAutomaton {
            finals: finals.into_iter().collect(),
            ..self.clone()
        }
    }

    pub fn is_deterministic(&self) -> bool {
        self.initial.len() == 1 && self.push.values().all(|s| s.len() <= 1) && self.flush.values().all(|s| s.len() <= 1)
    }

    pub fn word<S: AsRef<str>>(&self, w: &[S]) -> Result<Vec<Symbol>, OpmError> {
        self.alphabet.word(w)
    }

    /// All one-step successors. Dead ends (no relation, flush without a
    /// marked entry, empty transition image, `#` against `#`) yield nothing.
    pub fn step(&self, c: &Configuration, input: &[Symbol]) -> Vec<(MoveKind, Configuration)> {
        let top = *c.top();
        let la = c.lookahead(input);
        let Some(rel) = self.alphabet.rel(top.symbol, la) else {
            return Vec::new();
        };
        match rel {
            PrecRel::Yields | PrecRel::Equal => {
                let Symbol::Term(a) = la else {
                    return Vec::new();
                };
                let marked = rel == PrecRel::Yields;
                let kind = if marked { MoveKind::Mark } else { MoveKind::Push };
                self.push_targets(top.state, a)
                    .map(|p| {
                        let mut stack = c.stack.clone();
                        stack.push(StackEntry {
                            symbol: la,
                            marked,
                            state: p,
                        });
                        (kind, Configuration { stack, pos: c.pos + 1 })
                    })
                    .collect()
            }
            PrecRel::Takes => {
                let Some(at) = c.stack.iter().skip(1).rposition(|e| e.marked).map(|i| i + 1) else {
                    return Vec::new();
                };
                let below = c.stack[at - 1];
                self.flush_targets(top.state, below.state)
                    .map(|p| {
                        let mut stack = c.stack[..at].to_vec();
                        stack.last_mut().unwrap().state = p;
                        (MoveKind::Flush, Configuration { stack, pos: c.pos })
                    })
                    .collect()
            }
        }
    }

    fn check_runnable(&self) -> Result<(), RunError> {
        match &self.eq {
            EqCheck::Cycle(c) => Err(RunError::EqCycle(c.clone())),
            EqCheck::Acyclic { .. } => Ok(()),
        }
    }

    fn is_accepting(&self, c: &Configuration, input: &[Symbol]) -> bool {
        c.is_bottom_only() && c.pos == input.len() && self.is_final(c.top().state)
    }

    pub fn accepts<S: AsRef<str>>(&self, w: &[S]) -> Result<bool, RunError> {
        let input = self.word(w)?;
        self.accepts_symbols(&input)
    }

    /// Depth-first search over successor sets with a visited set.
    pub fn accepts_symbols(&self, input: &[Symbol]) -> Result<bool, RunError> {
        self.check_runnable()?;
        let mut seen: HashSet<Configuration> = HashSet::new();
        let mut todo: Vec<Configuration> = self.initial.iter().rev().map(|&q| Configuration::initial(q)).collect();
        while let Some(c) = todo.pop() {
            if self.is_accepting(&c, input) {
                return Ok(true);
            }
            if !seen.insert(c.clone()) {
                continue;
            }
            let next = self.step(&c, input);
            debug_assert!(next.windows(2).all(|w| w[0].0 == w[1].0), "mixed move kinds");
            todo.extend(next.into_iter().rev().map(|(_, c)| c));
        }
        Ok(false)
    }

    pub fn trace<S: AsRef<str>>(&self, w: &[S]) -> Result<Result<Trace, NoAcceptingRun>, RunError> {
        let input = self.word(w)?;
        self.trace_symbols(&input)
    }

    /// The first accepting run in depth-first order, successors ordered by
    /// state declaration order.
    pub fn trace_symbols(&self, input: &[Symbol]) -> Result<Result<Trace, NoAcceptingRun>, RunError> {
        self.check_runnable()?;
        let mut seen: HashSet<Configuration> = HashSet::new();
        let mut furthest = 0;
        for &q in &self.initial {
            let start = Configuration::initial(q);
            // path of (move, config) with pending successors per level
            let mut path: Vec<(Option<MoveKind>, Configuration)> = vec![(None, start.clone())];
            let mut pending: Vec<std::vec::IntoIter<(MoveKind, Configuration)>> = Vec::new();
            if self.is_accepting(&start, input) {
                return Ok(Ok(self.finish_trace(input, path)));
            }
            seen.insert(start.clone());
            pending.push(self.step(&start, input).into_iter());
            while let Some(iter) = pending.last_mut() {
                match iter.next() {
                    None => {
                        pending.pop();
                        path.pop();
                    }
                    Some((kind, c)) => {
                        furthest = furthest.max(c.pos);
                        if self.is_accepting(&c, input) {
                            path.push((Some(kind), c));
                            return Ok(Ok(self.finish_trace(input, path)));
                        }
                        if seen.insert(c.clone()) {
                            let next = self.step(&c, input).into_iter();
                            path.push((Some(kind), c));
                            pending.push(next);
                        }
                    }
                }
            }
        }
        Ok(Err(NoAcceptingRun {
            longest_prefix: input[..furthest]
                .iter()
                .map(|&s| self.alphabet.name(s).to_string())
                .collect(),
        }))
    }

    fn finish_trace(&self, input: &[Symbol], path: Vec<(Option<MoveKind>, Configuration)>) -> Trace {
        let mut it = path.into_iter();
        let start = it.next().expect("path starts at an initial configuration").1;
        let moves: Vec<(MoveKind, Configuration)> = it.map(|(k, c)| (k.expect("moves after start"), c)).collect();
        let depth = std::iter::once(&start)
            .chain(moves.iter().map(|m| &m.1))
            .map(Configuration::marked_count)
            .max()
            .unwrap_or(0);
        Trace {
            input: input.to_vec(),
            start,
            moves,
            depth,
        }
    }

    /// `[#:q0][a':q1] | b a #`
    pub fn render_configuration(&self, c: &Configuration, input: &[Symbol]) -> String {
        let mut out = String::new();
        for e in &c.stack {
            let mark = if e.marked { "'" } else { "" };
            out.push_str(&format!(
                "[{}{}:{}]",
                self.alphabet.name(e.symbol),
                mark,
                self.states[e.state]
            ));
        }
        out.push_str(" |");
        for &s in &input[c.pos.min(input.len())..] {
            out.push(' ');
            out.push_str(self.alphabet.name(s));
        }
        out.push_str(" #");
        out
    }
}

impl fmt::Display for FloydAutomaton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const DYCK: &str = include_str!("../../../../fixtures/dyck.fa");

    pub(crate) fn dyck() -> FloydAutomaton {
        FloydAutomaton::parse(DYCK).unwrap()
    }

    fn words(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn dyck_flush_step() {
        let a = dyck();
        let input = a.word(&words("a b a ra rb ra a ra")).unwrap();
        let (q0, q1) = (0, 1);
        let e = |s: &str, marked, state| StackEntry {
            symbol: a.alphabet().lookup(s).unwrap(),
            marked,
            state,
        };
        let c = Configuration {
            stack: vec![
                e("#", false, q0),
                e("a", true, q1),
                e("b", true, q1),
                e("a", true, q1),
                e("ra", false, q1),
            ],
            pos: 4,
        };
        let next = a.step(&c, &input);
        assert_eq!(next.len(), 1);
        assert_eq!(next[0].0, MoveKind::Flush);
        assert_eq!(next[0].1.stack, c.stack[..3].to_vec());
        assert_eq!(next[0].1.pos, 4);

        let first = a.step(&Configuration::initial(q0), &input);
        assert_eq!(first[0].0, MoveKind::Mark);
        assert_eq!(first[0].1.stack[1], e("a", true, q1));

        let done = Configuration::initial(q0);
        assert!(a.step(&done, &[]).is_empty());
    }

    #[test]
    fn dyck_acceptance() {
        let a = dyck();
        assert!(a.accepts(&words("a b a ra rb ra a ra")).unwrap());
        assert!(a.accepts::<&str>(&[]).unwrap());
        assert!(!a.accepts(&["a"]).unwrap());
        assert!(!a.accepts(&words("a rb")).unwrap());
        assert!(a.is_deterministic());
    }

    #[test]
    fn dyck_trace_moves() {
        use MoveKind::*;
        let a = dyck();
        let t = a.trace(&words("a b a ra rb ra a ra")).unwrap().unwrap();
        assert_eq!(
            t.move_kinds(),
            [Mark, Mark, Mark, Push, Flush, Push, Flush, Push, Mark, Push, Flush, Flush]
        );
        assert_eq!(t.configurations().count(), 13);
        assert_eq!(t.depth, 3);
        let empty = a.trace::<&str>(&[]).unwrap().unwrap();
        assert!(empty.moves.is_empty());
        assert_eq!(empty.render(&a), "start  [#:q0] | #\n");
    }

    #[test]
    fn failed_trace_reports_prefix() {
        let a = dyck();
        let err = a.trace(&words("a b ra")).unwrap().unwrap_err();
        assert_eq!(err.longest_prefix, ["a", "b"]);
    }

    #[test]
    fn determinism_flags() {
        let a = dyck();
        let nd_push = FloydAutomaton::new(
            a.alphabet().clone(),
            &["q", "p", "r"],
            &["q"],
            &["q"],
            &[("q", "a", "p"), ("q", "a", "r")],
            &[],
        )
        .unwrap();
        assert!(!nd_push.is_deterministic());
        let two_initial =
            FloydAutomaton::new(a.alphabet().clone(), &["q0", "q1"], &["q0", "q1"], &[], &[], &[]).unwrap();
        assert!(!two_initial.is_deterministic());
    }

    #[test]
    fn eq_cycles_block_runs() {
        let alphabet = PrecedenceAlphabet::from_text(&[], "a = b\nb = a\n# < a").unwrap();
        let a = FloydAutomaton::new(alphabet, &["q"], &["q"], &["q"], &[], &[]).unwrap();
        assert!(matches!(a.accepts(&["a"]), Err(RunError::EqCycle(_))));
    }

    #[test]
    fn unknown_names_are_rejected() {
        let a = dyck();
        assert_eq!(
            FloydAutomaton::new(a.alphabet().clone(), &["q"], &["x"], &[], &[], &[]),
            Err(AutomatonError::UnknownState("x".into()))
        );
        assert!(matches!(
            a.accepts(&["zz"]),
            Err(RunError::Opm(OpmError::UnknownToken(_)))
        ));
    }
}
