//! Operator precedence alphabets.
//!
//! An alphabet is a set of terminal tokens together with a conflict-free
//! precedence matrix over the terminals and the border token `#`. Absent
//! cells are a normal outcome: they mean that no move is possible when the
//! two symbols meet, which kills a run or a parse.
//!
//! The module also hosts the state-free stack discipline ([`ShapeStack`]):
//! the move kind taken by any automaton over an alphabet depends only on the
//! matrix and the input, so the same discipline drives [`parse_chain`]
//! (tree building) and the periodicity analysis used for infinite words.
//!
//! [`parse_chain`]: PrecedenceAlphabet::parse_chain

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

/// The reserved border token.
pub const BORDER: &str = "#";

/// One of the three precedence relations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PrecRel {
    /// `a ⋖ b`
    Yields,
    /// `a ≐ b`
    Equal,
    /// `a ⋗ b`
    Takes,
}

impl PrecRel {
    pub fn symbol(self) -> &'static str {
        match self {
            PrecRel::Yields => "<",
            PrecRel::Equal => "=",
            PrecRel::Takes => ">",
        }
    }

    pub fn from_symbol(s: &str) -> Option<PrecRel> {
        match s {
            "<" => Some(PrecRel::Yields),
            "=" => Some(PrecRel::Equal),
            ">" => Some(PrecRel::Takes),
            _ => None,
        }
    }
}

impl fmt::Display for PrecRel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A terminal of some alphabet (by declaration index) or the border `#`.
///
/// Terminals order before the border, so sorted output puts `#` last.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Term(usize),
    End,
}

impl Symbol {
    pub fn is_end(self) -> bool {
        matches!(self, Symbol::End)
    }
}

/// The three kinds of automaton moves. Also used by the state-free stack.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MoveKind {
    Mark,
    Push,
    Flush,
}

impl MoveKind {
    pub fn name(self) -> &'static str {
        match self {
            MoveKind::Mark => "mark",
            MoveKind::Push => "push",
            MoveKind::Flush => "flush",
        }
    }
}

impl fmt::Display for MoveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A pair of tokens carrying more than one relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairConflict {
    pub left: String,
    pub right: String,
    pub relations: Vec<PrecRel>,
}

impl fmt::Display for PairConflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rels: Vec<_> = self.relations.iter().map(|r| r.symbol()).collect();
        write!(f, "({}, {}): {}", self.left, self.right, rels.join(" "))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OpmError {
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("invalid terminal `{0}`")]
    InvalidTerminal(String),
    #[error("terminal `{0}` declared twice")]
    DuplicateTerminal(String),
    #[error("conflicting precedence relations: {}", join_conflicts(.0))]
    Conflict(Vec<PairConflict>),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

fn join_conflicts(conflicts: &[PairConflict]) -> String {
    conflicts.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Checks the user-facing token rules shared by every file format.
pub(crate) fn valid_token(tok: &str) -> bool {
    !tok.is_empty() && !tok.chars().any(char::is_whitespace)
}

/// Result of the `≐`-cycle check over terminals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EqCheck {
    /// No cycle. `max_chain` is the number of tokens on the longest
    /// `≐`-chain, which is witnessed by `chain`.
    Acyclic { max_chain: usize, chain: Vec<String> },
    /// A cycle `t1 ≐ … ≐ tk ≐ t1`.
    Cycle(Vec<String>),
}

impl EqCheck {
    pub fn is_acyclic(&self) -> bool {
        matches!(self, EqCheck::Acyclic { .. })
    }

    pub fn max_chain(&self) -> Option<usize> {
        match self {
            EqCheck::Acyclic { max_chain, .. } => Some(*max_chain),
            EqCheck::Cycle(_) => None,
        }
    }
}

/// Terminals plus a conflict-free precedence matrix over terminals ∪ {#}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrecedenceAlphabet {
    terminals: Vec<String>,
    index: HashMap<String, usize>,
    // row-major, (n + 1)², with `#` at index n
    matrix: Vec<Option<PrecRel>>,
}

impl PrecedenceAlphabet {
    /// Builds and validates an alphabet. Entries may mention `#`; the order
    /// of entries is irrelevant and repeated identical entries are allowed.
    pub fn new<T, A, B>(terminals: &[T], entries: &[(A, B, PrecRel)]) -> Result<Self, OpmError>
    where
        T: AsRef<str>,
        A: AsRef<str>,
        B: AsRef<str>,
    {
        let mut alphabet = Self::empty(terminals)?;
        let mut seen: BTreeMap<(Symbol, Symbol), Vec<PrecRel>> = BTreeMap::new();
        for (a, b, rel) in entries {
            let sa = alphabet.lookup(a.as_ref())?;
            let sb = alphabet.lookup(b.as_ref())?;
            let rels = seen.entry((sa, sb)).or_default();
            if !rels.contains(rel) {
                rels.push(*rel);
            }
        }
        alphabet.fill(seen)?;
        Ok(alphabet)
    }

    /// Index-level constructor used by generators and conversions.
    pub fn from_symbols<T: AsRef<str>>(
        terminals: &[T],
        entries: impl IntoIterator<Item = (Symbol, Symbol, PrecRel)>,
    ) -> Result<Self, OpmError> {
        let mut alphabet = Self::empty(terminals)?;
        let n = alphabet.terminals.len();
        let mut seen: BTreeMap<(Symbol, Symbol), Vec<PrecRel>> = BTreeMap::new();
        for (a, b, rel) in entries {
            for s in [a, b] {
                if let Symbol::Term(i) = s {
                    if i >= n {
                        return Err(OpmError::UnknownToken(format!("terminal #{i}")));
                    }
                }
            }
            let rels = seen.entry((a, b)).or_default();
            if !rels.contains(&rel) {
                rels.push(rel);
            }
        }
        alphabet.fill(seen)?;
        Ok(alphabet)
    }

    fn empty<T: AsRef<str>>(terminals: &[T]) -> Result<Self, OpmError> {
        let mut index = HashMap::new();
        let mut names = Vec::with_capacity(terminals.len());
        for t in terminals {
            let t = t.as_ref();
            if !valid_token(t) || t == BORDER {
                return Err(OpmError::InvalidTerminal(t.to_string()));
            }
            if index.insert(t.to_string(), names.len()).is_some() {
                return Err(OpmError::DuplicateTerminal(t.to_string()));
            }
            names.push(t.to_string());
        }
        let side = names.len() + 1;
        Ok(PrecedenceAlphabet {
            terminals: names,
            index,
            matrix: vec![None; side * side],
        })
    }

    fn fill(&mut self, seen: BTreeMap<(Symbol, Symbol), Vec<PrecRel>>) -> Result<(), OpmError> {
        let mut conflicts = Vec::new();
        for ((a, b), mut rels) in seen {
            if rels.len() > 1 {
                rels.sort();
                conflicts.push(PairConflict {
                    left: self.name(a).to_string(),
                    right: self.name(b).to_string(),
                    relations: rels,
                });
            } else {
                let at = self.cell(a, b);
                self.matrix[at] = Some(rels[0]);
            }
        }
        if conflicts.is_empty() {
            Ok(())
        } else {
            Err(OpmError::Conflict(conflicts))
        }
    }

    fn cell(&self, a: Symbol, b: Symbol) -> usize {
        let n = self.terminals.len();
        let at = |s: Symbol| match s {
            Symbol::Term(i) => i,
            Symbol::End => n,
        };
        at(a) * (n + 1) + at(b)
    }

    pub fn terminals(&self) -> &[String] {
        &self.terminals
    }

    pub fn len(&self) -> usize {
        self.terminals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terminals.is_empty()
    }

    /// Terminals followed by `#`, in declaration order.
    pub fn symbols(&self) -> impl Iterator<Item = Symbol> + '_ {
        (0..self.terminals.len())
            .map(Symbol::Term)
            .chain(std::iter::once(Symbol::End))
    }

    pub fn name(&self, s: Symbol) -> &str {
        match s {
            Symbol::Term(i) => &self.terminals[i],
            Symbol::End => BORDER,
        }
    }

    /// Resolves a token, accepting `#`.
    pub fn lookup(&self, tok: &str) -> Result<Symbol, OpmError> {
        if tok == BORDER {
            return Ok(Symbol::End);
        }
        self.index
            .get(tok)
            .map(|&i| Symbol::Term(i))
            .ok_or_else(|| OpmError::UnknownToken(tok.to_string()))
    }

    /// Resolves a user word. `#` is rejected: words never contain it.
    pub fn word<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<Symbol>, OpmError> {
        tokens
            .iter()
            .map(|t| match self.index.get(t.as_ref()) {
                Some(&i) => Ok(Symbol::Term(i)),
                None => Err(OpmError::UnknownToken(t.as_ref().to_string())),
            })
            .collect()
    }

    pub fn rel(&self, a: Symbol, b: Symbol) -> Option<PrecRel> {
        self.matrix[self.cell(a, b)]
    }

    /// String-level lookup.
    pub fn relation(&self, a: &str, b: &str) -> Result<Option<PrecRel>, OpmError> {
        Ok(self.rel(self.lookup(a)?, self.lookup(b)?))
    }

    /// All filled cells, rows and columns in declaration order with `#` last.
    pub fn entries(&self) -> Vec<(Symbol, Symbol, PrecRel)> {
        let mut out = Vec::new();
        for a in self.symbols() {
            for b in self.symbols() {
                if let Some(r) = self.rel(a, b) {
                    out.push((a, b, r));
                }
            }
        }
        out
    }

    pub fn filled_cells(&self) -> usize {
        self.matrix.iter().filter(|c| c.is_some()).count()
    }

    /// Whether `s` ever appears on the left of a relation of kind `rel`.
    pub fn row_has(&self, s: Symbol, rel: PrecRel) -> bool {
        self.symbols().any(|b| self.rel(s, b) == Some(rel))
    }

    /// Looks for a cycle in the `≐` graph over terminals (`#` excluded) and
    /// otherwise reports the longest `≐`-chain.
    pub fn eq_cycle_check(&self) -> EqCheck {
        let n = self.terminals.len();
        let succ: Vec<Vec<usize>> = (0..n)
            .map(|a| {
                (0..n)
                    .filter(|&b| self.rel(Symbol::Term(a), Symbol::Term(b)) == Some(PrecRel::Equal))
                    .collect()
            })
            .collect();

        #[derive(Clone, Copy, PartialEq)]
        enum Color {
            White,
            Grey,
            Black,
        }
        let mut color = vec![Color::White; n];
        // longest chain starting at node, with the next hop
        let mut longest = vec![(1usize, None::<usize>); n];
        let mut path: Vec<usize> = Vec::new();

        fn visit(
            v: usize,
            succ: &[Vec<usize>],
            color: &mut [Color],
            longest: &mut [(usize, Option<usize>)],
            path: &mut Vec<usize>,
        ) -> Option<Vec<usize>> {
            color[v] = Color::Grey;
            path.push(v);
            for &w in &succ[v] {
                match color[w] {
                    Color::Grey => {
                        let start = path.iter().position(|&x| x == w).unwrap();
                        return Some(path[start..].to_vec());
                    }
                    Color::White => {
                        if let Some(c) = visit(w, succ, color, longest, path) {
                            return Some(c);
                        }
                    }
                    Color::Black => {}
                }
                if longest[w].0 + 1 > longest[v].0 {
                    longest[v] = (longest[w].0 + 1, Some(w));
                }
            }
            path.pop();
            color[v] = Color::Black;
            None
        }

        for v in 0..n {
            if color[v] == Color::White {
                if let Some(cycle) = visit(v, &succ, &mut color, &mut longest, &mut path) {
                    return EqCheck::Cycle(cycle.into_iter().map(|i| self.terminals[i].clone()).collect());
                }
            }
        }

        let Some(best) = (0..n).max_by_key(|&v| (longest[v].0, std::cmp::Reverse(v))) else {
            return EqCheck::Acyclic {
                max_chain: 0,
                chain: Vec::new(),
            };
        };
        let mut chain = vec![self.terminals[best].clone()];
        let mut at = best;
        while let Some(next) = longest[at].1 {
            chain.push(self.terminals[next].clone());
            at = next;
        }
        EqCheck::Acyclic {
            max_chain: longest[best].0,
            chain,
        }
    }

    /// Parses `word` as a chain between the borders `left` and `right`
    /// using the state-free stack discipline. The decomposition is unique:
    /// every step is forced by the relation between the stack top and the
    /// lookahead.
    pub fn parse_chain(&self, left: Symbol, word: &[Symbol], right: Symbol) -> Result<ChainTree, NotAChain> {
        if word.is_empty() {
            return Err(NotAChain {
                position: 0,
                reason: ChainFailure::Empty,
            });
        }
        let mut shape = ShapeStack::new(left);
        // child reduced just before each stack entry's symbol; index 0 is the bottom
        let mut before: Vec<Option<ChainTree>> = vec![None];
        let mut pending: Option<ChainTree> = None;
        let mut pos = 0;
        loop {
            let lookahead = word.get(pos).copied().unwrap_or(right);
            if pos == word.len() && shape.depth() == 0 {
                // the whole word collapsed back onto the left border
                if self.rel(left, right).is_none() && !(left.is_end() && right.is_end()) {
                    return Err(NotAChain {
                        position: pos + 1,
                        reason: ChainFailure::BordersUnrelated,
                    });
                }
                return Ok(pending.expect("nonempty word leaves a reduced chain"));
            }
            let step = shape.advance(self, lookahead).map_err(|reason| NotAChain {
                position: pos + 1,
                reason: reason.describe(self),
            })?;
            match step {
                ShapeMove::Shift(_) => {
                    if pos == word.len() {
                        return Err(NotAChain {
                            position: pos + 1,
                            reason: ChainFailure::BorderConsumed,
                        });
                    }
                    before.push(pending.take());
                    pos += 1;
                }
                ShapeMove::Flush { popped } => {
                    let group = before.split_off(before.len() - popped.len());
                    let mut children: Vec<Option<ChainTree>> = group;
                    children.push(pending.take());
                    pending = Some(ChainTree {
                        left: shape.top(),
                        right: lookahead,
                        spine: popped,
                        children,
                    });
                }
            }
        }
    }

    /// Renders the matrix in the line format, `#` last.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (a, b, r) in self.entries() {
            out.push_str(&format!("{} {} {}\n", self.name(a), r, self.name(b)));
        }
        out
    }

    /// Parses the line format `<a> <rel> <b>`. Terminals are collected in
    /// first-occurrence order after any `declared` ones.
    pub fn from_text(declared: &[String], text: &str) -> Result<Self, OpmError> {
        let mut terminals: Vec<String> = declared.to_vec();
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let (a, rel, b) = parse_matrix_line(line).map_err(|message| OpmError::Syntax { line: i + 1, message })?;
            for t in [&a, &b] {
                if t != BORDER && !terminals.contains(t) {
                    terminals.push(t.clone());
                }
            }
            entries.push((a, b, rel));
        }
        Self::new(&terminals, &entries)
    }
}

pub(crate) fn strip_comment(line: &str) -> &str {
    match line.find("//") {
        Some(at) => &line[..at],
        None => line,
    }
}

pub(crate) fn parse_matrix_line(line: &str) -> Result<(String, PrecRel, String), String> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(format!("expected `<a> <rel> <b>`, found `{line}`"));
    }
    let rel = PrecRel::from_symbol(parts[1]).ok_or_else(|| format!("unknown relation `{}`", parts[1]))?;
    Ok((parts[0].to_string(), rel, parts[2].to_string()))
}

/// A chain `a0[x0 a1 x1 … an xn]a(n+1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainTree {
    pub left: Symbol,
    pub right: Symbol,
    /// `a1 … an`, nonempty.
    pub spine: Vec<Symbol>,
    /// `x0 … xn`; `children[i]` sits between `spine[i-1]` (or `left`) and
    /// `spine[i]` (or `right`).
    pub children: Vec<Option<ChainTree>>,
}

impl ChainTree {
    pub fn is_simple(&self) -> bool {
        self.children.iter().all(Option::is_none)
    }

    /// The word the chain spans, borders excluded.
    pub fn frontier(&self) -> Vec<Symbol> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut Vec<Symbol>) {
        for (i, child) in self.children.iter().enumerate() {
            if let Some(c) = child {
                c.collect(out);
            }
            if let Some(&a) = self.spine.get(i) {
                out.push(a);
            }
        }
    }

    /// Every chain in the tree, outermost first.
    pub fn subchains(&self) -> Vec<&ChainTree> {
        let mut out = vec![self];
        for c in self.children.iter().flatten() {
            out.extend(c.subchains());
        }
        out
    }

    /// Checks the border relations of this chain and all nested ones.
    pub fn well_formed(&self, alphabet: &PrecedenceAlphabet) -> bool {
        let n = self.spine.len();
        if n == 0 || self.children.len() != n + 1 {
            return false;
        }
        if alphabet.rel(self.left, self.spine[0]) != Some(PrecRel::Yields)
            || alphabet.rel(self.spine[n - 1], self.right) != Some(PrecRel::Takes)
        {
            return false;
        }
        if self
            .spine
            .windows(2)
            .any(|w| alphabet.rel(w[0], w[1]) != Some(PrecRel::Equal))
        {
            return false;
        }
        self.children.iter().enumerate().all(|(i, c)| match c {
            None => true,
            Some(c) => {
                let l = if i == 0 { self.left } else { self.spine[i - 1] };
                let r = if i == n { self.right } else { self.spine[i] };
                c.left == l && c.right == r && c.well_formed(alphabet)
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("not a chain at position {position}: {reason}")]
pub struct NotAChain {
    /// 1-based position of the lookahead in `word · right`.
    pub position: usize,
    pub reason: ChainFailure,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ChainFailure {
    #[error("empty word")]
    Empty,
    #[error("no relation between `{top}` and `{lookahead}`")]
    NoRelation { top: String, lookahead: String },
    #[error("`{top}` takes precedence over `{lookahead}` but nothing is marked")]
    NoMarkedEntry { top: String, lookahead: String },
    #[error("the right border would be consumed")]
    BorderConsumed,
    #[error("the borders are unrelated")]
    BordersUnrelated,
}

/// Why the state-free stack cannot move.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeDeath {
    NoRelation {
        top: Symbol,
        lookahead: Symbol,
    },
    NoMarkedEntry {
        top: Symbol,
        lookahead: Symbol,
    },
    /// `#` can never be shifted.
    ShiftBorder,
}

impl ShapeDeath {
    fn describe(self, alphabet: &PrecedenceAlphabet) -> ChainFailure {
        match self {
            ShapeDeath::NoRelation { top, lookahead } => ChainFailure::NoRelation {
                top: alphabet.name(top).to_string(),
                lookahead: alphabet.name(lookahead).to_string(),
            },
            ShapeDeath::NoMarkedEntry { top, lookahead } => ChainFailure::NoMarkedEntry {
                top: alphabet.name(top).to_string(),
                lookahead: alphabet.name(lookahead).to_string(),
            },
            ShapeDeath::ShiftBorder => ChainFailure::BorderConsumed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ShapeMove {
    /// Mark or push: the lookahead was consumed.
    Shift(MoveKind),
    /// The popped symbols, bottom-most first.
    Flush { popped: Vec<Symbol> },
}

impl ShapeMove {
    pub fn kind(&self) -> MoveKind {
        match self {
            ShapeMove::Shift(k) => *k,
            ShapeMove::Flush { .. } => MoveKind::Flush,
        }
    }
}

/// The automaton stack with states erased: `(symbol, marked)` entries above
/// an unmarked bottom symbol.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ShapeStack {
    entries: Vec<(Symbol, bool)>,
}

impl ShapeStack {
    pub fn new(bottom: Symbol) -> Self {
        ShapeStack {
            entries: vec![(bottom, false)],
        }
    }

    /// Entries above the bottom.
    pub fn depth(&self) -> usize {
        self.entries.len() - 1
    }

    pub fn top(&self) -> Symbol {
        self.entries.last().unwrap().0
    }

    pub fn entries(&self) -> &[(Symbol, bool)] {
        &self.entries
    }

    /// Performs the one move dictated by the top symbol and `lookahead`.
    pub fn advance(&mut self, alphabet: &PrecedenceAlphabet, lookahead: Symbol) -> Result<ShapeMove, ShapeDeath> {
        let top = self.top();
        match alphabet.rel(top, lookahead) {
            None => Err(ShapeDeath::NoRelation { top, lookahead }),
            Some(PrecRel::Yields | PrecRel::Equal) if lookahead.is_end() => Err(ShapeDeath::ShiftBorder),
            Some(PrecRel::Yields) => {
                self.entries.push((lookahead, true));
                Ok(ShapeMove::Shift(MoveKind::Mark))
            }
            Some(PrecRel::Equal) => {
                self.entries.push((lookahead, false));
                Ok(ShapeMove::Shift(MoveKind::Push))
            }
            Some(PrecRel::Takes) => {
                let marked = self.entries[1..].iter().rposition(|e| e.1).map(|i| i + 1);
                let Some(at) = marked else {
                    return Err(ShapeDeath::NoMarkedEntry { top, lookahead });
                };
                let popped = self.entries.split_off(at).into_iter().map(|e| e.0).collect();
                Ok(ShapeMove::Flush { popped })
            }
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use proptest::prelude::*;

    use super::*;

    fn expr() -> PrecedenceAlphabet {
        PrecedenceAlphabet::new(
            &["n", "+", "*"],
            &[
                ("n", "+", PrecRel::Takes),
                ("n", "*", PrecRel::Takes),
                ("+", "n", PrecRel::Yields),
                ("+", "+", PrecRel::Takes),
                ("+", "*", PrecRel::Yields),
                ("*", "n", PrecRel::Equal),
            ],
        )
        .unwrap()
    }

    pub(crate) fn dyck() -> PrecedenceAlphabet {
        let text = "
            a < a\n a = ra\n a < b
            ra < a\n ra > ra\n ra < b\n ra > rb\n ra > #
            b < a\n b < b\n b = rb
            rb < a\n rb > ra\n rb < b\n rb > rb\n rb > #
            # < a\n # < b\n # = #";
        PrecedenceAlphabet::from_text(&["a", "ra", "b", "rb"].map(String::from), text).unwrap()
    }

    fn word(a: &PrecedenceAlphabet, s: &str) -> Vec<Symbol> {
        a.word(&s.split_whitespace().collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn relation_lookup() {
        let a = expr();
        assert_eq!(a.relation("*", "n").unwrap(), Some(PrecRel::Equal));
        assert_eq!(a.relation("*", "+").unwrap(), None);
        assert_eq!(a.relation("n", "n").unwrap(), None);
        assert_eq!(a.relation("x", "n"), Err(OpmError::UnknownToken("x".into())));
    }

    #[test]
    fn dyck_matrix_has_nineteen_cells() {
        assert_eq!(dyck().filled_cells(), 19);
    }

    #[test]
    fn direct_contradiction_is_reported() {
        let err = PrecedenceAlphabet::new(&["a", "b"], &[("a", "b", PrecRel::Yields), ("a", "b", PrecRel::Takes)]);
        let Err(OpmError::Conflict(c)) = err else {
            panic!("expected conflict")
        };
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].left.as_str(), c[0].right.as_str()), ("a", "b"));
    }

    #[test]
    fn empty_entry_list() {
        let a = PrecedenceAlphabet::new::<_, &str, &str>(&["a", "b"], &[]).unwrap();
        for x in a.symbols() {
            for y in a.symbols() {
                assert_eq!(a.rel(x, y), None);
            }
        }
    }

    #[test]
    fn border_is_not_a_terminal() {
        assert_eq!(
            PrecedenceAlphabet::new::<_, &str, &str>(&["#"], &[]),
            Err(OpmError::InvalidTerminal("#".into()))
        );
        assert!(matches!(
            PrecedenceAlphabet::new(&["a"], &[("a", "z", PrecRel::Equal)]),
            Err(OpmError::UnknownToken(t)) if t == "z"
        ));
    }

    #[test]
    fn eq_cycles() {
        assert_eq!(
            expr().eq_cycle_check(),
            EqCheck::Acyclic {
                max_chain: 2,
                chain: vec!["*".into(), "n".into()]
            }
        );
        let two =
            PrecedenceAlphabet::new(&["a", "b"], &[("a", "b", PrecRel::Equal), ("b", "a", PrecRel::Equal)]).unwrap();
        assert_eq!(two.eq_cycle_check(), EqCheck::Cycle(vec!["a".into(), "b".into()]));
        // `# = #` does not count
        assert_eq!(dyck().eq_cycle_check().max_chain(), Some(2));
    }

    #[test]
    fn simple_chain() {
        let a = dyck();
        let t = a.parse_chain(Symbol::End, &word(&a, "a ra"), Symbol::End).unwrap();
        assert!(t.is_simple());
        assert_eq!(t.spine, word(&a, "a ra"));
    }

    #[test]
    fn composed_chain() {
        let a = dyck();
        let t = a.parse_chain(Symbol::End, &word(&a, "a b rb ra"), Symbol::End).unwrap();
        assert_eq!(t.spine, word(&a, "a ra"));
        assert!(t.children[0].is_none() && t.children[2].is_none());
        let inner = t.children[1].as_ref().unwrap();
        assert_eq!(inner.spine, word(&a, "b rb"));
        assert_eq!((inner.left, inner.right), (Symbol::Term(0), Symbol::Term(1)));
        assert!(t.well_formed(&a));
    }

    #[test]
    fn unrelated_first_token() {
        let a = dyck();
        let err = a.parse_chain(Symbol::End, &word(&a, "ra"), Symbol::End).unwrap_err();
        assert_eq!(err.position, 1);
        assert!(matches!(err.reason, ChainFailure::NoRelation { .. }));
    }

    #[test]
    fn unbalanced_words_are_not_chains() {
        let a = dyck();
        assert!(a.parse_chain(Symbol::End, &word(&a, "a"), Symbol::End).is_err());
        assert!(a.parse_chain(Symbol::End, &word(&a, "a rb"), Symbol::End).is_err());
        assert!(a.parse_chain(Symbol::End, &[], Symbol::End).is_err());
    }

    #[test]
    fn leading_subchain_becomes_first_child() {
        let a = PrecedenceAlphabet::from_text(&[], "n > +\n + < n\n # < n\n # < +\n n > #\n + > #\n # = #").unwrap();
        let w = word(&a, "n + n");
        let t = a.parse_chain(Symbol::End, &w, Symbol::End).unwrap();
        assert_eq!(t.spine, word(&a, "+"));
        assert_eq!(t.children[0].as_ref().unwrap().right, a.lookup("+").unwrap());
        assert_eq!(t.children[1].as_ref().unwrap().spine, word(&a, "n"));
        assert_eq!(t.frontier(), w);

        let b = dyck();
        let t = b.parse_chain(Symbol::End, &word(&b, "a ra a ra"), Symbol::End).unwrap();
        assert!(t.children[0].is_none());
        assert_eq!(t.children[2].as_ref().unwrap().left, Symbol::Term(1));
    }

    #[test]
    fn matrix_text_round_trip() {
        let a = dyck();
        let again = PrecedenceAlphabet::from_text(a.terminals(), &a.to_text()).unwrap();
        assert_eq!(a, again);
        assert!(matches!(
            PrecedenceAlphabet::from_text(&[], "a ? b"),
            Err(OpmError::Syntax { line: 1, .. })
        ));
    }

    const NAMES: [&str; 4] = ["a", "b", "c", "d"];

    /// Random matrix over the first `n` of `a b c d`; cells may be empty and
    /// `≐` may be cyclic.
    pub(crate) fn matrix(n: usize) -> impl Strategy<Value = PrecedenceAlphabet> {
        (
            prop::collection::vec(0u8..4, n * n),
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_map(move |(cells, opens, closes)| {
                let rels = [None, Some(PrecRel::Yields), Some(PrecRel::Equal), Some(PrecRel::Takes)];
                let mut entries = vec![(Symbol::End, Symbol::End, PrecRel::Equal)];
                for (k, &c) in cells.iter().enumerate() {
                    if let Some(r) = rels[c as usize] {
                        entries.push((Symbol::Term(k / n), Symbol::Term(k % n), r));
                    }
                }
                for t in 0..n {
                    if opens[t] {
                        entries.push((Symbol::End, Symbol::Term(t), PrecRel::Yields));
                    }
                    if closes[t] {
                        entries.push((Symbol::Term(t), Symbol::End, PrecRel::Takes));
                    }
                }
                PrecedenceAlphabet::from_symbols(&NAMES[..n], entries).unwrap()
            })
    }

    fn rel_is(m: &PrecedenceAlphabet, a: Symbol, b: Symbol, r: PrecRel) -> bool {
        m.rel(a, b) == Some(r)
    }

    /// `l[w[i..j]]r` straight from the definition of a chain: a spine
    /// `l ⋖ a1 ≐ … ≐ an ⋗ r` whose gaps are empty or chains themselves.
    pub(crate) fn is_chain(m: &PrecedenceAlphabet, w: &[Symbol], l: Symbol, i: usize, j: usize, r: Symbol) -> bool {
        if i >= j {
            return false;
        }
        (i..j).any(|k| {
            rel_is(m, l, w[k], PrecRel::Yields)
                && (k == i || is_chain(m, w, l, i, k, w[k]))
                && spine_rest(m, w, k, j, r)
        })
    }

    fn spine_rest(m: &PrecedenceAlphabet, w: &[Symbol], k: usize, j: usize, r: Symbol) -> bool {
        let closes = rel_is(m, w[k], r, PrecRel::Takes) && (k + 1 == j || is_chain(m, w, w[k], k + 1, j, r));
        closes
            || (k + 1..j).any(|k2| {
                rel_is(m, w[k], w[k2], PrecRel::Equal)
                    && (k2 == k + 1 || is_chain(m, w, w[k], k + 1, k2, w[k2]))
                    && spine_rest(m, w, k2, j, r)
            })
    }

    proptest! {
        #[test]
        fn chain_parsing_matches_definition(m in matrix(3), w in prop::collection::vec(0usize..3, 1..=7)) {
            let w: Vec<Symbol> = w.into_iter().map(Symbol::Term).collect();
            let parsed = m.parse_chain(Symbol::End, &w, Symbol::End);
            prop_assert_eq!(parsed.is_ok(), is_chain(&m, &w, Symbol::End, 0, w.len(), Symbol::End));
            if let Ok(tree) = parsed {
                prop_assert_eq!(tree.frontier(), w);
                prop_assert!(tree.well_formed(&m));
            }
        }

        #[test]
        fn eq_cycles_match_closure(n in 1usize..=4, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut entries = Vec::new();
            for a in 0..n {
                for b in 0..n {
                    if rng.random_bool(0.3) {
                        entries.push((Symbol::Term(a), Symbol::Term(b), PrecRel::Equal));
                    }
                }
            }
            let m = PrecedenceAlphabet::from_symbols(&NAMES[..n], entries).unwrap();
            let eq = |a: usize, b: usize| rel_is(&m, Symbol::Term(a), Symbol::Term(b), PrecRel::Equal);
            let mut reach: Vec<Vec<bool>> = (0..n).map(|a| (0..n).map(|b| eq(a, b)).collect()).collect();
            for k in 0..n {
                let via = reach[k].clone();
                for row in reach.iter_mut() {
                    if row[k] {
                        for (cell, &v) in row.iter_mut().zip(&via) {
                            *cell |= v;
                        }
                    }
                }
            }
            let cyclic = (0..n).any(|a| reach[a][a]);
            match m.eq_cycle_check() {
                EqCheck::Cycle(c) => {
                    prop_assert!(cyclic);
                    let idx: Vec<usize> = c.iter().map(|t| NAMES.iter().position(|x| x == t).unwrap()).collect();
                    for (k, &a) in idx.iter().enumerate() {
                        prop_assert!(eq(a, idx[(k + 1) % idx.len()]));
                    }
                }
                EqCheck::Acyclic { max_chain, chain } => {
                    prop_assert!(!cyclic);
                    // longest path by exhaustive search
                    fn longest(v: usize, n: usize, eq: &dyn Fn(usize, usize) -> bool) -> usize {
                        1 + (0..n).filter(|&w| eq(v, w)).map(|w| longest(w, n, eq)).max().unwrap_or(0)
                    }
                    let best = (0..n).map(|v| longest(v, n, &eq)).max().unwrap_or(0);
                    prop_assert_eq!(max_chain, best);
                    prop_assert_eq!(chain.len(), best);
                }
            }
        }
    }
}
