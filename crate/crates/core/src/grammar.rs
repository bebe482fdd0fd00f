//! Operator grammars.
//!
//! Grammar file format:
//!
//! ```text
//! // comment
//! start: S
//! terminals: + * n        (optional; fixes terminal declaration order)
//! S -> E
//! E -> E + T | T * n | n
//! T -> T * n | n
//! ```
//!
//! A token is a nonterminal iff it is the axiom or appears as some
//! left-hand side. `_` alone is the empty alternative.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::opm::{strip_comment, valid_token, OpmError, PrecRel, PrecedenceAlphabet, Symbol, BORDER};

const RESERVED: [&str; 6] = [BORDER, "->", "|", "_", "start:", "terminals:"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GSym {
    T(usize),
    N(usize),
}

impl GSym {
    pub fn is_nonterminal(self) -> bool {
        matches!(self, GSym::N(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub lhs: usize,
    pub rhs: Vec<GSym>,
}

impl Rule {
    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    pub fn is_renaming(&self) -> bool {
        matches!(self.rhs[..], [GSym::N(_)])
    }
}

/// Where a precedence relation came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Witness {
    /// Index into [`Grammar::rules`].
    Rule(usize),
    /// The `#` extension through the axiom's terminal sets.
    Border,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpmConflict {
    pub left: String,
    pub right: String,
    pub witnesses: Vec<(PrecRel, Witness)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ShapeIssue {
    AxiomInRhs { rule: usize },
    EmptyRule { rule: usize },
    AxiomRuleNotRenaming { rule: usize },
    NonAxiomRenaming { rule: usize },
}

impl ShapeIssue {
    pub fn rule(&self) -> usize {
        match *self {
            ShapeIssue::AxiomInRhs { rule }
            | ShapeIssue::EmptyRule { rule }
            | ShapeIssue::AxiomRuleNotRenaming { rule }
            | ShapeIssue::NonAxiomRenaming { rule } => rule,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GrammarError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing `start:` line")]
    MissingStart,
    #[error("axiom `{0}` has no rules")]
    UndeclaredAxiom(String),
    #[error("rule `{0}` has adjacent nonterminals")]
    OperatorForm(String),
    #[error("`{0}` is used both as a terminal and a nonterminal")]
    Overlap(String),
    #[error("nonterminal `{0}` has no rules")]
    Undefined(String),
    #[error("invalid token `{0}`")]
    InvalidToken(String),
    #[error("precedence conflicts: {}", describe_conflicts(.0))]
    Conflict(Vec<OpmConflict>),
    #[error("grammar is not reduced; useless nonterminals: {}", .0.join(", "))]
    NotReduced(Vec<String>),
}

fn describe_conflicts(conflicts: &[OpmConflict]) -> String {
    conflicts
        .iter()
        .map(|c| {
            let rels: Vec<_> = c
                .witnesses
                .iter()
                .map(|(r, w)| match w {
                    Witness::Rule(i) => format!("{r} by rule {}", i + 1),
                    Witness::Border => format!("{r} by # extension"),
                })
                .collect();
            format!("({}, {}): {}", c.left, c.right, rels.join(", "))
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// Left and right terminal sets, indexed by nonterminal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TerminalSets {
    pub left: Vec<BTreeSet<usize>>,
    pub right: Vec<BTreeSet<usize>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grammar {
    nonterminals: Vec<String>,
    terminals: Vec<String>,
    axiom: usize,
    rules: Vec<Rule>,
}

impl Grammar {
    /// Validates and canonicalizes: the axiom becomes nonterminal 0, other
    /// nonterminals keep their relative order, and rules are grouped by
    /// left-hand side (stable, so per-nonterminal rule order is kept).
    pub fn new(
        nonterminals: Vec<String>,
        terminals: Vec<String>,
        axiom: usize,
        rules: Vec<Rule>,
    ) -> Result<Grammar, GrammarError> {
        let mut seen = HashSet::new();
        for t in nonterminals.iter().chain(&terminals) {
            if !valid_token(t) || RESERVED.contains(&t.as_str()) {
                return Err(GrammarError::InvalidToken(t.clone()));
            }
            if !seen.insert(t.as_str()) {
                return Err(GrammarError::Overlap(t.clone()));
            }
        }
        if axiom >= nonterminals.len() {
            return Err(GrammarError::MissingStart);
        }
        for r in &rules {
            let in_range = r.lhs < nonterminals.len()
                && r.rhs.iter().all(|s| match *s {
                    GSym::T(i) => i < terminals.len(),
                    GSym::N(i) => i < nonterminals.len(),
                });
            if !in_range {
                return Err(GrammarError::InvalidToken(format!("rule for #{}", r.lhs)));
            }
        }

        let mut order: Vec<usize> = vec![axiom];
        order.extend((0..nonterminals.len()).filter(|&i| i != axiom));
        let mut remap = vec![0; nonterminals.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        let nonterminals: Vec<String> = order.iter().map(|&i| nonterminals[i].clone()).collect();
        let mut rules: Vec<Rule> = rules
            .into_iter()
            .map(|r| Rule {
                lhs: remap[r.lhs],
                rhs: r
                    .rhs
                    .into_iter()
                    .map(|s| match s {
                        GSym::N(i) => GSym::N(remap[i]),
                        t => t,
                    })
                    .collect(),
            })
            .collect();
        rules.sort_by_key(|r| r.lhs);

        let g = Grammar {
            nonterminals,
            terminals,
            axiom: 0,
            rules,
        };
        for r in &g.rules {
            if r.rhs.windows(2).any(|w| w[0].is_nonterminal() && w[1].is_nonterminal()) {
                return Err(GrammarError::OperatorForm(g.rule_text(r)));
            }
        }
        for (i, name) in g.nonterminals.iter().enumerate().skip(1) {
            if !g.rules.iter().any(|r| r.lhs == i) {
                return Err(GrammarError::Undefined(name.clone()));
            }
        }
        Ok(g)
    }

    pub fn parse(text: &str) -> Result<Grammar, GrammarError> {
        let mut start: Option<String> = None;
        let mut declared: Vec<String> = Vec::new();
        let mut lines: Vec<(usize, String, Vec<Vec<String>>)> = Vec::new();

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: String| GrammarError::Syntax { line: line_no, message };
            if start.is_none() {
                let Some(rest) = line.strip_prefix("start:") else {
                    return Err(GrammarError::MissingStart);
                };
                let toks: Vec<&str> = rest.split_whitespace().collect();
                let [axiom] = toks[..] else {
                    return Err(syntax("`start:` takes exactly one nonterminal".into()));
                };
                check_token(axiom).map_err(syntax)?;
                start = Some(axiom.to_string());
                continue;
            }
            if let Some(rest) = line.strip_prefix("terminals:") {
                if !lines.is_empty() || !declared.is_empty() {
                    return Err(syntax("`terminals:` must directly follow `start:`".into()));
                }
                for t in rest.split_whitespace() {
                    check_token(t).map_err(syntax)?;
                    if declared.iter().any(|d| d == t) {
                        return Err(syntax(format!("terminal `{t}` declared twice")));
                    }
                    declared.push(t.to_string());
                }
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() < 2 || toks[1] != "->" {
                return Err(syntax("expected `<Nonterminal> -> ...`".into()));
            }
            check_token(toks[0]).map_err(syntax)?;
            let mut alts = vec![Vec::new()];
            for &t in &toks[2..] {
                if t == "|" {
                    alts.push(Vec::new());
                } else {
                    alts.last_mut().unwrap().push(t);
                }
            }
            let mut parsed = Vec::new();
            for alt in alts {
                match alt[..] {
                    [] => return Err(syntax("empty alternative; write `_` for ε".into())),
                    ["_"] => parsed.push(Vec::new()),
                    _ => {
                        for t in &alt {
                            check_token(t).map_err(syntax)?;
                        }
                        parsed.push(alt.iter().map(|t| t.to_string()).collect());
                    }
                }
            }
            lines.push((line_no, toks[0].to_string(), parsed));
        }

        let axiom_name = start.ok_or(GrammarError::MissingStart)?;
        let mut nonterminals = vec![axiom_name.clone()];
        for (_, lhs, _) in &lines {
            if !nonterminals.contains(lhs) {
                nonterminals.push(lhs.clone());
            }
        }
        if !lines.is_empty() && !lines.iter().any(|(_, lhs, _)| *lhs == axiom_name) {
            return Err(GrammarError::UndeclaredAxiom(axiom_name));
        }
        let nt_index: HashMap<&str, usize> = nonterminals.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut terminals = declared;
        for t in &terminals {
            if nt_index.contains_key(t.as_str()) {
                return Err(GrammarError::Overlap(t.clone()));
            }
        }
        let mut rules = Vec::new();
        for (_, lhs, alts) in &lines {
            for alt in alts {
                let rhs = alt
                    .iter()
                    .map(|t| match nt_index.get(t.as_str()) {
                        Some(&n) => GSym::N(n),
                        None => {
                            let at = terminals.iter().position(|x| x == t).unwrap_or_else(|| {
                                terminals.push(t.clone());
                                terminals.len() - 1
                            });
                            GSym::T(at)
                        }
                    })
                    .collect();
                rules.push(Rule {
                    lhs: nt_index[lhs.as_str()],
                    rhs,
                });
            }
        }
        Grammar::new(nonterminals, terminals, 0, rules)
    }

    pub fn nonterminals(&self) -> &[String] {
        &self.nonterminals
    }

    pub fn terminals(&self) -> &[String] {
        &self.terminals
    }

    pub fn axiom(&self) -> usize {
        self.axiom
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Rules of one nonterminal with their global indices, in order.
    pub fn rules_of(&self, nt: usize) -> impl Iterator<Item = (usize, &Rule)> {
        self.rules.iter().enumerate().filter(move |(_, r)| r.lhs == nt)
    }

    pub fn sym_name(&self, s: GSym) -> &str {
        match s {
            GSym::T(i) => &self.terminals[i],
            GSym::N(i) => &self.nonterminals[i],
        }
    }

    pub fn rule_text(&self, r: &Rule) -> String {
        let rhs: Vec<&str> = r.rhs.iter().map(|&s| self.sym_name(s)).collect();
        let rhs = if rhs.is_empty() { "_".to_string() } else { rhs.join(" ") };
        format!("{} -> {}", self.nonterminals[r.lhs], rhs)
    }

    /// Serializes in the grammar file format. Parsing the output yields an
    /// identical grammar.
    pub fn to_text(&self) -> String {
        let mut out = format!("start: {}\n", self.nonterminals[self.axiom]);
        if !self.terminals.is_empty() {
            out.push_str(&format!("terminals: {}\n", self.terminals.join(" ")));
        }
        for (nt, name) in self.nonterminals.iter().enumerate() {
            let alts: Vec<String> = self
                .rules_of(nt)
                .map(|(_, r)| {
                    if r.rhs.is_empty() {
                        "_".to_string()
                    } else {
                        r.rhs.iter().map(|&s| self.sym_name(s)).collect::<Vec<_>>().join(" ")
                    }
                })
                .collect();
            if !alts.is_empty() {
                out.push_str(&format!("{name} -> {}\n", alts.join(" | ")));
            }
        }
        out
    }

    /// Least fixpoint of the left/right terminal set equations.
    pub fn terminal_sets(&self) -> TerminalSets {
        let n = self.nonterminals.len();
        let mut left = vec![BTreeSet::new(); n];
        let mut right = vec![BTreeSet::new(); n];
        loop {
            let mut changed = false;
            for r in &self.rules {
                let mut add_left = BTreeSet::new();
                match r.rhs[..] {
                    [GSym::T(a), ..] | [GSym::N(_), GSym::T(a), ..] => {
                        add_left.insert(a);
                    }
                    _ => {}
                }
                if let Some(&GSym::N(b)) = r.rhs.first() {
                    add_left.extend(left[b].iter().copied());
                }
                let mut add_right = BTreeSet::new();
                match r.rhs[..] {
                    [.., GSym::T(a)] | [.., GSym::T(a), GSym::N(_)] => {
                        add_right.insert(a);
                    }
                    _ => {}
                }
                if let Some(&GSym::N(b)) = r.rhs.last() {
                    add_right.extend(right[b].iter().copied());
                }
                let before = (left[r.lhs].len(), right[r.lhs].len());
                left[r.lhs].extend(add_left);
                right[r.lhs].extend(add_right);
                changed |= before != (left[r.lhs].len(), right[r.lhs].len());
            }
            if !changed {
                return TerminalSets { left, right };
            }
        }
    }

    /// The operator precedence matrix, extended with `#` through the axiom:
    /// `# ⋖ b` for `b ∈ left(S)`, `a ⋗ #` for `a ∈ right(S)`, and `# ≐ #`.
    /// Conflicts are reported exhaustively with their witnessing rules.
    pub fn compute_opm(&self) -> Result<PrecedenceAlphabet, GrammarError> {
        let sets = self.terminal_sets();
        let mut found: BTreeMap<(Symbol, Symbol), BTreeMap<PrecRel, BTreeSet<Witness>>> = BTreeMap::new();
        let mut add = |a: Symbol, b: Symbol, rel: PrecRel, w: Witness| {
            found.entry((a, b)).or_default().entry(rel).or_default().insert(w);
        };
        for (ri, r) in self.rules.iter().enumerate() {
            let w = Witness::Rule(ri);
            let rhs = &r.rhs;
            for (i, &s) in rhs.iter().enumerate() {
                match s {
                    GSym::T(a) => {
                        match (rhs.get(i + 1), rhs.get(i + 2)) {
                            (Some(&GSym::T(b)), _) | (Some(&GSym::N(_)), Some(&GSym::T(b))) => {
                                add(Symbol::Term(a), Symbol::Term(b), PrecRel::Equal, w)
                            }
                            _ => {}
                        }
                        if let Some(&GSym::N(d)) = rhs.get(i + 1) {
                            for &b in &sets.left[d] {
                                add(Symbol::Term(a), Symbol::Term(b), PrecRel::Yields, w);
                            }
                        }
                    }
                    GSym::N(d) => {
                        if let Some(&GSym::T(b)) = rhs.get(i + 1) {
                            for &a in &sets.right[d] {
                                add(Symbol::Term(a), Symbol::Term(b), PrecRel::Takes, w);
                            }
                        }
                    }
                }
            }
        }
        for &b in &sets.left[self.axiom] {
            add(Symbol::End, Symbol::Term(b), PrecRel::Yields, Witness::Border);
        }
        for &a in &sets.right[self.axiom] {
            add(Symbol::Term(a), Symbol::End, PrecRel::Takes, Witness::Border);
        }
        add(Symbol::End, Symbol::End, PrecRel::Equal, Witness::Border);

        let name = |s: Symbol| match s {
            Symbol::Term(i) => self.terminals[i].clone(),
            Symbol::End => BORDER.to_string(),
        };
        let conflicts: Vec<OpmConflict> = found
            .iter()
            .filter(|(_, rels)| rels.len() > 1)
            .map(|(&(a, b), rels)| OpmConflict {
                left: name(a),
                right: name(b),
                witnesses: rels
                    .iter()
                    .flat_map(|(&rel, ws)| ws.iter().map(move |&w| (rel, w)))
                    .collect(),
            })
            .collect();
        if !conflicts.is_empty() {
            return Err(GrammarError::Conflict(conflicts));
        }
        let entries = found
            .into_iter()
            .map(|((a, b), rels)| (a, b, *rels.keys().next().unwrap()));
        PrecedenceAlphabet::from_symbols(&self.terminals, entries).map_err(|e| match e {
            // unreachable in practice: every pair carries a single relation here
            OpmError::Conflict(c) => GrammarError::Conflict(
                c.into_iter()
                    .map(|p| OpmConflict {
                        left: p.left,
                        right: p.right,
                        witnesses: Vec::new(),
                    })
                    .collect(),
            ),
            other => GrammarError::InvalidToken(other.to_string()),
        })
    }

    /// Checks the shape the grammar-to-automaton construction relies on:
    /// Fischer normal form without invertibility.
    pub fn validate_fischer_shape(&self) -> Vec<ShapeIssue> {
        let mut issues = Vec::new();
        for (i, r) in self.rules.iter().enumerate() {
            if r.rhs.contains(&GSym::N(self.axiom)) {
                issues.push(ShapeIssue::AxiomInRhs { rule: i });
            }
            if r.lhs == self.axiom {
                if !r.is_empty() && !r.is_renaming() {
                    issues.push(ShapeIssue::AxiomRuleNotRenaming { rule: i });
                }
            } else if r.is_empty() {
                issues.push(ShapeIssue::EmptyRule { rule: i });
            } else if r.is_renaming() {
                issues.push(ShapeIssue::NonAxiomRenaming { rule: i });
            }
        }
        issues
    }

    pub fn productive(&self) -> Vec<bool> {
        let mut prod = vec![false; self.nonterminals.len()];
        loop {
            let mut changed = false;
            for r in &self.rules {
                if !prod[r.lhs]
                    && r.rhs.iter().all(|s| match *s {
                        GSym::N(n) => prod[n],
                        GSym::T(_) => true,
                    })
                {
                    prod[r.lhs] = true;
                    changed = true;
                }
            }
            if !changed {
                return prod;
            }
        }
    }

    fn reachable_from_axiom(&self, usable: &[bool]) -> Vec<bool> {
        let mut reach = vec![false; self.nonterminals.len()];
        reach[self.axiom] = true;
        let mut queue = VecDeque::from([self.axiom]);
        while let Some(a) = queue.pop_front() {
            for (_, r) in self.rules_of(a) {
                if !rule_usable(r, usable) {
                    continue;
                }
                for s in &r.rhs {
                    if let GSym::N(b) = *s {
                        if !reach[b] {
                            reach[b] = true;
                            queue.push_back(b);
                        }
                    }
                }
            }
        }
        reach
    }

    /// Nonterminals that are unproductive or unreachable (the axiom is
    /// reported only when it is unproductive and has rules).
    pub fn useless_nonterminals(&self) -> Vec<String> {
        let prod = self.productive();
        let reach = self.reachable_from_axiom(&prod);
        (0..self.nonterminals.len())
            .filter(|&i| {
                let has_rules = self.rules.iter().any(|r| r.lhs == i);
                if i == self.axiom {
                    has_rules && !prod[i]
                } else {
                    !prod[i] || !reach[i]
                }
            })
            .map(|i| self.nonterminals[i].clone())
            .collect()
    }

    pub fn is_reduced(&self) -> bool {
        self.useless_nonterminals().is_empty()
    }

    /// Drops unproductive, then unreachable, nonterminals and their rules.
    /// The axiom always survives, possibly without rules.
    pub fn trim(&self) -> Grammar {
        let prod = self.productive();
        let reach = self.reachable_from_axiom(&prod);
        let keep: Vec<bool> = (0..self.nonterminals.len())
            .map(|i| i == self.axiom || (prod[i] && reach[i]))
            .collect();
        let rules: Vec<Rule> = self
            .rules
            .iter()
            .filter(|r| keep[r.lhs] && prod[r.lhs] && rule_usable(r, &prod))
            .cloned()
            .collect();
        self.rebuild(&keep, rules)
    }

    /// Reindexes after dropping nonterminals; `rules` must only mention kept ones.
    fn rebuild(&self, keep: &[bool], rules: Vec<Rule>) -> Grammar {
        let mut remap = vec![usize::MAX; self.nonterminals.len()];
        let mut names = Vec::new();
        for (i, name) in self.nonterminals.iter().enumerate() {
            if keep[i] {
                remap[i] = names.len();
                names.push(name.clone());
            }
        }
        let rules = rules
            .into_iter()
            .map(|r| Rule {
                lhs: remap[r.lhs],
                rhs: r
                    .rhs
                    .into_iter()
                    .map(|s| match s {
                        GSym::N(n) => GSym::N(remap[n]),
                        t => t,
                    })
                    .collect(),
            })
            .collect();
        Grammar::new(names, self.terminals.clone(), remap[self.axiom], rules)
            .expect("rebuilding a valid grammar keeps it valid")
    }

    /// Brings a reduced operator grammar into the shape accepted by
    /// [`validate_fischer_shape`](Self::validate_fischer_shape): fresh axiom
    /// when needed, ε-rules only at the axiom, no renaming except at the
    /// axiom. Language-preserving.
    pub fn normalize(&self) -> Result<Grammar, GrammarError> {
        let useless = self.useless_nonterminals();
        if !useless.is_empty() {
            return Err(GrammarError::NotReduced(useless));
        }
        let mut names = self.nonterminals.clone();
        let mut rules = self.rules.clone();
        let mut axiom = self.axiom;

        let axiom_in_rhs = rules.iter().any(|r| r.rhs.contains(&GSym::N(axiom)));
        let axiom_not_unit = rules
            .iter()
            .any(|r| r.lhs == axiom && !r.is_empty() && !r.is_renaming());
        if axiom_in_rhs || axiom_not_unit {
            let mut fresh = format!("{}'", names[axiom]);
            while names.contains(&fresh) || self.terminals.contains(&fresh) {
                fresh.push('\'');
            }
            names.push(fresh);
            let new_axiom = names.len() - 1;
            rules.push(Rule {
                lhs: new_axiom,
                rhs: vec![GSym::N(axiom)],
            });
            axiom = new_axiom;
        }

        // ε-elimination
        let nullable = nullable_set(names.len(), &rules);
        let mut without_eps: Vec<Rule> = Vec::new();
        let push_unique = |rules: &mut Vec<Rule>, r: Rule| {
            if !rules.contains(&r) {
                rules.push(r);
            }
        };
        for r in &rules {
            if r.rhs.is_empty() {
                continue;
            }
            let optional: Vec<usize> = (0..r.rhs.len())
                .filter(|&i| matches!(r.rhs[i], GSym::N(n) if nullable[n]))
                .collect();
            for mask in 0u64..(1u64 << optional.len()) {
                let drop: HashSet<usize> = optional
                    .iter()
                    .enumerate()
                    .filter(|(bit, _)| mask & (1 << bit) != 0)
                    .map(|(_, &i)| i)
                    .collect();
                let rhs: Vec<GSym> = r
                    .rhs
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !drop.contains(i))
                    .map(|(_, &s)| s)
                    .collect();
                if !rhs.is_empty() {
                    push_unique(&mut without_eps, Rule { lhs: r.lhs, rhs });
                }
            }
        }
        if nullable[axiom] {
            push_unique(
                &mut without_eps,
                Rule {
                    lhs: axiom,
                    rhs: Vec::new(),
                },
            );
        }

        // renaming closure for non-axiom nonterminals
        let n = names.len();
        let mut unit: Vec<BTreeSet<usize>> = (0..n).map(|a| BTreeSet::from([a])).collect();
        loop {
            let mut changed = false;
            for r in &without_eps {
                if let [GSym::N(b)] = r.rhs[..] {
                    if r.lhs == axiom {
                        continue;
                    }
                    let targets: Vec<usize> = unit[b].iter().copied().collect();
                    for set in unit.iter_mut().filter(|set| set.contains(&r.lhs)) {
                        for &t in &targets {
                            changed |= set.insert(t);
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut out: Vec<Rule> = Vec::new();
        for (a, reach) in unit.iter().enumerate() {
            if a == axiom {
                for r in without_eps.iter().filter(|r| r.lhs == a) {
                    push_unique(&mut out, r.clone());
                }
                continue;
            }
            for &b in reach {
                for r in without_eps.iter().filter(|r| r.lhs == b && !r.is_renaming()) {
                    push_unique(
                        &mut out,
                        Rule {
                            lhs: a,
                            rhs: r.rhs.clone(),
                        },
                    );
                }
            }
        }

        // nonterminals that lost all rules (only derived ε) must go; trim handles it
        let staged = Grammar {
            nonterminals: names,
            terminals: self.terminals.clone(),
            axiom,
            rules: out,
        };
        Ok(staged.trim())
    }

    /// Minimal terminal yield per nonterminal (`usize::MAX` if unproductive).
    pub fn min_yield(&self) -> Vec<usize> {
        let mut best = vec![usize::MAX; self.nonterminals.len()];
        loop {
            let mut changed = false;
            for r in &self.rules {
                let cost = r.rhs.iter().try_fold(0usize, |acc, s| match *s {
                    GSym::T(_) => Some(acc + 1),
                    GSym::N(n) if best[n] != usize::MAX => Some(acc + best[n]),
                    GSym::N(_) => None,
                });
                if let Some(c) = cost {
                    if c < best[r.lhs] {
                        best[r.lhs] = c;
                        changed = true;
                    }
                }
            }
            if !changed {
                return best;
            }
        }
    }

    /// Membership by breadth-first enumeration of leftmost derivations.
    /// Exponential; meant as an independent oracle for short words.
    pub fn cf_membership<S: AsRef<str>>(&self, word: &[S]) -> bool {
        let mut w = Vec::with_capacity(word.len());
        for t in word {
            match self.terminals.iter().position(|x| x == t.as_ref()) {
                Some(i) => w.push(i),
                None => return false,
            }
        }
        self.derives(&w)
    }

    /// [`cf_membership`](Self::cf_membership) over terminal indices.
    pub fn derives(&self, w: &[usize]) -> bool {
        let min = self.min_yield();
        let fits = |form: &[GSym]| -> bool {
            // terminal prefix matches, minimal yield fits, and the remaining
            // terminals occur in order in the rest of the word
            let k = form.iter().position(|s| s.is_nonterminal()).unwrap_or(form.len());
            if k > w.len() || form[..k].iter().zip(w).any(|(s, &c)| *s != GSym::T(c)) {
                return false;
            }
            let mut need = 0usize;
            for s in form {
                need = need.saturating_add(match *s {
                    GSym::T(_) => 1,
                    GSym::N(n) => min[n],
                });
            }
            if need > w.len() {
                return false;
            }
            let mut at = k;
            for s in &form[k..] {
                if let GSym::T(c) = *s {
                    match w[at..].iter().position(|&x| x == c) {
                        Some(p) => at += p + 1,
                        None => return false,
                    }
                }
            }
            true
        };

        let start = vec![GSym::N(self.axiom)];
        if !fits(&start) {
            return false;
        }
        let mut seen: HashSet<Vec<GSym>> = HashSet::from([start.clone()]);
        let mut queue = VecDeque::from([start]);
        while let Some(form) = queue.pop_front() {
            let Some(k) = form.iter().position(|s| s.is_nonterminal()) else {
                if form.len() == w.len() {
                    return true;
                }
                continue;
            };
            let GSym::N(a) = form[k] else { unreachable!() };
            for (_, r) in self.rules_of(a) {
                let mut next = Vec::with_capacity(form.len() + r.rhs.len());
                next.extend_from_slice(&form[..k]);
                next.extend_from_slice(&r.rhs);
                next.extend_from_slice(&form[k + 1..]);
                if fits(&next) && seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
        false
    }
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn rule_usable(r: &Rule, productive: &[bool]) -> bool {
    r.rhs.iter().all(|s| match *s {
        GSym::N(n) => productive[n],
        GSym::T(_) => true,
    })
}

fn nullable_set(n: usize, rules: &[Rule]) -> Vec<bool> {
    let mut nullable = vec![false; n];
    loop {
        let mut changed = false;
        for r in rules {
            if !nullable[r.lhs] && r.rhs.iter().all(|s| matches!(*s, GSym::N(b) if nullable[b])) {
                nullable[r.lhs] = true;
                changed = true;
            }
        }
        if !changed {
            return nullable;
        }
    }
}

fn check_token(t: &str) -> Result<(), String> {
    if !valid_token(t) || RESERVED.contains(&t) {
        Err(format!("reserved or invalid token `{t}`"))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::oracle::{language_agree, random_grammar};

    const EXPR: &str = "// arithmetic without parentheses
start: S
S -> E
E -> E + T | T * n | n
T -> T * n | n
";

    fn g(text: &str) -> Grammar {
        Grammar::parse(text).unwrap()
    }

    fn names(g: &Grammar, set: &BTreeSet<usize>) -> BTreeSet<String> {
        set.iter().map(|&i| g.terminals()[i].clone()).collect()
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_expr() {
        let g = g(EXPR);
        assert_eq!(g.rules().len(), 6);
        assert_eq!(g.nonterminals(), ["S", "E", "T"]);
        assert_eq!(g.terminals(), ["+", "*", "n"]);
    }

    #[test]
    fn rejects_adjacent_nonterminals() {
        let err = Grammar::parse("start: S\nS -> A B\nA -> a\nB -> b").unwrap_err();
        assert_eq!(err, GrammarError::OperatorForm("S -> A B".into()));
    }

    #[test]
    fn single_empty_rule() {
        let g = g("start: S\nS -> _");
        assert_eq!(g.rules().len(), 1);
        assert!(g.rules()[0].is_empty());
    }

    #[test]
    fn parse_errors_carry_lines() {
        assert_eq!(Grammar::parse("S -> a"), Err(GrammarError::MissingStart));
        assert!(matches!(
            Grammar::parse("start: S\nS => a"),
            Err(GrammarError::Syntax { line: 2, .. })
        ));
        assert_eq!(
            Grammar::parse("start: S\nA -> a"),
            Err(GrammarError::UndeclaredAxiom("S".into()))
        );
        assert!(matches!(
            Grammar::parse("start: S\nS -> a | "),
            Err(GrammarError::Syntax { line: 2, .. })
        ));
    }

    #[test]
    fn expr_terminal_sets() {
        let g = g(EXPR);
        let sets = g.terminal_sets();
        assert_eq!(names(&g, &sets.left[2]), set(&["n", "*"]));
        assert_eq!(names(&g, &sets.right[2]), set(&["n"]));
        assert_eq!(names(&g, &sets.left[1]), set(&["n", "*", "+"]));
        assert_eq!(names(&g, &sets.right[1]), set(&["n", "+"]));
        let single = Grammar::parse("start: S\nS -> a").unwrap();
        let s = single.terminal_sets();
        assert_eq!(names(&single, &s.left[0]), set(&["a"]));
        assert_eq!(names(&single, &s.right[0]), set(&["a"]));
    }

    #[test]
    fn expr_matrix() {
        let m = g(EXPR).compute_opm().unwrap();
        let rel = |a, b| m.relation(a, b).unwrap();
        use PrecRel::*;
        let expected = [
            ("n", "+", Takes),
            ("n", "*", Takes),
            ("+", "n", Yields),
            ("+", "+", Takes),
            ("+", "*", Yields),
            ("*", "n", Equal),
        ];
        for (a, b, r) in expected {
            assert_eq!(rel(a, b), Some(r), "{a} {b}");
        }
        let inner = m
            .entries()
            .into_iter()
            .filter(|(a, b, _)| !a.is_end() && !b.is_end())
            .count();
        assert_eq!(inner, 6);
        for b in ["n", "+", "*"] {
            assert_eq!(rel("#", b), Some(Yields));
        }
        assert_eq!(rel("n", "#"), Some(Takes));
        assert_eq!(rel("+", "#"), Some(Takes));
        assert_eq!(rel("*", "#"), None);
        assert_eq!(rel("#", "#"), Some(Equal));
        assert_eq!(m.filled_cells(), 12);
    }

    #[test]
    fn conflicts_name_their_rules() {
        let err = Grammar::parse("start: S\nS -> a S a | a")
            .unwrap()
            .compute_opm()
            .unwrap_err();
        let GrammarError::Conflict(c) = err else { panic!() };
        let aa = c.iter().find(|c| c.left == "a" && c.right == "a").unwrap();
        let rels: BTreeSet<PrecRel> = aa.witnesses.iter().map(|w| w.0).collect();
        assert!(rels.contains(&PrecRel::Equal) && rels.contains(&PrecRel::Yields));
        assert!(aa.witnesses.iter().all(|w| w.1 == Witness::Rule(0)));
    }

    #[test]
    fn fischer_shape_checks() {
        assert!(g(EXPR).validate_fischer_shape().is_empty());
        assert_eq!(
            g("start: S\nS -> a S").validate_fischer_shape(),
            vec![
                ShapeIssue::AxiomInRhs { rule: 0 },
                ShapeIssue::AxiomRuleNotRenaming { rule: 0 }
            ]
        );
        let issues = g("start: S\nS -> A\nA -> B\nB -> b").validate_fischer_shape();
        assert_eq!(issues, vec![ShapeIssue::NonAxiomRenaming { rule: 1 }]);
        assert_eq!(
            g("start: S\nS -> A\nA -> a A | _").validate_fischer_shape(),
            vec![ShapeIssue::EmptyRule { rule: 2 }]
        );
    }

    #[test]
    fn normalize_keeps_expr() {
        let expr = g(EXPR);
        assert_eq!(expr.normalize().unwrap(), expr);
    }

    #[test]
    fn normalize_keeps_shaped_input() {
        let shaped = g("start: S\nS -> A\nA -> a");
        assert_eq!(shaped.normalize().unwrap(), shaped);
    }

    #[test]
    fn normalize_epsilon() {
        let n = g("start: S\nS -> a S b | _").normalize().unwrap();
        assert_eq!(
            n.to_text(),
            "start: S'\nterminals: a b\nS' -> S | _\nS -> a S b | a b\n"
        );
        assert!(n.validate_fischer_shape().is_empty());
    }

    #[test]
    fn normalize_inlines_non_axiom_renamings() {
        let n = g("start: S\nS -> A\nA -> B | a\nB -> b").normalize().unwrap();
        assert!(n.validate_fischer_shape().is_empty());
        assert_eq!(n.to_text(), "start: S\nterminals: a b\nS -> A\nA -> a | b\n");
    }

    #[test]
    fn normalize_requires_reduced_input() {
        let err = g("start: S\nS -> a | A\nA -> A b").normalize().unwrap_err();
        assert_eq!(err, GrammarError::NotReduced(vec!["A".into()]));
    }

    #[test]
    fn trim_examples() {
        assert_eq!(
            g("start: S\nS -> a | A\nA -> A b").trim().to_text(),
            "start: S\nterminals: a b\nS -> a\n"
        );
        assert_eq!(
            g("start: S\nS -> a\nB -> b").trim().to_text(),
            "start: S\nterminals: a b\nS -> a\n"
        );
    }

    #[test]
    fn membership() {
        let g = g(EXPR);
        assert!(g.cf_membership(&["n", "+", "n", "*", "n"]));
        assert!(!g.cf_membership(&["n", "n"]));
        assert!(!g.cf_membership::<&str>(&[]));
        assert!(!g.cf_membership(&["x"]));
        let eps = Grammar::parse("start: S\nS -> a S b | _").unwrap();
        assert!(eps.cf_membership::<&str>(&[]));
        assert!(eps.cf_membership(&["a", "a", "b", "b"]));
        assert!(!eps.cf_membership(&["a", "b", "b"]));
    }

    #[test]
    fn text_round_trip() {
        let expr = g(EXPR);
        assert_eq!(Grammar::parse(&expr.to_text()).unwrap(), expr);
        let empty = Grammar::new(vec!["S!".into()], vec!["a".into()], 0, vec![]).unwrap();
        assert_eq!(Grammar::parse(&empty.to_text()).unwrap(), empty);
    }

    proptest! {
        #[test]
        fn opm_ignores_rule_order(seed in 0u64..5000, shuffle in any::<u64>()) {
            let g = random_grammar(seed, 3, &["a", "b", "c"]);
            let mut rules = g.rules().to_vec();
            rules.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
            let h = Grammar::new(g.nonterminals().to_vec(), g.terminals().to_vec(), g.axiom(), rules).unwrap();
            prop_assert_eq!(g.terminal_sets(), h.terminal_sets());
            match (g.compute_opm(), h.compute_opm()) {
                (Ok(x), Ok(y)) => prop_assert_eq!(x.entries(), y.entries()),
                (Err(GrammarError::Conflict(x)), Err(GrammarError::Conflict(y))) => {
                    let cells = |cs: &[OpmConflict]| -> BTreeSet<(String, String, BTreeSet<PrecRel>)> {
                        cs.iter()
                            .map(|c| (c.left.clone(), c.right.clone(), c.witnesses.iter().map(|w| w.0).collect()))
                            .collect()
                    };
                    prop_assert_eq!(cells(&x), cells(&y));
                }
                (x, y) => prop_assert!(false, "{:?} vs {:?}", x.is_ok(), y.is_ok()),
            }
        }

        #[test]
        fn terminal_sets_grow_with_rules(seed in 0u64..5000, drop in any::<prop::sample::Index>()) {
            let g = random_grammar(seed, 3, &["a", "b", "c"]);
            let mut rules = g.rules().to_vec();
            let removed: Rule = rules.remove(drop.index(rules.len()));
            // fails when the dropped rule was the only one of its nonterminal
            let smaller = Grammar::new(g.nonterminals().to_vec(), g.terminals().to_vec(), g.axiom(), rules);
            prop_assume!(smaller.is_ok());
            let (big, small) = (g.terminal_sets(), smaller.unwrap().terminal_sets());
            for nt in 0..g.nonterminals().len() {
                prop_assert!(small.left[nt].is_subset(&big.left[nt]), "{}", g.rule_text(&removed));
                prop_assert!(small.right[nt].is_subset(&big.right[nt]));
            }
        }

        #[test]
        fn text_format_round_trips(seed in any::<u64>()) {
            let g = random_grammar(seed, 3, &["a", "b", "c"]);
            prop_assert_eq!(Grammar::parse(&g.to_text()).unwrap(), g);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn normalize_preserves_language(seed in any::<u64>()) {
            let g = random_grammar(seed, 3, &["a", "b"]);
            let n = g.normalize().unwrap();
            prop_assert!(n.validate_fischer_shape().is_empty());
            prop_assert!(n.is_reduced() || n.rules().is_empty());
            let r = language_agree(|w| g.cf_membership(w), |w| n.cf_membership(w), &["a", "b"], 7, true);
            prop_assert!(r.agrees(), "{}\n{}\n{}", g, n, r);
        }
    }
}
