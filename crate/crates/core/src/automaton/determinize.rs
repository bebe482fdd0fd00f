//! Subset construction for Floyd automata.
//!
//! A state `⟨b, K⟩` records the symbol `b` of the stack entry it decorates
//! and pairs `(q, p)`: `q` is a state the original automaton may be in, `p`
//! the state it had at the entry below the current marked group (`None` at
//! the stack bottom).

use std::collections::hash_map::Entry;
use std::collections::{BTreeSet, HashMap, HashSet};

use crate::opm::{PrecRel, Symbol};

use super::{FloydAutomaton, RunError};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubsetState {
    pub symbol: Symbol,
    pub pairs: BTreeSet<(usize, Option<usize>)>,
}

impl SubsetState {
    /// `<b|q.p,...>` with `_` for the missing baseline.
    pub fn name(&self, a: &FloydAutomaton) -> String {
        let pairs: Vec<String> = self
            .pairs
            .iter()
            .map(|&(q, p)| {
                let p = p.map_or("_", |p| a.states()[p].as_str());
                format!("{}.{}", a.states()[q], p)
            })
            .collect();
        format!("<{}|{}>", a.alphabet().name(self.symbol), pairs.join(","))
    }
}

/// Deterministic automaton plus the subset behind each of its states.
#[derive(Clone, Debug)]
pub struct Determinized {
    pub automaton: FloydAutomaton,
    pub subsets: Vec<SubsetState>,
}

pub fn determinize(a: &FloydAutomaton) -> FloydAutomaton {
    determinize_detailed(a).automaton
}

fn push_successor(a: &FloydAutomaton, from: &SubsetState, t: usize) -> Option<SubsetState> {
    let rel = a.alphabet().rel(from.symbol, Symbol::Term(t))?;
    if rel == PrecRel::Takes {
        return None;
    }
    let mut pairs = BTreeSet::new();
    for &(q, p) in &from.pairs {
        let base = if rel == PrecRel::Yields { Some(q) } else { p };
        for h in a.push_targets(q, t) {
            pairs.insert((h, base));
        }
    }
    (!pairs.is_empty()).then_some(SubsetState {
        symbol: Symbol::Term(t),
        pairs,
    })
}

fn flush_successor(a: &FloydAutomaton, top: &SubsetState, lower: &SubsetState) -> Option<SubsetState> {
    if !a.alphabet().row_has(top.symbol, PrecRel::Takes) {
        return None;
    }
    let mut pairs = BTreeSet::new();
    for &(r, q) in &top.pairs {
        let Some(q) = q else { continue };
        for &(_, p) in lower.pairs.range((q, None)..=(q, Some(usize::MAX))) {
            for h in a.flush_targets(r, q) {
                pairs.insert((h, p));
            }
        }
    }
    (!pairs.is_empty()).then_some(SubsetState {
        symbol: lower.symbol,
        pairs,
    })
}

pub fn determinize_detailed(a: &FloydAutomaton) -> Determinized {
    let initial = SubsetState {
        symbol: Symbol::End,
        pairs: a.initial().iter().map(|&q| (q, None)).collect(),
    };
    let mut found: Vec<SubsetState> = vec![initial.clone()];
    let mut index: HashMap<SubsetState, usize> = HashMap::from([(initial, 0)]);
    let mut push: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    let mut flush: BTreeSet<(usize, usize, usize)> = BTreeSet::new();

    let intern = |s: SubsetState, found: &mut Vec<SubsetState>, index: &mut HashMap<SubsetState, usize>| -> usize {
        if let Some(&i) = index.get(&s) {
            return i;
        }
        index.insert(s.clone(), found.len());
        found.push(s);
        found.len() - 1
    };

    // A context pairs the top state with the state of the entry below its
    // marked group (`None` while no group is open). Only pairs that occur in
    // some context get a flush transition.
    let mut contexts: HashSet<(Option<usize>, usize)> = HashSet::new();
    let mut work = vec![(None, 0)];
    // lower state -> entries below it that opened a group on it
    let mut callers: HashMap<usize, BTreeSet<Option<usize>>> = HashMap::new();
    // lower state -> states it may hold once its group is flushed
    let mut results: HashMap<usize, BTreeSet<usize>> = HashMap::new();
    let mut pushes: HashMap<usize, Vec<(usize, bool)>> = HashMap::new();

    while let Some((lower, top)) = work.pop() {
        if !contexts.insert((lower, top)) {
            continue;
        }
        if let Entry::Vacant(slot) = pushes.entry(top) {
            let mut out = Vec::new();
            for t in 0..a.alphabet().len() {
                let Some(s) = push_successor(a, &found[top], t) else {
                    continue;
                };
                let marked = a.alphabet().rel(found[top].symbol, Symbol::Term(t)) == Some(PrecRel::Yields);
                let j = intern(s, &mut found, &mut index);
                push.insert((top, t, j));
                out.push((j, marked));
            }
            slot.insert(out);
        }
        for &(j, marked) in &pushes[&top] {
            if marked {
                work.push((Some(top), j));
                if callers.entry(top).or_default().insert(lower) {
                    for &r in results.get(&top).into_iter().flatten() {
                        work.push((lower, r));
                    }
                }
            } else {
                work.push((lower, j));
            }
        }
        let Some(lo) = lower else { continue };
        if let Some(s) = flush_successor(a, &found[top], &found[lo]) {
            let k = intern(s, &mut found, &mut index);
            flush.insert((top, lo, k));
            if results.entry(lo).or_default().insert(k) {
                for &l in callers.get(&lo).into_iter().flatten() {
                    work.push((l, k));
                }
            }
        }
    }

    // canonical order: sorted by name, collisions disambiguated
    let mut names: Vec<String> = found.iter().map(|s| s.name(a)).collect();
    let mut taken = HashSet::new();
    for n in names.iter_mut() {
        let base = n.clone();
        let mut k = 1;
        while !taken.insert(n.clone()) {
            k += 1;
            *n = format!("{base}~{k}");
        }
    }
    let mut order: Vec<usize> = (0..found.len()).collect();
    order.sort_by(|&x, &y| names[x].cmp(&names[y]));
    let mut remap = vec![0; found.len()];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
    }
    let finals: Vec<usize> = (0..found.len())
        .filter(|&i| {
            found[i].symbol == Symbol::End && found[i].pairs.iter().any(|&(q, p)| p.is_none() && a.is_final(q))
        })
        .map(|i| remap[i])
        .collect();
    let automaton = FloydAutomaton::from_indices(
        a.alphabet().clone(),
        order.iter().map(|&i| names[i].clone()).collect(),
        [remap[0]],
        finals,
        push.iter().map(|&(q, t, p)| (remap[q], t, remap[p])),
        flush.iter().map(|&(q, r, p)| (remap[q], remap[r], remap[p])),
    )
    .expect("subset states are well formed");
    let subsets = order.iter().map(|&i| found[i].clone()).collect();
    Determinized { automaton, subsets }
}

impl FloydAutomaton {
    /// Membership by running the subset construction on the fly: one subset
    /// per stack entry, so the cost is polynomial in the word length.
    pub fn accepts_subsets<S: AsRef<str>>(&self, w: &[S]) -> Result<bool, RunError> {
        let input = self.word(w)?;
        self.accepts_subsets_symbols(&input)
    }

    pub fn accepts_subsets_symbols(&self, input: &[Symbol]) -> Result<bool, RunError> {
        if let crate::opm::EqCheck::Cycle(c) = self.eq_check() {
            return Err(RunError::EqCycle(c.clone()));
        }
        let bottom = SubsetState {
            symbol: Symbol::End,
            pairs: self.initial().iter().map(|&q| (q, None)).collect(),
        };
        if bottom.pairs.is_empty() {
            return Ok(false);
        }
        let mut stack: Vec<(SubsetState, bool)> = vec![(bottom, false)];
        let mut pos = 0;
        loop {
            let top = &stack.last().expect("bottom is never popped").0;
            let la = input.get(pos).copied().unwrap_or(Symbol::End);
            if top.symbol.is_end() && la.is_end() {
                return Ok(top.pairs.iter().any(|&(q, p)| p.is_none() && self.is_final(q)));
            }
            match self.alphabet().rel(top.symbol, la) {
                None => return Ok(false),
                Some(PrecRel::Takes) => {
                    let Some(at) = stack.iter().skip(1).rposition(|e| e.1).map(|i| i + 1) else {
                        return Ok(false);
                    };
                    let Some(s) = flush_successor(self, top, &stack[at - 1].0) else {
                        return Ok(false);
                    };
                    stack.truncate(at);
                    stack.last_mut().unwrap().0 = s;
                }
                Some(rel) => {
                    let Symbol::Term(t) = la else { return Ok(false) };
                    let Some(s) = push_successor(self, top, t) else {
                        return Ok(false);
                    };
                    stack.push((s, rel == PrecRel::Yields));
                    pos += 1;
                }
            }
        }
    }
}
