//! Grammar from a Floyd automaton.
//!
//! Nonterminals are quads `⟨a, q, p, b⟩`: some chain `a[x]b` has a support
//! leading the entry of `a` from state `q` to state `p`. Rules are saturated
//! bottom-up over chain spines `a ⋖ a1 ≐ … ≐ an ⋗ b`, plugging already
//! realized quads into the gaps of composed chains.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::automaton::FloydAutomaton;
use crate::grammar::{GSym, Grammar, Rule};
use crate::opm::{PrecRel, Symbol};

use super::ConvertError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Quad {
    pub left: Symbol,
    pub from: usize,
    pub to: usize,
    pub right: Symbol,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QSym {
    T(usize),
    Q(Quad),
}

struct Spine {
    left: Symbol,
    body: Vec<usize>,
    right: Symbol,
}

fn spines(a: &FloydAutomaton) -> Vec<Spine> {
    let m = a.alphabet();
    let n = m.len();
    let mut out = Vec::new();
    // ≐-paths over terminals; acyclic, so plain DFS terminates
    let mut paths: Vec<Vec<usize>> = (0..n).map(|t| vec![t]).collect();
    let mut all = Vec::new();
    while let Some(p) = paths.pop() {
        let last = *p.last().unwrap();
        for t in 0..n {
            if m.rel(Symbol::Term(last), Symbol::Term(t)) == Some(PrecRel::Equal) {
                let mut q = p.clone();
                q.push(t);
                paths.push(q);
            }
        }
        all.push(p);
    }
    all.sort();
    for body in all {
        let first = Symbol::Term(body[0]);
        let last = Symbol::Term(*body.last().unwrap());
        for left in m.symbols() {
            if m.rel(left, first) != Some(PrecRel::Yields) {
                continue;
            }
            for right in m.symbols() {
                if m.rel(last, right) != Some(PrecRel::Takes) {
                    continue;
                }
                let borders_ok = (left.is_end() && right.is_end()) || m.rel(left, right).is_some();
                if borders_ok {
                    out.push(Spine {
                        left,
                        body: body.clone(),
                        right,
                    });
                }
            }
        }
    }
    out
}

struct Saturation<'a> {
    a: &'a FloydAutomaton,
    // (left, from, right) -> realized targets
    realized: BTreeMap<(Symbol, usize, Symbol), BTreeSet<usize>>,
    rules: BTreeSet<(Quad, Vec<QSym>)>,
}

impl Saturation<'_> {
    /// Gap after position `i` of the spine (0 = before the first terminal):
    /// either empty or any realized quad with the right borders.
    fn gap_options(&self, left: Symbol, state: usize, right: Symbol) -> Vec<(usize, Option<Quad>)> {
        let mut opts = vec![(state, None)];
        if let Some(ts) = self.realized.get(&(left, state, right)) {
            for &to in ts {
                opts.push((
                    to,
                    Some(Quad {
                        left,
                        from: state,
                        to,
                        right,
                    }),
                ));
            }
        }
        opts
    }

    fn round(&self, spine: &Spine, found: &mut Vec<(Quad, Vec<QSym>)>) {
        let syms: Vec<Symbol> = std::iter::once(spine.left)
            .chain(spine.body.iter().map(|&t| Symbol::Term(t)))
            .chain(std::iter::once(spine.right))
            .collect();
        for q0 in 0..self.a.states().len() {
            for (q0p, gap) in self.gap_options(syms[0], q0, syms[1]) {
                let mut rhs = Vec::new();
                rhs.extend(gap.map(QSym::Q));
                self.extend(spine, &syms, 1, q0, q0p, q0p, &mut rhs, found);
            }
        }
    }

    /// `cur` is the state after the gap preceding spine terminal `i`.
    #[allow(clippy::too_many_arguments)]
    fn extend(
        &self,
        spine: &Spine,
        syms: &[Symbol],
        i: usize,
        q0: usize,
        q0p: usize,
        cur: usize,
        rhs: &mut Vec<QSym>,
        found: &mut Vec<(Quad, Vec<QSym>)>,
    ) {
        if i > spine.body.len() {
            for to in self.a.flush_targets(cur, q0p) {
                let quad = Quad {
                    left: spine.left,
                    from: q0,
                    to,
                    right: spine.right,
                };
                found.push((quad, rhs.clone()));
            }
            return;
        }
        let t = spine.body[i - 1];
        for qi in self.a.push_targets(cur, t) {
            for (qip, gap) in self.gap_options(syms[i], qi, syms[i + 1]) {
                let before = rhs.len();
                rhs.push(QSym::T(t));
                rhs.extend(gap.map(QSym::Q));
                self.extend(spine, syms, i + 1, q0, q0p, qip, rhs, found);
                rhs.truncate(before);
            }
        }
    }
}

fn quad_name(a: &FloydAutomaton, q: Quad) -> String {
    let m = a.alphabet();
    format!(
        "<{},{},{},{}>",
        m.name(q.left),
        a.states()[q.from],
        a.states()[q.to],
        m.name(q.right)
    )
}

/// Builds a grammar generating the language of `a`; the axiom is `S!`.
pub fn automaton_to_grammar(a: &FloydAutomaton) -> Result<Grammar, ConvertError> {
    if let crate::opm::EqCheck::Cycle(c) = a.eq_check() {
        return Err(ConvertError::EqCycle(c.clone()));
    }
    let spines = spines(a);
    let mut sat = Saturation {
        a,
        realized: BTreeMap::new(),
        rules: BTreeSet::new(),
    };
    loop {
        let mut found = Vec::new();
        for s in &spines {
            sat.round(s, &mut found);
        }
        let mut changed = false;
        for (quad, rhs) in found {
            if sat.rules.insert((quad, rhs)) {
                changed = true;
                sat.realized
                    .entry((quad.left, quad.from, quad.right))
                    .or_default()
                    .insert(quad.to);
            }
        }
        if !changed {
            break;
        }
    }

    let terminals = a.alphabet().terminals().to_vec();
    let taken: HashSet<&str> = terminals.iter().map(String::as_str).collect();
    let fresh = |base: String| {
        let mut n = base;
        while taken.contains(n.as_str()) {
            n.push('!');
        }
        n
    };
    let quads: BTreeSet<Quad> = sat.rules.iter().map(|(q, _)| *q).collect();
    let mut nonterminals = vec![fresh("S!".to_string())];
    let mut index: BTreeMap<Quad, usize> = BTreeMap::new();
    for &q in &quads {
        index.insert(q, nonterminals.len());
        nonterminals.push(fresh(quad_name(a, q)));
    }
    let mut rules = Vec::new();
    for &q0 in a.initial() {
        for &qf in a.finals() {
            let top = Quad {
                left: Symbol::End,
                from: q0,
                to: qf,
                right: Symbol::End,
            };
            if let Some(&n) = index.get(&top) {
                rules.push(Rule {
                    lhs: 0,
                    rhs: vec![GSym::N(n)],
                });
            }
        }
    }
    if a.initial().iter().any(|q| a.is_final(*q)) {
        rules.push(Rule {
            lhs: 0,
            rhs: Vec::new(),
        });
    }
    for (q, rhs) in &sat.rules {
        rules.push(Rule {
            lhs: index[q],
            rhs: rhs
                .iter()
                .map(|s| match *s {
                    QSym::T(t) => GSym::T(t),
                    QSym::Q(inner) => GSym::N(index[&inner]),
                })
                .collect(),
        });
    }
    let g = Grammar::new(nonterminals, terminals, 0, rules)?;
    Ok(g.trim())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::automaton::FloydAutomaton;
    use crate::oracle::{language_agree, random_automaton};

    fn dyck() -> FloydAutomaton {
        crate::automaton::tests::dyck()
    }

    fn w(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn dyck_grammar_language() {
        let g = automaton_to_grammar(&dyck()).unwrap();
        assert_eq!(g.nonterminals()[g.axiom()], "S!");
        assert!(g.cf_membership(&w("a ra")));
        assert!(g.cf_membership(&w("a b rb ra")));
        assert!(g.cf_membership::<&str>(&[]));
        assert!(!g.cf_membership(&w("a b")));
        assert!(!g.cf_membership(&w("ra a")));
    }

    #[test]
    fn empty_final_set_gives_empty_language() {
        let a = dyck().with_finals([]);
        let g = automaton_to_grammar(&a).unwrap();
        assert!(g.rules().is_empty());
        assert_eq!(g.nonterminals(), ["S!"]);
    }

    #[test]
    fn output_is_reduced_and_in_shape() {
        let g = automaton_to_grammar(&dyck()).unwrap();
        assert!(g.is_reduced());
        assert!(g.validate_fischer_shape().is_empty());
        let c = dyck().eq_check().max_chain().unwrap();
        assert!(g.rules().iter().all(|r| r.rhs.len() <= 2 * c + 1));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn generates_automaton_language(seed in any::<u64>()) {
            let a = random_automaton(seed, 3, &["a", "b"]);
            let g = automaton_to_grammar(&a).unwrap();
            let c = a.eq_check().max_chain().unwrap();
            prop_assert!(g.rules().iter().all(|r| r.rhs.len() <= 2 * c + 1));
            prop_assert!(g.validate_fischer_shape().is_empty());
            let r = language_agree(|w| a.accepts(w).unwrap(), |w| g.cf_membership(w), &["a", "b"], 5, true);
            prop_assert!(r.agrees(), "{}\n{}", a, r);
        }
    }
}
