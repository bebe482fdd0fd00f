//! Floyd automaton from a grammar in Fischer shape.
//!
//! States are pairs `(Y, Ẑ)` of extended nonterminals, an extended
//! nonterminal being a nonterminal together with the 1-based index of one of
//! its rules. A push guesses the parent of the input symbol; a flush confirms
//! a completed right-hand side.
//!
//! The second component is empty (`_`), the last completed child, or `Y`
//! itself once the rule of `Y` has been read through its final terminal.
//! Each state also tracks the position reached in the rule of `Y`, so a
//! push or flush only fires where the rule allows it. The position is
//! printed as `@k` only when two states would otherwise share a name.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::automaton::FloydAutomaton;
use crate::grammar::{GSym, Grammar};

use super::ConvertError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExtNt {
    pub base: usize,
    /// 1-based, in textual rule order of `base`.
    pub rule: usize,
}

/// Progress through the right-hand side of a state's context.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    /// Nothing read yet; only for axiom rules.
    Start,
    /// The terminal at this position was read last.
    Term(usize),
    /// The subtree at this position is under way and its leftmost completed
    /// part is the given rule.
    Child(ExtNt, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GState {
    pub context: ExtNt,
    pub slot: Slot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PushCase {
    /// No terminal to the left: `Y` is a top-level axiom rule.
    Topmost,
    /// A terminal of the same right-hand side precedes `a`.
    Sibling,
    /// `Y` holds the terminal directly before the subtree containing `a`.
    Ancestor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PushTriple {
    pub terminal: usize,
    pub x: ExtNt,
    pub y: ExtNt,
    pub rightmost: bool,
    /// Nonterminal directly left of `a` in the rule of `x`, if any.
    pub z: Option<usize>,
    pub case: PushCase,
}

struct Numbering<'g> {
    g: &'g Grammar,
    ext_of_rule: Vec<ExtNt>,
    rule_of_ext: BTreeMap<ExtNt, usize>,
    counts: Vec<usize>,
    dotted: bool,
}

impl<'g> Numbering<'g> {
    fn new(g: &'g Grammar) -> Self {
        let mut counts = vec![0; g.nonterminals().len()];
        let mut ext_of_rule = Vec::new();
        let mut rule_of_ext = BTreeMap::new();
        for (i, r) in g.rules().iter().enumerate() {
            counts[r.lhs] += 1;
            let e = ExtNt {
                base: r.lhs,
                rule: counts[r.lhs],
            };
            ext_of_rule.push(e);
            rule_of_ext.insert(e, i);
        }
        let plain: Vec<String> = rule_of_ext
            .keys()
            .map(|e| format!("{}{}", g.nonterminals()[e.base], e.rule))
            .collect();
        let unique: HashSet<&String> = plain.iter().collect();
        Numbering {
            g,
            ext_of_rule,
            rule_of_ext,
            counts,
            dotted: unique.len() != plain.len(),
        }
    }

    fn all_of(&self, base: usize) -> impl Iterator<Item = ExtNt> {
        (1..=self.counts[base]).map(move |rule| ExtNt { base, rule })
    }

    fn name(&self, e: ExtNt) -> String {
        let base = &self.g.nonterminals()[e.base];
        if self.dotted {
            format!("{base}.{}", e.rule)
        } else {
            format!("{base}{}", e.rule)
        }
    }

    /// Sorted state names. Positions are printed only where two states would
    /// otherwise share a name.
    fn state_names(&self, states: &BTreeSet<GState>, len: impl Fn(ExtNt) -> usize) -> Vec<(String, GState)> {
        let ctx = |s: &GState| self.name(s.context);
        let plain = |s: &GState| match s.slot {
            Slot::Start => "_".to_string(),
            Slot::Term(p) if p + 1 == len(s.context) => ctx(s),
            Slot::Term(_) => "_".to_string(),
            Slot::Child(e, _) => self.name(e),
        };
        let mut groups: BTreeMap<(String, String), Vec<GState>> = BTreeMap::new();
        for s in states {
            groups.entry((ctx(s), plain(s))).or_default().push(*s);
        }
        let mut named = Vec::new();
        for ((c, p), members) in groups {
            for s in &members {
                let suffix = match s.slot {
                    _ if members.len() == 1 => String::new(),
                    Slot::Term(q) if q + 1 == len(s.context) => String::new(),
                    Slot::Start => "@0".to_string(),
                    Slot::Term(q) | Slot::Child(_, q) => format!("@{}", q + 1),
                };
                named.push((format!("({c},{p}{suffix})"), *s));
            }
        }
        named.sort();
        named
    }

    /// Rules reachable from each nonterminal by repeatedly expanding the
    /// leftmost symbol while it is a nonterminal.
    fn leftmost_descendants(&self) -> Vec<BTreeSet<ExtNt>> {
        let g = self.g;
        let mut out: Vec<BTreeSet<ExtNt>> = (0..g.nonterminals().len()).map(|n| self.all_of(n).collect()).collect();
        loop {
            let mut changed = false;
            for r in g.rules() {
                let Some(&GSym::N(c)) = r.rhs.first() else { continue };
                let inner: Vec<ExtNt> = out[c].iter().copied().collect();
                let lhs = &mut out[r.lhs];
                for e in inner {
                    changed |= lhs.insert(e);
                }
            }
            if !changed {
                return out;
            }
        }
    }

    /// Rules that can be the nearest node holding a leaf to the left of a
    /// subtree rooted at `base`: through leftmost descent, either the axiom
    /// rule on top or a rule with a terminal right before the subtree.
    fn ancestors(&self) -> Vec<BTreeSet<ExtNt>> {
        let g = self.g;
        let n = g.nonterminals().len();
        let mut anc: Vec<BTreeSet<ExtNt>> = vec![BTreeSet::new(); n];
        loop {
            let mut changed = false;
            for (i, r) in g.rules().iter().enumerate() {
                let holder = self.ext_of_rule[i];
                for (pos, s) in r.rhs.iter().enumerate() {
                    let GSym::N(a) = *s else { continue };
                    let add: Vec<ExtNt> = if pos == 0 {
                        if r.lhs == g.axiom() {
                            vec![holder]
                        } else {
                            anc[r.lhs].iter().copied().collect()
                        }
                    } else if matches!(r.rhs[pos - 1], GSym::T(_)) {
                        vec![holder]
                    } else {
                        Vec::new()
                    };
                    for e in add {
                        changed |= anc[a].insert(e);
                    }
                }
            }
            if !changed {
                return anc;
            }
        }
    }
}

fn check_input(g: &Grammar) -> Result<crate::opm::PrecedenceAlphabet, ConvertError> {
    let issues = g.validate_fischer_shape();
    if !issues.is_empty() {
        return Err(ConvertError::Shape(issues));
    }
    let m = g.compute_opm()?;
    if let crate::opm::EqCheck::Cycle(c) = m.eq_cycle_check() {
        return Err(ConvertError::EqCycle(c));
    }
    Ok(m)
}

pub fn enumerate_push_triples(g: &Grammar) -> Result<BTreeSet<PushTriple>, ConvertError> {
    check_input(g)?;
    Ok(push_triples(&Numbering::new(g)))
}

fn push_triples(num: &Numbering) -> BTreeSet<PushTriple> {
    let g = num.g;
    let anc = num.ancestors();
    let mut out = BTreeSet::new();
    for (i, r) in g.rules().iter().enumerate() {
        let x = num.ext_of_rule[i];
        for (pos, s) in r.rhs.iter().enumerate() {
            let GSym::T(a) = *s else { continue };
            let z = match pos.checked_sub(1).map(|p| r.rhs[p]) {
                Some(GSym::N(c)) => Some(c),
                _ => None,
            };
            let rightmost = pos + 1 == r.rhs.len();
            let has_left_terminal = r.rhs[..pos].iter().any(|s| !s.is_nonterminal());
            if has_left_terminal {
                out.insert(PushTriple {
                    terminal: a,
                    x,
                    y: x,
                    rightmost,
                    z,
                    case: PushCase::Sibling,
                });
                continue;
            }
            for &y in &anc[x.base] {
                let case = if y.base == g.axiom() {
                    PushCase::Topmost
                } else {
                    PushCase::Ancestor
                };
                out.insert(PushTriple {
                    terminal: a,
                    x,
                    y,
                    rightmost,
                    z,
                    case,
                });
            }
        }
    }
    out
}

pub fn grammar_to_automaton(g: &Grammar) -> Result<FloydAutomaton, ConvertError> {
    let alphabet = check_input(g)?;
    let num = Numbering::new(g);
    let axiom = g.axiom();
    let rhs = |e: ExtNt| &g.rules()[num.rule_of_ext[&e]].rhs;
    let state = |context: ExtNt, slot: Slot| GState { context, slot };

    let mut push: BTreeSet<(GState, usize, GState)> = BTreeSet::new();
    let mut flush: BTreeSet<(GState, GState, GState)> = BTreeSet::new();
    let leftmost = num.leftmost_descendants();
    for (i, r) in g.rules().iter().enumerate() {
        let y = num.ext_of_rule[i];
        for (k, s) in r.rhs.iter().enumerate() {
            let GSym::N(w) = *s else { continue };
            let before = match k.checked_sub(1) {
                None if r.lhs == axiom => Slot::Start,
                Some(b) if !r.rhs[b].is_nonterminal() => Slot::Term(b),
                _ => continue,
            };
            for &x in &leftmost[w] {
                let xr = rhs(x);
                let lowers: Vec<Slot> = match xr[0] {
                    GSym::N(z) => num.all_of(z).map(|c| Slot::Child(c, k)).collect(),
                    GSym::T(_) => vec![before],
                };
                let first = usize::from(xr[0].is_nonterminal());
                if let GSym::T(a) = xr[first] {
                    for &l in &lowers {
                        push.insert((state(y, l), a, state(x, Slot::Term(first))));
                    }
                }
                let last = xr.len() - 1;
                let tops: Vec<Slot> = match xr[last] {
                    GSym::N(c) => num.all_of(c).map(|e| Slot::Child(e, last)).collect(),
                    GSym::T(_) => vec![Slot::Term(last)],
                };
                for &t in &tops {
                    for &l in &lowers {
                        flush.insert((state(x, t), state(y, l), state(y, Slot::Child(x, k))));
                    }
                }
            }
        }
        for (q, s) in r.rhs.iter().enumerate().skip(1) {
            let GSym::T(a) = *s else { continue };
            let from: Vec<Slot> = match r.rhs[q - 1] {
                GSym::T(_) => vec![Slot::Term(q - 1)],
                GSym::N(_) if q == 1 => continue,
                GSym::N(z) => num.all_of(z).map(|c| Slot::Child(c, q - 1)).collect(),
            };
            for f in from {
                push.insert((state(y, f), a, state(y, Slot::Term(q))));
            }
        }
    }

    let initial: Vec<GState> = num.all_of(axiom).map(|e| state(e, Slot::Start)).collect();
    let mut finals: BTreeSet<GState> = BTreeSet::new();
    for s in num.all_of(axiom) {
        match rhs(s)[..] {
            [GSym::N(a)] => finals.extend(num.all_of(a).map(|c| state(s, Slot::Child(c, 0)))),
            [] => {
                finals.insert(state(s, Slot::Start));
            }
            _ => {}
        }
    }

    let mut states: BTreeSet<GState> = initial.iter().copied().collect();
    states.extend(finals.iter().copied());
    for (q, _, p) in &push {
        states.extend([*q, *p]);
    }
    for (q, r, p) in &flush {
        states.extend([*q, *r, *p]);
    }
    let named = num.state_names(&states, |e| rhs(e).len());
    let index: BTreeMap<GState, usize> = named.iter().enumerate().map(|(i, (_, s))| (*s, i)).collect();

    let automaton = FloydAutomaton::from_indices(
        alphabet,
        named.into_iter().map(|(n, _)| n).collect(),
        initial.iter().map(|s| index[s]),
        finals.iter().map(|s| index[s]),
        push.iter().map(|(q, a, p)| (index[q], *a, index[p])),
        flush.iter().map(|(q, r, p)| (index[q], index[r], index[p])),
    )
    .expect("generated states are consistent");
    Ok(automaton)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::opm::MoveKind;
    use crate::oracle::{language_agree, random_grammar};

    const EXPR_A: &str = "start: S\nS -> E\nE -> E + T | T * a | a\nT -> T * a | a\n";

    fn has_push(a: &FloydAutomaton, q: &str, t: &str, p: &str) -> bool {
        let (Some(q), Some(p)) = (a.state(q), a.state(p)) else {
            return false;
        };
        let t = a.alphabet().terminals().iter().position(|x| x == t).unwrap();
        a.push_targets(q, t).any(|x| x == p)
    }

    fn has_flush(a: &FloydAutomaton, q: &str, r: &str, p: &str) -> bool {
        let (Some(q), Some(r), Some(p)) = (a.state(q), a.state(r), a.state(p)) else {
            return false;
        };
        a.flush_targets(q, r).any(|x| x == p)
    }

    #[test]
    fn listed_transitions() {
        let g = Grammar::parse(EXPR_A).unwrap();
        let a = grammar_to_automaton(&g).unwrap();
        assert!(has_push(&a, "(S1,_)", "a", "(T2,T2)"));
        assert!(has_push(&a, "(S1,T2)", "*", "(E2,_)"));
        assert!(has_push(&a, "(S1,E2)", "+", "(E1,_)"));
        assert!(has_push(&a, "(E2,_)", "a", "(E2,E2)"));
        assert!(has_push(&a, "(E1,_)", "a", "(T2,T2)"));
        assert!(has_flush(&a, "(T2,T2)", "(E1,_)", "(E1,T2)"));
        assert!(has_flush(&a, "(T2,T2)", "(S1,_)", "(S1,T2)"));
        assert!(has_flush(&a, "(E2,E2)", "(S1,T2)", "(S1,E2)"));
        assert!(has_flush(&a, "(E1,T2)", "(S1,E2)", "(S1,E1)"));
    }

    #[test]
    fn expression_run_moves() {
        use MoveKind::*;
        let g = Grammar::parse(EXPR_A).unwrap();
        let a = grammar_to_automaton(&g).unwrap();
        let t = a.trace(&["a", "*", "a", "+", "a"]).unwrap().unwrap();
        assert_eq!(
            t.move_kinds(),
            [Mark, Flush, Mark, Push, Flush, Mark, Mark, Flush, Flush]
        );
    }

    #[test]
    fn single_rule_triples() {
        let g = Grammar::parse("start: S\nS -> A\nA -> a b").unwrap();
        let triples = enumerate_push_triples(&g).unwrap();
        let cases: Vec<(usize, PushCase, bool)> = triples.iter().map(|t| (t.terminal, t.case, t.rightmost)).collect();
        assert_eq!(cases, [(0, PushCase::Topmost, false), (1, PushCase::Sibling, true)]);
    }

    #[test]
    fn shape_is_required() {
        let g = Grammar::parse("start: S\nS -> a").unwrap();
        assert!(matches!(grammar_to_automaton(&g), Err(ConvertError::Shape(_))));
        let n = g.normalize().unwrap();
        let a = grammar_to_automaton(&n).unwrap();
        assert!(a.accepts(&["a"]).unwrap());
        assert!(!a.accepts::<&str>(&[]).unwrap());
        assert!(!a.accepts(&["a", "a"]).unwrap());
    }

    #[test]
    fn empty_word_through_axiom_rule() {
        let g = Grammar::parse("start: S\nS -> a S b | _").unwrap().normalize().unwrap();
        let a = grammar_to_automaton(&g).unwrap();
        assert!(a.accepts::<&str>(&[]).unwrap());
        assert!(a.accepts(&["a", "a", "b", "b"]).unwrap());
        assert!(!a.accepts(&["a", "b", "b"]).unwrap());
    }

    #[test]
    fn colliding_names_use_dots() {
        // `A` rule 11 and `A1` rule 1 would both print as `A11`
        let alts: Vec<String> = (1..=11).map(|i| format!("t{i}")).collect();
        let text = format!("start: S\nS -> A | A1\nA -> {}\nA1 -> b\n", alts.join(" | "));
        let a = grammar_to_automaton(&Grammar::parse(&text).unwrap()).unwrap();
        assert!(a.state("(A.11,A.11)").is_some());
        assert!(a.state("(A1.1,A1.1)").is_some());
    }

    #[test]
    fn self_nesting_rule_is_not_completed_early() {
        // `N -> a N b` nested in itself must not flush before its `b`
        let g =
            Grammar::parse("start: S'\nS' -> S\nS -> N a N | a N | N a | a | b\nN -> N a N b | a N b | N a b | a b\n")
                .unwrap();
        let a = grammar_to_automaton(&g).unwrap();
        assert!(!g.cf_membership(&["a", "a", "a", "a", "b", "b"]));
        assert!(!a.accepts(&["a", "a", "a", "a", "b", "b"]).unwrap());
        assert!(a.accepts(&["a", "a", "a", "b", "b"]).unwrap());
        assert!(a.state("(N2,N2@2)").is_some());
        assert!(a.state("(N2,N2)").is_some());
    }

    #[test]
    fn terminal_positions_are_kept_apart() {
        let g = Grammar::parse("start: S'\nS' -> S\nS -> a | b a S\n").unwrap();
        let a = grammar_to_automaton(&g).unwrap();
        for w in [&["b", "a"][..], &["b", "a", "a"], &["a"], &["b", "a", "b"]] {
            assert_eq!(a.accepts(w).unwrap(), g.cf_membership(w), "{w:?}");
        }
        assert!(a.state("(S2,_@1)").is_some());
        assert!(a.state("(S2,_@2)").is_some());
    }

    #[test]
    fn cyclic_equal_precedence_is_rejected() {
        let g = Grammar::parse("start: S\nS -> A\nA -> a a").unwrap();
        assert_eq!(grammar_to_automaton(&g), Err(ConvertError::EqCycle(vec!["a".into()])));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn recognizes_grammar_language(seed in any::<u64>()) {
            // the first convertible grammar at or after `seed`
            let found = (seed..seed.saturating_add(200))
                .map(|s| random_grammar(s, 3, &["a", "b"]).normalize().unwrap())
                .find_map(|g| grammar_to_automaton(&g).ok().map(|a| (g, a)));
            prop_assume!(found.is_some());
            let (g, a) = found.unwrap();
            let r = language_agree(|w| g.cf_membership(w), |w| a.accepts(w).unwrap(), &["a", "b"], 6, true);
            prop_assert!(r.agrees(), "{}\n{}", g, r);
        }
    }
}
