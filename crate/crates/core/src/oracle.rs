//! Brute-force references: exhaustive word enumeration, language agreement
//! and seeded random automata and grammars.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::automaton::FloydAutomaton;
use crate::grammar::{GSym, Grammar, Rule};
use crate::opm::{PrecRel, PrecedenceAlphabet, Symbol};

/// All words of length `0..=max_len` over `n` letters (as indices), shortest
/// first, then lexicographically by letter index.
pub fn enumerate_words(n: usize, max_len: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..=max_len).flat_map(move |len| {
        let total = if n == 0 && len > 0 { 0 } else { n.pow(len as u32) };
        (0..total).map(move |mut k| {
            let mut w = vec![0; len];
            for slot in w.iter_mut().rev() {
                *slot = k % n;
                k /= n;
            }
            w
        })
    })
}

/// [`enumerate_words`] over named terminals.
pub fn enumerate_named<S: AsRef<str>>(terminals: &[S], max_len: usize) -> impl Iterator<Item = Vec<&str>> {
    enumerate_words(terminals.len(), max_len).map(move |w| w.into_iter().map(|i| terminals[i].as_ref()).collect())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Disagreement {
    pub word: Vec<String>,
    pub left: bool,
    pub right: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgreementReport {
    pub max_len: usize,
    pub tested: usize,
    pub disagreements: Vec<Disagreement>,
}

impl AgreementReport {
    pub fn agrees(&self) -> bool {
        self.disagreements.is_empty()
    }
}

impl fmt::Display for AgreementReport {
    /// One line per disagreement: `<word> left=<bool> right=<bool>`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.disagreements {
            let word = if d.word.is_empty() {
                "ε".to_string()
            } else {
                d.word.join(" ")
            };
            writeln!(f, "{word} left={} right={}", d.left, d.right)?;
        }
        Ok(())
    }
}

/// Runs both acceptors on every word up to `max_len`.
pub fn language_agree<S, L, R>(
    left: L,
    right: R,
    terminals: &[S],
    max_len: usize,
    stop_at_first: bool,
) -> AgreementReport
where
    S: AsRef<str>,
    L: Fn(&[&str]) -> bool,
    R: Fn(&[&str]) -> bool,
{
    let mut report = AgreementReport {
        max_len,
        tested: 0,
        disagreements: Vec::new(),
    };
    for w in enumerate_named(terminals, max_len) {
        report.tested += 1;
        let (l, r) = (left(&w), right(&w));
        if l != r {
            report.disagreements.push(Disagreement {
                word: w.iter().map(|s| s.to_string()).collect(),
                left: l,
                right: r,
            });
            if stop_at_first {
                break;
            }
        }
    }
    report
}

/// Matrix over `terminals` filling each cell with probability about
/// one half; `# ≐ #` always, `# ⋖ b` and `a ⋗ #` with probability 0.8.
/// Resamples until the `≐` relation is acyclic.
pub fn random_alphabet<R: Rng, S: AsRef<str>>(rng: &mut R, terminals: &[S]) -> PrecedenceAlphabet {
    const RELS: [PrecRel; 3] = [PrecRel::Yields, PrecRel::Equal, PrecRel::Takes];
    let n = terminals.len();
    loop {
        let mut entries = vec![(Symbol::End, Symbol::End, PrecRel::Equal)];
        for a in 0..n {
            for b in 0..n {
                if rng.random_bool(0.55) {
                    entries.push((Symbol::Term(a), Symbol::Term(b), RELS[rng.random_range(0..3)]));
                }
            }
            if rng.random_bool(0.8) {
                entries.push((Symbol::End, Symbol::Term(a), PrecRel::Yields));
            }
            if rng.random_bool(0.8) {
                entries.push((Symbol::Term(a), Symbol::End, PrecRel::Takes));
            }
        }
        let alphabet = PrecedenceAlphabet::from_symbols(terminals, entries).expect("one relation per cell");
        if alphabet.eq_cycle_check().is_acyclic() {
            return alphabet;
        }
    }
}

/// Reproducible random automaton with `1..=max_states` states.
pub fn random_automaton<S: AsRef<str>>(seed: u64, max_states: usize, terminals: &[S]) -> FloydAutomaton {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alphabet = random_alphabet(&mut rng, terminals);
    let n = rng.random_range(1..=max_states.max(1));
    let states: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
    let mut initial: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.3)).collect();
    if initial.is_empty() {
        initial.push(rng.random_range(0..n));
    }
    let finals: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
    let mut push = Vec::new();
    for q in 0..n {
        for a in 0..terminals.len() {
            for p in 0..n {
                if rng.random_bool(0.4) {
                    push.push((q, a, p));
                }
            }
        }
    }
    let mut flush = Vec::new();
    for q in 0..n {
        for r in 0..n {
            for p in 0..n {
                if rng.random_bool(0.35) {
                    flush.push((q, r, p));
                }
            }
        }
    }
    FloydAutomaton::from_indices(alphabet, states, initial, finals, push, flush).expect("indices in range")
}

/// Reproducible random reduced operator grammar over `terminals`, with up to
/// `max_nonterminals` nonterminals besides the axiom `S`. The result may
/// contain ε-rules, renamings and a recursive axiom; it is not guaranteed to
/// have a conflict-free matrix.
pub fn random_grammar<S: AsRef<str>>(seed: u64, max_nonterminals: usize, terminals: &[S]) -> Grammar {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = terminals.len();
    loop {
        let k = rng.random_range(1..=max_nonterminals.max(1)) + 1;
        let names: Vec<String> = std::iter::once("S".to_string())
            .chain((1..k).map(|i| format!("N{i}")))
            .collect();
        let mut rules = Vec::new();
        for lhs in 0..k {
            let count = rng.random_range(1..=3);
            for _ in 0..count {
                rules.push(Rule {
                    lhs,
                    rhs: random_rhs(&mut rng, t, k),
                });
            }
        }
        rules.shuffle(&mut rng);
        let g = Grammar::new(
            names,
            terminals.iter().map(|s| s.as_ref().to_string()).collect(),
            0,
            rules,
        )
        .expect("generated rules are in operator form")
        .trim();
        if !g.rules().is_empty() {
            return g;
        }
    }
}

fn random_rhs<R: Rng>(rng: &mut R, t: usize, k: usize) -> Vec<GSym> {
    match rng.random_range(0..10) {
        0 => Vec::new(),
        1 => vec![GSym::N(rng.random_range(0..k))],
        _ => {
            let len = rng.random_range(1..=4);
            let mut rhs = Vec::with_capacity(len);
            let mut prev_nt = false;
            for _ in 0..len {
                if !prev_nt && rng.random_bool(0.4) {
                    rhs.push(GSym::N(rng.random_range(0..k)));
                    prev_nt = true;
                } else {
                    rhs.push(GSym::T(rng.random_range(0..t)));
                    prev_nt = false;
                }
            }
            rhs
        }
    }
}
