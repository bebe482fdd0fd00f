//! Automaton file format.
//!
//! ```text
//! terminals: a ra b rb     (optional; fixes terminal order)
//! states: q0 q1
//! initial: q0
//! final: q0
//! matrix:
//! # < a
//! push:
//! q0 a q1
//! flush:
//! q1 q0 q0                 (q0 ∈ δ_flush(q1, q0))
//! ```

use crate::opm::{parse_matrix_line, strip_comment, OpmError, PrecedenceAlphabet, BORDER};

use super::{AutomatonError, FloydAutomaton};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Terminals,
    States,
    Initial,
    Final,
    Matrix,
    Push,
    Flush,
}

impl Section {
    fn from_header(tok: &str) -> Option<Section> {
        Some(match tok {
            "terminals:" => Section::Terminals,
            "states:" => Section::States,
            "initial:" => Section::Initial,
            "final:" => Section::Final,
            "matrix:" => Section::Matrix,
            "push:" => Section::Push,
            "flush:" => Section::Flush,
            _ => return None,
        })
    }
}

impl FloydAutomaton {
    pub fn parse(text: &str) -> Result<Self, AutomatonError> {
        let mut section: Option<Section> = None;
        let mut terminals: Vec<String> = Vec::new();
        let mut states: Vec<String> = Vec::new();
        let mut initial: Vec<String> = Vec::new();
        let mut finals: Vec<String> = Vec::new();
        let mut matrix: Vec<(String, String, crate::PrecRel)> = Vec::new();
        let mut push: Vec<(String, String, String)> = Vec::new();
        let mut flush: Vec<(String, String, String)> = Vec::new();

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let syntax = |message: String| AutomatonError::Syntax { line: line_no, message };
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let mut toks: Vec<&str> = line.split_whitespace().collect();
            if let Some(s) = Section::from_header(toks[0]) {
                section = Some(s);
                toks.remove(0);
                if toks.is_empty() {
                    continue;
                }
                if matches!(s, Section::Matrix | Section::Push | Section::Flush) {
                    return Err(syntax(format!("entries of `{line}` go on the following lines")));
                }
            }
            let Some(s) = section else {
                return Err(syntax("expected a section header such as `states:`".into()));
            };
            let owned = || toks.iter().map(|t| t.to_string());
            match s {
                Section::Terminals => {
                    for t in owned() {
                        if t.contains('!') || t == BORDER {
                            return Err(AutomatonError::InvalidToken(t));
                        }
                        terminals.push(t);
                    }
                }
                Section::States => states.extend(owned()),
                Section::Initial => initial.extend(owned()),
                Section::Final => finals.extend(owned()),
                Section::Matrix => {
                    let (a, rel, b) = parse_matrix_line(line).map_err(syntax)?;
                    for t in [&a, &b] {
                        if t.contains('!') {
                            return Err(AutomatonError::InvalidToken(t.clone()));
                        }
                        if t != BORDER && !terminals.contains(t) {
                            terminals.push(t.clone());
                        }
                    }
                    matrix.push((a, b, rel));
                }
                Section::Push | Section::Flush => {
                    let [q, x, p] = toks[..] else {
                        return Err(syntax("expected `<state> <symbol> <state>`".into()));
                    };
                    let entry = (q.to_string(), x.to_string(), p.to_string());
                    if s == Section::Push {
                        push.push(entry);
                    } else {
                        flush.push(entry);
                    }
                }
            }
        }
        let alphabet = PrecedenceAlphabet::new(&terminals, &matrix).map_err(|e| match e {
            OpmError::Syntax { line, message } => AutomatonError::Syntax { line, message },
            other => other.into(),
        })?;
        FloydAutomaton::new(alphabet, &states, &initial, &finals, &push, &flush)
    }

    /// Serializes in the automaton file format. Parsing the output yields an
    /// identical automaton.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let list = |xs: &mut dyn Iterator<Item = &str>| xs.collect::<Vec<_>>().join(" ");
        let line = |label: &str, body: String| {
            if body.is_empty() {
                format!("{label}\n")
            } else {
                format!("{label} {body}\n")
            }
        };
        out.push_str(&line("terminals:", self.alphabet.terminals().join(" ")));
        out.push_str(&line("states:", self.states.join(" ")));
        out.push_str(&line(
            "initial:",
            list(&mut self.initial.iter().map(|&q| self.states[q].as_str())),
        ));
        out.push_str(&line(
            "final:",
            list(&mut self.finals.iter().map(|&q| self.states[q].as_str())),
        ));
        out.push_str("matrix:\n");
        out.push_str(&self.alphabet.to_text());
        out.push_str("push:\n");
        for (&(q, a), targets) in &self.push {
            for &p in targets {
                out.push_str(&format!(
                    "{} {} {}\n",
                    self.states[q],
                    self.alphabet.terminals()[a],
                    self.states[p]
                ));
            }
        }
        out.push_str("flush:\n");
        for (&(q, r), targets) in &self.flush {
            for &p in targets {
                out.push_str(&format!("{} {} {}\n", self.states[q], self.states[r], self.states[p]));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::super::tests::{dyck, DYCK};
    use super::*;
    use crate::oracle::random_automaton;

    #[test]
    fn round_trip() {
        let a = dyck();
        assert_eq!(FloydAutomaton::parse(&a.to_text()).unwrap(), a);
        assert_eq!(a.states(), ["q0", "q1"]);
        assert_eq!(a.alphabet().filled_cells(), 19);
        assert_eq!(FloydAutomaton::parse(DYCK).unwrap().flush_edges().len(), 2);
    }

    #[test]
    fn format_errors() {
        assert!(matches!(
            FloydAutomaton::parse("q0 a q1"),
            Err(AutomatonError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            FloydAutomaton::parse("states: q\npush:\nq a"),
            Err(AutomatonError::Syntax { line: 3, .. })
        ));
        assert_eq!(
            FloydAutomaton::parse("terminals: x!"),
            Err(AutomatonError::InvalidToken("x!".into()))
        );
        assert!(matches!(
            FloydAutomaton::parse("states: q\nmatrix:\na < a\na > a"),
            Err(AutomatonError::Opm(OpmError::Conflict(_)))
        ));
    }

    #[test]
    fn unused_terminals_survive() {
        let a = FloydAutomaton::parse("terminals: a b\nstates: q\ninitial: q\nfinal:\nmatrix:\n# = #").unwrap();
        assert_eq!(a.alphabet().terminals(), ["a", "b"]);
        assert_eq!(FloydAutomaton::parse(&a.to_text()).unwrap(), a);
    }

    proptest! {
        #[test]
        fn text_format_round_trips(seed in any::<u64>()) {
            let a = random_automaton(seed, 4, &["a", "b", "c"]);
            prop_assert_eq!(&FloydAutomaton::parse(&a.to_text()).unwrap(), &a);
            let m = a.alphabet();
            prop_assert_eq!(&PrecedenceAlphabet::from_text(m.terminals(), &m.to_text()).unwrap(), m);
        }
    }
}
