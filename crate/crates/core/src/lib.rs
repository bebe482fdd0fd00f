//! Operator-precedence grammars and Floyd automata.
//!
//! The crate covers precedence matrices and chains ([`opm`]), operator
//! grammars ([`grammar`]), nondeterministic Floyd automata with their runs and
//! determinization ([`automaton`]), conversions in both directions
//! ([`convert`]), acceptance of ultimately periodic infinite words
//! ([`omega`]) and brute-force reference procedures ([`oracle`]).

pub mod automaton;
pub mod convert;
pub mod grammar;
pub mod omega;
pub mod opm;
pub mod oracle;

pub use automaton::{determinize, Configuration, FloydAutomaton, StackEntry, Trace};
pub use convert::{automaton_to_grammar, grammar_to_automaton, ConvertError};
pub use grammar::{GSym, Grammar, GrammarError, Rule};
pub use omega::{omega_accepts, LassoWord, OmegaVerdict};
pub use opm::{MoveKind, OpmError, PrecRel, PrecedenceAlphabet, Symbol};
