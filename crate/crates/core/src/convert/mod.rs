//! Grammar to automaton and back.

mod a2g;
mod g2a;

use thiserror::Error;

use crate::grammar::{GrammarError, ShapeIssue};

pub use a2g::{automaton_to_grammar, QSym, Quad};
pub use g2a::{enumerate_push_triples, grammar_to_automaton, ExtNt, GState, PushCase, PushTriple, Slot};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConvertError {
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error("grammar is not in the required shape ({} issue(s); normalize it first)", .0.len())]
    Shape(Vec<ShapeIssue>),
    #[error("the ≐ relation has a cycle: {}", .0.join(" = "))]
    EqCycle(Vec<String>),
}
