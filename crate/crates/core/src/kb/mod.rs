//! Knowledge-base language: Horn clauses, alternative-outcome random
//! variables and conditional-probability dependency statements.
//!
//! File grammar (one `.`-terminated statement at a time, `%` starts a comment):
//!
//! ```text
//! fact:  atom.
//! rule:  atom :- atom {, atom}.
//! prob:  prob altatom [<- batom {, batom}] = { entry {; entry} }.
//! entry: (OUT [| OUT {, OUT}]) : number
//! ```
//!
//! Variables are `?name`, constants are bare identifiers, and an
//! alternative-outcome atom carries its outcome set inline, e.g.
//! `tumor({YES,NO},?y)`.

mod ast;
mod parse;
mod query;
mod validate;

use std::collections::BTreeMap;

pub use ast::{AltAtom, Atom, BodyAtom, CptEntry, HornClause, Pos, ProbDependency, Statement, Term};
pub use parse::{parse_kb, parse_statements, ParseError};
pub use query::{parse_query, Evidence, Query, QueryError};
pub use validate::{validate_kb, Diagnostic, DiagnosticKind};

/// Per-predicate shape, taken from the first statement that mentions it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    /// Written arity, including the alternative slot if any.
    pub arity: usize,
    pub alt: Option<AltSlot>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AltSlot {
    pub position: usize,
    pub outcomes: Vec<String>,
}

/// A parsed knowledge base. Equality is structural and ignores source positions.
#[derive(Clone, Debug, Default)]
pub struct KnowledgeBase {
    statements: Vec<Statement>,
    positions: Vec<Pos>,
    signatures: BTreeMap<String, Signature>,
}

impl PartialEq for KnowledgeBase {
    fn eq(&self, other: &Self) -> bool {
        self.statements == other.statements
    }
}

impl KnowledgeBase {
    pub fn new(statements: Vec<Statement>) -> Self {
        let positions = vec![Pos::default(); statements.len()];
        Self::with_positions(statements, positions)
    }

    pub fn with_positions(statements: Vec<Statement>, positions: Vec<Pos>) -> Self {
        assert_eq!(statements.len(), positions.len());
        let mut signatures = BTreeMap::new();
        for s in &statements {
            for (name, sig) in statement_signatures(s) {
                signatures.entry(name).or_insert(sig);
            }
        }
        KnowledgeBase { statements, positions, signatures }
    }

    pub fn statements(&self) -> &[Statement] {
        &self.statements
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    pub fn position(&self, index: usize) -> Pos {
        self.positions.get(index).copied().unwrap_or_default()
    }

    pub fn clauses(&self) -> impl Iterator<Item = &HornClause> {
        self.statements.iter().filter_map(|s| match s {
            Statement::Clause(c) => Some(c),
            Statement::Dependency(_) => None,
        })
    }

    /// Dependency statements paired with their statement index.
    pub fn dependencies(&self) -> impl Iterator<Item = (usize, &ProbDependency)> {
        self.statements.iter().enumerate().filter_map(|(i, s)| match s {
            Statement::Dependency(d) => Some((i, d)),
            Statement::Clause(_) => None,
        })
    }

    pub fn dependency(&self, index: usize) -> Option<&ProbDependency> {
        match self.statements.get(index)? {
            Statement::Dependency(d) => Some(d),
            Statement::Clause(_) => None,
        }
    }

    pub fn signature(&self, predicate: &str) -> Option<&Signature> {
        self.signatures.get(predicate)
    }

    pub fn alt_slot(&self, predicate: &str) -> Option<&AltSlot> {
        self.signature(predicate)?.alt.as_ref()
    }

    pub fn predicates(&self) -> impl Iterator<Item = (&str, &Signature)> {
        self.signatures.iter().map(|(k, v)| (k.as_str(), v))
    }
}

/// Prints one statement per line; `parse_kb(&print_kb(kb))` reproduces `kb`.
pub fn print_kb(kb: &KnowledgeBase) -> String {
    let mut out = String::new();
    for s in kb.statements() {
        out.push_str(&s.to_string());
        out.push('\n');
    }
    out
}

pub(crate) fn statement_signatures(s: &Statement) -> Vec<(String, Signature)> {
    fn plain(a: &Atom) -> (String, Signature) {
        (a.predicate.clone(), Signature { arity: a.args.len(), alt: None })
    }
    fn alt(a: &AltAtom) -> (String, Signature) {
        let slot = AltSlot { position: a.alt_slot, outcomes: a.outcomes.clone() };
        (a.predicate.clone(), Signature { arity: a.arity(), alt: Some(slot) })
    }
    match s {
        Statement::Clause(c) => std::iter::once(&c.head).chain(&c.body).map(plain).collect(),
        Statement::Dependency(d) => std::iter::once(alt(&d.head))
            .chain(d.body.iter().map(|b| match b {
                BodyAtom::Plain(a) => plain(a),
                BodyAtom::Alt(a) => alt(a),
            }))
            .collect(),
    }
}
