use std::fmt;

use super::ast::{AltAtom, Pos, Term};
use super::parse::{ParseError, Parser, RawArg, RawAtom, Tok};
use super::KnowledgeBase;

/// An observed outcome of a ground random variable.
#[derive(Clone, Debug, PartialEq)]
pub struct Evidence {
    pub atom: AltAtom,
    pub outcome: String,
}

impl fmt::Display for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.atom.write_with_slot(f, &self.outcome)
    }
}

/// `P(hypothesis | evidence)`; the hypothesis carries a variable in its outcome slot.
#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub hypothesis: AltAtom,
    pub outcome_var: String,
    pub evidence: Vec<Evidence>,
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.hypothesis.write_with_slot(f, &Term::Var(self.outcome_var.clone()))?;
        for (i, e) in self.evidence.iter().enumerate() {
            f.write_str(if i == 0 { " | " } else { ", " })?;
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueryError {
    #[error(transparent)]
    Syntax(#[from] ParseError),
    #[error("{pos}: unknown predicate `{predicate}`")]
    UnknownPredicate { pos: Pos, predicate: String },
    #[error("{pos}: `{predicate}` is not an alternative-outcome predicate")]
    NotAlternative { pos: Pos, predicate: String },
    #[error("{pos}: `{predicate}` expects {expected} argument(s), found {found}")]
    Arity { pos: Pos, predicate: String, expected: usize, found: usize },
    #[error("{pos}: hypothesis `{atom}` must have ground object arguments and a variable outcome slot")]
    NonGroundHypothesis { pos: Pos, atom: String },
    #[error("{pos}: evidence `{atom}` must be fully ground")]
    NonGroundEvidence { pos: Pos, atom: String },
    #[error("{pos}: `{outcome}` is not an outcome of `{predicate}`")]
    UnknownOutcome { pos: Pos, predicate: String, outcome: String },
}

/// Parses `altatom [| ground-altatom {, ground-altatom}]` against the KB's predicate signatures.
pub fn parse_query(text: &str, kb: &KnowledgeBase) -> Result<Query, QueryError> {
    let mut p = Parser::new(text)?;
    let hyp_raw = p.atom()?;
    let mut ev_raw = Vec::new();
    if p.eat(&Tok::Pipe) {
        loop {
            ev_raw.push(p.atom()?);
            if !p.eat(&Tok::Comma) {
                break;
            }
        }
    }
    p.eat(&Tok::Dot);
    if !p.at(&Tok::Eof) {
        return Err(p.unexpected("`|`, `,` or end of query").into());
    }

    let hyp_pos = hyp_raw.pos;
    let (hypothesis, slot) = resolve(hyp_raw, kb)?;
    let outcome_var = match slot {
        Term::Var(v) if hypothesis.is_ground() => v,
        _ => return Err(QueryError::NonGroundHypothesis { pos: hyp_pos, atom: text_of(&hypothesis, &slot) }),
    };

    let mut evidence = Vec::new();
    for raw in ev_raw {
        let pos = raw.pos;
        let (atom, slot) = resolve(raw, kb)?;
        let outcome = match slot {
            Term::Const(c) if atom.is_ground() => c,
            _ => return Err(QueryError::NonGroundEvidence { pos, atom: text_of(&atom, &slot) }),
        };
        if atom.outcome_index(&outcome).is_none() {
            return Err(QueryError::UnknownOutcome { pos, predicate: atom.predicate, outcome });
        }
        evidence.push(Evidence { atom, outcome });
    }
    Ok(Query { hypothesis, outcome_var, evidence })
}

fn text_of(atom: &AltAtom, slot: &Term) -> String {
    struct W<'a>(&'a AltAtom, &'a Term);
    impl fmt::Display for W<'_> {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            self.0.write_with_slot(f, self.1)
        }
    }
    W(atom, slot).to_string()
}

/// Splits a written atom into its object arguments and the term in its outcome slot.
fn resolve(raw: RawAtom, kb: &KnowledgeBase) -> Result<(AltAtom, Term), QueryError> {
    let pos = raw.pos;
    let Some(sig) = kb.signature(&raw.predicate) else {
        return Err(QueryError::UnknownPredicate { pos, predicate: raw.predicate });
    };
    let Some(alt) = &sig.alt else {
        return Err(QueryError::NotAlternative { pos, predicate: raw.predicate });
    };
    if raw.args.len() != sig.arity {
        return Err(QueryError::Arity { pos, predicate: raw.predicate, expected: sig.arity, found: raw.args.len() });
    }
    let mut args = Vec::new();
    let mut slot = None;
    for (i, a) in raw.args.into_iter().enumerate() {
        let t = match a {
            RawArg::Term(t) => t,
            RawArg::Outcomes(_) => {
                return Err(ParseError::syntax(pos, "outcome sets are not allowed in queries").into());
            }
        };
        if i == alt.position {
            slot = Some(t);
        } else {
            args.push(t);
        }
    }
    let atom = AltAtom { predicate: raw.predicate, args, alt_slot: alt.position, outcomes: alt.outcomes.clone() };
    Ok((atom, slot.expect("arity checked")))
}
