use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::ast::{Pos, ProbDependency};
use super::{statement_signatures, KnowledgeBase, Signature};

/// CPT rows must sum to one within this tolerance.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum DiagnosticKind {
    ArityConflict,
    AltSlotConflict,
    OutcomeSetConflict,
    DegenerateOutcomes,
    AltUsedAsPlain,
    CptShape,
    CptUnknownOutcome,
    CptDuplicate,
    CptIncomplete,
    CptRange,
    CptRowSum,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct Diagnostic {
    pub pos: Pos,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.pos, self.message)
    }
}

/// Checks every semantic constraint of the language. An empty result means the
/// KB is fit for inference.
pub fn validate_kb(kb: &KnowledgeBase) -> Vec<Diagnostic> {
    let mut out = signature_diagnostics(kb);
    for (i, dep) in kb.dependencies() {
        cpt_diagnostics(dep, kb.position(i), &mut out);
    }
    out
}

/// Per-predicate arity, alternative slot and outcome-set consistency.
pub(crate) fn signature_diagnostics(kb: &KnowledgeBase) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen: BTreeMap<String, Signature> = BTreeMap::new();
    for (i, s) in kb.statements().iter().enumerate() {
        let pos = kb.position(i);
        for (name, sig) in statement_signatures(s) {
            let diag = |kind, message: String| Diagnostic { pos, kind, message };
            if let Some(alt) = &sig.alt {
                if alt.outcomes.len() < 2 {
                    out.push(diag(
                        DiagnosticKind::DegenerateOutcomes,
                        format!("`{name}` declares {} outcome(s); at least 2 are required", alt.outcomes.len()),
                    ));
                }
            }
            let Some(first) = seen.get(&name) else {
                seen.insert(name, sig);
                continue;
            };
            if first.arity != sig.arity {
                out.push(diag(
                    DiagnosticKind::ArityConflict,
                    format!("`{name}` used with arity {} but earlier with arity {}", sig.arity, first.arity),
                ));
                continue;
            }
            match (&first.alt, &sig.alt) {
                (None, None) => {}
                (Some(_), None) | (None, Some(_)) => out.push(diag(
                    DiagnosticKind::AltUsedAsPlain,
                    format!("`{name}` used both as an alternative-outcome and a plain predicate"),
                )),
                (Some(a), Some(b)) if a.position != b.position => out.push(diag(
                    DiagnosticKind::AltSlotConflict,
                    format!("`{name}` has its outcome set at position {} but earlier at {}", b.position, a.position),
                )),
                (Some(a), Some(b)) if a.outcomes != b.outcomes => out.push(diag(
                    DiagnosticKind::OutcomeSetConflict,
                    format!(
                        "`{name}` declares outcomes {{{}}} but earlier {{{}}}",
                        b.outcomes.join(","),
                        a.outcomes.join(",")
                    ),
                )),
                _ => {}
            }
        }
    }
    out
}

fn cpt_diagnostics(dep: &ProbDependency, pos: Pos, out: &mut Vec<Diagnostic>) {
    let name = &dep.head.predicate;
    let parents: Vec<&Vec<String>> = dep.alt_parents().map(|a| &a.outcomes).collect();
    let mut diag = |kind, message: String| out.push(Diagnostic { pos, kind, message });

    let mut rows: BTreeMap<Vec<&str>, Vec<(&str, f64)>> = BTreeMap::new();
    let mut shape_ok = true;
    for e in &dep.cpt {
        if e.body.len() != parents.len() {
            diag(
                DiagnosticKind::CptShape,
                format!("entry for `{name}` gives {} conditioning outcome(s), expected {}", e.body.len(), parents.len()),
            );
            shape_ok = false;
            continue;
        }
        if !dep.head.outcomes.contains(&e.head) {
            diag(DiagnosticKind::CptUnknownOutcome, format!("`{}` is not an outcome of `{name}`", e.head));
            shape_ok = false;
        }
        for (o, allowed) in e.body.iter().zip(&parents) {
            if !allowed.contains(o) {
                diag(DiagnosticKind::CptUnknownOutcome, format!("`{o}` is not a conditioning outcome in `{name}`"));
                shape_ok = false;
            }
        }
        if !(0.0..=1.0).contains(&e.prob) {
            diag(DiagnosticKind::CptRange, format!("probability {} for `{name}` is outside [0,1]", e.prob));
        }
        let row = rows.entry(e.body.iter().map(String::as_str).collect()).or_default();
        if row.iter().any(|(h, _)| *h == e.head) {
            diag(DiagnosticKind::CptDuplicate, format!("duplicate entry ({}|{}) for `{name}`", e.head, e.body.join(",")));
        }
        row.push((&e.head, e.prob));
    }
    if !shape_ok {
        return;
    }

    let mut missing = BTreeSet::new();
    for combo in cross_product(&parents) {
        let Some(row) = rows.get(&combo) else {
            missing.insert(combo.join(","));
            continue;
        };
        for h in &dep.head.outcomes {
            if !row.iter().any(|(x, _)| x == h) {
                missing.insert(format!("{h}|{}", combo.join(",")));
            }
        }
        let total: f64 = row.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > ROW_SUM_TOLERANCE {
            diag(
                DiagnosticKind::CptRowSum,
                format!("row ({}) of `{name}` sums to {total}, expected 1", combo.join(",")),
            );
        }
    }
    if !missing.is_empty() {
        diag(
            DiagnosticKind::CptIncomplete,
            format!("CPT of `{name}` is missing entries for {}", missing.into_iter().collect::<Vec<_>>().join("; ")),
        );
    }
}

fn cross_product<'a>(sets: &[&'a Vec<String>]) -> Vec<Vec<&'a str>> {
    let mut out = vec![Vec::new()];
    for set in sets {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                set.iter().map(move |o| {
                    let mut p = prefix.clone();
                    p.push(o.as_str());
                    p
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{parse_kb, parse_statements};

    fn kinds(text: &str) -> Vec<DiagnosticKind> {
        validate_kb(&parse_statements(text).unwrap()).into_iter().map(|d| d.kind).collect()
    }

    #[test]
    fn row_sum_violation() {
        let text = "prob coma({YES,NO},?y) <- tumor({YES,NO},?y), calcium({BAD,GOOD},?y) = { (YES|YES,BAD):0.8; (NO|YES,BAD):0.2; (YES|YES,GOOD):0.8; (NO|YES,GOOD):0.2; (YES|NO,BAD):0.8; (NO|NO,BAD):0.2; (YES|NO,GOOD):0.05; (NO|NO,GOOD):0.90 }.";
        let diags = validate_kb(&parse_kb(text).unwrap());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::CptRowSum);
        assert!(diags[0].message.contains("NO,GOOD"));
    }

    #[test]
    fn outcome_set_conflict_across_statements() {
        let text = "prob tumor({YES,NO},?y) = {(YES):0.5;(NO):0.5}.\nprob h({A,B},?y) <- tumor({Y,N},?y) = {(A|Y):1.0;(B|Y):0.0;(A|N):0.5;(B|N):0.5}.";
        assert_eq!(kinds(text), vec![DiagnosticKind::OutcomeSetConflict]);
    }

    #[test]
    fn incomplete_and_duplicate_entries() {
        let text = "prob a({X,Y}) = {(X):0.5;(X):0.5}.";
        let k = kinds(text);
        assert!(k.contains(&DiagnosticKind::CptDuplicate));
        assert!(k.contains(&DiagnosticKind::CptIncomplete));
    }

    #[test]
    fn range_shape_and_unknown_outcomes() {
        assert!(kinds("prob a({X,Y}) = {(X):1.5;(Y):-0.5}.").contains(&DiagnosticKind::CptRange));
        assert_eq!(kinds("prob a({X,Y}) = {(X|Z):1.0;(Y):0.0}."), vec![DiagnosticKind::CptShape]);
        assert_eq!(kinds("prob a({X,Y}) = {(Q):1.0;(Y):0.0}."), vec![DiagnosticKind::CptUnknownOutcome]);
    }

    #[test]
    fn alt_slot_and_plain_use_conflicts() {
        let text = "prob a({X,Y},?p) = {(X):1.0;(Y):0.0}.\nprob b({X,Y},?p) <- a(?p,{X,Y}) = {(X|X):1.0;(Y|X):0.0;(X|Y):1.0;(Y|Y):0.0}.\na(P,Q).";
        let k = kinds(text);
        assert!(k.contains(&DiagnosticKind::AltSlotConflict));
        assert!(k.contains(&DiagnosticKind::AltUsedAsPlain));
    }

    #[test]
    fn clean_kb_has_no_diagnostics() {
        let text = "prob a({X,Y}) = {(X):0.25;(Y):0.75}.\nprob b({X,Y}) <- a({X,Y}), ok = {(X|X):1.0;(Y|X):0.0;(X|Y):0.5;(Y|Y):0.5}.\nok.";
        assert!(kinds(text).is_empty());
    }
}
