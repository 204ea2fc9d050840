//! Unification over flat terms and depth-bounded SLD resolution over the
//! knowledge base's definite clauses.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::kb::{Atom, KnowledgeBase, Term};

/// Default bound on resolution steps along one derivation.
pub const DEFAULT_DEPTH: usize = 64;

/// Variable bindings, kept in solved form: no bound variable occurs in any
/// binding's value, so applying the substitution twice equals applying it once.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Substitution {
    bindings: BTreeMap<String, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.bindings.get(var)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Term)> {
        self.bindings.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn apply(&self, t: &Term) -> Term {
        match t {
            Term::Var(v) => self.bindings.get(v).cloned().unwrap_or_else(|| t.clone()),
            Term::Const(_) => t.clone(),
        }
    }

    pub fn apply_terms(&self, ts: &[Term]) -> Vec<Term> {
        ts.iter().map(|t| self.apply(t)).collect()
    }

    pub fn apply_atom(&self, a: &Atom) -> Atom {
        Atom { predicate: a.predicate.clone(), args: self.apply_terms(&a.args) }
    }

    /// True when every binding of `parent` is preserved (up to resolution) by `self`.
    pub fn extends(&self, parent: &Substitution) -> bool {
        parent.bindings.iter().all(|(k, v)| self.apply(&Term::Var(k.clone())) == self.apply(v))
    }

    /// Binds an unbound variable to an already-resolved term.
    fn bind(&mut self, var: &str, value: Term) {
        // flat terms: the only possible occurrence of `var` in `value` is `value` itself
        if value == Term::Var(var.to_owned()) {
            return;
        }
        for v in self.bindings.values_mut() {
            if matches!(v, Term::Var(x) if x == var) {
                *v = value.clone();
            }
        }
        self.bindings.insert(var.to_owned(), value);
    }

    /// Keeps only the bindings of the listed variables.
    fn restrict(&self, keep: &BTreeSet<String>) -> Substitution {
        Substitution {
            bindings: self.bindings.iter().filter(|(k, _)| keep.contains(*k)).map(|(k, v)| (k.clone(), v.clone())).collect(),
        }
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "?{k}↦{v}")?;
        }
        f.write_str("}")
    }
}

impl FromIterator<(String, Term)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (String, Term)>>(iter: I) -> Self {
        let mut s = Substitution::new();
        for (k, v) in iter {
            let v = s.apply(&v);
            match s.apply(&Term::Var(k.clone())) {
                Term::Var(free) => s.bind(&free, v),
                bound => assert_eq!(bound, v, "conflicting bindings for ?{k}"),
            }
        }
        s
    }
}

/// Things that can be unified under a substitution.
pub trait Unifiable {
    fn unify_into(&self, other: &Self, theta: &mut Substitution) -> bool;
}

impl Unifiable for Term {
    fn unify_into(&self, other: &Self, theta: &mut Substitution) -> bool {
        match (theta.apply(self), theta.apply(other)) {
            (Term::Const(a), Term::Const(b)) => a == b,
            (Term::Var(v), t) | (t, Term::Var(v)) => {
                theta.bind(&v, t);
                true
            }
        }
    }
}

impl Unifiable for Atom {
    fn unify_into(&self, other: &Self, theta: &mut Substitution) -> bool {
        self.predicate == other.predicate
            && self.args.len() == other.args.len()
            && self.args.iter().zip(&other.args).all(|(a, b)| a.unify_into(b, theta))
    }
}

/// Most general unifier of `a` and `b` extending `theta`, or `None`.
pub fn unify<U: Unifiable>(a: &U, b: &U, theta: &Substitution) -> Option<Substitution> {
    let mut out = theta.clone();
    a.unify_into(b, &mut out).then_some(out)
}

/// Answers of a proof search.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Proofs {
    pub answers: Vec<Substitution>,
    /// Set when the depth bound cut off at least one derivation.
    pub truncated: bool,
}

/// SLD resolution of a single goal. See [`prove_all`].
pub fn prove(goal: &Atom, theta: &Substitution, kb: &KnowledgeBase, depth: usize) -> Proofs {
    prove_all(std::slice::from_ref(goal), theta, kb, depth)
}

/// SLD resolution of a conjunction, left to right, clauses tried in KB order.
///
/// Each answer extends `theta` and is restricted to the variables visible to
/// the caller. Answers identical after restriction are reported once.
pub fn prove_all(goals: &[Atom], theta: &Substitution, kb: &KnowledgeBase, depth: usize) -> Proofs {
    let mut visible: BTreeSet<String> = theta.iter().map(|(k, _)| k.to_owned()).collect();
    for (_, v) in theta.iter() {
        if let Term::Var(x) = v {
            visible.insert(x.clone());
        }
    }
    for g in goals {
        visible.extend(g.vars().map(str::to_owned));
    }
    let clauses: Vec<_> = kb.clauses().collect();
    let mut solver = Solver { clauses: &clauses, depth, fresh: 0, visible, out: Proofs::default() };
    solver.solve(goals.to_vec(), theta.clone(), 0);
    solver.out
}

struct Solver<'a> {
    clauses: &'a [&'a crate::kb::HornClause],
    depth: usize,
    fresh: usize,
    visible: BTreeSet<String>,
    out: Proofs,
}

impl Solver<'_> {
    fn solve(&mut self, mut goals: Vec<Atom>, theta: Substitution, used: usize) {
        if goals.is_empty() {
            let answer = theta.restrict(&self.visible);
            if !self.out.answers.contains(&answer) {
                self.out.answers.push(answer);
            }
            return;
        }
        if used >= self.depth {
            self.out.truncated = true;
            return;
        }
        let goal = goals.remove(0);
        for clause in self.clauses {
            if clause.head.predicate != goal.predicate || clause.head.args.len() != goal.args.len() {
                continue;
            }
            self.fresh += 1;
            let suffix = format!("~{}", self.fresh);
            let rename = |a: &Atom| Atom {
                predicate: a.predicate.clone(),
                args: a
                    .args
                    .iter()
                    .map(|t| match t {
                        Term::Var(v) => Term::Var(format!("{v}{suffix}")),
                        c => c.clone(),
                    })
                    .collect(),
            };
            let Some(next) = unify(&goal, &rename(&clause.head), &theta) else {
                continue;
            };
            let mut rest: Vec<Atom> = clause.body.iter().map(rename).collect();
            rest.extend(goals.iter().cloned());
            self.solve(rest, next, used + 1);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::parse_kb;
    use proptest::prelude::*;

    fn c(s: &str) -> Term {
        Term::constant(s)
    }
    fn v(s: &str) -> Term {
        Term::var(s)
    }
    fn sub(pairs: &[(&str, Term)]) -> Substitution {
        pairs.iter().map(|(k, t)| (k.to_string(), t.clone())).collect()
    }

    #[test]
    fn unify_direct_match() {
        let a = Atom::new("cancer", vec![v("a"), c("SAM")]);
        let b = Atom::new("cancer", vec![c("YES"), v("y")]);
        let got = unify(&a, &b, &Substitution::new()).unwrap();
        assert_eq!(got, sub(&[("a", c("YES")), ("y", c("SAM"))]));
    }

    #[test]
    fn unify_clash_fails() {
        let a = Atom::new("f", vec![v("x"), v("x")]);
        let b = Atom::new("f", vec![c("A"), c("B")]);
        assert!(unify(&a, &b, &Substitution::new()).is_none());
    }

    #[test]
    fn unify_variable_aliasing() {
        let got = unify(&v("x"), &v("y"), &Substitution::new()).unwrap();
        assert_eq!(got, sub(&[("x", v("y"))]));
        // binding the alias later keeps the substitution in solved form
        let got = unify(&v("y"), &c("A"), &got).unwrap();
        assert_eq!(got, sub(&[("x", c("A")), ("y", c("A"))]));
    }

    #[test]
    fn prove_fact() {
        let kb = parse_kb("patient(SAM).").unwrap();
        let p = prove(&Atom::new("patient", vec![v("x")]), &Substitution::new(), &kb, DEFAULT_DEPTH);
        assert_eq!(p.answers, vec![sub(&[("x", c("SAM"))])]);
        assert!(!p.truncated);
    }

    #[test]
    fn prove_one_step_chaining() {
        let kb = parse_kb("mortal(?x) :- man(?x). man(SOCRATES).").unwrap();
        let p = prove(&Atom::new("mortal", vec![c("SOCRATES")]), &Substitution::new(), &kb, DEFAULT_DEPTH);
        assert_eq!(p.answers, vec![Substitution::new()]);
    }

    #[test]
    fn prove_no_proof() {
        let kb = parse_kb("patient(SAM).").unwrap();
        let p = prove(&Atom::new("patient", vec![c("BOB")]), &Substitution::new(), &kb, DEFAULT_DEPTH);
        assert!(p.answers.is_empty());
    }

    #[test]
    fn answers_follow_clause_order_and_are_deduplicated() {
        let kb = parse_kb("p(B). p(A). p(B). q(?x) :- p(?x).").unwrap();
        let p = prove(&Atom::new("q", vec![v("z")]), &Substitution::new(), &kb, DEFAULT_DEPTH);
        assert_eq!(p.answers, vec![sub(&[("z", c("B"))]), sub(&[("z", c("A"))])]);
    }

    #[test]
    fn recursion_is_cut_by_depth_bound() {
        let kb = parse_kb("loop(?x) :- loop(?x). loop(A).").unwrap();
        let p = prove(&Atom::new("loop", vec![v("x")]), &Substitution::new(), &kb, 8);
        assert!(p.truncated);
        assert_eq!(p.answers, vec![sub(&[("x", c("A"))])]);
    }

    #[test]
    fn answers_extend_the_incoming_substitution() {
        let kb = parse_kb("edge(A,B). edge(B,C). path(?x,?y) :- edge(?x,?y). path(?x,?z) :- edge(?x,?y), path(?y,?z).")
            .unwrap();
        let theta = sub(&[("from", c("A")), ("alias", v("to"))]);
        let p = prove(&Atom::new("path", vec![v("from"), v("to")]), &theta, &kb, DEFAULT_DEPTH);
        assert_eq!(p.answers.len(), 2);
        for a in &p.answers {
            assert!(a.extends(&theta));
            assert_eq!(a.get("alias"), a.get("to"));
        }
    }

    const VARS: [&str; 3] = ["x", "y", "z"];
    const CONSTS: [&str; 2] = ["A", "B"];

    fn term() -> impl Strategy<Value = Term> {
        prop_oneof![
            (0..VARS.len()).prop_map(|i| v(VARS[i])),
            (0..CONSTS.len()).prop_map(|i| c(CONSTS[i])),
        ]
    }

    fn ground_assignments() -> Vec<Substitution> {
        let mut out = vec![Vec::new()];
        for var in VARS {
            out = out
                .into_iter()
                .flat_map(|p: Vec<(String, Term)>| {
                    CONSTS.iter().map(move |k| {
                        let mut p = p.clone();
                        p.push((var.to_string(), c(k)));
                        p
                    })
                })
                .collect();
        }
        out.into_iter().map(|p| p.into_iter().collect()).collect()
    }

    proptest! {
        // Every ground unifier factors through the returned mgu, and failure
        // means no ground unifier exists.
        #[test]
        fn mgu_is_most_general(a in proptest::collection::vec(term(), 3), b in proptest::collection::vec(term(), 3)) {
            let (a, b) = (Atom::new("f", a), Atom::new("f", b));
            let mgu = unify(&a, &b, &Substitution::new());
            let unifiers: Vec<_> = ground_assignments()
                .into_iter()
                .filter(|s| s.apply_atom(&a) == s.apply_atom(&b))
                .collect();
            match mgu {
                None => prop_assert!(unifiers.is_empty()),
                Some(m) => {
                    prop_assert_eq!(m.apply_atom(&a), m.apply_atom(&b));
                    prop_assert_eq!(m.apply_atom(&m.apply_atom(&a)), m.apply_atom(&a));
                    prop_assert!(!unifiers.is_empty());
                    for s in &unifiers {
                        for var in VARS {
                            let t = v(var);
                            prop_assert_eq!(s.apply(&m.apply(&t)), s.apply(&t));
                        }
                    }
                }
            }
        }
    }
}
