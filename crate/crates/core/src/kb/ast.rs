use std::collections::BTreeSet;
use std::fmt;

/// A flat logical term. Variables are written `?name`; the stored name omits the `?`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn constant(name: impl Into<String>) -> Self {
        Term::Const(name.into())
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn as_const(&self) -> Option<&str> {
        match self {
            Term::Const(c) => Some(c),
            Term::Var(_) => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Const(c) => f.write_str(c),
        }
    }
}

/// `predicate(t1, ..., tn)` with no alternative-outcome slot.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom { predicate: predicate.into(), args }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if self.args.is_empty() {
            return Ok(());
        }
        f.write_str("(")?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

/// An alternative-outcome atom such as `coma({YES,NO},?y)`.
///
/// `args` holds the object arguments only; the outcome set sits at position
/// `alt_slot` of the written argument list.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AltAtom {
    pub predicate: String,
    pub args: Vec<Term>,
    pub alt_slot: usize,
    pub outcomes: Vec<String>,
}

impl AltAtom {
    /// Arity as written, counting the alternative slot.
    pub fn arity(&self) -> usize {
        self.args.len() + 1
    }

    /// The object part as a plain atom, used for unification.
    pub fn object_atom(&self) -> Atom {
        Atom::new(self.predicate.clone(), self.args.clone())
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }

    pub fn outcome_index(&self, outcome: &str) -> Option<usize> {
        self.outcomes.iter().position(|o| o == outcome)
    }

    pub(crate) fn write_with_slot(&self, f: &mut fmt::Formatter<'_>, slot: &dyn fmt::Display) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        let mut objects = self.args.iter();
        for i in 0..self.arity() {
            if i > 0 {
                f.write_str(",")?;
            }
            if i == self.alt_slot {
                write!(f, "{slot}")?;
            } else if let Some(t) = objects.next() {
                write!(f, "{t}")?;
            }
        }
        f.write_str(")")
    }
}

struct OutcomeSet<'a>(&'a [String]);

impl fmt::Display for OutcomeSet<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.0.join(","))
    }
}

impl fmt::Display for AltAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_with_slot(f, &OutcomeSet(&self.outcomes))
    }
}

/// A definite clause; facts have an empty body.
#[derive(Clone, Debug, PartialEq)]
pub struct HornClause {
    pub head: Atom,
    pub body: Vec<Atom>,
}

impl HornClause {
    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }
}

impl fmt::Display for HornClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        for (i, b) in self.body.iter().enumerate() {
            f.write_str(if i == 0 { " :- " } else { ", " })?;
            write!(f, "{b}")?;
        }
        f.write_str(".")
    }
}

/// A conditioning atom of a dependency statement.
#[derive(Clone, Debug, PartialEq)]
pub enum BodyAtom {
    Plain(Atom),
    Alt(AltAtom),
}

impl fmt::Display for BodyAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BodyAtom::Plain(a) => write!(f, "{a}"),
            BodyAtom::Alt(a) => write!(f, "{a}"),
        }
    }
}

/// One CPT cell: `(head | body outcomes) : probability`.
#[derive(Clone, Debug, PartialEq)]
pub struct CptEntry {
    pub head: String,
    pub body: Vec<String>,
    pub prob: f64,
}

impl fmt::Display for CptEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.head)?;
        if !self.body.is_empty() {
            write!(f, "|{}", self.body.join(","))?;
        }
        write!(f, "):{:?}", self.prob)
    }
}

/// A probabilistic dependency statement with its conditional probability table.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbDependency {
    pub head: AltAtom,
    pub body: Vec<BodyAtom>,
    pub cpt: Vec<CptEntry>,
}

impl ProbDependency {
    pub fn alt_parents(&self) -> impl Iterator<Item = &AltAtom> {
        self.body.iter().filter_map(|b| match b {
            BodyAtom::Alt(a) => Some(a),
            BodyAtom::Plain(_) => None,
        })
    }

    pub fn conditions(&self) -> impl Iterator<Item = &Atom> {
        self.body.iter().filter_map(|b| match b {
            BodyAtom::Plain(a) => Some(a),
            BodyAtom::Alt(_) => None,
        })
    }

    /// Probability of `head` given the outcomes of the alternative body atoms, in body order.
    pub fn probability(&self, head: &str, body: &[&str]) -> Option<f64> {
        self.cpt
            .iter()
            .find(|e| e.head == head && e.body.len() == body.len() && e.body.iter().zip(body).all(|(a, b)| a == b))
            .map(|e| e.prob)
    }

    /// Copy with every variable `?v` renamed to `?v<tag>`.
    pub fn renamed(&self, tag: &str) -> ProbDependency {
        let term = |t: &Term| match t {
            Term::Var(v) => Term::Var(format!("{v}{tag}")),
            c => c.clone(),
        };
        let atom = |a: &Atom| Atom { predicate: a.predicate.clone(), args: a.args.iter().map(term).collect() };
        let alt = |a: &AltAtom| AltAtom { args: a.args.iter().map(term).collect(), ..a.clone() };
        ProbDependency {
            head: alt(&self.head),
            body: self
                .body
                .iter()
                .map(|b| match b {
                    BodyAtom::Plain(a) => BodyAtom::Plain(atom(a)),
                    BodyAtom::Alt(a) => BodyAtom::Alt(alt(a)),
                })
                .collect(),
            cpt: self.cpt.clone(),
        }
    }

    /// Variables occurring anywhere in the statement.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.head.object_atom().vars().map(str::to_owned).collect();
        for b in &self.body {
            let atom = match b {
                BodyAtom::Plain(a) => a.clone(),
                BodyAtom::Alt(a) => a.object_atom(),
            };
            out.extend(atom.vars().map(str::to_owned));
        }
        out
    }
}

impl fmt::Display for ProbDependency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "prob {}", self.head)?;
        for (i, b) in self.body.iter().enumerate() {
            f.write_str(if i == 0 { " <- " } else { ", " })?;
            write!(f, "{b}")?;
        }
        f.write_str(" = { ")?;
        for (i, e) in self.cpt.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{e}")?;
        }
        f.write_str(" }.")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Statement {
    Clause(HornClause),
    Dependency(ProbDependency),
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Clause(c) => write!(f, "{c}"),
            Statement::Dependency(d) => write!(f, "{d}"),
        }
    }
}

/// 1-based source position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}
