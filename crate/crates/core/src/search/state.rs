use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::graph::{NodeId, PartialGraph};
use super::markers::MarkerTable;
use super::SearchError;
use crate::deduce::{prove, prove_all, unify, Substitution, DEFAULT_DEPTH};
use crate::factor::{Factor, GroundRv};
use crate::kb::{AltAtom, Atom, BodyAtom, KnowledgeBase, Query, Term};
use crate::scalar::Scalar;

/// A subgoal formula. Alternative-outcome subgoals are always ground.
#[derive(Clone, Debug, PartialEq)]
pub enum Goal {
    Plain(Atom),
    Alt(GroundRv),
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Goal::Plain(a) => write!(f, "{a}"),
            Goal::Alt(rv) => write!(f, "{rv}"),
        }
    }
}

/// An element of the subgoal list, with the nodes it must link to once resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct SubGoal {
    pub goal: Goal,
    pub pending_children: BTreeSet<NodeId>,
}

impl SubGoal {
    pub fn alt(&self) -> Option<&GroundRv> {
        match &self.goal {
            Goal::Alt(rv) => Some(rv),
            Goal::Plain(_) => None,
        }
    }
}

/// One search operator application.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    /// `proof` indexes the answers of the inline proof of the statement's
    /// conditions; it is 0 when the conditions became subgoals instead.
    FindProbDependency { goal: usize, statement: usize, proof: usize },
    ProveGoal { goal: usize, answer: usize },
    FindInGraph { goal: usize, node: NodeId },
    Multiply { a: NodeId, b: NodeId },
    Margin { rv: GroundRv },
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::FindProbDependency { .. } => "find-prob-dependency",
            Action::ProveGoal { .. } => "prove-goal",
            Action::FindInGraph { .. } => "find-in-graph",
            Action::Multiply { .. } => "multiply",
            Action::Margin { .. } => "margin",
        }
    }

    pub fn is_construction(&self) -> bool {
        !matches!(self, Action::Multiply { .. } | Action::Margin { .. })
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::FindProbDependency { goal, statement, proof } => {
                write!(f, "{}({goal},{statement},{proof})", self.name())
            }
            Action::ProveGoal { goal, answer } => write!(f, "{}({goal},{answer})", self.name()),
            Action::FindInGraph { goal, node } => write!(f, "{}({goal},{node})", self.name()),
            Action::Multiply { a, b } => write!(f, "{}({a},{b})", self.name()),
            Action::Margin { rv } => write!(f, "{}({rv})", self.name()),
        }
    }
}

/// Everything about a query that stays fixed during search.
pub struct Context<'a> {
    pub kb: &'a KnowledgeBase,
    pub query: &'a Query,
    pub hypothesis: GroundRv,
    /// Observed outcomes per variable; conflicting observations list several.
    pub evidence: BTreeMap<GroundRv, Vec<String>>,
    pub markers: MarkerTable,
    pub depth: usize,
    /// Whether margins wait for the marker gate.
    pub gate: bool,
    pub strict: bool,
    truncated: Cell<bool>,
}

impl<'a> Context<'a> {
    pub fn new(kb: &'a KnowledgeBase, query: &'a Query) -> Self {
        let hypothesis = GroundRv::from_alt(&query.hypothesis).expect("query hypothesis is ground");
        let mut evidence: BTreeMap<GroundRv, Vec<String>> = BTreeMap::new();
        for e in &query.evidence {
            let rv = GroundRv::from_alt(&e.atom).expect("evidence is ground");
            evidence.entry(rv).or_default().push(e.outcome.clone());
        }
        Context {
            kb,
            query,
            hypothesis,
            evidence,
            markers: MarkerTable::build(kb, query),
            depth: DEFAULT_DEPTH,
            gate: true,
            strict: false,
            truncated: Cell::new(false),
        }
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn with_gate(mut self, gate: bool) -> Self {
        self.gate = gate;
        self
    }

    pub fn with_strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    /// Set once any proof search hit the depth bound.
    pub fn truncated(&self) -> bool {
        self.truncated.get()
    }

    fn note(&self, truncated: bool) {
        if truncated {
            self.truncated.set(true);
        }
    }
}

/// Successor states of one operator, with the count of cycle-pruned ones.
pub struct Expansion<T> {
    pub successors: Vec<(Action, SearchState<T>)>,
    pub pruned: usize,
}

impl<T> Default for Expansion<T> {
    fn default() -> Self {
        Expansion { successors: Vec::new(), pruned: 0 }
    }
}

/// Why a margin is not allowed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MarginRefusal {
    NotIndexed,
    Hypothesis,
    Shared(usize),
    Pending,
    Gate,
}

/// `(P*, Θ, G, M*)` plus the actions that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchState<T> {
    subgoals: Vec<SubGoal>,
    theta: Substitution,
    graph: PartialGraph<T>,
    marginalized: BTreeSet<GroundRv>,
    history: Vec<Action>,
    next_var: usize,
}

impl<T: Scalar> SearchState<T> {
    /// The initial state: the hypothesis and the evidence as subgoals, all else empty.
    pub fn initial(q: &Query) -> Self {
        let mut subgoals = vec![SubGoal {
            goal: Goal::Alt(GroundRv::from_alt(&q.hypothesis).expect("ground hypothesis")),
            pending_children: BTreeSet::new(),
        }];
        for e in &q.evidence {
            subgoals.push(SubGoal {
                goal: Goal::Alt(GroundRv::from_alt(&e.atom).expect("ground evidence")),
                pending_children: BTreeSet::new(),
            });
        }
        SearchState {
            subgoals,
            theta: Substitution::new(),
            graph: PartialGraph::default(),
            marginalized: BTreeSet::new(),
            history: Vec::new(),
            next_var: 0,
        }
    }

    pub fn subgoals(&self) -> &[SubGoal] {
        &self.subgoals
    }

    pub fn theta(&self) -> &Substitution {
        &self.theta
    }

    pub fn graph(&self) -> &PartialGraph<T> {
        &self.graph
    }

    pub fn marginalized(&self) -> &BTreeSet<GroundRv> {
        &self.marginalized
    }

    pub fn history(&self) -> &[Action] {
        &self.history
    }

    /// No subgoals remain, so no construction action applies.
    pub fn construction_done(&self) -> bool {
        self.subgoals.is_empty()
    }

    /// No subgoals and a single node whose factor is over the hypothesis alone.
    pub fn is_terminal(&self, hypothesis: &GroundRv) -> bool {
        self.subgoals.is_empty()
            && self.graph.len() == 1
            && self.graph.nodes().all(|(_, n)| n.factor.dims() == std::slice::from_ref(hypothesis))
    }

    /// The normalized answer of a terminal state.
    pub fn answer(&self, hypothesis: &GroundRv) -> Option<Result<Factor<T>, SearchError>> {
        self.is_terminal(hypothesis).then(|| {
            let (_, node) = self.graph.nodes().next().expect("one node");
            node.factor.normalize().map_err(|_| SearchError::InconsistentEvidence)
        })
    }

    /// Index of the first alternative subgoal that names a marginalized variable.
    pub fn marg_error(&self) -> Option<usize> {
        self.subgoals.iter().position(|s| s.alt().is_some_and(|rv| self.marginalized.contains(rv)))
    }

    /// Node a subgoal can be found in, if any.
    pub fn find_in_graph_target(&self, goal: usize) -> Option<NodeId> {
        self.subgoals.get(goal)?.alt().and_then(|rv| self.graph.home(rv))
    }

    fn without_goal(&self, goal: usize, action: Action) -> SearchState<T> {
        let mut next = self.clone();
        next.subgoals.remove(goal);
        next.history.push(action);
        next
    }

    /// All successors of `find-in-graph` on subgoal `goal`.
    pub fn find_in_graph(&self, goal: usize) -> Expansion<T> {
        let mut out = Expansion::default();
        let Some(node) = self.find_in_graph_target(goal) else {
            return out;
        };
        let children: Vec<NodeId> = self.subgoals[goal].pending_children.iter().map(|c| self.graph.resolve(*c)).collect();
        if children.iter().any(|c| *c != node && self.graph.reachable(*c).contains(&node)) {
            out.pruned += 1;
            return out;
        }
        let action = Action::FindInGraph { goal, node };
        let mut next = self.without_goal(goal, action.clone());
        next.graph.add_edges(node, children);
        out.successors.push((action, next));
        out
    }

    /// All successors of `prove-goal` on a plain subgoal.
    pub fn prove_goal(&self, goal: usize, ctx: &Context) -> Expansion<T> {
        let mut out = Expansion::default();
        let Some(SubGoal { goal: Goal::Plain(atom), .. }) = self.subgoals.get(goal) else {
            return out;
        };
        let proofs = prove(atom, &self.theta, ctx.kb, ctx.depth);
        ctx.note(proofs.truncated);
        for (answer, theta) in proofs.answers.into_iter().enumerate() {
            let action = Action::ProveGoal { goal, answer };
            let mut next = self.without_goal(goal, action.clone());
            next.theta = theta;
            out.successors.push((action, next));
        }
        out
    }

    /// All successors of `find-prob-dependency` on an alternative subgoal.
    ///
    /// Never applies when `find-in-graph` would. Each unifying statement gives
    /// a successor; if the statement's parents only become ground through its
    /// conditions, those are proved here and each answer gives a successor.
    pub fn find_prob_dependency(&self, goal: usize, ctx: &Context) -> Result<Expansion<T>, SearchError> {
        let mut out = Expansion::default();
        let Some(sub) = self.subgoals.get(goal) else {
            return Ok(out);
        };
        let Some(rv) = sub.alt() else {
            return Ok(out);
        };
        if self.graph.home(rv).is_some() || self.marginalized.contains(rv) {
            return Ok(out);
        }
        let target = Atom::new(rv.predicate(), rv.args().iter().map(|a| Term::constant(a.clone())).collect());
        let mut statements = BTreeSet::new();
        for (statement, dep) in ctx.kb.dependencies() {
            if dep.head.predicate != rv.predicate() || dep.head.args.len() != rv.args().len() {
                continue;
            }
            let dep = dep.renamed(&format!("#{}", self.next_var));
            let Some(theta) = unify(&dep.head.object_atom(), &target, &self.theta) else {
                continue;
            };
            let parents_ground = dep.alt_parents().all(|a| theta.apply_terms(&a.args).iter().all(|t| !t.is_var()));
            let answers: Vec<(Substitution, bool)> = if parents_ground {
                vec![(theta, true)]
            } else {
                let conditions: Vec<Atom> = dep.conditions().cloned().collect();
                let proofs = prove_all(&conditions, &theta, ctx.kb, ctx.depth);
                ctx.note(proofs.truncated);
                proofs.answers.into_iter().map(|t| (t, false)).collect()
            };
            for (proof, (theta, conditions_pending)) in answers.into_iter().enumerate() {
                let parents: Option<Vec<GroundRv>> = dep
                    .alt_parents()
                    .map(|a| GroundRv::from_alt(&AltAtom { args: theta.apply_terms(&a.args), ..a.clone() }))
                    .collect();
                let Some(parents) = parents else {
                    out.pruned += 1;
                    continue;
                };
                let descendants = self.graph.rv_descendants(rv);
                let repeated = parents.iter().enumerate().any(|(i, p)| parents[..i].contains(p));
                if repeated || parents.iter().any(|p| p == rv || descendants.contains(p)) {
                    out.pruned += 1;
                    continue;
                }
                let mut dims = vec![rv.clone()];
                dims.extend(parents.iter().cloned());
                let mut missing = false;
                let mut factor = Factor::from_fn(dims, |a| {
                    let body: Vec<&str> = a[1..].iter().zip(&parents).map(|(i, p)| p.outcomes()[*i].as_str()).collect();
                    match dep.probability(&rv.outcomes()[a[0]], &body) {
                        Some(p) => T::from_prob(p),
                        None => {
                            missing = true;
                            T::zero()
                        }
                    }
                })?;
                if missing {
                    return Err(SearchError::IncompleteTable(rv.to_string()));
                }
                for obs in ctx.evidence.get(rv).into_iter().flatten() {
                    factor = factor.condition(rv, obs)?;
                }
                statements.insert(statement);
                let action = Action::FindProbDependency { goal, statement, proof };
                let mut next = self.without_goal(goal, action.clone());
                next.theta = theta.clone();
                next.next_var += 1;
                let id = next.graph.add_node(rv.clone(), parents.clone(), factor, sub.pending_children.iter().copied());
                let mut parents = parents.into_iter();
                for b in &dep.body {
                    match b {
                        BodyAtom::Alt(_) => next.subgoals.push(SubGoal {
                            goal: Goal::Alt(parents.next().expect("one parent per alternative atom")),
                            pending_children: BTreeSet::from([id]),
                        }),
                        BodyAtom::Plain(a) if conditions_pending => next.subgoals.push(SubGoal {
                            goal: Goal::Plain(theta.apply_atom(a)),
                            pending_children: BTreeSet::new(),
                        }),
                        BodyAtom::Plain(_) => {}
                    }
                }
                out.successors.push((action, next));
            }
        }
        if ctx.strict && statements.len() > 1 {
            return Err(SearchError::Ambiguous(rv.to_string()));
        }
        Ok(out)
    }

    /// Checks the preconditions of `margin`, and the marker gate when enabled.
    pub fn margin_allowed(&self, rv: &GroundRv, ctx: &Context) -> Result<(), MarginRefusal> {
        if self.graph.home(rv).is_none() {
            return Err(MarginRefusal::NotIndexed);
        }
        if *rv == ctx.hypothesis {
            return Err(MarginRefusal::Hypothesis);
        }
        let holders = self.graph.nodes_with(rv).len();
        if holders != 1 {
            return Err(MarginRefusal::Shared(holders));
        }
        if self.subgoals.iter().any(|s| s.alt() == Some(rv)) {
            return Err(MarginRefusal::Pending);
        }
        if ctx.gate && !self.margin_safe(rv, &ctx.markers) {
            return Err(MarginRefusal::Gate);
        }
        Ok(())
    }

    /// Marker gate: construction is over, or `rv` has found as many child
    /// predicates as it has marks and no pending subgoal can still give it a child.
    pub fn margin_safe(&self, rv: &GroundRv, markers: &MarkerTable) -> bool {
        if self.construction_done() {
            return true;
        }
        let found: BTreeSet<&str> = self.graph.rv_children(rv).map(GroundRv::predicate).collect();
        if found.len() < markers.expected_children(rv.predicate()) {
            return false;
        }
        !self.subgoals.iter().filter_map(SubGoal::alt).any(|p| markers.may_feed(rv.predicate(), p.predicate()))
    }

    pub fn margin(&self, rv: &GroundRv, ctx: &Context) -> Result<SearchState<T>, SearchError> {
        self.margin_allowed(rv, ctx).map_err(|r| SearchError::Precondition(format!("margin {rv}: {r:?}")))?;
        let mut next = self.clone();
        next.graph.sum_out(rv)?;
        next.marginalized.insert(rv.clone());
        next.history.push(Action::Margin { rv: rv.clone() });
        Ok(next)
    }

    /// True when merging `a` and `b` keeps the node graph acyclic, now and
    /// after any way the pending subgoals may still be resolved.
    pub fn can_multiply(&self, a: NodeId, b: NodeId, markers: &MarkerTable) -> bool {
        let (a, b) = (self.graph.resolve(a), self.graph.resolve(b));
        if a == b || self.graph.node(a).is_none() || self.graph.node(b).is_none() {
            return false;
        }
        let adj = self.augmented(markers);
        let reach = |from: (usize, usize)| {
            let mut seen = BTreeSet::from([from]);
            let mut todo = vec![from];
            while let Some(v) = todo.pop() {
                for w in adj.get(&v).into_iter().flatten() {
                    if seen.insert(*w) {
                        todo.push(*w);
                    }
                }
            }
            seen
        };
        let long = |x: (usize, usize), y: (usize, usize)| {
            adj.get(&x).into_iter().flatten().filter(|w| **w != y).any(|w| reach(*w).contains(&y))
        };
        !long((0, a), (0, b)) && !long((0, b), (0, a))
    }

    /// The node graph plus one vertex per pending alternative subgoal, with
    /// edges from every node that may become its ancestor and to its pending
    /// children. Vertices are `(0, node)` and `(1, subgoal)`.
    fn augmented(&self, markers: &MarkerTable) -> BTreeMap<(usize, usize), BTreeSet<(usize, usize)>> {
        let mut adj: BTreeMap<(usize, usize), BTreeSet<(usize, usize)>> = BTreeMap::new();
        for (p, c) in self.graph.edges() {
            adj.entry((0, p)).or_default().insert((0, c));
        }
        for (g, sub) in self.subgoals.iter().enumerate() {
            let Some(rv) = sub.alt() else { continue };
            for (id, node) in self.graph.nodes() {
                if node.members.iter().any(|m| markers.may_feed(m.predicate(), rv.predicate())) {
                    adj.entry((0, id)).or_default().insert((1, g));
                }
            }
            for c in &sub.pending_children {
                adj.entry((1, g)).or_default().insert((0, self.graph.resolve(*c)));
            }
        }
        adj
    }

    pub fn multiply(&self, a: NodeId, b: NodeId, markers: &MarkerTable) -> Result<SearchState<T>, SearchError> {
        if !self.can_multiply(a, b, markers) {
            return Err(SearchError::Precondition(format!("multiply {a} {b}")));
        }
        let (a, b) = (self.graph.resolve(a), self.graph.resolve(b));
        let mut next = self.clone();
        next.graph.merge(a, b)?;
        next.history.push(Action::Multiply { a, b });
        Ok(next)
    }

    /// Re-applies a recorded action.
    pub fn apply(&self, action: &Action, ctx: &Context) -> Result<SearchState<T>, SearchError> {
        let expansion = match action {
            Action::FindProbDependency { goal, .. } => self.find_prob_dependency(*goal, ctx)?,
            Action::ProveGoal { goal, .. } => self.prove_goal(*goal, ctx),
            Action::FindInGraph { goal, .. } => self.find_in_graph(*goal),
            Action::Multiply { a, b } => return self.multiply(*a, *b, &ctx.markers),
            Action::Margin { rv } => return self.margin(rv, ctx),
        };
        expansion
            .successors
            .into_iter()
            .find(|(a, _)| a == action)
            .map(|(_, s)| s)
            .ok_or_else(|| SearchError::Precondition(format!("{action} does not apply")))
    }

    /// Invariants that must hold after every action.
    pub fn check(&self) -> Result<(), String> {
        self.graph.check()?;
        if let Some(rv) = self.graph.indexed().map(|(rv, _)| rv).find(|rv| self.marginalized.contains(*rv)) {
            return Err(format!("{rv} is both indexed and marginalized"));
        }
        Ok(())
    }
}
