use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::NodeId;
use super::state::{Context, Goal, MarginRefusal, SearchState};
use crate::factor::GroundRv;
use crate::scalar::Scalar;

/// How the agenda picks the next action.
#[derive(Clone, Debug, PartialEq)]
pub enum Policy {
    /// Safe evaluation first, then find-in-graph, prove-goal and
    /// find-prob-dependency over subgoals in insertion order.
    Default,
    /// All construction before any evaluation.
    ConstructionFirst,
    /// Uniform choice among applicable actions, seeded.
    Random(u64),
    /// A fixed opening, continued by [`Policy::Default`].
    Scripted(Vec<ScriptStep>),
}

/// One scripted move. Names match a variable by predicate or by its full text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScriptStep {
    FindProbDependency(String),
    FindInGraph(String),
    ProveGoal(String),
    Multiply(String, String),
    Margin(String),
}

/// What the policy wants done next.
#[derive(Clone, Debug, PartialEq)]
pub enum Move {
    FindInGraph(usize),
    ProveGoal(usize),
    FindProbDependency(usize),
    Multiply(NodeId, NodeId),
    Margin(GroundRv),
    /// No action applies and the state is not terminal.
    Stuck(String),
    /// A scripted step does not apply.
    Invalid(String),
}

pub(crate) struct Chooser {
    policy: Policy,
    rng: ChaCha8Rng,
    script_pos: usize,
}

fn names(rv: &GroundRv, name: &str) -> bool {
    rv.predicate() == name || rv.to_string() == name
}

impl Chooser {
    pub fn new(policy: Policy) -> Self {
        let seed = match policy {
            Policy::Random(s) => s,
            _ => 0,
        };
        Chooser { policy, rng: ChaCha8Rng::seed_from_u64(seed), script_pos: 0 }
    }

    pub fn choose<T: Scalar>(&mut self, s: &SearchState<T>, ctx: &Context) -> Move {
        match &self.policy {
            Policy::Default => evaluation(s, ctx).or_else(|| construction(s)).unwrap_or_else(|| fallback(s, ctx)),
            Policy::ConstructionFirst => construction(s).or_else(|| evaluation(s, ctx)).unwrap_or_else(|| fallback(s, ctx)),
            Policy::Random(_) => {
                let moves = all_moves(s, ctx);
                moves.choose(&mut self.rng).cloned().unwrap_or_else(|| Move::Stuck("no applicable action".into()))
            }
            Policy::Scripted(steps) => match steps.get(self.script_pos) {
                Some(step) => {
                    self.script_pos += 1;
                    scripted(step, s, ctx)
                }
                None => evaluation(s, ctx).or_else(|| construction(s)).unwrap_or_else(|| fallback(s, ctx)),
            },
        }
    }
}

fn construction<T: Scalar>(s: &SearchState<T>) -> Option<Move> {
    let goals = s.subgoals();
    if let Some(g) = (0..goals.len()).find(|g| s.find_in_graph_target(*g).is_some()) {
        return Some(Move::FindInGraph(g));
    }
    if let Some(g) = goals.iter().position(|sg| matches!(sg.goal, Goal::Plain(_))) {
        return Some(Move::ProveGoal(g));
    }
    goals.iter().position(|sg| sg.alt().is_some()).map(Move::FindProbDependency)
}

fn cells(dims: &[GroundRv]) -> usize {
    dims.iter().map(GroundRv::cardinality).product()
}

fn merged_dims<T: Scalar>(s: &SearchState<T>, nodes: &[NodeId]) -> Vec<GroundRv> {
    let mut dims: Vec<GroundRv> = Vec::new();
    for n in nodes {
        for d in s.graph().node(*n).expect("live").factor.dims() {
            if !dims.contains(d) {
                dims.push(d.clone());
            }
        }
    }
    dims
}

/// The cheapest mergeable pair among `nodes`, by product size.
fn best_pair<T: Scalar>(s: &SearchState<T>, ctx: &Context, nodes: &[NodeId]) -> Option<(NodeId, NodeId)> {
    let mut best: Option<(usize, NodeId, NodeId)> = None;
    for (i, a) in nodes.iter().enumerate() {
        for b in &nodes[i + 1..] {
            let size = cells(&merged_dims(s, &[*a, *b]));
            if best.is_none_or(|(c, _, _)| size < c) && s.can_multiply(*a, *b, &ctx.markers) {
                best = Some((size, *a, *b));
            }
        }
    }
    best.map(|(_, a, b)| (a, b))
}

/// The margin (or the multiply leading to it) that most reduces total cell count.
fn evaluation<T: Scalar>(s: &SearchState<T>, ctx: &Context) -> Option<Move> {
    let mut best: Option<(i64, Move)> = None;
    for rv in s.graph().variables() {
        match s.margin_allowed(rv, ctx) {
            Ok(()) | Err(MarginRefusal::Shared(_)) => {}
            Err(_) => continue,
        }
        let holders = s.graph().nodes_with(rv);
        let before: usize = holders.iter().map(|n| s.graph().node(*n).expect("live").factor.len()).sum();
        let mut after = merged_dims(s, &holders);
        after.retain(|d| d != rv);
        let gain = before as i64 - cells(&after) as i64;
        if best.as_ref().is_some_and(|(g, _)| gain <= *g) {
            continue;
        }
        let mv = match holders.as_slice() {
            [_] => Move::Margin(rv.clone()),
            _ => match best_pair(s, ctx, &holders) {
                Some((a, b)) => Move::Multiply(a, b),
                None => continue,
            },
        };
        best = Some((gain, mv));
    }
    best.map(|(_, m)| m)
}

/// With construction over and no margin available, merge some pair of nodes.
fn fallback<T: Scalar>(s: &SearchState<T>, ctx: &Context) -> Move {
    if !s.construction_done() {
        return Move::Stuck("no applicable action".into());
    }
    let ids: Vec<NodeId> = s.graph().nodes().map(|(id, _)| id).collect();
    match best_pair(s, ctx, &ids) {
        Some((a, b)) => Move::Multiply(a, b),
        None => Move::Stuck("evaluation cannot reach a single node over the hypothesis".into()),
    }
}

fn all_moves<T: Scalar>(s: &SearchState<T>, ctx: &Context) -> Vec<Move> {
    let mut out = Vec::new();
    for (g, sg) in s.subgoals().iter().enumerate() {
        match &sg.goal {
            Goal::Plain(_) => out.push(Move::ProveGoal(g)),
            Goal::Alt(_) if s.find_in_graph_target(g).is_some() => out.push(Move::FindInGraph(g)),
            Goal::Alt(_) => out.push(Move::FindProbDependency(g)),
        }
    }
    for rv in s.graph().variables() {
        if s.margin_allowed(rv, ctx).is_ok() {
            out.push(Move::Margin(rv.clone()));
        }
    }
    let ids: Vec<NodeId> = s.graph().nodes().map(|(id, _)| id).collect();
    for (i, a) in ids.iter().enumerate() {
        for b in &ids[i + 1..] {
            if s.can_multiply(*a, *b, &ctx.markers) {
                out.push(Move::Multiply(*a, *b));
            }
        }
    }
    out
}

fn scripted<T: Scalar>(step: &ScriptStep, s: &SearchState<T>, ctx: &Context) -> Move {
    let goal = |name: &str| {
        s.subgoals().iter().position(|sg| match &sg.goal {
            Goal::Alt(rv) => names(rv, name),
            Goal::Plain(a) => a.predicate == name || a.to_string() == name,
        })
    };
    let indexed = |name: &str| s.graph().indexed().find(|(rv, _)| names(rv, name)).map(|(rv, id)| (rv.clone(), id));
    let invalid = || Move::Invalid(format!("{step:?}"));
    match step {
        ScriptStep::FindProbDependency(n) => match goal(n) {
            Some(g) if s.find_in_graph_target(g).is_none() => Move::FindProbDependency(g),
            _ => invalid(),
        },
        ScriptStep::FindInGraph(n) => match goal(n) {
            Some(g) if s.find_in_graph_target(g).is_some() => Move::FindInGraph(g),
            _ => invalid(),
        },
        ScriptStep::ProveGoal(n) => goal(n).map_or_else(invalid, Move::ProveGoal),
        ScriptStep::Multiply(a, b) => match (indexed(a), indexed(b)) {
            (Some((_, x)), Some((_, y))) => Move::Multiply(x, y),
            _ => invalid(),
        },
        ScriptStep::Margin(n) => match indexed(n) {
            Some((rv, _)) if s.margin_allowed(&rv, ctx).is_ok() => Move::Margin(rv),
            _ => invalid(),
        },
    }
}
