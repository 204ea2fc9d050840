//! Answers and bounds from partial search states.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde_json::{json, Map, Value};

use crate::factor::interval::IntervalFactor;
use crate::factor::{eliminate, Factor, GroundRv};
use crate::kb::Query;
use crate::scalar::Scalar;
use crate::search::{NodeId, SearchState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScoreMode {
    Default,
    Interval,
    Correct,
}

impl ScoreMode {
    pub fn name(self) -> &'static str {
        match self {
            ScoreMode::Default => "default",
            ScoreMode::Interval => "interval",
            ScoreMode::Correct => "correct",
        }
    }
}

impl fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "default" => Ok(ScoreMode::Default),
            "interval" => Ok(ScoreMode::Interval),
            "correct" => Ok(ScoreMode::Correct),
            _ => Err(format!("unknown score mode `{s}`")),
        }
    }
}

/// A partial answer.
#[derive(Clone, Debug, PartialEq)]
pub enum Score<T> {
    Point(Factor<T>),
    Bounds(IntervalFactor<T>),
    NoAnswer,
}

/// Rounds to 10 significant digits, the precision of all printed numbers.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.9e}").parse().unwrap_or(x)
}

fn by_outcome<T: Scalar>(dims: &[GroundRv], values: &[T]) -> Value {
    let mut m = Map::new();
    if let [rv] = dims {
        for (o, v) in rv.outcomes().iter().zip(values) {
            m.insert(o.clone(), json!(round_sig(v.to_f64())));
        }
    }
    Value::Object(m)
}

/// `{"dist":{..}}` for a distribution over one variable.
pub fn dist_json<T: Scalar>(f: &Factor<T>) -> Value {
    by_outcome(f.dims(), f.values())
}

impl<T: Scalar> Score<T> {
    pub fn to_json(&self, mode: ScoreMode) -> Value {
        match self {
            Score::Point(f) => json!({"mode": mode.name(), "dist": dist_json(f)}),
            Score::Bounds(b) => json!({
                "mode": mode.name(),
                "lo": by_outcome(b.dims(), b.lo()),
                "hi": by_outcome(b.dims(), b.hi()),
            }),
            Score::NoAnswer => json!({"mode": mode.name(), "answer": null}),
        }
    }
}

fn hypothesis(q: &Query) -> GroundRv {
    GroundRv::from_alt(&q.hypothesis).expect("ground hypothesis")
}

pub fn score<T: Scalar>(mode: ScoreMode, s: &SearchState<T>, q: &Query) -> Score<T> {
    match mode {
        ScoreMode::Default => score_default(s, q).map_or(Score::NoAnswer, Score::Point),
        ScoreMode::Interval => Score::Bounds(score_interval(s, q)),
        ScoreMode::Correct => Score::Bounds(score_correct(s, q)),
    }
}

/// Nodes a pending subgoal still has to link into.
fn unlinked<T: Scalar>(s: &SearchState<T>) -> BTreeSet<NodeId> {
    let g = s.graph();
    let mut out: BTreeSet<NodeId> =
        s.subgoals().iter().flat_map(|sg| sg.pending_children.iter().map(|c| g.resolve(*c))).collect();
    for (id, node) in g.nodes() {
        if node.factor.dims().iter().any(|d| g.home(d).is_none()) {
            out.insert(id);
        }
    }
    out
}

/// Exact answer from the fully specified fragment: nodes that depend, directly
/// or through ancestors, on a pending subgoal are left out.
pub fn score_default<T: Scalar>(s: &SearchState<T>, q: &Query) -> Option<Factor<T>> {
    let h = hypothesis(q);
    let g = s.graph();
    let mut excluded = BTreeSet::new();
    for n in unlinked(s) {
        excluded.extend(g.reachable(n));
    }
    let factors: Vec<Factor<T>> =
        g.nodes().filter(|(id, _)| !excluded.contains(id)).map(|(_, n)| n.factor.clone()).collect();
    if !factors.iter().any(|f| f.contains(&h)) {
        return None;
    }
    let joint = eliminate(factors, std::slice::from_ref(&h)).ok()?;
    joint.normalize().ok()
}

/// Vacuous `[0,1]` per outcome until the state is terminal.
pub fn score_correct<T: Scalar>(s: &SearchState<T>, q: &Query) -> IntervalFactor<T> {
    let h = hypothesis(q);
    match s.answer(&h) {
        Some(Ok(f)) => IntervalFactor::from_point(&f),
        _ => IntervalFactor::vacuous(vec![h]),
    }
}

/// Bounds treating pending subgoal variables as having unknown tables.
///
/// Every table already in the graph is used as is. A subgoal variable not yet
/// in the graph gets a distribution anywhere in `[0,1]`, with no parents.
pub fn score_interval<T: Scalar>(s: &SearchState<T>, q: &Query) -> IntervalFactor<T> {
    score_interval_with(s, q, &BTreeSet::new())
}

/// As [`score_interval`], also treating the tables of `vacuous` as unknown
/// given their declared parents.
pub fn score_interval_with<T: Scalar>(s: &SearchState<T>, q: &Query, vacuous: &BTreeSet<GroundRv>) -> IntervalFactor<T> {
    let g = s.graph();
    let mut unknown: BTreeMap<GroundRv, Vec<GroundRv>> = BTreeMap::new();
    let mut known = Vec::new();
    for (_, node) in g.nodes() {
        if node.members.iter().any(|m| vacuous.contains(m)) {
            for m in &node.members {
                unknown.insert(m.clone(), g.rv_parents(m).to_vec());
            }
        } else {
            known.push(node.factor.clone());
        }
    }
    for sg in s.subgoals() {
        if let Some(rv) = sg.alt() {
            if g.home(rv).is_none() && !s.marginalized().contains(rv) {
                unknown.entry(rv.clone()).or_default();
            }
        }
    }
    interval_posterior(known, &unknown, q)
}

/// Interval posterior of the hypothesis over `known` point factors and
/// variables whose tables (given the listed parents) are unknown.
pub fn interval_posterior<T: Scalar>(
    known: Vec<Factor<T>>,
    unknown: &BTreeMap<GroundRv, Vec<GroundRv>>,
    q: &Query,
) -> IntervalFactor<T> {
    let h = hypothesis(q);
    if unknown.contains_key(&h) {
        return IntervalFactor::vacuous(vec![h]);
    }
    let mut observed: BTreeMap<GroundRv, Vec<String>> = BTreeMap::new();
    for e in &q.evidence {
        observed.entry(GroundRv::from_alt(&e.atom).expect("ground evidence")).or_default().push(e.outcome.clone());
    }
    let mut factors: Vec<IntervalFactor<T>> = known.iter().map(IntervalFactor::from_point).collect();
    let mut pending: BTreeSet<GroundRv> = BTreeSet::new();
    for (rv, parents) in unknown {
        match observed.get(rv) {
            None => {
                pending.insert(rv.clone());
            }
            Some(outs) => {
                for f in factors.iter_mut().filter(|f| f.contains(rv)) {
                    for o in outs {
                        *f = f.condition(rv, o).expect("declared outcome");
                    }
                }
                // an unknown table for an observed root only scales the joint
                if !parents.is_empty() {
                    let mut dims = vec![rv.clone()];
                    dims.extend(parents.iter().cloned());
                    let mut vac = IntervalFactor::vacuous(dims);
                    for o in outs {
                        vac = vac.condition(rv, o).expect("declared outcome");
                    }
                    factors.push(vac);
                }
            }
        }
    }
    loop {
        let mut vars: Vec<GroundRv> = factors.iter().flat_map(|f| f.dims().iter().cloned()).collect();
        vars.sort();
        vars.dedup();
        vars.retain(|v| *v != h);
        pending.retain(|p| vars.contains(p));
        let blocked = |v: &GroundRv| pending.iter().any(|p| unknown[p].contains(v));
        let bucket_cells = |v: &GroundRv| {
            let mut dims: BTreeSet<&GroundRv> = BTreeSet::new();
            for f in factors.iter().filter(|f| f.contains(v)) {
                dims.extend(f.dims());
            }
            dims.iter().map(|d| d.cardinality()).product::<usize>()
        };
        let summable = vars.iter().filter(|v| !pending.contains(*v) && !blocked(v)).min_by_key(|v| bucket_cells(v));
        let pick = match summable {
            Some(v) => Some((v.clone(), false)),
            None => vars
                .iter()
                .filter(|v| pending.contains(*v) && !blocked(v))
                .min_by_key(|v| bucket_cells(v))
                .map(|v| (v.clone(), true)),
        };
        let Some((v, bound)) = pick else { break };
        let (bucket, rest): (Vec<_>, Vec<_>) = factors.into_iter().partition(|f| f.contains(&v));
        let joint = bucket.iter().try_fold(IntervalFactor::unit(), |acc, f| acc.multiply(f)).expect("consistent dims");
        let reduced = if bound { joint.bound_out(&v) } else { joint.marginalize(&v) }.expect("present dim");
        pending.remove(&v);
        factors = rest;
        factors.push(reduced);
    }
    let joint = factors.iter().try_fold(IntervalFactor::unit(), |acc, f| acc.multiply(f)).expect("consistent dims");
    if joint.dims() != std::slice::from_ref(&h) {
        return IntervalFactor::vacuous(vec![h]);
    }
    joint.normalize().unwrap_or_else(|_| IntervalFactor::vacuous(vec![h]))
}
