use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use super::policy::{Chooser, Move, Policy};
use super::state::{Action, Context, Expansion, SearchState};
use super::SearchError;
use crate::deduce::DEFAULT_DEPTH;
use crate::factor::Factor;
use crate::kb::{KnowledgeBase, Query};
use crate::scalar::Scalar;
use crate::scoring::{dist_json, score, score_default, ScoreMode};

/// Options for [`run_query`].
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub policy: Policy,
    /// Operator applications allowed; `None` runs to completion.
    pub max_steps: Option<usize>,
    pub depth: usize,
    pub gate: bool,
    pub strict: bool,
    /// Score every trace record in this mode.
    pub score: Option<ScoreMode>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { policy: Policy::Default, max_steps: None, depth: DEFAULT_DEPTH, gate: true, strict: false, score: None }
    }
}

impl RunConfig {
    pub fn context<'a>(&self, kb: &'a KnowledgeBase, q: &'a Query) -> Context<'a> {
        Context::new(kb, q).with_depth(self.depth).with_gate(self.gate).with_strict(self.strict)
    }
}

/// One line of an anytime trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub action: String,
    pub args: Vec<Value>,
    pub subgoals: usize,
    pub nodes: usize,
    pub score: Value,
    /// Only on the final `answer` record.
    pub partial: Option<bool>,
    /// The best available answer, on the final record only.
    pub answer: Option<Value>,
}

impl TraceRecord {
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("step".into(), json!(self.step));
        m.insert("action".into(), json!(self.action));
        m.insert("args".into(), Value::Array(self.args.clone()));
        m.insert("subgoals".into(), json!(self.subgoals));
        m.insert("nodes".into(), json!(self.nodes));
        m.insert("score".into(), self.score.clone());
        if let Some(p) = self.partial {
            m.insert("partial".into(), json!(p));
        }
        if let Some(a) = &self.answer {
            m.insert("answer".into(), a.clone());
        }
        Value::Object(m)
    }

    pub fn to_line(&self) -> String {
        self.to_json().to_string()
    }

    pub fn parse(line: &str) -> Result<TraceRecord, SearchError> {
        let bad = |what: &str| SearchError::Trace(format!("{what} in `{line}`"));
        let v: Value = serde_json::from_str(line).map_err(|e| SearchError::Trace(e.to_string()))?;
        let count = |k: &str| v.get(k).and_then(Value::as_u64).map(|n| n as usize).ok_or_else(|| bad(k));
        Ok(TraceRecord {
            step: count("step")?,
            action: v.get("action").and_then(Value::as_str).ok_or_else(|| bad("action"))?.to_owned(),
            args: v.get("args").and_then(Value::as_array).ok_or_else(|| bad("args"))?.clone(),
            subgoals: count("subgoals")?,
            nodes: count("nodes")?,
            score: v.get("score").cloned().unwrap_or(Value::Null),
            partial: v.get("partial").and_then(Value::as_bool),
            answer: v.get("answer").cloned(),
        })
    }
}

/// Writes a trace as JSON lines.
pub fn trace_lines(trace: &[TraceRecord]) -> String {
    trace.iter().map(|r| r.to_line() + "\n").collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub actions: usize,
    pub backtracks: usize,
    /// Branches failed by `detect-marg-error`.
    pub marg_errors: usize,
    /// Successors dropped for creating a cycle or a malformed table.
    pub pruned: usize,
    pub dead_branches: usize,
}

#[derive(Clone, Debug)]
pub struct RunResult<T> {
    /// The exact posterior, or on early stop the default score if it has one.
    pub posterior: Option<Factor<T>>,
    pub partial: bool,
    pub state: SearchState<T>,
    pub trace: Vec<TraceRecord>,
    pub stats: Stats,
}

fn action_args(a: &Action) -> Vec<Value> {
    match a {
        Action::FindProbDependency { goal, statement, proof } => vec![json!(goal), json!(statement), json!(proof)],
        Action::ProveGoal { goal, answer } => vec![json!(goal), json!(answer)],
        Action::FindInGraph { goal, node } => vec![json!(goal), json!(node)],
        Action::Multiply { a, b } => vec![json!(a), json!(b)],
        Action::Margin { rv } => vec![json!(rv.to_string())],
    }
}

struct Recorder<'a> {
    mode: Option<ScoreMode>,
    query: &'a Query,
    trace: Vec<TraceRecord>,
}

impl Recorder<'_> {
    fn push<T: Scalar>(&mut self, action: &str, args: Vec<Value>, s: &SearchState<T>) -> usize {
        let step = self.trace.len() + 1;
        let score = self.mode.map_or(Value::Null, |m| score(m, s, self.query).to_json(m));
        self.trace.push(TraceRecord {
            step,
            action: action.to_owned(),
            args,
            subgoals: s.subgoals().len(),
            nodes: s.graph().len(),
            score,
            partial: None,
            answer: None,
        });
        step
    }
}

/// Answers `q` by interleaved construction and evaluation.
///
/// Alternatives (several statements, proofs or answers) are explored depth
/// first; a failed branch resumes from the most recent alternative.
pub fn run_query<T: Scalar>(kb: &KnowledgeBase, q: &Query, config: &RunConfig) -> Result<RunResult<T>, SearchError> {
    run_query_traced(kb, q, config).map_err(|f| f.error)
}

/// A failed run, with the trace up to the failure.
#[derive(Clone, Debug)]
pub struct Failed {
    pub error: SearchError,
    pub trace: Vec<TraceRecord>,
    pub stats: Stats,
}

/// As [`run_query`], keeping the trace when the run fails.
pub fn run_query_traced<T: Scalar>(kb: &KnowledgeBase, q: &Query, config: &RunConfig) -> Result<RunResult<T>, Failed> {
    let mut rec = Recorder { mode: config.score, query: q, trace: Vec::new() };
    let mut stats = Stats::default();
    match search(kb, q, config, &mut rec, &mut stats) {
        Ok((posterior, partial, state)) => Ok(RunResult { posterior, partial, state, trace: rec.trace, stats }),
        Err(error) => Err(Failed { error, trace: rec.trace, stats }),
    }
}

type Finish<T> = (Option<Factor<T>>, bool, SearchState<T>);

fn search<T: Scalar>(
    kb: &KnowledgeBase,
    q: &Query,
    config: &RunConfig,
    rec: &mut Recorder,
    stats: &mut Stats,
) -> Result<Finish<T>, SearchError> {
    let ctx = config.context(kb, q);
    let mut chooser = Chooser::new(config.policy.clone());
    let mut stack: Vec<(usize, Action, SearchState<T>)> = Vec::new();
    let mut current = SearchState::initial(q);
    let mut here = 0usize;

    loop {
        if let Some(answer) = current.answer(&ctx.hypothesis) {
            let posterior = answer?;
            let step = rec.trace.len() + 1;
            let score = config.score.map_or(Value::Null, |m| score(m, &current, q).to_json(m));
            rec.trace.push(TraceRecord {
                step,
                action: "answer".into(),
                args: Vec::new(),
                subgoals: 0,
                nodes: 1,
                score,
                partial: Some(false),
                answer: Some(dist_json(&posterior)),
            });
            return Ok((Some(posterior), false, current));
        }
        if config.max_steps.is_some_and(|m| stats.actions >= m) {
            let posterior = score_default(&current, q);
            let step = rec.trace.len() + 1;
            let score = config.score.map_or(Value::Null, |m| score(m, &current, q).to_json(m));
            rec.trace.push(TraceRecord {
                step,
                action: "answer".into(),
                args: Vec::new(),
                subgoals: current.subgoals().len(),
                nodes: current.graph().len(),
                score,
                partial: Some(true),
                answer: Some(posterior.as_ref().map_or(Value::Null, dist_json)),
            });
            return Ok((posterior, true, current));
        }

        let failure = if let Some(g) = current.marg_error() {
            stats.marg_errors += 1;
            rec.push("detect-marg-error", vec![json!(g)], &current);
            Some(format!("{} was marginalized before all its children were found", current.subgoals()[g].goal))
        } else {
            let mv = chooser.choose(&current, &ctx);
            let why = match &mv {
                Move::FindInGraph(g) => format!("linking {} would close a cycle", current.subgoals()[*g].goal),
                Move::ProveGoal(g) => format!("no proof of {}", current.subgoals()[*g].goal),
                Move::FindProbDependency(g) => format!("no usable dependency statement for {}", current.subgoals()[*g].goal),
                Move::Stuck(why) => why.clone(),
                _ => String::new(),
            };
            let expansion = match mv {
                Move::FindInGraph(g) => current.find_in_graph(g),
                Move::ProveGoal(g) => current.prove_goal(g, &ctx),
                Move::FindProbDependency(g) => current.find_prob_dependency(g, &ctx)?,
                Move::Multiply(a, b) => single(Action::Multiply { a, b }, current.multiply(a, b, &ctx.markers)?),
                Move::Margin(rv) => single(Action::Margin { rv: rv.clone() }, current.margin(&rv, &ctx)?),
                Move::Stuck(_) => Expansion::default(),
                Move::Invalid(step) => return Err(SearchError::Script(step)),
            };
            stats.pruned += expansion.pruned;
            let mut successors = expansion.successors.into_iter();
            match successors.next() {
                Some((action, next)) => {
                    for (a, s) in successors.rev() {
                        stack.push((here, a, s));
                    }
                    here = rec.push(action.name(), action_args(&action), &next);
                    current = next;
                    stats.actions += 1;
                    debug_assert_eq!(current.check(), Ok(()));
                    None
                }
                None => {
                    rec.push("fail", vec![json!(why)], &current);
                    Some(why)
                }
            }
        };

        if let Some(why) = failure {
            stats.dead_branches += 1;
            let Some((source, action, state)) = stack.pop() else {
                if ctx.truncated() {
                    return Err(SearchError::ResourceCap(format!("proof depth bound {} reached", ctx.depth)));
                }
                return Err(SearchError::Unanswerable(why));
            };
            stats.backtracks += 1;
            rec.push("backtrack", vec![json!(source)], &state);
            here = rec.push(action.name(), action_args(&action), &state);
            current = state;
            stats.actions += 1;
        }
    }
}

fn single<T>(action: Action, state: SearchState<T>) -> Expansion<T> {
    Expansion { successors: vec![(action, state)], pruned: 0 }
}

fn parse_action<T: Scalar>(r: &TraceRecord, s: &SearchState<T>) -> Result<Action, SearchError> {
    let bad = || SearchError::Trace(format!("malformed arguments at step {}", r.step));
    let n = |i: usize| r.args.get(i).and_then(Value::as_u64).map(|x| x as usize).ok_or_else(bad);
    Ok(match r.action.as_str() {
        "find-prob-dependency" => Action::FindProbDependency { goal: n(0)?, statement: n(1)?, proof: n(2)? },
        "prove-goal" => Action::ProveGoal { goal: n(0)?, answer: n(1)? },
        "find-in-graph" => Action::FindInGraph { goal: n(0)?, node: n(1)? },
        "multiply" => Action::Multiply { a: n(0)?, b: n(1)? },
        "margin" => {
            let name = r.args.first().and_then(Value::as_str).ok_or_else(bad)?;
            let rv = s.graph().variables().iter().find(|v| v.to_string() == name).ok_or_else(bad)?;
            Action::Margin { rv: rv.clone() }
        }
        other => return Err(SearchError::Trace(format!("unknown action `{other}`"))),
    })
}

/// Rebuilds the final state of a recorded run by re-applying its actions.
pub fn replay<T: Scalar>(kb: &KnowledgeBase, q: &Query, config: &RunConfig, trace: &[TraceRecord]) -> Result<SearchState<T>, SearchError> {
    let ctx = config.context(kb, q);
    let mut states: BTreeMap<usize, SearchState<T>> = BTreeMap::new();
    let mut current = SearchState::initial(q);
    states.insert(0, current.clone());
    for r in trace {
        match r.action.as_str() {
            "answer" => break,
            "fail" | "detect-marg-error" => {}
            "backtrack" => {
                let source = r.args.first().and_then(Value::as_u64).ok_or_else(|| SearchError::Trace("backtrack source".into()))?;
                current = states
                    .get(&(source as usize))
                    .cloned()
                    .ok_or_else(|| SearchError::Trace(format!("no state recorded at step {source}")))?;
            }
            _ => {
                let action = parse_action(r, &current)?;
                current = current.apply(&action, &ctx)?;
                states.insert(r.step, current.clone());
            }
        }
    }
    Ok(current)
}
