//! The construction/evaluation agenda search.
//!
//! A state holds the pending subgoals, the substitution, the partial network
//! and the set of marginalized variables. Construction operators grow the
//! network from dependency statements; evaluation operators multiply nodes
//! and sum variables out. The marker gate keeps a variable from being summed
//! out while it may still acquire children.

mod engine;
mod graph;
mod markers;
mod policy;
mod state;

pub use engine::{replay, run_query, run_query_traced, trace_lines, Failed, RunConfig, RunResult, Stats, TraceRecord};
pub use graph::{Node, NodeId, PartialGraph};
pub use markers::MarkerTable;
pub use policy::{Move, Policy, ScriptStep};
pub use state::{Action, Context, Expansion, Goal, MarginRefusal, SearchState, SubGoal};

use crate::factor::FactorError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error("query unanswerable: {0}")]
    Unanswerable(String),
    #[error("evidence has probability zero")]
    InconsistentEvidence,
    #[error("resource cap: {0}")]
    ResourceCap(String),
    #[error("several dependency statements apply to `{0}`")]
    Ambiguous(String),
    #[error("dependency table for `{0}` is incomplete")]
    IncompleteTable(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("scripted step does not apply: {0}")]
    Script(String),
    #[error("bad trace: {0}")]
    Trace(String),
    #[error(transparent)]
    Factor(#[from] FactorError),
}

/// Runs construction only, to the point where no subgoal remains.
pub fn construct<T: crate::scalar::Scalar>(
    kb: &crate::kb::KnowledgeBase,
    q: &crate::kb::Query,
    depth: usize,
) -> Result<SearchState<T>, SearchError> {
    let config = RunConfig { policy: Policy::ConstructionFirst, depth, ..RunConfig::default() };
    let ctx = config.context(kb, q);
    let mut stack: Vec<SearchState<T>> = vec![SearchState::initial(q)];
    while let Some(s) = stack.pop() {
        if s.marg_error().is_some() {
            continue;
        }
        let Some(g) = (0..s.subgoals().len()).next() else {
            return Ok(s);
        };
        let expansion = if s.find_in_graph_target(g).is_some() {
            s.find_in_graph(g)
        } else if matches!(s.subgoals()[g].goal, Goal::Plain(_)) {
            s.prove_goal(g, &ctx)
        } else {
            s.find_prob_dependency(g, &ctx)?
        };
        stack.extend(expansion.successors.into_iter().rev().map(|(_, s)| s));
    }
    if ctx.truncated() {
        return Err(SearchError::ResourceCap(format!("proof depth bound {depth} reached")));
    }
    Err(SearchError::Unanswerable("construction found no complete network".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::Factor;
    use crate::kb::{parse_kb, parse_query};
    use crate::oracle::{exact_posterior, ground_network};
    use crate::scoring::score_default;

    const CANCER: &str = include_str!("../../fixtures/cancer.akb");
    const TWO_CHILDREN: &str = include_str!("../../fixtures/two_children.akb");
    const CANCER_Q: &str = "cancer(?a,SAM) | headache(YES,SAM), coma(YES,SAM)";
    const TWO_Q: &str = "season(?s,ANN) | rash(YES,ANN)";

    fn script() -> Vec<ScriptStep> {
        use ScriptStep::*;
        let s = |x: &str| x.to_owned();
        vec![
            FindProbDependency(s("cancer")),
            FindProbDependency(s("headache")),
            FindProbDependency(s("tumor")),
            FindInGraph(s("cancer")),
            Multiply(s("headache"), s("tumor")),
            Margin(s("headache")),
            FindProbDependency(s("coma")),
            FindInGraph(s("tumor")),
            FindProbDependency(s("calcium")),
            FindInGraph(s("cancer")),
            Multiply(s("calcium"), s("coma")),
            Margin(s("calcium")),
            Multiply(s("tumor"), s("coma")),
            Margin(s("tumor")),
            Multiply(s("cancer"), s("coma")),
            Margin(s("coma")),
        ]
    }

    #[test]
    fn cancer_default_matches_oracle() {
        let kb = parse_kb(CANCER).unwrap();
        let q = parse_query(CANCER_Q, &kb).unwrap();
        let r = run_query::<f64>(&kb, &q, &RunConfig::default()).unwrap();
        let p = r.posterior.unwrap();
        assert!((p.values()[0] - 0.4296875).abs() < 1e-12, "{:?}", p.values());
        assert_eq!(r.stats.dead_branches, 0);
        let exact = run_query::<num_rational::Rational64>(&kb, &q, &RunConfig::default()).unwrap();
        assert_eq!(exact.posterior.unwrap().values()[0], num_rational::Rational64::new(55, 128));
    }

    #[test]
    fn scripted_walkthrough_reaches_terminal() {
        let kb = parse_kb(CANCER).unwrap();
        let q = parse_query(CANCER_Q, &kb).unwrap();
        let config = RunConfig { policy: Policy::Scripted(script()), ..RunConfig::default() };
        let r = run_query::<f64>(&kb, &q, &config).unwrap();
        let names: Vec<&str> = r.trace.iter().map(|t| t.action.as_str()).collect();
        assert_eq!(names.len(), 17, "{names:?}");
        assert_eq!(names.last(), Some(&"answer"));
        assert!(!names.contains(&"fail") && !names.contains(&"backtrack"));
        assert!((r.posterior.unwrap().values()[0] - 0.4296875).abs() < 1e-12);
    }

    #[test]
    fn first_step_scores_the_prior() {
        let kb = parse_kb(CANCER).unwrap();
        let q = parse_query(CANCER_Q, &kb).unwrap();
        let r = run_query::<f64>(&kb, &q, &RunConfig { max_steps: Some(1), ..RunConfig::default() }).unwrap();
        assert!(r.partial);
        assert_eq!(r.posterior.unwrap().values(), &[0.2, 0.8]);
        let none = run_query::<f64>(&kb, &q, &RunConfig { max_steps: Some(0), ..RunConfig::default() }).unwrap();
        assert!(none.posterior.is_none());
    }

    #[test]
    fn gate_lets_headache_go_but_holds_tumor() {
        let kb = parse_kb(CANCER).unwrap();
        let q = parse_query(CANCER_Q, &kb).unwrap();
        let config = RunConfig { policy: Policy::Scripted(script()[..4].to_vec()), max_steps: Some(4), ..RunConfig::default() };
        let r = run_query::<f64>(&kb, &q, &config).unwrap();
        let ctx = config.context(&kb, &q);
        let find = |p: &str| r.state.graph().variables().iter().find(|v| v.predicate() == p).unwrap().clone();
        assert!(r.state.margin_safe(&find("headache"), &ctx.markers));
        assert!(!r.state.margin_safe(&find("tumor"), &ctx.markers));
    }

    #[test]
    fn early_margin_fails_without_gate() {
        let kb = parse_kb(TWO_CHILDREN).unwrap();
        let q = parse_query(TWO_Q, &kb).unwrap();
        let oracle: Factor<f64> = exact_posterior(&ground_network(&kb, &q).unwrap(), &q).unwrap();
        match run_query::<f64>(&kb, &q, &RunConfig { gate: false, ..RunConfig::default() }) {
            Err(SearchError::Unanswerable(why)) => assert!(why.contains("flu(ANN) was marginalized"), "{why}"),
            other => panic!("expected a marginalization failure, got {:?}", other.map(|r| r.trace)),
        }
        let on = run_query::<f64>(&kb, &q, &RunConfig::default()).unwrap();
        assert_eq!(on.stats.dead_branches, 0);
        assert!(on.posterior.unwrap().max_abs_diff(&oracle).unwrap() < 1e-12);
    }

    #[test]
    fn replay_rebuilds_final_state() {
        let kb = parse_kb(CANCER).unwrap();
        let q = parse_query(CANCER_Q, &kb).unwrap();
        let config = RunConfig { policy: Policy::Random(3), score: Some(crate::scoring::ScoreMode::Interval), ..RunConfig::default() };
        let r = run_query::<f64>(&kb, &q, &config).unwrap();
        let parsed: Vec<TraceRecord> = trace_lines(&r.trace).lines().map(|l| TraceRecord::parse(l).unwrap()).collect();
        assert_eq!(parsed, r.trace);
        let s = replay::<f64>(&kb, &q, &config, &parsed).unwrap();
        assert_eq!(s, r.state);
    }

    #[test]
    fn random_policy_is_seeded() {
        let kb = parse_kb(CANCER).unwrap();
        let q = parse_query(CANCER_Q, &kb).unwrap();
        let config = RunConfig { policy: Policy::Random(7), ..RunConfig::default() };
        let a = run_query::<f64>(&kb, &q, &config).unwrap();
        let b = run_query::<f64>(&kb, &q, &config).unwrap();
        assert_eq!(trace_lines(&a.trace), trace_lines(&b.trace));
        assert!((a.posterior.unwrap().values()[0] - 0.4296875).abs() < 1e-12);
    }

    #[test]
    fn partial_default_score_matches_fragment() {
        let kb = parse_kb(CANCER).unwrap();
        let q = parse_query(CANCER_Q, &kb).unwrap();
        let s = construct::<f64>(&kb, &q, crate::deduce::DEFAULT_DEPTH).unwrap();
        assert_eq!(s.graph().len(), 5);
        let p = score_default(&s, &q).unwrap();
        assert!((p.values()[0] - 0.4296875).abs() < 1e-12);
    }
}
