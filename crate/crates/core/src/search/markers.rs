use std::collections::{BTreeMap, BTreeSet};

use crate::kb::{KnowledgeBase, Query};

/// Predicate-level dependency graph with marks passed from the query.
///
/// Each dependency statement draws an edge from its head predicate to every
/// alternative-outcome predicate in its body, ignoring arguments. Query
/// predicates are marked and marks flow from children to possible parents;
/// a visited set cuts cycles. A predicate's expected child count is the
/// number of marked predicates that may list it as a parent.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkerTable {
    parents: BTreeMap<String, BTreeSet<String>>,
    marked: BTreeSet<String>,
    expected: BTreeMap<String, usize>,
}

impl MarkerTable {
    pub fn build(kb: &KnowledgeBase, q: &Query) -> Self {
        let mut parents: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (_, dep) in kb.dependencies() {
            let entry = parents.entry(dep.head.predicate.clone()).or_default();
            entry.extend(dep.alt_parents().map(|a| a.predicate.clone()));
        }
        let mut marked = BTreeSet::new();
        let mut todo: Vec<String> = std::iter::once(&q.hypothesis)
            .chain(q.evidence.iter().map(|e| &e.atom))
            .map(|a| a.predicate.clone())
            .collect();
        while let Some(p) = todo.pop() {
            if marked.insert(p.clone()) {
                todo.extend(parents.get(&p).into_iter().flatten().cloned());
            }
        }
        let mut expected: BTreeMap<String, usize> = BTreeMap::new();
        for child in &marked {
            for p in parents.get(child).into_iter().flatten() {
                *expected.entry(p.clone()).or_default() += 1;
            }
        }
        MarkerTable { parents, marked, expected }
    }

    pub fn is_marked(&self, predicate: &str) -> bool {
        self.marked.contains(predicate)
    }

    /// Upper bound on the distinct child predicates a variable of `predicate` can acquire.
    pub fn expected_children(&self, predicate: &str) -> usize {
        self.expected.get(predicate).copied().unwrap_or(0)
    }

    /// Predicates that can become ancestors of a `predicate` variable.
    pub fn ancestors(&self, predicate: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut todo: Vec<&String> = self.parents.get(predicate).into_iter().flatten().collect();
        while let Some(p) = todo.pop() {
            if out.insert(p.clone()) {
                todo.extend(self.parents.get(p).into_iter().flatten());
            }
        }
        out
    }

    /// True when expanding a `pending` subgoal could add a child under a `predicate` variable.
    pub fn may_feed(&self, predicate: &str, pending: &str) -> bool {
        predicate == pending || self.ancestors(pending).contains(predicate)
    }
}
