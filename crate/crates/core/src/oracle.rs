//! Brute-force reference inference: ground the full network a query needs,
//! then sum the joint distribution outcome by outcome.
//!
//! Uses only parsing and unification from the rest of the crate.

use std::collections::{BTreeMap, BTreeSet};

use crate::deduce::{prove_all, unify, Substitution, DEFAULT_DEPTH};
use crate::factor::{Factor, GroundRv};
use crate::kb::{AltAtom, KnowledgeBase, Query};
use crate::scalar::Scalar;

/// Largest joint table the oracle will enumerate.
pub const MAX_JOINT_CELLS: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("no applicable dependency statement for `{0}`")]
    Unanswerable(String),
    #[error("dependency cycle through `{0}`")]
    Cycle(String),
    #[error("proof depth bound exceeded while grounding `{0}`")]
    DepthExceeded(String),
    #[error("joint distribution has {cells} cells, above the cap of {MAX_JOINT_CELLS}")]
    TooLarge { cells: usize },
    #[error("evidence has probability zero")]
    ZeroEvidence,
}

/// One ground conditional table: `P(child | parents)` laid out as
/// `probs[((p0 * |p1| + p1) * ... ) * |child| + child]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundCpt {
    pub child: GroundRv,
    pub parents: Vec<GroundRv>,
    /// Index of the dependency statement it instantiates.
    pub statement: usize,
    probs: Vec<f64>,
}

impl GroundCpt {
    pub fn prob(&self, child: usize, parents: &[usize]) -> f64 {
        let mut idx = 0;
        for (p, rv) in parents.iter().zip(&self.parents) {
            idx = idx * rv.cardinality() + p;
        }
        self.probs[idx * self.child.cardinality() + child]
    }
}

/// The closed ground network relevant to a query.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundNetwork {
    /// Random variables in discovery order.
    pub rvs: Vec<GroundRv>,
    /// One table per random variable, aligned with `rvs`.
    pub cpts: Vec<GroundCpt>,
}

impl GroundNetwork {
    pub fn cpt(&self, rv: &GroundRv) -> Option<&GroundCpt> {
        self.cpts.iter().find(|c| &c.child == rv)
    }

    pub fn joint_cells(&self) -> usize {
        self.rvs.iter().fold(1usize, |acc, rv| acc.saturating_mul(rv.cardinality()))
    }
}

fn query_rvs(q: &Query) -> Vec<GroundRv> {
    std::iter::once(&q.hypothesis)
        .chain(q.evidence.iter().map(|e| &e.atom))
        .map(|a| GroundRv::from_alt(a).expect("query atoms are ground"))
        .collect()
}

/// Grounds every random variable reachable from the query through dependency
/// statements. Each variable takes the first statement (KB order) whose head
/// unifies and whose conditions have a proof; parents must then be ground.
pub fn ground_network(kb: &KnowledgeBase, q: &Query) -> Result<GroundNetwork, OracleError> {
    ground_network_with_depth(kb, q, DEFAULT_DEPTH)
}

pub fn ground_network_with_depth(kb: &KnowledgeBase, q: &Query, depth: usize) -> Result<GroundNetwork, OracleError> {
    let mut rvs: Vec<GroundRv> = Vec::new();
    let mut cpts: Vec<GroundCpt> = Vec::new();
    let mut pending: Vec<GroundRv> = query_rvs(q);
    pending.reverse();
    let mut fresh = 0usize;
    while let Some(rv) = pending.pop() {
        if rvs.contains(&rv) {
            continue;
        }
        let mut found = None;
        let mut truncated = false;
        for (index, dep) in kb.dependencies() {
            if dep.head.predicate != rv.predicate() || dep.head.args.len() != rv.args().len() {
                continue;
            }
            fresh += 1;
            let dep = dep.renamed(&format!("'{fresh}"));
            let target = AltAtom {
                args: rv.args().iter().map(|a| crate::kb::Term::constant(a.clone())).collect(),
                ..dep.head.clone()
            };
            let Some(theta) = unify(&dep.head.object_atom(), &target.object_atom(), &Substitution::new()) else {
                continue;
            };
            let conditions: Vec<_> = dep.conditions().cloned().collect();
            let proofs = prove_all(&conditions, &theta, kb, depth);
            truncated |= proofs.truncated;
            let Some(theta) = proofs.answers.into_iter().next() else {
                continue;
            };
            let parents: Option<Vec<GroundRv>> = dep
                .alt_parents()
                .map(|a| GroundRv::from_alt(&AltAtom { args: theta.apply_terms(&a.args), ..a.clone() }))
                .collect();
            let Some(parents) = parents else {
                continue;
            };
            found = Some((index, dep, parents));
            break;
        }
        let Some((index, dep, parents)) = found else {
            return Err(if truncated {
                OracleError::DepthExceeded(rv.to_string())
            } else {
                OracleError::Unanswerable(rv.to_string())
            });
        };
        let mut probs = Vec::new();
        let mut combo = vec![0usize; parents.len()];
        loop {
            let body: Vec<&str> = combo.iter().zip(&parents).map(|(i, p)| p.outcomes()[*i].as_str()).collect();
            for o in rv.outcomes() {
                probs.push(dep.probability(o, &body).ok_or_else(|| OracleError::Unanswerable(rv.to_string()))?);
            }
            if !advance(&mut combo, &parents) {
                break;
            }
        }
        for p in parents.iter().rev() {
            pending.push(p.clone());
        }
        rvs.push(rv.clone());
        cpts.push(GroundCpt { child: rv, parents, statement: index, probs });
    }
    check_acyclic(&cpts)?;
    Ok(GroundNetwork { rvs, cpts })
}

fn advance(combo: &mut [usize], rvs: &[GroundRv]) -> bool {
    for d in (0..combo.len()).rev() {
        combo[d] += 1;
        if combo[d] < rvs[d].cardinality() {
            return true;
        }
        combo[d] = 0;
    }
    false
}

fn check_acyclic(cpts: &[GroundCpt]) -> Result<(), OracleError> {
    let parents: BTreeMap<&GroundRv, &Vec<GroundRv>> = cpts.iter().map(|c| (&c.child, &c.parents)).collect();
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: BTreeMap<&GroundRv, u8> = BTreeMap::new();
    fn visit<'a>(
        rv: &'a GroundRv,
        parents: &BTreeMap<&'a GroundRv, &'a Vec<GroundRv>>,
        state: &mut BTreeMap<&'a GroundRv, u8>,
    ) -> Result<(), OracleError> {
        match state.get(rv) {
            Some(1) => return Err(OracleError::Cycle(rv.to_string())),
            Some(_) => return Ok(()),
            None => {}
        }
        state.insert(rv, 1);
        for p in parents.get(rv).into_iter().flat_map(|v| v.iter()) {
            visit(p, parents, state)?;
        }
        state.insert(rv, 2);
        Ok(())
    }
    for c in cpts {
        visit(&c.child, &parents, &mut state)?;
    }
    Ok(())
}

/// `P(hypothesis | evidence)` by summing the full joint.
pub fn exact_posterior<T: Scalar>(net: &GroundNetwork, q: &Query) -> Result<Factor<T>, OracleError> {
    let order: Vec<usize> = (0..net.rvs.len()).collect();
    exact_posterior_with_order(net, q, &order)
}

/// As [`exact_posterior`], enumerating variables in the given order
/// (a permutation of `0..net.rvs.len()`; the first varies slowest).
pub fn exact_posterior_with_order<T: Scalar>(
    net: &GroundNetwork,
    q: &Query,
    order: &[usize],
) -> Result<Factor<T>, OracleError> {
    let cells = net.joint_cells();
    if cells > MAX_JOINT_CELLS {
        return Err(OracleError::TooLarge { cells });
    }
    let hyp = GroundRv::from_alt(&q.hypothesis).expect("ground hypothesis");
    let h = net.rvs.iter().position(|r| *r == hyp).ok_or_else(|| OracleError::Unanswerable(hyp.to_string()))?;

    // evidence as required outcome index per variable; conflicting evidence can never hold
    let mut observed: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for e in &q.evidence {
        let rv = GroundRv::from_alt(&e.atom).expect("ground evidence");
        let i = net.rvs.iter().position(|r| *r == rv).ok_or_else(|| OracleError::Unanswerable(rv.to_string()))?;
        observed.entry(i).or_default().insert(rv.outcome_index(&e.outcome).expect("known outcome"));
    }

    let index_of: BTreeMap<&GroundRv, usize> = net.rvs.iter().enumerate().map(|(i, r)| (r, i)).collect();
    let parent_idx: Vec<Vec<usize>> =
        net.cpts.iter().map(|c| c.parents.iter().map(|p| index_of[p]).collect()).collect();

    let ordered: Vec<GroundRv> = order.iter().map(|&i| net.rvs[i].clone()).collect();
    let mut posterior = vec![T::zero(); hyp.cardinality()];
    let mut assignment = vec![0usize; net.rvs.len()];
    let mut odometer = vec![0usize; order.len()];
    let mut parent_vals = Vec::new();
    loop {
        for (k, &i) in order.iter().enumerate() {
            assignment[i] = odometer[k];
        }
        let consistent = observed.iter().all(|(i, outs)| outs.iter().all(|o| *o == assignment[*i]));
        if consistent {
            let mut p = T::one();
            for (i, cpt) in net.cpts.iter().enumerate() {
                parent_vals.clear();
                parent_vals.extend(parent_idx[i].iter().map(|&j| assignment[j]));
                p = p * T::from_prob(cpt.prob(assignment[i], &parent_vals));
            }
            posterior[assignment[h]] = posterior[assignment[h]] + p;
        }
        if !advance(&mut odometer, &ordered) {
            break;
        }
    }
    let total = posterior.iter().fold(T::zero(), |a, b| a + *b);
    if total <= T::zero() {
        return Err(OracleError::ZeroEvidence);
    }
    let values = posterior.into_iter().map(|v| v / total).collect();
    Ok(Factor::new(vec![hyp], values).expect("well-formed posterior"))
}
