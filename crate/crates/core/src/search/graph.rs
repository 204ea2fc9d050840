use std::collections::{BTreeMap, BTreeSet};

use crate::factor::{Factor, FactorError, GroundRv};
use crate::scalar::Scalar;

pub type NodeId = usize;

/// A graph vertex: the random variables whose tables were multiplied into it.
#[derive(Clone, Debug, PartialEq)]
pub struct Node<T> {
    pub members: BTreeSet<GroundRv>,
    pub factor: Factor<T>,
}

/// The network under construction.
///
/// Node edges run parent to child. Besides the node graph it keeps the
/// variable-level structure (each variable's parents as declared by its
/// dependency statement), which survives merges and margins.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialGraph<T> {
    nodes: BTreeMap<NodeId, Node<T>>,
    edges: BTreeSet<(NodeId, NodeId)>,
    rv_index: BTreeMap<GroundRv, NodeId>,
    forward: BTreeMap<NodeId, NodeId>,
    rv_parents: BTreeMap<GroundRv, Vec<GroundRv>>,
    rv_order: Vec<GroundRv>,
    next_id: NodeId,
}

impl<T> Default for PartialGraph<T> {
    fn default() -> Self {
        PartialGraph {
            nodes: BTreeMap::new(),
            edges: BTreeSet::new(),
            rv_index: BTreeMap::new(),
            forward: BTreeMap::new(),
            rv_parents: BTreeMap::new(),
            rv_order: Vec::new(),
            next_id: 0,
        }
    }
}

impl<T: Scalar> PartialGraph<T> {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Node<T>)> {
        self.nodes.iter().map(|(k, v)| (*k, v))
    }

    pub fn node(&self, id: NodeId) -> Option<&Node<T>> {
        self.nodes.get(&self.resolve(id))
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.edges.iter().copied()
    }

    /// Follows merge forwarding to the live node that absorbed `id`.
    pub fn resolve(&self, id: NodeId) -> NodeId {
        let mut id = id;
        while let Some(next) = self.forward.get(&id) {
            id = *next;
        }
        id
    }

    /// The node a live (not yet marginalized) variable is indexed under.
    pub fn home(&self, rv: &GroundRv) -> Option<NodeId> {
        self.rv_index.get(rv).copied()
    }

    pub fn indexed(&self) -> impl Iterator<Item = (&GroundRv, NodeId)> {
        self.rv_index.iter().map(|(k, v)| (k, *v))
    }

    /// Every variable ever added, in order of addition.
    pub fn variables(&self) -> &[GroundRv] {
        &self.rv_order
    }

    pub fn rv_parents(&self, rv: &GroundRv) -> &[GroundRv] {
        self.rv_parents.get(rv).map_or(&[], Vec::as_slice)
    }

    pub fn rv_children<'a>(&'a self, rv: &'a GroundRv) -> impl Iterator<Item = &'a GroundRv> + 'a {
        self.rv_parents.iter().filter(move |(_, ps)| ps.contains(rv)).map(|(c, _)| c)
    }

    /// Variables reachable from `rv` along child links, excluding `rv` unless on a cycle.
    pub fn rv_descendants(&self, rv: &GroundRv) -> BTreeSet<GroundRv> {
        let mut out = BTreeSet::new();
        let mut todo = vec![rv.clone()];
        while let Some(r) = todo.pop() {
            for c in self.rv_children(&r) {
                if out.insert(c.clone()) {
                    todo.push(c.clone());
                }
            }
        }
        out
    }

    pub fn parents(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.edges.iter().filter(move |(_, c)| *c == id).map(|(p, _)| *p)
    }

    pub fn children(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.edges.iter().filter(move |(p, _)| *p == id).map(|(_, c)| *c)
    }

    /// Nodes reachable from `from` (inclusive).
    pub fn reachable(&self, from: NodeId) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::from([from]);
        let mut todo = vec![from];
        while let Some(n) = todo.pop() {
            for c in self.children(n) {
                if out.insert(c) {
                    todo.push(c);
                }
            }
        }
        out
    }

    /// True when a path of two or more edges leads from `a` to `b`.
    pub fn long_path(&self, a: NodeId, b: NodeId) -> bool {
        self.children(a).filter(|c| *c != b).any(|c| self.reachable(c).contains(&b))
    }

    /// Live nodes whose factor mentions `rv`.
    pub fn nodes_with(&self, rv: &GroundRv) -> Vec<NodeId> {
        self.nodes.iter().filter(|(_, n)| n.factor.contains(rv)).map(|(k, _)| *k).collect()
    }

    pub fn total_cells(&self) -> usize {
        self.nodes.values().map(|n| n.factor.len()).sum()
    }

    pub(crate) fn add_node(
        &mut self,
        rv: GroundRv,
        parents: Vec<GroundRv>,
        factor: Factor<T>,
        children: impl IntoIterator<Item = NodeId>,
    ) -> NodeId {
        let id = self.next_id;
        self.next_id += 1;
        self.rv_index.insert(rv.clone(), id);
        self.rv_parents.insert(rv.clone(), parents);
        self.rv_order.push(rv.clone());
        self.nodes.insert(id, Node { members: BTreeSet::from([rv]), factor });
        self.add_edges(id, children);
        id
    }

    /// Adds `from -> c` for each child, after forwarding; self-edges are dropped.
    pub(crate) fn add_edges(&mut self, from: NodeId, children: impl IntoIterator<Item = NodeId>) {
        let from = self.resolve(from);
        for c in children {
            let c = self.resolve(c);
            if c != from {
                self.edges.insert((from, c));
            }
        }
    }

    pub(crate) fn merge(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, FactorError> {
        let (a, b) = (self.resolve(a), self.resolve(b));
        let na = self.nodes.remove(&a).expect("live node");
        let nb = self.nodes.remove(&b).expect("live node");
        let factor = na.factor.multiply(&nb.factor)?;
        let id = self.next_id;
        self.next_id += 1;
        let members: BTreeSet<GroundRv> = na.members.union(&nb.members).cloned().collect();
        for m in &members {
            self.rv_index.insert(m.clone(), id);
        }
        let retarget = |n: NodeId| if n == a || n == b { id } else { n };
        self.edges = self
            .edges
            .iter()
            .map(|(p, c)| (retarget(*p), retarget(*c)))
            .filter(|(p, c)| p != c)
            .collect();
        self.forward.insert(a, id);
        self.forward.insert(b, id);
        self.nodes.insert(id, Node { members, factor });
        Ok(id)
    }

    pub(crate) fn sum_out(&mut self, rv: &GroundRv) -> Result<NodeId, FactorError> {
        let id = self.rv_index.remove(rv).ok_or_else(|| FactorError::MissingDim(rv.to_string()))?;
        let node = self.nodes.get_mut(&id).expect("indexed node is live");
        node.factor = node.factor.marginalize(rv)?;
        node.members.remove(rv);
        Ok(id)
    }

    /// Structural invariants: members partition the index, edges join live
    /// nodes, and the node graph has no cycle.
    pub fn check(&self) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        for (id, n) in &self.nodes {
            for m in &n.members {
                if !seen.insert(m) {
                    return Err(format!("{m} is a member of two nodes"));
                }
                if self.rv_index.get(m) != Some(id) {
                    return Err(format!("{m} is not indexed under node {id}"));
                }
            }
        }
        if seen.len() != self.rv_index.len() {
            return Err("index names a variable no node holds".into());
        }
        for (p, c) in &self.edges {
            if !self.nodes.contains_key(p) || !self.nodes.contains_key(c) {
                return Err(format!("edge {p}->{c} touches a dead node"));
            }
        }
        for id in self.nodes.keys() {
            if self.children(*id).any(|c| self.reachable(c).contains(id)) {
                return Err(format!("node {id} lies on a cycle"));
            }
        }
        Ok(())
    }
}
