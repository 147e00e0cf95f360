//! The cognitive graph snapshot and its guarded operations.
//!
//! A [`CognitiveGraph`] is an immutable value: every mutation takes `&self`
//! and returns a new snapshot or an error, leaving the original untouched.
//! The guarded operations maintain the structural invariants — endpoint
//! existence, domain consistency, misconception usage rules, and per-domain
//! acyclicity of the ordering relation (`prerequisite_of` together with
//! `scaffolds`). Raw mutation that bypasses the guards lives in the changeset
//! module and is what the checks subsystem validates after the fact.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::collections::VecDeque;

use crate::model::{
    ConceptId, ConceptNode, Domain, EdgeKind, EdgeRef, ElementRef, NodeKind, PedagogicalEdge,
    Provenance,
};

/// Render a cycle as `a@D->b@D->a@D`.
pub fn render_cycle(cycle: &[ConceptId]) -> String {
    cycle.iter().map(ConceptId::canonical).collect::<Vec<_>>().join("->")
}

/// Errors from guarded graph operations and queries.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    /// A node with this id exists with different content.
    #[error("node {id} already exists with different content")]
    DuplicateNode {
        /// Offending id.
        id: ConceptId,
    },
    /// An edge with this identity exists with different provenance.
    #[error("edge {edge} already exists with different provenance")]
    DuplicateEdge {
        /// Offending edge identity.
        edge: EdgeRef,
    },
    /// An edge endpoint does not exist in the graph.
    #[error("edge {edge}: endpoint {missing} does not exist")]
    DanglingEndpoint {
        /// The edge being added.
        edge: EdgeRef,
        /// The missing endpoint.
        missing: ConceptId,
    },
    /// Endpoint domains are inconsistent with the edge kind.
    #[error("edge {edge}: {detail}")]
    DomainMismatch {
        /// The edge being added.
        edge: EdgeRef,
        /// Which endpoint broke which rule.
        detail: String,
    },
    /// A misconception node was used in a role reserved for concepts/rules,
    /// or a misconception edge targets a non-misconception node.
    #[error("edge {edge}: {detail}")]
    MisconceptionMisuse {
        /// The edge being added.
        edge: EdgeRef,
        /// Which endpoint broke which rule.
        detail: String,
    },
    /// Adding the edge would close a cycle in the domain's ordering relation.
    #[error("ordering cycle in domain {domain}: {}", render_cycle(cycle))]
    OrderingCycle {
        /// Domain whose ordering relation would become cyclic.
        domain: Domain,
        /// The cycle as a node list; first and last entries are equal.
        cycle: Vec<ConceptId>,
    },
    /// Edge endpoints must be distinct.
    #[error("edge endpoints must be distinct, got {node} twice")]
    SelfLoop {
        /// The repeated endpoint.
        node: ConceptId,
    },
    /// The referenced element is not in the graph.
    #[error("{element} not found")]
    NotFound {
        /// Rendering of the missing element.
        element: String,
    },
    /// A node can only be removed after its incident edges.
    #[error("node {id} has {count} incident edge(s); remove them first")]
    NodeHasIncidentEdges {
        /// The node targeted for removal.
        id: ConceptId,
        /// How many edges touch it.
        count: usize,
    },
    /// A transition may only connect declared domains.
    #[error("domain {domain} is not declared")]
    UnknownDomain {
        /// The undeclared domain.
        domain: Domain,
    },
    /// A domain can only be removed once nothing references it.
    #[error("domain {domain} is still referenced by nodes, edges, or transitions")]
    DomainInUse {
        /// The still-referenced domain.
        domain: Domain,
    },
    /// Path queries require both endpoints in one domain.
    #[error("path endpoints {from} and {to} are in different domains")]
    CrossDomainPath {
        /// Start endpoint.
        from: ConceptId,
        /// End endpoint.
        to: ConceptId,
    },
    /// Path queries require a positive length bound.
    #[error("max_len must be at least 1")]
    InvalidMaxLen,
}

/// An immutable snapshot of the knowledge graph.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CognitiveGraph {
    nodes: BTreeMap<ConceptId, ConceptNode>,
    edges: BTreeMap<EdgeRef, Provenance>,
    transitions: BTreeSet<(Domain, Domain)>,
    domains: BTreeSet<Domain>,
}

impl CognitiveGraph {
    /// The empty graph: no domains, nodes, edges, or transitions.
    pub fn new() -> Self {
        Self::default()
    }

    // ------------------------------------------------------------------
    // Read access
    // ------------------------------------------------------------------

    /// Look up a node by id.
    pub fn node(&self, id: &ConceptId) -> Option<&ConceptNode> {
        self.nodes.get(id)
    }

    /// All nodes in canonical id order.
    pub fn nodes(&self) -> impl Iterator<Item = &ConceptNode> {
        self.nodes.values()
    }

    /// All edges as `(identity, provenance)` pairs.
    pub fn edges(&self) -> impl Iterator<Item = (&EdgeRef, &Provenance)> {
        self.edges.iter()
    }

    /// Provenance of an edge, if present. The reference is re-normalized, so
    /// either orientation of an analogy finds the stored edge.
    pub fn edge_provenance(&self, edge: &EdgeRef) -> Option<&Provenance> {
        self.edges.get(&normalize_ref(edge))
    }

    /// Whether the edge exists (orientation-insensitive for analogies).
    pub fn has_edge(&self, edge: &EdgeRef) -> bool {
        self.edge_provenance(edge).is_some()
    }

    /// Declared domains in sorted order.
    pub fn declared_domains(&self) -> impl Iterator<Item = &Domain> {
        self.domains.iter()
    }

    /// Whether a domain has been declared.
    pub fn is_declared(&self, domain: &Domain) -> bool {
        self.domains.contains(domain)
    }

    /// Declared admissible transitions in sorted order.
    pub fn transitions(&self) -> impl Iterator<Item = &(Domain, Domain)> {
        self.transitions.iter()
    }

    /// Whether the directed transition `from -> to` is declared.
    pub fn has_transition(&self, from: &Domain, to: &Domain) -> bool {
        self.transitions.contains(&(from.clone(), to.clone()))
    }

    /// Number of nodes.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// True when the graph holds nothing at all — no domains, transitions,
    /// nodes, or edges.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
            && self.edges.is_empty()
            && self.transitions.is_empty()
            && self.domains.is_empty()
    }

    /// Number of edges.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Analogy edges incident to `id`, in canonical order.
    pub fn analogies(&self, id: &ConceptId) -> Vec<PedagogicalEdge> {
        self.edges
            .iter()
            .filter(|(r, _)| {
                matches!(r.kind, EdgeKind::AnalogousTo(_, _)) && (&r.source == id || &r.target == id)
            })
            .map(|(r, p)| PedagogicalEdge {
                kind: r.kind.clone(),
                source: r.source.clone(),
                target: r.target.clone(),
                provenance: p.clone(),
            })
            .collect()
    }

    // ------------------------------------------------------------------
    // Guarded operations
    // ------------------------------------------------------------------

    /// Add a node. Re-adding an identical node is a no-op; a different node
    /// under the same id is rejected. The node's domain is declared
    /// automatically.
    pub fn add_node(&self, node: ConceptNode) -> Result<Self, GraphError> {
        if let Some(existing) = self.nodes.get(&node.id) {
            return if *existing == node {
                Ok(self.clone())
            } else {
                Err(GraphError::DuplicateNode { id: node.id })
            };
        }
        let mut next = self.clone();
        next.domains.insert(node.id.domain().clone());
        next.nodes.insert(node.id.clone(), node);
        Ok(next)
    }

    /// Add an edge, enforcing in order: distinct endpoints, endpoint
    /// existence (source first), duplicate identity, domain consistency,
    /// misconception usage, and per-domain acyclicity for ordering kinds.
    pub fn add_edge(&self, edge: PedagogicalEdge) -> Result<Self, GraphError> {
        let edge = edge.normalized();
        let r = edge.edge_ref();
        if r.source == r.target {
            return Err(GraphError::SelfLoop { node: r.source });
        }
        for endpoint in [&r.source, &r.target] {
            if !self.nodes.contains_key(endpoint) {
                return Err(GraphError::DanglingEndpoint { edge: r.clone(), missing: endpoint.clone() });
            }
        }
        if let Some(existing) = self.edges.get(&r) {
            return if *existing == edge.provenance {
                Ok(self.clone())
            } else {
                Err(GraphError::DuplicateEdge { edge: r })
            };
        }
        self.check_edge_domains(&r)?;
        self.check_misconception_rules(&r)?;
        if let EdgeKind::PrerequisiteOf(d) | EdgeKind::Scaffolds(d) = &r.kind {
            // The new edge closes a cycle iff its source is already reachable
            // from its target through the domain's ordering relation.
            if let Some(path) = self.ordering_path(d, &r.target, &r.source) {
                let mut cycle = path;
                cycle.push(r.target.clone());
                return Err(GraphError::OrderingCycle { domain: d.clone(), cycle });
            }
        }
        let mut next = self.clone();
        next.edges.insert(r, edge.provenance);
        Ok(next)
    }

    /// Remove a node (only once no edges touch it) or an edge.
    pub fn remove_element(&self, element: &ElementRef) -> Result<Self, GraphError> {
        match element {
            ElementRef::Node(id) => {
                if !self.nodes.contains_key(id) {
                    return Err(GraphError::NotFound { element: format!("node {id}") });
                }
                let count = self.edges.keys().filter(|r| &r.source == id || &r.target == id).count();
                if count > 0 {
                    return Err(GraphError::NodeHasIncidentEdges { id: id.clone(), count });
                }
                let mut next = self.clone();
                next.nodes.remove(id);
                Ok(next)
            }
            ElementRef::Edge(r) => {
                let r = normalize_ref(r);
                if !self.edges.contains_key(&r) {
                    return Err(GraphError::NotFound { element: format!("edge {r}") });
                }
                let mut next = self.clone();
                next.edges.remove(&r);
                Ok(next)
            }
        }
    }

    /// Replace the provenance of an existing node or edge.
    pub fn update_provenance(
        &self,
        element: &ElementRef,
        provenance: Provenance,
    ) -> Result<Self, GraphError> {
        let mut next = self.clone();
        match element {
            ElementRef::Node(id) => match next.nodes.get_mut(id) {
                Some(node) => node.provenance = provenance,
                None => return Err(GraphError::NotFound { element: format!("node {id}") }),
            },
            ElementRef::Edge(r) => {
                let r = normalize_ref(r);
                match next.edges.get_mut(&r) {
                    Some(p) => *p = provenance,
                    None => return Err(GraphError::NotFound { element: format!("edge {r}") }),
                }
            }
        }
        Ok(next)
    }

    /// Declare a domain. Idempotent.
    pub fn declare_domain(&self, domain: Domain) -> Self {
        let mut next = self.clone();
        next.domains.insert(domain);
        next
    }

    /// Remove a domain declaration once nothing references it.
    pub fn remove_domain(&self, domain: &Domain) -> Result<Self, GraphError> {
        if !self.domains.contains(domain) {
            return Err(GraphError::NotFound { element: format!("domain {domain}") });
        }
        if self.domain_in_use(domain) {
            return Err(GraphError::DomainInUse { domain: domain.clone() });
        }
        let mut next = self.clone();
        next.domains.remove(domain);
        Ok(next)
    }

    /// Declare an admissible transition between two declared domains.
    /// Idempotent.
    pub fn declare_transition(&self, from: Domain, to: Domain) -> Result<Self, GraphError> {
        for d in [&from, &to] {
            if !self.domains.contains(d) {
                return Err(GraphError::UnknownDomain { domain: d.clone() });
            }
        }
        let mut next = self.clone();
        next.transitions.insert((from, to));
        Ok(next)
    }

    /// Remove a declared transition.
    pub fn remove_transition(&self, from: &Domain, to: &Domain) -> Result<Self, GraphError> {
        if !self.transitions.contains(&(from.clone(), to.clone())) {
            return Err(GraphError::NotFound { element: format!("transition {from}->{to}") });
        }
        let mut next = self.clone();
        next.transitions.remove(&(from.clone(), to.clone()));
        Ok(next)
    }

    // ------------------------------------------------------------------
    // Queries
    // ------------------------------------------------------------------

    /// All simple directed paths from `from` to `to` along the domain's
    /// ordering edges, each with at most `max_len` edges, sorted
    /// lexicographically by node sequence. When `from == to` the result is
    /// the single zero-length path `[from]`.
    pub fn enumerate_paths(
        &self,
        from: &ConceptId,
        to: &ConceptId,
        max_len: usize,
    ) -> Result<Vec<Vec<ConceptId>>, GraphError> {
        if max_len == 0 {
            return Err(GraphError::InvalidMaxLen);
        }
        for endpoint in [from, to] {
            if !self.nodes.contains_key(endpoint) {
                return Err(GraphError::NotFound { element: format!("node {endpoint}") });
            }
        }
        if from.domain() != to.domain() {
            return Err(GraphError::CrossDomainPath { from: from.clone(), to: to.clone() });
        }
        let succ = self.ordering_successors(from.domain());
        let mut paths = Vec::new();
        let mut current = vec![from.clone()];
        let mut visited: BTreeSet<ConceptId> = BTreeSet::new();
        visited.insert(from.clone());
        self.paths_dfs(&succ, to, max_len, &mut current, &mut visited, &mut paths);
        paths.sort();
        Ok(paths)
    }

    /// Every node with a directed ordering path to `target`, excluding the
    /// target itself. This is the set a learner must master first.
    pub fn prerequisite_closure(&self, target: &ConceptId) -> Result<BTreeSet<ConceptId>, GraphError> {
        if !self.nodes.contains_key(target) {
            return Err(GraphError::NotFound { element: format!("node {target}") });
        }
        let domain = target.domain();
        let mut preds: BTreeMap<&ConceptId, BTreeSet<&ConceptId>> = BTreeMap::new();
        for r in self.edges.keys() {
            if let EdgeKind::PrerequisiteOf(d) | EdgeKind::Scaffolds(d) = &r.kind {
                if d == domain {
                    preds.entry(&r.target).or_default().insert(&r.source);
                }
            }
        }
        let mut closure: BTreeSet<ConceptId> = BTreeSet::new();
        let mut queue: VecDeque<&ConceptId> = VecDeque::new();
        queue.push_back(target);
        while let Some(node) = queue.pop_front() {
            if let Some(sources) = preds.get(node) {
                for &s in sources {
                    if closure.insert(s.clone()) {
                        queue.push_back(s);
                    }
                }
            }
        }
        closure.remove(target);
        Ok(closure)
    }

    // ------------------------------------------------------------------
    // Internal helpers
    // ------------------------------------------------------------------

    /// Ordering successors (prerequisite_of and scaffolds) within a domain,
    /// keyed and valued in sorted order.
    pub(crate) fn ordering_successors(
        &self,
        domain: &Domain,
    ) -> BTreeMap<ConceptId, BTreeSet<ConceptId>> {
        let mut succ: BTreeMap<ConceptId, BTreeSet<ConceptId>> = BTreeMap::new();
        for r in self.edges.keys() {
            if let EdgeKind::PrerequisiteOf(d) | EdgeKind::Scaffolds(d) = &r.kind {
                if d == domain {
                    succ.entry(r.source.clone()).or_default().insert(r.target.clone());
                }
            }
        }
        succ
    }

    /// Shortest path `from ⇝ to` over the domain's ordering relation, found
    /// by BFS with sorted adjacency so the result is deterministic. Returns
    /// the node list including both endpoints, or `None` if unreachable.
    fn ordering_path(&self, domain: &Domain, from: &ConceptId, to: &ConceptId) -> Option<Vec<ConceptId>> {
        let succ = self.ordering_successors(domain);
        let mut parent: BTreeMap<ConceptId, ConceptId> = BTreeMap::new();
        let mut queue: VecDeque<ConceptId> = VecDeque::new();
        let mut seen: BTreeSet<ConceptId> = BTreeSet::new();
        queue.push_back(from.clone());
        seen.insert(from.clone());
        while let Some(node) = queue.pop_front() {
            if &node == to {
                let mut path = vec![node.clone()];
                let mut cursor = node;
                while let Some(p) = parent.get(&cursor) {
                    path.push(p.clone());
                    cursor = p.clone();
                }
                path.reverse();
                return Some(path);
            }
            if let Some(nexts) = succ.get(&node) {
                for n in nexts {
                    if seen.insert(n.clone()) {
                        parent.insert(n.clone(), node.clone());
                        queue.push_back(n.clone());
                    }
                }
            }
        }
        None
    }

    fn paths_dfs(
        &self,
        succ: &BTreeMap<ConceptId, BTreeSet<ConceptId>>,
        to: &ConceptId,
        max_len: usize,
        current: &mut Vec<ConceptId>,
        visited: &mut BTreeSet<ConceptId>,
        paths: &mut Vec<Vec<ConceptId>>,
    ) {
        let here = current.last().expect("path is never empty").clone();
        if &here == to {
            paths.push(current.clone());
            // A simple path cannot revisit `to`, so stop extending.
            return;
        }
        if current.len() > max_len {
            // current.len() - 1 edges used; adding one more would exceed max_len.
            return;
        }
        if let Some(nexts) = succ.get(&here) {
            for n in nexts {
                if visited.insert(n.clone()) {
                    current.push(n.clone());
                    self.paths_dfs(succ, to, max_len, current, visited, paths);
                    current.pop();
                    visited.remove(n);
                }
            }
        }
    }

    fn check_edge_domains(&self, r: &EdgeRef) -> Result<(), GraphError> {
        match &r.kind {
            EdgeKind::PrerequisiteOf(d) | EdgeKind::Scaffolds(d) => {
                if r.source.domain() != d {
                    return Err(GraphError::DomainMismatch {
                        edge: r.clone(),
                        detail: format!("source {} is outside {d}", r.source),
                    });
                }
                if r.target.domain() != d {
                    return Err(GraphError::DomainMismatch {
                        edge: r.clone(),
                        detail: format!("target {} is outside {d}", r.target),
                    });
                }
            }
            EdgeKind::AnalogousTo(d1, d2) => {
                if r.source.domain() != d1 || r.target.domain() != d2 {
                    return Err(GraphError::DomainMismatch {
                        edge: r.clone(),
                        detail: format!(
                            "endpoints {} and {} do not span {d1} and {d2}",
                            r.source, r.target
                        ),
                    });
                }
            }
            EdgeKind::CommonMisconception => {}
        }
        Ok(())
    }

    fn check_misconception_rules(&self, r: &EdgeRef) -> Result<(), GraphError> {
        let kind_of = |id: &ConceptId| self.nodes.get(id).map(|n| n.kind);
        match r.kind {
            EdgeKind::CommonMisconception => {
                if kind_of(&r.target) != Some(NodeKind::Misconception) {
                    return Err(GraphError::MisconceptionMisuse {
                        edge: r.clone(),
                        detail: format!("target {} is not a misconception node", r.target),
                    });
                }
                if kind_of(&r.source) == Some(NodeKind::Misconception) {
                    return Err(GraphError::MisconceptionMisuse {
                        edge: r.clone(),
                        detail: format!("source {} is a misconception node", r.source),
                    });
                }
            }
            _ => {
                for endpoint in [&r.source, &r.target] {
                    if kind_of(endpoint) == Some(NodeKind::Misconception) {
                        return Err(GraphError::MisconceptionMisuse {
                            edge: r.clone(),
                            detail: format!("endpoint {endpoint} is a misconception node"),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn domain_in_use(&self, domain: &Domain) -> bool {
        self.nodes.keys().any(|id| id.domain() == domain)
            || self.edges.keys().any(|r| r.kind.domains().contains(&domain))
            || self.transitions.iter().any(|(a, b)| a == domain || b == domain)
    }

    // Raw access for the changeset applier and the deserializers. These
    // bypass every guard; callers are responsible for running checks.
    pub(crate) fn nodes_mut(&mut self) -> &mut BTreeMap<ConceptId, ConceptNode> {
        &mut self.nodes
    }

    pub(crate) fn edges_mut(&mut self) -> &mut BTreeMap<EdgeRef, Provenance> {
        &mut self.edges
    }

    pub(crate) fn transitions_mut(&mut self) -> &mut BTreeSet<(Domain, Domain)> {
        &mut self.transitions
    }

    pub(crate) fn domains_mut(&mut self) -> &mut BTreeSet<Domain> {
        &mut self.domains
    }
}

/// Re-normalize an edge reference built by hand (struct literal) so lookups
/// are orientation-insensitive for analogies.
fn normalize_ref(r: &EdgeRef) -> EdgeRef {
    EdgeRef::new(r.kind.clone(), r.source.clone(), r.target.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::Timestamp;

    fn d(name: &str) -> Domain {
        Domain::new(name).unwrap()
    }

    fn id(s: &str) -> ConceptId {
        ConceptId::parse(s).unwrap()
    }

    fn prov(contributor: &str) -> Provenance {
        Provenance::new(
            vec![contributor.to_string()],
            vec![],
            Timestamp::parse("2026-01-15T00:00:00Z").unwrap(),
        )
        .unwrap()
    }

    fn node(ids: &str, kind: NodeKind) -> ConceptNode {
        ConceptNode { id: id(ids), kind, description: format!("about {ids}"), provenance: prov("alice") }
    }

    fn edge(kind: EdgeKind, s: &str, t: &str) -> PedagogicalEdge {
        PedagogicalEdge { kind, source: id(s), target: id(t), provenance: prov("alice") }
    }

    /// a -> b -> c prerequisite chain in Physics.
    fn chain() -> CognitiveGraph {
        let g = CognitiveGraph::new()
            .add_node(node("a@Physics", NodeKind::Concept))
            .unwrap()
            .add_node(node("b@Physics", NodeKind::Concept))
            .unwrap()
            .add_node(node("c@Physics", NodeKind::Concept))
            .unwrap();
        g.add_edge(edge(EdgeKind::PrerequisiteOf(d("Physics")), "a@Physics", "b@Physics"))
            .unwrap()
            .add_edge(edge(EdgeKind::PrerequisiteOf(d("Physics")), "b@Physics", "c@Physics"))
            .unwrap()
    }

    #[test]
    fn operations_leave_the_original_snapshot_untouched() {
        let g = CognitiveGraph::new();
        let g2 = g.add_node(node("a@Physics", NodeKind::Concept)).unwrap();
        assert_eq!(g.node_count(), 0);
        assert_eq!(g2.node_count(), 1);
        assert!(g2.is_declared(&d("Physics")));
        assert!(!g.is_declared(&d("Physics")));
    }

    #[test]
    fn identical_re_add_is_a_no_op_and_conflicting_re_add_fails() {
        let g = CognitiveGraph::new().add_node(node("a@Physics", NodeKind::Concept)).unwrap();
        let same = g.add_node(node("a@Physics", NodeKind::Concept)).unwrap();
        assert_eq!(same, g);
        let mut conflicting = node("a@Physics", NodeKind::Concept);
        conflicting.description = "different".to_string();
        assert!(matches!(g.add_node(conflicting), Err(GraphError::DuplicateNode { .. })));
    }

    #[test]
    fn dangling_endpoints_are_rejected() {
        let g = CognitiveGraph::new().add_node(node("a@Physics", NodeKind::Concept)).unwrap();
        let err = g
            .add_edge(edge(EdgeKind::PrerequisiteOf(d("Physics")), "a@Physics", "ghost@Physics"))
            .unwrap_err();
        assert!(matches!(err, GraphError::DanglingEndpoint { missing, .. } if missing == id("ghost@Physics")));
    }

    #[test]
    fn self_loops_are_rejected() {
        let g = CognitiveGraph::new().add_node(node("a@Physics", NodeKind::Concept)).unwrap();
        let err =
            g.add_edge(edge(EdgeKind::PrerequisiteOf(d("Physics")), "a@Physics", "a@Physics")).unwrap_err();
        assert!(matches!(err, GraphError::SelfLoop { .. }));
    }

    #[test]
    fn ordering_edge_endpoints_must_match_kind_domain() {
        let g = CognitiveGraph::new()
            .add_node(node("a@Physics", NodeKind::Concept))
            .unwrap()
            .add_node(node("x@Algebra", NodeKind::Concept))
            .unwrap();
        let err = g
            .add_edge(edge(EdgeKind::PrerequisiteOf(d("Physics")), "a@Physics", "x@Algebra"))
            .unwrap_err();
        assert!(matches!(err, GraphError::DomainMismatch { .. }));
    }

    #[test]
    fn two_edge_cycle_is_rejected_with_node_list() {
        let g = CognitiveGraph::new()
            .add_node(node("a@Physics", NodeKind::Concept))
            .unwrap()
            .add_node(node("b@Physics", NodeKind::Concept))
            .unwrap()
            .add_edge(edge(EdgeKind::PrerequisiteOf(d("Physics")), "a@Physics", "b@Physics"))
            .unwrap();
        let err =
            g.add_edge(edge(EdgeKind::PrerequisiteOf(d("Physics")), "b@Physics", "a@Physics")).unwrap_err();
        match err {
            GraphError::OrderingCycle { cycle, .. } => {
                assert_eq!(cycle, vec![id("a@Physics"), id("b@Physics"), id("a@Physics")]);
            }
            other => panic!("expected OrderingCycle, got {other:?}"),
        }
    }

    #[test]
    fn scaffolds_participates_in_the_same_acyclicity_invariant() {
        let g = CognitiveGraph::new()
            .add_node(node("a@Physics", NodeKind::Concept))
            .unwrap()
            .add_node(node("b@Physics", NodeKind::Concept))
            .unwrap()
            .add_edge(edge(EdgeKind::PrerequisiteOf(d("Physics")), "a@Physics", "b@Physics"))
            .unwrap();
        let err =
            g.add_edge(edge(EdgeKind::Scaffolds(d("Physics")), "b@Physics", "a@Physics")).unwrap_err();
        assert!(matches!(err, GraphError::OrderingCycle { .. }));
    }

    #[test]
    fn same_domain_cycles_in_different_domains_are_independent() {
        // a->b in Physics plus b'->a' in Algebra shares no ordering relation.
        let g = CognitiveGraph::new()
            .add_node(node("a@Physics", NodeKind::Concept))
            .unwrap()
            .add_node(node("b@Physics", NodeKind::Concept))
            .unwrap()
            .add_node(node("a@Algebra", NodeKind::Concept))
            .unwrap()
            .add_node(node("b@Algebra", NodeKind::Concept))
            .unwrap()
            .add_edge(edge(EdgeKind::PrerequisiteOf(d("Physics")), "a@Physics", "b@Physics"))
            .unwrap();
        assert!(g
            .add_edge(edge(EdgeKind::PrerequisiteOf(d("Algebra")), "b@Algebra", "a@Algebra"))
            .is_ok());
    }

    #[test]
    fn misconception_rules() {
        let g = CognitiveGraph::new()
            .add_node(node("energy_conservation@Physics", NodeKind::Concept))
            .unwrap()
            .add_node(node("energy_is_used_up@Physics", NodeKind::Misconception))
            .unwrap()
            .add_node(node("other@Physics", NodeKind::Concept))
            .unwrap();

        // Correct usage: concept -> misconception via common_misconception.
        assert!(g
            .add_edge(edge(EdgeKind::CommonMisconception, "energy_conservation@Physics", "energy_is_used_up@Physics"))
            .is_ok());

        // Misconception edge must target a misconception node.
        assert!(matches!(
            g.add_edge(edge(EdgeKind::CommonMisconception, "energy_conservation@Physics", "other@Physics")),
            Err(GraphError::MisconceptionMisuse { .. })
        ));

        // Misconceptions may not join the ordering relation.
        assert!(matches!(
            g.add_edge(edge(
                EdgeKind::PrerequisiteOf(d("Physics")),
                "energy_is_used_up@Physics",
                "energy_conservation@Physics"
            )),
            Err(GraphError::MisconceptionMisuse { .. })
        ));
    }

    #[test]
    fn analogy_endpoints_must_span_kind_domains() {
        let g = CognitiveGraph::new()
            .add_node(node("current@Physics", NodeKind::Concept))
            .unwrap()
            .add_node(node("flow@Economics", NodeKind::Concept))
            .unwrap()
            .add_node(node("x@Physics", NodeKind::Concept))
            .unwrap();
        let kind = EdgeKind::analogous_to(d("Physics"), d("Economics")).unwrap();
        assert!(g.add_edge(edge(kind.clone(), "current@Physics", "flow@Economics")).is_ok());
        assert!(matches!(
            g.add_edge(edge(kind, "current@Physics", "x@Physics")),
            Err(GraphError::DomainMismatch { .. })
        ));
    }

    #[test]
    fn analogy_lookup_is_orientation_insensitive() {
        let kind = EdgeKind::analogous_to(d("Physics"), d("Economics")).unwrap();
        let g = CognitiveGraph::new()
            .add_node(node("current@Physics", NodeKind::Concept))
            .unwrap()
            .add_node(node("flow@Economics", NodeKind::Concept))
            .unwrap()
            .add_edge(edge(kind.clone(), "current@Physics", "flow@Economics"))
            .unwrap();
        let reversed = EdgeRef {
            kind,
            source: id("current@Physics"),
            target: id("flow@Economics"),
        };
        assert!(g.has_edge(&reversed));
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn node_removal_requires_detaching_edges_first() {
        let g = chain();
        let err = g.remove_element(&ElementRef::Node(id("b@Physics"))).unwrap_err();
        assert!(matches!(err, GraphError::NodeHasIncidentEdges { count: 2, .. }));

        let r = EdgeRef::new(EdgeKind::PrerequisiteOf(d("Physics")), id("a@Physics"), id("b@Physics"));
        let r2 = EdgeRef::new(EdgeKind::PrerequisiteOf(d("Physics")), id("b@Physics"), id("c@Physics"));
        let g = g
            .remove_element(&ElementRef::Edge(r))
            .unwrap()
            .remove_element(&ElementRef::Edge(r2))
            .unwrap();
        assert!(g.remove_element(&ElementRef::Node(id("b@Physics"))).is_ok());
    }

    #[test]
    fn transitions_require_declared_domains() {
        let g = CognitiveGraph::new().declare_domain(d("Geometry"));
        assert!(matches!(
            g.declare_transition(d("Geometry"), d("Algebra")),
            Err(GraphError::UnknownDomain { .. })
        ));
        let g = g.declare_domain(d("Algebra"));
        let g = g.declare_transition(d("Geometry"), d("Algebra")).unwrap();
        assert!(g.has_transition(&d("Geometry"), &d("Algebra")));
        // Directionality matters.
        assert!(!g.has_transition(&d("Algebra"), &d("Geometry")));
    }

    #[test]
    fn domain_removal_guards_against_references() {
        let g = chain();
        assert!(matches!(
            g.remove_domain(&d("Physics")),
            Err(GraphError::DomainInUse { .. })
        ));
        let g = CognitiveGraph::new().declare_domain(d("Spare"));
        assert_eq!(g.remove_domain(&d("Spare")).unwrap().declared_domains().count(), 0);
    }

    #[test]
    fn enumerate_paths_basics() {
        let g = chain();
        let paths = g.enumerate_paths(&id("a@Physics"), &id("c@Physics"), 16).unwrap();
        assert_eq!(paths, vec![vec![id("a@Physics"), id("b@Physics"), id("c@Physics")]]);

        // Zero-length path when endpoints coincide.
        let paths = g.enumerate_paths(&id("a@Physics"), &id("a@Physics"), 16).unwrap();
        assert_eq!(paths, vec![vec![id("a@Physics")]]);

        // No path in the reverse direction.
        assert!(g.enumerate_paths(&id("c@Physics"), &id("a@Physics"), 16).unwrap().is_empty());

        // max_len bounds the edge count.
        assert!(g.enumerate_paths(&id("a@Physics"), &id("c@Physics"), 1).unwrap().is_empty());
        assert!(matches!(
            g.enumerate_paths(&id("a@Physics"), &id("c@Physics"), 0),
            Err(GraphError::InvalidMaxLen)
        ));
    }

    #[test]
    fn enumerate_paths_orders_branches_lexicographically() {
        // a -> b -> z, a -> c -> z, a -> z: three paths with shared endpoints.
        let mut g = CognitiveGraph::new();
        for n in ["a@P", "b@P", "c@P", "z@P"] {
            g = g.add_node(node(n, NodeKind::Concept)).unwrap();
        }
        for (s, t) in [("a@P", "b@P"), ("b@P", "z@P"), ("a@P", "c@P"), ("c@P", "z@P"), ("a@P", "z@P")] {
            g = g.add_edge(edge(EdgeKind::PrerequisiteOf(d("P")), s, t)).unwrap();
        }
        let paths = g.enumerate_paths(&id("a@P"), &id("z@P"), 16).unwrap();
        assert_eq!(
            paths,
            vec![
                vec![id("a@P"), id("b@P"), id("z@P")],
                vec![id("a@P"), id("c@P"), id("z@P")],
                vec![id("a@P"), id("z@P")],
            ]
        );
    }

    #[test]
    fn prerequisite_closure_walks_ordering_edges_backwards() {
        let g = chain();
        let closure = g.prerequisite_closure(&id("c@Physics")).unwrap();
        assert_eq!(closure, BTreeSet::from([id("a@Physics"), id("b@Physics")]));
        assert!(g.prerequisite_closure(&id("a@Physics")).unwrap().is_empty());
    }

    #[test]
    fn closure_includes_scaffolds_and_ignores_other_kinds() {
        let mut g = CognitiveGraph::new();
        for (n, k) in [
            ("a@P", NodeKind::Concept),
            ("s@P", NodeKind::Concept),
            ("t@P", NodeKind::Concept),
            ("m@P", NodeKind::Misconception),
        ] {
            g = g.add_node(node(n, k)).unwrap();
        }
        g = g
            .add_edge(edge(EdgeKind::PrerequisiteOf(d("P")), "a@P", "s@P"))
            .unwrap()
            .add_edge(edge(EdgeKind::Scaffolds(d("P")), "s@P", "t@P"))
            .unwrap()
            .add_edge(edge(EdgeKind::CommonMisconception, "t@P", "m@P"))
            .unwrap();
        assert_eq!(
            g.prerequisite_closure(&id("t@P")).unwrap(),
            BTreeSet::from([id("a@P"), id("s@P")])
        );
    }
}
