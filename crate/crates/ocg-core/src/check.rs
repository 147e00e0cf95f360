//! Well-formedness checks over snapshots and changesets.
//!
//! Checks never mutate anything: they walk a graph (or the graph a changeset
//! would produce) and report findings. Each finding carries a code, the fixed
//! severity of that code, a locus naming the element at fault, and a human
//! message. A report passes when no finding is `significant` or worse;
//! `minor` findings are advisories and never block anything by themselves.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;

use crate::change::{apply_changeset, ChangeSet, ConflictKey};
use crate::graph::CognitiveGraph;
use crate::hash;
use crate::model::{ConceptId, Domain, EdgeKind, EdgeRef, NodeKind};
use crate::time::Timestamp;

/// How serious a finding is. Ordered: minor < significant < critical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    /// Advisory only; never fails a check run.
    Minor,
    /// Pedagogically unsound; fails the check run.
    Significant,
    /// Structurally corrupting; fails the check run.
    Critical,
}

impl Severity {
    /// Canonical lowercase rendering.
    pub fn render(self) -> &'static str {
        match self {
            Severity::Minor => "minor",
            Severity::Significant => "significant",
            Severity::Critical => "critical",
        }
    }

    /// Parse the canonical rendering.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "minor" => Some(Severity::Minor),
            "significant" => Some(Severity::Significant),
            "critical" => Some(Severity::Critical),
            _ => None,
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.render())
    }
}

/// What a finding is about. Variants are ordered alphabetically by rendering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FindingCode {
    /// A changeset operation could not be applied at all.
    ApplicationError,
    /// An edge references a node that does not exist.
    DanglingEndpoint,
    /// Endpoint domains are inconsistent with the edge kind.
    DomainMismatch,
    /// A misconception node or misconception edge is used incorrectly.
    MisconceptionMisuse,
    /// A domain's ordering relation contains a cycle.
    OrderingCycle,
    /// A scaffold source is not itself reachable from the domain's ordering
    /// structure (nothing leads into it), so it bridges nothing.
    ScaffoldNotBridging,
    /// Provenance is older than the configured staleness horizon.
    StaleProvenance,
    /// An element references a domain that was never declared.
    UnknownDomain,
}

impl FindingCode {
    /// Canonical rendering (the enum name).
    pub fn render(self) -> &'static str {
        match self {
            FindingCode::ApplicationError => "ApplicationError",
            FindingCode::DanglingEndpoint => "DanglingEndpoint",
            FindingCode::DomainMismatch => "DomainMismatch",
            FindingCode::MisconceptionMisuse => "MisconceptionMisuse",
            FindingCode::OrderingCycle => "OrderingCycle",
            FindingCode::ScaffoldNotBridging => "ScaffoldNotBridging",
            FindingCode::StaleProvenance => "StaleProvenance",
            FindingCode::UnknownDomain => "UnknownDomain",
        }
    }

    /// The fixed severity of this code.
    pub fn severity(self) -> Severity {
        match self {
            FindingCode::ApplicationError => Severity::Critical,
            FindingCode::OrderingCycle => Severity::Critical,
            FindingCode::DanglingEndpoint => Severity::Significant,
            FindingCode::DomainMismatch => Severity::Significant,
            FindingCode::MisconceptionMisuse => Severity::Significant,
            FindingCode::UnknownDomain => Severity::Significant,
            FindingCode::ScaffoldNotBridging => Severity::Minor,
            FindingCode::StaleProvenance => Severity::Minor,
        }
    }
}

impl fmt::Display for FindingCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.render())
    }
}

/// The element a finding points at.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Locus {
    /// A node, rendered as its canonical id.
    Node(ConceptId),
    /// An edge, rendered `kind(source->target)`.
    Edge(EdgeRef),
    /// A cycle, rendered `a->b->a`.
    Cycle(Vec<ConceptId>),
    /// A declared transition, rendered `from->to`.
    Transition(Domain, Domain),
    /// A domain, rendered as its name.
    DomainName(Domain),
    /// A changeset operation, rendered `op[i]:<element>`.
    Op {
        /// Zero-based operation index.
        index: usize,
        /// Rendering of the element the operation referenced.
        reference: String,
    },
}

impl Locus {
    /// Canonical space-free rendering used in report lines.
    pub fn render(&self) -> String {
        match self {
            Locus::Node(id) => id.canonical(),
            Locus::Edge(r) => r.compact(),
            Locus::Cycle(ids) => crate::graph::render_cycle(ids),
            Locus::Transition(a, b) => format!("{a}->{b}"),
            Locus::DomainName(d) => d.to_string(),
            Locus::Op { index, reference } => format!("op[{index}]:{reference}"),
        }
    }
}

impl fmt::Display for Locus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// One problem (or advisory) discovered by a check run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckFinding {
    /// What kind of problem.
    pub code: FindingCode,
    /// Fixed severity of the code.
    pub severity: Severity,
    /// Which element.
    pub locus: Locus,
    /// Human explanation.
    pub message: String,
}

impl CheckFinding {
    fn new(code: FindingCode, locus: Locus, message: impl Into<String>) -> Self {
        Self { code, severity: code.severity(), locus, message: message.into() }
    }

    /// Canonical report line: `<severity> <code> <locus> <message>`.
    pub fn render(&self) -> String {
        format!("{} {} {} {}", self.severity, self.code, self.locus, self.message)
    }
}

/// The outcome of a check run: findings sorted by `(code, locus)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CheckReport {
    findings: Vec<CheckFinding>,
}

impl CheckReport {
    /// A report holding exactly one finding.
    pub(crate) fn from_single(finding: CheckFinding) -> Self {
        Self::from_findings(vec![finding])
    }

    fn from_findings(mut findings: Vec<CheckFinding>) -> Self {
        findings.sort_by(|a, b| {
            (a.code, a.locus.render()).cmp(&(b.code, b.locus.render()))
        });
        Self { findings }
    }

    /// The findings, sorted by `(code, locus)`.
    pub fn findings(&self) -> &[CheckFinding] {
        &self.findings
    }

    /// True when nothing significant or critical was found.
    pub fn passed(&self) -> bool {
        self.findings.iter().all(|f| f.severity < Severity::Significant)
    }

    /// The most severe finding, if any.
    pub fn max_severity(&self) -> Option<Severity> {
        self.findings.iter().map(|f| f.severity).max()
    }

    /// Canonical text: one rendered finding per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for f in &self.findings {
            out.push_str(&f.render());
            out.push('\n');
        }
        out
    }

    /// Digest of the canonical text, as 16 lowercase hex digits.
    pub fn digest(&self) -> String {
        hash::digest_hex(self.render().as_bytes())
    }
}

/// Run every structural and pedagogical check over a snapshot.
///
/// Staleness is deliberately not part of this: it depends on a clock and a
/// policy horizon, so it lives in [`provenance_staleness`].
pub fn run_checks(graph: &CognitiveGraph) -> CheckReport {
    let mut findings = Vec::new();
    check_unknown_domains(graph, &mut findings);
    check_dangling_endpoints(graph, &mut findings);
    check_edge_domains(graph, &mut findings);
    check_misconception_usage(graph, &mut findings);
    check_ordering_cycles(graph, &mut findings);
    check_scaffold_bridging(graph, &mut findings);
    CheckReport::from_findings(findings)
}

/// [`run_checks`] plus, when a horizon is configured, the staleness
/// advisories as of `now`, merged into one sorted report.
pub fn run_checks_at(
    graph: &CognitiveGraph,
    staleness_horizon_days: Option<i64>,
    now: Timestamp,
) -> CheckReport {
    let mut findings = run_checks(graph).findings().to_vec();
    if let Some(days) = staleness_horizon_days {
        findings.extend(provenance_staleness(graph, days, now));
    }
    CheckReport::from_findings(findings)
}

/// Check the graph a changeset would produce, restricted to findings that
/// touch elements the changeset touched.
///
/// If some operation cannot apply at all, the report is a single
/// [`FindingCode::ApplicationError`] naming the operation. Otherwise the
/// report contains exactly the findings of [`run_checks`] on the result whose
/// locus intersects the set of nodes, edges, transitions, and domains the
/// changeset referenced — so pre-existing problems elsewhere in the graph do
/// not block an unrelated change.
pub fn check_changeset(base: &CognitiveGraph, changeset: &ChangeSet) -> CheckReport {
    let candidate = match apply_changeset(base, changeset) {
        Ok(g) => g,
        Err(e) => {
            let finding = CheckFinding::new(
                FindingCode::ApplicationError,
                Locus::Op { index: e.op_index, reference: e.reference.clone() },
                e.reason.clone(),
            );
            return CheckReport::from_findings(vec![finding]);
        }
    };
    let touched = changeset.touched_keys();
    let full = run_checks(&candidate);
    let findings = full
        .findings()
        .iter()
        .filter(|f| locus_touches(&f.locus, &touched))
        .cloned()
        .collect();
    CheckReport::from_findings(findings)
}

/// Advisory findings for provenance older than `horizon_days` as of `now`.
/// Elements validated in the future (after `now`) are not stale.
pub fn provenance_staleness(
    graph: &CognitiveGraph,
    horizon_days: i64,
    now: Timestamp,
) -> Vec<CheckFinding> {
    let mut findings = Vec::new();
    let mut push = |locus: Locus, last: Timestamp| {
        let age = last.days_until(now);
        if age > horizon_days {
            findings.push(CheckFinding::new(
                FindingCode::StaleProvenance,
                locus,
                format!("last validated {last}, {age} days ago exceeds horizon of {horizon_days} days"),
            ));
        }
    };
    for node in graph.nodes() {
        push(Locus::Node(node.id.clone()), node.provenance.last_validated());
    }
    for (r, prov) in graph.edges() {
        push(Locus::Edge(r.clone()), prov.last_validated());
    }
    let report = CheckReport::from_findings(findings);
    report.findings.to_vec()
}

// ----------------------------------------------------------------------
// Individual checks
// ----------------------------------------------------------------------

fn check_unknown_domains(graph: &CognitiveGraph, findings: &mut Vec<CheckFinding>) {
    let declared: BTreeSet<&Domain> = graph.declared_domains().collect();
    for node in graph.nodes() {
        if !declared.contains(node.id.domain()) {
            findings.push(CheckFinding::new(
                FindingCode::UnknownDomain,
                Locus::Node(node.id.clone()),
                format!("node domain {} is not declared", node.id.domain()),
            ));
        }
    }
    for (r, _) in graph.edges() {
        for d in r.kind.domains() {
            if !declared.contains(d) {
                findings.push(CheckFinding::new(
                    FindingCode::UnknownDomain,
                    Locus::Edge(r.clone()),
                    format!("edge kind domain {d} is not declared"),
                ));
            }
        }
    }
    for (from, to) in graph.transitions() {
        for d in [from, to] {
            if !declared.contains(d) {
                findings.push(CheckFinding::new(
                    FindingCode::UnknownDomain,
                    Locus::Transition(from.clone(), to.clone()),
                    format!("transition endpoint domain {d} is not declared"),
                ));
            }
        }
    }
}

fn check_dangling_endpoints(graph: &CognitiveGraph, findings: &mut Vec<CheckFinding>) {
    for (r, _) in graph.edges() {
        for endpoint in [&r.source, &r.target] {
            if graph.node(endpoint).is_none() {
                findings.push(CheckFinding::new(
                    FindingCode::DanglingEndpoint,
                    Locus::Edge(r.clone()),
                    format!("endpoint {endpoint} does not exist"),
                ));
            }
        }
    }
}

fn check_edge_domains(graph: &CognitiveGraph, findings: &mut Vec<CheckFinding>) {
    for (r, _) in graph.edges() {
        match &r.kind {
            EdgeKind::PrerequisiteOf(d) | EdgeKind::Scaffolds(d) => {
                for endpoint in [&r.source, &r.target] {
                    if endpoint.domain() != d {
                        findings.push(CheckFinding::new(
                            FindingCode::DomainMismatch,
                            Locus::Edge(r.clone()),
                            format!("endpoint {endpoint} is outside {d}"),
                        ));
                    }
                }
            }
            EdgeKind::AnalogousTo(d1, d2) => {
                if r.source.domain() != d1 || r.target.domain() != d2 {
                    findings.push(CheckFinding::new(
                        FindingCode::DomainMismatch,
                        Locus::Edge(r.clone()),
                        format!("endpoints do not span {d1} and {d2}"),
                    ));
                }
            }
            EdgeKind::CommonMisconception => {}
        }
    }
}

fn check_misconception_usage(graph: &CognitiveGraph, findings: &mut Vec<CheckFinding>) {
    let kind_of = |id: &ConceptId| graph.node(id).map(|n| n.kind);
    for (r, _) in graph.edges() {
        match r.kind {
            EdgeKind::CommonMisconception => {
                // Only judge endpoints that exist; missing ones are already
                // DanglingEndpoint findings.
                if let Some(k) = kind_of(&r.target) {
                    if k != NodeKind::Misconception {
                        findings.push(CheckFinding::new(
                            FindingCode::MisconceptionMisuse,
                            Locus::Edge(r.clone()),
                            format!("target {} is not a misconception node", r.target),
                        ));
                    }
                }
                if kind_of(&r.source) == Some(NodeKind::Misconception) {
                    findings.push(CheckFinding::new(
                        FindingCode::MisconceptionMisuse,
                        Locus::Edge(r.clone()),
                        format!("source {} is a misconception node", r.source),
                    ));
                }
            }
            _ => {
                for endpoint in [&r.source, &r.target] {
                    if kind_of(endpoint) == Some(NodeKind::Misconception) {
                        findings.push(CheckFinding::new(
                            FindingCode::MisconceptionMisuse,
                            Locus::Edge(r.clone()),
                            format!("endpoint {endpoint} is a misconception node"),
                        ));
                    }
                }
            }
        }
    }
}

/// One finding per strongly connected component with a cycle, per domain.
/// The reported cycle is the deterministic shortest loop through the
/// component's smallest node.
fn check_ordering_cycles(graph: &CognitiveGraph, findings: &mut Vec<CheckFinding>) {
    let mut domains: BTreeSet<Domain> = BTreeSet::new();
    for (r, _) in graph.edges() {
        if let EdgeKind::PrerequisiteOf(d) | EdgeKind::Scaffolds(d) = &r.kind {
            domains.insert(d.clone());
        }
    }
    for domain in domains {
        let succ = graph.ordering_successors(&domain);
        for component in cyclic_components(&succ) {
            let anchor = component.first().expect("components are non-empty").clone();
            let cycle = cycle_through(&succ, &component, &anchor);
            findings.push(CheckFinding::new(
                FindingCode::OrderingCycle,
                Locus::Cycle(cycle.clone()),
                format!("ordering relation of {domain} contains a cycle through {anchor}"),
            ));
        }
    }
}

/// Strongly connected components that actually contain a cycle (size > 1, or
/// a single node with a self-edge), each sorted, in sorted order.
fn cyclic_components(
    succ: &BTreeMap<ConceptId, BTreeSet<ConceptId>>,
) -> Vec<Vec<ConceptId>> {
    // Iterative Tarjan over the sorted node set.
    let mut nodes: BTreeSet<ConceptId> = BTreeSet::new();
    for (s, ts) in succ {
        nodes.insert(s.clone());
        for t in ts {
            nodes.insert(t.clone());
        }
    }
    let index_of: BTreeMap<&ConceptId, usize> = nodes.iter().zip(0..).collect();
    let ordered: Vec<&ConceptId> = nodes.iter().collect();
    let n = ordered.len();
    let adj: Vec<Vec<usize>> = ordered
        .iter()
        .map(|id| {
            succ.get(*id)
                .map(|ts| ts.iter().map(|t| index_of[t]).collect())
                .unwrap_or_default()
        })
        .collect();

    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut counter = 0usize;
    let mut components: Vec<Vec<ConceptId>> = Vec::new();

    // Explicit DFS stack: (node, next-neighbor-cursor).
    for start in 0..n {
        if index[start] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(start, 0)];
        while let Some(&mut (v, ref mut cursor)) = call.last_mut() {
            if *cursor == 0 {
                index[v] = counter;
                low[v] = counter;
                counter += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&w) = adj[v].get(*cursor) {
                *cursor += 1;
                if index[w] == usize::MAX {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                if low[v] == index[v] {
                    let mut component = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        component.push(ordered[w].clone());
                        if w == v {
                            break;
                        }
                    }
                    let is_cyclic = component.len() > 1
                        || succ
                            .get(&component[0])
                            .is_some_and(|ts| ts.contains(&component[0]));
                    if is_cyclic {
                        component.sort();
                        components.push(component);
                    }
                }
                call.pop();
                if let Some(&mut (parent, _)) = call.last_mut() {
                    low[parent] = low[parent].min(low[v]);
                }
            }
        }
    }
    components.sort();
    components
}

/// Deterministic cycle through `anchor` inside its component: BFS (sorted
/// adjacency, restricted to the component) from each successor back to the
/// anchor; the shortest, lexicographically-first loop wins.
fn cycle_through(
    succ: &BTreeMap<ConceptId, BTreeSet<ConceptId>>,
    component: &[ConceptId],
    anchor: &ConceptId,
) -> Vec<ConceptId> {
    let members: BTreeSet<&ConceptId> = component.iter().collect();
    // Self-edge: the two-entry cycle [anchor, anchor].
    if succ.get(anchor).is_some_and(|ts| ts.contains(anchor)) {
        return vec![anchor.clone(), anchor.clone()];
    }
    let mut best: Option<Vec<ConceptId>> = None;
    if let Some(firsts) = succ.get(anchor) {
        for first in firsts {
            if !members.contains(first) {
                continue;
            }
            // BFS from `first` back to `anchor` within the component.
            let mut parent: BTreeMap<ConceptId, ConceptId> = BTreeMap::new();
            let mut seen: BTreeSet<ConceptId> = BTreeSet::new();
            let mut queue = std::collections::VecDeque::new();
            queue.push_back(first.clone());
            seen.insert(first.clone());
            'bfs: while let Some(node) = queue.pop_front() {
                if &node == anchor {
                    break 'bfs;
                }
                if let Some(nexts) = succ.get(&node) {
                    for nx in nexts {
                        if members.contains(nx) && seen.insert(nx.clone()) {
                            parent.insert(nx.clone(), node.clone());
                            queue.push_back(nx.clone());
                        }
                    }
                }
            }
            if seen.contains(anchor) {
                let mut path = vec![anchor.clone()];
                let mut cursor = anchor.clone();
                while let Some(p) = parent.get(&cursor) {
                    path.push(p.clone());
                    cursor = p.clone();
                }
                path.push(anchor.clone());
                path.reverse();
                // path = anchor, first, ..., anchor
                match &best {
                    Some(b) if (b.len(), b.as_slice()) <= (path.len(), path.as_slice()) => {}
                    _ => best = Some(path),
                }
            }
        }
    }
    best.unwrap_or_else(|| vec![anchor.clone(), anchor.clone()])
}

/// A scaffold edge should bridge into existing structure: its source must
/// itself be reachable (have at least one incoming ordering edge). A
/// free-floating scaffold source suggests the scaffold replaces rather than
/// bridges the ordering structure. Advisory only.
fn check_scaffold_bridging(graph: &CognitiveGraph, findings: &mut Vec<CheckFinding>) {
    let mut has_incoming: BTreeSet<&ConceptId> = BTreeSet::new();
    for (r, _) in graph.edges() {
        if r.kind.is_ordering() {
            has_incoming.insert(&r.target);
        }
    }
    for (r, _) in graph.edges() {
        if let EdgeKind::Scaffolds(_) = r.kind {
            if !has_incoming.contains(&r.source) {
                findings.push(CheckFinding::new(
                    FindingCode::ScaffoldNotBridging,
                    Locus::Edge(r.clone()),
                    format!("scaffold source {} has no incoming ordering edge", r.source),
                ));
            }
        }
    }
}

// ----------------------------------------------------------------------
// Locus/changeset intersection
// ----------------------------------------------------------------------

/// Does a finding's locus touch any element the changeset referenced?
///
/// An edge locus also exposes its endpoints (an edge finding is relevant to a
/// change that removed one of its nodes); a cycle locus exposes its member
/// nodes and its consecutive edges under either ordering kind.
fn locus_touches(locus: &Locus, touched: &BTreeSet<ConflictKey>) -> bool {
    match locus {
        Locus::Node(id) => touched.contains(&ConflictKey::Node(id.clone())),
        Locus::Edge(r) => {
            touched.contains(&ConflictKey::Edge(r.clone()))
                || touched.contains(&ConflictKey::Node(r.source.clone()))
                || touched.contains(&ConflictKey::Node(r.target.clone()))
        }
        Locus::Cycle(ids) => {
            ids.iter().any(|id| touched.contains(&ConflictKey::Node(id.clone())))
                || ids.windows(2).any(|w| {
                    let d = w[0].domain().clone();
                    [EdgeKind::PrerequisiteOf(d.clone()), EdgeKind::Scaffolds(d)].into_iter().any(
                        |kind| {
                            touched.contains(&ConflictKey::Edge(EdgeRef::new(
                                kind,
                                w[0].clone(),
                                w[1].clone(),
                            )))
                        },
                    )
                })
        }
        Locus::Transition(a, b) => {
            touched.contains(&ConflictKey::Transition(a.clone(), b.clone()))
                || touched.contains(&ConflictKey::Domain(a.clone()))
                || touched.contains(&ConflictKey::Domain(b.clone()))
        }
        Locus::DomainName(d) => touched.contains(&ConflictKey::Domain(d.clone())),
        Locus::Op { .. } => true,
    }
}
