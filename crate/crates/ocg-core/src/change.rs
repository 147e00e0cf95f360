//! Changesets: ordered operation lists that transform one snapshot into the
//! next.
//!
//! Application here is *raw*: each operation either applies or fails with an
//! [`ApplyError`], but no structural guard runs — dangling endpoints, cycles,
//! and domain problems are allowed to materialize and are the checks
//! subsystem's job to find. This split is what lets `check_changeset` report
//! *why* a proposed change is unsound instead of refusing to evaluate it.
//!
//! Raw application is still exact about identity: re-adding an element
//! identically is a no-op (so replays are idempotent at the op level), while
//! adding a different element under an existing identity, or removing or
//! updating a missing element, is an application error.
//!
//! Every changeset has a canonical text form; its FNV-1a digest identifies
//! the changeset in revision records and the changelog.

use std::collections::BTreeSet;

use crate::canon::ParseError;
use crate::check::Severity;
use crate::graph::CognitiveGraph;
use crate::hash;
use crate::model::{
    ConceptId, ConceptNode, Domain, EdgeKind, EdgeRef, ElementRef, NodeKind, PedagogicalEdge,
    Provenance,
};
use crate::text::{escape_field, join_list, split_fields, split_list, unescape_field, FIELD_SEP};
use crate::time::Timestamp;

/// Magic first line of a standalone changeset file.
pub const CHANGESET_HEADER: &str = "OCG-CHANGESET 1";

/// One atomic operation of a changeset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChangeOp {
    /// Add a node; declares its domain as a side effect.
    AddNode(ConceptNode),
    /// Remove a node by id. Raw application leaves incident edges behind.
    RemoveNode(ConceptId),
    /// Add an edge.
    AddEdge(PedagogicalEdge),
    /// Remove an edge by identity.
    RemoveEdge(EdgeRef),
    /// Replace the provenance of an existing node or edge.
    UpdateProvenance(ElementRef, Provenance),
    /// Declare a domain. Idempotent.
    DeclareDomain(Domain),
    /// Remove a domain declaration.
    RemoveDomain(Domain),
    /// Declare an admissible domain transition. Idempotent.
    DeclareTransition(Domain, Domain),
    /// Remove a declared transition.
    RemoveTransition(Domain, Domain),
}

/// The element identity an operation touches, used for conflict detection
/// and for restricting check findings to a changeset's blast radius.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ConflictKey {
    /// A node by id.
    Node(ConceptId),
    /// An edge by normalized identity.
    Edge(EdgeRef),
    /// A directed transition.
    Transition(Domain, Domain),
    /// A domain declaration.
    Domain(Domain),
}

impl ChangeOp {
    /// The element identity this operation touches.
    pub fn conflict_key(&self) -> ConflictKey {
        match self {
            ChangeOp::AddNode(n) => ConflictKey::Node(n.id.clone()),
            ChangeOp::RemoveNode(id) => ConflictKey::Node(id.clone()),
            ChangeOp::AddEdge(e) => ConflictKey::Edge(e.edge_ref()),
            ChangeOp::RemoveEdge(r) => {
                ConflictKey::Edge(EdgeRef::new(r.kind.clone(), r.source.clone(), r.target.clone()))
            }
            ChangeOp::UpdateProvenance(ElementRef::Node(id), _) => ConflictKey::Node(id.clone()),
            ChangeOp::UpdateProvenance(ElementRef::Edge(r), _) => {
                ConflictKey::Edge(EdgeRef::new(r.kind.clone(), r.source.clone(), r.target.clone()))
            }
            ChangeOp::DeclareDomain(d) | ChangeOp::RemoveDomain(d) => ConflictKey::Domain(d.clone()),
            ChangeOp::DeclareTransition(f, t) | ChangeOp::RemoveTransition(f, t) => {
                ConflictKey::Transition(f.clone(), t.clone())
            }
        }
    }

    /// Short rendering of the referenced element, for errors and loci.
    pub fn reference(&self) -> String {
        match self.conflict_key() {
            ConflictKey::Node(id) => id.canonical(),
            ConflictKey::Edge(r) => r.compact(),
            ConflictKey::Transition(f, t) => format!("{f}->{t}"),
            ConflictKey::Domain(d) => d.to_string(),
        }
    }

    /// Canonical single-line rendering.
    pub fn render(&self) -> String {
        match self {
            ChangeOp::AddNode(n) => [
                format!("+node {} {}", n.kind.render(), n.id),
                escape_field(&n.description),
                join_list(n.provenance.contributors()),
                join_list(n.provenance.evidence()),
                n.provenance.last_validated().to_string(),
            ]
            .join(FIELD_SEP),
            ChangeOp::RemoveNode(id) => format!("-node {id}"),
            ChangeOp::AddEdge(e) => {
                let r = e.edge_ref();
                [
                    format!("+edge {}", r.render()),
                    join_list(e.provenance.contributors()),
                    join_list(e.provenance.evidence()),
                    e.provenance.last_validated().to_string(),
                ]
                .join(FIELD_SEP)
            }
            ChangeOp::RemoveEdge(r) => format!("-edge {}", r.render()),
            ChangeOp::UpdateProvenance(el, p) => {
                let head = match el {
                    ElementRef::Node(id) => format!("~prov node {id}"),
                    ElementRef::Edge(r) => format!("~prov edge {}", r.render()),
                };
                [
                    head,
                    join_list(p.contributors()),
                    join_list(p.evidence()),
                    p.last_validated().to_string(),
                ]
                .join(FIELD_SEP)
            }
            ChangeOp::DeclareDomain(d) => format!("+domain {d}"),
            ChangeOp::RemoveDomain(d) => format!("-domain {d}"),
            ChangeOp::DeclareTransition(f, t) => format!("+transition {f} {t}"),
            ChangeOp::RemoveTransition(f, t) => format!("-transition {f} {t}"),
        }
    }

    /// Parse a canonical op line.
    pub fn parse(line_no: usize, line: &str) -> Result<Self, ParseError> {
        let err = |m: String| ParseError { line: line_no, message: m };
        let (keyword, rest) = line.split_once(' ').unwrap_or((line, ""));
        match keyword {
            "+node" => {
                let fragments = split_fields(rest);
                if fragments.len() != 5 {
                    return Err(err(
                        "expected: +node <kind> <id> | <description> | <contributors> | <evidence> | <timestamp>"
                            .into(),
                    ));
                }
                let mut head = fragments[0].split_whitespace();
                let (kind_tok, id_tok) = match (head.next(), head.next(), head.next()) {
                    (Some(k), Some(i), None) => (k, i),
                    _ => return Err(err("expected +node head: <kind> <id>".into())),
                };
                let kind = NodeKind::parse(kind_tok)
                    .ok_or_else(|| err(format!("unknown node kind {kind_tok:?}")))?;
                let id = ConceptId::parse(id_tok).map_err(|e| err(e.to_string()))?;
                let description = unescape_field(fragments[1]).map_err(err)?;
                let provenance = parse_provenance(line_no, &fragments[2..5])?;
                Ok(ChangeOp::AddNode(ConceptNode { id, kind, description, provenance }))
            }
            "-node" => {
                let id = ConceptId::parse(rest.trim()).map_err(|e| err(e.to_string()))?;
                Ok(ChangeOp::RemoveNode(id))
            }
            "+edge" => {
                let fragments = split_fields(rest);
                if fragments.len() != 4 {
                    return Err(err(
                        "expected: +edge <kind> <source> <target> | <contributors> | <evidence> | <timestamp>"
                            .into(),
                    ));
                }
                let (kind, source, target) = parse_edge_head(line_no, fragments[0])?;
                let provenance = parse_provenance(line_no, &fragments[1..4])?;
                Ok(ChangeOp::AddEdge(PedagogicalEdge { kind, source, target, provenance }))
            }
            "-edge" => {
                let (kind, source, target) = parse_edge_head(line_no, rest)?;
                Ok(ChangeOp::RemoveEdge(EdgeRef::new(kind, source, target)))
            }
            "~prov" => {
                let fragments = split_fields(rest);
                if fragments.len() != 4 {
                    return Err(err(
                        "expected: ~prov node|edge <ref> | <contributors> | <evidence> | <timestamp>".into(),
                    ));
                }
                let provenance = parse_provenance(line_no, &fragments[1..4])?;
                let element = if let Some(node_ref) = fragments[0].strip_prefix("node ") {
                    ElementRef::Node(ConceptId::parse(node_ref.trim()).map_err(|e| err(e.to_string()))?)
                } else if let Some(edge_ref) = fragments[0].strip_prefix("edge ") {
                    let (kind, source, target) = parse_edge_head(line_no, edge_ref)?;
                    ElementRef::Edge(EdgeRef::new(kind, source, target))
                } else {
                    return Err(err("expected ~prov head: node <id> or edge <kind> <src> <dst>".into()));
                };
                Ok(ChangeOp::UpdateProvenance(element, provenance))
            }
            "+domain" => Ok(ChangeOp::DeclareDomain(
                Domain::new(rest.trim()).map_err(|e| err(e.to_string()))?,
            )),
            "-domain" => Ok(ChangeOp::RemoveDomain(
                Domain::new(rest.trim()).map_err(|e| err(e.to_string()))?,
            )),
            "+transition" | "-transition" => {
                let mut parts = rest.split_whitespace();
                let (f, t) = match (parts.next(), parts.next(), parts.next()) {
                    (Some(f), Some(t), None) => (
                        Domain::new(f).map_err(|e| err(e.to_string()))?,
                        Domain::new(t).map_err(|e| err(e.to_string()))?,
                    ),
                    _ => return Err(err(format!("expected: {keyword} <from> <to>"))),
                };
                if keyword == "+transition" {
                    Ok(ChangeOp::DeclareTransition(f, t))
                } else {
                    Ok(ChangeOp::RemoveTransition(f, t))
                }
            }
            other => Err(err(format!("unknown operation {other:?}"))),
        }
    }
}

fn parse_edge_head(line_no: usize, head: &str) -> Result<(EdgeKind, ConceptId, ConceptId), ParseError> {
    let err = |m: String| ParseError { line: line_no, message: m };
    let mut parts = head.split_whitespace();
    match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some(k), Some(s), Some(t), None) => Ok((
            EdgeKind::parse(k).map_err(|e| err(e.to_string()))?,
            ConceptId::parse(s).map_err(|e| err(e.to_string()))?,
            ConceptId::parse(t).map_err(|e| err(e.to_string()))?,
        )),
        _ => Err(err("expected edge reference: <kind> <source> <target>".into())),
    }
}

fn parse_provenance(line_no: usize, fragments: &[&str]) -> Result<Provenance, ParseError> {
    let err = |m: String| ParseError { line: line_no, message: m };
    let contributors = split_list(fragments[0]).map_err(err)?;
    let evidence = split_list(fragments[1]).map_err(err)?;
    let ts = Timestamp::parse(fragments[2].trim())
        .map_err(|e| ParseError { line: line_no, message: e.to_string() })?;
    Provenance::new(contributors, evidence, ts)
        .map_err(|e| ParseError { line: line_no, message: e.to_string() })
}

/// Errors from constructing a changeset.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChangeError {
    /// A changeset must contain at least one operation.
    #[error("changeset must contain at least one operation")]
    EmptyOps,
    /// Author must be non-empty.
    #[error("changeset author must be non-empty")]
    EmptyAuthor,
    /// Rationale must be non-empty.
    #[error("changeset rationale must be non-empty")]
    EmptyRationale,
}

/// An operation that could not be applied.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("op[{op_index}] {reference}: {reason}")]
pub struct ApplyError {
    /// Zero-based index of the failing operation.
    pub op_index: usize,
    /// Rendering of the element the operation referenced.
    pub reference: String,
    /// Why it failed.
    pub reason: String,
}

/// An ordered, attributed, digestible list of operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeSet {
    author: String,
    rationale: String,
    severity: Severity,
    ops: Vec<ChangeOp>,
}

impl ChangeSet {
    /// Construct a changeset; author, rationale, and ops must be non-empty.
    pub fn new(
        author: impl Into<String>,
        rationale: impl Into<String>,
        severity: Severity,
        ops: Vec<ChangeOp>,
    ) -> Result<Self, ChangeError> {
        let author = author.into();
        let rationale = rationale.into();
        if author.is_empty() {
            return Err(ChangeError::EmptyAuthor);
        }
        if rationale.is_empty() {
            return Err(ChangeError::EmptyRationale);
        }
        if ops.is_empty() {
            return Err(ChangeError::EmptyOps);
        }
        Ok(Self { author, rationale, severity, ops })
    }

    /// Who authored the change.
    pub fn author(&self) -> &str {
        &self.author
    }

    /// Why the change was made.
    pub fn rationale(&self) -> &str {
        &self.rationale
    }

    /// Declared severity of the change.
    pub fn severity(&self) -> Severity {
        self.severity
    }

    /// The operations in application order.
    pub fn ops(&self) -> &[ChangeOp] {
        &self.ops
    }

    /// Element identities this changeset touches.
    pub fn touched_keys(&self) -> BTreeSet<ConflictKey> {
        self.ops.iter().map(ChangeOp::conflict_key).collect()
    }

    /// Canonical text: author, rationale, severity, then one op per line.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("author {}\n", escape_field(&self.author)));
        out.push_str(&format!("rationale {}\n", escape_field(&self.rationale)));
        out.push_str(&format!("severity {}\n", self.severity));
        for op in &self.ops {
            out.push_str(&op.render());
            out.push('\n');
        }
        out
    }

    /// Digest of the canonical text, 16 lowercase hex digits.
    pub fn digest(&self) -> String {
        hash::digest_hex(self.canonical_text().as_bytes())
    }

    /// Parse the canonical body (no file header). `start_line` is the 1-based
    /// number of the first body line in the surrounding document, so errors
    /// point at real file lines when the body is embedded in a log.
    pub fn parse_body(body: &str, start_line: usize) -> Result<Self, ParseError> {
        let mut author: Option<String> = None;
        let mut rationale: Option<String> = None;
        let mut severity: Option<Severity> = None;
        let mut ops: Vec<ChangeOp> = Vec::new();
        let mut last_line = start_line;
        for (offset, raw) in body.lines().enumerate() {
            let n = start_line + offset;
            last_line = n;
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("author ") {
                if author.is_some() {
                    return Err(ParseError { line: n, message: "duplicate author line".into() });
                }
                author = Some(unescape_field(rest).map_err(|m| ParseError { line: n, message: m })?);
            } else if let Some(rest) = line.strip_prefix("rationale ") {
                if rationale.is_some() {
                    return Err(ParseError { line: n, message: "duplicate rationale line".into() });
                }
                rationale =
                    Some(unescape_field(rest).map_err(|m| ParseError { line: n, message: m })?);
            } else if let Some(rest) = line.strip_prefix("severity ") {
                if severity.is_some() {
                    return Err(ParseError { line: n, message: "duplicate severity line".into() });
                }
                severity = Some(Severity::parse(rest.trim()).ok_or_else(|| ParseError {
                    line: n,
                    message: format!("unknown severity {:?}", rest.trim()),
                })?);
            } else {
                ops.push(ChangeOp::parse(n, line)?);
            }
        }
        let author = author
            .ok_or_else(|| ParseError { line: last_line, message: "missing author line".into() })?;
        let rationale = rationale
            .ok_or_else(|| ParseError { line: last_line, message: "missing rationale line".into() })?;
        let severity = severity
            .ok_or_else(|| ParseError { line: last_line, message: "missing severity line".into() })?;
        ChangeSet::new(author, rationale, severity, ops)
            .map_err(|e| ParseError { line: last_line, message: e.to_string() })
    }

    /// Parse a standalone changeset file (header line plus body).
    pub fn parse_file(text: &str) -> Result<Self, ParseError> {
        let mut lines = text.lines();
        let header = lines.next().map(|l| l.strip_suffix('\r').unwrap_or(l));
        if header != Some(CHANGESET_HEADER) {
            return Err(ParseError { line: 1, message: format!("expected {CHANGESET_HEADER:?} header") });
        }
        let body_start = text.find('\n').map(|i| i + 1).unwrap_or(text.len());
        Self::parse_body(&text[body_start..], 2)
    }

    /// Render a standalone changeset file.
    pub fn to_file(&self) -> String {
        format!("{CHANGESET_HEADER}\n{}", self.canonical_text())
    }
}

/// Apply every operation of `changeset` to `base`, returning the new
/// snapshot. No structural guards run; see the module docs.
pub fn apply_changeset(base: &CognitiveGraph, changeset: &ChangeSet) -> Result<CognitiveGraph, ApplyError> {
    let mut graph = base.clone();
    for (i, op) in changeset.ops().iter().enumerate() {
        apply_op(&mut graph, op).map_err(|reason| ApplyError {
            op_index: i,
            reference: op.reference(),
            reason,
        })?;
    }
    Ok(graph)
}

/// Apply one operation in place. Returns the failure reason on error, in
/// which case the graph may retain the effects of earlier operations only.
fn apply_op(graph: &mut CognitiveGraph, op: &ChangeOp) -> Result<(), String> {
    match op {
        ChangeOp::AddNode(n) => match graph.node(&n.id) {
            Some(existing) if existing == n => Ok(()),
            Some(_) => Err(format!("node {} already exists with different content", n.id)),
            None => {
                graph.domains_mut().insert(n.id.domain().clone());
                graph.nodes_mut().insert(n.id.clone(), n.clone());
                Ok(())
            }
        },
        ChangeOp::RemoveNode(id) => match graph.nodes_mut().remove(id) {
            Some(_) => Ok(()),
            None => Err(format!("node {id} does not exist")),
        },
        ChangeOp::AddEdge(e) => {
            let e = e.normalized();
            let r = e.edge_ref();
            match graph.edge_provenance(&r) {
                Some(existing) if *existing == e.provenance => Ok(()),
                Some(_) => Err(format!("edge {r} already exists with different provenance")),
                None => {
                    graph.edges_mut().insert(r, e.provenance);
                    Ok(())
                }
            }
        }
        ChangeOp::RemoveEdge(r) => {
            let r = EdgeRef::new(r.kind.clone(), r.source.clone(), r.target.clone());
            match graph.edges_mut().remove(&r) {
                Some(_) => Ok(()),
                None => Err(format!("edge {r} does not exist")),
            }
        }
        ChangeOp::UpdateProvenance(el, p) => match el {
            ElementRef::Node(id) => match graph.nodes_mut().get_mut(id) {
                Some(node) => {
                    node.provenance = p.clone();
                    Ok(())
                }
                None => Err(format!("node {id} does not exist")),
            },
            ElementRef::Edge(r) => {
                let r = EdgeRef::new(r.kind.clone(), r.source.clone(), r.target.clone());
                match graph.edges_mut().get_mut(&r) {
                    Some(prov) => {
                        *prov = p.clone();
                        Ok(())
                    }
                    None => Err(format!("edge {r} does not exist")),
                }
            }
        },
        ChangeOp::DeclareDomain(d) => {
            graph.domains_mut().insert(d.clone());
            Ok(())
        }
        ChangeOp::RemoveDomain(d) => {
            if graph.domains_mut().remove(d) {
                Ok(())
            } else {
                Err(format!("domain {d} is not declared"))
            }
        }
        ChangeOp::DeclareTransition(f, t) => {
            graph.transitions_mut().insert((f.clone(), t.clone()));
            Ok(())
        }
        ChangeOp::RemoveTransition(f, t) => {
            if graph.transitions_mut().remove(&(f.clone(), t.clone())) {
                Ok(())
            } else {
                Err(format!("transition {f}->{t} does not exist"))
            }
        }
    }
}

/// Compute the operations that exactly undo `ops` as applied to `base`.
///
/// The result, applied to `apply(base, ops)`, reproduces `base` bytewise.
/// Per-op inverses are emitted in reverse order; operations that were no-ops
/// against `base` (idempotent re-adds) contribute nothing. `AddNode`'s
/// implicit domain declaration is unwound only when the domain was new.
pub fn inverse_ops(base: &CognitiveGraph, ops: &[ChangeOp]) -> Result<Vec<ChangeOp>, ApplyError> {
    let mut graph = base.clone();
    let mut groups: Vec<Vec<ChangeOp>> = Vec::new();
    for (i, op) in ops.iter().enumerate() {
        let group: Vec<ChangeOp> = match op {
            ChangeOp::AddNode(n) => {
                if graph.node(&n.id).is_some() {
                    vec![] // idempotent re-add (or about to fail below)
                } else {
                    let mut g = vec![ChangeOp::RemoveNode(n.id.clone())];
                    if !graph.is_declared(n.id.domain()) {
                        g.push(ChangeOp::RemoveDomain(n.id.domain().clone()));
                    }
                    g
                }
            }
            ChangeOp::RemoveNode(id) => match graph.node(id) {
                Some(n) => vec![ChangeOp::AddNode(n.clone())],
                None => vec![],
            },
            ChangeOp::AddEdge(e) => {
                if graph.has_edge(&e.edge_ref()) {
                    vec![]
                } else {
                    vec![ChangeOp::RemoveEdge(e.edge_ref())]
                }
            }
            ChangeOp::RemoveEdge(r) => {
                let r = EdgeRef::new(r.kind.clone(), r.source.clone(), r.target.clone());
                match graph.edge_provenance(&r) {
                    Some(p) => vec![ChangeOp::AddEdge(PedagogicalEdge {
                        kind: r.kind.clone(),
                        source: r.source.clone(),
                        target: r.target.clone(),
                        provenance: p.clone(),
                    })],
                    None => vec![],
                }
            }
            ChangeOp::UpdateProvenance(el, p) => {
                let old = match el {
                    ElementRef::Node(id) => graph.node(id).map(|n| n.provenance.clone()),
                    ElementRef::Edge(r) => graph.edge_provenance(r).cloned(),
                };
                match old {
                    Some(old) if old != *p => vec![ChangeOp::UpdateProvenance(el.clone(), old)],
                    _ => vec![],
                }
            }
            ChangeOp::DeclareDomain(d) => {
                if graph.is_declared(d) {
                    vec![]
                } else {
                    vec![ChangeOp::RemoveDomain(d.clone())]
                }
            }
            ChangeOp::RemoveDomain(d) => vec![ChangeOp::DeclareDomain(d.clone())],
            ChangeOp::DeclareTransition(f, t) => {
                if graph.has_transition(f, t) {
                    vec![]
                } else {
                    vec![ChangeOp::RemoveTransition(f.clone(), t.clone())]
                }
            }
            ChangeOp::RemoveTransition(f, t) => {
                if graph.has_transition(f, t) {
                    vec![ChangeOp::DeclareTransition(f.clone(), t.clone())]
                } else {
                    vec![]
                }
            }
        };
        apply_op(&mut graph, op).map_err(|reason| ApplyError {
            op_index: i,
            reference: op.reference(),
            reason,
        })?;
        groups.push(group);
    }
    Ok(groups.into_iter().rev().flatten().collect())
}

/// The operation list that rebuilds `graph` from the empty graph, in
/// canonical document order: domains, transitions, nodes, edges.
pub fn bootstrap_ops(graph: &CognitiveGraph) -> Vec<ChangeOp> {
    let mut ops = Vec::new();
    for d in graph.declared_domains() {
        ops.push(ChangeOp::DeclareDomain(d.clone()));
    }
    for (f, t) in graph.transitions() {
        ops.push(ChangeOp::DeclareTransition(f.clone(), t.clone()));
    }
    for n in graph.nodes() {
        ops.push(ChangeOp::AddNode(n.clone()));
    }
    for (r, p) in graph.edges() {
        ops.push(ChangeOp::AddEdge(PedagogicalEdge {
            kind: r.kind.clone(),
            source: r.source.clone(),
            target: r.target.clone(),
            provenance: p.clone(),
        }));
    }
    ops
}
