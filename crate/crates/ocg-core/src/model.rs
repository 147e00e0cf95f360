//! Core vocabulary of the cognitive graph: domains, concept identities,
//! provenance, nodes, and typed pedagogical edges.
//!
//! Identity is textual. A node is identified by `term@Domain`, an edge by the
//! rendering of its kind together with its endpoints. Every type here has
//! exactly one canonical rendering, and all ordering used for persistence is
//! derived from those renderings so that serialized artifacts are stable.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::time::Timestamp;

/// Errors raised while constructing model values.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    /// Domain names are `[A-Za-z][A-Za-z0-9_-]*`.
    #[error("invalid domain name {name:?}: expected a letter followed by letters, digits, '_' or '-'")]
    InvalidDomain {
        /// The rejected name.
        name: String,
    },
    /// Concept terms must be non-empty and free of `@` and whitespace.
    #[error("invalid concept term {term:?}: {reason}")]
    InvalidTerm {
        /// The rejected term.
        term: String,
        /// Which rule it broke.
        reason: &'static str,
    },
    /// A concept id must contain exactly one `@` separator.
    #[error("invalid concept id {input:?}: expected term@Domain")]
    InvalidConceptId {
        /// The rejected input.
        input: String,
    },
    /// Provenance requires at least one contributor.
    #[error("provenance requires at least one contributor")]
    EmptyContributors,
    /// Provenance list entries must be non-empty.
    #[error("provenance {field} entries must be non-empty")]
    EmptyListEntry {
        /// Which list held the empty entry.
        field: &'static str,
    },
    /// An analogy must connect two distinct domains.
    #[error("analogy must span two distinct domains, got {domain} twice")]
    SelfAnalogy {
        /// The repeated domain.
        domain: String,
    },
}

/// A named knowledge domain such as `Physics` or `Algebra`.
///
/// Names are case-sensitive and restricted to a letter followed by letters,
/// digits, underscores, or hyphens, which keeps every composite rendering
/// (`term@Domain`, `prerequisite_of@Domain`, `A<->B`) unambiguous.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Domain(String);

impl Domain {
    /// Validate and construct a domain name.
    pub fn new(name: &str) -> Result<Self, ModelError> {
        let mut chars = name.chars();
        let head_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic());
        let tail_ok = chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if head_ok && tail_ok {
            Ok(Self(name.to_string()))
        } else {
            Err(ModelError::InvalidDomain { name: name.to_string() })
        }
    }

    /// The domain name.
    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Domain {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

/// Identity of a node: a term contextualized by the domain it belongs to.
///
/// The same term may exist in several domains as distinct nodes. Canonical
/// form is `term@Domain`; ordering follows the bytes of that canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConceptId {
    term: String,
    domain: Domain,
}

impl ConceptId {
    /// Validate and construct an id from its parts.
    ///
    /// Terms must be non-empty and may not contain `@` or whitespace; this
    /// keeps ids safe to embed in space-delimited log lines and report loci.
    pub fn new(term: &str, domain: Domain) -> Result<Self, ModelError> {
        if term.is_empty() {
            return Err(ModelError::InvalidTerm { term: term.to_string(), reason: "term is empty" });
        }
        if term.contains('@') {
            return Err(ModelError::InvalidTerm { term: term.to_string(), reason: "term contains '@'" });
        }
        if term.chars().any(char::is_whitespace) {
            return Err(ModelError::InvalidTerm {
                term: term.to_string(),
                reason: "term contains whitespace",
            });
        }
        Ok(Self { term: term.to_string(), domain })
    }

    /// Parse the canonical `term@Domain` form.
    pub fn parse(input: &str) -> Result<Self, ModelError> {
        // Exactly one separator: terms may not contain '@', so reject ambiguity.
        let (term, domain) = input
            .split_once('@')
            .ok_or_else(|| ModelError::InvalidConceptId { input: input.to_string() })?;
        if term.contains('@') || domain.contains('@') {
            return Err(ModelError::InvalidConceptId { input: input.to_string() });
        }
        Self::new(term, Domain::new(domain)?)
    }

    /// The term component.
    pub fn term(&self) -> &str {
        &self.term
    }

    /// The domain component.
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Canonical `term@Domain` rendering.
    pub fn canonical(&self) -> String {
        format!("{}@{}", self.term, self.domain)
    }

    fn canonical_bytes(&self) -> impl Iterator<Item = u8> + '_ {
        self.term.bytes().chain(std::iter::once(b'@')).chain(self.domain.name().bytes())
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.term, self.domain)
    }
}

impl FromStr for ConceptId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Ord for ConceptId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.canonical_bytes().cmp(other.canonical_bytes())
    }
}

impl PartialOrd for ConceptId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// What a node represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    /// A concept to be learned.
    Concept,
    /// A named rule or procedure that can be applied in reasoning.
    Rule,
    /// A documented misconception, usable only as a misconception-edge target.
    Misconception,
}

impl NodeKind {
    /// Canonical lowercase rendering.
    pub fn render(self) -> &'static str {
        match self {
            NodeKind::Concept => "concept",
            NodeKind::Rule => "rule",
            NodeKind::Misconception => "misconception",
        }
    }

    /// Parse the canonical rendering.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "concept" => Some(NodeKind::Concept),
            "rule" => Some(NodeKind::Rule),
            "misconception" => Some(NodeKind::Misconception),
            _ => None,
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.render())
    }
}

/// Who asserted an element, on what evidence, and when it was last reviewed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Provenance {
    contributors: Vec<String>,
    evidence: Vec<String>,
    last_validated: Timestamp,
}

impl Provenance {
    /// Construct provenance; at least one contributor is required and list
    /// entries must be non-empty. Evidence may be empty.
    pub fn new(
        contributors: Vec<String>,
        evidence: Vec<String>,
        last_validated: Timestamp,
    ) -> Result<Self, ModelError> {
        if contributors.is_empty() {
            return Err(ModelError::EmptyContributors);
        }
        if contributors.iter().any(String::is_empty) {
            return Err(ModelError::EmptyListEntry { field: "contributor" });
        }
        if evidence.iter().any(String::is_empty) {
            return Err(ModelError::EmptyListEntry { field: "evidence" });
        }
        Ok(Self { contributors, evidence, last_validated })
    }

    /// Contributor identifiers, in the order given.
    pub fn contributors(&self) -> &[String] {
        &self.contributors
    }

    /// Evidence references, possibly empty.
    pub fn evidence(&self) -> &[String] {
        &self.evidence
    }

    /// When this element was last validated.
    pub fn last_validated(&self) -> Timestamp {
        self.last_validated
    }

    /// Copy with a new validation timestamp.
    pub fn revalidated_at(&self, at: Timestamp) -> Self {
        Self { last_validated: at, ..self.clone() }
    }
}

/// A node of the graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptNode {
    /// Identity (`term@Domain`).
    pub id: ConceptId,
    /// What the node represents.
    pub kind: NodeKind,
    /// Short human description.
    pub description: String,
    /// Attribution and review record.
    pub provenance: Provenance,
}

/// The typed relationship an edge asserts.
///
/// Every kind is bound to the domain(s) it is asserted in. `PrerequisiteOf`
/// and `Scaffolds` are the ordering kinds and must stay acyclic per domain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    /// Cross-domain structural analogy; stored with domains in sorted order.
    AnalogousTo(Domain, Domain),
    /// Marks the target misconception as commonly confused with the source.
    CommonMisconception,
    /// Source must be mastered before the target, within the given domain.
    PrerequisiteOf(Domain),
    /// Source is pedagogical scaffolding introduced to reach the target.
    Scaffolds(Domain),
}

impl EdgeKind {
    /// Construct an analogy kind, normalizing domain order and rejecting
    /// same-domain analogies.
    pub fn analogous_to(a: Domain, b: Domain) -> Result<Self, ModelError> {
        if a == b {
            return Err(ModelError::SelfAnalogy { domain: a.name().to_string() });
        }
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        Ok(EdgeKind::AnalogousTo(lo, hi))
    }

    /// Canonical rendering, e.g. `prerequisite_of@Physics` or
    /// `analogous_to@Algebra<->Geometry`.
    pub fn render(&self) -> String {
        match self {
            EdgeKind::AnalogousTo(a, b) => format!("analogous_to@{a}<->{b}"),
            EdgeKind::CommonMisconception => "common_misconception".to_string(),
            EdgeKind::PrerequisiteOf(d) => format!("prerequisite_of@{d}"),
            EdgeKind::Scaffolds(d) => format!("scaffolds@{d}"),
        }
    }

    /// Parse the canonical rendering.
    pub fn parse(s: &str) -> Result<Self, ModelError> {
        if s == "common_misconception" {
            return Ok(EdgeKind::CommonMisconception);
        }
        if let Some(rest) = s.strip_prefix("prerequisite_of@") {
            return Ok(EdgeKind::PrerequisiteOf(Domain::new(rest)?));
        }
        if let Some(rest) = s.strip_prefix("scaffolds@") {
            return Ok(EdgeKind::Scaffolds(Domain::new(rest)?));
        }
        if let Some(rest) = s.strip_prefix("analogous_to@") {
            if let Some((a, b)) = rest.split_once("<->") {
                return EdgeKind::analogous_to(Domain::new(a)?, Domain::new(b)?);
            }
        }
        Err(ModelError::InvalidDomain { name: s.to_string() })
    }

    /// Whether this kind participates in the per-domain acyclicity invariant.
    pub fn is_ordering(&self) -> bool {
        matches!(self, EdgeKind::PrerequisiteOf(_) | EdgeKind::Scaffolds(_))
    }

    /// The kind with analogy domains sorted.
    pub fn normalized(&self) -> Self {
        match self {
            EdgeKind::AnalogousTo(a, b) if a > b => EdgeKind::AnalogousTo(b.clone(), a.clone()),
            other => other.clone(),
        }
    }

    /// Domains named by the kind, in rendering order.
    pub fn domains(&self) -> Vec<&Domain> {
        match self {
            EdgeKind::AnalogousTo(a, b) => vec![a, b],
            EdgeKind::CommonMisconception => vec![],
            EdgeKind::PrerequisiteOf(d) | EdgeKind::Scaffolds(d) => vec![d],
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Identity of an edge: kind plus endpoints, in normalized orientation.
///
/// Analogies are undirected; the constructor orients them so the endpoint in
/// the kind's first (smaller) domain is the source. All other kinds are
/// directed and keep their given orientation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgeRef {
    /// Relationship kind, analogy domains sorted.
    pub kind: EdgeKind,
    /// Source endpoint.
    pub source: ConceptId,
    /// Target endpoint.
    pub target: ConceptId,
}

impl EdgeRef {
    /// Build a normalized edge identity.
    pub fn new(kind: EdgeKind, source: ConceptId, target: ConceptId) -> Self {
        let kind = kind.normalized();
        let (source, target) = match &kind {
            EdgeKind::AnalogousTo(lo, hi) if lo != hi => {
                // Orient so the source sits in the smaller domain, when the
                // endpoints actually span the two named domains.
                if source.domain() == hi && target.domain() == lo {
                    (target, source)
                } else {
                    (source, target)
                }
            }
            _ => (source, target),
        };
        Self { kind, source, target }
    }

    /// Canonical space-delimited rendering: `kind source target`.
    pub fn render(&self) -> String {
        format!("{} {} {}", self.kind.render(), self.source, self.target)
    }

    /// Compact rendering for messages and report loci: `kind(source->target)`.
    pub fn compact(&self) -> String {
        format!("{}({}->{})", self.kind.render(), self.source, self.target)
    }
}

impl fmt::Display for EdgeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.compact())
    }
}

impl Ord for EdgeRef {
    fn cmp(&self, other: &Self) -> Ordering {
        // Canonical order is the byte order of the rendered identity.
        self.render().cmp(&other.render())
    }
}

impl PartialOrd for EdgeRef {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// An edge of the graph: identity plus provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PedagogicalEdge {
    /// Relationship kind.
    pub kind: EdgeKind,
    /// Source endpoint.
    pub source: ConceptId,
    /// Target endpoint.
    pub target: ConceptId,
    /// Attribution and review record.
    pub provenance: Provenance,
}

impl PedagogicalEdge {
    /// The normalized identity of this edge.
    pub fn edge_ref(&self) -> EdgeRef {
        EdgeRef::new(self.kind.clone(), self.source.clone(), self.target.clone())
    }

    /// Copy of this edge in normalized orientation.
    pub fn normalized(&self) -> Self {
        let r = self.edge_ref();
        Self { kind: r.kind, source: r.source, target: r.target, provenance: self.provenance.clone() }
    }
}

/// Reference to a graph element, for removal and provenance updates.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementRef {
    /// A node, by id.
    Node(ConceptId),
    /// An edge, by normalized identity.
    Edge(EdgeRef),
}

impl fmt::Display for ElementRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementRef::Node(id) => write!(f, "{id}"),
            ElementRef::Edge(e) => write!(f, "{e}"),
        }
    }
}
