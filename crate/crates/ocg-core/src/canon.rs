//! Canonical text form of a graph snapshot (`.ocg` documents).
//!
//! Serialization is deterministic: equal graphs produce identical bytes, so
//! snapshot digests and byte comparison are meaningful. The layout is
//! line-oriented:
//!
//! ```text
//! OCG 1
//! counts <domains> <transitions> <nodes> <edges>
//! domain <name>
//! transition <from> <to>
//! node <kind> <id> | <description> | <contributors> | <evidence> | <last-validated>
//! edge <kind> <source> <target> | <contributors> | <evidence> | <last-validated>
//! ```
//!
//! Domains are sorted by name, transitions by `(from, to)`, nodes by
//! canonical id, and edges by the rendering of `(kind, source, target)`.
//! The empty graph is exactly the two header lines with zero counts.
//! Parsing is tolerant of entry order and blank lines but rejects duplicate
//! entries, bad counts, and malformed lines with a line-numbered error.
//! Parsing restores exactly what the document says — it does not re-derive
//! domain declarations or re-check invariants, so a hand-edited document can
//! produce a graph that the checks subsystem will reject.

use crate::graph::CognitiveGraph;
use crate::hash;
use crate::model::{ConceptId, ConceptNode, Domain, EdgeKind, EdgeRef, NodeKind, Provenance};
use crate::text::{escape_field, join_list, split_fields, split_list, unescape_field, FIELD_SEP};
use crate::time::Timestamp;

/// Magic first line of a graph document.
pub const GRAPH_HEADER: &str = "OCG 1";

/// A parse failure with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    /// 1-based line number of the offending line.
    pub line: usize,
    /// What was wrong.
    pub message: String,
}

impl ParseError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        Self { line, message: message.into() }
    }
}

/// Serialize a graph to its canonical text form.
pub fn canonical_serialize(graph: &CognitiveGraph) -> String {
    let mut out = String::new();
    out.push_str(GRAPH_HEADER);
    out.push('\n');
    out.push_str(&format!(
        "counts {} {} {} {}\n",
        graph.declared_domains().count(),
        graph.transitions().count(),
        graph.node_count(),
        graph.edge_count(),
    ));
    for domain in graph.declared_domains() {
        out.push_str(&format!("domain {domain}\n"));
    }
    for (from, to) in graph.transitions() {
        out.push_str(&format!("transition {from} {to}\n"));
    }
    for node in graph.nodes() {
        out.push_str(&render_node_line(node));
        out.push('\n');
    }
    for (r, prov) in graph.edges() {
        out.push_str(&render_edge_line(r, prov));
        out.push('\n');
    }
    out
}

/// Digest of the canonical serialization, as 16 lowercase hex digits.
pub fn snapshot_digest(graph: &CognitiveGraph) -> String {
    hash::digest_hex(canonical_serialize(graph).as_bytes())
}

/// Parse a canonical (or hand-edited) graph document.
pub fn canonical_parse(text: &str) -> Result<CognitiveGraph, ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)));

    let (n, header) = lines.next().ok_or_else(|| ParseError::new(1, "empty document"))?;
    if header != GRAPH_HEADER {
        return Err(ParseError::new(n, format!("expected {GRAPH_HEADER:?} header")));
    }
    let (n, counts_line) = lines.next().ok_or_else(|| ParseError::new(2, "missing counts line"))?;
    let counts_at = n;
    let declared = parse_counts(n, counts_line)?;

    let mut graph = CognitiveGraph::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let (keyword, rest) = line.split_once(' ').unwrap_or((line, ""));
        match keyword {
            "domain" => {
                let d = parse_domain(n, rest.trim())?;
                if !graph.domains_mut().insert(d) {
                    return Err(ParseError::new(n, format!("duplicate domain {}", rest.trim())));
                }
            }
            "transition" => {
                let mut parts = rest.split_whitespace();
                let (from, to) = match (parts.next(), parts.next(), parts.next()) {
                    (Some(f), Some(t), None) => (parse_domain(n, f)?, parse_domain(n, t)?),
                    _ => return Err(ParseError::new(n, "expected: transition <from> <to>")),
                };
                let rendered = format!("{from} {to}");
                if !graph.transitions_mut().insert((from, to)) {
                    return Err(ParseError::new(n, format!("duplicate transition {rendered}")));
                }
            }
            "node" => {
                let node = parse_node_line(n, rest)?;
                let id = node.id.clone();
                if graph.nodes_mut().insert(id.clone(), node).is_some() {
                    return Err(ParseError::new(n, format!("duplicate node {id}")));
                }
            }
            "edge" => {
                let (r, prov) = parse_edge_line(n, rest)?;
                let rendered = r.compact();
                if graph.edges_mut().insert(r, prov).is_some() {
                    return Err(ParseError::new(n, format!("duplicate edge {rendered}")));
                }
            }
            other => {
                return Err(ParseError::new(n, format!("unknown entry keyword {other:?}")));
            }
        }
    }

    let actual = [
        graph.declared_domains().count(),
        graph.transitions().count(),
        graph.node_count(),
        graph.edge_count(),
    ];
    if declared != actual {
        return Err(ParseError::new(
            counts_at,
            format!(
                "counts line declares {} {} {} {} but document has {} {} {} {}",
                declared[0], declared[1], declared[2], declared[3], actual[0], actual[1], actual[2],
                actual[3]
            ),
        ));
    }
    Ok(graph)
}

fn render_node_line(node: &ConceptNode) -> String {
    [
        format!("node {} {}", node.kind.render(), node.id),
        escape_field(&node.description),
        join_list(node.provenance.contributors()),
        join_list(node.provenance.evidence()),
        node.provenance.last_validated().to_string(),
    ]
    .join(FIELD_SEP)
}

fn render_edge_line(r: &EdgeRef, prov: &Provenance) -> String {
    [
        format!("edge {}", r.render()),
        join_list(prov.contributors()),
        join_list(prov.evidence()),
        prov.last_validated().to_string(),
    ]
    .join(FIELD_SEP)
}

fn parse_counts(n: usize, line: &str) -> Result<[usize; 4], ParseError> {
    let rest = line
        .strip_prefix("counts ")
        .ok_or_else(|| ParseError::new(n, "expected counts line after header"))?;
    let nums: Vec<usize> = rest
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| ParseError::new(n, "counts line must hold four integers"))?;
    let arr: [usize; 4] =
        nums.try_into().map_err(|_| ParseError::new(n, "counts line must hold four integers"))?;
    Ok(arr)
}

fn parse_domain(n: usize, token: &str) -> Result<Domain, ParseError> {
    Domain::new(token).map_err(|e| ParseError::new(n, e.to_string()))
}

/// Parse provenance from the trailing three fragments of a node/edge line.
fn parse_provenance(n: usize, fragments: &[&str]) -> Result<Provenance, ParseError> {
    let contributors = split_list(fragments[0]).map_err(|e| ParseError::new(n, e))?;
    let evidence = split_list(fragments[1]).map_err(|e| ParseError::new(n, e))?;
    let ts = Timestamp::parse(fragments[2].trim()).map_err(|e| ParseError::new(n, e.to_string()))?;
    Provenance::new(contributors, evidence, ts).map_err(|e| ParseError::new(n, e.to_string()))
}

fn parse_node_line(n: usize, rest: &str) -> Result<ConceptNode, ParseError> {
    let fragments = split_fields(rest);
    if fragments.len() != 5 {
        return Err(ParseError::new(
            n,
            "expected: node <kind> <id> | <description> | <contributors> | <evidence> | <timestamp>",
        ));
    }
    let mut head = fragments[0].split_whitespace();
    let (kind_tok, id_tok) = match (head.next(), head.next(), head.next()) {
        (Some(k), Some(i), None) => (k, i),
        _ => return Err(ParseError::new(n, "expected node head: <kind> <id>")),
    };
    let kind = NodeKind::parse(kind_tok)
        .ok_or_else(|| ParseError::new(n, format!("unknown node kind {kind_tok:?}")))?;
    let id = ConceptId::parse(id_tok).map_err(|e| ParseError::new(n, e.to_string()))?;
    let description = unescape_field(fragments[1]).map_err(|e| ParseError::new(n, e))?;
    let provenance = parse_provenance(n, &fragments[2..5])?;
    Ok(ConceptNode { id, kind, description, provenance })
}

fn parse_edge_line(n: usize, rest: &str) -> Result<(EdgeRef, Provenance), ParseError> {
    let fragments = split_fields(rest);
    if fragments.len() != 4 {
        return Err(ParseError::new(
            n,
            "expected: edge <kind> <source> <target> | <contributors> | <evidence> | <timestamp>",
        ));
    }
    let mut head = fragments[0].split_whitespace();
    let (kind_tok, src_tok, dst_tok) = match (head.next(), head.next(), head.next(), head.next()) {
        (Some(k), Some(s), Some(t), None) => (k, s, t),
        _ => return Err(ParseError::new(n, "expected edge head: <kind> <source> <target>")),
    };
    let kind = EdgeKind::parse(kind_tok).map_err(|e| ParseError::new(n, e.to_string()))?;
    let source = ConceptId::parse(src_tok).map_err(|e| ParseError::new(n, e.to_string()))?;
    let target = ConceptId::parse(dst_tok).map_err(|e| ParseError::new(n, e.to_string()))?;
    let provenance = parse_provenance(n, &fragments[1..4])?;
    Ok((EdgeRef::new(kind, source, target), provenance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ElementRef, PedagogicalEdge};

    fn ts(s: &str) -> Timestamp {
        Timestamp::parse(s).unwrap()
    }

    fn sample() -> CognitiveGraph {
        let prov = Provenance::new(
            vec!["curriculum-board".into()],
            vec!["study:2019".into()],
            ts("2026-01-15T00:00:00Z"),
        )
        .unwrap();
        let d = |s: &str| Domain::new(s).unwrap();
        let id = |s: &str| ConceptId::parse(s).unwrap();
        let mut g = CognitiveGraph::new();
        for (term, kind, desc) in [
            ("energy_as_property@Physics", NodeKind::Concept, "energy as a system property"),
            ("energy_conservation@Physics", NodeKind::Concept, "energy is conserved"),
            ("energy_is_used_up@Physics", NodeKind::Misconception, "energy gets consumed"),
        ] {
            g = g
                .add_node(ConceptNode {
                    id: id(term),
                    kind,
                    description: desc.to_string(),
                    provenance: prov.clone(),
                })
                .unwrap();
        }
        g = g
            .add_edge(PedagogicalEdge {
                kind: EdgeKind::PrerequisiteOf(d("Physics")),
                source: id("energy_as_property@Physics"),
                target: id("energy_conservation@Physics"),
                provenance: prov.clone(),
            })
            .unwrap()
            .add_edge(PedagogicalEdge {
                kind: EdgeKind::CommonMisconception,
                source: id("energy_conservation@Physics"),
                target: id("energy_is_used_up@Physics"),
                provenance: prov,
            })
            .unwrap();
        g.declare_domain(d("Algebra")).declare_transition(d("Physics"), d("Algebra")).unwrap()
    }

    #[test]
    fn empty_graph_is_two_lines() {
        assert_eq!(canonical_serialize(&CognitiveGraph::new()), "OCG 1\ncounts 0 0 0 0\n");
    }

    #[test]
    fn round_trip_preserves_equality_and_bytes() {
        let g = sample();
        let text = canonical_serialize(&g);
        let parsed = canonical_parse(&text).unwrap();
        assert_eq!(parsed, g);
        assert_eq!(canonical_serialize(&parsed), text);
    }

    #[test]
    fn serialization_is_independent_of_construction_order() {
        let g = sample();
        // Rebuild in a different insertion order via parse of a reordered doc.
        let text = canonical_serialize(&g);
        let mut lines: Vec<&str> = text.lines().collect();
        lines[2..].reverse();
        let reordered = lines.join("\n");
        let parsed = canonical_parse(&reordered).unwrap();
        assert_eq!(canonical_serialize(&parsed), text);
    }

    #[test]
    fn layout_is_grouped_and_sorted() {
        let text = canonical_serialize(&sample());
        let keywords: Vec<&str> =
            text.lines().skip(2).map(|l| l.split(' ').next().unwrap()).collect();
        let mut sorted_by_group = keywords.clone();
        let rank = |k: &str| match k {
            "domain" => 0,
            "transition" => 1,
            "node" => 2,
            _ => 3,
        };
        sorted_by_group.sort_by_key(|k| rank(k));
        assert_eq!(keywords, sorted_by_group);
    }

    #[test]
    fn header_and_counts_are_verified() {
        assert_eq!(canonical_parse("BAD 1\ncounts 0 0 0 0\n").unwrap_err().line, 1);
        assert_eq!(canonical_parse("OCG 1\ncounts 0 0 1 0\n").unwrap_err().line, 2);
        assert_eq!(canonical_parse("OCG 1\n").unwrap_err().line, 2);
    }

    #[test]
    fn duplicate_entries_are_rejected_with_line_numbers() {
        let doc = "OCG 1\ncounts 1 0 0 0\ndomain Physics\ndomain Physics\n";
        let err = canonical_parse(doc).unwrap_err();
        assert_eq!(err.line, 4);
        assert!(err.message.contains("duplicate domain"));
    }

    #[test]
    fn malformed_lines_carry_their_line_number() {
        let doc = "OCG 1\ncounts 0 0 1 0\nnode concept broken\n";
        let err = canonical_parse(doc).unwrap_err();
        assert_eq!(err.line, 3);
    }

    #[test]
    fn awkward_description_content_round_trips() {
        let prov =
            Provenance::new(vec!["a|b;c".into()], vec!["line\nbreak".into()], ts("2026-01-15T00:00:00Z"))
                .unwrap();
        let g = CognitiveGraph::new()
            .add_node(ConceptNode {
                id: ConceptId::parse("x@P").unwrap(),
                kind: NodeKind::Concept,
                description: "pipes | and; semis \\ and\nnewlines".to_string(),
                provenance: prov,
            })
            .unwrap();
        let parsed = canonical_parse(&canonical_serialize(&g)).unwrap();
        assert_eq!(parsed, g);
    }

    #[test]
    fn parse_does_not_rederive_domain_declarations() {
        // A node whose domain is not declared parses fine; checks flag it later.
        let doc = "OCG 1\ncounts 0 0 1 0\nnode concept x@Ghost | d | a |  | 2026-01-15T00:00:00Z\n";
        let g = canonical_parse(doc).unwrap();
        assert!(!g.is_declared(&Domain::new("Ghost").unwrap()));
        assert_eq!(g.node_count(), 1);
    }

    #[test]
    fn snapshot_digest_tracks_content() {
        let g = sample();
        let d1 = snapshot_digest(&g);
        assert_eq!(d1.len(), 16);
        let g2 = g.remove_element(&ElementRef::Edge(EdgeRef::new(
            EdgeKind::CommonMisconception,
            ConceptId::parse("energy_conservation@Physics").unwrap(),
            ConceptId::parse("energy_is_used_up@Physics").unwrap(),
        )))
        .unwrap();
        assert_ne!(snapshot_digest(&g2), d1);
        assert_eq!(snapshot_digest(&g), d1);
    }
}
