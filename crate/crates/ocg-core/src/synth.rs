//! Seeded random generators for graphs, changesets, repositories, and
//! traces (behind the `synth` feature).
//!
//! Everything here is deterministic in the seed, valid by construction
//! (generation goes through the same guarded operations the engine
//! exposes), and shared between property tests, acceptance suites, and
//! benchmarks so they all talk about the same distribution of inputs.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use std::collections::BTreeSet;

use crate::cdc::{rule_display, CdcClaim, CdcTrace, StepLabel};
use crate::change::{ChangeOp, ChangeSet};
use crate::check::Severity;
use crate::graph::CognitiveGraph;
use crate::model::{
    ConceptId, ConceptNode, Domain, EdgeKind, EdgeRef, ElementRef, NodeKind, PedagogicalEdge,
    Provenance,
};
use crate::repo::{LineId, RepoConfig, Repository, ReviewKind, ReviewRecord, Role, Verdict};
use crate::time::Timestamp;

/// The deterministic RNG used throughout.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Bounds and switches for graph generation.
#[derive(Debug, Clone)]
pub struct GraphSpec {
    /// Upper bound on node count (at least 1 node is always generated).
    pub max_nodes: usize,
    /// Upper bound on distinct domains.
    pub max_domains: usize,
    /// Ordering-edge attempts as a multiple of node count.
    pub edge_density: f64,
    /// Generate rule nodes.
    pub with_rules: bool,
    /// Generate misconception nodes and edges.
    pub with_misconceptions: bool,
    /// Generate analogy edges across domains.
    pub with_analogies: bool,
    /// Declare random domain transitions.
    pub with_transitions: bool,
}

impl Default for GraphSpec {
    fn default() -> Self {
        Self {
            max_nodes: 20,
            max_domains: 3,
            edge_density: 1.5,
            with_rules: true,
            with_misconceptions: true,
            with_analogies: true,
            with_transitions: true,
        }
    }
}

/// A timestamp somewhere in 2024–2025, whole seconds.
pub fn timestamp(rng: &mut impl Rng) -> Timestamp {
    let base = 1_704_067_200i64; // 2024-01-01T00:00:00Z
    Timestamp::from_unix_seconds(base + rng.gen_range(0..63_000_000))
}

/// Provenance with 1–2 contributors and 0–2 evidence references.
pub fn provenance(rng: &mut impl Rng) -> Provenance {
    let contributors = (0..rng.gen_range(1..=2))
        .map(|i| format!("contributor-{}{i}", rng.gen_range(0..8)))
        .collect();
    let evidence = (0..rng.gen_range(0..=2))
        .map(|i| format!("doi:10.0/{}{i}", rng.gen_range(100..999)))
        .collect();
    Provenance::new(contributors, evidence, timestamp(rng)).expect("generated provenance is valid")
}

fn domain_pool(count: usize) -> Vec<Domain> {
    let names = ["Algebra", "Geometry", "Physics", "Music", "Logic", "Chemistry"];
    (0..count)
        .map(|i| {
            if i < names.len() {
                Domain::new(names[i]).expect("pool name valid")
            } else {
                Domain::new(&format!("Domain{i}")).expect("generated name valid")
            }
        })
        .collect()
}

/// A random graph honouring every structural invariant.
///
/// Ordering edges are only attempted from lower-numbered to higher-numbered
/// nodes, so the per-domain ordering subgraphs are acyclic by construction;
/// everything else goes through the guarded operations and simply skips
/// rejected insertions.
pub fn graph(rng: &mut impl Rng, spec: &GraphSpec) -> CognitiveGraph {
    let domains = domain_pool(rng.gen_range(1..=spec.max_domains.max(1)));
    let node_count = rng.gen_range(1..=spec.max_nodes.max(1));
    let mut g = CognitiveGraph::new();
    let mut ids: Vec<ConceptId> = Vec::new();

    for i in 0..node_count {
        let domain = domains[rng.gen_range(0..domains.len())].clone();
        let roll: f64 = rng.gen();
        let (kind, term) = if spec.with_rules && roll < 0.2 {
            (NodeKind::Rule, format!("rule_{i}"))
        } else if spec.with_misconceptions && roll < 0.35 {
            (NodeKind::Misconception, format!("myth_{i}"))
        } else {
            (NodeKind::Concept, format!("concept_{i}"))
        };
        let id = ConceptId::new(&term, domain).expect("generated id is valid");
        let node = ConceptNode {
            id: id.clone(),
            kind,
            description: format!("node {i}"),
            provenance: provenance(rng),
        };
        g = g.add_node(node).expect("fresh node always inserts");
        ids.push(id);
    }

    let ordering_attempts = (node_count as f64 * spec.edge_density) as usize;
    for _ in 0..ordering_attempts {
        if ids.len() < 2 {
            break;
        }
        let a = rng.gen_range(0..ids.len() - 1);
        let b = rng.gen_range(a + 1..ids.len());
        let (src, dst) = (&ids[a], &ids[b]);
        if src.domain() != dst.domain() {
            continue;
        }
        let d = src.domain().clone();
        let kind =
            if rng.gen_bool(0.7) { EdgeKind::PrerequisiteOf(d) } else { EdgeKind::Scaffolds(d) };
        let edge = PedagogicalEdge {
            kind,
            source: src.clone(),
            target: dst.clone(),
            provenance: provenance(rng),
        };
        let _ = g.add_edge(edge).map(|next| g = next);
    }

    if spec.with_misconceptions {
        for _ in 0..node_count / 3 {
            let a = &ids[rng.gen_range(0..ids.len())];
            let b = &ids[rng.gen_range(0..ids.len())];
            let edge = PedagogicalEdge {
                kind: EdgeKind::CommonMisconception,
                source: a.clone(),
                target: b.clone(),
                provenance: provenance(rng),
            };
            let _ = g.add_edge(edge).map(|next| g = next);
        }
    }

    if spec.with_analogies {
        for _ in 0..node_count / 3 {
            let a = &ids[rng.gen_range(0..ids.len())];
            let b = &ids[rng.gen_range(0..ids.len())];
            if a.domain() == b.domain() {
                continue;
            }
            let Ok(kind) = EdgeKind::analogous_to(a.domain().clone(), b.domain().clone()) else {
                continue;
            };
            let edge = PedagogicalEdge {
                kind,
                source: a.clone(),
                target: b.clone(),
                provenance: provenance(rng),
            };
            let _ = g.add_edge(edge).map(|next| g = next);
        }
    }

    if spec.with_transitions {
        for _ in 0..domains.len() {
            let from = domains[rng.gen_range(0..domains.len())].clone();
            let to = domains[rng.gen_range(0..domains.len())].clone();
            let _ = g.declare_transition(from, to).map(|next| g = next);
        }
    }

    g
}

/// A changeset that applies cleanly to `base` and passes submission checks.
///
/// Ops are screened through the guarded operations on a scratch copy, so
/// raw application cannot fail and the result keeps every structural
/// invariant.
pub fn changeset(rng: &mut impl Rng, base: &CognitiveGraph, tag: u64) -> ChangeSet {
    let mut scratch = base.clone();
    let mut ops: Vec<ChangeOp> = Vec::new();
    let want = rng.gen_range(1..=4);
    let mut fresh = 0u64;

    for _ in 0..want * 8 {
        if ops.len() >= want {
            break;
        }
        let ids: Vec<ConceptId> = scratch.nodes().map(|n| n.id.clone()).collect();
        match rng.gen_range(0..5) {
            // Add a fresh node, sometimes in a fresh domain.
            0 => {
                let domain = if ids.is_empty() || rng.gen_bool(0.25) {
                    Domain::new(&format!("Topic{tag}x{fresh}")).expect("generated domain valid")
                } else {
                    ids[rng.gen_range(0..ids.len())].domain().clone()
                };
                let id = ConceptId::new(&format!("added_{tag}_{fresh}"), domain)
                    .expect("generated id valid");
                fresh += 1;
                let node = ConceptNode {
                    id,
                    kind: NodeKind::Concept,
                    description: "generated".into(),
                    provenance: provenance(rng),
                };
                if let Ok(next) = scratch.add_node(node.clone()) {
                    scratch = next;
                    ops.push(ChangeOp::AddNode(node));
                }
            }
            // Add an ordering edge between same-domain nodes.
            1 if ids.len() >= 2 => {
                let a = &ids[rng.gen_range(0..ids.len())];
                let b = &ids[rng.gen_range(0..ids.len())];
                if a == b || a.domain() != b.domain() {
                    continue;
                }
                let d = a.domain().clone();
                let kind = if rng.gen_bool(0.7) {
                    EdgeKind::PrerequisiteOf(d)
                } else {
                    EdgeKind::Scaffolds(d)
                };
                let edge = PedagogicalEdge {
                    kind,
                    source: a.clone(),
                    target: b.clone(),
                    provenance: provenance(rng),
                };
                if let Ok(next) = scratch.add_edge(edge.clone()) {
                    scratch = next;
                    ops.push(ChangeOp::AddEdge(edge));
                }
            }
            // Remove an existing edge.
            2 => {
                let edges: Vec<EdgeRef> = scratch.edges().map(|(r, _)| r.clone()).collect();
                if edges.is_empty() {
                    continue;
                }
                let edge = edges[rng.gen_range(0..edges.len())].clone();
                if let Ok(next) = scratch.remove_element(&ElementRef::Edge(edge.clone())) {
                    scratch = next;
                    ops.push(ChangeOp::RemoveEdge(edge));
                }
            }
            // Remove an isolated node.
            3 if !ids.is_empty() => {
                let id = ids[rng.gen_range(0..ids.len())].clone();
                if let Ok(next) = scratch.remove_element(&ElementRef::Node(id.clone())) {
                    scratch = next;
                    ops.push(ChangeOp::RemoveNode(id));
                }
            }
            // Refresh provenance on a node.
            4 if !ids.is_empty() => {
                let id = ids[rng.gen_range(0..ids.len())].clone();
                let fresh_prov = provenance(rng);
                let element = ElementRef::Node(id);
                if let Ok(next) = scratch.update_provenance(&element, fresh_prov.clone()) {
                    scratch = next;
                    ops.push(ChangeOp::UpdateProvenance(element, fresh_prov));
                }
            }
            _ => continue,
        }
    }

    if ops.is_empty() {
        // Always possible regardless of the base graph.
        let domain = Domain::new(&format!("Topic{tag}")).expect("generated domain valid");
        let id = ConceptId::new(&format!("fallback_{tag}"), domain).expect("generated id valid");
        ops.push(ChangeOp::AddNode(ConceptNode {
            id,
            kind: NodeKind::Concept,
            description: "generated".into(),
            provenance: provenance(rng),
        }));
    }

    ChangeSet::new(
        format!("author-{}", rng.gen_range(0..5)),
        format!("generated change {tag}"),
        Severity::Minor,
        ops,
    )
    .expect("generated changeset is well-formed")
}

/// A passing expert-review record.
pub fn pass_record(actor: &str, role: Role, at: Timestamp) -> ReviewRecord {
    ReviewRecord {
        kind: ReviewKind::ExpertReview,
        actor: actor.to_string(),
        role,
        verdict: Verdict::Pass,
        document_ref: format!("review:{actor}"),
        at,
    }
}

/// Submit, approve, and merge `cs` on `line`, satisfying whatever quorum
/// the line and effective severity demand.
pub fn merge_change(
    repo: &mut Repository,
    line: LineId,
    id: &str,
    cs: ChangeSet,
    now: Timestamp,
) -> Result<(), crate::repo::VersionError> {
    repo.submit_proposal(id, line.clone(), cs, now)?;
    match line {
        LineId::Trunk => {
            let quorum = repo.config().quorum;
            for i in 0..quorum {
                repo.advance_proposal(
                    id,
                    pass_record(&format!("committee-{i}"), Role::AcademicCommittee, now),
                )?;
            }
            if repo.proposal(id).expect("just submitted").severity() >= Severity::Significant {
                repo.advance_proposal(id, pass_record("researcher-0", Role::Researcher, now))?;
            }
        }
        LineId::Branch(_) => {
            repo.advance_proposal(id, pass_record("maintainer-0", Role::BranchMaintainer, now))?;
        }
    }
    repo.merge_proposal(id, now)?;
    Ok(())
}

/// A repository grown by merging random changesets: `trunk_revisions`
/// merges on the trunk (after the seed revision) and up to `branch_count`
/// branches, each receiving 0–2 overlay revisions.
pub fn repository(
    rng: &mut impl Rng,
    trunk_revisions: usize,
    branch_count: usize,
) -> Repository {
    let seed = graph(rng, &GraphSpec { max_nodes: 8, ..GraphSpec::default() });
    // After every timestamp the generator can produce, so provenance is
    // never "in the future" at submission time.
    let now = Timestamp::from_unix_seconds(1_767_225_600); // 2026-01-01T00:00:00Z
    let mut repo = Repository::init(&seed, RepoConfig::default(), now)
        .expect("generated seed graph passes checks");
    let mut counter = 0u64;

    for b in 0..branch_count {
        repo.create_branch(&format!("branch-{b}")).expect("fresh branch name");
    }

    for _ in 0..trunk_revisions {
        let head = repo.head_snapshot(&LineId::Trunk).expect("trunk exists");
        let cs = changeset(rng, &head, counter);
        let id = format!("P{counter}");
        counter += 1;
        merge_change(&mut repo, LineId::Trunk, &id, cs, now)
            .expect("generated changeset merges cleanly");
    }

    for b in 0..branch_count {
        let line = LineId::Branch(format!("branch-{b}"));
        for _ in 0..rng.gen_range(0..=2) {
            let head = repo.head_snapshot(&line).expect("branch exists");
            let cs = changeset(rng, &head, counter);
            let id = format!("P{counter}");
            counter += 1;
            merge_change(&mut repo, line.clone(), &id, cs, now)
                .expect("generated changeset merges cleanly");
        }
    }

    repo
}

/// Claim text from a safe alphabet (never collides with markers or arrows).
pub fn claim_text(rng: &mut impl Rng, i: usize) -> String {
    let words = ["value", "term", "sum", "ratio", "angle", "area", "force", "pitch"];
    let mut out = format!("step{i}");
    for _ in 0..rng.gen_range(1..=3) {
        out.push(' ');
        out.push_str(words[rng.gen_range(0..words.len())]);
        if rng.gen_bool(0.4) {
            out.push_str(&format!(" = {}", rng.gen_range(0..100)));
        }
    }
    out
}

/// A random valid trace over the graph's domains, following only
/// admissible transitions; `None` when the graph declares no domains.
pub fn trace(rng: &mut impl Rng, g: &CognitiveGraph, max_steps: usize) -> Option<CdcTrace> {
    let domains: Vec<Domain> = g.declared_domains().cloned().collect();
    if domains.is_empty() {
        return None;
    }
    let mut here = domains[rng.gen_range(0..domains.len())].clone();
    let steps = rng.gen_range(1..=max_steps.max(1));
    let mut labels = Vec::new();
    for _ in 0..steps {
        // Candidate next domains: stay, declared transition, analogy bridge.
        let mut next: BTreeSet<Domain> = BTreeSet::new();
        next.insert(here.clone());
        for (from, to) in g.transitions() {
            if from == &here {
                next.insert(to.clone());
            }
        }
        for (edge, _) in g.edges() {
            if let EdgeKind::AnalogousTo(d1, d2) = &edge.kind {
                if d1 == &here {
                    next.insert(d2.clone());
                } else if d2 == &here {
                    next.insert(d1.clone());
                }
            }
        }
        let next: Vec<Domain> = next.into_iter().collect();
        let target = next[rng.gen_range(0..next.len())].clone();
        let rules: Vec<&ConceptNode> = g
            .nodes()
            .filter(|n| n.kind == NodeKind::Rule && n.id.domain() == &target)
            .collect();
        let label = if !rules.is_empty() && rng.gen_bool(0.5) {
            let rule = rules[rng.gen_range(0..rules.len())];
            StepLabel::Apply {
                domain: target.clone(),
                rule: rule_display(rule.id.term()),
            }
        } else {
            StepLabel::Compute { domain: target.clone() }
        };
        labels.push(label);
        here = target;
    }
    let claims: Vec<CdcClaim> = (0..=labels.len())
        .map(|i| CdcClaim::new(&claim_text(rng, i)).expect("claim text is safe"))
        .collect();
    Some(CdcTrace::from_claims(claims, labels).expect("claims and labels line up"))
}

/// Render `trace` in a randomly chosen tolerated layout: canonical, fully
/// inline, display-style with blank lines and `$` math wrapping, or
/// chain-style with restated claims. All of them parse back to `trace`.
pub fn messy_trace_text(rng: &mut impl Rng, trace: &CdcTrace) -> String {
    match rng.gen_range(0..4) {
        // Canonical.
        0 => crate::cdc::serialize_trace(trace),
        // Single line, inline arrows.
        1 => {
            let mut out = String::new();
            out.push_str(trace.given().text());
            for step in trace.steps() {
                out.push(' ');
                out.push_str(&step.label.render_arrow());
                out.push(' ');
                out.push_str(step.to_claim.text());
            }
            out.push('\n');
            out
        }
        // Display style: blank lines, $-wrapped claims, markers.
        2 => {
            let mut out = format!("Given: ${}$\n\n", trace.given());
            for (i, step) in trace.steps().iter().enumerate() {
                out.push_str(&step.label.render_arrow());
                out.push_str("\n\n");
                if i + 1 == trace.steps().len() {
                    out.push_str(&format!("Final answer: ${}$\n", step.to_claim));
                } else {
                    out.push_str(&format!("$${}$$\n\n", step.to_claim));
                }
            }
            out
        }
        // Chain style: every line restates the previous claim.
        _ => {
            let mut out = String::new();
            for step in trace.steps() {
                out.push_str(&format!(
                    "{} {} {}\n",
                    step.from_claim,
                    step.label.render_arrow(),
                    step.to_claim
                ));
            }
            out
        }
    }
}
