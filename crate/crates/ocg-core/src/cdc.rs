//! Concept–domain–claim derivation traces.
//!
//! A trace is a chain of claims joined by labeled steps:
//!
//! ```text
//! Given: right triangle, a=3, b=4
//! --{Apply@Geometry [Pythagorean Theorem]}-->
//! c^2 = a^2 + b^2
//! --{Compute@Algebra}-->
//! c^2 = 3^2 + 4^2 = 9 + 16 = 25
//! --{Compute@Algebra}-->
//! Final answer: c = 5
//! ```
//!
//! Each step declares the domain it works in and, for `Apply` steps, the
//! rule it invokes. Claims are opaque text — the engine checks structure,
//! not arithmetic. Structure means: the named rule exists in the graph as a
//! `rule` node, consecutive steps move between domains only along declared
//! transitions or analogy bridges, and (when a mastered-concept set is
//! supplied) each applied rule's prerequisite closure is mastered.
//!
//! The parser is deliberately tolerant: claims may span several lines, the
//! whole trace may sit on a single line with inline arrows, and chain-style
//! text that restates the previous result at the start of the next line
//! (`X --{..}--> Y` / `Y --{..}--> Z`) is stitched back together. What it
//! refuses to do is guess: a restated claim that does not match what the
//! previous step produced is a [`CdcError::BrokenChain`].
//!
//! [`permitted_next_steps`] inverts validation: instead of judging a
//! finished trace it enumerates every step label that would extend a trace
//! without introducing violations, which is the hook a constrained text
//! generator needs.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::canon::ParseError;
use crate::graph::CognitiveGraph;
use crate::model::{ConceptId, Domain, EdgeKind, NodeKind};

/// One claim in a trace: opaque, normalized text.
///
/// Normalization strips `$` (math delimiters), collapses whitespace runs to
/// single spaces, and trims. Two claims are "the same" exactly when their
/// normalized text is equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CdcClaim {
    text: String,
}

impl CdcClaim {
    /// Normalize and validate claim text: non-empty, no arrow tokens.
    pub fn new(text: &str) -> Result<Self, CdcError> {
        let text = normalize_claim(text);
        if text.is_empty() {
            return Err(CdcError::EmptyClaim);
        }
        if text.contains("--{") || text.contains("}-->") {
            return Err(CdcError::ClaimContainsArrow { text });
        }
        Ok(Self { text })
    }

    /// The normalized text.
    pub fn text(&self) -> &str {
        &self.text
    }
}

impl fmt::Display for CdcClaim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Strip `$`, collapse whitespace, trim.
fn normalize_claim(text: &str) -> String {
    let no_math: String = text.chars().filter(|c| *c != '$').collect();
    no_math.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// What a step does: apply a named rule, or compute within a domain.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StepLabel {
    /// Invoke a rule of the given domain.
    Apply {
        /// Domain the step works in.
        domain: Domain,
        /// Rule name as written (prose case).
        rule: String,
    },
    /// Domain-internal computation; carries no justification.
    Compute {
        /// Domain the step works in.
        domain: Domain,
    },
}

impl StepLabel {
    /// The domain the step works in.
    pub fn domain(&self) -> &Domain {
        match self {
            StepLabel::Apply { domain, .. } | StepLabel::Compute { domain } => domain,
        }
    }

    /// Label text without the arrow decoration, e.g.
    /// `Apply@Geometry [Pythagorean Theorem]`.
    pub fn render(&self) -> String {
        match self {
            StepLabel::Apply { domain, rule } => format!("Apply@{domain} [{rule}]"),
            StepLabel::Compute { domain } => format!("Compute@{domain}"),
        }
    }

    /// The full arrow token, e.g. `--{Compute@Algebra}-->`.
    pub fn render_arrow(&self) -> String {
        format!("--{{{}}}-->", self.render())
    }

    /// Parse the text between `--{` and `}-->`.
    fn parse(line: usize, text: &str) -> Result<Self, ParseError> {
        let err = |m: String| ParseError { line, message: m };
        let text = text.trim();
        if let Some(rest) = text.strip_prefix("Apply@") {
            let split = rest
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '-'))
                .unwrap_or(rest.len());
            let domain = Domain::new(&rest[..split]).map_err(|e| err(e.to_string()))?;
            let rest = rest[split..].trim();
            let rule = rest
                .strip_prefix('[')
                .and_then(|r| r.strip_suffix(']'))
                .ok_or_else(|| err(format!("expected [rule] after Apply@{domain}")))?
                .trim();
            if rule.is_empty() {
                return Err(err("empty rule name".to_string()));
            }
            Ok(StepLabel::Apply { domain, rule: rule.to_string() })
        } else if let Some(rest) = text.strip_prefix("Compute@") {
            let domain = Domain::new(rest.trim()).map_err(|e| err(e.to_string()))?;
            Ok(StepLabel::Compute { domain })
        } else {
            Err(err(format!(
                "step label must be Apply@<domain> [<rule>] or Compute@<domain>, got {text:?}"
            )))
        }
    }
}

impl fmt::Display for StepLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// One step: a label plus the claims it connects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CdcStep {
    /// What the step does.
    pub label: StepLabel,
    /// Claim the step starts from.
    pub from_claim: CdcClaim,
    /// Claim the step produces.
    pub to_claim: CdcClaim,
}

/// A parsed trace: a given claim, at least one step, a final claim, with
/// every adjacent pair of steps sharing its intermediate claim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CdcTrace {
    given: CdcClaim,
    steps: Vec<CdcStep>,
    final_claim: CdcClaim,
}

impl CdcTrace {
    /// Assemble a trace, checking the chain invariant: `steps[0]` starts at
    /// `given`, each step starts where the previous one ended, and the last
    /// step ends at `final_claim`.
    pub fn new(
        given: CdcClaim,
        steps: Vec<CdcStep>,
        final_claim: CdcClaim,
    ) -> Result<Self, CdcError> {
        if steps.is_empty() {
            return Err(CdcError::NoSteps);
        }
        let broken = |step_index: usize, expected: &CdcClaim, found: &CdcClaim| {
            CdcError::BrokenChain {
                step_index,
                expected: expected.text().to_string(),
                found: found.text().to_string(),
            }
        };
        if steps[0].from_claim != given {
            return Err(broken(0, &given, &steps[0].from_claim));
        }
        for i in 1..steps.len() {
            if steps[i].from_claim != steps[i - 1].to_claim {
                return Err(broken(i, &steps[i - 1].to_claim, &steps[i].from_claim));
            }
        }
        let last = steps.len() - 1;
        if steps[last].to_claim != final_claim {
            return Err(broken(last, &final_claim, &steps[last].to_claim));
        }
        Ok(Self { given, steps, final_claim })
    }

    /// Build from the claim sequence and the labels between them;
    /// `claims.len()` must be `labels.len() + 1`.
    pub fn from_claims(claims: Vec<CdcClaim>, labels: Vec<StepLabel>) -> Result<Self, CdcError> {
        if labels.is_empty() || claims.len() != labels.len() + 1 {
            return Err(CdcError::NoSteps);
        }
        let steps = labels
            .into_iter()
            .enumerate()
            .map(|(i, label)| CdcStep {
                label,
                from_claim: claims[i].clone(),
                to_claim: claims[i + 1].clone(),
            })
            .collect();
        let given = claims.first().cloned().expect("claims checked non-empty");
        let final_claim = claims.last().cloned().expect("claims checked non-empty");
        Self::new(given, steps, final_claim)
    }

    /// The starting claim.
    pub fn given(&self) -> &CdcClaim {
        &self.given
    }

    /// The steps in order.
    pub fn steps(&self) -> &[CdcStep] {
        &self.steps
    }

    /// The final claim.
    pub fn final_claim(&self) -> &CdcClaim {
        &self.final_claim
    }

    /// All claims in chain order: given, intermediates, final.
    pub fn claims(&self) -> Vec<&CdcClaim> {
        let mut out = vec![&self.given];
        out.extend(self.steps.iter().map(|s| &s.to_claim));
        out
    }
}

/// Why a claim, step, or trace was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CdcError {
    /// Positional syntax failure.
    #[error("{0}")]
    Parse(#[from] ParseError),
    /// Adjacent steps disagree about the claim between them.
    #[error("broken chain at step {step_index}: expected claim {expected:?}, found {found:?}")]
    BrokenChain {
        /// Step whose from-claim disagrees.
        step_index: usize,
        /// Claim the previous step produced.
        expected: String,
        /// Claim actually found.
        found: String,
    },
    /// Claim empty after normalization.
    #[error("empty claim")]
    EmptyClaim,
    /// Claim text contains an arrow token.
    #[error("claim contains an arrow token: {text:?}")]
    ClaimContainsArrow {
        /// The offending text.
        text: String,
    },
    /// A trace needs at least one step.
    #[error("a trace needs at least one step")]
    NoSteps,
    /// Domain not declared in the graph.
    #[error("domain {domain} is not declared")]
    UnknownDomain {
        /// The undeclared domain.
        domain: Domain,
    },
}

const GIVEN_MARKER: &str = "given:";
const FINAL_MARKER: &str = "final answer:";

/// Claim fragments accumulated between two arrows.
struct PendingClaim {
    fragments: Vec<String>,
    first_line: usize,
    /// True while every fragment was written on the same line as the arrow
    /// that opened this claim — the inline chain style whose next line may
    /// restate the claim.
    from_arrow_line: bool,
}

impl PendingClaim {
    fn new() -> Self {
        Self { fragments: Vec::new(), first_line: 0, from_arrow_line: false }
    }

    fn is_empty(&self) -> bool {
        self.fragments.is_empty()
    }

    fn clear(&mut self) {
        self.fragments.clear();
        self.from_arrow_line = false;
    }

    fn push(&mut self, fragment: &str, line: usize, after_arrow_on_line: bool) {
        if self.is_empty() {
            self.first_line = line;
            self.from_arrow_line = after_arrow_on_line;
        } else if !after_arrow_on_line {
            self.from_arrow_line = false;
        }
        self.fragments.push(fragment.to_string());
    }

    fn normalized(&self) -> String {
        normalize_claim(&self.fragments.join(" "))
    }
}

/// Parse trace text.
///
/// Tolerances: blank lines and indentation are ignored; a claim may span
/// several lines; arrows may sit inline (`X --{..}--> Y --{..}--> Z`);
/// chain-style restatement of the previous result at the start of a line is
/// folded away. `Given:` and `Final answer:` markers (case-insensitive) are
/// stripped; a `Final answer:` marker overrides any working text
/// accumulated since the last arrow, which is how the common "display
/// equation, then final answer" layout collapses to a single final claim.
pub fn parse_trace(text: &str) -> Result<CdcTrace, CdcError> {
    let mut claims: Vec<CdcClaim> = Vec::new();
    let mut labels: Vec<StepLabel> = Vec::new();
    let mut pending = PendingClaim::new();
    let mut saw_final_marker = false;
    let mut last_line = 0usize;

    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        last_line = n;
        let mut cursor = raw.strip_suffix('\r').unwrap_or(raw);
        let mut line_had_arrow = false;
        loop {
            match cursor.find("--{") {
                Some(at) => {
                    let fragment = &cursor[..at];
                    let after = &cursor[at + 3..];
                    let end = after.find("}-->").ok_or(ParseError {
                        line: n,
                        message: "unterminated step label (missing }-->)".to_string(),
                    })?;
                    let label = StepLabel::parse(n, &after[..end])?;
                    consume_fragment(
                        fragment,
                        n,
                        line_had_arrow,
                        labels.len(),
                        &mut pending,
                        &mut saw_final_marker,
                    )?;
                    if saw_final_marker {
                        return Err(CdcError::Parse(ParseError {
                            line: n,
                            message: "step arrow after the final answer marker".to_string(),
                        }));
                    }
                    claims.push(close_claim(&pending, n)?);
                    pending.clear();
                    labels.push(label);
                    cursor = &after[end + 4..];
                    line_had_arrow = true;
                }
                None => {
                    consume_fragment(
                        cursor,
                        n,
                        line_had_arrow,
                        labels.len(),
                        &mut pending,
                        &mut saw_final_marker,
                    )?;
                    break;
                }
            }
        }
    }

    if labels.is_empty() {
        return Err(CdcError::Parse(ParseError {
            line: 1,
            message: "no step arrows found".to_string(),
        }));
    }
    claims.push(close_claim(&pending, last_line).map_err(|_| {
        CdcError::Parse(ParseError { line: last_line, message: "missing final claim".to_string() })
    })?);
    CdcTrace::from_claims(claims, labels)
}

/// Fold one claim fragment into `pending`, handling markers and the
/// chain-style restatement rule.
fn consume_fragment(
    fragment: &str,
    line: usize,
    after_arrow_on_line: bool,
    steps_so_far: usize,
    pending: &mut PendingClaim,
    saw_final_marker: &mut bool,
) -> Result<(), CdcError> {
    let fragment = fragment.trim();
    if fragment.is_empty() {
        return Ok(());
    }
    if fragment.contains("}-->") {
        return Err(CdcError::Parse(ParseError {
            line,
            message: "unexpected }--> without a matching --{".to_string(),
        }));
    }
    let lower = fragment.to_ascii_lowercase();
    if let Some(idx) = lower.starts_with(FINAL_MARKER).then_some(FINAL_MARKER.len()) {
        // The marker supersedes working text accumulated since the last
        // arrow (e.g. a display equation restated as the final answer).
        pending.clear();
        *saw_final_marker = true;
        let rest = fragment[idx..].trim();
        if !rest.is_empty() {
            pending.push(rest, line, after_arrow_on_line);
        }
        return Ok(());
    }
    let fragment = if steps_so_far == 0 && lower.starts_with(GIVEN_MARKER) {
        fragment[GIVEN_MARKER.len()..].trim()
    } else {
        fragment
    };
    if fragment.is_empty() {
        return Ok(());
    }
    if !after_arrow_on_line && !pending.is_empty() && pending.from_arrow_line {
        // Chain style: the line restates the previous arrow's result before
        // continuing. It must actually restate it.
        let restated = normalize_claim(fragment);
        let previous = pending.normalized();
        if restated == previous {
            return Ok(());
        }
        return Err(CdcError::BrokenChain {
            step_index: steps_so_far,
            expected: previous,
            found: restated,
        });
    }
    pending.push(fragment, line, after_arrow_on_line);
    Ok(())
}

/// Turn the pending fragments into a claim; empty pending is a syntax error.
fn close_claim(pending: &PendingClaim, at_line: usize) -> Result<CdcClaim, CdcError> {
    let text = pending.normalized();
    if text.is_empty() {
        return Err(CdcError::Parse(ParseError {
            line: at_line,
            message: "missing claim before step arrow".to_string(),
        }));
    }
    CdcClaim::new(&text).map_err(|e| match e {
        CdcError::Parse(p) => CdcError::Parse(p),
        other => CdcError::Parse(ParseError {
            line: pending.first_line.max(1),
            message: other.to_string(),
        }),
    })
}

/// Render a trace in canonical layout: the given claim, then one arrow line
/// and one claim line per step, with `Given:`/`Final answer:` markers.
/// [`parse_trace`] inverts this exactly.
pub fn serialize_trace(trace: &CdcTrace) -> String {
    let mut out = format!("Given: {}\n", trace.given());
    for (i, step) in trace.steps().iter().enumerate() {
        out.push_str(&step.label.render_arrow());
        out.push('\n');
        if i + 1 == trace.steps().len() {
            out.push_str(&format!("Final answer: {}\n", trace.final_claim()));
        } else {
            out.push_str(&format!("{}\n", step.to_claim));
        }
    }
    out
}

/// What a validated trace can be faulted for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationCode {
    /// Step domain not declared in the graph.
    UnknownDomain,
    /// Applied rule does not resolve to a rule node.
    UnknownRule,
    /// The rule exists, but in a different domain.
    RuleDomainMismatch,
    /// Consecutive steps change domain without a declared transition or
    /// analogy bridge.
    InadmissibleTransition,
    /// The rule's prerequisite closure is not covered by the mastered set.
    UnsatisfiedPrerequisite,
    /// Adjacent steps disagree about their shared claim. Parsing and trace
    /// construction already enforce the chain, so validation never emits
    /// this; it exists so reports can name the construction-time failure.
    BrokenChain,
}

impl ViolationCode {
    /// Stable report name.
    pub fn render(self) -> &'static str {
        match self {
            ViolationCode::UnknownDomain => "UnknownDomain",
            ViolationCode::UnknownRule => "UnknownRule",
            ViolationCode::RuleDomainMismatch => "RuleDomainMismatch",
            ViolationCode::InadmissibleTransition => "InadmissibleTransition",
            ViolationCode::UnsatisfiedPrerequisite => "UnsatisfiedPrerequisite",
            ViolationCode::BrokenChain => "BrokenChain",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.render())
    }
}

/// One fault found while validating a trace against a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceViolation {
    /// Which step is at fault.
    pub step_index: usize,
    /// What kind of fault.
    pub code: ViolationCode,
    /// Human-readable detail.
    pub message: String,
}

impl TraceViolation {
    /// Report line: `<step_index> <code> <message>`.
    pub fn render(&self) -> String {
        format!("{} {} {}", self.step_index, self.code, self.message)
    }
}

impl fmt::Display for TraceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Deterministic slug for rule names: lowercase, whitespace to underscores,
/// punctuation (other than `_` and `-`) dropped. `Pythagorean Theorem`
/// becomes `pythagorean_theorem`, which is the node term the validator
/// looks up.
pub fn rule_slug(name: &str) -> String {
    let mut out = String::new();
    for word in name.split_whitespace() {
        if !out.is_empty() {
            out.push('_');
        }
        for c in word.chars() {
            if c.is_alphanumeric() {
                out.extend(c.to_lowercase());
            } else if c == '_' || c == '-' {
                out.push(c);
            }
        }
    }
    out
}

/// Prose form of a rule term: underscores to spaces, words capitalized.
/// `pythagorean_theorem` becomes `Pythagorean Theorem`.
pub fn rule_display(term: &str) -> String {
    term.split('_')
        .map(|word| {
            let mut chars = word.chars();
            match chars.next() {
                Some(first) => first.to_uppercase().chain(chars).collect::<String>(),
                None => String::new(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Can a step in domain `from` be followed by a step in domain `to`?
fn admissible(graph: &CognitiveGraph, from: &Domain, to: &Domain) -> bool {
    from == to || graph.has_transition(from, to) || analogy_bridges(graph, from, to)
}

/// Does any analogy edge span exactly the domains `{a, b}`?
fn analogy_bridges(graph: &CognitiveGraph, a: &Domain, b: &Domain) -> bool {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    graph
        .edges()
        .any(|(r, _)| matches!(&r.kind, EdgeKind::AnalogousTo(d1, d2) if d1 == lo && d2 == hi))
}

enum RuleLookup {
    /// Rule node found in the step's domain.
    Found(ConceptId),
    /// A rule with this slug exists, but only in these other domains.
    WrongDomain(Vec<Domain>),
    /// Nothing usable anywhere; the message explains.
    Missing(String),
}

fn resolve_rule(graph: &CognitiveGraph, domain: &Domain, rule: &str) -> RuleLookup {
    let slug = rule_slug(rule);
    if slug.is_empty() {
        return RuleLookup::Missing(format!("rule name {rule:?} has no usable characters"));
    }
    if let Ok(id) = ConceptId::new(&slug, domain.clone()) {
        if let Some(node) = graph.node(&id) {
            return if node.kind == NodeKind::Rule {
                RuleLookup::Found(id)
            } else {
                RuleLookup::Missing(format!("{id} exists but is not a rule node"))
            };
        }
    }
    let elsewhere: Vec<Domain> = graph
        .nodes()
        .filter(|n| n.kind == NodeKind::Rule && n.id.term() == slug)
        .map(|n| n.id.domain().clone())
        .collect();
    if elsewhere.is_empty() {
        RuleLookup::Missing(format!("no rule node {slug}@{domain}"))
    } else {
        RuleLookup::WrongDomain(elsewhere)
    }
}

/// Check a trace against a graph.
///
/// Per step: the domain must be declared; `Apply` rules must resolve to a
/// rule node in that domain; each domain change must follow a declared
/// transition or analogy bridge; and, when `mastered` is given, every
/// applied rule's prerequisite closure must be mastered. Violations come
/// back sorted by `(step_index, code)`; an empty list means the trace is
/// admissible.
pub fn validate_trace(
    graph: &CognitiveGraph,
    trace: &CdcTrace,
    mastered: Option<&BTreeSet<ConceptId>>,
) -> Vec<TraceViolation> {
    let mut out = Vec::new();
    let mut push = |step_index: usize, code: ViolationCode, message: String| {
        out.push(TraceViolation { step_index, code, message });
    };
    for (i, step) in trace.steps().iter().enumerate() {
        let domain = step.label.domain();
        if !graph.is_declared(domain) {
            push(i, ViolationCode::UnknownDomain, format!("domain {domain} is not declared"));
        }
        if i > 0 {
            let prev = trace.steps()[i - 1].label.domain();
            if !admissible(graph, prev, domain) {
                push(
                    i,
                    ViolationCode::InadmissibleTransition,
                    format!("no declared transition or analogy bridge {prev} -> {domain}"),
                );
            }
        }
        if let StepLabel::Apply { domain, rule } = &step.label {
            match resolve_rule(graph, domain, rule) {
                RuleLookup::Found(id) => {
                    if let Some(set) = mastered {
                        let closure = graph.prerequisite_closure(&id).unwrap_or_default();
                        let missing: Vec<String> =
                            closure.difference(set).map(|c| c.to_string()).collect();
                        if !missing.is_empty() {
                            push(
                                i,
                                ViolationCode::UnsatisfiedPrerequisite,
                                format!(
                                    "prerequisites of {id} not mastered: {}",
                                    missing.join(", ")
                                ),
                            );
                        }
                    }
                }
                RuleLookup::WrongDomain(mut domains) => {
                    domains.sort();
                    domains.dedup();
                    let list =
                        domains.iter().map(Domain::to_string).collect::<Vec<_>>().join(", ");
                    push(
                        i,
                        ViolationCode::RuleDomainMismatch,
                        format!("rule {} lives in {list}, not {domain}", rule_slug(rule)),
                    );
                }
                RuleLookup::Missing(message) => push(i, ViolationCode::UnknownRule, message),
            }
        }
    }
    out.sort_by(|a, b| (a.step_index, a.code).cmp(&(b.step_index, b.code)));
    out
}

/// Every step label admissible as the next step from `current`: `Apply` for
/// each rule in the current domain or one admissible hop away whose
/// prerequisites `mastered` covers (every rule when `mastered` is absent),
/// then `Compute` for each reachable domain. Apply labels sort by
/// (domain, rule); Compute labels by domain.
pub fn permitted_next_steps(
    graph: &CognitiveGraph,
    current: &Domain,
    mastered: Option<&BTreeSet<ConceptId>>,
) -> Result<Vec<StepLabel>, CdcError> {
    if !graph.is_declared(current) {
        return Err(CdcError::UnknownDomain { domain: current.clone() });
    }
    let mut reachable: BTreeSet<Domain> = BTreeSet::new();
    reachable.insert(current.clone());
    for (from, to) in graph.transitions() {
        if from == current {
            reachable.insert(to.clone());
        }
    }
    for (edge, _) in graph.edges() {
        if let EdgeKind::AnalogousTo(d1, d2) = &edge.kind {
            if d1 == current {
                reachable.insert(d2.clone());
            } else if d2 == current {
                reachable.insert(d1.clone());
            }
        }
    }

    let mut labels: Vec<StepLabel> = Vec::new();
    for node in graph.nodes() {
        if node.kind != NodeKind::Rule || !reachable.contains(node.id.domain()) {
            continue;
        }
        let display = rule_display(node.id.term());
        // Only offer names that resolve back to this node; a term that is
        // not a clean slug cannot be written faithfully in a label.
        if rule_slug(&display) != node.id.term() {
            continue;
        }
        if let Some(set) = mastered {
            let closure = graph.prerequisite_closure(&node.id).unwrap_or_default();
            if !closure.is_subset(set) {
                continue;
            }
        }
        labels.push(StepLabel::Apply { domain: node.id.domain().clone(), rule: display });
    }
    labels.sort();
    labels.extend(reachable.into_iter().map(|domain| StepLabel::Compute { domain }));
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConceptNode, PedagogicalEdge, Provenance};
    use crate::time::Timestamp;

    /// The worked right-triangle trace, in its original layout: display
    /// math, commentary lines between arrows, and a final-answer marker.
    const WORKED: &str = "Given: right triangle, $a=3$, $b=4$\n\n--{Apply@Geometry [Pythagorean Theorem]}-->\n\n$$c^2 = a^2 + b^2$$\n\nSubstitute values\n\n--{Compute@Algebra}-->\n\n$$c^2 = 3^2 + 4^2 = 9 + 16 = 25$$\n\nTake square root\n\n--{Compute@Algebra}-->\n\n$$c = \\sqrt{25} = 5$$\n\nFinal answer: $c = 5$\n";

    fn d(name: &str) -> Domain {
        Domain::new(name).unwrap()
    }

    fn claim(text: &str) -> CdcClaim {
        CdcClaim::new(text).unwrap()
    }

    fn prov() -> Provenance {
        Provenance::new(
            vec!["geometry-wg".into()],
            vec![],
            Timestamp::parse("2026-01-10T00:00:00Z").unwrap(),
        )
        .unwrap()
    }

    fn rule_node(ids: &str) -> ConceptNode {
        ConceptNode {
            id: ConceptId::parse(ids).unwrap(),
            kind: NodeKind::Rule,
            description: String::new(),
            provenance: prov(),
        }
    }

    fn concept(ids: &str) -> ConceptNode {
        ConceptNode {
            id: ConceptId::parse(ids).unwrap(),
            kind: NodeKind::Concept,
            description: String::new(),
            provenance: prov(),
        }
    }

    /// Geometry/Algebra graph with the theorem rule, two prerequisites, and
    /// the Geometry -> Algebra transition.
    fn geometry_graph() -> CognitiveGraph {
        CognitiveGraph::new()
            .add_node(concept("right_triangle@Geometry"))
            .unwrap()
            .add_node(concept("squaring@Geometry"))
            .unwrap()
            .add_node(rule_node("pythagorean_theorem@Geometry"))
            .unwrap()
            .add_edge(PedagogicalEdge {
                kind: EdgeKind::PrerequisiteOf(d("Geometry")),
                source: ConceptId::parse("right_triangle@Geometry").unwrap(),
                target: ConceptId::parse("pythagorean_theorem@Geometry").unwrap(),
                provenance: prov(),
            })
            .unwrap()
            .add_edge(PedagogicalEdge {
                kind: EdgeKind::PrerequisiteOf(d("Geometry")),
                source: ConceptId::parse("squaring@Geometry").unwrap(),
                target: ConceptId::parse("pythagorean_theorem@Geometry").unwrap(),
                provenance: prov(),
            })
            .unwrap()
            .declare_domain(d("Algebra"))
            .declare_transition(d("Geometry"), d("Algebra"))
            .unwrap()
    }

    #[test]
    fn parses_the_worked_trace() {
        let trace = parse_trace(WORKED).unwrap();
        assert_eq!(trace.given().text(), "right triangle, a=3, b=4");
        assert_eq!(trace.steps().len(), 3);
        assert_eq!(
            trace.steps()[0].label,
            StepLabel::Apply { domain: d("Geometry"), rule: "Pythagorean Theorem".into() }
        );
        assert_eq!(trace.steps()[1].label, StepLabel::Compute { domain: d("Algebra") });
        assert_eq!(trace.steps()[2].label, StepLabel::Compute { domain: d("Algebra") });
        assert_eq!(trace.steps()[0].to_claim.text(), "c^2 = a^2 + b^2 Substitute values");
        assert_eq!(trace.final_claim().text(), "c = 5");
    }

    #[test]
    fn no_arrow_is_a_parse_error() {
        assert!(matches!(parse_trace("just some text"), Err(CdcError::Parse(_))));
    }

    #[test]
    fn inline_arrows_parse() {
        let trace = parse_trace(
            "Given --{Apply@Domain [Theorem]}--> Intermediate --{Compute@Domain}--> Final",
        )
        .unwrap();
        assert_eq!(trace.given().text(), "Given");
        assert_eq!(trace.steps().len(), 2);
        assert_eq!(trace.steps()[0].to_claim.text(), "Intermediate");
        assert_eq!(trace.final_claim().text(), "Final");
    }

    #[test]
    fn chain_style_restatement_is_stitched() {
        let trace = parse_trace("x = 1 --{Compute@A}--> y = 2\ny = 2 --{Compute@A}--> z = 3")
            .unwrap();
        assert_eq!(trace.steps().len(), 2);
        assert_eq!(trace.steps()[0].to_claim.text(), "y = 2");
        assert_eq!(trace.steps()[1].from_claim.text(), "y = 2");
        assert_eq!(trace.final_claim().text(), "z = 3");
    }

    #[test]
    fn mismatched_restatement_is_a_broken_chain() {
        let err = parse_trace("x --{Compute@A}--> y\nw --{Compute@A}--> z").unwrap_err();
        match err {
            CdcError::BrokenChain { step_index, expected, found } => {
                assert_eq!(step_index, 1);
                assert_eq!(expected, "y");
                assert_eq!(found, "w");
            }
            other => panic!("expected BrokenChain, got {other:?}"),
        }
    }

    #[test]
    fn multi_line_claims_join_when_arrows_start_lines() {
        let trace = parse_trace("first part\nsecond part\n--{Compute@A}-->\nanswer").unwrap();
        assert_eq!(trace.given().text(), "first part second part");
    }

    #[test]
    fn final_marker_overrides_working_text() {
        let trace =
            parse_trace("g --{Compute@A}-->\n$$x = \\sqrt{25} = 5$$\nFinal answer: $x = 5$")
                .unwrap();
        assert_eq!(trace.final_claim().text(), "x = 5");
    }

    #[test]
    fn arrow_after_final_marker_is_rejected() {
        let err = parse_trace("g --{Compute@A}--> Final answer: x --{Compute@A}--> y").unwrap_err();
        match err {
            CdcError::Parse(p) => assert!(p.message.contains("final answer"), "{p}"),
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn unterminated_label_is_positional() {
        let err = parse_trace("a\n--{Compute@A\nb").unwrap_err();
        match err {
            CdcError::Parse(p) => {
                assert_eq!(p.line, 2);
                assert!(p.message.contains("unterminated"));
            }
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn missing_claim_between_arrows_is_rejected() {
        let err = parse_trace("a --{Compute@A}--> --{Compute@A}--> b").unwrap_err();
        match err {
            CdcError::Parse(p) => assert!(p.message.contains("missing claim"), "{p}"),
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn bad_labels_are_rejected() {
        for text in [
            "a --{Apply@Geometry}--> b",
            "a --{Apply@Geometry Pythagorean Theorem}--> b",
            "a --{Deduce@Geometry}--> b",
            "a --{Compute@}--> b",
            "a --{Apply@Geometry []}--> b",
        ] {
            assert!(matches!(parse_trace(text), Err(CdcError::Parse(_))), "accepted {text:?}");
        }
    }

    #[test]
    fn serialization_is_canonical_and_round_trips() {
        let trace = parse_trace(WORKED).unwrap();
        let text = serialize_trace(&trace);
        assert!(text.contains("--{Apply@Geometry [Pythagorean Theorem]}-->"));
        assert_eq!(text.lines().count(), 7);
        let reparsed = parse_trace(&text).unwrap();
        assert_eq!(reparsed, trace);
        assert_eq!(serialize_trace(&reparsed), text);
    }

    #[test]
    fn single_step_trace_serializes_to_three_lines() {
        let trace = CdcTrace::from_claims(
            vec![claim("a"), claim("b")],
            vec![StepLabel::Compute { domain: d("A") }],
        )
        .unwrap();
        let text = serialize_trace(&trace);
        assert_eq!(text, "Given: a\n--{Compute@A}-->\nFinal answer: b\n");
        assert_eq!(parse_trace(&text).unwrap(), trace);
    }

    #[test]
    fn trace_constructor_enforces_the_chain() {
        let step = |from: &str, to: &str| CdcStep {
            label: StepLabel::Compute { domain: d("A") },
            from_claim: claim(from),
            to_claim: claim(to),
        };
        let err =
            CdcTrace::new(claim("a"), vec![step("a", "b"), step("c", "d")], claim("d")).unwrap_err();
        assert!(matches!(err, CdcError::BrokenChain { step_index: 1, .. }));
        let err = CdcTrace::new(claim("a"), vec![], claim("a")).unwrap_err();
        assert!(matches!(err, CdcError::NoSteps));
    }

    #[test]
    fn claim_normalization_and_guardrails() {
        assert_eq!(claim("  $x$ =\t5 ").text(), "x = 5");
        assert!(matches!(CdcClaim::new("$$"), Err(CdcError::EmptyClaim)));
        assert!(matches!(CdcClaim::new("a --{b}--> c"), Err(CdcError::ClaimContainsArrow { .. })));
    }

    #[test]
    fn worked_trace_validates_cleanly_against_the_graph() {
        let trace = parse_trace(WORKED).unwrap();
        assert_eq!(validate_trace(&geometry_graph(), &trace, None), vec![]);
    }

    #[test]
    fn missing_rule_is_unknown_at_step_zero() {
        let graph = CognitiveGraph::new()
            .declare_domain(d("Geometry"))
            .declare_domain(d("Algebra"))
            .declare_transition(d("Geometry"), d("Algebra"))
            .unwrap();
        let trace = parse_trace(WORKED).unwrap();
        let violations = validate_trace(&graph, &trace, None);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].step_index, 0);
        assert_eq!(violations[0].code, ViolationCode::UnknownRule);
    }

    #[test]
    fn rule_in_another_domain_is_a_mismatch() {
        let graph = CognitiveGraph::new()
            .add_node(rule_node("pythagorean_theorem@Trigonometry"))
            .unwrap()
            .declare_domain(d("Geometry"))
            .declare_domain(d("Algebra"))
            .declare_transition(d("Geometry"), d("Algebra"))
            .unwrap();
        let trace = parse_trace(WORKED).unwrap();
        let violations = validate_trace(&graph, &trace, None);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].code, ViolationCode::RuleDomainMismatch);
        assert!(violations[0].message.contains("Trigonometry"), "{}", violations[0].message);
    }

    #[test]
    fn non_rule_node_does_not_satisfy_apply() {
        let graph = CognitiveGraph::new()
            .add_node(concept("pythagorean_theorem@Geometry"))
            .unwrap()
            .declare_domain(d("Algebra"))
            .declare_transition(d("Geometry"), d("Algebra"))
            .unwrap();
        let trace = parse_trace(WORKED).unwrap();
        let violations = validate_trace(&graph, &trace, None);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].code, ViolationCode::UnknownRule);
        assert!(violations[0].message.contains("not a rule"), "{}", violations[0].message);
    }

    #[test]
    fn undeclared_domain_and_transitions_are_flagged() {
        // Graph knows Geometry only: Algebra steps are undeclared, and the
        // Geometry -> Algebra hop has no transition.
        let graph = geometry_graph()
            .remove_transition(&d("Geometry"), &d("Algebra"))
            .unwrap()
            .remove_domain(&d("Algebra"))
            .unwrap();
        let trace = parse_trace(WORKED).unwrap();
        let violations = validate_trace(&graph, &trace, None);
        let rendered: Vec<String> = violations.iter().map(TraceViolation::render).collect();
        assert_eq!(
            rendered,
            vec![
                "1 UnknownDomain domain Algebra is not declared".to_string(),
                "1 InadmissibleTransition no declared transition or analogy bridge Geometry -> Algebra"
                    .to_string(),
                "2 UnknownDomain domain Algebra is not declared".to_string(),
            ]
        );
    }

    #[test]
    fn analogy_edge_bridges_domains() {
        let graph = CognitiveGraph::new()
            .add_node(concept("fractions@Arithmetic"))
            .unwrap()
            .add_node(concept("ratios@Music"))
            .unwrap()
            .add_edge(PedagogicalEdge {
                kind: EdgeKind::analogous_to(d("Arithmetic"), d("Music")).unwrap(),
                source: ConceptId::parse("fractions@Arithmetic").unwrap(),
                target: ConceptId::parse("ratios@Music").unwrap(),
                provenance: prov(),
            })
            .unwrap();
        let trace = parse_trace("a --{Compute@Arithmetic}--> b --{Compute@Music}--> c").unwrap();
        assert_eq!(validate_trace(&graph, &trace, None), vec![]);
        // And in the other direction, since analogies are symmetric.
        let back = parse_trace("a --{Compute@Music}--> b --{Compute@Arithmetic}--> c").unwrap();
        assert_eq!(validate_trace(&graph, &back, None), vec![]);
    }

    #[test]
    fn mastered_set_gates_apply_steps() {
        let graph = geometry_graph();
        let trace = parse_trace(WORKED).unwrap();

        let nothing = BTreeSet::new();
        let violations = validate_trace(&graph, &trace, Some(&nothing));
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].code, ViolationCode::UnsatisfiedPrerequisite);
        assert_eq!(violations[0].step_index, 0);
        assert!(
            violations[0]
                .message
                .ends_with("not mastered: right_triangle@Geometry, squaring@Geometry"),
            "{}",
            violations[0].message
        );

        let both: BTreeSet<ConceptId> = [
            ConceptId::parse("right_triangle@Geometry").unwrap(),
            ConceptId::parse("squaring@Geometry").unwrap(),
        ]
        .into_iter()
        .collect();
        assert_eq!(validate_trace(&graph, &trace, Some(&both)), vec![]);
    }

    #[test]
    fn validation_is_deterministic() {
        let graph = CognitiveGraph::new();
        let trace = parse_trace(WORKED).unwrap();
        let a = validate_trace(&graph, &trace, None);
        let b = validate_trace(&graph, &trace, None);
        assert_eq!(a, b);
        let keys: Vec<(usize, ViolationCode)> = a.iter().map(|v| (v.step_index, v.code)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted, "violations arrive sorted by (step_index, code)");
    }

    #[test]
    fn slug_and_display_round_trip() {
        assert_eq!(rule_slug("Pythagorean Theorem"), "pythagorean_theorem");
        assert_eq!(rule_slug("Modus Ponens (classical)"), "modus_ponens_classical");
        assert_eq!(rule_slug("  spaced   out  "), "spaced_out");
        assert_eq!(rule_display("pythagorean_theorem"), "Pythagorean Theorem");
        assert_eq!(rule_slug(&rule_display("chain_rule")), "chain_rule");
    }

    #[test]
    fn permitted_steps_for_the_geometry_graph() {
        let labels = permitted_next_steps(&geometry_graph(), &d("Geometry"), None).unwrap();
        assert_eq!(
            labels,
            vec![
                StepLabel::Apply { domain: d("Geometry"), rule: "Pythagorean Theorem".into() },
                StepLabel::Compute { domain: d("Algebra") },
                StepLabel::Compute { domain: d("Geometry") },
            ]
        );
    }

    #[test]
    fn permitted_steps_respect_mastery_and_unknown_domains() {
        let graph = geometry_graph();
        let nothing = BTreeSet::new();
        let labels = permitted_next_steps(&graph, &d("Geometry"), Some(&nothing)).unwrap();
        assert!(
            labels.iter().all(|l| matches!(l, StepLabel::Compute { .. })),
            "unmastered prerequisites must suppress Apply labels: {labels:?}"
        );
        assert!(matches!(
            permitted_next_steps(&graph, &d("History"), None),
            Err(CdcError::UnknownDomain { .. })
        ));
    }

    #[test]
    fn permitted_steps_without_rules_are_compute_only() {
        let graph = CognitiveGraph::new().declare_domain(d("A"));
        let labels = permitted_next_steps(&graph, &d("A"), None).unwrap();
        assert_eq!(labels, vec![StepLabel::Compute { domain: d("A") }]);
    }

    #[test]
    fn permitted_steps_reach_across_analogy_bridges() {
        let graph = CognitiveGraph::new()
            .add_node(concept("fractions@Arithmetic"))
            .unwrap()
            .add_node(rule_node("harmonic_ratio@Music"))
            .unwrap()
            .add_edge(PedagogicalEdge {
                kind: EdgeKind::analogous_to(d("Arithmetic"), d("Music")).unwrap(),
                source: ConceptId::parse("fractions@Arithmetic").unwrap(),
                target: ConceptId::parse("harmonic_ratio@Music").unwrap(),
                provenance: prov(),
            })
            .unwrap();
        let labels = permitted_next_steps(&graph, &d("Arithmetic"), None).unwrap();
        assert_eq!(
            labels,
            vec![
                StepLabel::Apply { domain: d("Music"), rule: "Harmonic Ratio".into() },
                StepLabel::Compute { domain: d("Arithmetic") },
                StepLabel::Compute { domain: d("Music") },
            ]
        );
    }
}
