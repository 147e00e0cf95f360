//! Trunk–branch versioning and the proposal governance protocol.
//!
//! A repository holds one *trunk* — an append-only sequence of immutable
//! revisions, each the result of applying one changeset to its predecessor —
//! plus any number of *branches*. A branch pins a trunk revision as its base
//! and carries an overlay of its own revisions on top; it never copies the
//! graph. Content reaches a line only by merging an approved proposal:
//!
//! ```text
//! checks_passed --record--> in_review --quorum--> approved --merge--> merged
//!                                     \--decisive fail--> rejected
//! ```
//!
//! Submission runs the automated checks; a failing changeset is never
//! registered. Human review records then drive the state machine: a branch
//! proposal needs one branch-maintainer approval, a trunk proposal needs a
//! quorum of distinct academic-committee approvals, plus a researcher
//! approval when the change is significant or worse. A decisive-role failing
//! verdict rejects the proposal outright.
//!
//! Two maintenance operations keep lines consistent. *Propagation* rebases
//! every branch onto the trunk head, replaying overlay operations one at a
//! time and dropping those that conflict with critical trunk changes, no
//! longer apply, or no longer pass checks. *Rollback* restores an earlier
//! revision's state by merging a forward inverse changeset — history is
//! never rewritten. Every merge, rollback, and propagation appends to a
//! hash-chained changelog.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;

use crate::canon::{snapshot_digest, ParseError};
use crate::change::{apply_changeset, bootstrap_ops, inverse_ops, ChangeOp, ChangeSet};
use crate::check::{check_changeset, run_checks, CheckReport, FindingCode, Locus, Severity};
use crate::graph::CognitiveGraph;
use crate::hash;
use crate::text::{escape_field, split_fields, unescape_field, FIELD_SEP};
use crate::time::Timestamp;

/// Digest rendering used where no changeset exists (propagation markers).
pub const NO_DIGEST: &str = "0000000000000000";

/// Who is acting in a review record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    /// Voting member for trunk approvals.
    AcademicCommittee,
    /// Learning-science reviewer; required for significant trunk changes.
    Researcher,
    /// Practitioner; contributes pilot evidence.
    Teacher,
    /// Owner of a branch; approves branch proposals.
    BranchMaintainer,
    /// The engine itself; only automated check records carry this role.
    Engine,
}

impl Role {
    /// Canonical snake_case rendering.
    pub fn render(self) -> &'static str {
        match self {
            Role::AcademicCommittee => "academic_committee",
            Role::Researcher => "researcher",
            Role::Teacher => "teacher",
            Role::BranchMaintainer => "branch_maintainer",
            Role::Engine => "engine",
        }
    }

    /// Parse the canonical rendering.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "academic_committee" => Some(Role::AcademicCommittee),
            "researcher" => Some(Role::Researcher),
            "teacher" => Some(Role::Teacher),
            "branch_maintainer" => Some(Role::BranchMaintainer),
            "engine" => Some(Role::Engine),
            _ => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.render())
    }
}

/// What kind of evidence a review record carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReviewKind {
    /// Engine-generated check result attached at submission.
    AutomatedCheck,
    /// A human expert's judgement.
    ExpertReview,
    /// Results from piloting the change with learners.
    PilotEvidence,
}

impl ReviewKind {
    /// Canonical snake_case rendering.
    pub fn render(self) -> &'static str {
        match self {
            ReviewKind::AutomatedCheck => "automated_check",
            ReviewKind::ExpertReview => "expert_review",
            ReviewKind::PilotEvidence => "pilot_evidence",
        }
    }

    /// Parse the canonical rendering.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "automated_check" => Some(ReviewKind::AutomatedCheck),
            "expert_review" => Some(ReviewKind::ExpertReview),
            "pilot_evidence" => Some(ReviewKind::PilotEvidence),
            _ => None,
        }
    }
}

impl fmt::Display for ReviewKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.render())
    }
}

/// A reviewer's verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Verdict {
    /// Endorses the change.
    Pass,
    /// Objects to the change.
    Fail,
}

impl Verdict {
    /// Canonical rendering.
    pub fn render(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        }
    }

    /// Parse the canonical rendering.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pass" => Some(Verdict::Pass),
            "fail" => Some(Verdict::Fail),
            _ => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.render())
    }
}

/// One review event attached to a proposal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReviewRecord {
    /// Evidence kind.
    pub kind: ReviewKind,
    /// Who (non-empty identifier).
    pub actor: String,
    /// In what capacity.
    pub role: Role,
    /// Their verdict.
    pub verdict: Verdict,
    /// Reference to the underlying document or evidence (may be empty).
    pub document_ref: String,
    /// When the record was made.
    pub at: Timestamp,
}

impl ReviewRecord {
    /// Canonical line: `record <kind> | <actor> | <role> | <verdict> | <ref> | <ts>`.
    pub fn render(&self) -> String {
        [
            format!("record {}", self.kind),
            escape_field(&self.actor),
            self.role.to_string(),
            self.verdict.to_string(),
            escape_field(&self.document_ref),
            self.at.to_string(),
        ]
        .join(FIELD_SEP)
    }

    /// Parse the canonical line (without leading whitespace).
    pub fn parse(line_no: usize, line: &str) -> Result<Self, ParseError> {
        let err = |m: String| ParseError { line: line_no, message: m };
        let rest = line
            .strip_prefix("record ")
            .ok_or_else(|| err("expected record line".into()))?;
        let fragments = split_fields(rest);
        if fragments.len() != 6 {
            return Err(err(
                "expected: record <kind> | <actor> | <role> | <verdict> | <ref> | <timestamp>".into(),
            ));
        }
        let kind = ReviewKind::parse(fragments[0].trim())
            .ok_or_else(|| err(format!("unknown review kind {:?}", fragments[0].trim())))?;
        let actor = unescape_field(fragments[1]).map_err(err)?;
        let role = Role::parse(fragments[2].trim())
            .ok_or_else(|| err(format!("unknown role {:?}", fragments[2].trim())))?;
        let verdict = Verdict::parse(fragments[3].trim())
            .ok_or_else(|| err(format!("unknown verdict {:?}", fragments[3].trim())))?;
        let document_ref = unescape_field(fragments[4]).map_err(err)?;
        let at = Timestamp::parse(fragments[5].trim())
            .map_err(|e| ParseError { line: line_no, message: e.to_string() })?;
        Ok(Self { kind, actor, role, verdict, document_ref, at })
    }
}

/// Lifecycle of a proposal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProposalState {
    /// Not yet submitted (never stored; exists for completeness).
    Draft,
    /// Automated checks passed at submission.
    ChecksPassed,
    /// At least one human review record exists.
    InReview,
    /// Approval conditions are satisfied.
    Approved,
    /// A decisive reviewer failed it.
    Rejected,
    /// Applied to its target line.
    Merged,
}

impl ProposalState {
    /// Canonical snake_case rendering.
    pub fn render(self) -> &'static str {
        match self {
            ProposalState::Draft => "draft",
            ProposalState::ChecksPassed => "checks_passed",
            ProposalState::InReview => "in_review",
            ProposalState::Approved => "approved",
            ProposalState::Rejected => "rejected",
            ProposalState::Merged => "merged",
        }
    }

    /// Parse the canonical rendering.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "draft" => Some(ProposalState::Draft),
            "checks_passed" => Some(ProposalState::ChecksPassed),
            "in_review" => Some(ProposalState::InReview),
            "approved" => Some(ProposalState::Approved),
            "rejected" => Some(ProposalState::Rejected),
            "merged" => Some(ProposalState::Merged),
            _ => None,
        }
    }
}

impl fmt::Display for ProposalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.render())
    }
}

/// A line of development: the trunk or a named branch.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LineId {
    /// The canonical line.
    Trunk,
    /// A branch, by name.
    Branch(String),
}

impl LineId {
    /// Parse `trunk` or a branch name.
    pub fn parse(s: &str) -> Result<Self, VersionError> {
        if s == "trunk" {
            return Ok(LineId::Trunk);
        }
        if valid_name(s) {
            Ok(LineId::Branch(s.to_string()))
        } else {
            Err(VersionError::InvalidBranchName { name: s.to_string() })
        }
    }
}

impl fmt::Display for LineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LineId::Trunk => f.write_str("trunk"),
            LineId::Branch(name) => f.write_str(name),
        }
    }
}

/// Branch names and proposal ids: letters, digits, `_`, `-`; non-empty.
fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// A change under governance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposal {
    id: String,
    target: LineId,
    changeset: ChangeSet,
    severity: Severity,
    state: ProposalState,
    records: Vec<ReviewRecord>,
    submitted_at: Timestamp,
}

impl Proposal {
    /// Proposal id.
    pub fn id(&self) -> &str {
        &self.id
    }

    /// The line it targets.
    pub fn target(&self) -> &LineId {
        &self.target
    }

    /// The proposed changeset.
    pub fn changeset(&self) -> &ChangeSet {
        &self.changeset
    }

    /// Effective severity: the declared changeset severity, escalated to the
    /// worst finding severity observed by the submission check.
    pub fn severity(&self) -> Severity {
        self.severity
    }

    /// Current state.
    pub fn state(&self) -> ProposalState {
        self.state
    }

    /// Review records in arrival order (the automated check record first).
    pub fn records(&self) -> &[ReviewRecord] {
        &self.records
    }

    /// When it was submitted.
    pub fn submitted_at(&self) -> Timestamp {
        self.submitted_at
    }

    pub(crate) fn from_parts(
        id: String,
        target: LineId,
        changeset: ChangeSet,
        severity: Severity,
        state: ProposalState,
        records: Vec<ReviewRecord>,
        submitted_at: Timestamp,
    ) -> Self {
        Self { id, target, changeset, severity, state, records, submitted_at }
    }
}

/// One immutable revision on a line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Revision {
    /// Position on its line. Trunk revisions count from 0 (the seed);
    /// branch overlay revisions count from 1 (0 is the base itself).
    pub number: u64,
    /// Snapshot digest of the predecessor state this changeset applied to.
    pub parent_snapshot: String,
    /// Snapshot digest of the state after applying the changeset.
    pub snapshot: String,
    /// The proposal merged here (or `seed`, `rollback:<n>`).
    pub proposal_id: String,
    /// When the revision was created.
    pub at: Timestamp,
    /// The changeset that produced this revision.
    pub changeset: ChangeSet,
}

impl Revision {
    /// Digest of the changeset's canonical text.
    pub fn changeset_digest(&self) -> String {
        self.changeset.digest()
    }
}

/// A branch: a trunk base plus an overlay of branch revisions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch {
    /// Branch name.
    pub name: String,
    /// Trunk revision number the branch is based on.
    pub base: u64,
    /// Snapshot digest of that base revision (pinned for integrity).
    pub base_snapshot: String,
    /// Branch-local revisions, numbered from 1.
    pub overlay: Vec<Revision>,
}

/// One entry of the hash-chained changelog.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangelogEntry {
    /// Global position, from 0.
    pub index: u64,
    /// Which line the event happened on.
    pub line: LineId,
    /// Revision number created (for propagation markers: the trunk head).
    pub revision: u64,
    /// Proposal id, or `seed` / `rollback:<n>` / `propagation`.
    pub proposal_id: String,
    /// Changeset author.
    pub author: String,
    /// Changeset rationale.
    pub rationale: String,
    /// Effective severity of the event.
    pub severity: Severity,
    /// Digest of the changeset (all zeros for propagation markers).
    pub changeset_digest: String,
    /// Snapshot digest after the event.
    pub snapshot_digest: String,
    /// When the event happened.
    pub at: Timestamp,
    /// Review records carried by the merged proposal, if any.
    pub records: Vec<ReviewRecord>,
    /// Per-branch summaries for propagation markers.
    pub deltas: Vec<String>,
    /// Digest of the previous entry (`0000000000000000` for entry 0).
    pub prev_digest: String,
    /// Digest of `prev_digest "\n"` plus this entry's canonical text.
    pub digest: String,
}

impl ChangelogEntry {
    /// Canonical text of the entry body (excludes the chain lines).
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        out.push_str(
            &[
                format!("entry {}", self.index),
                self.line.to_string(),
                self.revision.to_string(),
                self.proposal_id.clone(),
                self.at.to_string(),
            ]
            .join(FIELD_SEP),
        );
        out.push('\n');
        out.push_str(&format!("author {}\n", escape_field(&self.author)));
        out.push_str(&format!("rationale {}\n", escape_field(&self.rationale)));
        out.push_str(&format!("severity {}\n", self.severity));
        out.push_str(&format!("changeset {}\n", self.changeset_digest));
        out.push_str(&format!("snapshot {}\n", self.snapshot_digest));
        for r in &self.records {
            out.push_str(&r.render());
            out.push('\n');
        }
        for d in &self.deltas {
            out.push_str(&format!("delta {}\n", escape_field(d)));
        }
        out
    }

    /// The digest this entry must carry given its predecessor.
    pub fn expected_digest(prev: &str, canonical_text: &str) -> String {
        hash::digest_hex(format!("{prev}\n{canonical_text}").as_bytes())
    }
}

/// Repository-wide policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepoConfig {
    /// Distinct academic-committee approvals needed for trunk merges.
    pub quorum: u32,
    /// Optional provenance staleness horizon, in days.
    pub staleness_horizon_days: Option<i64>,
}

impl Default for RepoConfig {
    fn default() -> Self {
        Self { quorum: 2, staleness_horizon_days: None }
    }
}

/// One operation dropped during propagation, and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedOp {
    /// Proposal id of the overlay changeset the op belonged to.
    pub proposal_id: String,
    /// Canonical rendering of the dropped op.
    pub op: String,
    /// Why it was dropped.
    pub reason: String,
}

/// Per-branch outcome of a propagation run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchPropagation {
    /// Branch name.
    pub branch: String,
    /// Whether the branch was already based at the trunk head.
    pub up_to_date: bool,
    /// Operations kept across the whole overlay.
    pub kept_ops: usize,
    /// Operations dropped, in replay order.
    pub dropped: Vec<DroppedOp>,
    /// Proposal ids of overlay changesets whose every op was dropped.
    pub dropped_changesets: Vec<String>,
}

/// Outcome of a propagation run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropagationReport {
    /// Trunk head revision propagated to.
    pub trunk_revision: u64,
    /// Per-branch outcomes, sorted by branch name.
    pub branches: Vec<BranchPropagation>,
}

impl PropagationReport {
    /// Human-readable multi-line rendering.
    pub fn render(&self) -> String {
        let mut out = format!("propagated trunk revision {} to {} branch(es)\n", self.trunk_revision, self.branches.len());
        for b in &self.branches {
            if b.up_to_date {
                out.push_str(&format!("branch {}: up to date\n", b.branch));
                continue;
            }
            out.push_str(&format!(
                "branch {}: kept {} op(s), dropped {}\n",
                b.branch,
                b.kept_ops,
                b.dropped.len()
            ));
            for d in &b.dropped {
                out.push_str(&format!("  dropped [{}] {}: {}\n", d.proposal_id, d.op, d.reason));
            }
            for p in &b.dropped_changesets {
                out.push_str(&format!("  changeset {p} emptied and removed\n"));
            }
        }
        out
    }
}

/// Errors from repository operations.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VersionError {
    /// The seed graph fails the structural checks.
    #[error("seed graph fails checks ({} finding(s))", report.findings().len())]
    SeedInvalid {
        /// The failing report.
        report: CheckReport,
    },
    /// The operation needs at least one trunk revision.
    #[error("trunk has no revisions")]
    EmptyTrunk,
    /// No such line.
    #[error("no such line {line:?}")]
    UnknownLine {
        /// The unknown line name.
        line: String,
    },
    /// No such revision on that line.
    #[error("no revision {revision} on {line}")]
    UnknownRevision {
        /// The line.
        line: LineId,
        /// The missing revision number.
        revision: u64,
    },
    /// Branch names are letters, digits, `_`, `-`.
    #[error("invalid branch name {name:?}: use letters, digits, '_' or '-'")]
    InvalidBranchName {
        /// The rejected name.
        name: String,
    },
    /// `trunk` cannot be used as a branch name.
    #[error("branch name \"trunk\" is reserved")]
    ReservedBranchName,
    /// Branch already exists.
    #[error("branch {name} already exists")]
    DuplicateBranch {
        /// The duplicate name.
        name: String,
    },
    /// Proposal ids are letters, digits, `_`, `-`.
    #[error("invalid proposal id {id:?}: use letters, digits, '_' or '-'")]
    InvalidProposalId {
        /// The rejected id.
        id: String,
    },
    /// Proposal id already registered.
    #[error("proposal {id} already exists")]
    DuplicateProposal {
        /// The duplicate id.
        id: String,
    },
    /// No proposal under this id.
    #[error("no proposal {id}")]
    UnknownProposal {
        /// The unknown id.
        id: String,
    },
    /// The changeset is unacceptable regardless of its graph effect.
    #[error("invalid changeset: {detail}")]
    InvalidChangeset {
        /// What was wrong.
        detail: String,
    },
    /// Automated checks failed; the proposal was not registered.
    #[error("changeset fails checks ({} finding(s))", report.findings().len())]
    ChecksFailed {
        /// The failing report.
        report: CheckReport,
    },
    /// The record cannot be applied in the proposal's current state.
    #[error("proposal {id} is {state}: {detail}")]
    IllegalTransition {
        /// Proposal id.
        id: String,
        /// Its current state.
        state: ProposalState,
        /// Why the record is not applicable.
        detail: String,
    },
    /// Approval conditions are not yet satisfied.
    #[error("proposal {id} lacks approvals: {detail}")]
    QuorumNotMet {
        /// Proposal id.
        id: String,
        /// What is missing.
        detail: String,
    },
    /// The proposal is in a terminal or unapproved state.
    #[error("proposal {id} is {state}, not approved")]
    NotApproved {
        /// Proposal id.
        id: String,
        /// Its current state.
        state: ProposalState,
    },
    /// The merged result would fail checks; the merge was rolled back.
    #[error("merge result fails checks ({} finding(s))", report.findings().len())]
    PostMergeCheckFailure {
        /// The failing report.
        report: CheckReport,
    },
    /// Rollback target must be a strict ancestor of the head.
    #[error("revision {revision} is not a strict ancestor of the {line} head")]
    NotAncestor {
        /// The line.
        line: LineId,
        /// The offending revision number.
        revision: u64,
    },
    /// The rollback could not be constructed.
    #[error("cannot roll back: {detail}")]
    InvalidRollback {
        /// Why.
        detail: String,
    },
}

/// The versioned repository: trunk, branches, proposals, changelog.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Repository {
    config: RepoConfig,
    trunk: Vec<Revision>,
    branches: BTreeMap<String, Branch>,
    proposals: BTreeMap<String, Proposal>,
    changelog: Vec<ChangelogEntry>,
}

impl Repository {
    /// Create a repository whose trunk revision 0 imports `seed`. An empty
    /// seed yields a repository with no revisions yet; a non-empty seed must
    /// pass checks.
    pub fn init(seed: &CognitiveGraph, config: RepoConfig, now: Timestamp) -> Result<Self, VersionError> {
        let mut repo = Repository {
            config,
            trunk: Vec::new(),
            branches: BTreeMap::new(),
            proposals: BTreeMap::new(),
            changelog: Vec::new(),
        };
        if seed.is_empty() {
            return Ok(repo);
        }
        let report = run_checks(seed);
        if !report.passed() {
            return Err(VersionError::SeedInvalid { report });
        }
        let changeset = ChangeSet::new("seed", "baseline trunk import", Severity::Significant, bootstrap_ops(seed))
            .expect("non-empty seed produces non-empty ops");
        let revision = Revision {
            number: 0,
            parent_snapshot: snapshot_digest(&CognitiveGraph::new()),
            snapshot: snapshot_digest(seed),
            proposal_id: "seed".to_string(),
            at: now,
            changeset,
        };
        repo.append_changelog(LineId::Trunk, &revision, Vec::new(), Vec::new());
        repo.trunk.push(revision);
        Ok(repo)
    }

    /// Repository policy.
    pub fn config(&self) -> &RepoConfig {
        &self.config
    }

    /// Trunk revisions, oldest first.
    pub fn trunk(&self) -> &[Revision] {
        &self.trunk
    }

    /// Branches by name.
    pub fn branches(&self) -> impl Iterator<Item = &Branch> {
        self.branches.values()
    }

    /// A branch by name.
    pub fn branch(&self, name: &str) -> Option<&Branch> {
        self.branches.get(name)
    }

    /// Proposals by id, in id order.
    pub fn proposals(&self) -> impl Iterator<Item = &Proposal> {
        self.proposals.values()
    }

    /// A proposal by id.
    pub fn proposal(&self, id: &str) -> Option<&Proposal> {
        self.proposals.get(id)
    }

    /// The full changelog, oldest first.
    pub fn changelog(&self) -> &[ChangelogEntry] {
        &self.changelog
    }

    /// Changelog entries for one line.
    pub fn changelog_for(&self, line: &LineId) -> Result<Vec<&ChangelogEntry>, VersionError> {
        self.require_line(line)?;
        Ok(self.changelog.iter().filter(|e| &e.line == line).collect())
    }

    /// Number of the head revision on a line: trunk `len-1` (requires a
    /// revision), branch `overlay.len()` (0 means "at base").
    pub fn head_number(&self, line: &LineId) -> Result<u64, VersionError> {
        match line {
            LineId::Trunk => {
                if self.trunk.is_empty() {
                    Err(VersionError::EmptyTrunk)
                } else {
                    Ok(self.trunk.len() as u64 - 1)
                }
            }
            LineId::Branch(name) => {
                let b = self
                    .branches
                    .get(name)
                    .ok_or_else(|| VersionError::UnknownLine { line: name.clone() })?;
                Ok(b.overlay.len() as u64)
            }
        }
    }

    /// The graph state at a given revision of a line. Branch revision 0 is
    /// the base trunk state.
    pub fn snapshot_at(&self, line: &LineId, revision: u64) -> Result<CognitiveGraph, VersionError> {
        match line {
            LineId::Trunk => {
                if revision as usize >= self.trunk.len() {
                    return Err(VersionError::UnknownRevision { line: line.clone(), revision });
                }
                Ok(self.fold_trunk(revision))
            }
            LineId::Branch(name) => {
                let b = self
                    .branches
                    .get(name)
                    .ok_or_else(|| VersionError::UnknownLine { line: name.clone() })?;
                if revision as usize > b.overlay.len() {
                    return Err(VersionError::UnknownRevision { line: line.clone(), revision });
                }
                let mut g = self.fold_trunk(b.base);
                for rev in &b.overlay[..revision as usize] {
                    g = apply_changeset(&g, &rev.changeset)
                        .expect("stored overlay changesets always replay");
                }
                Ok(g)
            }
        }
    }

    /// The current state of a line. An empty trunk is the empty graph; a
    /// branch head is its base plus its whole overlay.
    pub fn head_snapshot(&self, line: &LineId) -> Result<CognitiveGraph, VersionError> {
        match line {
            LineId::Trunk => {
                if self.trunk.is_empty() {
                    Ok(CognitiveGraph::new())
                } else {
                    Ok(self.fold_trunk(self.trunk.len() as u64 - 1))
                }
            }
            LineId::Branch(name) => {
                let b = self
                    .branches
                    .get(name)
                    .ok_or_else(|| VersionError::UnknownLine { line: name.clone() })?;
                self.snapshot_at(line, b.overlay.len() as u64)
            }
        }
    }

    /// Create a branch based at the trunk head.
    pub fn create_branch(&mut self, name: &str) -> Result<&Branch, VersionError> {
        let base = self.head_number(&LineId::Trunk)?;
        self.create_branch_at(name, base)
    }

    /// Like [`create_branch`](Self::create_branch), but pinned to an explicit
    /// trunk revision instead of the current head.
    pub fn create_branch_at(&mut self, name: &str, base: u64) -> Result<&Branch, VersionError> {
        if name == "trunk" {
            return Err(VersionError::ReservedBranchName);
        }
        if !valid_name(name) {
            return Err(VersionError::InvalidBranchName { name: name.to_string() });
        }
        if self.branches.contains_key(name) {
            return Err(VersionError::DuplicateBranch { name: name.to_string() });
        }
        if base as usize >= self.trunk.len() {
            return Err(VersionError::UnknownRevision { line: LineId::Trunk, revision: base });
        }
        let base_snapshot = self.trunk[base as usize].snapshot.clone();
        self.branches.insert(
            name.to_string(),
            Branch { name: name.to_string(), base, base_snapshot, overlay: Vec::new() },
        );
        Ok(&self.branches[name])
    }

    /// Submit a changeset for governance. Runs the automated checks against
    /// the target head; on failure the repository is unchanged and the
    /// failing report is returned in the error. On success the proposal is
    /// registered in `checks_passed` with an engine check record attached.
    pub fn submit_proposal(
        &mut self,
        id: &str,
        target: LineId,
        changeset: ChangeSet,
        now: Timestamp,
    ) -> Result<&Proposal, VersionError> {
        if !valid_name(id) {
            return Err(VersionError::InvalidProposalId { id: id.to_string() });
        }
        if self.proposals.contains_key(id) {
            return Err(VersionError::DuplicateProposal { id: id.to_string() });
        }
        self.require_line(&target)?;
        // Provenance may not claim validation dates in the future.
        for (i, op) in changeset.ops().iter().enumerate() {
            let stamp = match op {
                ChangeOp::AddNode(n) => Some(n.provenance.last_validated()),
                ChangeOp::AddEdge(e) => Some(e.provenance.last_validated()),
                ChangeOp::UpdateProvenance(_, p) => Some(p.last_validated()),
                _ => None,
            };
            if let Some(t) = stamp {
                if t > now {
                    return Err(VersionError::InvalidChangeset {
                        detail: format!(
                            "op[{i}] {}: last_validated {t} is in the future",
                            op.reference()
                        ),
                    });
                }
            }
        }
        let base = self.head_snapshot(&target)?;
        let report = check_changeset(&base, &changeset);
        if !report.passed() {
            return Err(VersionError::ChecksFailed { report });
        }
        let severity = changeset
            .severity()
            .max(report.max_severity().unwrap_or(Severity::Minor));
        let record = ReviewRecord {
            kind: ReviewKind::AutomatedCheck,
            actor: "engine".to_string(),
            role: Role::Engine,
            verdict: Verdict::Pass,
            document_ref: format!("check:{}", report.digest()),
            at: now,
        };
        let proposal = Proposal {
            id: id.to_string(),
            target,
            changeset,
            severity,
            state: ProposalState::ChecksPassed,
            records: vec![record],
            submitted_at: now,
        };
        self.proposals.insert(id.to_string(), proposal);
        Ok(&self.proposals[id])
    }

    /// Attach a human review record, advancing the state machine. Returns
    /// the resulting state. Approval happens automatically the moment the
    /// conditions hold; a failing verdict from a decisive role rejects.
    pub fn advance_proposal(
        &mut self,
        id: &str,
        record: ReviewRecord,
    ) -> Result<ProposalState, VersionError> {
        let quorum = self.config.quorum;
        let proposal = self
            .proposals
            .get_mut(id)
            .ok_or_else(|| VersionError::UnknownProposal { id: id.to_string() })?;
        if record.kind == ReviewKind::AutomatedCheck || record.role == Role::Engine {
            return Err(VersionError::IllegalTransition {
                id: id.to_string(),
                state: proposal.state,
                detail: "automated check records are engine-generated at submission".into(),
            });
        }
        if record.actor.is_empty() {
            return Err(VersionError::IllegalTransition {
                id: id.to_string(),
                state: proposal.state,
                detail: "review record requires a non-empty actor".into(),
            });
        }
        if !matches!(proposal.state, ProposalState::ChecksPassed | ProposalState::InReview) {
            return Err(VersionError::IllegalTransition {
                id: id.to_string(),
                state: proposal.state,
                detail: "reviews are only accepted between checks_passed and approval".into(),
            });
        }
        let decisive = match proposal.target {
            LineId::Trunk => matches!(record.role, Role::AcademicCommittee | Role::Researcher),
            LineId::Branch(_) => record.role == Role::BranchMaintainer,
        };
        let failing = record.verdict == Verdict::Fail;
        proposal.records.push(record);
        proposal.state = if failing && decisive {
            ProposalState::Rejected
        } else if approval_satisfied(proposal, quorum).is_none() {
            ProposalState::Approved
        } else {
            ProposalState::InReview
        };
        Ok(proposal.state)
    }

    /// Merge an approved proposal into its target line, creating a revision
    /// and a changelog entry. The changeset is re-applied to the current
    /// head and the result fully re-checked; failure leaves the repository
    /// unchanged.
    pub fn merge_proposal(
        &mut self,
        id: &str,
        now: Timestamp,
    ) -> Result<(LineId, u64, String), VersionError> {
        let proposal = self
            .proposals
            .get(id)
            .ok_or_else(|| VersionError::UnknownProposal { id: id.to_string() })?;
        match proposal.state {
            ProposalState::Approved => {}
            ProposalState::ChecksPassed | ProposalState::InReview => {
                let detail = approval_satisfied(proposal, self.config.quorum)
                    .unwrap_or_else(|| "approval conditions unsatisfied".to_string());
                return Err(VersionError::QuorumNotMet { id: id.to_string(), detail });
            }
            state => return Err(VersionError::NotApproved { id: id.to_string(), state }),
        }
        let target = proposal.target.clone();
        let changeset = proposal.changeset.clone();
        let records = proposal.records.clone();

        let head = self.head_snapshot(&target)?;
        let candidate = match apply_changeset(&head, &changeset) {
            Ok(g) => g,
            Err(e) => {
                return Err(VersionError::PostMergeCheckFailure { report: application_report(&e) });
            }
        };
        let report = run_checks(&candidate);
        if !report.passed() {
            return Err(VersionError::PostMergeCheckFailure { report });
        }

        let parent_snapshot = match &target {
            LineId::Trunk => self
                .trunk
                .last()
                .map(|r| r.snapshot.clone())
                .unwrap_or_else(|| snapshot_digest(&CognitiveGraph::new())),
            LineId::Branch(name) => {
                let b = &self.branches[name];
                b.overlay.last().map(|r| r.snapshot.clone()).unwrap_or_else(|| b.base_snapshot.clone())
            }
        };
        let number = match &target {
            LineId::Trunk => self.trunk.len() as u64,
            LineId::Branch(name) => self.branches[name].overlay.len() as u64 + 1,
        };
        let revision = Revision {
            number,
            parent_snapshot,
            snapshot: snapshot_digest(&candidate),
            proposal_id: id.to_string(),
            at: now,
            changeset,
        };
        let snapshot = revision.snapshot.clone();
        self.append_changelog(target.clone(), &revision, records, Vec::new());
        match &target {
            LineId::Trunk => self.trunk.push(revision),
            LineId::Branch(name) => {
                self.branches.get_mut(name).expect("target branch exists").overlay.push(revision)
            }
        }
        self.proposals.get_mut(id).expect("proposal exists").state = ProposalState::Merged;
        Ok((target, number, snapshot))
    }

    /// Rebase every branch onto the trunk head.
    ///
    /// For each branch behind the head, the overlay is replayed one
    /// operation at a time on top of the new base. An operation is dropped
    /// when (in this order) it touches an element changed by a *critical*
    /// trunk changeset since the branch's old base, when it no longer
    /// applies, or when the state it produces fails checks. Changesets whose
    /// operations are all dropped disappear; the rest are renumbered from 1.
    /// A changelog marker records per-branch kept/dropped counts.
    pub fn propagate(&mut self, now: Timestamp) -> Result<PropagationReport, VersionError> {
        let head_number = self.head_number(&LineId::Trunk)?;
        let head_snapshot_hex = self.trunk[head_number as usize].snapshot.clone();
        let head_graph = self.fold_trunk(head_number);

        let mut report =
            PropagationReport { trunk_revision: head_number, branches: Vec::new() };
        let mut deltas: Vec<String> = Vec::new();
        let mut any_rebased = false;

        let names: Vec<String> = self.branches.keys().cloned().collect();
        for name in names {
            let branch = self.branches[&name].clone();
            if branch.base == head_number {
                report.branches.push(BranchPropagation {
                    branch: name.clone(),
                    up_to_date: true,
                    kept_ops: 0,
                    dropped: Vec::new(),
                    dropped_changesets: Vec::new(),
                });
                continue;
            }
            any_rebased = true;

            // Elements touched by critical trunk changesets past the old base.
            let mut critical_keys = BTreeSet::new();
            for rev in &self.trunk[(branch.base + 1) as usize..=(head_number as usize)] {
                if rev.changeset.severity() == Severity::Critical {
                    critical_keys.extend(rev.changeset.touched_keys());
                }
            }

            let mut outcome = BranchPropagation {
                branch: name.clone(),
                up_to_date: false,
                kept_ops: 0,
                dropped: Vec::new(),
                dropped_changesets: Vec::new(),
            };
            let mut current = head_graph.clone();
            let mut current_hex = head_snapshot_hex.clone();
            let mut new_overlay: Vec<Revision> = Vec::new();
            for rev in &branch.overlay {
                let mut surviving: Vec<ChangeOp> = Vec::new();
                for op in rev.changeset.ops() {
                    if critical_keys.contains(&op.conflict_key()) {
                        outcome.dropped.push(DroppedOp {
                            proposal_id: rev.proposal_id.clone(),
                            op: op.render(),
                            reason: "conflicts with critical trunk change".to_string(),
                        });
                        continue;
                    }
                    let attempt = apply_changeset(
                        &current,
                        &ChangeSet::new(
                            rev.changeset.author(),
                            rev.changeset.rationale(),
                            rev.changeset.severity(),
                            vec![op.clone()],
                        )
                        .expect("single op changeset"),
                    );
                    match attempt {
                        Err(e) => {
                            outcome.dropped.push(DroppedOp {
                                proposal_id: rev.proposal_id.clone(),
                                op: op.render(),
                                reason: format!("does not apply: {}", e.reason),
                            });
                        }
                        Ok(next) => {
                            let check = run_checks(&next);
                            if check.passed() {
                                current = next;
                                surviving.push(op.clone());
                            } else {
                                let first = &check.findings()[0];
                                outcome.dropped.push(DroppedOp {
                                    proposal_id: rev.proposal_id.clone(),
                                    op: op.render(),
                                    reason: format!("fails checks: {} {}", first.code, first.locus),
                                });
                            }
                        }
                    }
                }
                if surviving.is_empty() {
                    outcome.dropped_changesets.push(rev.proposal_id.clone());
                    continue;
                }
                outcome.kept_ops += surviving.len();
                let changeset = ChangeSet::new(
                    rev.changeset.author(),
                    rev.changeset.rationale(),
                    rev.changeset.severity(),
                    surviving,
                )
                .expect("surviving ops are non-empty");
                let snapshot = snapshot_digest(&current);
                new_overlay.push(Revision {
                    number: new_overlay.len() as u64 + 1,
                    parent_snapshot: current_hex.clone(),
                    snapshot: snapshot.clone(),
                    proposal_id: rev.proposal_id.clone(),
                    at: now,
                    changeset,
                });
                current_hex = snapshot;
            }
            deltas.push(format!(
                "branch {} kept={} dropped={}",
                name,
                outcome.kept_ops,
                outcome.dropped.len()
            ));
            let b = self.branches.get_mut(&name).expect("branch exists");
            b.base = head_number;
            b.base_snapshot = head_snapshot_hex.clone();
            b.overlay = new_overlay;
            report.branches.push(outcome);
        }

        if any_rebased {
            let entry_count = deltas.len();
            let marker = MarkerEvent {
                line: LineId::Trunk,
                revision: head_number,
                proposal_id: "propagation".to_string(),
                author: "engine".to_string(),
                rationale: format!(
                    "propagate trunk revision {head_number} to {entry_count} branch(es)"
                ),
                severity: Severity::Minor,
                changeset_digest: NO_DIGEST.to_string(),
                snapshot_digest: head_snapshot_hex,
                at: now,
            };
            self.append_marker(marker, deltas);
        }
        Ok(report)
    }

    /// Restore the state of an earlier revision by merging its inverse as a
    /// new head revision. `to` must be a strict ancestor of the head; branch
    /// revision 0 addresses the base state.
    pub fn rollback(
        &mut self,
        line: &LineId,
        to: u64,
        now: Timestamp,
    ) -> Result<(u64, String), VersionError> {
        let head = self.head_number(line)?;
        let exists = match line {
            LineId::Trunk => (to as usize) < self.trunk.len(),
            LineId::Branch(_) => to <= head,
        };
        if !exists {
            return Err(VersionError::UnknownRevision { line: line.clone(), revision: to });
        }
        if to == head {
            return Err(VersionError::NotAncestor { line: line.clone(), revision: to });
        }
        let target_state = self.snapshot_at(line, to)?;
        let target_digest = snapshot_digest(&target_state);

        // Concatenate the ops of every revision past `to`, then invert.
        let later: Vec<ChangeOp> = match line {
            LineId::Trunk => self.trunk[(to + 1) as usize..]
                .iter()
                .flat_map(|r| r.changeset.ops().iter().cloned())
                .collect(),
            LineId::Branch(name) => self.branches[name].overlay[to as usize..]
                .iter()
                .flat_map(|r| r.changeset.ops().iter().cloned())
                .collect(),
        };
        let inverse = inverse_ops(&target_state, &later).map_err(|e| VersionError::InvalidRollback {
            detail: format!("stored history does not replay: {e}"),
        })?;
        if inverse.is_empty() {
            return Err(VersionError::InvalidRollback {
                detail: format!("head state already matches revision {to}"),
            });
        }
        let changeset = ChangeSet::new(
            "engine",
            format!("rollback {line} to revision {to}"),
            Severity::Critical,
            inverse,
        )
        .expect("inverse ops are non-empty");

        let head_state = self.head_snapshot(line)?;
        let restored = apply_changeset(&head_state, &changeset)
            .map_err(|e| VersionError::InvalidRollback { detail: format!("inverse replay failed: {e}") })?;
        let restored_digest = snapshot_digest(&restored);
        if restored_digest != target_digest {
            return Err(VersionError::InvalidRollback {
                detail: "inverse replay diverged from the target snapshot".to_string(),
            });
        }

        let parent_snapshot = match line {
            LineId::Trunk => self.trunk.last().expect("trunk non-empty").snapshot.clone(),
            LineId::Branch(name) => {
                let b = &self.branches[name];
                b.overlay.last().map(|r| r.snapshot.clone()).unwrap_or_else(|| b.base_snapshot.clone())
            }
        };
        let number = head + 1;
        let revision = Revision {
            number,
            parent_snapshot,
            snapshot: restored_digest.clone(),
            proposal_id: format!("rollback:{to}"),
            at: now,
            changeset,
        };
        self.append_changelog(line.clone(), &revision, Vec::new(), Vec::new());
        match line {
            LineId::Trunk => self.trunk.push(revision),
            LineId::Branch(name) => {
                self.branches.get_mut(name).expect("branch exists").overlay.push(revision)
            }
        }
        Ok((number, restored_digest))
    }

    /// Verify the changelog hash chain, returning the first bad index.
    pub fn verify_changelog(&self) -> Result<(), u64> {
        let mut prev = NO_DIGEST.to_string();
        for entry in &self.changelog {
            if entry.prev_digest != prev {
                return Err(entry.index);
            }
            let expected = ChangelogEntry::expected_digest(&prev, &entry.canonical_text());
            if entry.digest != expected {
                return Err(entry.index);
            }
            prev = entry.digest.clone();
        }
        Ok(())
    }

    // ------------------------------------------------------------------
    // Internals
    // ------------------------------------------------------------------

    fn require_line(&self, line: &LineId) -> Result<(), VersionError> {
        match line {
            LineId::Trunk => Ok(()),
            LineId::Branch(name) => {
                if self.branches.contains_key(name) {
                    Ok(())
                } else {
                    Err(VersionError::UnknownLine { line: name.clone() })
                }
            }
        }
    }

    /// Fold trunk changesets 0..=rev over the empty graph.
    fn fold_trunk(&self, rev: u64) -> CognitiveGraph {
        let mut g = CognitiveGraph::new();
        for r in &self.trunk[..=(rev as usize)] {
            g = apply_changeset(&g, &r.changeset).expect("stored trunk changesets always replay");
        }
        g
    }

    fn append_changelog(
        &mut self,
        line: LineId,
        revision: &Revision,
        records: Vec<ReviewRecord>,
        deltas: Vec<String>,
    ) {
        let marker = MarkerEvent {
            line,
            revision: revision.number,
            proposal_id: revision.proposal_id.clone(),
            author: revision.changeset.author().to_string(),
            rationale: revision.changeset.rationale().to_string(),
            severity: revision.changeset.severity(),
            changeset_digest: revision.changeset_digest(),
            snapshot_digest: revision.snapshot.clone(),
            at: revision.at,
        };
        self.append_marker_with_records(marker, records, deltas);
    }

    fn append_marker(&mut self, marker: MarkerEvent, deltas: Vec<String>) {
        self.append_marker_with_records(marker, Vec::new(), deltas);
    }

    fn append_marker_with_records(
        &mut self,
        marker: MarkerEvent,
        records: Vec<ReviewRecord>,
        deltas: Vec<String>,
    ) {
        let prev_digest = self
            .changelog
            .last()
            .map(|e| e.digest.clone())
            .unwrap_or_else(|| NO_DIGEST.to_string());
        let mut entry = ChangelogEntry {
            index: self.changelog.len() as u64,
            line: marker.line,
            revision: marker.revision,
            proposal_id: marker.proposal_id,
            author: marker.author,
            rationale: marker.rationale,
            severity: marker.severity,
            changeset_digest: marker.changeset_digest,
            snapshot_digest: marker.snapshot_digest,
            at: marker.at,
            records,
            deltas,
            prev_digest: prev_digest.clone(),
            digest: String::new(),
        };
        entry.digest = ChangelogEntry::expected_digest(&prev_digest, &entry.canonical_text());
        self.changelog.push(entry);
    }

    /// Reassemble a repository from previously persisted parts, verifying
    /// nothing — the store is responsible for integrity checks first.
    pub(crate) fn from_parts(
        config: RepoConfig,
        trunk: Vec<Revision>,
        branches: BTreeMap<String, Branch>,
        proposals: BTreeMap<String, Proposal>,
        changelog: Vec<ChangelogEntry>,
    ) -> Self {
        Self { config, trunk, branches, proposals, changelog }
    }
}

/// Fields shared by every changelog append.
struct MarkerEvent {
    line: LineId,
    revision: u64,
    proposal_id: String,
    author: String,
    rationale: String,
    severity: Severity,
    changeset_digest: String,
    snapshot_digest: String,
    at: Timestamp,
}

/// `None` when the proposal satisfies its approval conditions; otherwise a
/// description of what is missing.
fn approval_satisfied(proposal: &Proposal, quorum: u32) -> Option<String> {
    let human =
        |r: &&ReviewRecord| r.kind != ReviewKind::AutomatedCheck && r.verdict == Verdict::Pass;
    match proposal.target {
        LineId::Branch(_) => {
            let ok = proposal
                .records
                .iter()
                .filter(human)
                .any(|r| r.role == Role::BranchMaintainer);
            if ok {
                None
            } else {
                Some("no branch maintainer approval".to_string())
            }
        }
        LineId::Trunk => {
            let committee: BTreeSet<&str> = proposal
                .records
                .iter()
                .filter(human)
                .filter(|r| r.role == Role::AcademicCommittee)
                .map(|r| r.actor.as_str())
                .collect();
            let researcher_ok = proposal.severity < Severity::Significant
                || proposal.records.iter().filter(human).any(|r| r.role == Role::Researcher);
            let mut missing = Vec::new();
            if (committee.len() as u32) < quorum {
                missing.push(format!(
                    "{} of {} distinct academic committee approvals",
                    committee.len(),
                    quorum
                ));
            }
            if !researcher_ok {
                missing.push("no researcher approval for a significant change".to_string());
            }
            if missing.is_empty() {
                None
            } else {
                Some(missing.join("; "))
            }
        }
    }
}

/// Wrap an application failure as a single-finding critical report.
fn application_report(e: &crate::change::ApplyError) -> CheckReport {
    CheckReport::from_single(crate::check::CheckFinding {
        code: FindingCode::ApplicationError,
        severity: FindingCode::ApplicationError.severity(),
        locus: Locus::Op { index: e.op_index, reference: e.reference.clone() },
        message: e.reason.clone(),
    })
}
