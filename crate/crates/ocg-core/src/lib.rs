//! Versioned pedagogical knowledge graphs.
//!
//! This crate implements an engine for curricular knowledge bases organized
//! as typed graphs: concepts contextualized by domain, connected by
//! prerequisite, scaffolding, analogy, and misconception edges, each carrying
//! provenance. On top of the data model sit three cooperating subsystems:
//!
//! * **validation** ([`check`]) — structural and pedagogical well-formedness
//!   checks producing severity-ranked findings;
//! * **versioning** ([`repo`], [`store`]) — a trunk of immutable revisions
//!   plus lightweight branches, governed by a proposal/review protocol, with
//!   deterministic propagation of trunk changes into branch overlays, inverse
//!   rollback, and a hash-chained changelog;
//! * **reasoning traces** ([`cdc`]) — a text format for domain-annotated
//!   derivation chains that can be parsed, validated against a graph, and
//!   used to constrain what a reasoner may do next.
//!
//! Everything persists through canonical line-oriented text formats; equal
//! states serialize to equal bytes, which makes the digests in logs and
//! reports meaningful.

#![forbid(unsafe_code)]

pub mod canon;
pub mod cdc;
pub mod change;
pub mod check;
pub mod graph;
pub mod hash;
pub mod model;
pub mod repo;
pub mod store;
#[cfg(feature = "synth")]
pub mod synth;
mod text;
pub mod time;

pub use canon::{canonical_parse, canonical_serialize, snapshot_digest, ParseError};
pub use cdc::{
    parse_trace, permitted_next_steps, rule_display, rule_slug, serialize_trace, validate_trace,
    CdcClaim, CdcError, CdcStep, CdcTrace, StepLabel, TraceViolation, ViolationCode,
};
pub use change::{ApplyError, ChangeError, ChangeOp, ChangeSet, ConflictKey};
pub use check::{
    check_changeset, provenance_staleness, run_checks, run_checks_at, CheckFinding, CheckReport,
    FindingCode,
    Locus, Severity,
};
pub use graph::{CognitiveGraph, GraphError};
pub use model::{
    ConceptId, ConceptNode, Domain, EdgeKind, EdgeRef, ElementRef, ModelError, NodeKind,
    PedagogicalEdge, Provenance,
};
pub use repo::{
    Branch, BranchPropagation, ChangelogEntry, DroppedOp, LineId, Proposal, ProposalState,
    PropagationReport, RepoConfig, Repository, ReviewKind, ReviewRecord, Revision, Role, Verdict,
    VersionError, NO_DIGEST,
};
pub use store::StoreError;
pub use time::{Timestamp, TimestampError};
