//! The `ocg` command-line interface.
//!
//! Every subcommand is a thin adapter over [`ocg_core`]: it loads the
//! repository from disk, calls one engine operation, saves, and prints a
//! deterministic summary. All the interesting behaviour — checks, governance,
//! propagation, trace validation — lives in the core crate; the CLI decides
//! only argument parsing, file layout, and exit codes.
//!
//! Exit codes are part of the contract:
//!
//! | code | meaning                                                      |
//! |------|--------------------------------------------------------------|
//! | 0    | success                                                      |
//! | 2    | a validation or check failure (bad graph, failing trace)     |
//! | 3    | a governance violation (quorum, state machine, unknown line) |
//! | 4    | unusable input: parse errors, I/O failures, bad usage        |
//!
//! The [`dispatch`] entry point takes explicit argv, working directory, and
//! output streams so the scenario runner (and the tests) can call the CLI
//! in-process and capture everything.

#![forbid(unsafe_code)]

mod scenario;

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use ocg_core::{
    canonical_parse, canonical_serialize, parse_trace, permitted_next_steps, run_checks_at,
    validate_trace, CdcError, ChangeSet, ConceptId, Domain, LineId, ParseError, RepoConfig,
    Repository, ReviewKind, ReviewRecord, Role, Timestamp, Verdict, VersionError,
};
use std::collections::BTreeSet;

/// Success.
pub const EXIT_OK: i32 = 0;
/// A validation or check failure: the input was understood but rejected.
pub const EXIT_CHECK: i32 = 2;
/// A governance violation: quorum, proposal state, unknown line or revision.
pub const EXIT_GOVERNANCE: i32 = 3;
/// Unusable input: file parse errors, I/O failures, bad command lines.
pub const EXIT_FATAL: i32 = 4;

#[derive(Parser)]
#[command(
    name = "ocg",
    version,
    about = "Versioned pedagogical knowledge graphs",
    disable_help_subcommand = true
)]
struct Cli {
    /// Repository directory.
    #[arg(long, global = true, default_value = ".", env = "OCG_REPO", value_name = "DIR")]
    repo: PathBuf,

    /// Override the clock (ISO-8601 UTC, e.g. 2026-03-01T09:00:00Z).
    #[arg(long, global = true, value_name = "TIMESTAMP")]
    now: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create a repository from a seed graph document.
    Init {
        /// Seed graph file (canonical `.ocg` format; may describe an empty graph).
        seed: PathBuf,
        /// Distinct academic-committee approvals required for trunk merges.
        #[arg(long, default_value_t = 2)]
        quorum: u32,
        /// Flag provenance older than this many days as stale (advisory).
        #[arg(long, value_name = "DAYS")]
        staleness_days: Option<i64>,
    },
    /// Branch management.
    Branch {
        #[command(subcommand)]
        command: BranchCommand,
    },
    /// Submit a changeset file as a proposal against a line.
    Propose {
        /// Target line: `trunk` or a branch name.
        target: String,
        /// Changeset file (`OCG-CHANGESET 1` format).
        changeset: PathBuf,
        /// Proposal identifier (letters, digits, `_`, `-`).
        #[arg(long)]
        id: String,
    },
    /// Attach a review record to a proposal.
    Review {
        /// Proposal identifier.
        proposal: String,
        /// Reviewer role: academic_committee, researcher, teacher, branch_maintainer.
        #[arg(long)]
        role: String,
        /// Reviewer identifier.
        #[arg(long)]
        actor: String,
        /// pass or fail.
        #[arg(long)]
        verdict: String,
        /// Reference to the review document or evidence.
        #[arg(long, default_value = "")]
        doc: String,
        /// Record kind: expert_review or pilot_evidence.
        #[arg(long, default_value = "expert_review")]
        kind: String,
    },
    /// Merge an approved proposal into its target line.
    Merge {
        /// Proposal identifier.
        proposal: String,
    },
    /// Rebase every branch overlay onto the current trunk head.
    Propagate,
    /// Restore an earlier revision's state by merging its forward inverse.
    Rollback {
        /// Line: `trunk` or a branch name.
        line: String,
        /// Revision to restore (must be a strict ancestor of the head).
        revision: u64,
    },
    /// Print the hash-chained changelog entries for a line.
    Log {
        /// Line: `trunk` or a branch name.
        line: String,
    },
    /// Run the well-formedness checks over a line's head snapshot.
    Check {
        /// Line to check (default: trunk).
        line: Option<String>,
    },
    /// Enumerate ordering paths between two concepts.
    Paths {
        /// Start concept, as `term@Domain`.
        from: String,
        /// End concept, as `term@Domain`.
        to: String,
        /// Maximum number of edges per path.
        #[arg(long, default_value_t = 16)]
        max_len: usize,
        /// Line whose head snapshot to query.
        #[arg(long, default_value = "trunk")]
        line: String,
    },
    /// Reasoning-trace commands.
    Cdc {
        #[command(subcommand)]
        command: CdcCommand,
    },
    /// Print the canonical serialization of a revision's snapshot.
    Export {
        /// Line: `trunk` or a branch name.
        line: String,
        /// Revision number on that line.
        revision: u64,
    },
    /// Run a scripted scenario file against a fresh temporary repository.
    Scenario {
        /// Scenario script.
        script: PathBuf,
    },
}

#[derive(Subcommand)]
enum BranchCommand {
    /// Create a branch pinned to a trunk revision.
    Create {
        /// Branch name (letters, digits, `_`, `-`).
        name: String,
        /// Trunk revision to pin as the base (default: current head).
        #[arg(long, value_name = "REV")]
        at: Option<u64>,
    },
}

#[derive(Subcommand)]
enum CdcCommand {
    /// Parse a trace file and validate it against a line's head snapshot.
    Check {
        /// Trace file.
        trace: PathBuf,
        /// Comma-separated concepts the learner has mastered.
        #[arg(long, value_name = "ID,ID,...")]
        mastered: Option<String>,
        /// Line whose head snapshot to validate against.
        #[arg(long, default_value = "trunk")]
        line: String,
    },
    /// List the permitted next step labels from a domain.
    Next {
        /// Current domain.
        #[arg(long)]
        domain: String,
        /// Comma-separated concepts the learner has mastered.
        #[arg(long, value_name = "ID,ID,...")]
        mastered: Option<String>,
        /// Line whose head snapshot to query.
        #[arg(long, default_value = "trunk")]
        line: String,
    },
}

/// A classified failure, carrying the full message for stderr.
#[derive(Debug)]
enum CliError {
    /// Exit 2.
    Validation(String),
    /// Exit 3.
    Governance(String),
    /// Exit 4.
    Fatal(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_CHECK,
            CliError::Governance(_) => EXIT_GOVERNANCE,
            CliError::Fatal(_) => EXIT_FATAL,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Governance(m) | CliError::Fatal(m) => m,
        }
    }
}

/// Map an engine error to an exit class, prefixing the variant name so
/// scripts can match on a stable tag. Errors that carry a failing check
/// report print the report lines first.
fn version_error(e: VersionError) -> CliError {
    let tag = match &e {
        VersionError::SeedInvalid { .. } => "SeedInvalid",
        VersionError::EmptyTrunk => "EmptyTrunk",
        VersionError::UnknownLine { .. } => "UnknownLine",
        VersionError::UnknownRevision { .. } => "UnknownRevision",
        VersionError::InvalidBranchName { .. } => "InvalidBranchName",
        VersionError::ReservedBranchName => "ReservedBranchName",
        VersionError::DuplicateBranch { .. } => "DuplicateBranch",
        VersionError::InvalidProposalId { .. } => "InvalidProposalId",
        VersionError::DuplicateProposal { .. } => "DuplicateProposal",
        VersionError::UnknownProposal { .. } => "UnknownProposal",
        VersionError::InvalidChangeset { .. } => "InvalidChangeset",
        VersionError::ChecksFailed { .. } => "ChecksFailed",
        VersionError::IllegalTransition { .. } => "IllegalTransition",
        VersionError::QuorumNotMet { .. } => "QuorumNotMet",
        VersionError::NotApproved { .. } => "NotApproved",
        VersionError::PostMergeCheckFailure { .. } => "PostMergeCheckFailure",
        VersionError::NotAncestor { .. } => "NotAncestor",
        VersionError::InvalidRollback { .. } => "InvalidRollback",
    };
    match &e {
        VersionError::SeedInvalid { report }
        | VersionError::ChecksFailed { report }
        | VersionError::PostMergeCheckFailure { report } => {
            CliError::Validation(format!("{}{tag}: {e}", report.render()))
        }
        VersionError::InvalidChangeset { .. } => CliError::Validation(format!("{tag}: {e}")),
        _ => CliError::Governance(format!("{tag}: {e}")),
    }
}

/// Read a file, reporting the path as the user gave it.
fn read_file(cwd: &Path, path: &Path) -> Result<String, CliError> {
    fs::read_to_string(cwd.join(path))
        .map_err(|e| CliError::Fatal(format!("{}: {e}", path.display())))
}

fn file_parse_error(path: &Path, e: ParseError) -> CliError {
    CliError::Fatal(format!("{}:{}: {}", path.display(), e.line, e.message))
}

/// Advisory lock on a repository directory, released on drop. Prevents two
/// mutating commands from interleaving load–modify–save cycles.
struct RepoLock {
    path: PathBuf,
}

impl RepoLock {
    fn acquire(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(".ocg-lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Fatal(
                "repository is locked by another process (remove .ocg-lock if stale)".to_string(),
            )),
            Err(e) => Err(CliError::Fatal(format!("{}: {e}", path.display()))),
        }
    }
}

impl Drop for RepoLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn load_repo(dir: &Path) -> Result<Repository, CliError> {
    ocg_core::store::load(dir).map_err(|e| CliError::Fatal(e.to_string()))
}

fn save_repo(repo: &Repository, dir: &Path) -> Result<(), CliError> {
    ocg_core::store::save(repo, dir).map_err(|e| CliError::Fatal(e.to_string()))
}

fn parse_line(s: &str) -> Result<LineId, CliError> {
    LineId::parse(s).map_err(version_error)
}

fn parse_concept(s: &str) -> Result<ConceptId, CliError> {
    ConceptId::parse(s).map_err(|e| CliError::Fatal(format!("{s:?}: {e}")))
}

fn parse_mastered(spec: &Option<String>) -> Result<Option<BTreeSet<ConceptId>>, CliError> {
    match spec {
        None => Ok(None),
        Some(s) => {
            let mut set = BTreeSet::new();
            for part in s.split(',') {
                let part = part.trim();
                if part.is_empty() {
                    continue;
                }
                set.insert(parse_concept(part)?);
            }
            Ok(Some(set))
        }
    }
}

/// Run the CLI with explicit argv (including the program name), working
/// directory, and output streams. Returns the process exit code.
pub fn dispatch(argv: &[String], cwd: &Path, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{rendered}");
                EXIT_OK
            } else {
                let _ = write!(stderr, "{rendered}");
                EXIT_FATAL
            };
        }
    };
    let repo_dir = cwd.join(&cli.repo);
    let now = match &cli.now {
        Some(s) => match Timestamp::parse(s) {
            Ok(t) => t,
            Err(e) => {
                let _ = writeln!(stderr, "--now {s:?}: {e}");
                return EXIT_FATAL;
            }
        },
        None => system_now(),
    };

    // The scenario runner writes its report as it goes, so it owns the
    // streams; every other command builds its output and prints on success.
    if let Command::Scenario { script } = &cli.command {
        return match scenario::run(script, cwd, stdout) {
            Ok(true) => EXIT_OK,
            Ok(false) => EXIT_CHECK,
            Err(e) => {
                let _ = writeln!(stderr, "{}", e.message());
                e.code()
            }
        };
    }

    let result = run_command(&cli.command, &repo_dir, cwd, now);
    match result {
        Ok(out) => {
            let _ = write!(stdout, "{out}");
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.message());
            e.code()
        }
    }
}

/// The wall clock, used only when `--now` is absent.
fn system_now() -> Timestamp {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0);
    Timestamp::from_unix_seconds(secs)
}

fn run_command(
    command: &Command,
    repo_dir: &Path,
    cwd: &Path,
    now: Timestamp,
) -> Result<String, CliError> {
    match command {
        Command::Init { seed, quorum, staleness_days } => {
            cmd_init(repo_dir, cwd, seed, *quorum, *staleness_days, now)
        }
        Command::Branch { command: BranchCommand::Create { name, at } } => {
            cmd_branch_create(repo_dir, name, *at)
        }
        Command::Propose { target, changeset, id } => {
            cmd_propose(repo_dir, cwd, target, changeset, id, now)
        }
        Command::Review { proposal, role, actor, verdict, doc, kind } => {
            cmd_review(repo_dir, proposal, role, actor, verdict, doc, kind, now)
        }
        Command::Merge { proposal } => cmd_merge(repo_dir, proposal, now),
        Command::Propagate => cmd_propagate(repo_dir, now),
        Command::Rollback { line, revision } => cmd_rollback(repo_dir, line, *revision, now),
        Command::Log { line } => cmd_log(repo_dir, line),
        Command::Check { line } => cmd_check(repo_dir, line.as_deref(), now),
        Command::Paths { from, to, max_len, line } => {
            cmd_paths(repo_dir, from, to, *max_len, line)
        }
        Command::Cdc { command: CdcCommand::Check { trace, mastered, line } } => {
            cmd_cdc_check(repo_dir, cwd, trace, mastered, line)
        }
        Command::Cdc { command: CdcCommand::Next { domain, mastered, line } } => {
            cmd_cdc_next(repo_dir, domain, mastered, line)
        }
        Command::Export { line, revision } => cmd_export(repo_dir, line, *revision),
        Command::Scenario { .. } => unreachable!("handled in dispatch"),
    }
}

fn cmd_init(
    repo_dir: &Path,
    cwd: &Path,
    seed: &Path,
    quorum: u32,
    staleness_days: Option<i64>,
    now: Timestamp,
) -> Result<String, CliError> {
    if ocg_core::store::exists(repo_dir) {
        return Err(CliError::Fatal("repository already exists here".to_string()));
    }
    let text = read_file(cwd, seed)?;
    let graph = canonical_parse(&text).map_err(|e| file_parse_error(seed, e))?;
    fs::create_dir_all(repo_dir)
        .map_err(|e| CliError::Fatal(format!("create repository directory: {e}")))?;
    let _lock = RepoLock::acquire(repo_dir)?;
    let config = RepoConfig { quorum, staleness_horizon_days: staleness_days };
    let repo = Repository::init(&graph, config, now).map_err(version_error)?;
    save_repo(&repo, repo_dir)?;
    Ok(match repo.trunk().last() {
        Some(rev) => format!(
            "initialized repository (trunk revision {}, snapshot {})\n",
            rev.number, rev.snapshot
        ),
        None => "initialized repository (empty trunk)\n".to_string(),
    })
}

fn cmd_branch_create(repo_dir: &Path, name: &str, at: Option<u64>) -> Result<String, CliError> {
    let _lock = RepoLock::acquire(repo_dir)?;
    let mut repo = load_repo(repo_dir)?;
    let (base, snapshot) = {
        let b = match at {
            Some(rev) => repo.create_branch_at(name, rev),
            None => repo.create_branch(name),
        }
        .map_err(version_error)?;
        (b.base, b.base_snapshot.clone())
    };
    save_repo(&repo, repo_dir)?;
    Ok(format!("created branch {name} at trunk revision {base} (snapshot {snapshot})\n"))
}

fn cmd_propose(
    repo_dir: &Path,
    cwd: &Path,
    target: &str,
    changeset: &Path,
    id: &str,
    now: Timestamp,
) -> Result<String, CliError> {
    let text = read_file(cwd, changeset)?;
    let cs = ChangeSet::parse_file(&text).map_err(|e| file_parse_error(changeset, e))?;
    let line = parse_line(target)?;
    let _lock = RepoLock::acquire(repo_dir)?;
    let mut repo = load_repo(repo_dir)?;
    let digest = {
        let p = repo.submit_proposal(id, line, cs, now).map_err(version_error)?;
        p.changeset().digest()
    };
    save_repo(&repo, repo_dir)?;
    Ok(format!("checks passed\nsubmitted proposal {id} for {target} (changeset {digest})\n"))
}

#[allow(clippy::too_many_arguments)]
fn cmd_review(
    repo_dir: &Path,
    proposal: &str,
    role: &str,
    actor: &str,
    verdict: &str,
    doc: &str,
    kind: &str,
    now: Timestamp,
) -> Result<String, CliError> {
    let role = Role::parse(role)
        .ok_or_else(|| CliError::Fatal(format!("unknown role {role:?}")))?;
    let verdict = Verdict::parse(verdict)
        .ok_or_else(|| CliError::Fatal(format!("unknown verdict {verdict:?}")))?;
    let kind = ReviewKind::parse(kind)
        .ok_or_else(|| CliError::Fatal(format!("unknown review kind {kind:?}")))?;
    let record = ReviewRecord {
        kind,
        actor: actor.to_string(),
        role,
        verdict,
        document_ref: doc.to_string(),
        at: now,
    };
    let _lock = RepoLock::acquire(repo_dir)?;
    let mut repo = load_repo(repo_dir)?;
    let state = repo.advance_proposal(proposal, record).map_err(version_error)?;
    save_repo(&repo, repo_dir)?;
    Ok(format!("recorded {verdict} by {actor} ({role}) on {proposal}: state {state}\n"))
}

fn cmd_merge(repo_dir: &Path, proposal: &str, now: Timestamp) -> Result<String, CliError> {
    let _lock = RepoLock::acquire(repo_dir)?;
    let mut repo = load_repo(repo_dir)?;
    let (line, number, snapshot) = repo.merge_proposal(proposal, now).map_err(version_error)?;
    save_repo(&repo, repo_dir)?;
    Ok(format!("merged proposal {proposal} as {line} revision {number} (snapshot {snapshot})\n"))
}

fn cmd_propagate(repo_dir: &Path, now: Timestamp) -> Result<String, CliError> {
    let _lock = RepoLock::acquire(repo_dir)?;
    let mut repo = load_repo(repo_dir)?;
    let report = repo.propagate(now).map_err(version_error)?;
    save_repo(&repo, repo_dir)?;
    Ok(report.render())
}

fn cmd_rollback(repo_dir: &Path, line: &str, revision: u64, now: Timestamp) -> Result<String, CliError> {
    let target = parse_line(line)?;
    let _lock = RepoLock::acquire(repo_dir)?;
    let mut repo = load_repo(repo_dir)?;
    let (number, snapshot) = repo.rollback(&target, revision, now).map_err(version_error)?;
    save_repo(&repo, repo_dir)?;
    Ok(format!(
        "rolled back {line} to revision {revision}: new revision {number} (snapshot {snapshot})\n"
    ))
}

fn cmd_log(repo_dir: &Path, line: &str) -> Result<String, CliError> {
    let target = parse_line(line)?;
    let repo = load_repo(repo_dir)?;
    let entries = repo.changelog_for(&target).map_err(version_error)?;
    let mut out = String::new();
    for entry in entries {
        out.push_str(&entry.canonical_text());
        let _ = writeln!(out, "digest {}", entry.digest);
        out.push('\n');
    }
    Ok(out)
}

fn cmd_check(repo_dir: &Path, line: Option<&str>, now: Timestamp) -> Result<String, CliError> {
    let target = parse_line(line.unwrap_or("trunk"))?;
    let repo = load_repo(repo_dir)?;
    let graph = repo.head_snapshot(&target).map_err(version_error)?;
    let report = run_checks_at(&graph, repo.config().staleness_horizon_days, now);
    let n = report.findings().len();
    if report.passed() {
        Ok(if n == 0 {
            "checks passed\n".to_string()
        } else {
            format!("{}checks passed ({n} advisory finding(s))\n", report.render())
        })
    } else {
        Err(CliError::Validation(format!("{}checks failed ({n} finding(s))", report.render())))
    }
}

fn cmd_paths(
    repo_dir: &Path,
    from: &str,
    to: &str,
    max_len: usize,
    line: &str,
) -> Result<String, CliError> {
    let target = parse_line(line)?;
    let from = parse_concept(from)?;
    let to = parse_concept(to)?;
    let repo = load_repo(repo_dir)?;
    let graph = repo.head_snapshot(&target).map_err(version_error)?;
    let paths = graph
        .enumerate_paths(&from, &to, max_len)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    if paths.is_empty() {
        return Ok(format!("no paths from {from} to {to} within {max_len} edge(s)\n"));
    }
    let mut out = String::new();
    for path in paths {
        let rendered: Vec<String> = path.iter().map(|id| id.to_string()).collect();
        out.push_str(&rendered.join(" -> "));
        out.push('\n');
    }
    Ok(out)
}

fn cmd_cdc_check(
    repo_dir: &Path,
    cwd: &Path,
    trace: &Path,
    mastered: &Option<String>,
    line: &str,
) -> Result<String, CliError> {
    let text = read_file(cwd, trace)?;
    let parsed = parse_trace(&text).map_err(|e| match e {
        CdcError::BrokenChain { .. } => CliError::Validation(format!("BrokenChain: {e}")),
        CdcError::Parse(pe) => file_parse_error(trace, pe),
        other => CliError::Fatal(format!("{}: {other}", trace.display())),
    })?;
    let mastered = parse_mastered(mastered)?;
    let target = parse_line(line)?;
    let repo = load_repo(repo_dir)?;
    let graph = repo.head_snapshot(&target).map_err(version_error)?;
    let violations = validate_trace(&graph, &parsed, mastered.as_ref());

    let mut out = String::new();
    let _ = writeln!(out, "given: {}", parsed.given());
    for (i, step) in parsed.steps().iter().enumerate() {
        let _ = writeln!(out, "step {}: {} -> {}", i + 1, step.label.render(), step.to_claim);
    }
    if violations.is_empty() {
        out.push_str("0 violations\n");
        return Ok(out);
    }
    for v in &violations {
        out.push_str(&v.render());
        out.push('\n');
    }
    let n = violations.len();
    let _ = write!(out, "{n} violation{}", if n == 1 { "" } else { "s" });
    Err(CliError::Validation(out))
}

fn cmd_cdc_next(
    repo_dir: &Path,
    domain: &str,
    mastered: &Option<String>,
    line: &str,
) -> Result<String, CliError> {
    let domain = Domain::new(domain).map_err(|e| CliError::Fatal(e.to_string()))?;
    let mastered = parse_mastered(mastered)?;
    let target = parse_line(line)?;
    let repo = load_repo(repo_dir)?;
    let graph = repo.head_snapshot(&target).map_err(version_error)?;
    let labels = permitted_next_steps(&graph, &domain, mastered.as_ref())
        .map_err(|e| CliError::Validation(format!("UnknownDomain: {e}")))?;
    let mut out = String::new();
    for label in labels {
        out.push_str(&label.render());
        out.push('\n');
    }
    Ok(out)
}

fn cmd_export(repo_dir: &Path, line: &str, revision: u64) -> Result<String, CliError> {
    let target = parse_line(line)?;
    let repo = load_repo(repo_dir)?;
    let graph = repo.snapshot_at(&target, revision).map_err(version_error)?;
    Ok(canonical_serialize(&graph))
}
