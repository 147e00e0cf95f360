//! On-disk persistence for repositories.
//!
//! A repository lives in a directory of line-oriented text files:
//!
//! ```text
//! config            policy (quorum, staleness horizon)
//! trunk.log         trunk revisions, oldest first
//! branches/<n>.log  one log per branch: pinned base plus overlay revisions
//! proposals.log     every proposal ever submitted, with its review records
//! changelog.log     the hash-chained changelog
//! ```
//!
//! Saving is a full rewrite — the formats are canonical, so saving the same
//! state twice produces byte-identical files. Loading re-verifies everything
//! it can: revision and changeset digests are recomputed from content, trunk
//! and branch snapshots are re-derived by replaying changesets, and the
//! changelog chain is re-hashed. A repository that does not withstand this
//! is reported as [`StoreError::Corrupt`] rather than silently accepted.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::canon::{snapshot_digest, ParseError};
use crate::change::{apply_changeset, ChangeSet};
use crate::check::Severity;
use crate::graph::CognitiveGraph;
use crate::repo::{
    Branch, ChangelogEntry, LineId, Proposal, ProposalState, RepoConfig, Repository, ReviewRecord,
    Revision, NO_DIGEST,
};
use crate::time::Timestamp;

/// Header of the `config` file.
pub const CONFIG_HEADER: &str = "OCG-REPO 1";
/// Header of revision log files.
pub const LOG_HEADER: &str = "OCG-LOG 1";
/// Header of `proposals.log`.
pub const PROPOSALS_HEADER: &str = "OCG-PROPOSALS 1";
/// Header of `changelog.log`.
pub const CHANGELOG_HEADER: &str = "OCG-CHANGELOG 1";

/// What went wrong while reading or writing a repository directory.
#[derive(Debug)]
pub enum StoreError {
    /// Filesystem failure.
    Io {
        /// The file or directory involved.
        path: PathBuf,
        /// Underlying error.
        source: std::io::Error,
    },
    /// A file exists but its contents do not parse.
    Parse {
        /// The offending file.
        path: PathBuf,
        /// Line-level detail.
        source: ParseError,
    },
    /// A file parses but its contents contradict themselves: a digest does
    /// not match recomputation, a replayed changeset fails, a reference
    /// points nowhere.
    Corrupt {
        /// The offending file.
        path: PathBuf,
        /// What the verification found.
        detail: String,
    },
    /// The directory has no `config` file.
    NotARepository {
        /// The directory inspected.
        path: PathBuf,
    },
    /// The directory already holds a repository.
    AlreadyExists {
        /// The directory inspected.
        path: PathBuf,
    },
}

impl fmt::Display for StoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StoreError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            StoreError::Parse { path, source } => write!(f, "{}: {source}", path.display()),
            StoreError::Corrupt { path, detail } => write!(f, "{}: {detail}", path.display()),
            StoreError::NotARepository { path } => {
                write!(f, "{} is not a graph repository (no config file)", path.display())
            }
            StoreError::AlreadyExists { path } => {
                write!(f, "{} already holds a graph repository", path.display())
            }
        }
    }
}

impl std::error::Error for StoreError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            StoreError::Io { source, .. } => Some(source),
            StoreError::Parse { source, .. } => Some(source),
            _ => None,
        }
    }
}

/// True if `root` looks like a repository (has a `config` file).
pub fn exists(root: &Path) -> bool {
    root.join("config").is_file()
}

/// Write `repo` into `root`, creating directories as needed. Branch logs
/// that no longer correspond to a live branch are removed.
pub fn save(repo: &Repository, root: &Path) -> Result<(), StoreError> {
    fs::create_dir_all(root).map_err(|e| io_err(root, e))?;

    write_file(&root.join("config"), &render_config(repo.config()))?;
    write_file(&root.join("trunk.log"), &render_log(&LineId::Trunk, None, repo.trunk()))?;
    write_file(&root.join("proposals.log"), &render_proposals(repo))?;
    write_file(&root.join("changelog.log"), &render_changelog(repo.changelog()))?;

    let branches_dir = root.join("branches");
    fs::create_dir_all(&branches_dir).map_err(|e| io_err(&branches_dir, e))?;
    let mut keep: Vec<String> = Vec::new();
    for branch in repo.branches() {
        let file = branches_dir.join(format!("{}.log", branch.name));
        let line = LineId::Branch(branch.name.clone());
        write_file(&file, &render_log(&line, Some(branch), &branch.overlay))?;
        keep.push(format!("{}.log", branch.name));
    }
    for entry in fs::read_dir(&branches_dir).map_err(|e| io_err(&branches_dir, e))? {
        let entry = entry.map_err(|e| io_err(&branches_dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".log") && !keep.contains(&name) {
            fs::remove_file(entry.path()).map_err(|e| io_err(&entry.path(), e))?;
        }
    }
    Ok(())
}

/// Read and verify the repository stored in `root`.
pub fn load(root: &Path) -> Result<Repository, StoreError> {
    let config_path = root.join("config");
    if !config_path.is_file() {
        return Err(StoreError::NotARepository { path: root.to_path_buf() });
    }
    let config = parse_config(&config_path, &read_file(&config_path)?)?;

    let trunk_path = root.join("trunk.log");
    let (_, trunk) = parse_log(&trunk_path, &read_file(&trunk_path)?, &LineId::Trunk)?;
    verify_fold(&trunk_path, CognitiveGraph::new(), &trunk, 0)?;

    let mut branches: BTreeMap<String, Branch> = BTreeMap::new();
    let branches_dir = root.join("branches");
    if branches_dir.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(&branches_dir)
            .map_err(|e| io_err(&branches_dir, e))?
            .map(|ent| ent.map(|e| e.path()))
            .collect::<Result<_, _>>()
            .map_err(|e| io_err(&branches_dir, e))?;
        files.retain(|p| p.extension().is_some_and(|x| x == "log"));
        files.sort();
        for file in files {
            let stem = file
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let line = LineId::parse(&stem).map_err(|_| StoreError::Corrupt {
                path: file.clone(),
                detail: format!("invalid branch file name {stem:?}"),
            })?;
            let (header, overlay) = parse_log(&file, &read_file(&file)?, &line)?;
            let (base, base_snapshot) = header.ok_or_else(|| StoreError::Corrupt {
                path: file.clone(),
                detail: "branch log missing base/base-snapshot header".to_string(),
            })?;
            let base_rev = trunk.get(base as usize).ok_or_else(|| StoreError::Corrupt {
                path: file.clone(),
                detail: format!("base revision {base} does not exist on the trunk"),
            })?;
            if base_rev.snapshot != base_snapshot {
                return Err(StoreError::Corrupt {
                    path: file.clone(),
                    detail: format!(
                        "base-snapshot {base_snapshot} does not match trunk revision {base} ({})",
                        base_rev.snapshot
                    ),
                });
            }
            let base_graph = fold(&trunk[..=base as usize]).map_err(|detail| StoreError::Corrupt {
                path: trunk_path.clone(),
                detail,
            })?;
            verify_fold(&file, base_graph, &overlay, 1)?;
            branches.insert(
                stem.clone(),
                Branch { name: stem, base, base_snapshot, overlay },
            );
        }
    }

    let proposals_path = root.join("proposals.log");
    let proposals = parse_proposals(&proposals_path, &read_file(&proposals_path)?)?;
    for p in proposals.values() {
        if let LineId::Branch(name) = p.target() {
            if !branches.contains_key(name) {
                return Err(StoreError::Corrupt {
                    path: proposals_path.clone(),
                    detail: format!("proposal {} targets unknown branch {name}", p.id()),
                });
            }
        }
    }

    let changelog_path = root.join("changelog.log");
    let changelog = parse_changelog(&changelog_path, &read_file(&changelog_path)?)?;

    let repo = Repository::from_parts(config, trunk, branches, proposals, changelog);
    if let Err(index) = repo.verify_changelog() {
        return Err(StoreError::Corrupt {
            path: changelog_path,
            detail: format!("changelog entry {index} breaks the hash chain"),
        });
    }
    Ok(repo)
}

fn io_err(path: &Path, source: std::io::Error) -> StoreError {
    StoreError::Io { path: path.to_path_buf(), source }
}

fn read_file(path: &Path) -> Result<String, StoreError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), StoreError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

// ---------------------------------------------------------------- config --

fn render_config(config: &RepoConfig) -> String {
    let mut out = format!("{CONFIG_HEADER}\nquorum {}\n", config.quorum);
    if let Some(days) = config.staleness_horizon_days {
        out.push_str(&format!("staleness-horizon-days {days}\n"));
    }
    out
}

fn parse_config(path: &Path, text: &str) -> Result<RepoConfig, StoreError> {
    let mut lines = Lines::new(text);
    lines.expect_header(path, CONFIG_HEADER)?;
    let mut config = RepoConfig::default();
    let mut saw_quorum = false;
    while let Some((n, line)) = lines.next_content() {
        if let Some(rest) = line.strip_prefix("quorum ") {
            config.quorum = rest.trim().parse().map_err(|_| {
                parse_err(path, n, format!("invalid quorum {:?}", rest.trim()))
            })?;
            saw_quorum = true;
        } else if let Some(rest) = line.strip_prefix("staleness-horizon-days ") {
            let days: i64 = rest.trim().parse().map_err(|_| {
                parse_err(path, n, format!("invalid day count {:?}", rest.trim()))
            })?;
            config.staleness_horizon_days = Some(days);
        } else {
            return Err(parse_err(path, n, format!("unexpected line {line:?}")));
        }
    }
    if !saw_quorum {
        return Err(parse_err(path, lines.last_line(), "missing quorum line".to_string()));
    }
    Ok(config)
}

// ------------------------------------------------------------------ logs --

fn render_log(line: &LineId, branch: Option<&Branch>, revisions: &[Revision]) -> String {
    let mut out = format!("{LOG_HEADER}\nline {line}\n");
    if let Some(b) = branch {
        out.push_str(&format!("base {}\nbase-snapshot {}\n", b.base, b.base_snapshot));
    }
    for rev in revisions {
        out.push('\n');
        out.push_str(&format!("revision {} | {} | {}\n", rev.number, rev.proposal_id, rev.at));
        out.push_str(&format!("parent {}\n", rev.parent_snapshot));
        out.push_str("changeset-begin\n");
        out.push_str(&rev.changeset.canonical_text());
        out.push_str("changeset-end\n");
        out.push_str(&format!("changeset-digest {}\n", rev.changeset_digest()));
        out.push_str(&format!("snapshot {}\n", rev.snapshot));
    }
    out
}

type BranchHeader = Option<(u64, String)>;

fn parse_log(
    path: &Path,
    text: &str,
    expected_line: &LineId,
) -> Result<(BranchHeader, Vec<Revision>), StoreError> {
    let mut lines = Lines::new(text);
    lines.expect_header(path, LOG_HEADER)?;

    let (n, line) = lines
        .next_content()
        .ok_or_else(|| parse_err(path, lines.last_line(), "missing line header".to_string()))?;
    let declared = line
        .strip_prefix("line ")
        .ok_or_else(|| parse_err(path, n, "expected line header".to_string()))?;
    if declared != expected_line.to_string() {
        return Err(StoreError::Corrupt {
            path: path.to_path_buf(),
            detail: format!("file claims to be the log of {declared:?}, expected {expected_line}"),
        });
    }

    let mut header: BranchHeader = None;
    if matches!(expected_line, LineId::Branch(_)) {
        let (n, line) = lines
            .next_content()
            .ok_or_else(|| parse_err(path, lines.last_line(), "missing base line".to_string()))?;
        let base: u64 = line
            .strip_prefix("base ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_err(path, n, "expected base <revision>".to_string()))?;
        let (n, line) = lines.next_content().ok_or_else(|| {
            parse_err(path, lines.last_line(), "missing base-snapshot line".to_string())
        })?;
        let snap = line
            .strip_prefix("base-snapshot ")
            .ok_or_else(|| parse_err(path, n, "expected base-snapshot <digest>".to_string()))?;
        header = Some((base, parse_digest(path, n, snap)?));
    }

    let mut revisions = Vec::new();
    while let Some((n, line)) = lines.next_content() {
        let rest = line
            .strip_prefix("revision ")
            .ok_or_else(|| parse_err(path, n, format!("expected revision line, got {line:?}")))?;
        let fields: Vec<&str> = rest.split(" | ").collect();
        if fields.len() != 3 {
            return Err(parse_err(
                path,
                n,
                "expected: revision <number> | <proposal> | <timestamp>".to_string(),
            ));
        }
        let number: u64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, n, format!("invalid revision number {:?}", fields[0])))?;
        let proposal_id = fields[1].trim().to_string();
        let at = Timestamp::parse(fields[2].trim())
            .map_err(|e| parse_err(path, n, e.to_string()))?;

        let (n, line) = lines
            .next_content()
            .ok_or_else(|| parse_err(path, lines.last_line(), "missing parent line".to_string()))?;
        let parent = line
            .strip_prefix("parent ")
            .ok_or_else(|| parse_err(path, n, "expected parent <digest>".to_string()))?;
        let parent_snapshot = parse_digest(path, n, parent)?;

        let (n, line) = lines.next_content().ok_or_else(|| {
            parse_err(path, lines.last_line(), "missing changeset-begin".to_string())
        })?;
        if line != "changeset-begin" {
            return Err(parse_err(path, n, format!("expected changeset-begin, got {line:?}")));
        }
        let (body, body_start) = lines.take_until(path, "changeset-end")?;
        let changeset = ChangeSet::parse_body(&body, body_start)
            .map_err(|e| StoreError::Parse { path: path.to_path_buf(), source: e })?;

        let (n, line) = lines.next_content().ok_or_else(|| {
            parse_err(path, lines.last_line(), "missing changeset-digest line".to_string())
        })?;
        let declared_cs = line
            .strip_prefix("changeset-digest ")
            .ok_or_else(|| parse_err(path, n, "expected changeset-digest <digest>".to_string()))?;
        let declared_cs = parse_digest(path, n, declared_cs)?;
        if declared_cs != changeset.digest() {
            return Err(StoreError::Corrupt {
                path: path.to_path_buf(),
                detail: format!(
                    "revision {number}: changeset digest {declared_cs} does not match content ({})",
                    changeset.digest()
                ),
            });
        }

        let (n, line) = lines.next_content().ok_or_else(|| {
            parse_err(path, lines.last_line(), "missing snapshot line".to_string())
        })?;
        let snap = line
            .strip_prefix("snapshot ")
            .ok_or_else(|| parse_err(path, n, "expected snapshot <digest>".to_string()))?;
        let snapshot = parse_digest(path, n, snap)?;

        revisions.push(Revision { number, parent_snapshot, snapshot, proposal_id, at, changeset });
    }
    Ok((header, revisions))
}

/// Replay `revisions` from `start` on top of `base`, verifying numbering and
/// both snapshot digests of every revision.
fn verify_fold(
    path: &Path,
    base: CognitiveGraph,
    revisions: &[Revision],
    first_number: u64,
) -> Result<(), StoreError> {
    let corrupt = |detail: String| StoreError::Corrupt { path: path.to_path_buf(), detail };
    let mut graph = base;
    for (i, rev) in revisions.iter().enumerate() {
        let expected_number = first_number + i as u64;
        if rev.number != expected_number {
            return Err(corrupt(format!(
                "revision numbering jumps to {} where {expected_number} was expected",
                rev.number
            )));
        }
        let here = snapshot_digest(&graph);
        if rev.parent_snapshot != here {
            return Err(corrupt(format!(
                "revision {}: parent snapshot {} does not match replayed state ({here})",
                rev.number, rev.parent_snapshot
            )));
        }
        graph = apply_changeset(&graph, &rev.changeset).map_err(|e| {
            corrupt(format!("revision {}: changeset does not replay: {e}", rev.number))
        })?;
        let now = snapshot_digest(&graph);
        if rev.snapshot != now {
            return Err(corrupt(format!(
                "revision {}: snapshot {} does not match replayed state ({now})",
                rev.number, rev.snapshot
            )));
        }
    }
    Ok(())
}

/// Replay a slice of verified revisions into a graph.
fn fold(revisions: &[Revision]) -> Result<CognitiveGraph, String> {
    let mut graph = CognitiveGraph::new();
    for rev in revisions {
        graph = apply_changeset(&graph, &rev.changeset)
            .map_err(|e| format!("revision {}: changeset does not replay: {e}", rev.number))?;
    }
    Ok(graph)
}

// ------------------------------------------------------------- proposals --

fn render_proposals(repo: &Repository) -> String {
    let mut out = format!("{PROPOSALS_HEADER}\n");
    for p in repo.proposals() {
        out.push('\n');
        out.push_str(&format!(
            "proposal {} | {} | {} | {} | {}\n",
            p.id(),
            p.target(),
            p.state(),
            p.severity(),
            p.submitted_at()
        ));
        out.push_str("changeset-begin\n");
        out.push_str(&p.changeset().canonical_text());
        out.push_str("changeset-end\n");
        out.push_str(&format!("changeset-digest {}\n", p.changeset().digest()));
        for r in p.records() {
            out.push_str(&r.render());
            out.push('\n');
        }
    }
    out
}

fn parse_proposals(path: &Path, text: &str) -> Result<BTreeMap<String, Proposal>, StoreError> {
    let mut lines = Lines::new(text);
    lines.expect_header(path, PROPOSALS_HEADER)?;
    let mut proposals = BTreeMap::new();
    while let Some((n, line)) = lines.next_content() {
        let rest = line
            .strip_prefix("proposal ")
            .ok_or_else(|| parse_err(path, n, format!("expected proposal line, got {line:?}")))?;
        let fields: Vec<&str> = rest.split(" | ").collect();
        if fields.len() != 5 {
            return Err(parse_err(
                path,
                n,
                "expected: proposal <id> | <target> | <state> | <severity> | <timestamp>"
                    .to_string(),
            ));
        }
        let id = fields[0].trim().to_string();
        let target = LineId::parse(fields[1].trim())
            .map_err(|_| parse_err(path, n, format!("invalid target {:?}", fields[1].trim())))?;
        let state = ProposalState::parse(fields[2].trim())
            .ok_or_else(|| parse_err(path, n, format!("unknown state {:?}", fields[2].trim())))?;
        let severity = Severity::parse(fields[3].trim())
            .ok_or_else(|| parse_err(path, n, format!("unknown severity {:?}", fields[3].trim())))?;
        let submitted_at = Timestamp::parse(fields[4].trim())
            .map_err(|e| parse_err(path, n, e.to_string()))?;

        let (bn, bline) = lines.next_content().ok_or_else(|| {
            parse_err(path, lines.last_line(), "missing changeset-begin".to_string())
        })?;
        if bline != "changeset-begin" {
            return Err(parse_err(path, bn, format!("expected changeset-begin, got {bline:?}")));
        }
        let (body, body_start) = lines.take_until(path, "changeset-end")?;
        let changeset = ChangeSet::parse_body(&body, body_start)
            .map_err(|e| StoreError::Parse { path: path.to_path_buf(), source: e })?;

        let (dn, dline) = lines.next_content().ok_or_else(|| {
            parse_err(path, lines.last_line(), "missing changeset-digest line".to_string())
        })?;
        let declared = dline
            .strip_prefix("changeset-digest ")
            .ok_or_else(|| parse_err(path, dn, "expected changeset-digest <digest>".to_string()))?;
        let declared = parse_digest(path, dn, declared)?;
        if declared != changeset.digest() {
            return Err(StoreError::Corrupt {
                path: path.to_path_buf(),
                detail: format!(
                    "proposal {id}: changeset digest {declared} does not match content ({})",
                    changeset.digest()
                ),
            });
        }

        let mut records = Vec::new();
        while let Some((rn, rline)) = lines.peek_content() {
            if !rline.starts_with("record ") {
                break;
            }
            records.push(
                ReviewRecord::parse(rn, rline)
                    .map_err(|e| StoreError::Parse { path: path.to_path_buf(), source: e })?,
            );
            lines.next_content();
        }

        if proposals
            .insert(
                id.clone(),
                Proposal::from_parts(id.clone(), target, changeset, severity, state, records, submitted_at),
            )
            .is_some()
        {
            return Err(parse_err(path, n, format!("duplicate proposal {id:?}")));
        }
    }
    Ok(proposals)
}

// ------------------------------------------------------------- changelog --

fn render_changelog(entries: &[ChangelogEntry]) -> String {
    let mut out = format!("{CHANGELOG_HEADER}\n");
    for e in entries {
        out.push('\n');
        out.push_str(&e.canonical_text());
        out.push_str(&format!("prev {}\n", e.prev_digest));
        out.push_str(&format!("digest {}\n", e.digest));
    }
    out
}

fn parse_changelog(path: &Path, text: &str) -> Result<Vec<ChangelogEntry>, StoreError> {
    let mut lines = Lines::new(text);
    lines.expect_header(path, CHANGELOG_HEADER)?;
    let mut entries = Vec::new();
    while let Some((n, line)) = lines.next_content() {
        let rest = line
            .strip_prefix("entry ")
            .ok_or_else(|| parse_err(path, n, format!("expected entry line, got {line:?}")))?;
        let fields: Vec<&str> = rest.split(" | ").collect();
        if fields.len() != 5 {
            return Err(parse_err(
                path,
                n,
                "expected: entry <index> | <line> | <revision> | <proposal> | <timestamp>"
                    .to_string(),
            ));
        }
        let index: u64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, n, format!("invalid entry index {:?}", fields[0])))?;
        let line_id = LineId::parse(fields[1].trim())
            .map_err(|_| parse_err(path, n, format!("invalid line {:?}", fields[1].trim())))?;
        let revision: u64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, n, format!("invalid revision {:?}", fields[2])))?;
        let proposal_id = fields[3].trim().to_string();
        let at = Timestamp::parse(fields[4].trim())
            .map_err(|e| parse_err(path, n, e.to_string()))?;

        let mut author = None;
        let mut rationale = None;
        let mut severity = None;
        let mut changeset_digest = None;
        let mut snapshot = None;
        let mut records = Vec::new();
        let mut deltas = Vec::new();
        let mut prev = None;
        let mut digest = None;
        while let Some((fnum, fline)) = lines.next_content() {
            if let Some(rest) = fline.strip_prefix("author ") {
                author = Some(
                    crate::text::unescape_field(rest)
                        .map_err(|m| parse_err(path, fnum, m))?,
                );
            } else if let Some(rest) = fline.strip_prefix("rationale ") {
                rationale = Some(
                    crate::text::unescape_field(rest)
                        .map_err(|m| parse_err(path, fnum, m))?,
                );
            } else if let Some(rest) = fline.strip_prefix("severity ") {
                severity = Some(Severity::parse(rest.trim()).ok_or_else(|| {
                    parse_err(path, fnum, format!("unknown severity {:?}", rest.trim()))
                })?);
            } else if let Some(rest) = fline.strip_prefix("changeset ") {
                changeset_digest = Some(parse_digest(path, fnum, rest)?);
            } else if let Some(rest) = fline.strip_prefix("snapshot ") {
                snapshot = Some(parse_digest(path, fnum, rest)?);
            } else if fline.starts_with("record ") {
                records.push(
                    ReviewRecord::parse(fnum, fline)
                        .map_err(|e| StoreError::Parse { path: path.to_path_buf(), source: e })?,
                );
            } else if let Some(rest) = fline.strip_prefix("delta ") {
                deltas.push(
                    crate::text::unescape_field(rest)
                        .map_err(|m| parse_err(path, fnum, m))?,
                );
            } else if let Some(rest) = fline.strip_prefix("prev ") {
                prev = Some(parse_digest(path, fnum, rest)?);
            } else if let Some(rest) = fline.strip_prefix("digest ") {
                digest = Some(parse_digest(path, fnum, rest)?);
                break;
            } else {
                return Err(parse_err(path, fnum, format!("unexpected line {fline:?}")));
            }
        }
        let missing = |what: &str| parse_err(path, lines.last_line(), format!("entry {index}: missing {what} line"));
        let entry = ChangelogEntry {
            index,
            line: line_id,
            revision,
            proposal_id,
            author: author.ok_or_else(|| missing("author"))?,
            rationale: rationale.ok_or_else(|| missing("rationale"))?,
            severity: severity.ok_or_else(|| missing("severity"))?,
            changeset_digest: changeset_digest.ok_or_else(|| missing("changeset"))?,
            snapshot_digest: snapshot.ok_or_else(|| missing("snapshot"))?,
            at,
            records,
            deltas,
            prev_digest: prev.ok_or_else(|| missing("prev"))?,
            digest: digest.ok_or_else(|| missing("digest"))?,
        };
        entries.push(entry);
    }
    Ok(entries)
}

// --------------------------------------------------------------- helpers --

fn parse_err(path: &Path, line: usize, message: String) -> StoreError {
    StoreError::Parse { path: path.to_path_buf(), source: ParseError { line, message } }
}

fn parse_digest(path: &Path, line: usize, s: &str) -> Result<String, StoreError> {
    let s = s.trim();
    let valid = s.len() == 16 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
    if valid || s == NO_DIGEST {
        Ok(s.to_string())
    } else {
        Err(parse_err(path, line, format!("invalid digest {s:?}")))
    }
}

/// Line cursor over a file: tracks 1-based numbers, skips blanks, tolerates
/// CRLF.
struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    peeked: Option<(usize, &'a str)>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { iter: text.lines().enumerate(), peeked: None, last: 0 }
    }

    /// Next non-blank line, with its 1-based number.
    fn next_content(&mut self) -> Option<(usize, &'a str)> {
        if let Some(hit) = self.peeked.take() {
            self.last = hit.0;
            return Some(hit);
        }
        for (i, raw) in self.iter.by_ref() {
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            self.last = i + 1;
            if !line.trim().is_empty() {
                return Some((i + 1, line));
            }
        }
        None
    }

    /// Peek the next non-blank line without consuming it.
    fn peek_content(&mut self) -> Option<(usize, &'a str)> {
        if self.peeked.is_none() {
            self.peeked = self.next_content();
        }
        self.peeked
    }

    /// Collect raw lines (blanks included) until the sentinel line; returns
    /// the collected text and the 1-based number of its first line.
    fn take_until(&mut self, path: &Path, sentinel: &str) -> Result<(String, usize), StoreError> {
        let start = self.last + 1;
        let mut body = String::new();
        for (i, raw) in self.iter.by_ref() {
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            self.last = i + 1;
            if line == sentinel {
                return Ok((body, start));
            }
            body.push_str(line);
            body.push('\n');
        }
        Err(parse_err(path, self.last, format!("missing {sentinel} line")))
    }

    fn expect_header(&mut self, path: &Path, header: &str) -> Result<(), StoreError> {
        match self.next_content() {
            Some((_, line)) if line == header => Ok(()),
            Some((n, line)) => {
                Err(parse_err(path, n, format!("expected {header:?} header, got {line:?}")))
            }
            None => Err(parse_err(path, 1, format!("expected {header:?} header"))),
        }
    }

    fn last_line(&self) -> usize {
        self.last
    }
}
