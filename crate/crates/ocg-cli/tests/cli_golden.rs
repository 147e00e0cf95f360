//! Golden tests for the CLI surface: exact outputs, exit codes, and the
//! file-format edges a user can hit from the command line.

use std::fs;
use std::path::{Path, PathBuf};

use ocg_cli::{dispatch, EXIT_CHECK, EXIT_FATAL, EXIT_GOVERNANCE, EXIT_OK};
use ocg_core::{
    canonical_parse, snapshot_digest, ChangeSet, ChangelogEntry, CognitiveGraph, LineId, Revision,
    Severity, Timestamp, NO_DIGEST,
};

fn asset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets").join(name)
}

/// Run the CLI in-process. Returns (exit code, stdout, stderr).
fn run(cwd: &Path, args: &[&str]) -> (i32, String, String) {
    let mut argv: Vec<String> = vec!["ocg".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let mut out: Vec<u8> = Vec::new();
    let mut err: Vec<u8> = Vec::new();
    let code = dispatch(&argv, cwd, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// Initialize a repository under `<tmp>/r` from a bundled seed.
fn init_repo(tmp: &Path, seed: &str) -> String {
    let seed_path = asset(seed);
    let (code, out, err) = run(
        tmp,
        &["init", seed_path.to_str().unwrap(), "--repo", "r", "--now", "2026-03-01T09:00:00Z"],
    );
    assert_eq!(code, EXIT_OK, "init failed: {err}");
    out
}

/// Drive `scaffolding.cs` through proposal, quorum, and merge on the trunk.
fn merge_scaffolding(tmp: &Path, id: &str) {
    let cs = asset("scaffolding.cs");
    let (code, _, err) = run(
        tmp,
        &["propose", "trunk", cs.to_str().unwrap(), "--id", id, "--repo", "r", "--now", "2026-03-02T09:00:00Z"],
    );
    assert_eq!(code, EXIT_OK, "propose failed: {err}");
    for actor in ["prof-okafor", "prof-lind"] {
        let (code, _, err) = run(
            tmp,
            &["review", id, "--role", "academic_committee", "--actor", actor, "--verdict", "pass",
              "--repo", "r", "--now", "2026-03-02T10:00:00Z"],
        );
        assert_eq!(code, EXIT_OK, "review failed: {err}");
    }
    let (code, _, err) =
        run(tmp, &["merge", id, "--repo", "r", "--now", "2026-03-02T11:00:00Z"]);
    assert_eq!(code, EXIT_OK, "merge failed: {err}");
}

#[test]
fn help_exits_zero_and_bad_usage_exits_four() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, out, _) = run(tmp.path(), &["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("Usage"));

    let (code, _, err) = run(tmp.path(), &["no-such-command"]);
    assert_eq!(code, EXIT_FATAL);
    assert!(!err.is_empty());

    let (code, _, err) = run(tmp.path(), &["check", "--now", "yesterday"]);
    assert_eq!(code, EXIT_FATAL);
    assert!(err.contains("--now"));
}

#[test]
fn init_reports_revision_zero_and_refuses_reinit() {
    let tmp = tempfile::tempdir().unwrap();
    let out = init_repo(tmp.path(), "energy-seed.ocg");
    assert!(out.contains("initialized repository (trunk revision 0, snapshot "), "got: {out}");

    let seed = asset("energy-seed.ocg");
    let (code, _, err) =
        run(tmp.path(), &["init", seed.to_str().unwrap(), "--repo", "r"]);
    assert_eq!(code, EXIT_FATAL);
    assert!(err.contains("already exists"));
}

#[test]
fn init_distinguishes_unreadable_malformed_and_invalid_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, err) = run(tmp.path(), &["init", "missing.ocg", "--repo", "r"]);
    assert_eq!(code, EXIT_FATAL);
    assert!(err.contains("missing.ocg"));

    fs::write(tmp.path().join("garbage.ocg"), "not a graph\n").unwrap();
    let (code, _, err) = run(tmp.path(), &["init", "garbage.ocg", "--repo", "r"]);
    assert_eq!(code, EXIT_FATAL);
    assert!(err.contains("garbage.ocg:1:"), "got: {err}");

    // Parses fine, but the seed graph itself contains an ordering cycle.
    let cyclic = "OCG 1\ncounts 1 0 2 2\ndomain P\n\
        node concept a@P |  | x |  | 2026-01-01T00:00:00Z\n\
        node concept b@P |  | x |  | 2026-01-01T00:00:00Z\n\
        edge prerequisite_of@P a@P b@P | x |  | 2026-01-01T00:00:00Z\n\
        edge prerequisite_of@P b@P a@P | x |  | 2026-01-01T00:00:00Z\n";
    fs::write(tmp.path().join("cyclic.ocg"), cyclic).unwrap();
    let (code, _, err) = run(
        tmp.path(),
        &["init", "cyclic.ocg", "--repo", "r", "--now", "2026-03-01T09:00:00Z"],
    );
    assert_eq!(code, EXIT_CHECK);
    assert!(err.contains("OrderingCycle"), "got: {err}");
    assert!(err.contains("SeedInvalid"), "got: {err}");
    assert!(!tmp.path().join("r").join("config").exists(), "failed init must not leave a repo");
}

#[test]
fn cdc_check_validates_the_worked_trace_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    init_repo(tmp.path(), "cdc-seed.ocg");
    let trace = asset("pythagoras.cdc");
    let (code, out, err) =
        run(tmp.path(), &["cdc", "check", trace.to_str().unwrap(), "--repo", "r"]);
    assert_eq!(code, EXIT_OK, "stderr: {err}");
    assert_eq!(
        out,
        "given: right triangle, a=3, b=4\n\
         step 1: Apply@Geometry [Pythagorean Theorem] -> c^2 = a^2 + b^2 Substitute values\n\
         step 2: Compute@Algebra -> c^2 = 3^2 + 4^2 = 9 + 16 = 25 Take square root\n\
         step 3: Compute@Algebra -> c = 5\n\
         0 violations\n"
    );
}

#[test]
fn cdc_check_enforces_mastery_when_given() {
    let tmp = tempfile::tempdir().unwrap();
    init_repo(tmp.path(), "cdc-seed.ocg");
    let trace = asset("pythagoras.cdc");
    let (code, _, err) = run(
        tmp.path(),
        &["cdc", "check", trace.to_str().unwrap(), "--repo", "r", "--mastered", "right_triangle@Geometry"],
    );
    assert_eq!(code, EXIT_CHECK);
    assert!(err.contains("UnsatisfiedPrerequisite"));
    assert!(err.contains("squaring@Geometry"));
    assert!(err.trim_end().ends_with("1 violation"), "got: {err}");

    let (code, out, _) = run(
        tmp.path(),
        &["cdc", "check", trace.to_str().unwrap(), "--repo", "r",
          "--mastered", "right_triangle@Geometry,squaring@Geometry"],
    );
    assert_eq!(code, EXIT_OK);
    assert!(out.ends_with("0 violations\n"));
}

#[test]
fn cdc_check_distinguishes_parse_failures_from_broken_chains() {
    let tmp = tempfile::tempdir().unwrap();
    init_repo(tmp.path(), "cdc-seed.ocg");

    fs::write(tmp.path().join("no-arrows.cdc"), "Given: x\nFinal answer: x\n").unwrap();
    let (code, _, err) = run(tmp.path(), &["cdc", "check", "no-arrows.cdc", "--repo", "r"]);
    assert_eq!(code, EXIT_FATAL);
    assert!(err.contains("no-arrows.cdc"), "got: {err}");

    let broken = "Given: x\n--{Compute@Algebra}--> y\nz --{Compute@Algebra}--> w\n";
    fs::write(tmp.path().join("broken.cdc"), broken).unwrap();
    let (code, _, err) = run(tmp.path(), &["cdc", "check", "broken.cdc", "--repo", "r"]);
    assert_eq!(code, EXIT_CHECK);
    assert!(err.contains("BrokenChain"), "got: {err}");
}

#[test]
fn cdc_next_lists_sorted_labels_and_rejects_unknown_domains() {
    let tmp = tempfile::tempdir().unwrap();
    init_repo(tmp.path(), "cdc-seed.ocg");
    let (code, out, _) = run(tmp.path(), &["cdc", "next", "--domain", "Geometry", "--repo", "r"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, "Apply@Geometry [Pythagorean Theorem]\nCompute@Algebra\nCompute@Geometry\n");

    // Algebra has no rules and no outgoing transition.
    let (code, out, _) = run(tmp.path(), &["cdc", "next", "--domain", "Algebra", "--repo", "r"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, "Compute@Algebra\n");

    let (code, _, err) = run(tmp.path(), &["cdc", "next", "--domain", "Biology", "--repo", "r"]);
    assert_eq!(code, EXIT_CHECK);
    assert!(err.contains("UnknownDomain"));
}

#[test]
fn merge_without_quorum_is_a_governance_failure() {
    let tmp = tempfile::tempdir().unwrap();
    init_repo(tmp.path(), "energy-seed.ocg");
    let cs = asset("scaffolding.cs");
    let (code, out, _) = run(
        tmp.path(),
        &["propose", "trunk", cs.to_str().unwrap(), "--id", "P1", "--repo", "r", "--now", "2026-03-02T09:00:00Z"],
    );
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("checks passed"));

    let (code, _, err) = run(tmp.path(), &["merge", "P1", "--repo", "r", "--now", "2026-03-02T09:01:00Z"]);
    assert_eq!(code, EXIT_GOVERNANCE);
    assert!(err.contains("QuorumNotMet"), "got: {err}");

    // The same committee member approving twice does not reach quorum.
    for _ in 0..2 {
        let (code, _, _) = run(
            tmp.path(),
            &["review", "P1", "--role", "academic_committee", "--actor", "prof-okafor",
              "--verdict", "pass", "--repo", "r", "--now", "2026-03-02T10:00:00Z"],
        );
        assert_eq!(code, EXIT_OK);
    }
    let (code, _, err) = run(tmp.path(), &["merge", "P1", "--repo", "r", "--now", "2026-03-02T10:30:00Z"]);
    assert_eq!(code, EXIT_GOVERNANCE);
    assert!(err.contains("QuorumNotMet"), "got: {err}");

    let (code, _, _) = run(
        tmp.path(),
        &["review", "P1", "--role", "academic_committee", "--actor", "prof-lind",
          "--verdict", "pass", "--repo", "r", "--now", "2026-03-02T11:00:00Z"],
    );
    assert_eq!(code, EXIT_OK);
    let (code, out, err) = run(tmp.path(), &["merge", "P1", "--repo", "r", "--now", "2026-03-02T11:05:00Z"]);
    assert_eq!(code, EXIT_OK, "stderr: {err}");
    assert!(out.contains("merged proposal P1 as trunk revision 1 (snapshot "), "got: {out}");
}

#[test]
fn review_errors_map_to_usage_and_governance_codes() {
    let tmp = tempfile::tempdir().unwrap();
    init_repo(tmp.path(), "energy-seed.ocg");

    let (code, _, err) = run(
        tmp.path(),
        &["review", "P1", "--role", "grand-vizier", "--actor", "x", "--verdict", "pass", "--repo", "r"],
    );
    assert_eq!(code, EXIT_FATAL);
    assert!(err.contains("unknown role"));

    let (code, _, err) = run(
        tmp.path(),
        &["review", "P9", "--role", "researcher", "--actor", "x", "--verdict", "pass", "--repo", "r"],
    );
    assert_eq!(code, EXIT_GOVERNANCE);
    assert!(err.contains("UnknownProposal"));

    // Engine records are reserved for the engine itself.
    let cs = asset("scaffolding.cs");
    run(
        tmp.path(),
        &["propose", "trunk", cs.to_str().unwrap(), "--id", "P1", "--repo", "r", "--now", "2026-03-02T09:00:00Z"],
    );
    let (code, _, err) = run(
        tmp.path(),
        &["review", "P1", "--role", "engine", "--actor", "engine", "--verdict", "pass", "--repo", "r"],
    );
    assert_eq!(code, EXIT_GOVERNANCE);
    assert!(err.contains("IllegalTransition"), "got: {err}");
}

#[test]
fn propose_rejects_malformed_changeset_files() {
    let tmp = tempfile::tempdir().unwrap();
    init_repo(tmp.path(), "energy-seed.ocg");
    fs::write(tmp.path().join("bad.cs"), "this is not a changeset\n").unwrap();
    let (code, _, err) =
        run(tmp.path(), &["propose", "trunk", "bad.cs", "--id", "P1", "--repo", "r"]);
    assert_eq!(code, EXIT_FATAL);
    assert!(err.contains("bad.cs:1:"), "got: {err}");
}

#[test]
fn branch_create_pins_bases_and_validates_names() {
    let tmp = tempfile::tempdir().unwrap();
    init_repo(tmp.path(), "energy-seed.ocg");
    merge_scaffolding(tmp.path(), "P1");

    let (code, out, _) = run(tmp.path(), &["branch", "create", "pilot", "--repo", "r"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("created branch pilot at trunk revision 1"), "got: {out}");

    let (code, out, _) = run(tmp.path(), &["branch", "create", "older", "--at", "0", "--repo", "r"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("created branch older at trunk revision 0"), "got: {out}");

    let (code, _, err) = run(tmp.path(), &["branch", "create", "future", "--at", "7", "--repo", "r"]);
    assert_eq!(code, EXIT_GOVERNANCE);
    assert!(err.contains("UnknownRevision"));

    let (code, _, err) = run(tmp.path(), &["branch", "create", "trunk", "--repo", "r"]);
    assert_eq!(code, EXIT_GOVERNANCE);
    assert!(err.contains("ReservedBranchName"));
}

#[test]
fn export_reproduces_canonical_seed_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    init_repo(tmp.path(), "energy-seed.ocg");
    let (code, out, _) = run(tmp.path(), &["export", "trunk", "0", "--repo", "r"]);
    assert_eq!(code, EXIT_OK);
    let seed_bytes = fs::read_to_string(asset("energy-seed.ocg")).unwrap();
    assert_eq!(out, seed_bytes, "bundled seed must be in canonical form");

    let (code, _, err) = run(tmp.path(), &["export", "trunk", "3", "--repo", "r"]);
    assert_eq!(code, EXIT_GOVERNANCE);
    assert!(err.contains("UnknownRevision"));
}

#[test]
fn rollback_restores_the_seed_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    init_repo(tmp.path(), "energy-seed.ocg");
    merge_scaffolding(tmp.path(), "P1");

    let (code, out, err) =
        run(tmp.path(), &["rollback", "trunk", "0", "--repo", "r", "--now", "2026-03-03T09:00:00Z"]);
    assert_eq!(code, EXIT_OK, "stderr: {err}");
    assert!(out.contains("rolled back trunk to revision 0: new revision 2"), "got: {out}");

    let (_, head, _) = run(tmp.path(), &["export", "trunk", "2", "--repo", "r"]);
    let seed_bytes = fs::read_to_string(asset("energy-seed.ocg")).unwrap();
    assert_eq!(head, seed_bytes);

    let (_, log, _) = run(tmp.path(), &["log", "trunk", "--repo", "r"]);
    assert!(log.contains("rollback:0"), "got: {log}");
}

#[test]
fn paths_reports_absence_and_unknown_nodes() {
    let tmp = tempfile::tempdir().unwrap();
    init_repo(tmp.path(), "cdc-seed.ocg");
    let (code, out, _) = run(
        tmp.path(),
        &["paths", "squaring@Geometry", "right_triangle@Geometry", "--repo", "r"],
    );
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("no paths"), "got: {out}");

    let (code, _, err) =
        run(tmp.path(), &["paths", "ghost@Geometry", "squaring@Geometry", "--repo", "r"]);
    assert_eq!(code, EXIT_CHECK);
    assert!(err.contains("not found"));
}

#[test]
fn lock_file_blocks_mutating_commands_only() {
    let tmp = tempfile::tempdir().unwrap();
    init_repo(tmp.path(), "energy-seed.ocg");
    fs::write(tmp.path().join("r").join(".ocg-lock"), "").unwrap();

    let cs = asset("scaffolding.cs");
    let (code, _, err) = run(
        tmp.path(),
        &["propose", "trunk", cs.to_str().unwrap(), "--id", "P1", "--repo", "r", "--now", "2026-03-02T09:00:00Z"],
    );
    assert_eq!(code, EXIT_FATAL);
    assert!(err.contains("locked"), "got: {err}");

    // Reads are not blocked by the advisory lock.
    let (code, _, _) = run(tmp.path(), &["check", "--repo", "r"]);
    assert_eq!(code, EXIT_OK);

    fs::remove_file(tmp.path().join("r").join(".ocg-lock")).unwrap();
    let (code, _, _) = run(
        tmp.path(),
        &["propose", "trunk", cs.to_str().unwrap(), "--id", "P1", "--repo", "r", "--now", "2026-03-02T09:00:00Z"],
    );
    assert_eq!(code, EXIT_OK);
    assert!(!tmp.path().join("r").join(".ocg-lock").exists(), "lock must be released");
}

#[test]
fn repo_dir_can_come_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    init_repo(tmp.path(), "energy-seed.ocg");
    std::env::set_var("OCG_REPO", tmp.path().join("r"));
    let (code, out, err) = run(tmp.path(), &["check"]);
    std::env::remove_var("OCG_REPO");
    assert_eq!(code, EXIT_OK, "stderr: {err}");
    assert!(out.contains("checks passed"));
}

/// Write a repository whose digests and chain all verify, but whose seed
/// changeset raw-applies into a cyclic graph — the kind of state only a
/// hand edit of the store files can produce. Loading succeeds; `check`
/// must still catch the cycle.
fn forge_cycle_repo(dir: &Path) {
    let text = "OCG 1\ncounts 1 0 2 2\ndomain P\n\
        node concept a@P |  | x |  | 2026-01-01T00:00:00Z\n\
        node concept b@P |  | x |  | 2026-01-01T00:00:00Z\n\
        edge prerequisite_of@P a@P b@P | x |  | 2026-01-01T00:00:00Z\n\
        edge prerequisite_of@P b@P a@P | x |  | 2026-01-01T00:00:00Z\n";
    let graph = canonical_parse(text).unwrap();
    let ops = ocg_core::change::bootstrap_ops(&graph);
    let cs = ChangeSet::new("seed", "baseline trunk import", Severity::Significant, ops).unwrap();
    let at = Timestamp::parse("2026-03-01T09:00:00Z").unwrap();
    let rev = Revision {
        number: 0,
        parent_snapshot: snapshot_digest(&CognitiveGraph::new()),
        snapshot: snapshot_digest(&graph),
        proposal_id: "seed".to_string(),
        at,
        changeset: cs.clone(),
    };
    let trunk_log = format!(
        "OCG-LOG 1\nline trunk\n\nrevision 0 | seed | {at}\nparent {}\nchangeset-begin\n{}changeset-end\nchangeset-digest {}\nsnapshot {}\n",
        rev.parent_snapshot,
        cs.canonical_text(),
        cs.digest(),
        rev.snapshot,
    );
    let mut entry = ChangelogEntry {
        index: 0,
        line: LineId::Trunk,
        revision: 0,
        proposal_id: "seed".to_string(),
        author: "seed".to_string(),
        rationale: "baseline trunk import".to_string(),
        severity: Severity::Significant,
        changeset_digest: cs.digest(),
        snapshot_digest: rev.snapshot.clone(),
        at,
        records: Vec::new(),
        deltas: Vec::new(),
        prev_digest: NO_DIGEST.to_string(),
        digest: String::new(),
    };
    entry.digest = ChangelogEntry::expected_digest(&entry.prev_digest, &entry.canonical_text());
    let changelog = format!(
        "OCG-CHANGELOG 1\n\n{}prev {}\ndigest {}\n",
        entry.canonical_text(),
        entry.prev_digest,
        entry.digest,
    );
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join("config"), "OCG-REPO 1\nquorum 2\n").unwrap();
    fs::write(dir.join("trunk.log"), trunk_log).unwrap();
    fs::write(dir.join("proposals.log"), "OCG-PROPOSALS 1\n").unwrap();
    fs::write(dir.join("changelog.log"), changelog).unwrap();
}

#[test]
fn check_catches_a_cycle_injected_by_raw_file_edit() {
    let tmp = tempfile::tempdir().unwrap();
    forge_cycle_repo(&tmp.path().join("r"));

    // The store accepts the files: every digest and the chain verify.
    let (code, out, err) = run(tmp.path(), &["log", "trunk", "--repo", "r"]);
    assert_eq!(code, EXIT_OK, "stderr: {err}");
    assert!(out.contains("entry 0 | trunk | 0 | seed"));

    // The semantic checks still reject the state.
    let (code, _, err) = run(tmp.path(), &["check", "--repo", "r"]);
    assert_eq!(code, EXIT_CHECK);
    assert!(err.contains("OrderingCycle"), "got: {err}");
    assert!(err.contains("checks failed"), "got: {err}");
}

#[test]
fn tampered_store_files_are_rejected_at_load() {
    let tmp = tempfile::tempdir().unwrap();
    init_repo(tmp.path(), "energy-seed.ocg");
    let log_path = tmp.path().join("r").join("trunk.log");
    let log = fs::read_to_string(&log_path).unwrap();
    // Rewrite the changeset body without repairing its stored digest.
    let tampered = log.replace("author seed", "author eve");
    assert_ne!(log, tampered);
    fs::write(&log_path, tampered).unwrap();
    let (code, _, err) = run(tmp.path(), &["check", "--repo", "r"]);
    assert_eq!(code, EXIT_FATAL, "stderr: {err}");
    assert!(err.contains("digest") || err.contains("corrupt"), "got: {err}");
}
