//! Scripted end-to-end scenarios.
//!
//! A scenario file drives the CLI against a throwaway repository. Each
//! non-comment line is either a command line (optionally prefixed `ocg`) or
//! an expectation attached to the most recent command:
//!
//! ```text
//! # comments and blank lines are ignored
//! init energy-seed.ocg --now 2026-03-01T09:00:00Z
//! propose trunk scaffolding.cs --id P1 --now 2026-03-01T09:05:00Z
//! merge P1 --now 2026-03-01T09:06:00Z
//! expect exit 3
//! expect contains "QuorumNotMet"
//! ```
//!
//! `expect exit N` asserts the exit code; `expect contains TEXT` asserts that
//! the combined stdout+stderr of the step contains TEXT (surrounding double
//! quotes are stripped). A step with no explicit `expect exit` must exit 0.
//!
//! The runner copies every regular file sitting next to the script into a
//! fresh temporary directory, appends `--repo <tmp>/repo` to steps that do
//! not pass `--repo` themselves, and runs every step in-process — a failing
//! expectation marks the step failed and the run continues, so later steps
//! observe the state the earlier ones actually produced. The report echoes
//! each step's output and verdict; given the same script and sibling files it
//! is byte-identical across runs.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::{dispatch, CliError};

enum Expect {
    Exit(i32),
    Contains(String),
}

struct Step {
    line_no: usize,
    /// Argv as written in the script, without the program name.
    args: Vec<String>,
    expects: Vec<Expect>,
}

/// Execute the script, writing the report to `out`. Returns whether every
/// step passed. Script-level problems (unreadable file, bad grammar) are
/// errors; step-level failures are part of the report.
pub(crate) fn run(script: &Path, cwd: &Path, out: &mut dyn Write) -> Result<bool, CliError> {
    let script_abs = cwd.join(script);
    let text = fs::read_to_string(&script_abs)
        .map_err(|e| CliError::Fatal(format!("{}: {e}", script.display())))?;
    let steps = parse_script(script, &text)?;

    let tmp = tempfile::tempdir()
        .map_err(|e| CliError::Fatal(format!("create scenario workspace: {e}")))?;
    let workdir = tmp.path();
    copy_siblings(&script_abs, workdir)?;
    let repo_dir = workdir.join("repo");
    let repo_arg = repo_dir.to_string_lossy().into_owned();

    let total = steps.len();
    let mut failed = 0usize;
    for (i, step) in steps.iter().enumerate() {
        let n = i + 1;
        let _ = writeln!(out, "$ ocg {}", step.args.join(" "));
        let mut argv: Vec<String> = Vec::with_capacity(step.args.len() + 3);
        argv.push("ocg".to_string());
        argv.extend(step.args.iter().cloned());
        if !step.args.iter().any(|a| a == "--repo") {
            argv.push("--repo".to_string());
            argv.push(repo_arg.clone());
        }
        let mut captured_out: Vec<u8> = Vec::new();
        let mut captured_err: Vec<u8> = Vec::new();
        let code = dispatch(&argv, workdir, &mut captured_out, &mut captured_err);
        let _ = out.write_all(&captured_out);
        let _ = out.write_all(&captured_err);

        let combined = {
            let mut all = String::from_utf8_lossy(&captured_out).into_owned();
            all.push_str(&String::from_utf8_lossy(&captured_err));
            all
        };
        let mut problems: Vec<String> = Vec::new();
        let mut exit_checked = false;
        for expect in &step.expects {
            match expect {
                Expect::Exit(want) => {
                    exit_checked = true;
                    if code != *want {
                        problems.push(format!("expected exit {want}, got {code}"));
                    }
                }
                Expect::Contains(needle) => {
                    if !combined.contains(needle) {
                        problems.push(format!("missing in output: {needle:?}"));
                    }
                }
            }
        }
        if !exit_checked && code != 0 {
            problems.push(format!("expected exit 0, got {code}"));
        }
        if problems.is_empty() {
            let _ = writeln!(out, "step {n}: ok (exit {code})");
        } else {
            failed += 1;
            for p in &problems {
                let _ = writeln!(out, "step {n} (script line {}): FAIL {p}", step.line_no);
            }
        }
        let _ = writeln!(out);
    }
    if failed == 0 {
        let _ = writeln!(out, "scenario passed: {total} of {total} step(s)");
    } else {
        let _ = writeln!(out, "scenario failed: {failed} of {total} step(s) failed");
    }
    Ok(failed == 0)
}

fn parse_script(script: &Path, text: &str) -> Result<Vec<Step>, CliError> {
    let err = |line_no: usize, msg: String| {
        CliError::Fatal(format!("{}:{line_no}: {msg}", script.display()))
    };
    let mut steps: Vec<Step> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("expect ") {
            let step = steps
                .last_mut()
                .ok_or_else(|| err(line_no, "expect before any command line".to_string()))?;
            let rest = rest.trim();
            if let Some(code) = rest.strip_prefix("exit ") {
                let code: i32 = code
                    .trim()
                    .parse()
                    .map_err(|_| err(line_no, format!("bad exit code {:?}", code.trim())))?;
                step.expects.push(Expect::Exit(code));
            } else if let Some(needle) = rest.strip_prefix("contains ") {
                let needle = needle.trim();
                let needle = needle
                    .strip_prefix('"')
                    .and_then(|s| s.strip_suffix('"'))
                    .unwrap_or(needle);
                if needle.is_empty() {
                    return Err(err(line_no, "empty contains expectation".to_string()));
                }
                step.expects.push(Expect::Contains(needle.to_string()));
            } else {
                return Err(err(line_no, format!("unknown expectation {rest:?}")));
            }
            continue;
        }
        let mut args = tokenize(line).map_err(|m| err(line_no, m))?;
        if args.first().map(String::as_str) == Some("ocg") {
            args.remove(0);
        }
        if args.is_empty() {
            return Err(err(line_no, "empty command line".to_string()));
        }
        steps.push(Step { line_no, args, expects: Vec::new() });
    }
    Ok(steps)
}

/// Split a command line on whitespace, honouring double quotes.
fn tokenize(line: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut quoted = false;
    let mut started = false;
    for c in line.chars() {
        match c {
            '"' => {
                quoted = !quoted;
                started = true;
            }
            c if c.is_whitespace() && !quoted => {
                if started {
                    out.push(std::mem::take(&mut current));
                    started = false;
                }
            }
            c => {
                current.push(c);
                started = true;
            }
        }
    }
    if quoted {
        return Err("unbalanced double quote".to_string());
    }
    if started {
        out.push(current);
    }
    Ok(out)
}

/// Copy every regular file next to the script into the scenario workspace,
/// so scripts can name seeds, changesets, and traces by bare filename.
fn copy_siblings(script_abs: &Path, workdir: &Path) -> Result<(), CliError> {
    let dir = script_abs.parent().unwrap_or(Path::new("."));
    let entries = fs::read_dir(dir)
        .map_err(|e| CliError::Fatal(format!("{}: {e}", dir.display())))?;
    for entry in entries {
        let entry = entry.map_err(|e| CliError::Fatal(format!("{}: {e}", dir.display())))?;
        let path = entry.path();
        let is_file = entry.file_type().map(|t| t.is_file()).unwrap_or(false);
        if !is_file {
            continue;
        }
        let name = match path.file_name() {
            Some(n) => n.to_owned(),
            None => continue,
        };
        fs::copy(&path, workdir.join(&name))
            .map_err(|e| CliError::Fatal(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}
