//! Everything needed to rerun an experiment: component seeds, version
//! control state, the code snapshot taken when the working copy is dirty,
//! and the rerun script.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use globset::{Glob, GlobSet, GlobSetBuilder};
use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};
use walkdir::WalkDir;

use crate::canonical;
use crate::error::{Error, Result};
use crate::integrity::{self, DatasetFootprint, FOOTPRINT_FILE};

/// Byte separating the master seed from the label in the seed derivation message.
const SEED_SEPARATOR: u8 = 0x1F;

/// Name of the directory, inside a run, holding the code snapshot.
pub const SNAPSHOT_DIR: &str = "code_snapshot";
/// Program name emitted in rerun scripts.
pub const TOOL_NAME: &str = "repro";

/// Derives an independent seed for one consumer of randomness.
///
/// The result is the first eight bytes of
/// `SHA-1(le_u64(master) || 0x1F || utf8(label))` read as a little-endian u64.
pub fn derive_component_seed(master: u64, label: &str) -> Result<u64> {
    if label.is_empty() {
        return Err(Error::InvalidLabel);
    }
    let mut hasher = Sha1::new();
    hasher.update(master.to_le_bytes());
    hasher.update([SEED_SEPARATOR]);
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    Ok(u64::from_le_bytes(head))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VcsState {
    pub commit_id: Option<String>,
    pub dirty: bool,
    pub untracked_count: u64,
}

impl VcsState {
    /// State reported for anything that is not a usable repository.
    pub fn not_a_repository() -> Self {
        Self {
            commit_id: None,
            dirty: true,
            untracked_count: 0,
        }
    }
}

fn git(repo_root: &Path, args: &[&str]) -> Result<Option<String>> {
    let output = Command::new("git")
        .arg("-C")
        .arg(repo_root)
        .args(args)
        .output()
        .map_err(|e| Error::VcsUnavailable(format!("cannot run git: {e}")))?;
    if !output.status.success() {
        return Ok(None);
    }
    Ok(Some(String::from_utf8_lossy(&output.stdout).into_owned()))
}

/// Top-level directory of the git work tree containing `dir`, if any.
pub fn repository_root(dir: &Path) -> Result<Option<PathBuf>> {
    Ok(git(dir, &["rev-parse", "--show-toplevel"])?.map(|s| PathBuf::from(s.trim())))
}

pub fn check_vcs_state(repo_root: &Path) -> Result<VcsState> {
    let inside = git(repo_root, &["rev-parse", "--is-inside-work-tree"])?;
    if inside.as_deref().map(str::trim) != Some("true") {
        return Ok(VcsState::not_a_repository());
    }
    // A repository without any commit has nothing to reproduce from.
    let Some(head) = git(repo_root, &["rev-parse", "--verify", "--quiet", "HEAD"])? else {
        return Ok(VcsState::not_a_repository());
    };
    let status = git(repo_root, &["status", "--porcelain", "--untracked-files=all"])?.unwrap_or_default();
    let mut dirty = false;
    let mut untracked = 0;
    for line in status.lines().filter(|l| !l.is_empty()) {
        if line.starts_with("??") {
            untracked += 1;
        } else {
            dirty = true;
        }
    }
    Ok(VcsState {
        commit_id: Some(head.trim().to_owned()),
        dirty,
        untracked_count: untracked,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Strict,
    #[default]
    Snapshot,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Proceed,
    ProceedWithSnapshot,
    Refuse,
}

pub fn enforce_policy(state: &VcsState, policy: Policy) -> Decision {
    match (policy, state.dirty) {
        (Policy::Strict, true) => Decision::Refuse,
        (Policy::Snapshot, true) => Decision::ProceedWithSnapshot,
        _ => Decision::Proceed,
    }
}

fn build_globset(globs: &[String]) -> Result<GlobSet> {
    let mut builder = GlobSetBuilder::new();
    for g in globs {
        let glob = Glob::new(g).map_err(|e| Error::Spec(format!("bad exclude glob {g:?}: {e}")))?;
        builder.add(glob);
    }
    builder
        .build()
        .map_err(|e| Error::Spec(format!("bad exclude globs: {e}")))
}

const VCS_DIRS: &[&str] = &[".git", ".hg", ".svn"];

/// Copies `src_root` into `run_dir/code_snapshot/` and returns the snapshot
/// path with its footprint, which is also stored as the snapshot's
/// `footprint.json`.
///
/// Version-control metadata directories, `run_dir` itself and anything
/// matching `exclude_globs` (matched against the forward-slash relative
/// path, or any of its parent directories) are left out. A root-level
/// `footprint.json` in the source is skipped since that name is taken by
/// the snapshot's own footprint.
pub fn snapshot_code(
    src_root: &Path,
    run_dir: &Path,
    exclude_globs: &[String],
) -> Result<(PathBuf, DatasetFootprint)> {
    let excludes = build_globset(exclude_globs)?;
    let dest = run_dir.join(SNAPSHOT_DIR);
    fs::create_dir_all(&dest).map_err(|e| Error::io(&dest, e))?;
    let run_dir_abs = fs::canonicalize(run_dir).map_err(|e| Error::io(run_dir, e))?;
    let src_abs = fs::canonicalize(src_root).map_err(|e| Error::io(src_root, e))?;

    let walker = WalkDir::new(&src_abs)
        .follow_links(false)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|entry| {
            if entry.depth() == 0 {
                return true;
            }
            if entry.file_type().is_dir()
                && (VCS_DIRS.iter().any(|d| entry.file_name() == *d) || entry.path() == run_dir_abs)
            {
                return false;
            }
            let rel = entry.path().strip_prefix(&src_abs).expect("child of root");
            !excludes.is_match(integrity::relative_string(rel))
        });

    let mut files = Vec::new();
    for entry in walker {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(src_root).to_path_buf();
            Error::io(path, e.into_io_error().unwrap_or_else(|| std::io::Error::other("walk")))
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(&src_abs).expect("child of root").to_path_buf();
        if entry.depth() == 1 && rel == Path::new(FOOTPRINT_FILE) {
            continue;
        }
        files.push((entry.path().to_path_buf(), rel));
    }

    files.par_iter().try_for_each(|(from, rel)| -> Result<()> {
        let to = dest.join(rel);
        if let Some(parent) = to.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::copy(from, &to).map_err(|e| Error::io(from, e))?;
        Ok(())
    })?;

    let footprint = integrity::build_footprint(&dest)?;
    integrity::write_footprint(&footprint, &dest.join(FOOTPRINT_FILE))?;
    Ok((dest, footprint))
}

/// Scalar value of one experiment parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl std::fmt::Display for ParamValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => f.write_str(ryu::Buffer::new().format(*x)),
            ParamValue::Str(s) => f.write_str(s),
        }
    }
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(i) => Some(*i as f64),
            ParamValue::Float(x) => Some(*x),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FootprintRef {
    pub path: String,
    pub sha1: String,
}

impl FootprintRef {
    /// Reference to a footprint file on disk, pinned by the SHA-1 of its bytes.
    pub fn of_file(path: &Path) -> Result<Self> {
        Ok(Self {
            path: path.to_string_lossy().into_owned(),
            sha1: integrity::sha1_file(path)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub experiment_name: String,
    pub master_seed: u64,
    pub parameters: IndexMap<String, ParamValue>,
    pub command_line: Vec<String>,
    pub vcs: VcsState,
    pub code_snapshot: Option<String>,
    pub dataset_footprint: Option<FootprintRef>,
    pub environment: BTreeMap<String, String>,
    pub started_at: u64,
}

impl ExperimentManifest {
    pub fn to_json(&self) -> String {
        canonical::to_string(self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        canonical::read(path)
    }
}

/// OS name and toolkit version recorded in every manifest.
pub fn capture_environment() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("os".to_owned(), std::env::consts::OS.to_owned()),
        ("toolkit_version".to_owned(), env!("CARGO_PKG_VERSION").to_owned()),
    ])
}

/// Quotes a token for a POSIX shell: wrapped in single quotes, each
/// embedded `'` written as `'\''`.
pub fn shell_quote(token: &str) -> String {
    format!("'{}'", token.replace('\'', r"'\''"))
}

pub fn compose_rerun_script(m: &ExperimentManifest) -> String {
    let commit = m.vcs.commit_id.as_deref().unwrap_or("none");
    let mut script = String::from("#!/bin/sh\n");
    script.push_str(&format!("# commit: {commit}\n"));
    if m.vcs.dirty {
        script.push_str("# working copy was dirty at launch; see code_snapshot/\n");
    }
    script.push_str(&format!("# experiment: {} seed: {}\n", m.experiment_name, m.master_seed));
    script.push_str("set -e\n");
    script.push_str(TOOL_NAME);
    for token in &m.command_line {
        script.push(' ');
        script.push_str(&shell_quote(token));
    }
    script.push('\n');
    script
}
