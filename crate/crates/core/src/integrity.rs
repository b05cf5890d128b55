//! Dataset footprints: a sorted record of every file under a dataset root
//! with its SHA-1 hash, plus a global last-modified tag.
//!
//! Two checks are offered against a stored footprint. [`quick_verify`] only
//! walks metadata (max mtime and file count) and is cheap enough to run at
//! the start of every experiment. [`deep_verify`] rehashes everything and
//! reports the exact set of added, removed and modified paths.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};
use walkdir::WalkDir;

use crate::canonical;
use crate::error::{Error, Result};

/// File name of the footprint stored at a dataset root. It is never part of its own hash set.
pub const FOOTPRINT_FILE: &str = "footprint.json";
pub const FORMAT_VERSION: u32 = 1;
/// Path reported for tree-level mismatches.
pub const ROOT_MARKER: &str = "<root>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    #[serde(rename = "path")]
    pub relative_path: String,
    pub sha1: String,
    #[serde(rename = "size")]
    pub size_bytes: u64,
    #[serde(rename = "mtime")]
    pub mtime_unix_seconds: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFootprint {
    pub format_version: u32,
    pub created_at: u64,
    pub last_modified: u64,
    pub file_count: u64,
    pub total_bytes: u64,
    pub entries: Vec<FileEntry>,
}

impl DatasetFootprint {
    /// Assembles a footprint from entries, sorting them and deriving the summary fields.
    pub fn from_entries(mut entries: Vec<FileEntry>, created_at: u64) -> Self {
        entries.sort_by(|a, b| a.relative_path.as_bytes().cmp(b.relative_path.as_bytes()));
        Self {
            format_version: FORMAT_VERSION,
            created_at,
            last_modified: entries.iter().map(|e| e.mtime_unix_seconds).max().unwrap_or(0),
            file_count: entries.len() as u64,
            total_bytes: entries.iter().map(|e| e.size_bytes).sum(),
            entries,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidFootprint(msg));
        if self.format_version != FORMAT_VERSION {
            return bad(format!("unsupported format_version {}", self.format_version));
        }
        for entry in &self.entries {
            if !is_valid_relative_path(&entry.relative_path) {
                return bad(format!("invalid path {:?}", entry.relative_path));
            }
            if !is_valid_sha1(&entry.sha1) {
                return bad(format!("invalid sha1 {:?} for {}", entry.sha1, entry.relative_path));
            }
        }
        for pair in self.entries.windows(2) {
            if pair[0].relative_path.as_bytes() >= pair[1].relative_path.as_bytes() {
                return bad(format!(
                    "entries not strictly sorted: {:?} before {:?}",
                    pair[0].relative_path, pair[1].relative_path
                ));
            }
        }
        let last = self.entries.iter().map(|e| e.mtime_unix_seconds).max().unwrap_or(0);
        if self.last_modified != last {
            return bad(format!("last_modified {} but newest entry is {}", self.last_modified, last));
        }
        if self.file_count != self.entries.len() as u64 {
            return bad(format!("file_count {} but {} entries", self.file_count, self.entries.len()));
        }
        let total: u64 = self.entries.iter().map(|e| e.size_bytes).sum();
        if self.total_bytes != total {
            return bad(format!("total_bytes {} but entries sum to {}", self.total_bytes, total));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        canonical::to_string(self)
    }
}

fn is_valid_sha1(s: &str) -> bool {
    s.len() == 40 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

fn is_valid_relative_path(p: &str) -> bool {
    !p.is_empty()
        && !p.starts_with('/')
        && p.split('/').all(|seg| !seg.is_empty() && seg != "." && seg != "..")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum VerifyMode {
    Quick,
    Deep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MismatchKind {
    Added,
    Removed,
    Modified,
    MtimeNewer,
    CountMismatch,
}

impl fmt::Display for MismatchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MismatchKind::Added => "ADDED",
            MismatchKind::Removed => "REMOVED",
            MismatchKind::Modified => "MODIFIED",
            MismatchKind::MtimeNewer => "MTIME_NEWER",
            MismatchKind::CountMismatch => "COUNT_MISMATCH",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub path: String,
    pub kind: MismatchKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub mode: VerifyMode,
    pub mismatches: Vec<Mismatch>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Regular files found under a root, with skipped symlinks reported separately.
#[derive(Debug, Default)]
pub struct TreeScan {
    pub files: Vec<ScannedFile>,
    pub skipped_symlinks: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ScannedFile {
    pub relative_path: String,
    pub absolute_path: PathBuf,
    pub size_bytes: u64,
    pub mtime_unix_seconds: u64,
}

fn check_root(root: &Path) -> Result<()> {
    match fs::metadata(root) {
        Ok(meta) if meta.is_dir() => Ok(()),
        Ok(_) => Err(Error::NotFound(root.to_path_buf())),
        Err(e) => Err(Error::io(root, e)),
    }
}

pub(crate) fn relative_string(rel: &Path) -> String {
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

pub(crate) fn mtime_seconds(meta: &fs::Metadata) -> u64 {
    meta.modified()
        .ok()
        .and_then(|t| t.duration_since(UNIX_EPOCH).ok())
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub(crate) fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Walks `root` without hashing. The root-level footprint file is excluded
/// and symbolic links are never followed.
pub fn scan_tree(root: &Path) -> Result<TreeScan> {
    check_root(root)?;
    let mut scan = TreeScan::default();
    for entry in WalkDir::new(root).follow_links(false).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            match e.into_io_error() {
                Some(io) => Error::io(path, io),
                None => Error::Io {
                    path,
                    source: io::Error::other("filesystem loop"),
                },
            }
        })?;
        if entry.depth() == 0 {
            continue;
        }
        let rel = entry.path().strip_prefix(root).expect("walkdir yields children of root");
        let rel = relative_string(rel);
        let file_type = entry.file_type();
        if file_type.is_symlink() {
            log::warn!("skipping symbolic link {}", entry.path().display());
            scan.skipped_symlinks.push(rel);
            continue;
        }
        if !file_type.is_file() || (entry.depth() == 1 && rel == FOOTPRINT_FILE) {
            continue;
        }
        let meta = entry.metadata().map_err(|e| {
            Error::io(entry.path(), e.into_io_error().unwrap_or_else(|| io::Error::other("metadata")))
        })?;
        scan.files.push(ScannedFile {
            relative_path: rel,
            absolute_path: entry.path().to_path_buf(),
            size_bytes: meta.len(),
            mtime_unix_seconds: mtime_seconds(&meta),
        });
    }
    Ok(scan)
}

pub fn sha1_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha1::new();
    let mut buf = vec![0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn sha1_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha1::digest(bytes))
}

fn hash_all(files: &[ScannedFile], workers: usize) -> Result<Vec<String>> {
    if workers <= 1 {
        return files.iter().map(|f| sha1_file(&f.absolute_path)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Io {
            path: PathBuf::new(),
            source: io::Error::other(e.to_string()),
        })?;
    pool.install(|| files.par_iter().map(|f| sha1_file(&f.absolute_path)).collect())
}

/// Options for [`build_footprint_with`].
#[derive(Debug, Clone, Copy, Default)]
pub struct BuildOptions {
    /// Hashing threads; 0 uses one per available core.
    pub workers: usize,
}

/// Builds the footprint of `root` together with the list of symlinks that were skipped.
pub fn build_footprint_with(root: &Path, opts: BuildOptions) -> Result<(DatasetFootprint, Vec<String>)> {
    let scan = scan_tree(root)?;
    let workers = if opts.workers == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        opts.workers
    };
    let hashes = hash_all(&scan.files, workers)?;
    let entries = scan
        .files
        .into_iter()
        .zip(hashes)
        .map(|(f, sha1)| FileEntry {
            relative_path: f.relative_path,
            sha1,
            size_bytes: f.size_bytes,
            mtime_unix_seconds: f.mtime_unix_seconds,
        })
        .collect();
    Ok((DatasetFootprint::from_entries(entries, unix_now()), scan.skipped_symlinks))
}

pub fn build_footprint(root: &Path) -> Result<DatasetFootprint> {
    build_footprint_with(root, BuildOptions::default()).map(|(fp, _)| fp)
}

pub fn quick_verify(root: &Path, fp: &DatasetFootprint) -> Result<VerificationReport> {
    let scan = scan_tree(root)?;
    let mut mismatches = Vec::new();
    if scan.files.iter().any(|f| f.mtime_unix_seconds > fp.last_modified) {
        mismatches.push(Mismatch {
            path: ROOT_MARKER.to_owned(),
            kind: MismatchKind::MtimeNewer,
        });
    }
    if scan.files.len() as u64 != fp.file_count {
        mismatches.push(Mismatch {
            path: ROOT_MARKER.to_owned(),
            kind: MismatchKind::CountMismatch,
        });
    }
    Ok(VerificationReport {
        mode: VerifyMode::Quick,
        mismatches,
    })
}

pub fn deep_verify(root: &Path, fp: &DatasetFootprint) -> Result<VerificationReport> {
    let (current, _) = build_footprint_with(root, BuildOptions::default())?;
    let expected: BTreeMap<&str, &FileEntry> =
        fp.entries.iter().map(|e| (e.relative_path.as_str(), e)).collect();
    let found: BTreeMap<&str, &FileEntry> =
        current.entries.iter().map(|e| (e.relative_path.as_str(), e)).collect();

    let mut mismatches = Vec::new();
    for (path, entry) in &found {
        match expected.get(path) {
            None => mismatches.push((path.to_string(), MismatchKind::Added)),
            Some(old) if old.sha1 != entry.sha1 || old.size_bytes != entry.size_bytes => {
                mismatches.push((path.to_string(), MismatchKind::Modified))
            }
            Some(_) => {}
        }
    }
    for path in expected.keys() {
        if !found.contains_key(path) {
            mismatches.push((path.to_string(), MismatchKind::Removed));
        }
    }
    mismatches.sort();
    Ok(VerificationReport {
        mode: VerifyMode::Deep,
        mismatches: mismatches
            .into_iter()
            .map(|(path, kind)| Mismatch { path, kind })
            .collect(),
    })
}

pub fn write_footprint(fp: &DatasetFootprint, path: &Path) -> Result<()> {
    fp.validate()?;
    canonical::write(fp, path)
}

pub fn parse_footprint(text: &str, origin: &Path) -> Result<DatasetFootprint> {
    let fp: DatasetFootprint = serde_json::from_str(text).map_err(|e| Error::json(origin, &e))?;
    fp.validate()?;
    Ok(fp)
}

pub fn read_footprint(path: &Path) -> Result<DatasetFootprint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_footprint(&text, path)
}
