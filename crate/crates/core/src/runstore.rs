//! On-disk run layout and the append-only metric log.
//!
//! ```text
//! <runs>/<experiment>/<started_at>_<seed>[_n]/
//!     manifest.json  metrics.jsonl  events.jsonl  rerun.sh  code_snapshot/  artifacts/
//! ```
//!
//! `metrics.jsonl` never contains wall-clock data, so two executions of a
//! deterministic task produce byte-identical files. Timestamps go to
//! `events.jsonl`. Only one writer per run directory is supported; concurrent
//! appends to the same run are a caller error.

use std::collections::HashMap;
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use globset::Glob;
use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::error::{Error, Result};
use crate::integrity::unix_now;
use crate::provenance::{compose_rerun_script, ExperimentManifest};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const RERUN_FILE: &str = "rerun.sh";
pub const ARTIFACTS_DIR: &str = "artifacts";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Spec(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricRecord {
    pub step: u64,
    pub epoch: u64,
    pub split: Split,
    pub name: String,
    pub value: f64,
}

impl MetricRecord {
    pub fn new(step: u64, epoch: u64, split: Split, name: impl Into<String>, value: f64) -> Self {
        Self {
            step,
            epoch,
            split,
            name: name.into(),
            value,
        }
    }

    /// The exact line written to `metrics.jsonl`, without the newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("finite record serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSeries {
    pub run_id: String,
    pub run_dir: PathBuf,
    pub manifest: ExperimentManifest,
    pub records: Vec<MetricRecord>,
}

impl RunSeries {
    /// Records of one (metric, split) pair in log order.
    pub fn metric<'a>(&'a self, name: &'a str, split: Split) -> impl Iterator<Item = &'a MetricRecord> + 'a {
        self.records
            .iter()
            .filter(move |r| r.split == split && r.name == name)
    }
}

#[derive(Debug, Serialize)]
struct Event<'a> {
    ts: u64,
    kind: &'a str,
    detail: &'a str,
}

/// Creates the run directory and writes `manifest.json` plus empty
/// `metrics.jsonl` and `events.jsonl`. Name collisions get `_2`, `_3`, ...
pub fn init_run(runs_root: &Path, m: &ExperimentManifest) -> Result<PathBuf> {
    let exp_dir = runs_root.join(&m.experiment_name);
    fs::create_dir_all(&exp_dir).map_err(|e| Error::io(&exp_dir, e))?;
    let base = format!("{}_{}", m.started_at, m.master_seed);
    let mut n = 1;
    let run_dir = loop {
        let name = if n == 1 { base.clone() } else { format!("{base}_{n}") };
        let candidate = exp_dir.join(name);
        match fs::create_dir(&candidate) {
            Ok(()) => break candidate,
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => n += 1,
            Err(e) => return Err(Error::io(&candidate, e)),
        }
    };
    write_manifest(&run_dir, m)?;
    for file in [METRICS_FILE, EVENTS_FILE] {
        let path = run_dir.join(file);
        fs::write(&path, b"").map_err(|e| Error::io(&path, e))?;
    }
    Ok(run_dir)
}

pub fn write_manifest(run_dir: &Path, m: &ExperimentManifest) -> Result<()> {
    canonical::write(m, &run_dir.join(MANIFEST_FILE))
}

/// Writes `rerun.sh` with the executable bit set.
pub fn write_rerun_script(run_dir: &Path, m: &ExperimentManifest) -> Result<PathBuf> {
    let path = run_dir.join(RERUN_FILE);
    fs::write(&path, compose_rerun_script(m)).map_err(|e| Error::io(&path, e))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(&path, fs::Permissions::from_mode(0o755)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(path)
}

fn append_line(path: &Path, line: &str) -> Result<()> {
    let mut file = OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    file.write_all(line.as_bytes())
        .and_then(|_| file.write_all(b"\n"))
        .map_err(|e| Error::io(path, e))
}

pub fn append_event(run_dir: &Path, kind: &str, detail: &str) -> Result<()> {
    let event = Event {
        ts: unix_now(),
        kind,
        detail,
    };
    append_line(&run_dir.join(EVENTS_FILE), &serde_json::to_string(&event).expect("event serializes"))
}

/// Appends metrics to one run, enforcing nondecreasing steps per (name, split).
///
/// On open, the existing log is scanned so the ordering check also covers
/// records written by earlier writers.
#[derive(Debug)]
pub struct MetricWriter {
    path: PathBuf,
    last_step: HashMap<(String, Split), u64>,
}

impl MetricWriter {
    pub fn open(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(METRICS_FILE);
        let (records, _) = parse_metrics(&path)?;
        let mut last_step = HashMap::new();
        for r in records {
            last_step.insert((r.name, r.split), r.step);
        }
        Ok(Self { path, last_step })
    }

    pub fn append(&mut self, r: &MetricRecord) -> Result<()> {
        if !r.value.is_finite() {
            return Err(Error::InvalidMetric(format!("{} = {} is not finite", r.name, r.value)));
        }
        let key = (r.name.clone(), r.split);
        if let Some(&last) = self.last_step.get(&key) {
            if r.step < last {
                return Err(Error::OrderViolation(format!(
                    "{}/{} step {} after step {}",
                    r.name, r.split, r.step, last
                )));
            }
        }
        append_line(&self.path, &r.to_line())?;
        self.last_step.insert(key, r.step);
        Ok(())
    }
}

/// One-shot append. Reopens and rescans the log; use [`MetricWriter`] for loops.
pub fn append_metric(run_dir: &Path, r: &MetricRecord) -> Result<()> {
    MetricWriter::open(run_dir)?.append(r)
}

/// Parses a metric log. A malformed final line (a truncated write) is
/// reported in the second return value; a malformed line elsewhere is an error.
fn parse_metrics(path: &Path) -> Result<(Vec<MetricRecord>, Option<Error>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<&str> = text.split_terminator('\n').collect();
    let mut records = Vec::with_capacity(lines.len());
    let complete = text.is_empty() || text.ends_with('\n');
    for (i, line) in lines.iter().enumerate() {
        match serde_json::from_str::<MetricRecord>(line) {
            Ok(r) if r.value.is_finite() => records.push(r),
            Ok(_) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    column: 1,
                    message: "non-finite metric value".into(),
                })
            }
            Err(e) => {
                let err = Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    column: e.column(),
                    message: e.to_string(),
                };
                if i + 1 == lines.len() && !complete {
                    return Ok((records, Some(err)));
                }
                return Err(err);
            }
        }
    }
    if !complete {
        return Ok((
            records,
            Some(Error::Parse {
                path: path.to_path_buf(),
                line: lines.len(),
                column: 1,
                message: "final line not newline-terminated".into(),
            }),
        ));
    }
    Ok((records, None))
}

pub fn read_metrics(run_dir: &Path) -> Result<Vec<MetricRecord>> {
    match parse_metrics(&run_dir.join(METRICS_FILE))? {
        (records, None) => Ok(records),
        (_, Some(err)) => Err(err),
    }
}

/// Loads one run directory strictly: any parse problem is an error.
pub fn load_run(run_dir: &Path) -> Result<RunSeries> {
    let manifest = ExperimentManifest::read(&run_dir.join(MANIFEST_FILE))?;
    let records = read_metrics(run_dir)?;
    let run_id = run_dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(RunSeries {
        run_id,
        run_dir: run_dir.to_path_buf(),
        manifest,
        records,
    })
}

#[derive(Debug, Default)]
pub struct LoadReport {
    pub runs: Vec<RunSeries>,
    /// Runs that could not be loaded, with the reason.
    pub failures: Vec<(PathBuf, Error)>,
}

/// Loads every run under `runs_root`, optionally restricted to one
/// experiment and to run directory names matching `run_glob`. Corrupted
/// runs are collected in the report instead of aborting.
pub fn load_series(runs_root: &Path, experiment: Option<&str>, run_glob: Option<&str>) -> Result<LoadReport> {
    let matcher = run_glob
        .map(|g| Glob::new(g).map(|g| g.compile_matcher()))
        .transpose()
        .map_err(|e| Error::Spec(format!("bad run glob: {e}")))?;
    let mut report = LoadReport::default();
    if !runs_root.is_dir() {
        return Ok(report);
    }
    for exp_dir in sorted_subdirs(runs_root)? {
        let exp_name = exp_dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
        if experiment.is_some_and(|e| e != exp_name) {
            continue;
        }
        for run_dir in sorted_subdirs(&exp_dir)? {
            let name = run_dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
            if matcher.as_ref().is_some_and(|m| !m.is_match(&name)) {
                continue;
            }
            match load_run(&run_dir) {
                Ok(series) => report.runs.push(series),
                Err(err) => report.failures.push((run_dir, err)),
            }
        }
    }
    Ok(report)
}

fn sorted_subdirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry.file_type().map_err(|e| Error::io(entry.path(), e))?.is_dir() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    Ok(dirs)
}
