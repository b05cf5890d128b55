use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use reprokit::analysis::{self, ConfusionMatrix};
use reprokit::datatools::{self, SplitSpec};
use reprokit::integrity::{self, FOOTPRINT_FILE};
use reprokit::linalg::Matrix;
use reprokit::provenance::ExperimentManifest;
use reprokit::runstore::{self, Split, MANIFEST_FILE};
use reprokit::{canonical, Scalar};

use crate::{demo, Cli, Command, FootprintAction, Outcome, RunTask, RUNS_DIR_ENV};
use clap::Parser;

pub fn runs_dir() -> PathBuf {
    std::env::var_os(RUNS_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Dispatches one parsed command. `argv` is the command line without the
/// program name, recorded verbatim in run manifests.
pub fn execute(command: Command, argv: Vec<String>) -> Result<Outcome> {
    match command {
        Command::Footprint { action } => match action {
            FootprintAction::Create { dir, force } => footprint_create(&dir, force),
            FootprintAction::Verify { dir, deep } => footprint_verify(&dir, deep),
        },
        Command::Split { dir, out, ratios, seed } => split(&dir, &out, &ratios, seed),
        Command::Stats { dir, out } => stats(&dir, &out),
        Command::Run { task: RunTask::Demo2d(args) } => demo::run_demo2d(&args, argv),
        Command::Aggregate {
            pattern,
            metric,
            split,
            out_svg,
            out_csv,
        } => aggregate(&pattern, &metric, &split, out_svg.as_deref(), out_csv.as_deref()),
        Command::Confusion { run_dir, out_svg } => confusion(&run_dir, &out_svg),
        Command::Pca { csv, k, out_csv } => pca(&csv, usize::from(k), &out_csv),
        Command::Sweep {
            space,
            trials,
            seed,
            metric,
            mode,
        } => demo::sweep(&space, trials, seed, &metric, mode.parse()?),
        Command::Rerun { run_dir } => rerun(&run_dir),
    }
}

fn footprint_create(dir: &Path, force: bool) -> Result<Outcome> {
    let path = dir.join(FOOTPRINT_FILE);
    if path.exists() && !force {
        bail!("{} already exists; pass --force to regenerate it", path.display());
    }
    let (fp, skipped) = integrity::build_footprint_with(dir, Default::default())?;
    for link in &skipped {
        eprintln!("warning: skipped symbolic link {link}");
    }
    integrity::write_footprint(&fp, &path)?;
    println!(
        "wrote {}: {} files, {} bytes, last modified {}",
        path.display(),
        fp.file_count,
        fp.total_bytes,
        fp.last_modified
    );
    Ok(Outcome::Success)
}

fn footprint_verify(dir: &Path, deep: bool) -> Result<Outcome> {
    let fp = integrity::read_footprint(&dir.join(FOOTPRINT_FILE))?;
    let report = if deep {
        integrity::deep_verify(dir, &fp)?
    } else {
        integrity::quick_verify(dir, &fp)?
    };
    let mode = if deep { "deep" } else { "quick" };
    if report.passed() {
        println!("PASS ({mode})");
        return Ok(Outcome::Success);
    }
    println!("FAIL ({mode})");
    for m in &report.mismatches {
        println!("  {} {}", m.kind, m.path);
    }
    Ok(Outcome::Fail)
}

fn split(dir: &Path, out: &Path, ratios: &str, seed: u64) -> Result<Outcome> {
    let spec: SplitSpec = ratios.parse()?;
    let layout = datatools::split_dataset(dir, &spec, seed, out)?;
    for (class, s) in &layout.classes {
        println!("{class}: train {} val {} test {}", s.train.len(), s.val.len(), s.test.len());
    }
    let (t, v, te) = layout.totals();
    println!("total: train {t} val {v} test {te} -> {}", out.display());
    Ok(Outcome::Success)
}

fn stats(dir: &Path, out: &Path) -> Result<Outcome> {
    let stats = datatools::compute_stats::<f64>(dir)?;
    canonical::write(&stats, out)?;
    println!(
        "{} samples, {} channels, mean {:?}, std {:?} -> {}",
        stats.n_samples,
        stats.per_channel_mean.len(),
        stats.per_channel_mean,
        stats.per_channel_std,
        out.display()
    );
    Ok(Outcome::Success)
}

/// Run directories matching `pattern`, in sorted order.
fn expand_run_dirs(pattern: &str) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for entry in glob::glob(pattern).with_context(|| format!("bad glob {pattern:?}"))? {
        let path = entry?;
        if path.join(MANIFEST_FILE).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

fn aggregate(pattern: &str, metric: &str, split: &str, out_svg: Option<&Path>, out_csv: Option<&Path>) -> Result<Outcome> {
    let split: Split = split.parse()?;
    let mut runs = Vec::new();
    for dir in expand_run_dirs(pattern)? {
        match runstore::load_run(&dir) {
            Ok(series) => runs.push(series),
            Err(err) => eprintln!("warning: skipping {}: {err}", dir.display()),
        }
    }
    let curve = analysis::aggregate_runs(&runs, metric, split)?;
    if let Some(path) = out_svg {
        let title = format!("{metric} ({split}) over {} runs", runs.len());
        write_text(path, &analysis::render_curves_svg(std::slice::from_ref(&curve), &title)?)?;
    }
    if let Some(path) = out_csv {
        write_text(path, &analysis::export_csv(&curve))?;
    }
    let last = curve.len() - 1;
    println!(
        "aggregated {metric}/{split} over {} runs, {} steps; final mean {} (min {}, max {})",
        runs.len(),
        curve.len(),
        curve.mean[last].shortest(),
        curve.min[last].shortest(),
        curve.max[last].shortest()
    );
    Ok(Outcome::Success)
}

/// `artifacts/confusion.json` as written by demo runs.
#[derive(Debug, serde::Serialize, serde::Deserialize)]
pub struct StoredConfusion {
    pub split: Split,
    pub class_names: Vec<String>,
    pub matrix: ConfusionMatrix,
}

fn confusion(run_dir: &Path, out_svg: &Path) -> Result<Outcome> {
    let path = run_dir.join(runstore::ARTIFACTS_DIR).join(demo::CONFUSION_FILE);
    let stored: StoredConfusion = canonical::read(&path)?;
    write_text(out_svg, &analysis::render_confusion_svg(&stored.matrix, &stored.class_names)?)?;
    match analysis::accuracy(&stored.matrix) {
        Ok(acc) => println!("{} accuracy {} -> {}", stored.split, acc.shortest(), out_svg.display()),
        Err(_) => println!("{} has no samples -> {}", stored.split, out_svg.display()),
    }
    Ok(Outcome::Success)
}

fn read_numeric_csv(path: &Path) -> Result<Matrix<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(e) => bail!("{}:{}: {e}", path.display(), i + 1),
        }
    }
    Ok(Matrix::from_rows(&rows)?)
}

fn pca(csv: &Path, k: usize, out_csv: &Path) -> Result<Outcome> {
    let x = read_numeric_csv(csv)?;
    let result = analysis::pca_project(&x, k)?;
    let header: Vec<String> = (1..=k).map(|i| format!("pc{i}")).collect();
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..result.projected.rows() {
        let row: Vec<String> = result.projected.row(i).iter().map(|v| v.shortest()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_text(out_csv, &out)?;
    let eig: Vec<String> = result.eigenvalues.iter().map(|v| v.shortest()).collect();
    println!(
        "projected {} samples from {} to {} dimensions; eigenvalues [{}] -> {}",
        x.rows(),
        x.cols(),
        k,
        eig.join(", "),
        out_csv.display()
    );
    Ok(Outcome::Success)
}

fn rerun(run_dir: &Path) -> Result<Outcome> {
    let manifest = ExperimentManifest::read(&run_dir.join(MANIFEST_FILE))?;
    let tokens = manifest.command_line.clone();
    if tokens.first().map(String::as_str) != Some("run") {
        bail!("manifest command line {tokens:?} is not a run command");
    }
    let cli = Cli::try_parse_from(std::iter::once("repro".to_owned()).chain(tokens.iter().cloned()))
        .with_context(|| format!("recorded command line {tokens:?} no longer parses"))?;
    println!("rerunning: repro {}", tokens.join(" "));
    execute(cli.command, tokens)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
