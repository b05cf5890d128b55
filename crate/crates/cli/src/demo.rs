//! The `run demo2d` task and the sweep driver built on it.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::Parser;
use indexmap::IndexMap;
use reprokit::analysis::{self, ScatterPoint};
use reprokit::demo2d::{self, BlobSpec, TrainConfig};
use reprokit::provenance::{self, Decision, ExperimentManifest, ParamValue, Policy, VcsState, SNAPSHOT_DIR};
use reprokit::runstore::{self, MetricWriter, Split, ARTIFACTS_DIR};
use reprokit::sweep::{self, At, Mode, ParamSpace, SweepSummary, TrialSummary};
use reprokit::{canonical, Error, Scalar};

use crate::commands::{self, StoredConfusion};
use crate::{Cli, Command, Demo2dArgs, Outcome, RunTask};

pub const MODEL_FILE: &str = "model.json";
pub const BOUNDARY_FILE: &str = "decision_boundary.svg";
pub const CONFUSION_FILE: &str = "confusion.json";
pub const SWEEP_EXPERIMENT: &str = "demo2d_sweep";
pub const SWEEP_SUMMARY_FILE: &str = "sweep_summary.json";

const BLOBS: BlobSpec = BlobSpec {
    n_classes: 3,
    n_per_class: 100,
    radius: 5.0,
    sigma: 1.0,
};
const VAL_FRACTION: f64 = 0.2;
const GRID_RESOLUTION: usize = 100;

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn vcs_state(cwd: &Path) -> Result<(VcsState, Option<PathBuf>)> {
    match provenance::repository_root(cwd) {
        Ok(Some(root)) => Ok((provenance::check_vcs_state(&root)?, Some(root))),
        Ok(None) => Ok((VcsState::not_a_repository(), None)),
        Err(Error::VcsUnavailable(msg)) => {
            log::warn!("version control unavailable ({msg}); treating the working copy as unversioned");
            Ok((VcsState::not_a_repository(), None))
        }
        Err(e) => Err(e.into()),
    }
}

/// Snapshot excludes: simple `.gitignore` patterns, build output and the runs directory.
fn snapshot_excludes(src_root: &Path, runs: &Path) -> Vec<String> {
    let mut globs = vec!["target".to_owned(), "**/target".to_owned()];
    if let Ok(text) = fs::read_to_string(src_root.join(".gitignore")) {
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') || line.starts_with('!') {
                continue;
            }
            let pattern = line.trim_end_matches('/');
            if let Some(anchored) = pattern.strip_prefix('/') {
                globs.push(anchored.to_owned());
            } else {
                globs.push(pattern.to_owned());
                if !pattern.contains('/') {
                    globs.push(format!("**/{pattern}"));
                }
            }
        }
    }
    let src_abs = fs::canonicalize(src_root).unwrap_or_else(|_| src_root.to_path_buf());
    if let Ok(runs_abs) = fs::canonicalize(runs) {
        if let Ok(rel) = runs_abs.strip_prefix(&src_abs) {
            if !rel.as_os_str().is_empty() {
                globs.push(rel.to_string_lossy().replace('\\', "/"));
            }
        }
    }
    globs
}

pub fn run_demo2d(args: &Demo2dArgs, argv: Vec<String>) -> Result<Outcome> {
    Ok(match launch_demo2d(args, argv)? {
        Some(_) => Outcome::Success,
        None => Outcome::Fail,
    })
}

/// Runs one demo2d experiment. Returns the run directory, or `None` when the
/// policy refused to start.
pub fn launch_demo2d(args: &Demo2dArgs, argv: Vec<String>) -> Result<Option<PathBuf>> {
    let config = TrainConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        val_fraction: VAL_FRACTION,
    };
    config.validate()?;
    let policy = Policy::from(args.policy);
    let cwd = std::env::current_dir().context("reading the working directory")?;
    let (vcs, repo_root) = vcs_state(&cwd)?;
    let decision = provenance::enforce_policy(&vcs, policy);
    if decision == Decision::Refuse {
        eprintln!(
            "refusing to run with --policy strict: {}",
            match &vcs.commit_id {
                Some(_) => "the working copy has uncommitted changes",
                None => "not inside a version-controlled repository",
            }
        );
        return Ok(None);
    }

    let runs = commands::runs_dir();
    let mut parameters = IndexMap::new();
    parameters.insert("epochs".to_owned(), ParamValue::Int(args.epochs as i64));
    parameters.insert("lr".to_owned(), ParamValue::Float(args.lr));
    parameters.insert("n_classes".to_owned(), ParamValue::Int(BLOBS.n_classes as i64));
    parameters.insert("n_per_class".to_owned(), ParamValue::Int(BLOBS.n_per_class as i64));
    parameters.insert("radius".to_owned(), ParamValue::Float(BLOBS.radius));
    parameters.insert("sigma".to_owned(), ParamValue::Float(BLOBS.sigma));
    parameters.insert("val_fraction".to_owned(), ParamValue::Float(VAL_FRACTION));
    parameters.insert("policy".to_owned(), ParamValue::Str(format!("{:?}", policy).to_lowercase()));
    let snapshot = decision == Decision::ProceedWithSnapshot;
    let manifest = ExperimentManifest {
        experiment_name: args.name.clone(),
        master_seed: args.seed,
        parameters,
        command_line: argv,
        vcs,
        code_snapshot: snapshot.then(|| SNAPSHOT_DIR.to_owned()),
        dataset_footprint: None,
        environment: provenance::capture_environment(),
        started_at: unix_now(),
    };
    let run_dir = runstore::init_run(&runs, &manifest)?;
    runstore::append_event(&run_dir, "start", &format!("run demo2d seed {}", args.seed))?;

    if snapshot {
        let src_root = repo_root.unwrap_or(cwd);
        let excludes = snapshot_excludes(&src_root, &runs);
        let (_, fp) = provenance::snapshot_code(&src_root, &run_dir, &excludes)?;
        runstore::append_event(
            &run_dir,
            "snapshot",
            &format!("{} files, {} bytes from {}", fp.file_count, fp.total_bytes, src_root.display()),
        )?;
    }
    runstore::write_rerun_script(&run_dir, &manifest)?;

    let points = demo2d::generate_blobs(&BLOBS, args.seed)?;
    let mut writer = MetricWriter::open(&run_dir)?;
    let outcome = demo2d::train_streaming::<f64>(&points, &config, args.seed, &mut |r| writer.append(&r))?;

    let artifacts = run_dir.join(ARTIFACTS_DIR);
    fs::create_dir_all(&artifacts).with_context(|| format!("creating {}", artifacts.display()))?;
    canonical::write(&outcome.params, &artifacts.join(MODEL_FILE))?;

    let bounds = demo2d::bounds_of(&points);
    let grid = demo2d::predict_grid(&outcome.params, &bounds, GRID_RESOLUTION)?;
    let scatter: Vec<ScatterPoint> = outcome
        .train_points
        .iter()
        .map(|p| ScatterPoint { x: p.x[0], y: p.x[1], label: p.label })
        .collect();
    commands::write_text(
        &artifacts.join(BOUNDARY_FILE),
        &analysis::render_decision_svg(&grid, GRID_RESOLUTION, bounds, &scatter)?,
    )?;

    let stored = StoredConfusion {
        split: Split::Val,
        class_names: (0..BLOBS.n_classes).map(|c| format!("class {c}")).collect(),
        matrix: demo2d::evaluate_confusion(&outcome.params, &outcome.val_points)?,
    };
    canonical::write(&stored, &artifacts.join(CONFUSION_FILE))?;

    let train_acc = demo2d::accuracy(&outcome.params, &outcome.train_points);
    let val_acc = demo2d::accuracy(&outcome.params, &outcome.val_points);
    runstore::append_event(&run_dir, "finish", &format!("{} epochs", args.epochs))?;
    println!(
        "run {}: {} epochs, train accuracy {}, val accuracy {}",
        run_dir.display(),
        args.epochs,
        train_acc.shortest(),
        val_acc.shortest()
    );
    Ok(Some(run_dir))
}

fn trial_argv(run_seed: u64, assignment: &sweep::Assignment) -> Result<Vec<String>> {
    let mut epochs = "100".to_owned();
    let mut lr = "0.1".to_owned();
    for (name, value) in assignment {
        match (name.as_str(), value) {
            ("epochs", ParamValue::Int(e)) if *e >= 1 => epochs = e.to_string(),
            ("lr", v) if v.as_f64().is_some() => lr = v.as_f64().unwrap_or_default().shortest(),
            (name, value) => bail!("sweep axis {name:?} value {value} cannot be passed to run demo2d (axes: lr, epochs)"),
        }
    }
    Ok([
        "run", "demo2d", "--seed", &run_seed.to_string(), "--epochs", &epochs, "--lr", &lr, "--name", SWEEP_EXPERIMENT,
    ]
    .map(str::to_owned)
    .to_vec())
}

/// Random search over `run demo2d` flags. Trials run sequentially; the
/// objective is `metric` on the val split at the final step.
pub fn sweep(space_path: &Path, trials: usize, seed: u64, metric: &str, mode: Mode) -> Result<Outcome> {
    let space = ParamSpace::read(space_path)?;
    let assignments = sweep::random_search(&space, trials, seed)?;
    let mut planned = Vec::with_capacity(assignments.len());
    for (i, a) in assignments.into_iter().enumerate() {
        let run_seed = sweep::trial_run_seed(seed, i)?;
        let argv = trial_argv(run_seed, &a)?;
        planned.push((i, a, run_seed, argv));
    }

    let mut runs = Vec::new();
    let mut summaries = Vec::new();
    for (i, assignment, run_seed, argv) in planned {
        let cli = Cli::try_parse_from(std::iter::once("repro".to_owned()).chain(argv.iter().cloned()))?;
        let Command::Run { task: RunTask::Demo2d(args) } = cli.command else {
            unreachable!("trial command is always run demo2d")
        };
        let run_dir = launch_demo2d(&args, argv)?.context("trial refused by policy")?;
        let series = runstore::load_run(&run_dir)?;
        let objective = series.metric(metric, Split::Val).last().map(|r| r.value);
        summaries.push(TrialSummary {
            trial: i,
            assignment,
            run_seed,
            run_id: series.run_id.clone(),
            objective,
        });
        runs.push(series);
    }

    let best = sweep::best_trial(&runs, metric, Split::Val, mode, At::Final)?;
    let summary = SweepSummary {
        sweep_seed: seed,
        metric: metric.to_owned(),
        split: Split::Val,
        mode,
        trials: summaries,
        best_run_id: Some(best.run_id.clone()),
    };
    let path = commands::runs_dir().join(SWEEP_EXPERIMENT).join(SWEEP_SUMMARY_FILE);
    canonical::write(&summary, &path)?;
    println!(
        "{} trials; best {} with val {metric} {} -> {}",
        runs.len(),
        best.run_id,
        best.value.shortest(),
        path.display()
    );
    Ok(Outcome::Success)
}
