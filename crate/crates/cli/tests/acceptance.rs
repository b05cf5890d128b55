//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails or overruns its time budget.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::time::{Duration, Instant};

use common::{code, fixture_repo, new_run, repro, run_dirs, stdout};
use indexmap::IndexMap;
use reprokit::analysis::{accuracy, aggregate_runs, confusion_matrix, pca_project, ConfusionMatrix};
use reprokit::datatools::{self, SplitSpec};
use reprokit::demo2d::{self, BlobSpec, LabeledPoint, ModelParams, TrainConfig};
use reprokit::integrity::{self, FOOTPRINT_FILE};
use reprokit::linalg::{symmetric_eigen, Matrix};
use reprokit::provenance::{ExperimentManifest, VcsState};
use reprokit::runstore::{MetricRecord, RunSeries, Split};
use reprokit::stats::Welford;
use reprokit::sweep::{self, ParamSpace};
use reprokit::SplitMix64;
use tempfile::TempDir;

type Outcome = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn tmp() -> TempDir {
    tempfile::tempdir().expect("temp dir")
}

fn gaussian(rng: &mut SplitMix64) -> f64 {
    rng.next_gaussian_pair().0
}

fn tamper_detection() -> Outcome {
    let dir = tmp();
    let data = dir.path().join("corpus");
    let mut rng = SplitMix64::new(1);
    let mut sizes = Vec::new();
    for i in 0..100 {
        let rel = format!("d{}/f{i:03}.bin", i % 7);
        let size = if i % 10 == 0 { 0 } else { rng.next_below(64 * 1024 + 1) as usize };
        let bytes: Vec<u8> = (0..size).map(|_| rng.next_u64() as u8).collect();
        let path = data.join(&rel);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, bytes).unwrap();
        sizes.push((rel, size));
    }
    let runs = dir.path().join("runs");
    let out = repro(dir.path(), &runs, &["footprint", "create", "corpus"]);
    ensure(code(&out) == 0, || format!("create exited {}", code(&out)))?;
    let candidates: Vec<&(String, usize)> = sizes.iter().filter(|(_, s)| *s > 0).collect();
    for trial in 0..100 {
        let (rel, size) = candidates[rng.next_below(candidates.len() as u64) as usize];
        let path = data.join(rel);
        let original = fs::read(&path).unwrap();
        let mut mutated = original.clone();
        let offset = rng.next_below(*size as u64) as usize;
        mutated[offset] ^= 1 + rng.next_below(255) as u8;
        fs::write(&path, &mutated).unwrap();
        let out = repro(dir.path(), &runs, &["footprint", "verify", "--deep", "corpus"]);
        fs::write(&path, &original).unwrap();
        let text = stdout(&out);
        let lines: Vec<&str> = text.lines().collect();
        ensure(code(&out) == 1, || format!("trial {trial}: exit {}", code(&out)))?;
        ensure(lines == ["FAIL (deep)", &format!("  MODIFIED {rel}")], || {
            format!("trial {trial}: mutated {rel}, report {lines:?}")
        })?;
    }
    Ok(())
}

fn quick_check() -> Outcome {
    let dir = tmp();
    let data = dir.path().join("corpus");
    fs::create_dir_all(data.join("a")).unwrap();
    for i in 0..20 {
        fs::write(data.join(format!("a/{i}.txt")), format!("{i}\n")).unwrap();
    }
    let runs = dir.path().join("runs");
    repro(dir.path(), &runs, &["footprint", "create", "corpus"]);
    let out = repro(dir.path(), &runs, &["footprint", "verify", "corpus"]);
    ensure(code(&out) == 0 && stdout(&out).starts_with("PASS (quick)"), || {
        format!("untouched corpus: exit {} {:?}", code(&out), stdout(&out))
    })?;
    let fp = integrity::read_footprint(&data.join(FOOTPRINT_FILE)).map_err(|e| e.to_string())?;
    let later = filetime::FileTime::from_unix_time(fp.last_modified as i64 + 10, 0);
    filetime::set_file_mtime(data.join("a/7.txt"), later).unwrap();
    let out = repro(dir.path(), &runs, &["footprint", "verify", "corpus"]);
    ensure(code(&out) == 1 && stdout(&out).contains("MTIME_NEWER"), || {
        format!("touched corpus: exit {} {:?}", code(&out), stdout(&out))
    })
}

fn byte_determinism() -> Outcome {
    let dir = tmp();
    let runs = dir.path().join("runs");
    let args = ["run", "demo2d", "--seed", "42", "--epochs", "100"];
    let mut produced = Vec::new();
    for _ in 0..2 {
        let before = run_dirs(&runs, "demo2d");
        let out = repro(dir.path(), &runs, &args);
        ensure(code(&out) == 0, || format!("run exited {}", code(&out)))?;
        produced.push(new_run(&before, &run_dirs(&runs, "demo2d")));
    }
    let before = run_dirs(&runs, "demo2d");
    let out = repro(dir.path(), &runs, &["rerun", produced[0].to_str().unwrap()]);
    ensure(code(&out) == 0, || format!("rerun exited {}", code(&out)))?;
    produced.push(new_run(&before, &run_dirs(&runs, "demo2d")));

    for file in ["metrics.jsonl", "artifacts/model.json"] {
        let first = fs::read(produced[0].join(file)).unwrap();
        ensure(!first.is_empty(), || format!("{file} is empty"))?;
        for other in &produced[1..] {
            ensure(fs::read(other.join(file)).unwrap() == first, || {
                format!("{file} differs between {} and {}", produced[0].display(), other.display())
            })?;
        }
    }
    Ok(())
}

fn random_problem(rng: &mut SplitMix64) -> (ModelParams<f64>, Vec<LabeledPoint>) {
    let c = 2 + rng.next_below(5) as usize;
    let n = 1 + rng.next_below(30) as usize;
    let mut params = ModelParams::<f64>::zeros(c);
    for i in 0..params.n_params() {
        params.set(i, gaussian(rng));
    }
    let points = (0..n)
        .map(|_| LabeledPoint {
            x: [2.0 * gaussian(rng), 2.0 * gaussian(rng)],
            label: rng.next_below(c as u64) as usize,
        })
        .collect();
    (params, points)
}

fn gradient_correctness() -> Outcome {
    let mut rng = SplitMix64::new(4);
    let mut worst = 0.0f64;
    for draw in 0..100 {
        let (params, points) = random_problem(&mut rng);
        let err = demo2d::grad_check(&params, &points, 1e-4);
        worst = worst.max(err);
        ensure(err < 1e-5, || format!("draw {draw}: relative error {err}"))?;

        let (_, mut perturbed) = demo2d::loss_and_gradient(&params, &points);
        let idx = rng.next_below(perturbed.n_params() as u64) as usize;
        perturbed.set(idx, perturbed.get(idx) + 1e-3);
        let err = demo2d::grad_check_against(&params, &points, 1e-4, &perturbed);
        ensure(err >= 1e-5, || format!("draw {draw}: perturbed gradient passed with {err}"))?;
    }
    println!("    max relative error {worst:e}");
    Ok(())
}

fn initial_loss_identity() -> Outcome {
    let mut rng = SplitMix64::new(5);
    for c in 2..=10usize {
        let points: Vec<LabeledPoint> = (0..50)
            .map(|_| LabeledPoint {
                x: [10.0 * gaussian(&mut rng), 10.0 * gaussian(&mut rng)],
                label: rng.next_below(c as u64) as usize,
            })
            .collect();
        let l = demo2d::loss(&ModelParams::<f64>::zeros(c), &points);
        let expected = (c as f64).ln();
        ensure((l - expected).abs() <= 1e-12, || format!("c={c}: loss {l}, ln(c) {expected}"))?;
    }
    Ok(())
}

fn convex_descent() -> Outcome {
    let spec = BlobSpec {
        n_classes: 3,
        n_per_class: 100,
        radius: 5.0,
        sigma: 1.0,
    };
    let points = demo2d::generate_blobs(&spec, 42).map_err(|e| e.to_string())?;
    let config = TrainConfig {
        learning_rate: 0.01,
        epochs: 200,
        val_fraction: 0.2,
    };
    let (_, records) = demo2d::train::<f64>(&points, &config, 42).map_err(|e| e.to_string())?;
    let losses: Vec<f64> = records
        .iter()
        .filter(|r| r.split == Split::Train && r.name == "loss")
        .map(|r| r.value)
        .collect();
    ensure(losses.len() == 201, || format!("{} loss entries", losses.len()))?;
    for (e, pair) in losses.windows(2).enumerate() {
        ensure(pair[1] <= pair[0], || format!("loss rose at epoch {}: {} -> {}", e + 1, pair[0], pair[1]))?;
    }
    Ok(())
}

fn streaming_stats() -> Outcome {
    let mut rng = SplitMix64::new(7);
    let values: Vec<f64> = (0..100_000).map(|_| 1e3 + 5.0 * gaussian(&mut rng)).collect();
    let w: Welford<f64> = values.iter().copied().collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    ensure(rel(w.mean(), mean) <= 1e-10, || format!("mean {} vs {mean}", w.mean()))?;
    ensure(rel(w.population_std(), var.sqrt()) <= 1e-10, || {
        format!("std {} vs {}", w.population_std(), var.sqrt())
    })?;

    let dir = tmp();
    let class = dir.path().join("px");
    fs::create_dir_all(&class).unwrap();
    let mut pgm = b"P5\n2 1\n255\n".to_vec();
    pgm.extend_from_slice(&[0, 255]);
    fs::write(class.join("two.pgm"), pgm).unwrap();
    let stats = datatools::compute_stats::<f64>(dir.path()).map_err(|e| e.to_string())?;
    ensure(stats.per_channel_mean == [0.5] && stats.per_channel_std == [0.5], || {
        format!("mean {:?} std {:?}", stats.per_channel_mean, stats.per_channel_std)
    })
}

fn split_properties() -> Outcome {
    let spec = SplitSpec::new(0.6, 0.2, 0.2).map_err(|e| e.to_string())?;
    let ten = BTreeMap::from([("c".to_owned(), (0..10).map(|i| format!("{i}.png")).collect::<Vec<_>>())]);
    let layout = datatools::plan_split(&ten, &spec, 3).map_err(|e| e.to_string())?;
    ensure(layout.totals() == (6, 2, 2), || format!("10 files split {:?}", layout.totals()))?;

    let mut rng = SplitMix64::new(8);
    for trial in 0..200 {
        let ratios = [0.1 + rng.next_unit(), 0.1 + rng.next_unit(), 0.1 + rng.next_unit()];
        let sum: f64 = ratios.iter().sum();
        let spec = SplitSpec::new(ratios[0] / sum, ratios[1] / sum, 1.0 - ratios[0] / sum - ratios[1] / sum)
            .map_err(|e| e.to_string())?;
        let mut classes = BTreeMap::new();
        for c in 0..1 + rng.next_below(4) {
            let files: Vec<String> = (0..rng.next_below(40)).map(|i| format!("f{i}_{}", rng.next_u64() % 1000)).collect();
            let unique: BTreeSet<String> = files.into_iter().collect();
            classes.insert(format!("class{c}"), unique.into_iter().collect::<Vec<_>>());
        }
        let seed = rng.next_u64();
        let layout = datatools::plan_split(&classes, &spec, seed).map_err(|e| e.to_string())?;
        for (class, files) in &classes {
            let s = &layout.classes[class];
            let parts: Vec<&String> = s.train.iter().chain(&s.val).chain(&s.test).collect();
            let union: BTreeSet<&String> = parts.iter().copied().collect();
            ensure(parts.len() == files.len() && union == files.iter().collect(), || {
                format!("trial {trial}: class {class} is not partitioned")
            })?;
        }
        let again = datatools::plan_split(&classes, &spec, seed).map_err(|e| e.to_string())?;
        ensure(again == layout, || format!("trial {trial}: same seed gave a different split"))?;
        let mut reordered = classes.clone();
        for files in reordered.values_mut() {
            rng.shuffle(files);
        }
        let permuted = datatools::plan_split(&reordered, &spec, seed).map_err(|e| e.to_string())?;
        ensure(permuted == layout, || format!("trial {trial}: listing order changed the split"))?;
    }
    Ok(())
}

fn series(run_id: &str, metric: &str, steps: &[u64], values: &[f64]) -> RunSeries {
    let manifest = ExperimentManifest {
        experiment_name: "agg".into(),
        master_seed: 0,
        parameters: IndexMap::new(),
        command_line: Vec::new(),
        vcs: VcsState::not_a_repository(),
        code_snapshot: None,
        dataset_footprint: None,
        environment: BTreeMap::new(),
        started_at: 0,
    };
    RunSeries {
        run_id: run_id.into(),
        run_dir: run_id.into(),
        manifest,
        records: steps
            .iter()
            .zip(values)
            .map(|(&s, &v)| MetricRecord::new(s, s, Split::Val, metric, v))
            .collect(),
    }
}

fn aggregation_oracle() -> Outcome {
    let pair = [series("a", "m", &[0], &[1.0]), series("b", "m", &[0], &[3.0])];
    let curve = aggregate_runs(&pair, "m", Split::Val).map_err(|e| e.to_string())?;
    ensure(curve.mean == [2.0] && curve.variance == [1.0], || format!("{{1,3}} gave {curve:?}"))?;

    let mut rng = SplitMix64::new(9);
    for trial in 0..200 {
        let n_runs = 1 + rng.next_below(8) as usize;
        let n_steps = 1 + rng.next_below(30) as usize;
        let steps: Vec<u64> = (0..n_steps as u64).map(|s| s * 10).collect();
        let values: Vec<Vec<f64>> = (0..n_runs)
            .map(|_| (0..n_steps).map(|_| 100.0 * gaussian(&mut rng)).collect())
            .collect();
        let runs: Vec<RunSeries> = values
            .iter()
            .enumerate()
            .map(|(r, v)| series(&format!("r{r}"), "loss", &steps, v))
            .collect();
        let curve = aggregate_runs(&runs, "loss", Split::Val).map_err(|e| e.to_string())?;
        ensure(curve.steps == steps, || format!("trial {trial}: steps {:?}", curve.steps))?;
        for i in 0..n_steps {
            let column: Vec<f64> = values.iter().map(|v| v[i]).collect();
            let mean = column.iter().sum::<f64>() / n_runs as f64;
            let var = column.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n_runs as f64;
            let min = column.iter().copied().fold(f64::INFINITY, f64::min);
            let max = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
            ensure(
                close(curve.mean[i], mean) && close(curve.variance[i], var) && curve.min[i] == min && curve.max[i] == max,
                || format!("trial {trial} step {i}: got ({}, {}, {}, {})", curve.mean[i], curve.min[i], curve.max[i], curve.variance[i]),
            )?;
        }
    }
    Ok(())
}

fn confusion_oracle() -> Outcome {
    let cm = ConfusionMatrix {
        n_classes: 2,
        counts: vec![vec![1, 1], vec![0, 1]],
    };
    let acc = accuracy(&cm).map_err(|e| e.to_string())?;
    ensure((acc - 2.0 / 3.0).abs() < 1e-15, || format!("accuracy {acc}"))?;

    let mut rng = SplitMix64::new(10);
    for trial in 0..200 {
        let c = 1 + rng.next_below(6) as usize;
        let n = rng.next_below(51) as usize;
        let truth: Vec<usize> = (0..n).map(|_| rng.next_below(c as u64) as usize).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.next_below(c as u64) as usize).collect();
        let cm = confusion_matrix(&truth, &pred, c).map_err(|e| e.to_string())?;
        for i in 0..c {
            for j in 0..c {
                let brute = (0..n).filter(|&k| truth[k] == i && pred[k] == j).count() as u64;
                ensure(cm.counts[i][j] == brute, || format!("trial {trial}: cell ({i},{j})"))?;
            }
        }
    }
    Ok(())
}

fn pca_checks() -> Outcome {
    let x = Matrix::from_rows(&[vec![1.0, 1.0], vec![-1.0, -1.0], vec![2.0, 2.0], vec![-2.0, -2.0]])
        .map_err(|e| e.to_string())?;
    let pca = pca_project(&x, 2).map_err(|e| e.to_string())?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let first = pca.components.column(0);
    ensure((first[0] - h).abs() <= 1e-10 && (first[1] - h).abs() <= 1e-10, || format!("first component {first:?}"))?;
    ensure(pca.eigenvalues[1].abs() < 1e-10, || format!("second eigenvalue {}", pca.eigenvalues[1]))?;

    let mut rng = SplitMix64::new(11);
    for trial in 0..100 {
        let d = 1 + rng.next_below(20) as usize;
        let mut rows = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..=i {
                let v = gaussian(&mut rng);
                rows[i][j] = v;
                rows[j][i] = v;
            }
        }
        let a = Matrix::from_rows(&rows).map_err(|e| e.to_string())?;
        let eig = symmetric_eigen(&a).map_err(|e| e.to_string())?;
        let v = &eig.vectors;
        for p in 0..d {
            for q in 0..d {
                let dot: f64 = (0..d).map(|k| v[(k, p)] * v[(k, q)]).sum();
                let expected = if p == q { 1.0 } else { 0.0 };
                ensure((dot - expected).abs() <= 1e-10, || format!("trial {trial}: v{p}.v{q} = {dot}"))?;
            }
            let residual = (0..d)
                .map(|i| {
                    let av: f64 = (0..d).map(|k| a[(i, k)] * v[(k, p)]).sum();
                    (av - eig.values[p] * v[(i, p)]).powi(2)
                })
                .sum::<f64>()
                .sqrt();
            ensure(residual < 1e-8, || format!("trial {trial}: residual {residual} for pair {p}"))?;
        }
    }
    Ok(())
}

fn sweep_checks() -> Outcome {
    let dir = tmp();
    let path = dir.path().join("space.json");
    fs::write(
        &path,
        r#"{"lr": {"type": "float", "lo": 0.1, "hi": 10.0, "scale": "log"},
            "momentum": {"type": "float", "lo": -1.0, "hi": 1.0, "scale": "linear"},
            "layers": {"type": "int", "lo": 1, "hi": 6},
            "act": {"type": "categorical", "choices": ["relu", "tanh", 3, false]}}"#,
    )
    .unwrap();
    let space = ParamSpace::read(&path).map_err(|e| e.to_string())?;
    let draws = sweep::random_search(&space, 10_000, 12).map_err(|e| e.to_string())?;
    ensure(draws.len() == 10_000, || format!("{} draws", draws.len()))?;
    if let Some(bad) = draws.iter().find(|a| !space.contains(a)) {
        return Err(format!("out of bounds: {bad:?}"));
    }
    let again = sweep::random_search(&space, 10_000, 12).map_err(|e| e.to_string())?;
    ensure(again == draws, || "same seed gave different assignments".into())?;
    let mut lr: Vec<f64> = draws.iter().map(|a| a["lr"].as_f64().unwrap()).collect();
    lr.sort_by(f64::total_cmp);
    let median = (lr[4999] + lr[5000]) / 2.0;
    ensure((0.5..=2.0).contains(&median), || format!("log-scale median {median}"))
}

fn policy_enforcement() -> Outcome {
    let dir = tmp();
    let repo = dir.path().join("repo");
    let runs = dir.path().join("runs");
    fs::create_dir_all(&repo).unwrap();
    fixture_repo(&repo);
    fs::write(repo.join("train.py"), "print('edited')\n").unwrap();

    let out = repro(&repo, &runs, &["run", "demo2d", "--seed", "1", "--epochs", "5", "--policy", "strict"]);
    ensure(code(&out) == 1, || format!("strict exited {}", code(&out)))?;
    ensure(run_dirs(&runs, "demo2d").is_empty(), || "strict refusal still created a run".into())?;

    let out = repro(&repo, &runs, &["run", "demo2d", "--seed", "1", "--epochs", "5", "--policy", "snapshot"]);
    ensure(code(&out) == 0, || format!("snapshot exited {}", code(&out)))?;
    let created = run_dirs(&runs, "demo2d");
    ensure(created.len() == 1, || format!("{} runs created", created.len()))?;
    let snap = created[0].join("code_snapshot");
    let copied = fs::read_to_string(snap.join("train.py")).unwrap_or_default();
    ensure(copied == "print('edited')\n", || format!("snapshot train.py = {copied:?}"))?;
    ensure(!snap.join(".git").exists(), || "snapshot contains .git".into())?;
    let fp = integrity::read_footprint(&snap.join(FOOTPRINT_FILE)).map_err(|e| e.to_string())?;
    let report = integrity::deep_verify(&snap, &fp).map_err(|e| e.to_string())?;
    ensure(report.passed() && fp.file_count == 2, || format!("snapshot verify {report:?}, {} files", fp.file_count))?;
    let out = repro(dir.path(), &runs, &["footprint", "verify", "--deep", snap.to_str().unwrap()]);
    ensure(code(&out) == 0, || format!("CLI deep verify of snapshot exited {}", code(&out)))
}

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    check: fn() -> Outcome,
}

fn main() {
    let secs = |s: u64| Some(Duration::from_secs(s));
    let criteria = [
        Criterion { name: "tamper detection", budget: secs(10), check: tamper_detection },
        Criterion { name: "quick check", budget: secs(1), check: quick_check },
        Criterion { name: "byte-determinism", budget: secs(10), check: byte_determinism },
        Criterion { name: "gradient correctness", budget: secs(5), check: gradient_correctness },
        Criterion { name: "initial-loss identity", budget: None, check: initial_loss_identity },
        Criterion { name: "convex descent", budget: None, check: convex_descent },
        Criterion { name: "streaming stats", budget: None, check: streaming_stats },
        Criterion { name: "split properties", budget: secs(5), check: split_properties },
        Criterion { name: "aggregation oracle", budget: None, check: aggregation_oracle },
        Criterion { name: "confusion-matrix oracle", budget: None, check: confusion_oracle },
        Criterion { name: "PCA", budget: None, check: pca_checks },
        Criterion { name: "sweep bounds and determinism", budget: None, check: sweep_checks },
        Criterion { name: "policy enforcement", budget: None, check: policy_enforcement },
    ];
    let mut failed = 0;
    for (i, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = (c.check)();
        let elapsed = start.elapsed();
        let result = match (result, c.budget) {
            (Ok(()), Some(limit)) if elapsed > limit => Err(format!("took {elapsed:.2?}, limit {limit:?}")),
            (r, _) => r,
        };
        match result {
            Ok(()) => println!("PASS {:>2} {} ({elapsed:.2?})", i + 1, c.name),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {} ({elapsed:.2?}): {msg}", i + 1, c.name);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
