use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runstore::{RunSeries, Split};
use crate::scalar::Scalar;

/// Per-step statistics of one metric across repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCurve<T = f64> {
    pub metric: String,
    pub split: Split,
    pub steps: Vec<u64>,
    pub mean: Vec<T>,
    pub min: Vec<T>,
    pub max: Vec<T>,
    /// Population variance across runs.
    pub variance: Vec<T>,
}

impl<T: Scalar> AggregateCurve<T> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Aggregates runs that share one step grid. `runs[r]` holds the values of run `r`
/// aligned with `steps`.
pub fn aggregate_values<T: Scalar>(
    metric: &str,
    split: Split,
    steps: &[u64],
    runs: &[Vec<T>],
) -> Result<AggregateCurve<T>> {
    if runs.is_empty() {
        return Err(Error::EmptyInput("no runs to aggregate".into()));
    }
    if let Some(bad) = runs.iter().position(|r| r.len() != steps.len()) {
        return Err(Error::GridMismatch(format!(
            "run {bad} has {} values for {} steps",
            runs[bad].len(),
            steps.len()
        )));
    }
    let n = T::from_count(runs.len());
    let mut curve = AggregateCurve {
        metric: metric.to_owned(),
        split,
        steps: steps.to_vec(),
        mean: Vec::with_capacity(steps.len()),
        min: Vec::with_capacity(steps.len()),
        max: Vec::with_capacity(steps.len()),
        variance: Vec::with_capacity(steps.len()),
    };
    for i in 0..steps.len() {
        let column = runs.iter().map(|r| r[i]);
        let lo = column.clone().fold(T::infinity(), T::min);
        let hi = column.clone().fold(T::neg_infinity(), T::max);
        // rounding in sum/n can step just outside [lo, hi] for equal values
        let mean = (column.clone().sum::<T>() / n).max(lo).min(hi);
        let variance = column.map(|x| (x - mean) * (x - mean)).sum::<T>() / n;
        curve.mean.push(mean);
        curve.min.push(lo);
        curve.max.push(hi);
        curve.variance.push(variance);
    }
    Ok(curve)
}

/// Aggregates one (metric, split) pair across runs. Every run must log the
/// pair on an identical, strictly increasing step grid; no interpolation is done.
pub fn aggregate_runs(series: &[RunSeries], metric: &str, split: Split) -> Result<AggregateCurve<f64>> {
    let Some(first) = series.first() else {
        return Err(Error::EmptyInput("no runs to aggregate".into()));
    };
    let grid = |run: &RunSeries| -> Result<(Vec<u64>, Vec<f64>)> {
        let (steps, values): (Vec<u64>, Vec<f64>) = run.metric(metric, split).map(|r| (r.step, r.value)).unzip();
        if steps.is_empty() {
            return Err(Error::MissingMetric {
                run_id: run.run_id.clone(),
                metric: format!("{metric}/{split}"),
            });
        }
        if steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::GridMismatch(format!("run {} repeats a step", run.run_id)));
        }
        Ok((steps, values))
    };
    let (steps, first_values) = grid(first)?;
    let mut runs = vec![first_values];
    for run in &series[1..] {
        let (s, v) = grid(run)?;
        if s != steps {
            return Err(Error::GridMismatch(format!(
                "run {} logs {metric}/{split} on a different step grid than run {}",
                run.run_id, first.run_id
            )));
        }
        runs.push(v);
    }
    aggregate_values(metric, split, &steps, &runs)
}

/// CSV with header `step,mean,min,max,variance`, `\n` line endings and
/// shortest round-trip floats.
pub fn export_csv<T: Scalar>(curve: &AggregateCurve<T>) -> String {
    let mut out = String::from("step,mean,min,max,variance\n");
    for i in 0..curve.steps.len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            curve.steps[i],
            curve.mean[i].shortest(),
            curve.min[i].shortest(),
            curve.max[i].shortest(),
            curve.variance[i].shortest()
        ));
    }
    out
}

/// Inverse of [`export_csv`]; metric and split are not stored in the CSV.
pub fn parse_csv<T: Scalar + std::str::FromStr>(text: &str, metric: &str, split: Split) -> Result<AggregateCurve<T>> {
    let mut lines = text.lines();
    if lines.next() != Some("step,mean,min,max,variance") {
        return Err(Error::Value("missing CSV header step,mean,min,max,variance".into()));
    }
    let mut curve = AggregateCurve {
        metric: metric.to_owned(),
        split,
        steps: vec![],
        mean: vec![],
        min: vec![],
        max: vec![],
        variance: vec![],
    };
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let bad = || Error::Value(format!("malformed CSV row {}: {line:?}", i + 2));
        if fields.len() != 5 {
            return Err(bad());
        }
        curve.steps.push(fields[0].parse().map_err(|_| bad())?);
        let num = |k: usize| fields[k].parse::<T>().map_err(|_| bad());
        let (mean, min, max, var) = (num(1)?, num(2)?, num(3)?, num(4)?);
        curve.mean.push(mean);
        curve.min.push(min);
        curve.max.push(max);
        curve.variance.push(var);
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runstore::MetricRecord;
    use crate::provenance::{ExperimentManifest, VcsState};
    use std::path::PathBuf;

    fn series(id: &str, values: &[f64]) -> RunSeries {
        RunSeries {
            run_id: id.into(),
            run_dir: PathBuf::from(id),
            manifest: ExperimentManifest {
                experiment_name: "e".into(),
                master_seed: 0,
                parameters: Default::default(),
                command_line: vec![],
                vcs: VcsState::not_a_repository(),
                code_snapshot: None,
                dataset_footprint: None,
                environment: Default::default(),
                started_at: 0,
            },
            records: values
                .iter()
                .enumerate()
                .map(|(i, &v)| MetricRecord::new(i as u64 * 10, i as u64, Split::Val, "loss", v))
                .collect(),
        }
    }

    #[test]
    fn single_run_is_degenerate() {
        let c = aggregate_runs(&[series("a", &[3.0, 2.0, 1.0])], "loss", Split::Val).unwrap();
        assert_eq!(c.steps, vec![0, 10, 20]);
        assert_eq!(c.mean, vec![3.0, 2.0, 1.0]);
        assert_eq!(c.min, c.mean);
        assert_eq!(c.max, c.mean);
        assert_eq!(c.variance, vec![0.0; 3]);
    }

    #[test]
    fn two_runs_population_variance() {
        let c = aggregate_runs(&[series("a", &[1.0]), series("b", &[3.0])], "loss", Split::Val).unwrap();
        assert_eq!((c.mean[0], c.min[0], c.max[0], c.variance[0]), (2.0, 1.0, 3.0, 1.0));
    }

    #[test]
    fn equal_values_keep_mean_in_range() {
        let c = aggregate_values("m", Split::Train, &[0], &[vec![0.1], vec![0.1], vec![0.1]]).unwrap();
        assert!(c.min[0] <= c.mean[0] && c.mean[0] <= c.max[0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(aggregate_runs(&[], "loss", Split::Val), Err(Error::EmptyInput(_))));
        let err = aggregate_runs(&[series("a", &[1.0, 2.0]), series("b", &[1.0])], "loss", Split::Val).unwrap_err();
        assert!(matches!(err, Error::GridMismatch(_)));
        let err = aggregate_runs(&[series("a", &[1.0])], "acc", Split::Val).unwrap_err();
        assert!(matches!(err, Error::MissingMetric { .. }));
    }

    #[test]
    fn csv_round_trip() {
        let c = aggregate_runs(&[series("a", &[0.1, 1e-300, 7.0]), series("b", &[0.3, 2.5, -1.0])], "loss", Split::Val)
            .unwrap();
        let text = export_csv(&c);
        assert!(text.starts_with("step,mean,min,max,variance\n0,0.2,0.1,0.3,"));
        assert_eq!(parse_csv::<f64>(&text, "loss", Split::Val).unwrap(), c);
    }
}
