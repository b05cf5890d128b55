//! Local hyper-parameter search: seeded random search and exhaustive grids.

use std::cmp::Ordering;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::error::{Error, Result};
use crate::provenance::{derive_component_seed, ParamValue};
use crate::rng::SplitMix64;
use crate::runstore::{RunSeries, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Axis {
    Float {
        lo: f64,
        hi: f64,
        #[serde(default)]
        scale: Scale,
    },
    #[serde(rename = "int")]
    Integer { lo: i64, hi: i64 },
    Categorical { choices: Vec<ParamValue> },
}

impl Axis {
    fn validate(&self, name: &str) -> Result<()> {
        let err = |msg: String| Err(Error::Space(format!("axis {name:?}: {msg}")));
        match self {
            Axis::Float { lo, hi, scale } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return err(format!("need finite lo < hi, got [{lo}, {hi}]"));
                }
                if *scale == Scale::Log && *lo <= 0.0 {
                    return err(format!("log scale needs lo > 0, got {lo}"));
                }
            }
            Axis::Integer { lo, hi } if lo >= hi => return err(format!("need lo < hi, got [{lo}, {hi}]")),
            Axis::Categorical { choices } if choices.is_empty() => return err("no choices".into()),
            _ => {}
        }
        Ok(())
    }

    /// Whether a value lies on this axis.
    pub fn contains(&self, value: &ParamValue) -> bool {
        match (self, value) {
            (Axis::Float { lo, hi, .. }, ParamValue::Float(v)) => lo <= v && v <= hi,
            (Axis::Integer { lo, hi }, ParamValue::Int(v)) => lo <= v && v <= hi,
            (Axis::Categorical { choices }, v) => choices.contains(v),
            _ => false,
        }
    }

    fn sample(&self, rng: &mut SplitMix64) -> ParamValue {
        match self {
            Axis::Float { lo, hi, scale: Scale::Linear } => {
                ParamValue::Float((lo + rng.next_unit() * (hi - lo)).clamp(*lo, *hi))
            }
            Axis::Float { lo, hi, scale: Scale::Log } => {
                let (a, b) = (lo.ln(), hi.ln());
                ParamValue::Float((a + rng.next_unit() * (b - a)).exp().clamp(*lo, *hi))
            }
            Axis::Integer { lo, hi } => {
                let span = hi.abs_diff(*lo) + 1;
                ParamValue::Int(lo.wrapping_add(rng.next_below(span) as i64))
            }
            Axis::Categorical { choices } => choices[rng.next_below(choices.len() as u64) as usize].clone(),
        }
    }
}

/// Named axes in declaration order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamSpace {
    pub axes: IndexMap<String, Axis>,
}

pub type Assignment = IndexMap<String, ParamValue>;

impl ParamSpace {
    pub fn validate(&self) -> Result<()> {
        self.axes.iter().try_for_each(|(name, axis)| axis.validate(name))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let space: Self = canonical::read(path)?;
        space.validate()?;
        Ok(space)
    }

    pub fn contains(&self, assignment: &Assignment) -> bool {
        assignment.len() == self.axes.len()
            && self
                .axes
                .iter()
                .all(|(name, axis)| assignment.get(name).is_some_and(|v| axis.contains(v)))
    }
}

/// Trial `i` draws every axis, in declaration order, from a SplitMix64
/// stream seeded with `derive_component_seed(seed, "trial:" + i)`.
pub fn random_search(space: &ParamSpace, n_trials: usize, seed: u64) -> Result<Vec<Assignment>> {
    space.validate()?;
    if n_trials == 0 {
        return Err(Error::Space("need at least one trial".into()));
    }
    (0..n_trials)
        .map(|i| {
            let mut rng = SplitMix64::new(derive_component_seed(seed, &format!("trial:{i}"))?);
            Ok(space
                .axes
                .iter()
                .map(|(name, axis)| (name.clone(), axis.sample(&mut rng)))
                .collect())
        })
        .collect()
}

/// Master seed of trial `i`'s run.
pub fn trial_run_seed(sweep_seed: u64, trial: usize) -> Result<u64> {
    derive_component_seed(sweep_seed, &format!("runseed:{trial}"))
}

/// Cartesian product in declaration order, last axis varying fastest.
/// Continuous float axes cannot be enumerated.
pub fn grid_search(space: &ParamSpace) -> Result<Vec<Assignment>> {
    space.validate()?;
    let mut values: Vec<(&String, Vec<ParamValue>)> = Vec::new();
    for (name, axis) in &space.axes {
        let list = match axis {
            Axis::Integer { lo, hi } => (*lo..=*hi).map(ParamValue::Int).collect(),
            Axis::Categorical { choices } => choices.clone(),
            Axis::Float { .. } => {
                return Err(Error::Space(format!(
                    "axis {name:?} is continuous; list explicit choices for grid search"
                )))
            }
        };
        values.push((name, list));
    }
    let mut out = vec![Assignment::new()];
    for (name, list) in values {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                list.iter().map(move |v| {
                    let mut a = prefix.clone();
                    a.insert(name.clone(), v.clone());
                    a
                })
            })
            .collect();
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Min,
    Max,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(Mode::Min),
            "max" => Ok(Mode::Max),
            other => Err(Error::Spec(format!("unknown mode {other:?}"))),
        }
    }
}

/// Which value of a run's curve represents it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum At {
    Final,
    BestStep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestTrial {
    pub run_id: String,
    pub value: f64,
}

fn better(mode: Mode, a: f64, b: f64) -> Ordering {
    match mode {
        Mode::Min => a.total_cmp(&b),
        Mode::Max => b.total_cmp(&a),
    }
}

/// Picks the best run for one (metric, split). Ties go to the earliest
/// `started_at`, then the lexicographically smallest run id.
pub fn best_trial(runs: &[RunSeries], metric: &str, split: Split, mode: Mode, at: At) -> Result<BestTrial> {
    let mut scored = Vec::with_capacity(runs.len());
    for run in runs {
        let values = run.metric(metric, split).map(|r| r.value);
        let value = match at {
            At::Final => values.last(),
            At::BestStep => values.min_by(|a, b| better(mode, *a, *b)),
        };
        let Some(value) = value else {
            return Err(Error::MissingMetric {
                run_id: run.run_id.clone(),
                metric: format!("{metric}/{split}"),
            });
        };
        scored.push((value, run));
    }
    scored
        .into_iter()
        .min_by(|(va, ra), (vb, rb)| {
            better(mode, *va, *vb)
                .then(ra.manifest.started_at.cmp(&rb.manifest.started_at))
                .then(ra.run_id.cmp(&rb.run_id))
        })
        .map(|(value, run)| BestTrial {
            run_id: run.run_id.clone(),
            value,
        })
        .ok_or_else(|| Error::EmptyInput("no runs to compare".into()))
}

/// One line of `sweep_summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub assignment: Assignment,
    pub run_seed: u64,
    pub run_id: String,
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub sweep_seed: u64,
    pub metric: String,
    pub split: Split,
    pub mode: Mode,
    pub trials: Vec<TrialSummary>,
    pub best_run_id: Option<String>,
}
