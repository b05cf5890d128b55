//! Deterministic 2D classification task: Gaussian blobs on a circle and a
//! multinomial logistic regression trained by full-batch gradient descent.
//!
//! Data sampling is the only randomness. Weights start at zero, so a run is
//! fully determined by the seed and the training configuration.

use serde::{Deserialize, Serialize};

use crate::analysis::{confusion_matrix, Bounds, ConfusionMatrix};
use crate::error::{Error, Result};
use crate::provenance::derive_component_seed;
use crate::rng::SplitMix64;
use crate::runstore::{MetricRecord, Split};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub n_classes: usize,
    pub n_per_class: usize,
    pub radius: f64,
    pub sigma: f64,
}

impl BlobSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::Spec(format!("need at least 2 classes, got {}", self.n_classes)));
        }
        if self.n_per_class < 1 {
            return Err(Error::Spec("need at least one point per class".into()));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) || !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Spec(format!(
                "radius and sigma must be positive and finite (radius {}, sigma {})",
                self.radius, self.sigma
            )));
        }
        Ok(())
    }

    pub fn center(&self, class: usize) -> [f64; 2] {
        let angle = 2.0 * std::f64::consts::PI * class as f64 / self.n_classes as f64;
        [self.radius * angle.cos(), self.radius * angle.sin()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub x: [f64; 2],
    pub label: usize,
}

/// Class `k` is centered at `radius * (cos 2πk/c, sin 2πk/c)`; each point adds
/// `sigma * (z1, z2)` from one Box–Muller draw. Classes are generated in
/// order from a single stream seeded with `derive_component_seed(seed, "blobs")`.
pub fn generate_blobs(spec: &BlobSpec, seed: u64) -> Result<Vec<LabeledPoint>> {
    spec.validate()?;
    let mut rng = SplitMix64::new(derive_component_seed(seed, "blobs")?);
    let mut points = Vec::with_capacity(spec.n_classes * spec.n_per_class);
    for label in 0..spec.n_classes {
        let [cx, cy] = spec.center(label);
        for _ in 0..spec.n_per_class {
            let (z1, z2) = rng.next_gaussian_pair();
            points.push(LabeledPoint {
                x: [cx + spec.sigma * z1, cy + spec.sigma * z2],
                label,
            });
        }
    }
    Ok(points)
}

/// Weights of a linear softmax classifier: logits = Wᵀx + b with W 2×c.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T = f64> {
    /// Row-major, `w[i][k]` couples input coordinate `i` to class `k`.
    #[serde(rename = "W")]
    pub w: [Vec<T>; 2],
    pub b: Vec<T>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(n_classes: usize) -> Self {
        Self {
            w: [vec![T::zero(); n_classes], vec![T::zero(); n_classes]],
            b: vec![T::zero(); n_classes],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.b.len()
    }

    pub fn n_params(&self) -> usize {
        3 * self.n_classes()
    }

    /// Flat view order: W row 0, W row 1, b.
    pub fn get(&self, idx: usize) -> T {
        let c = self.n_classes();
        match idx / c {
            0 => self.w[0][idx % c],
            1 => self.w[1][idx % c],
            _ => self.b[idx % c],
        }
    }

    pub fn set(&mut self, idx: usize, v: T) {
        let c = self.n_classes();
        match idx / c {
            0 => self.w[0][idx % c] = v,
            1 => self.w[1][idx % c] = v,
            _ => self.b[idx % c] = v,
        }
    }

    pub fn is_finite(&self) -> bool {
        (0..self.n_params()).all(|i| self.get(i).is_finite())
    }

    pub fn logits(&self, x: [T; 2]) -> Vec<T> {
        (0..self.n_classes())
            .map(|k| x[0] * self.w[0][k] + x[1] * self.w[1][k] + self.b[k])
            .collect()
    }

    pub fn probabilities(&self, x: [T; 2]) -> Vec<T> {
        softmax(&self.logits(x))
    }

    /// Argmax of the logits; ties go to the lower class index.
    pub fn predict(&self, x: [T; 2]) -> usize {
        let logits = self.logits(x);
        let mut best = 0;
        for (k, &v) in logits.iter().enumerate().skip(1) {
            if v > logits[best] {
                best = k;
            }
        }
        best
    }

    pub fn to_f64(&self) -> ModelParams<f64> {
        ModelParams {
            w: [
                self.w[0].iter().map(|v| v.to_f64_lossy()).collect(),
                self.w[1].iter().map(|v| v.to_f64_lossy()).collect(),
            ],
            b: self.b.iter().map(|v| v.to_f64_lossy()).collect(),
        }
    }
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_softmax_at<T: Scalar>(logits: &[T], class: usize) -> T {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = logits.iter().map(|&z| (z - max).exp()).sum::<T>().ln();
    logits[class] - max - lse
}

fn to_scalar<T: Scalar>(p: &LabeledPoint) -> [T; 2] {
    [T::lit(p.x[0]), T::lit(p.x[1])]
}

/// Mean cross-entropy `-(1/N) Σ log softmax(Wᵀx + b)[y]`.
pub fn loss<T: Scalar>(params: &ModelParams<T>, points: &[LabeledPoint]) -> T {
    if points.is_empty() {
        return T::zero();
    }
    let total: T = points
        .iter()
        .map(|p| -log_softmax_at(&params.logits(to_scalar(p)), p.label))
        .sum();
    total / T::from_count(points.len())
}

/// Loss and its analytic gradient: `∂L/∂z_k = (p_k - [k = y]) / N`.
pub fn loss_and_gradient<T: Scalar>(params: &ModelParams<T>, points: &[LabeledPoint]) -> (T, ModelParams<T>) {
    let c = params.n_classes();
    let mut grad = ModelParams::zeros(c);
    if points.is_empty() {
        return (T::zero(), grad);
    }
    let n = T::from_count(points.len());
    let mut total = T::zero();
    for p in points {
        let x = to_scalar::<T>(p);
        let logits = params.logits(x);
        total = total - log_softmax_at(&logits, p.label);
        let probs = softmax(&logits);
        for k in 0..c {
            let indicator = if k == p.label { T::one() } else { T::zero() };
            let dz = (probs[k] - indicator) / n;
            grad.w[0][k] = grad.w[0][k] + x[0] * dz;
            grad.w[1][k] = grad.w[1][k] + x[1] * dz;
            grad.b[k] = grad.b[k] + dz;
        }
    }
    (total / n, grad)
}

pub fn accuracy<T: Scalar>(params: &ModelParams<T>, points: &[LabeledPoint]) -> T {
    if points.is_empty() {
        return T::zero();
    }
    let correct = points.iter().filter(|p| params.predict(to_scalar(p)) == p.label).count();
    T::from_count(correct) / T::from_count(points.len())
}

/// Central differences `(L(θ+ε) - L(θ-ε)) / 2ε` over every coordinate.
pub fn numeric_gradient<T: Scalar>(params: &ModelParams<T>, points: &[LabeledPoint], epsilon: T) -> ModelParams<T> {
    let mut grad = ModelParams::zeros(params.n_classes());
    let mut probe = params.clone();
    for i in 0..params.n_params() {
        let orig = params.get(i);
        probe.set(i, orig + epsilon);
        let up = loss(&probe, points);
        probe.set(i, orig - epsilon);
        let down = loss(&probe, points);
        probe.set(i, orig);
        grad.set(i, (up - down) / (epsilon + epsilon));
    }
    grad
}

/// Max over coordinates of `|g_a - g_n| / max(1e-12, |g_a| + |g_n|)` between
/// a supplied analytic gradient and central finite differences.
pub fn grad_check_against<T: Scalar>(
    params: &ModelParams<T>,
    points: &[LabeledPoint],
    epsilon: T,
    analytic: &ModelParams<T>,
) -> T {
    let numeric = numeric_gradient(params, points, epsilon);
    let floor = T::lit(1e-12);
    (0..params.n_params())
        .map(|i| {
            let (a, n) = (analytic.get(i), numeric.get(i));
            (a - n).abs() / floor.max(a.abs() + n.abs())
        })
        .fold(T::zero(), T::max)
}

pub fn grad_check<T: Scalar>(params: &ModelParams<T>, points: &[LabeledPoint], epsilon: T) -> T {
    let (_, analytic) = loss_and_gradient(params, points);
    grad_check_against(params, points, epsilon, &analytic)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: u64,
    pub val_fraction: f64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Spec(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.epochs < 1 {
            return Err(Error::Spec("epochs must be at least 1".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Spec(format!("val_fraction must be in (0, 1), got {}", self.val_fraction)));
        }
        Ok(())
    }
}

/// Deterministic hold-out: indices shuffled by the `"valsplit"` stream, the
/// first `floor(n * val_fraction)` become validation. Both parts keep the
/// original point order.
pub fn train_val_split(
    points: &[LabeledPoint],
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledPoint>, Vec<LabeledPoint>)> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    SplitMix64::new(derive_component_seed(seed, "valsplit")?).shuffle(&mut idx);
    let n_val = (points.len() as f64 * val_fraction).floor() as usize;
    let mut val_idx = idx[..n_val].to_vec();
    let mut train_idx = idx[n_val..].to_vec();
    val_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok((
        train_idx.into_iter().map(|i| points[i]).collect(),
        val_idx.into_iter().map(|i| points[i]).collect(),
    ))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T = f64> {
    pub params: ModelParams<T>,
    pub train_points: Vec<LabeledPoint>,
    pub val_points: Vec<LabeledPoint>,
}

/// Full-batch gradient descent from zero weights, streaming metrics to `sink`.
///
/// Step 0 records the initial model; step `e` records the model after `e`
/// updates. Each step logs `loss` and `accuracy` for train and, when the
/// hold-out is non-empty, val.
pub fn train_streaming<T: Scalar>(
    points: &[LabeledPoint],
    config: &TrainConfig,
    seed: u64,
    sink: &mut dyn FnMut(MetricRecord) -> Result<()>,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    let n_classes = points.iter().map(|p| p.label + 1).max().unwrap_or(0);
    if n_classes < 2 {
        return Err(Error::Data("need points from at least two classes".into()));
    }
    let (train_points, val_points) = train_val_split(points, config.val_fraction, seed)?;
    for class in 0..n_classes {
        if !train_points.iter().any(|p| p.label == class) {
            return Err(Error::Data(format!("class {class} has no training points")));
        }
    }

    let lr = T::lit(config.learning_rate);
    let mut params = ModelParams::<T>::zeros(n_classes);
    let mut log = |step: u64, params: &ModelParams<T>, train_loss: T| -> Result<()> {
        sink(MetricRecord::new(step, step, Split::Train, "loss", train_loss.to_f64_lossy()))?;
        sink(MetricRecord::new(step, step, Split::Train, "accuracy", accuracy(params, &train_points).to_f64_lossy()))?;
        if !val_points.is_empty() {
            sink(MetricRecord::new(step, step, Split::Val, "loss", loss(params, &val_points).to_f64_lossy()))?;
            sink(MetricRecord::new(step, step, Split::Val, "accuracy", accuracy(params, &val_points).to_f64_lossy()))?;
        }
        Ok(())
    };

    let (mut current_loss, mut grad) = loss_and_gradient(&params, &train_points);
    log(0, &params, current_loss)?;
    for epoch in 1..=config.epochs {
        for i in 0..params.n_params() {
            params.set(i, params.get(i) - lr * grad.get(i));
        }
        if !params.is_finite() {
            return Err(Error::Data(format!("training diverged at epoch {epoch}; lower the learning rate")));
        }
        (current_loss, grad) = loss_and_gradient(&params, &train_points);
        log(epoch, &params, current_loss)?;
    }
    Ok(TrainOutcome {
        params,
        train_points,
        val_points,
    })
}

/// Trains and returns the final parameters with every logged record.
pub fn train<T: Scalar>(
    points: &[LabeledPoint],
    config: &TrainConfig,
    seed: u64,
) -> Result<(ModelParams<T>, Vec<MetricRecord>)> {
    let mut records = Vec::new();
    let outcome = train_streaming(points, config, seed, &mut |r| {
        records.push(r);
        Ok(())
    })?;
    Ok((outcome.params, records))
}

/// Lattice coordinate `(x_col, y_row)` of a `resolution × resolution` grid spanning `bounds`.
pub fn lattice_point(bounds: &Bounds, resolution: usize, row: usize, col: usize) -> [f64; 2] {
    let step = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (resolution - 1) as f64;
    [step(bounds.xmin, bounds.xmax, col), step(bounds.ymin, bounds.ymax, row)]
}

/// Predicted class at every lattice point, row-major with row 0 at `ymin`
/// and column 0 at `xmin`.
pub fn predict_grid<T: Scalar>(params: &ModelParams<T>, bounds: &Bounds, resolution: usize) -> Result<Vec<usize>> {
    bounds.validate()?;
    if resolution < 2 {
        return Err(Error::Spec(format!("resolution must be at least 2, got {resolution}")));
    }
    let mut grid = Vec::with_capacity(resolution * resolution);
    for row in 0..resolution {
        for col in 0..resolution {
            let [x, y] = lattice_point(bounds, resolution, row, col);
            grid.push(params.predict([T::lit(x), T::lit(y)]));
        }
    }
    Ok(grid)
}

/// Bounding box of the points, padded by 10% on each side.
pub fn bounds_of(points: &[LabeledPoint]) -> Bounds {
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        xmin = xmin.min(p.x[0]);
        xmax = xmax.max(p.x[0]);
        ymin = ymin.min(p.x[1]);
        ymax = ymax.max(p.x[1]);
    }
    if !(xmax > xmin) {
        (xmin, xmax) = (xmin - 1.0, xmin + 1.0);
    }
    if !(ymax > ymin) {
        (ymin, ymax) = (ymin - 1.0, ymin + 1.0);
    }
    let (px, py) = (0.1 * (xmax - xmin), 0.1 * (ymax - ymin));
    Bounds {
        xmin: xmin - px,
        xmax: xmax + px,
        ymin: ymin - py,
        ymax: ymax + py,
    }
}

pub fn evaluate_confusion<T: Scalar>(params: &ModelParams<T>, points: &[LabeledPoint]) -> Result<ConfusionMatrix> {
    let truth: Vec<usize> = points.iter().map(|p| p.label).collect();
    let predicted: Vec<usize> = points.iter().map(|p| params.predict(to_scalar(p))).collect();
    confusion_matrix(&truth, &predicted, params.n_classes())
}
