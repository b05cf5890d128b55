use crate::scalar::Scalar;

/// Welford's online mean and variance accumulator.
///
/// `mean += (x - mean) / n; m2 += (x - mean_old) * (x - mean_new)`.
/// Variance is the population estimator `m2 / n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Welford<T = f64> {
    count: u64,
    mean: T,
    m2: T,
}

impl<T: Scalar> Default for Welford<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Welford<T> {
    pub fn new() -> Self {
        Self {
            count: 0,
            mean: T::zero(),
            m2: T::zero(),
        }
    }

    pub fn push(&mut self, x: T) {
        self.count += 1;
        let n = T::from_u64(self.count).expect("count fits scalar");
        let delta = x - self.mean;
        self.mean = self.mean + delta / n;
        self.m2 = self.m2 + delta * (x - self.mean);
    }

    /// Combines two accumulators with the pairwise (Chan et al.) update.
    pub fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let (na, nb, n) = (
            T::from_u64(self.count).unwrap(),
            T::from_u64(other.count).unwrap(),
            T::from_u64(count).unwrap(),
        );
        let delta = other.mean - self.mean;
        Self {
            count,
            mean: self.mean + delta * nb / n,
            m2: self.m2 + other.m2 + delta * delta * na * nb / n,
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    pub fn population_variance(&self) -> T {
        if self.count == 0 {
            return T::zero();
        }
        (self.m2 / T::from_u64(self.count).unwrap()).max(T::zero())
    }

    pub fn population_std(&self) -> T {
        self.population_variance().sqrt()
    }
}

impl<T: Scalar> Extend<T> for Welford<T> {
    fn extend<I: IntoIterator<Item = T>>(&mut self, iter: I) {
        for x in iter {
            self.push(x);
        }
    }
}

impl<T: Scalar> FromIterator<T> for Welford<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut w = Self::new();
        w.extend(iter);
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn two_pass(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    }

    #[test]
    fn matches_two_pass_oracle() {
        let mut rng = SplitMix64::new(11);
        let xs: Vec<f64> = (0..100_000).map(|_| 3.0 + 10.0 * rng.next_unit()).collect();
        let w: Welford = xs.iter().copied().collect();
        let (mean, std) = two_pass(&xs);
        assert!(((w.mean() - mean) / mean).abs() < 1e-10);
        assert!(((w.population_std() - std) / std).abs() < 1e-10);
    }

    #[test]
    fn constant_and_pair() {
        let w: Welford = [1.0].into_iter().collect();
        assert_eq!((w.mean(), w.population_std()), (1.0, 0.0));
        let w: Welford = [0.0, 1.0].into_iter().collect();
        assert_eq!((w.mean(), w.population_std()), (0.5, 0.5));
        let w: Welford<f32> = [0.0f32, 1.0].into_iter().collect();
        assert_eq!((w.mean(), w.population_std()), (0.5, 0.5));
    }

    #[test]
    fn merge_equals_sequential() {
        let mut rng = SplitMix64::new(5);
        let xs: Vec<f64> = (0..1000).map(|_| rng.next_unit()).collect();
        let all: Welford = xs.iter().copied().collect();
        let left: Welford = xs[..313].iter().copied().collect();
        let right: Welford = xs[313..].iter().copied().collect();
        let merged = left.merge(&right);
        assert_eq!(merged.count(), all.count());
        assert!((merged.mean() - all.mean()).abs() < 1e-14);
        assert!((merged.population_variance() - all.population_variance()).abs() < 1e-14);
        assert_eq!(Welford::<f64>::new().merge(&all), all);
    }
}
