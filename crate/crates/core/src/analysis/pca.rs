use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult<T = f64> {
    /// d x k, orthonormal columns.
    pub components: Matrix<T>,
    /// Descending.
    pub eigenvalues: Vec<T>,
    /// n x k projection of the centered data.
    pub projected: Matrix<T>,
    pub column_means: Vec<T>,
}

/// Projects the rows of `x` onto the top-`k` principal axes.
///
/// The sample covariance `Xc^T Xc / (n - 1)` of the column-centered data is
/// diagonalized with cyclic Jacobi rotations. Each component is signed so
/// that its entry of largest magnitude is positive (earliest index on ties).
pub fn pca_project<T: Scalar>(x: &Matrix<T>, k: usize) -> Result<PcaResult<T>> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::Shape(format!("PCA needs at least 2 samples, got {n}")));
    }
    if k == 0 || k > d {
        return Err(Error::Shape(format!("cannot keep {k} components of {d}-dimensional data")));
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Value("PCA input contains non-finite values".into()));
    }

    let nf = T::from_count(n);
    let column_means: Vec<T> = (0..d).map(|j| (0..n).map(|i| x[(i, j)]).sum::<T>() / nf).collect();
    let mut centered = x.clone();
    for i in 0..n {
        for j in 0..d {
            centered[(i, j)] = x[(i, j)] - column_means[j];
        }
    }
    let denom = T::from_count(n - 1);
    let mut cov = Matrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let s = (0..n).map(|i| centered[(i, a)] * centered[(i, b)]).sum::<T>() / denom;
            cov[(a, b)] = s;
            cov[(b, a)] = s;
        }
    }

    let eig = symmetric_eigen(&cov)?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.values[b]
            .partial_cmp(&eig.values[a])
            .expect("finite eigenvalues")
            .then(a.cmp(&b))
    });

    let mut components = Matrix::zeros(d, k);
    let mut eigenvalues = Vec::with_capacity(k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        let mut col = eig.vectors.column(idx);
        let pivot = col
            .iter()
            .enumerate()
            .fold(0, |best, (i, v)| if v.abs() > col[best].abs() { i } else { best });
        if col[pivot] < T::zero() {
            col.iter_mut().for_each(|v| *v = -*v);
        }
        for (r, v) in col.into_iter().enumerate() {
            components[(r, c)] = v;
        }
        eigenvalues.push(eig.values[idx]);
    }
    let projected = centered.matmul(&components)?;
    Ok(PcaResult {
        components,
        eigenvalues,
        projected,
        column_means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn rank_one_diagonal() {
        let x = Matrix::from_rows(&[vec![1.0, 1.0], vec![-1.0, -1.0], vec![2.0, 2.0], vec![-2.0, -2.0]]).unwrap();
        let pca = pca_project(&x, 2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((pca.components[(0, 0)] - h).abs() < 1e-10);
        assert!((pca.components[(1, 0)] - h).abs() < 1e-10);
        assert!(pca.eigenvalues[1].abs() < 1e-10);
        // total variance 2 * (1+1+4+4)/3
        assert!((pca.eigenvalues[0] - 20.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn axis_aligned_data_gives_identity_axes() {
        let x = Matrix::from_rows(&[vec![3.0, 0.0], vec![-3.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]]).unwrap();
        let pca = pca_project(&x, 2).unwrap();
        assert_eq!(pca.components, Matrix::identity(2));
        assert!(pca.eigenvalues[0] > pca.eigenvalues[1]);
    }

    #[test]
    fn full_rank_preserves_trace() {
        let mut rng = SplitMix64::new(8);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| (0..4).map(|j| rng.next_unit() * (j + 1) as f64).collect()).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let pca = pca_project(&x, 4).unwrap();
        let total: f64 = (0..4)
            .map(|j| {
                let col = x.column(j);
                let m = col.iter().sum::<f64>() / 30.0;
                col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 29.0
            })
            .sum();
        assert!((pca.eigenvalues.iter().sum::<f64>() - total).abs() < 1e-8);
        assert!(pca.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!((pca.projected.rows(), pca.projected.cols()), (30, 4));
    }

    #[test]
    fn errors() {
        let one = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(pca_project(&one, 2), Err(Error::Shape(_))));
        let x = Matrix::from_rows(&[vec![1.0, f64::NAN], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(pca_project(&x, 2), Err(Error::Value(_))));
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(pca_project(&x, 3), Err(Error::Shape(_))));
    }
}
