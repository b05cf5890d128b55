use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub n_classes: usize,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(n_classes: usize) -> Self {
        Self {
            n_classes,
            counts: vec![vec![0; n_classes]; n_classes],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes).map(|i| self.counts[i][i]).sum()
    }

    pub fn max_count(&self) -> u64 {
        self.counts.iter().flatten().copied().max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.counts.len() != self.n_classes || self.counts.iter().any(|r| r.len() != self.n_classes) {
            return Err(Error::Shape(format!("counts are not {0}x{0}", self.n_classes)));
        }
        Ok(())
    }
}

pub fn confusion_matrix(true_labels: &[usize], predicted_labels: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if true_labels.len() != predicted_labels.len() {
        return Err(Error::Shape(format!(
            "{} true labels but {} predictions",
            true_labels.len(),
            predicted_labels.len()
        )));
    }
    let mut cm = ConfusionMatrix::zeros(n_classes);
    for (i, (&t, &p)) in true_labels.iter().zip(predicted_labels).enumerate() {
        if t >= n_classes || p >= n_classes {
            return Err(Error::Label(format!(
                "sample {i}: labels ({t}, {p}) outside [0, {n_classes})"
            )));
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

/// Trace over total.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyInput("confusion matrix has no samples".into()));
    }
    Ok(cm.trace() as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let cm = confusion_matrix(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        assert_eq!(accuracy(&cm).unwrap(), 1.0);

        let cm = confusion_matrix(&[0, 0, 1], &[0, 1, 1], 2).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1], vec![0, 1]]);
        assert_eq!(accuracy(&cm).unwrap(), 2.0 / 3.0);

        let cm = confusion_matrix(&[], &[], 4).unwrap();
        assert_eq!(cm, ConfusionMatrix::zeros(4));
        assert!(matches!(accuracy(&cm), Err(Error::EmptyInput(_))));

        let cm = confusion_matrix(&[0, 1], &[1, 0], 2).unwrap();
        assert_eq!(accuracy(&cm).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(confusion_matrix(&[0], &[], 2), Err(Error::Shape(_))));
        assert!(matches!(confusion_matrix(&[0], &[2], 2), Err(Error::Label(_))));
    }
}
