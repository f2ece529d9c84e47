use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Storage precision of the feature payload on disk.
///
/// Values are always held in memory as `f64`; a dataset tagged `F32` only
/// contains values that are exactly representable in single precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl Precision {
    pub fn byte_width(self) -> usize {
        match self {
            Precision::F32 => 4,
            Precision::F64 => 8,
        }
    }
}

/// A dense feature matrix with integer class labels.
///
/// Invariants enforced at construction: `n >= 1`, `d >= 1`, every label is
/// `< n_classes`, all features are finite, and the row count of the features
/// matches the number of labels.
#[derive(Debug, Clone)]
pub struct FeatureDataset {
    name: String,
    features: Array2<f64>,
    labels: Vec<usize>,
    n_classes: usize,
    precision: Precision,
}

impl PartialEq for FeatureDataset {
    // The name is an identifier, not content.
    fn eq(&self, other: &Self) -> bool {
        self.n_classes == other.n_classes
            && self.precision == other.precision
            && self.labels == other.labels
            && self.features.shape() == other.features.shape()
            && self
                .features
                .iter()
                .zip(other.features.iter())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl FeatureDataset {
    pub fn new(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self> {
        let ds = FeatureDataset {
            name: name.into(),
            features,
            labels,
            n_classes,
            precision: Precision::F64,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Builds a dataset whose class count is inferred as `max(label) + 1`.
    pub fn from_rows(name: impl Into<String>, rows: &[Vec<f64>], labels: &[usize]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Validation("ragged feature rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let features = Array2::from_shape_vec((n, d), flat)
            .map_err(|e| Error::Validation(e.to_string()))?;
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(name, features, labels.to_vec(), n_classes)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let (n, d) = self.features.dim();
        if n == 0 {
            return Err(Error::Validation(format!("dataset `{}` has no rows", self.name)));
        }
        if d == 0 {
            return Err(Error::Validation(format!(
                "dataset `{}` has zero feature dimensions",
                self.name
            )));
        }
        if self.labels.len() != n {
            return Err(Error::Validation(format!(
                "dataset `{}`: {} feature rows but {} labels",
                self.name,
                n,
                self.labels.len()
            )));
        }
        if let Some((i, &y)) = self
            .labels
            .iter()
            .enumerate()
            .find(|(_, &y)| y >= self.n_classes)
        {
            return Err(Error::Validation(format!(
                "dataset `{}`: label {} at row {} is not below the class count {}",
                self.name, y, i, self.n_classes
            )));
        }
        if let Some(pos) = self.features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "dataset `{}`: non-finite feature at row {}, column {}",
                self.name,
                pos / d,
                pos % d
            )));
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Re-tags the dataset for single precision storage, rounding every
    /// feature to the nearest `f32`.
    pub fn into_f32(mut self) -> Self {
        self.features.mapv_inplace(|v| v as f32 as f64);
        self.precision = Precision::F32;
        self
    }

    pub fn into_f64(mut self) -> Self {
        self.precision = Precision::F64;
        self
    }

    pub(crate) fn from_parts_unchecked(
        name: String,
        features: Array2<f64>,
        labels: Vec<usize>,
        n_classes: usize,
        precision: Precision,
    ) -> Self {
        FeatureDataset {
            name,
            features,
            labels,
            n_classes,
            precision,
        }
    }

    /// Rows at `indices`, in the given order. The class count is preserved
    /// even when the subset lacks some classes.
    pub fn select(&self, indices: &[usize]) -> Result<FeatureDataset> {
        if indices.is_empty() {
            return Err(Error::Contract(format!(
                "empty selection from dataset `{}`",
                self.name
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n()) {
            return Err(Error::Contract(format!(
                "row index {} out of range for dataset `{}` with {} rows",
                bad,
                self.name,
                self.n()
            )));
        }
        Ok(FeatureDataset {
            name: self.name.clone(),
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            precision: self.precision,
        })
    }

    /// Replaces the features, keeping labels and class count.
    pub fn with_features(&self, name: impl Into<String>, features: Array2<f64>) -> Result<Self> {
        let ds = FeatureDataset {
            name: name.into(),
            features,
            labels: self.labels.clone(),
            n_classes: self.n_classes,
            precision: Precision::F64,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &FeatureDataset) -> Result<FeatureDataset> {
        if self.d() != other.d() {
            return Err(Error::Contract(format!(
                "cannot stack datasets with {} and {} dimensions",
                self.d(),
                other.d()
            )));
        }
        let features = ndarray::concatenate(Axis(0), &[self.features.view(), other.features.view()])
            .map_err(|e| Error::Contract(e.to_string()))?;
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(FeatureDataset {
            name: self.name.clone(),
            features,
            labels,
            n_classes: self.n_classes.max(other.n_classes),
            precision: self.precision,
        })
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Classes in `0..C` with no rows.
    pub fn empty_classes(&self) -> Vec<usize> {
        self.class_counts()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(k, _)| k)
            .collect()
    }

    /// Row indices grouped by class.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.n_classes];
        for (i, &y) in self.labels.iter().enumerate() {
            by_class[y].push(i);
        }
        by_class
    }

    /// Fraction of rows carrying the most frequent label.
    pub fn majority_frequency(&self) -> f64 {
        let max = self.class_counts().into_iter().max().unwrap_or(0);
        max as f64 / self.n() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_label_out_of_range() {
        let err = FeatureDataset::new("x", array![[0.0], [1.0]], vec![0, 5], 2).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn rejects_nan_and_empty_dims() {
        assert!(FeatureDataset::new("x", array![[f64::NAN]], vec![0], 1).is_err());
        assert!(FeatureDataset::new("x", Array2::zeros((2, 0)), vec![0, 0], 1).is_err());
        assert!(FeatureDataset::new("x", Array2::zeros((0, 2)), vec![], 1).is_err());
    }

    #[test]
    fn select_keeps_class_count() {
        let ds = FeatureDataset::new("x", array![[0.0], [1.0], [2.0]], vec![0, 1, 2], 3).unwrap();
        let sub = ds.select(&[2, 0]).unwrap();
        assert_eq!(sub.n_classes(), 3);
        assert_eq!(sub.labels(), &[2, 0]);
        assert_eq!(sub.empty_classes(), vec![1]);
    }
}
