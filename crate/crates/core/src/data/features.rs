use crate::{Error, Result};

/// Label carried by samples with no class, such as OoD test sets.
pub const UNLABELED: i32 = -1;

/// `N × H` activation-vector features with per-sample labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    classes: usize,
    features: Vec<f32>,
    labels: Vec<i32>,
}

impl FeatureSet {
    pub fn new(dim: usize, classes: usize, features: Vec<f32>, labels: Vec<i32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension(
                "feature dimension must be positive".into(),
            ));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::Dimension(format!(
                "{} labels need {} feature values at H={dim}, got {}",
                labels.len(),
                labels.len() * dim,
                features.len()
            )));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "sample {} feature {} is {}",
                i / dim,
                i % dim,
                features[i]
            )));
        }
        if let Some(i) = labels
            .iter()
            .position(|&y| y != UNLABELED && (y < 0 || y as usize >= classes))
        {
            return Err(Error::format(format!(
                "sample {i} has label {} outside [0, {classes})",
                labels[i]
            )));
        }
        Ok(Self {
            dim,
            classes,
            features,
            labels,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        self.row(i).iter().map(|&x| f64::from(x)).collect()
    }

    pub fn label(&self, i: usize) -> i32 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn raw_features(&self) -> &[f32] {
        &self.features
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> FeatureSet {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        FeatureSet {
            dim: self.dim,
            classes: self.classes,
            features,
            labels,
        }
    }

    /// Labels as class indices; fails on unlabeled samples.
    pub fn class_labels(&self) -> Result<Vec<usize>> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                usize::try_from(y).map_err(|_| {
                    Error::format(format!("sample {i} is unlabeled; training needs labels"))
                })
            })
            .collect()
    }
}
