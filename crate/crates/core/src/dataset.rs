use crate::error::{Error, Result};

/// A numeric dataset ready for training or scoring.
///
/// Rows are stored row-major and already carry the trailing constant-one
/// bias coordinate, so `dim()` is the length of `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    dim: usize,
    groups: Vec<u8>,
    labels: Vec<u8>,
    feature_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from rows without the bias column; the bias is appended.
    pub fn from_rows(rows: &[Vec<f64>], groups: Vec<u8>, labels: Vec<u8>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        let names = (0..width).map(|j| format!("x{j}")).collect();
        let mut flat = Vec::with_capacity(rows.len() * width);
        for r in rows {
            if r.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    actual: r.len(),
                });
            }
            flat.extend_from_slice(r);
        }
        Self::from_flat(flat, width, groups, labels, names)
    }

    /// `raw` holds `n * width` values without the bias column.
    pub fn from_flat(
        raw: Vec<f64>,
        width: usize,
        groups: Vec<u8>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = groups.len();
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: labels.len(),
            });
        }
        if raw.len() != n * width {
            return Err(Error::DimensionMismatch {
                expected: n * width,
                actual: raw.len(),
            });
        }
        if feature_names.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                actual: feature_names.len(),
            });
        }
        if groups.iter().chain(&labels).any(|&v| v > 1) {
            return Err(Error::InvalidArgument("groups and labels must be 0 or 1".into()));
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("features"));
        }
        let dim = width + 1;
        let mut features = Vec::with_capacity(n * dim);
        if width == 0 {
            features.resize(n, 1.0);
        } else {
            for row in raw.chunks_exact(width) {
                features.extend_from_slice(row);
                features.push(1.0);
            }
        }
        Ok(Dataset {
            features,
            dim,
            groups,
            labels,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Feature dimension including the bias coordinate.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Bias-augmented feature vector of row `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.dim)
    }

    pub fn group(&self, i: usize) -> u8 {
        self.groups[i]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn groups(&self) -> &[u8] {
        &self.groups
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Names of the non-bias features.
    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() + 1 != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim - 1,
                actual: names.len(),
            });
        }
        self.feature_names = names;
        Ok(self)
    }

    /// Rows selected by `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            features,
            dim: self.dim,
            groups: idx.iter().map(|&i| self.groups[i]).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bias_is_appended() {
        let d = Dataset::from_rows(&[vec![2.0, 3.0], vec![4.0, 5.0]], vec![0, 1], vec![1, 0]).unwrap();
        assert_eq!(d.dim(), 3);
        assert_eq!(d.row(1), &[4.0, 5.0, 1.0]);
        assert_eq!(d.subset(&[1]).row(0), &[4.0, 5.0, 1.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Dataset::from_rows(&[vec![1.0], vec![1.0, 2.0]], vec![0, 1], vec![0, 1]).is_err());
        assert!(Dataset::from_rows(&[vec![1.0]], vec![2], vec![0]).is_err());
        assert!(Dataset::from_rows(&[vec![f64::NAN]], vec![0], vec![0]).is_err());
    }
}
