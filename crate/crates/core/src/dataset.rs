use crate::error::{ensure_finite, Error, Result};

/// Aligned features and responses for one time series, split chronologically
/// into a training prefix of `train_len` rows and a test suffix.
///
/// Features are stored row-major: row `t` holds `x_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    response: Vec<f64>,
    n_features: usize,
    train_len: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, response: Vec<f64>, n_features: usize, train_len: usize) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::InvalidArgument("at least one feature column required".into()));
        }
        if features.len() != response.len() * n_features {
            return Err(Error::DimensionMismatch {
                expected: response.len() * n_features,
                got: features.len(),
            });
        }
        if train_len > response.len() {
            return Err(Error::InvalidArgument(format!(
                "train_len {train_len} exceeds {} rows",
                response.len()
            )));
        }
        ensure_finite(&features, "features")?;
        ensure_finite(&response, "response")?;
        Ok(Self {
            features,
            response,
            n_features,
            train_len,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], response: Vec<f64>, train_len: usize) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: rows[bad].len(),
            });
        }
        Self::new(rows.concat(), response, d, train_len)
    }

    /// Training length for a chronological split: the first
    /// `ceil(fraction * total)` rows.
    pub fn train_len_for_fraction(total: usize, fraction: f64) -> Result<usize> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::InvalidArgument(format!("train fraction {fraction} outside (0, 1)")));
        }
        Ok((crate::quantile::ceil_tolerant(fraction * total as f64) as usize).min(total))
    }

    pub fn with_train_len(mut self, train_len: usize) -> Result<Self> {
        if train_len > self.len() {
            return Err(Error::InvalidArgument(format!(
                "train_len {train_len} exceeds {} rows",
                self.len()
            )));
        }
        self.train_len = train_len;
        Ok(self)
    }

    /// Drops every test row after the first `test_len`.
    pub fn truncate_test(&self, test_len: usize) -> Self {
        let keep = (self.train_len + test_len).min(self.len());
        Self {
            features: self.features[..keep * self.n_features].to_vec(),
            response: self.response[..keep].to_vec(),
            n_features: self.n_features,
            train_len: self.train_len,
        }
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn train_len(&self) -> usize {
        self.train_len
    }

    pub fn test_len(&self) -> usize {
        self.len() - self.train_len
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.features[t * self.n_features..(t + 1) * self.n_features]
    }

    pub fn y(&self, t: usize) -> f64 {
        self.response[t]
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Copies the selected rows (with repetition) into a row-major block.
    pub fn gather(&self, indices: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let mut x = Vec::with_capacity(indices.len() * self.n_features);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            x.extend_from_slice(self.row(i));
            y.push(self.response[i]);
        }
        (x, y)
    }
}
