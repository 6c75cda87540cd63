use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile;

/// A symmetric interval `[center - half_width, center + half_width]` at
/// miscoverage level `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub center: f64,
    pub half_width: f64,
    pub alpha: f64,
}

impl PredictionInterval {
    pub fn new(center: f64, half_width: f64, alpha: f64) -> Result<Self> {
        if half_width.is_nan() || half_width < 0.0 {
            return Err(Error::InvalidValue(format!("half width {half_width}")));
        }
        if center.is_nan() {
            return Err(Error::InvalidValue("center = NaN".into()));
        }
        check_alpha(alpha)?;
        Ok(Self {
            center,
            half_width,
            alpha,
        })
    }

    pub fn lower(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn width(&self) -> f64 {
        self.upper() - self.lower()
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lower() <= y && y <= self.upper()
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1)")))
    }
}

/// Fixed-capacity FIFO of non-negative residuals.
///
/// Once full, every push evicts the oldest entry, so the length stays at the
/// capacity for the rest of the run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualWindow {
    buffer: VecDeque<f64>,
    capacity: usize,
}

impl ResidualWindow {
    pub fn with_capacity(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("window capacity must be positive".into()));
        }
        Ok(Self {
            buffer: VecDeque::with_capacity(capacity),
            capacity,
        })
    }

    /// Builds a full window from `residuals` (oldest first).
    pub fn from_residuals(residuals: Vec<f64>) -> Result<Self> {
        let mut window = Self::with_capacity(residuals.len())?;
        for r in residuals {
            window.push(r)?;
        }
        Ok(window)
    }

    /// Appends a residual, returning the evicted one when the window was full.
    pub fn push(&mut self, residual: f64) -> Result<Option<f64>> {
        if !(residual.is_finite() && residual >= 0.0) {
            return Err(Error::InvalidValue(format!("residual {residual}")));
        }
        let evicted = if self.buffer.len() == self.capacity {
            self.buffer.pop_front()
        } else {
            None
        };
        self.buffer.push_back(residual);
        Ok(evicted)
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_full(&self) -> bool {
        self.buffer.len() == self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> + '_ {
        self.buffer.iter()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.buffer.iter().copied().collect()
    }

    pub fn quantile(&self, level: f64) -> Result<f64> {
        quantile::empirical_quantile(&self.to_vec(), level)
    }

    pub fn p_value(&self, eps_new: f64) -> Result<f64> {
        quantile::empirical_p_value(&self.to_vec(), eps_new)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_bounds() {
        let pi = PredictionInterval::new(2.0, 0.5, 0.1).unwrap();
        assert_eq!(pi.lower(), 1.5);
        assert_eq!(pi.upper(), 2.5);
        assert_eq!(pi.width(), 1.0);
        assert!(pi.contains(1.5) && pi.contains(2.5) && !pi.contains(2.6));
        assert!(PredictionInterval::new(0.0, -1.0, 0.1).is_err());
        assert!(PredictionInterval::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn window_is_fifo() {
        let mut w = ResidualWindow::from_residuals(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(w.is_full());
        assert_eq!(w.push(4.0).unwrap(), Some(1.0));
        assert_eq!(w.push(5.0).unwrap(), Some(2.0));
        assert_eq!(w.to_vec(), vec![3.0, 4.0, 5.0]);
        assert_eq!(w.len(), 3);
        assert_eq!(w.quantile(1.0).unwrap(), 5.0);
        for r in 6..20 {
            w.push(f64::from(r)).unwrap();
        }
        assert_eq!(w.to_vec(), vec![17.0, 18.0, 19.0]);
        assert_eq!(w.p_value(17.5).unwrap(), 2.0 / 3.0);
        assert!(w.push(-1.0).is_err());
        assert!(w.push(f64::NAN).is_err());
    }
}
