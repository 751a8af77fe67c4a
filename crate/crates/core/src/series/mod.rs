//! Activity time series: shape clustering, autoregressive baselines and the
//! truncate-fit-predict experiment.

mod ar;
mod ksc;
mod predict;

pub use ar::{ar_fit, ar_predict, ArFit};
pub use ksc::{
    hartigan_from_costs, hartigan_index, ksc_cluster, ksc_distance, representatives,
    select_k_hartigan, silhouette, ClusterModel, HartiganRow, KscDistance, KscOptions,
    HARTIGAN_RESTARTS, HARTIGAN_THRESHOLD,
};
pub use predict::{predict_experiment, ArmReport, PredictReport};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default bin width in hours.
pub const DEFAULT_BIN_HOURS: f64 = 0.5;

/// Counts per time bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSeries")]
pub struct TimeSeries {
    values: Vec<f64>,
    bin_width: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSeries {
    values: Vec<f64>,
    #[serde(default = "default_bin")]
    bin_width: f64,
}

fn default_bin() -> f64 {
    DEFAULT_BIN_HOURS
}

impl TryFrom<RawSeries> for TimeSeries {
    type Error = Error;
    fn try_from(r: RawSeries) -> Result<Self> {
        Self::new(r.values, r.bin_width)
    }
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, bin_width: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("empty series"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite value at index {i}")));
        }
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(invalid(format!("bin width must be positive, got {bin_width}")));
        }
        Ok(Self { values, bin_width })
    }

    /// Series with the default half-hour bins.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::new(values, DEFAULT_BIN_HOURS)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Sub-series `[start, end)` with the same bin width.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(invalid(format!("bad slice {start}..{end} of {}", self.len())));
        }
        Self::new(self.values[start..end].to_vec(), self.bin_width)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(TimeSeries::new(vec![], 0.5).is_err());
        assert!(TimeSeries::new(vec![1.0, f64::NAN], 0.5).is_err());
        assert!(TimeSeries::new(vec![1.0], 0.0).is_err());
        let s: TimeSeries = serde_json::from_str(r#"{"values":[1,2]}"#).unwrap();
        assert_eq!(s.bin_width(), 0.5);
        assert!(serde_json::from_str::<TimeSeries>(r#"{"values":[]}"#).is_err());
    }

    #[test]
    fn slicing() {
        let s = TimeSeries::from_values(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.slice(1, 3).unwrap().values(), &[2.0, 3.0]);
        assert!(s.slice(2, 2).is_err());
        assert!((s.norm() - 14f64.sqrt()).abs() < 1e-15);
    }
}
