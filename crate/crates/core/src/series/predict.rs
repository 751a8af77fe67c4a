use serde::Serialize;

use super::{ar_fit, ar_predict, TimeSeries};
use crate::error::{invalid, Result};
use crate::fit::{fit_theta, model_series, relative_error, FitOptions, FitProblem, FitResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmReport {
    pub name: String,
    /// Relative error on the held-out part; absent if the arm failed.
    pub relative_error: Option<f64>,
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forecast: Option<Vec<f64>>,
}

impl ArmReport {
    fn from_forecast(name: &str, observed: &TimeSeries, forecast: Result<Vec<f64>>) -> Self {
        let scored = forecast.and_then(|f| {
            let err = relative_error(observed, &TimeSeries::new(f.clone(), observed.bin_width())?)?;
            Ok((err, f))
        });
        match scored {
            Ok((err, f)) => Self {
                name: name.into(),
                relative_error: Some(err),
                error: None,
                forecast: Some(f),
            },
            Err(e) => Self {
                name: name.into(),
                relative_error: None,
                error: Some(e.to_string()),
                forecast: None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictReport {
    pub train_len: usize,
    pub test_len: usize,
    pub fit: Option<FitResult>,
    /// Rate-law model, AR(6) and AR(39), in that order.
    pub arms: Vec<ArmReport>,
}

impl PredictReport {
    pub fn arm(&self, name: &str) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.name == name)
    }
}

/// Fits the rate law and AR(6)/AR(39) on the leading `train_fraction` of
/// `series` and scores their forecasts of the rest.
pub fn predict_experiment(
    series: &TimeSeries,
    train_fraction: f64,
    time_scale: f64,
    fit_opts: &FitOptions,
) -> Result<PredictReport> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(invalid(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    let n = series.len();
    let train_len = (n as f64 * train_fraction).round() as usize;
    if train_len == 0 || train_len >= n {
        return Err(invalid(format!(
            "train fraction {train_fraction} leaves an empty training or test window"
        )));
    }
    let test_len = n - train_len;
    let train = series.slice(0, train_len)?;
    let test = series.slice(train_len, n)?;

    let mut problem = FitProblem::new(train.clone());
    problem.time_scale = time_scale;
    let fit = fit_theta(&problem, fit_opts);
    let model_forecast = fit.as_ref().map_err(Clone::clone).and_then(|f| {
        let full = model_series(&f.theta, n, series.bin_width(), time_scale, fit_opts.substeps)?;
        Ok(full[train_len..].to_vec())
    });
    let mut arms = vec![ArmReport::from_forecast("model", &test, model_forecast)];
    for order in [6, 39] {
        let forecast = ar_fit(&train, order)
            .and_then(|c| ar_predict(&c.coefficients, &train, test_len))
            .map(|s| s.values().to_vec());
        arms.push(ArmReport::from_forecast(&format!("ar{order}"), &test, forecast));
    }
    Ok(PredictReport {
        train_len,
        test_len,
        fit: fit.ok(),
        arms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_windows() {
        let s = TimeSeries::from_values(vec![1.0; 30]).unwrap();
        let o = FitOptions::default();
        assert!(predict_experiment(&s, 0.0, 500.0, &o).is_err());
        assert!(predict_experiment(&s, 1.0, 500.0, &o).is_err());
        assert!(predict_experiment(&s, 0.999, 500.0, &o).is_err());
    }

    #[test]
    fn failed_arms_are_reported() {
        // 10 training points: too few for the model and both AR orders.
        let s = TimeSeries::from_values((0..30).map(|t| 1.0 + t as f64).collect()).unwrap();
        let r = predict_experiment(&s, 1.0 / 3.0, 500.0, &FitOptions::default()).unwrap();
        assert_eq!(r.train_len, 10);
        assert!(r.arms.iter().all(|a| a.relative_error.is_none() && a.error.is_some()));
    }
}
