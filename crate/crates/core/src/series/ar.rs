use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use super::TimeSeries;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArFit {
    /// `x_t ≈ Σ_j c_j x_{t−j}`, lag 1 first.
    pub coefficients: Vec<f64>,
    /// The lagged design was rank deficient and a small ridge was added.
    pub degenerate: bool,
}

/// Least-squares autoregression without intercept.
pub fn ar_fit(series: &TimeSeries, order: usize) -> Result<ArFit> {
    let x = series.values();
    if order == 0 {
        return Err(invalid("AR order must be at least 1"));
    }
    if x.len() <= 2 * order {
        return Err(invalid(format!(
            "AR({order}) needs more than {} points, got {}",
            2 * order,
            x.len()
        )));
    }
    let rows = x.len() - order;
    let design = DMatrix::from_fn(rows, order, |r, c| x[order + r - 1 - c]);
    let target = DVector::from_iterator(rows, x[order..].iter().copied());
    let mut normal = design.tr_mul(&design);
    let rhs = design.tr_mul(&target);

    let eig = SymmetricEigen::new(normal.clone());
    let max = eig.eigenvalues.amax();
    let min = eig.eigenvalues.min();
    let degenerate = !(min > 1e-12 * max);
    if degenerate {
        let mean_diag = normal.trace() / order as f64;
        let ridge = 1e-8 * mean_diag.max(1.0);
        for d in 0..order {
            normal[(d, d)] += ridge;
        }
    }
    let coef = normal
        .cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| invalid("AR normal equations are not positive definite"))?;
    Ok(ArFit {
        coefficients: coef.iter().copied().collect(),
        degenerate,
    })
}

/// Multi-step forecast that feeds predictions back as inputs. Explosive
/// coefficients give geometrically growing output; nothing is clipped.
pub fn ar_predict(coefficients: &[f64], history: &TimeSeries, horizon: usize) -> Result<TimeSeries> {
    let order = coefficients.len();
    let h = history.values();
    if h.len() < order {
        return Err(invalid(format!(
            "history of {} points is shorter than order {order}",
            h.len()
        )));
    }
    if horizon == 0 {
        return Err(invalid("forecast horizon must be at least 1"));
    }
    let mut buf: Vec<f64> = h[h.len() - order..].to_vec();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let n = buf.len();
        let next: f64 = coefficients.iter().enumerate().map(|(j, c)| c * buf[n - 1 - j]).sum();
        buf.push(next);
        out.push(next);
    }
    TimeSeries::new(out, history.bin_width())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(v: Vec<f64>) -> TimeSeries {
        TimeSeries::from_values(v).unwrap()
    }

    #[test]
    fn recovers_geometric_decay() {
        let x: Vec<f64> = (0..40).map(|t| 10.0 * 0.9f64.powi(t)).collect();
        let fit = ar_fit(&ts(x), 1).unwrap();
        assert!((fit.coefficients[0] - 0.9).abs() < 1e-8);
        assert!(!fit.degenerate);
    }

    #[test]
    fn zero_series_is_degenerate() {
        let fit = ar_fit(&ts(vec![0.0; 30]), 3).unwrap();
        assert!(fit.degenerate);
        assert!(fit.coefficients.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn short_series_rejected() {
        assert!(ar_fit(&ts(vec![1.0; 12]), 6).is_err());
        assert!(ar_fit(&ts(vec![1.0; 13]), 0).is_err());
    }

    #[test]
    fn forecasts() {
        let p = ar_predict(&[0.5], &ts(vec![1.0, 8.0]), 3).unwrap();
        assert_eq!(p.values(), &[4.0, 2.0, 1.0]);
        let p = ar_predict(&[0.0, 0.0], &ts(vec![3.0, 8.0]), 4).unwrap();
        assert!(p.values().iter().all(|&v| v == 0.0));
        let p = ar_predict(&[1.1], &ts(vec![1.0]), 3).unwrap();
        assert!((p.values()[2] - 1.331).abs() < 1e-12);
        assert!(ar_predict(&[1.0, 1.0], &ts(vec![1.0]), 3).is_err());
        assert!(ar_predict(&[1.0], &ts(vec![1.0]), 0).is_err());
    }
}
