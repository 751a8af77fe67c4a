//! Small numerical helpers shared across modules: compensated summation,
//! least-squares lines and a power iteration for symmetric operators.

use crate::error::{Error, Result};

/// Neumaier-compensated sum.
pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0_f64;
    let mut c = 0.0_f64;
    for v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Ordinary least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument(
            "line fit needs two equal-length vectors with at least two points".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("line fit with constant abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct PowerIterationOptions {
    /// Relative residual `‖Sv − μv‖ / |μ|` at which iteration stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerIterationOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500_000,
        }
    }
}

/// Dominant eigenvalue of a symmetric nonnegative operator given by `apply`
/// (`out = S v`). Returns the Rayleigh quotient once the residual is small.
pub fn power_iteration<F>(dim: usize, mut apply: F, opts: PowerIterationOptions) -> Result<f64>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if dim == 0 {
        return Err(Error::InvalidMatrix("empty operator".into()));
    }
    let mut v = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut w = vec![0.0; dim];
    let mut mu = 0.0;
    for _ in 0..opts.max_iter {
        apply(&v, &mut w);
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entries".into()));
        }
        mu = dot(&v, &w);
        let res = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - mu * b).powi(2))
            .sum::<f64>()
            .sqrt();
        let wn = norm(&w);
        if wn == 0.0 {
            return Ok(0.0);
        }
        if res <= opts.tol * mu.abs() {
            return Ok(mu);
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / wn;
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        last_estimate: mu,
        last_iterate: v,
    })
}

/// Running sums of `p`, with the last entry pinned to exactly 1.
pub fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = p
        .iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

/// Rand index between two labelings (fraction of agreeing pairs).
pub fn rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut agree = 0usize;
    let mut total = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            total += 1;
            if (a[i] == a[j]) == (b[i] == b[j]) {
                agree += 1;
            }
        }
    }
    agree as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut v = vec![1.0];
        v.extend(std::iter::repeat(1e-16).take(10_000));
        assert!((sum(v) - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn line_fit_exact() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14);
        assert!((f.intercept - 2.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn power_iteration_diagonal() {
        let d = [1.0, 5.0, 2.0];
        let mu = power_iteration(
            3,
            |v, out| {
                for i in 0..3 {
                    out[i] = d[i] * v[i];
                }
            },
            PowerIterationOptions::default(),
        )
        .unwrap();
        assert!((mu - 5.0).abs() < 1e-9);
    }

    #[test]
    fn rand_index_permuted_labels() {
        assert_eq!(rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
        assert!(rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]) < 0.5);
    }
}
