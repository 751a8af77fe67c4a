//! Levenberg–Marquardt least squares and multi-start fitting of the
//! time-varying rate law to an observed activity series.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::RngSeed;
use crate::series::TimeSeries;
use crate::timevarying::{activity_rate, wrap_angle, TimeGrid, TimeVaryingParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub ftol: f64,
    /// Stop when `‖Jᵀr‖∞` falls below this.
    pub gtol: f64,
    pub mu0: f64,
    /// Forward-difference step is `fd_step · (1 + |x|)`.
    pub fd_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            ftol: 1e-10,
            gtol: 1e-10,
            mu0: 1e-3,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ZeroResidual,
    CostChange,
    Gradient,
    /// No damping level lowers the cost any further.
    Stalled,
    MaxIterations,
    /// Normal equations singular even at maximum damping.
    Singular,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    /// Residual sum of squares.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    /// Cost of every accepted iterate, starting with `x0`.
    pub cost_history: Vec<f64>,
}

const MU_MAX: f64 = 1e16;

fn rss(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Forward-difference Jacobian of `f` at `x` given `r = f(x)`.
pub fn fd_jacobian<F>(f: &F, x: &[f64], r: &[f64], step: f64) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut j = DMatrix::zeros(r.len(), x.len());
    let mut xp = x.to_vec();
    for c in 0..x.len() {
        let h = step * (1.0 + x[c].abs());
        xp[c] = x[c] + h;
        let rp = f(&xp);
        xp[c] = x[c];
        for (row, (a, b)) in rp.iter().zip(r).enumerate() {
            j[(row, c)] = (a - b) / h;
        }
    }
    j
}

/// Damped Gauss–Newton: solves `(JᵀJ + μ diag(JᵀJ)) δ = −Jᵀr`, dividing `μ`
/// by 10 after an accepted step and multiplying by 10 after a rejected one.
pub fn lm_minimize<F>(f: F, x0: &[f64], opts: &LmOptions) -> Result<LmOutcome>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut x = x0.to_vec();
    let mut r = f(&x);
    let mut cost = rss(&r);
    if !cost.is_finite() {
        return Err(invalid("residuals are not finite at the starting point"));
    }
    let mut history = vec![cost];
    let finish = |x: Vec<f64>, cost, iterations, stop, history| {
        let converged = matches!(
            stop,
            StopReason::ZeroResidual | StopReason::CostChange | StopReason::Gradient | StopReason::Stalled
        );
        Ok(LmOutcome {
            x,
            cost,
            iterations,
            converged,
            stop,
            cost_history: history,
        })
    };
    if cost == 0.0 {
        return finish(x, cost, 0, StopReason::ZeroResidual, history);
    }
    let n = x.len();
    let mut mu = opts.mu0;
    for it in 0..opts.max_iter {
        let j = fd_jacobian(&f, &x, &r, opts.fd_step);
        let g = j.tr_mul(&DVector::from_column_slice(&r));
        if g.amax() < opts.gtol {
            return finish(x, cost, it, StopReason::Gradient, history);
        }
        let a = j.tr_mul(&j);
        let dmax = a.diagonal().amax();
        loop {
            if mu > MU_MAX {
                let stop = if dmax > 0.0 {
                    StopReason::Stalled
                } else {
                    StopReason::Singular
                };
                return finish(x, cost, it, stop, history);
            }
            let mut m = a.clone();
            for d in 0..n {
                // Floor keeps parameters the residual ignores from making the
                // damped system singular.
                m[(d, d)] += mu * a[(d, d)].max(1e-12 * dmax);
            }
            let Some(delta) = m.cholesky().map(|c| c.solve(&(-&g))) else {
                mu *= 10.0;
                continue;
            };
            let x_new: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            let r_new = f(&x_new);
            let cost_new = rss(&r_new);
            if cost_new.is_finite() && cost_new < cost {
                let rel = (cost - cost_new) / cost;
                x = x_new;
                r = r_new;
                cost = cost_new;
                history.push(cost);
                mu = (mu / 10.0).max(1e-15);
                if rel < opts.ftol || cost == 0.0 {
                    return finish(x, cost, it + 1, StopReason::CostChange, history);
                }
                break;
            }
            mu *= 10.0;
        }
    }
    finish(x, cost, opts.max_iter, StopReason::MaxIterations, history)
}

/// `√Σ(s − s̃)² / √Σ s²`.
pub fn relative_error(observed: &TimeSeries, predicted: &TimeSeries) -> Result<f64> {
    let (s, p) = (observed.values(), predicted.values());
    if s.len() != p.len() {
        return Err(invalid(format!("series lengths differ: {} vs {}", s.len(), p.len())));
    }
    let den = rss(s);
    if den == 0.0 {
        return Err(Error::UndefinedMetric(
            "relative error of an all-zero observed series".into(),
        ));
    }
    let num: f64 = s.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((num / den).sqrt())
}

/// Optimization coordinates `[ln p, ln η, z, ϑ, ln C_p, ln C]`.
pub fn to_transformed(theta: &TimeVaryingParams) -> [f64; 6] {
    [
        theta.p().ln(),
        theta.eta().ln(),
        theta.z(),
        theta.vartheta(),
        theta.c_p().ln(),
        theta.c().ln(),
    ]
}

pub fn from_transformed(u: &[f64]) -> Result<TimeVaryingParams> {
    TimeVaryingParams::new(
        u[0].exp(),
        u[1].exp(),
        u[2],
        wrap_angle(u[3]),
        u[4].exp(),
        u[5].exp(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitProblem {
    pub observed: TimeSeries,
    /// Real hours per model time unit.
    #[serde(default = "default_time_scale")]
    pub time_scale: f64,
    #[serde(default)]
    pub initial_theta: Option<TimeVaryingParams>,
}

fn default_time_scale() -> f64 {
    500.0
}

impl FitProblem {
    pub fn new(observed: TimeSeries) -> Self {
        Self {
            observed,
            time_scale: default_time_scale(),
            initial_theta: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.observed.len() < 12 {
            return Err(invalid(format!(
                "need at least 12 observations to fit six parameters, got {}",
                self.observed.len()
            )));
        }
        if !(self.time_scale > 0.0 && self.time_scale.is_finite()) {
            return Err(invalid("time_scale must be positive"));
        }
        Ok(())
    }
}

/// How residuals are scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// `model − observed`.
    #[default]
    Absolute,
    /// `(model − observed) / |observed|`, with small observations floored
    /// at `1e-3 · max |observed|`. Suited to multiplicative noise.
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Rate evaluations per observation bin (odd, so bin centers stay on
    /// the grid).
    pub substeps: usize,
    pub weighting: Weighting,
    pub lm: LmOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 32,
            seed: 0,
            substeps: 1,
            weighting: Weighting::Absolute,
            lm: LmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub theta: TimeVaryingParams,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Asymptotic standard errors in `[p, eta, z, vartheta, c_p, c]` order;
    /// absent when the normal matrix is singular.
    pub stderr: Option<[f64; 6]>,
    pub restarts_used: usize,
    /// The series carries no usable signal (amplitude driven to zero).
    pub degenerate: bool,
    /// The fitted period exceeds half the observation window.
    pub period_unidentifiable: bool,
}

/// Rate law evaluated at the observation bin centers.
pub fn model_series(
    theta: &TimeVaryingParams,
    len: usize,
    bin_hours: f64,
    time_scale: f64,
    substeps: usize,
) -> Result<Vec<f64>> {
    if substeps == 0 || substeps % 2 == 0 {
        return Err(invalid("substeps must be odd"));
    }
    let obs = TimeGrid::observation(len, bin_hours, time_scale)?;
    let h = obs.step / substeps as f64;
    let fine = TimeGrid::new(0.5 * h, h, len * substeps)?;
    let curve = activity_rate(theta, &fine);
    Ok((0..len)
        .map(|i| curve.values[i * substeps + (substeps - 1) / 2])
        .collect())
}

/// Dominant period of the first differences, in bins; a rough starting
/// value for `C_p`.
fn dominant_period(y: &[f64]) -> Option<f64> {
    let d: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let n = d.len();
    if n < 6 {
        return None;
    }
    let mut best = (0.0, None);
    for m in 3..=n / 2 {
        let w = 2.0 * std::f64::consts::PI * m as f64 / n as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (t, v) in d.iter().enumerate() {
            re += v * (w * t as f64).cos();
            im += v * (w * t as f64).sin();
        }
        let power = re * re + im * im;
        if power > best.0 {
            best = (power, Some(n as f64 / m as f64));
        }
    }
    best.1
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn random_start<R: Rng>(rng: &mut R, period_hint: Option<f64>) -> [f64; 6] {
    let p = log_uniform(rng, 0.1, 5.0);
    let eta = log_uniform(rng, 0.01, 50.0);
    let z = rng.gen_range(-3.0..3.0);
    let vartheta = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
    let c_p = match period_hint {
        Some(cp) => cp * rng.gen_range(0.9..1.1),
        None => log_uniform(rng, 0.005, 0.5),
    };
    let c = log_uniform(rng, 0.001, 10.0);
    [p, eta, z, vartheta, c_p, c]
}

/// Multi-start fit of the rate law to `problem.observed`. Restart 0 starts
/// from `problem.initial_theta` when given; of the random restarts, every
/// other one takes its period near the dominant period of the data. Each
/// start rescales `C` to its least-squares value before optimizing.
pub fn fit_theta(problem: &FitProblem, opts: &FitOptions) -> Result<FitResult> {
    problem.validate()?;
    if opts.restarts == 0 {
        return Err(invalid("restarts must be at least 1"));
    }
    let y = problem.observed.values();
    let n = y.len();
    let bin = problem.observed.bin_width();
    let ts = problem.time_scale;
    let sub = opts.substeps;
    model_series(
        &TimeVaryingParams::new(1.0, 1.0, 0.0, 0.0, 1.0, 1.0)?,
        n,
        bin,
        ts,
        sub,
    )?;
    let window = n as f64 * bin / ts;
    let fallback = problem
        .initial_theta
        .unwrap_or(TimeVaryingParams::new(1.0, 1.0, 0.0, 0.0, window / 4.0, 1.0)?);

    if y.iter().all(|&v| v == 0.0) {
        return Ok(FitResult {
            theta: fallback.with_c(f64::MIN_POSITIVE)?,
            cost: 0.0,
            iterations: 0,
            converged: true,
            stderr: None,
            restarts_used: 0,
            degenerate: true,
            period_unidentifiable: fallback.c_p() > 0.5 * window,
        });
    }

    let y_max = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let weights: Vec<f64> = match opts.weighting {
        Weighting::Absolute => vec![1.0; n],
        Weighting::Relative => y.iter().map(|v| 1.0 / v.abs().max(1e-3 * y_max)).collect(),
    };
    let residual = |u: &[f64]| -> Vec<f64> {
        match from_transformed(u).and_then(|th| model_series(&th, n, bin, ts, sub)) {
            Ok(m) => m.iter().zip(y).zip(&weights).map(|((a, b), w)| (a - b) * w).collect(),
            Err(_) => vec![f64::INFINITY; n],
        }
    };
    let hint = dominant_period(y).map(|bins| bins * bin / ts);
    let seed = RngSeed(opts.seed);

    let runs: Vec<Option<LmOutcome>> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let start = if r == 0 && problem.initial_theta.is_some() {
                fallback.to_array()
            } else {
                let mut rng = seed.stream(r as u64);
                random_start(&mut rng, if r % 2 == 1 { hint } else { None })
            };
            let mut theta = TimeVaryingParams::from_array(start).ok()?;
            // C enters linearly: start from its least-squares value.
            let g = model_series(&theta.with_c(1.0).ok()?, n, bin, ts, sub).ok()?;
            let gg: f64 = g.iter().zip(&weights).map(|(v, w)| (v * w).powi(2)).sum();
            let gy: f64 = g.iter().zip(y).zip(&weights).map(|((a, b), w)| a * b * w * w).sum();
            if gg.is_finite() && gg > 0.0 && gy > 0.0 {
                theta = theta.with_c(gy / gg).ok()?;
            }
            lm_minimize(residual, &to_transformed(&theta), &opts.lm).ok()
        })
        .collect();

    let restarts_used = runs.iter().filter(|r| r.is_some()).count();
    let best = runs
        .into_iter()
        .flatten()
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .ok_or_else(|| Error::NonConvergence {
            iterations: 0,
            last_estimate: f64::NAN,
            last_iterate: Vec::new(),
        })?;

    let theta = from_transformed(&best.x)?;
    let r = residual(&best.x);
    let j = fd_jacobian(&residual, &best.x, &r, opts.lm.fd_step);
    let stderr = if n > 6 {
        j.tr_mul(&j).try_inverse().and_then(|inv| {
            let s2 = best.cost / (n - 6) as f64;
            let mut out = [0.0; 6];
            let values = theta.to_array();
            for i in 0..6 {
                let var = inv[(i, i)] * s2;
                if !(var >= 0.0 && var.is_finite()) {
                    return None;
                }
                // Delta method through the log transforms.
                let d = if matches!(i, 2 | 3) { 1.0 } else { values[i] };
                out[i] = d * var.sqrt();
            }
            Some(out)
        })
    } else {
        None
    };
    let fitted_norm: f64 = r
        .iter()
        .zip(y)
        .zip(&weights)
        .map(|((a, b), w)| (a / w + b).powi(2))
        .sum::<f64>()
        .sqrt();
    let y_norm = rss(y).sqrt();
    Ok(FitResult {
        theta,
        cost: best.cost,
        iterations: best.iterations,
        converged: best.converged,
        stderr,
        restarts_used,
        degenerate: fitted_norm < 1e-6 * y_norm,
        period_unidentifiable: theta.c_p() > 0.5 * window,
    })
}
