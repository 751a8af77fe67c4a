//! Degree-class mean-field dynamics of the ignorant/active/indifferent/quiet
//! model, integrated with a fixed-step explicit Euler scheme.
//!
//! Per class `k` with drive `D_k = Σ_k' P(k'|k) a_k'`:
//!
//! ```text
//! di/dt = −λ k i D_k
//! da/dt =  αλ k i D_k − β a
//! dr/dt = (1−α) λ k i D_k
//! dq/dt =  β a
//! ```
//!
//! The iteration count of a solve is the efficiency measure used by sweeps, so
//! the step size is fixed for the whole run.

mod predict;
mod sweep;

pub use predict::{
    early_growth, final_prevalence, predict_efficiency_sf, predict_prevalence_scaling,
    predict_tau, ScalingRegime, ScalingReport,
};
pub use sweep::{
    crossings, detect_onset, solve_averaged, sweep_alpha, sweep_theta, AveragedSolve,
    OutbreakRule, Seeding, SweepOptions, SweepPoint,
};

use serde::{Deserialize, Serialize};

use crate::ensemble::{CorrelationKernel, DegreeDistribution, KernelKind};
use crate::error::{invalid, Error, Result};
use crate::numeric;

/// Slack allowed before a fraction counts as having left `[0, 1]`.
pub const INSTABILITY_SLACK: f64 = 1e-6;

/// Activation `α`, contact `λ` and quiescence `β` probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    alpha: f64,
    lambda: f64,
    beta: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    alpha: f64,
    lambda: f64,
    beta: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        ModelParams::new(r.alpha, r.lambda, r.beta)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            alpha: p.alpha,
            lambda: p.lambda,
            beta: p.beta,
        }
    }
}

impl ModelParams {
    pub fn new(alpha: f64, lambda: f64, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(invalid(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(invalid(format!("lambda must lie in [0, 1], got {lambda}")));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(invalid(format!("beta must lie in (0, 1], got {beta}")));
        }
        Ok(Self {
            alpha,
            lambda,
            beta,
        })
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    /// `ρ = αλ/β`.
    pub fn rho(&self) -> f64 {
        self.alpha * self.lambda / self.beta
    }
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(alpha, self.lambda, self.beta)
    }
}

/// Aggregate fractions `Σ_k P(k) x_k` at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregateSample {
    pub t: f64,
    pub i: f64,
    pub a: f64,
    pub r: f64,
    pub q: f64,
}

/// Per-class fractions of ignorant, active, indifferent and quiet vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeStateField {
    pub i: Vec<f64>,
    pub a: Vec<f64>,
    pub r: Vec<f64>,
    pub q: Vec<f64>,
    pub time: f64,
}

impl DegreeStateField {
    /// One seed vertex among `n`, spread over the classes in proportion to
    /// `P(k)`: `a_k = 1/n` everywhere, aggregate seed mass `1/n`.
    pub fn uniform_seed(dist: &DegreeDistribution, n: f64) -> Result<Self> {
        if !(n >= 1.0) {
            return Err(invalid(format!("population must be >= 1, got {n}")));
        }
        Ok(Self::from_active(vec![1.0 / n; dist.len()]))
    }

    /// One seed vertex among `n` placed in class `class`:
    /// `a_k = min(1, 1/(n P(k)))` there, zero elsewhere.
    pub fn class_seed(dist: &DegreeDistribution, class: usize, n: f64) -> Result<Self> {
        if class >= dist.len() {
            return Err(invalid(format!("class index {class} out of range")));
        }
        if !(n >= 1.0) {
            return Err(invalid(format!("population must be >= 1, got {n}")));
        }
        let mut a = vec![0.0; dist.len()];
        a[class] = (1.0 / (n * dist.probs()[class])).min(1.0);
        Ok(Self::from_active(a))
    }

    /// Active fractions as given, the rest ignorant.
    pub fn from_active(a: Vec<f64>) -> Self {
        let n = a.len();
        Self {
            i: a.iter().map(|x| 1.0 - x).collect(),
            a,
            r: vec![0.0; n],
            q: vec![0.0; n],
            time: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.i.len()
    }
    pub fn is_empty(&self) -> bool {
        self.i.is_empty()
    }

    /// Checks conservation (1e-9) and bounds (1e-12).
    pub fn validate(&self) -> Result<()> {
        let n = self.i.len();
        if self.a.len() != n || self.r.len() != n || self.q.len() != n {
            return Err(invalid("state vectors differ in length"));
        }
        for k in 0..n {
            let xs = [self.i[k], self.a[k], self.r[k], self.q[k]];
            if xs.iter().any(|x| !(-1e-12..=1.0 + 1e-12).contains(x)) {
                return Err(invalid(format!("class {k}: fraction outside [0, 1]")));
            }
            if (xs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(invalid(format!("class {k}: fractions do not sum to 1")));
            }
        }
        Ok(())
    }

    pub fn aggregate(&self, dist: &DegreeDistribution) -> AggregateSample {
        let p = dist.probs();
        AggregateSample {
            t: self.time,
            i: numeric::dot(p, &self.i),
            a: numeric::dot(p, &self.a),
            r: numeric::dot(p, &self.r),
            q: numeric::dot(p, &self.q),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveOptions {
    pub dt: f64,
    /// Stop once the aggregate active fraction falls below this.
    pub tol: f64,
    pub max_steps: usize,
    /// Record the aggregate state every this many steps (0 = endpoints only).
    pub sample_every: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            dt: 0.01,
            tol: 1e-7,
            max_steps: 50_000_000,
            sample_every: 1,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 0.1) {
            return Err(invalid(format!("dt must lie in (0, 0.1], got {}", self.dt)));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    /// Final aware fraction `r(∞) + q(∞)`.
    pub prevalence: f64,
    pub iterations: usize,
    /// `1 / iterations`.
    pub efficiency: f64,
    pub dt: f64,
    pub trajectory: Vec<AggregateSample>,
    #[serde(skip)]
    pub final_state: DegreeStateField,
}

/// Reciprocal iteration count.
pub fn efficiency_from_iterations(iterations: usize) -> Result<f64> {
    if iterations == 0 {
        return Err(invalid("efficiency needs at least one iteration"));
    }
    Ok(1.0 / iterations as f64)
}

/// Applies the increments for one class and checks the result.
#[allow(clippy::too_many_arguments)]
#[inline]
fn update_class(
    s: &mut DegreeStateField,
    k: usize,
    noticed: f64,
    alpha: f64,
    beta_dt: f64,
    step: usize,
    dt: f64,
) -> Result<()> {
    let mut noticed = noticed;
    let i_new = s.i[k] - noticed;
    if i_new < -INSTABILITY_SLACK {
        return Err(Error::Instability {
            step,
            time: s.time,
            value: i_new,
            dt,
        });
    }
    if i_new < 0.0 {
        // Clamp by capping the outflow so the four fractions still sum to one.
        noticed = s.i[k];
    }
    let quiet = beta_dt * s.a[k];
    s.i[k] -= noticed;
    // Also flushes subnormals, which slow the loop by an order of magnitude.
    if s.i[k] < f64::MIN_POSITIVE {
        s.i[k] = 0.0;
    }
    s.a[k] += alpha * noticed - quiet;
    s.r[k] += (1.0 - alpha) * noticed;
    s.q[k] += quiet;
    for v in [s.a[k], s.r[k], s.q[k]] {
        if !(-INSTABILITY_SLACK..=1.0 + INSTABILITY_SLACK).contains(&v) || !v.is_finite() {
            return Err(Error::Instability {
                step,
                time: s.time,
                value: v,
                dt,
            });
        }
    }
    s.a[k] = if s.a[k] < f64::MIN_POSITIVE { 0.0 } else { s.a[k].min(1.0) };
    Ok(())
}

/// One Euler step of the general system using the kernel's drive.
pub fn step_naive(
    kernel: &CorrelationKernel,
    params: ModelParams,
    state: &mut DegreeStateField,
    dt: f64,
    step: usize,
    drive: &mut [f64],
) -> Result<()> {
    kernel.apply(&state.a, drive);
    let degrees = kernel.base().degrees();
    let (alpha, lambda, beta) = (params.alpha, params.lambda, params.beta);
    for k in 0..state.len() {
        let noticed = dt * lambda * degrees[k] as f64 * state.i[k] * drive[k];
        update_class(state, k, noticed, alpha, beta * dt, step, dt)?;
    }
    state.time += dt;
    Ok(())
}

/// One Euler step written with the θ-split drive
/// `(1−θ) Σ_k' q(k') a_k' + θ a_k`.
pub fn step_correlated(
    kernel: &CorrelationKernel,
    params: ModelParams,
    state: &mut DegreeStateField,
    dt: f64,
    step: usize,
) -> Result<()> {
    let theta = kernel.theta();
    let degrees = kernel.base().degrees();
    let mixed = numeric::dot(kernel.excess(), &state.a);
    let (alpha, lambda, beta) = (params.alpha, params.lambda, params.beta);
    for k in 0..state.len() {
        // a_k is still the pre-step value here: classes only update themselves.
        let lk = dt * lambda * degrees[k] as f64 * state.i[k];
        let noticed = lk * (1.0 - theta) * mixed + lk * theta * state.a[k];
        update_class(state, k, noticed, alpha, beta * dt, step, dt)?;
    }
    state.time += dt;
    Ok(())
}

fn run<F>(
    kernel: &CorrelationKernel,
    init: &DegreeStateField,
    opts: &SolveOptions,
    mut step: F,
) -> Result<SolveReport>
where
    F: FnMut(&mut DegreeStateField, usize) -> Result<()>,
{
    opts.validate()?;
    let dist = kernel.base();
    if init.len() != dist.len() {
        return Err(invalid(format!(
            "initial state has {} classes, kernel has {}",
            init.len(),
            dist.len()
        )));
    }
    init.validate()?;
    let mut state = init.clone();
    let mut trajectory = vec![state.aggregate(dist)];
    let mut iterations = 0usize;
    loop {
        if iterations >= opts.max_steps {
            return Err(Error::NonConvergence {
                iterations,
                last_estimate: state.aggregate(dist).a,
                last_iterate: state.a.clone(),
            });
        }
        step(&mut state, iterations)?;
        iterations += 1;
        // Only the active mass is needed every step.
        let done = numeric::dot(dist.probs(), &state.a) < opts.tol;
        if done || (opts.sample_every > 0 && iterations % opts.sample_every == 0) {
            trajectory.push(state.aggregate(dist));
        }
        if done {
            let agg = state.aggregate(dist);
            return Ok(SolveReport {
                prevalence: agg.r + agg.q,
                iterations,
                efficiency: 1.0 / iterations as f64,
                dt: opts.dt,
                trajectory,
                final_state: state,
            });
        }
    }
}

/// Euler integration of the general system until the active fraction falls
/// below `opts.tol`.
pub fn solve_naive(
    kernel: &CorrelationKernel,
    params: ModelParams,
    init: &DegreeStateField,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let mut drive = vec![0.0; kernel.len()];
    let dt = opts.dt;
    run(kernel, init, opts, |s, it| {
        step_naive(kernel, params, s, dt, it, &mut drive)
    })
}

/// Euler integration of the θ-mixing system in its split form.
pub fn solve_correlated(
    kernel: &CorrelationKernel,
    params: ModelParams,
    init: &DegreeStateField,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    if !matches!(kernel.kind(), KernelKind::ThetaMix { .. }) {
        return Err(invalid("solve_correlated needs a theta-mixing kernel"));
    }
    let dt = opts.dt;
    run(kernel, init, opts, |s, it| {
        step_correlated(kernel, params, s, dt, it)
    })
}

/// Dispatches on the kernel kind.
pub fn solve(
    kernel: &CorrelationKernel,
    params: ModelParams,
    init: &DegreeStateField,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    match kernel.kind() {
        KernelKind::Uncorrelated => solve_naive(kernel, params, init, opts),
        KernelKind::ThetaMix { .. } => solve_correlated(kernel, params, init, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(1.1, 0.5, 0.5).is_err());
        assert!(ModelParams::new(0.5, 0.5, 0.0).is_err());
        let p = ModelParams::new(0.5, 0.4, 0.3).unwrap();
        assert!((p.rho() - 0.5 * 0.4 / 0.3).abs() < 1e-15);
    }

    #[test]
    fn params_json_roundtrip_and_validation() {
        let p = ModelParams::new(0.5, 0.4, 0.3).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<ModelParams>(&s).unwrap(), p);
        assert!(serde_json::from_str::<ModelParams>(r#"{"alpha":2,"lambda":1,"beta":1}"#).is_err());
        assert!(serde_json::from_str::<ModelParams>(
            r#"{"alpha":0.2,"lambda":1,"beta":1,"gamma":1}"#
        )
        .is_err());
    }

    #[test]
    fn efficiency_definition() {
        assert_eq!(efficiency_from_iterations(100).unwrap(), 0.01);
        assert!(efficiency_from_iterations(0).is_err());
    }

    #[test]
    fn oversized_step_reports_instability() {
        let d = DegreeDistribution::power_law(2.5, 1, 473).unwrap();
        let k = CorrelationKernel::theta_mix(d.clone(), 0.8).unwrap();
        let p = ModelParams::new(1.0, 1.0, 0.3).unwrap();
        let init = DegreeStateField::uniform_seed(&d, 1e4).unwrap();
        let opts = SolveOptions {
            dt: 0.1,
            sample_every: 0,
            ..Default::default()
        };
        let err = solve_correlated(&k, p, &init, &opts).unwrap_err();
        assert!(matches!(err, Error::Instability { .. }), "{err}");
    }

    #[test]
    fn correlated_solver_rejects_uncorrelated_kernel() {
        let d = DegreeDistribution::point_mass(3).unwrap();
        let k = CorrelationKernel::uncorrelated(d.clone());
        let p = ModelParams::new(0.5, 0.5, 0.5).unwrap();
        let init = DegreeStateField::uniform_seed(&d, 100.0).unwrap();
        assert!(solve_correlated(&k, p, &init, &SolveOptions::default()).is_err());
    }
}
