//! Extended three-state model with time-dependent popularity `α(t)` (Gamma
//! density) and periodic activity `λ(t)` (von Mises density), the closed-form
//! early activity rate, and numerical integrators used to check it.
//!
//! Per class `k` with drive `D_k = Σ_k' P(k'|k) a_k'`:
//!
//! ```text
//! di/dt = −λ(t) k i D_k
//! da/dt =  α(t) λ(t) k i D_k
//! dr/dt = (1 − α(t)) λ(t) k i D_k
//! ```
//!
//! In the linear regime (`i ≈ 1`) the aggregate rate is
//! `da/dt = α(t) λ(t) exp(∫₀ᵗ αλ) C` with `C = Σ_k P(k) k Σ_k' P(k'|k) a_k'(0)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{checked_gamma_lr, ln_gamma};

use crate::ensemble::CorrelationKernel;
use crate::error::{invalid, Error, Result};
use crate::meanfield::{DegreeStateField, INSTABILITY_SLACK};
use crate::numeric;
use crate::ode::{self, OdeTolerance};

const TWO_PI: f64 = 2.0 * PI;

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let w = x.rem_euclid(TWO_PI);
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if w >= TWO_PI {
        0.0
    } else {
        w
    }
}

/// The six parameters of the time-varying spreading law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTheta", into = "RawTheta")]
pub struct TimeVaryingParams {
    p: f64,
    eta: f64,
    z: f64,
    vartheta: f64,
    c_p: f64,
    c: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTheta {
    p: f64,
    eta: f64,
    z: f64,
    vartheta: f64,
    c_p: f64,
    c: f64,
}

impl TryFrom<RawTheta> for TimeVaryingParams {
    type Error = Error;
    fn try_from(r: RawTheta) -> Result<Self> {
        Self::new(r.p, r.eta, r.z, r.vartheta, r.c_p, r.c)
    }
}

impl From<TimeVaryingParams> for RawTheta {
    fn from(t: TimeVaryingParams) -> Self {
        RawTheta {
            p: t.p,
            eta: t.eta,
            z: t.z,
            vartheta: t.vartheta,
            c_p: t.c_p,
            c: t.c,
        }
    }
}

impl TimeVaryingParams {
    /// Gamma shape `p` and scale `eta`, von Mises concentration `z` and phase
    /// `vartheta` (wrapped into `[0, 2π)`), period `c_p` and amplitude `c`.
    pub fn new(p: f64, eta: f64, z: f64, vartheta: f64, c_p: f64, c: f64) -> Result<Self> {
        for (name, v) in [("p", p), ("eta", eta), ("c_p", c_p), ("c", c)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !z.is_finite() || !vartheta.is_finite() {
            return Err(invalid("z and vartheta must be finite"));
        }
        Ok(Self {
            p,
            eta,
            z,
            vartheta: wrap_angle(vartheta),
            c_p,
            c,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn z(&self) -> f64 {
        self.z
    }
    pub fn vartheta(&self) -> f64 {
        self.vartheta
    }
    pub fn c_p(&self) -> f64 {
        self.c_p
    }
    pub fn c(&self) -> f64 {
        self.c
    }

    /// `[p, eta, z, vartheta, c_p, c]`.
    pub fn to_array(&self) -> [f64; 6] {
        [self.p, self.eta, self.z, self.vartheta, self.c_p, self.c]
    }

    pub fn from_array(x: [f64; 6]) -> Result<Self> {
        Self::new(x[0], x[1], x[2], x[3], x[4], x[5])
    }

    pub fn with_c(&self, c: f64) -> Result<Self> {
        Self::new(self.p, self.eta, self.z, self.vartheta, self.c_p, c)
    }

    /// The same curve written with `z ≥ 0`: `(−z, ϑ)` and `(z, ϑ + π)`
    /// describe the same activity profile.
    pub fn canonical(&self) -> Self {
        if self.z < 0.0 {
            Self {
                z: -self.z,
                vartheta: wrap_angle(self.vartheta + PI),
                ..*self
            }
        } else {
            *self
        }
    }
}

/// Gamma density with shape `p` and scale `eta` at `t`; zero for `t < 0`.
pub fn alpha_gamma(t: f64, p: f64, eta: f64) -> Result<f64> {
    if !(p > 0.0) || !(eta > 0.0) {
        return Err(invalid(format!("Gamma shape and scale must be positive, got {p}, {eta}")));
    }
    Ok(gamma_density(t, p, eta))
}

fn gamma_density(t: f64, p: f64, eta: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    if t == 0.0 {
        return match p {
            p if p < 1.0 => f64::INFINITY,
            p if p == 1.0 => 1.0 / eta,
            _ => 0.0,
        };
    }
    ((p - 1.0) * t.ln() - t / eta - p * eta.ln() - ln_gamma(p)).exp()
}

/// Gamma distribution function, `∫₀ᵗ α`.
pub fn gamma_cdf(t: f64, p: f64, eta: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    // Extreme trial points during fitting push t/η out of gamma_lr's domain.
    let x = t / eta;
    if x.is_nan() || p.is_nan() {
        f64::NAN
    } else if x <= 0.0 || p == f64::INFINITY {
        0.0
    } else if x == f64::INFINITY {
        1.0
    } else {
        checked_gamma_lr(p, x).unwrap_or(f64::NAN)
    }
}

/// `e^{−|z|} I₀(z)`. Power series up to `|z| = 20`, asymptotic expansion
/// beyond.
pub fn bessel_i0_scaled(z: f64) -> f64 {
    let x = z.abs();
    if x <= 20.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > 1e-17 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        // Σ ((2j−1)!!)² / (j! (8x)^j)
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..30 {
            let f = (2 * j - 1) as f64;
            let next = term * f * f / (j as f64 * 8.0 * x);
            if next.abs() > term.abs() {
                break;
            }
            term = next;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum / (TWO_PI * x).sqrt()
    }
}

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(z: f64) -> f64 {
    bessel_i0_scaled(z) * z.abs().exp()
}

/// Von Mises activity `exp(z cos(2πt/C_p − ϑ)) / (C_p I₀(z))`; a density
/// over one period.
pub fn lambda_vonmises(t: f64, z: f64, vartheta: f64, c_p: f64) -> f64 {
    let phase = TWO_PI * t / c_p - vartheta;
    (z * phase.cos() - z.abs()).exp() / (c_p * bessel_i0_scaled(z))
}

/// Time-dependent `α(t)` and `λ(t)`.
///
/// Integrals of `αλ` are taken in the variable `s` with `t = s^w`;
/// `warped_rate(s) = α(s^w) λ(s^w) w s^{w−1}` must stay finite on `[0, ∞)`.
pub trait TimeProfile: Sync {
    fn alpha(&self, t: f64) -> f64;
    fn lambda(&self, t: f64) -> f64;
    fn warp(&self) -> f64 {
        1.0
    }
    fn warped_rate(&self, s: f64) -> f64 {
        let w = self.warp();
        let t = s.powf(w);
        self.alpha(t) * self.lambda(t) * w * s.powf(w - 1.0)
    }
}

impl TimeProfile for TimeVaryingParams {
    fn alpha(&self, t: f64) -> f64 {
        gamma_density(t, self.p, self.eta)
    }
    fn lambda(&self, t: f64) -> f64 {
        lambda_vonmises(t, self.z, self.vartheta, self.c_p)
    }
    fn warp(&self) -> f64 {
        (1.0 / self.p).max(1.0)
    }
    fn warped_rate(&self, s: f64) -> f64 {
        let w = self.warp();
        let t = s.powf(w);
        if w == 1.0 {
            return self.alpha(t) * self.lambda(t);
        }
        // With w = 1/p the t^{p−1} factor cancels against w s^{w−1}.
        let head = w * (-t / self.eta - self.p * self.eta.ln() - ln_gamma(self.p)).exp();
        head * self.lambda(t)
    }
}

/// Profile built from two closures.
pub struct FnProfile<A, L> {
    pub alpha: A,
    pub lambda: L,
}

impl<A, L> TimeProfile for FnProfile<A, L>
where
    A: Fn(f64) -> f64 + Sync,
    L: Fn(f64) -> f64 + Sync,
{
    fn alpha(&self, t: f64) -> f64 {
        (self.alpha)(t)
    }
    fn lambda(&self, t: f64) -> f64 {
        (self.lambda)(t)
    }
}

/// Uniform grid `start + j·step`, `j < len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if !(start > 0.0 && start.is_finite()) {
            return Err(invalid(format!("grid must start after 0, got {start}")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid(format!("grid step must be positive, got {step}")));
        }
        if len == 0 {
            return Err(invalid("empty grid"));
        }
        Ok(Self { start, step, len })
    }

    /// Grid at the bin centers of `len` observation bins of `bin_hours`
    /// real hours, mapped to model time by `time_scale` hours per unit.
    pub fn observation(len: usize, bin_hours: f64, time_scale: f64) -> Result<Self> {
        if !(time_scale > 0.0) || !(bin_hours > 0.0) {
            return Err(invalid("bin width and time scale must be positive"));
        }
        let step = bin_hours / time_scale;
        Self::new(0.5 * step, step, len)
    }

    pub fn time(&self, j: usize) -> f64 {
        self.start + j as f64 * self.step
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len).map(|j| self.time(j)).collect()
    }
}

/// Closed-form activity rate sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCurve {
    pub times: Vec<f64>,
    /// `da/dt`.
    pub values: Vec<f64>,
    /// Running `∫₀ᵗ αλ`.
    pub cumulative: Vec<f64>,
}

/// `∫_a^b α λ` over one grid cell.
///
/// Near the origin `α` may be singular, so `λ` is replaced by its quadratic
/// interpolant through the cell ends and midpoint and integrated against the
/// exact Gamma moments. Further out, where `α` is smooth on the scale of the
/// cell, plain Simpson is used.
fn cell_integral(theta: &TimeVaryingParams, a: f64, b: f64) -> f64 {
    let (p, eta) = (theta.p, theta.eta);
    let h = b - a;
    let m = 0.5 * (a + b);
    let (la, lm, lb) = (theta.lambda(a), theta.lambda(m), theta.lambda(b));
    let v = if a >= 8.0 * h {
        h / 6.0
            * (gamma_density(a, p, eta) * la
                + 4.0 * gamma_density(m, p, eta) * lm
                + gamma_density(b, p, eta) * lb)
    } else {
        // Raw moments ∫ t^j α over the cell via t α_p = p η α_{p+1}.
        let m0 = gamma_cdf(b, p, eta) - gamma_cdf(a, p, eta);
        let m1 = p * eta * (gamma_cdf(b, p + 1.0, eta) - gamma_cdf(a, p + 1.0, eta));
        let m2 = p * (p + 1.0) * eta * eta
            * (gamma_cdf(b, p + 2.0, eta) - gamma_cdf(a, p + 2.0, eta));
        // Moments of s = (t − a)/h.
        let s0 = m0;
        let s1 = (m1 - a * m0) / h;
        let s2 = (m2 - 2.0 * a * m1 + a * a * m0) / (h * h);
        la * 2.0 * (s2 - 1.5 * s1 + 0.5 * s0) - lm * 4.0 * (s2 - s1) + lb * 2.0 * (s2 - 0.5 * s1)
    };
    v.max(0.0)
}

/// Closed-form rate `α(t) λ(t) exp(∫₀ᵗ αλ) C` on `grid`.
///
/// The integral is accumulated cell by cell (the first cell is
/// `[0, start]`), fourth order away from the origin and insensitive to the
/// `t^{p−1}` singularity at it.
pub fn activity_rate(theta: &TimeVaryingParams, grid: &TimeGrid) -> RateCurve {
    let (p, eta, c) = (theta.p, theta.eta, theta.c);
    let mut times = Vec::with_capacity(grid.len);
    let mut values = Vec::with_capacity(grid.len);
    let mut cumulative = Vec::with_capacity(grid.len);
    let mut t_prev = 0.0;
    let mut acc = 0.0;
    for j in 0..grid.len {
        let t = grid.time(j);
        acc += cell_integral(theta, t_prev, t);
        let rate = gamma_density(t, p, eta) * theta.lambda(t) * acc.exp() * c;
        times.push(t);
        values.push(if rate.is_finite() { rate } else { f64::MAX });
        cumulative.push(acc);
        t_prev = t;
    }
    RateCurve {
        times,
        values,
        cumulative,
    }
}

/// `Σ_k P(k) k Σ_k' P(k'|k) a_k'`, the amplitude `C` set by an initial state.
pub fn closed_form_amplitude(kernel: &CorrelationKernel, a0: &[f64]) -> Result<f64> {
    if a0.len() != kernel.len() {
        return Err(invalid("initial state does not match the kernel"));
    }
    let mut drive = vec![0.0; kernel.len()];
    kernel.apply(a0, &mut drive);
    let dist = kernel.base();
    Ok(numeric::sum(dist.probs().iter().zip(dist.degrees()).zip(&drive).map(
        |((p, &k), d)| p * k as f64 * d,
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtendedOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Keep every n-th step in the trajectory (0 keeps only the last).
    pub sample_every: usize,
}

impl Default for ExtendedOptions {
    fn default() -> Self {
        Self {
            dt: 1e-6,
            t_end: 1.0,
            sample_every: 100,
        }
    }
}

/// Aggregates over one Euler step `[t − dt/2, t + dt/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtendedSample {
    /// Step midpoint.
    pub t: f64,
    /// State at the end of the step.
    pub i: f64,
    pub a: f64,
    pub r: f64,
    /// Aggregate `da/dt` over the step.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedTrajectory {
    pub samples: Vec<ExtendedSample>,
    pub final_state: DegreeStateField,
}

/// Euler integration of the three-state system with `α`, `λ` evaluated at
/// step midpoints. The quiet fractions of `init` must be zero.
///
/// Where `α(t) > 1` the indifferent inflow `(1 − α)` would be negative; it is
/// floored at zero and the ignorant outflow is the active plus indifferent
/// inflow, so `i + a + r = 1` holds exactly.
pub fn solve_extended<P: TimeProfile>(
    kernel: &CorrelationKernel,
    profile: &P,
    init: &DegreeStateField,
    opts: &ExtendedOptions,
) -> Result<ExtendedTrajectory> {
    if !(opts.dt > 0.0 && opts.dt.is_finite()) || !(opts.t_end >= 0.0) {
        return Err(invalid("dt must be positive and t_end nonnegative"));
    }
    if init.len() != kernel.len() {
        return Err(invalid("initial state does not match the kernel"));
    }
    init.validate()?;
    if init.q.iter().any(|&q| q != 0.0) {
        return Err(invalid("the extended model has no quiet state"));
    }
    let dist = kernel.base();
    let degrees = dist.degrees();
    let probs = dist.probs();
    let mut s = init.clone();
    let mut drive = vec![0.0; kernel.len()];
    let steps = (opts.t_end / opts.dt).round() as usize;
    let mut samples = Vec::new();
    for step in 0..steps {
        let t_mid = s.time + 0.5 * opts.dt;
        let alpha = profile.alpha(t_mid);
        let lambda = profile.lambda(t_mid);
        kernel.apply(&s.a, &mut drive);
        let mut gain_total = 0.0;
        for k in 0..s.len() {
            let flow = lambda * degrees[k] as f64 * s.i[k] * drive[k] * opts.dt;
            let gain_a = alpha * flow;
            let gain_r = (1.0 - alpha).max(0.0) * flow;
            let i_new = s.i[k] - gain_a - gain_r;
            if i_new < -INSTABILITY_SLACK || !i_new.is_finite() {
                return Err(Error::Instability {
                    step,
                    time: s.time,
                    value: i_new,
                    dt: opts.dt,
                });
            }
            // Slightly negative: shrink both inflows to what is left.
            let scale = if i_new < 0.0 { s.i[k] / (gain_a + gain_r) } else { 1.0 };
            s.i[k] = (s.i[k] - (gain_a + gain_r) * scale).max(0.0);
            s.a[k] += gain_a * scale;
            s.r[k] += gain_r * scale;
            gain_total += probs[k] * gain_a * scale;
        }
        s.time = (step + 1) as f64 * opts.dt;
        let last = step + 1 == steps;
        if last || (opts.sample_every > 0 && (step + 1) % opts.sample_every == 0) {
            let agg = s.aggregate(dist);
            samples.push(ExtendedSample {
                t: t_mid,
                i: agg.i,
                a: agg.a,
                r: agg.r,
                rate: gain_total / opts.dt,
            });
        }
    }
    Ok(ExtendedTrajectory {
        samples,
        final_state: s,
    })
}

/// Both sides of the linearized solution `a(t) = exp(Φ(t) C) a(0)` with
/// `Φ(t) = ∫₀ᵗ αλ` and connectivity matrix `C`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpCheck {
    pub phi: f64,
    /// Truncated exponential series applied to `a(0)`.
    pub series: Vec<f64>,
    /// Adaptive integration of `da/dt = α λ C a`.
    pub integrated: Vec<f64>,
    /// `max |series − integrated| / max |series|`.
    pub residual: f64,
}

fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm = m.abs().row_sum().max();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = m / 2f64.powi(squarings as i32);
    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for j in 1..60 {
        term = &term * &scaled / j as f64;
        sum += &term;
        if term.abs().max() <= 1e-18 * sum.abs().max() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Cross-check of the matrix-exponential solution at time `t` on a kernel
/// with at most 10 classes.
pub fn matrix_exponential_check<P: TimeProfile>(
    kernel: &CorrelationKernel,
    profile: &P,
    a0: &[f64],
    t: f64,
) -> Result<ExpCheck> {
    if kernel.len() > 10 {
        return Err(invalid("matrix exponential check needs at most 10 classes"));
    }
    if a0.len() != kernel.len() {
        return Err(invalid("initial state does not match the kernel"));
    }
    if !(t >= 0.0) {
        return Err(invalid("t must be nonnegative"));
    }
    let c = kernel.connectivity().entries().clone();
    let s_end = t.powf(1.0 / profile.warp());
    let phi = ode::integrate(|s| profile.warped_rate(s), 0.0, s_end, 1e-14);
    let series: Vec<f64> = (expm(&(&c * phi)) * DVector::from_column_slice(a0))
        .iter()
        .copied()
        .collect();
    let tol = OdeTolerance {
        rtol: 1e-12,
        atol: 1e-300,
        max_steps: 10_000_000,
    };
    let integrated = ode::dopri45(
        |s, y, dy| {
            let w = profile.warped_rate(s);
            for (r, out) in dy.iter_mut().enumerate() {
                *out = w * (0..y.len()).map(|j| c[(r, j)] * y[j]).sum::<f64>();
            }
        },
        0.0,
        s_end,
        a0,
        tol,
    )?;
    let scale = series.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let diff = series
        .iter()
        .zip(&integrated)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    let residual = if scale > 0.0 { diff / scale } else { diff };
    Ok(ExpCheck {
        phi,
        series,
        integrated,
        residual,
    })
}
