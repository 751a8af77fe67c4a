//! Parameter sweeps over α or θ, seed averaging and outbreak detection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{solve, DegreeStateField, ModelParams, SolveOptions};
use crate::ensemble::{CorrelationKernel, DegreeDistribution};
use crate::error::{invalid, Error, Result};
use crate::graph::sample_index;

/// How the single initial seed vertex enters the degree classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Seeding {
    /// `a_k(0) = 1/n` in every class (one deterministic run).
    #[default]
    Uniform,
    /// Each run seeds one class drawn from `P(k)`; runs are averaged.
    SampledClass,
}

/// When a sweep point counts as an outbreak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OutbreakRule {
    /// Prevalence exceeds `factor` times the initial seed mass.
    SeedMultiple { factor: f64 },
    /// Prevalence exceeds a fixed level.
    Absolute { level: f64 },
}

impl Default for OutbreakRule {
    fn default() -> Self {
        OutbreakRule::SeedMultiple { factor: 100.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    pub dt: f64,
    pub tol: f64,
    pub max_steps: usize,
    /// Population size setting the seed mass `1/n`.
    pub population: f64,
    pub seeding: Seeding,
    pub runs: usize,
    pub seed: u64,
    /// Halve `dt` after an instability instead of failing, down to `min_dt`.
    /// Leave off when iteration counts must be comparable across points.
    pub refine_on_instability: bool,
    pub min_dt: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            dt: 0.01,
            tol: 1e-7,
            max_steps: 50_000_000,
            population: 1e4,
            seeding: Seeding::Uniform,
            runs: 1,
            seed: 0,
            refine_on_instability: true,
            min_dt: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AveragedSolve {
    pub prevalence: f64,
    /// Run-averaged iteration count.
    pub iterations: f64,
    /// Run-averaged `1/iterations`.
    pub efficiency: f64,
    /// Run-averaged initial active mass.
    pub seed_mass: f64,
    /// Smallest step used.
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    /// Swept value (α or θ).
    pub x: f64,
    pub prevalence: f64,
    pub iterations: f64,
    pub efficiency: f64,
    pub seed_mass: f64,
    pub dt: f64,
}

/// Initial states with their run multiplicities. Sampled seeding draws the
/// classes from a ChaCha8 stream seeded with `opts.seed`; since the ODE is
/// deterministic, runs sharing a class are solved once and weighted.
fn initial_states(
    dist: &DegreeDistribution,
    opts: &SweepOptions,
) -> Result<Vec<(DegreeStateField, usize)>> {
    match opts.seeding {
        Seeding::Uniform => Ok(vec![(
            DegreeStateField::uniform_seed(dist, opts.population)?,
            1,
        )]),
        Seeding::SampledClass => {
            if opts.runs == 0 {
                return Err(invalid("runs must be at least 1"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let cdf = crate::numeric::cumulative(dist.probs());
            let mut counts = vec![0usize; dist.len()];
            for _ in 0..opts.runs {
                counts[sample_index(&cdf, &mut rng)] += 1;
            }
            counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(class, &c)| {
                    Ok((DegreeStateField::class_seed(dist, class, opts.population)?, c))
                })
                .collect()
        }
    }
}

fn solve_refining(
    kernel: &CorrelationKernel,
    params: ModelParams,
    init: &DegreeStateField,
    opts: &SweepOptions,
) -> Result<super::SolveReport> {
    let mut dt = opts.dt;
    loop {
        let so = SolveOptions {
            dt,
            tol: opts.tol,
            max_steps: opts.max_steps,
            sample_every: 0,
        };
        match solve(kernel, params, init, &so) {
            Err(Error::Instability { .. }) if opts.refine_on_instability && dt / 2.0 >= opts.min_dt => {
                dt /= 2.0;
            }
            other => return other,
        }
    }
}

fn average(
    kernel: &CorrelationKernel,
    params: ModelParams,
    states: &[(DegreeStateField, usize)],
    opts: &SweepOptions,
) -> Result<AveragedSolve> {
    let dist = kernel.base();
    let total: usize = states.iter().map(|s| s.1).sum();
    let mut out = AveragedSolve {
        prevalence: 0.0,
        iterations: 0.0,
        efficiency: 0.0,
        seed_mass: 0.0,
        dt: opts.dt,
    };
    for (init, count) in states {
        let w = *count as f64 / total as f64;
        let rep = solve_refining(kernel, params, init, opts)?;
        out.prevalence += w * rep.prevalence;
        out.iterations += w * rep.iterations as f64;
        out.efficiency += w * rep.efficiency;
        out.seed_mass += w * init.aggregate(dist).a;
        out.dt = out.dt.min(rep.dt);
    }
    Ok(out)
}

/// Solve averaged over the configured seeding.
pub fn solve_averaged(
    kernel: &CorrelationKernel,
    params: ModelParams,
    opts: &SweepOptions,
) -> Result<AveragedSolve> {
    let states = initial_states(kernel.base(), opts)?;
    average(kernel, params, &states, opts)
}

fn point(x: f64, s: AveragedSolve) -> SweepPoint {
    SweepPoint {
        x,
        prevalence: s.prevalence,
        iterations: s.iterations,
        efficiency: s.efficiency,
        seed_mass: s.seed_mass,
        dt: s.dt,
    }
}

/// Prevalence and efficiency over a grid of α with λ, β taken from `params`.
pub fn sweep_alpha(
    kernel: &CorrelationKernel,
    params: ModelParams,
    alphas: &[f64],
    opts: &SweepOptions,
) -> Result<Vec<SweepPoint>> {
    if alphas.is_empty() {
        return Err(invalid("empty alpha grid"));
    }
    let states = initial_states(kernel.base(), opts)?;
    alphas
        .par_iter()
        .map(|&alpha| {
            let p = params.with_alpha(alpha)?;
            Ok(point(alpha, average(kernel, p, &states, opts)?))
        })
        .collect()
}

/// Prevalence and efficiency over a grid of θ for the θ-mixing kernel on `dist`.
pub fn sweep_theta(
    dist: &DegreeDistribution,
    params: ModelParams,
    thetas: &[f64],
    opts: &SweepOptions,
) -> Result<Vec<SweepPoint>> {
    if thetas.is_empty() {
        return Err(invalid("empty theta grid"));
    }
    let states = initial_states(dist, opts)?;
    thetas
        .par_iter()
        .map(|&theta| {
            let kernel = CorrelationKernel::theta_mix(dist.clone(), theta)?;
            Ok(point(theta, average(&kernel, params, &states, opts)?))
        })
        .collect()
}

/// First swept value whose prevalence satisfies the outbreak rule.
pub fn detect_onset(points: &[SweepPoint], rule: OutbreakRule) -> Option<f64> {
    points
        .iter()
        .find(|p| match rule {
            OutbreakRule::SeedMultiple { factor } => p.prevalence > factor * p.seed_mass,
            OutbreakRule::Absolute { level } => p.prevalence > level,
        })
        .map(|p| p.x)
}

/// Locations (linearly interpolated in x) where two curves on the same grid
/// swap order. Differences with magnitude ≤ `tol` are treated as ties and
/// do not start or end a crossing.
pub fn crossings(a: &[SweepPoint], b: &[SweepPoint], tol: f64) -> Result<Vec<f64>> {
    if a.len() != b.len() || a.iter().zip(b).any(|(p, q)| p.x != q.x) {
        return Err(invalid("curves must share the same grid"));
    }
    let mut out = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    for (p, q) in a.iter().zip(b) {
        let d = p.prevalence - q.prevalence;
        if d.abs() <= tol {
            continue;
        }
        if let Some((x0, d0)) = last {
            if d0.signum() != d.signum() {
                out.push(x0 + (p.x - x0) * d0 / (d0 - d));
            }
        }
        last = Some((p.x, d));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, prevalence: f64) -> SweepPoint {
        SweepPoint {
            x,
            prevalence,
            iterations: 1.0,
            efficiency: 1.0,
            seed_mass: 1e-4,
            dt: 0.01,
        }
    }

    #[test]
    fn onset_rules() {
        let pts = [pt(0.1, 2e-4), pt(0.2, 5e-3), pt(0.3, 0.2)];
        assert_eq!(detect_onset(&pts, OutbreakRule::default()), Some(0.3));
        assert_eq!(
            detect_onset(&pts, OutbreakRule::SeedMultiple { factor: 2.0 }),
            Some(0.2)
        );
        assert_eq!(detect_onset(&pts, OutbreakRule::Absolute { level: 0.5 }), None);
    }

    #[test]
    fn crossing_location() {
        let a = [pt(0.0, 1.0), pt(1.0, 2.0), pt(2.0, 3.0)];
        let b = [pt(0.0, 2.0), pt(1.0, 1.5), pt(2.0, 1.0)];
        let c = crossings(&a, &b, 0.0).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!(crossings(&a, &a, 0.0).unwrap().is_empty());
    }

    #[test]
    fn sampled_seeding_is_reproducible() {
        let d = DegreeDistribution::power_law(2.5, 1, 30).unwrap();
        let opts = SweepOptions {
            seeding: Seeding::SampledClass,
            runs: 100,
            seed: 9,
            ..Default::default()
        };
        let a = initial_states(&d, &opts).unwrap();
        let b = initial_states(&d, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iter().map(|s| s.1).sum::<usize>(), 100);
    }
}
