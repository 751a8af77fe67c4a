//! Synchronous agent-based simulation of the four-state model on an explicit
//! graph, plus Gaussian smoothing of the resulting activity series.
//!
//! Per step of length `dt`, using the states at the start of the step:
//! an ignorant vertex with `g` active neighbors stays ignorant with
//! probability `(1 − dt·λ)^g`, otherwise it turns active with probability `α`
//! and indifferent otherwise; an active vertex turns quiet with probability
//! `dt·β`. Vertices activated during a step spread from the next step on.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::{Graph, RngSeed};
use crate::meanfield::ModelParams;
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VertexState {
    Ignorant,
    Active,
    Indifferent,
    Quiet,
}

/// State counts at one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StateCounts {
    pub ignorant: usize,
    pub active: usize,
    pub indifferent: usize,
    pub quiet: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTrace {
    /// Counts after each step, starting with the initial state.
    pub counts: Vec<StateCounts>,
    /// Vertices turned active during each step; entry 0 is the seed.
    pub new_active: Vec<usize>,
    pub seed: RngSeed,
    pub dt: f64,
    pub n: usize,
    #[serde(skip)]
    pub final_states: Vec<VertexState>,
}

impl SimTrace {
    /// Final aware fraction `(indifferent + quiet) / n`.
    pub fn prevalence(&self) -> f64 {
        let last = self.counts.last().unwrap();
        (last.indifferent + last.quiet) as f64 / self.n as f64
    }

    /// Newly active counts as a series with bins of `bin_width`.
    pub fn new_active_series(&self, bin_width: f64) -> Result<TimeSeries> {
        TimeSeries::new(self.new_active.iter().map(|&c| c as f64).collect(), bin_width)
    }
}

fn check_probabilities(params: ModelParams, dt: f64) -> Result<()> {
    if !(dt > 0.0) || dt * params.lambda() > 1.0 || dt * params.beta() > 1.0 {
        return Err(invalid(format!(
            "per-step probabilities dt*lambda = {} and dt*beta = {} must lie in [0, 1]",
            dt * params.lambda(),
            dt * params.beta()
        )));
    }
    Ok(())
}

/// One run from `initial_active` until no vertex is active.
pub fn simulate(
    graph: &Graph,
    params: ModelParams,
    dt: f64,
    seed: RngSeed,
    initial_active: usize,
) -> Result<SimTrace> {
    let mut rng = seed.rng();
    run(graph, params, dt, seed, initial_active, &mut rng)
}

fn run(
    graph: &Graph,
    params: ModelParams,
    dt: f64,
    seed: RngSeed,
    initial_active: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SimTrace> {
    check_probabilities(params, dt)?;
    let n = graph.n();
    if initial_active >= n {
        return Err(invalid(format!("initial vertex {initial_active} not in graph of {n}")));
    }
    let stay = 1.0 - dt * params.lambda();
    let quit = dt * params.beta();
    let alpha = params.alpha();

    let mut state = vec![VertexState::Ignorant; n];
    state[initial_active] = VertexState::Active;
    let mut active: Vec<u32> = vec![initial_active as u32];
    let mut exposure = vec![0u32; n];
    let mut touched: Vec<u32> = Vec::new();
    let mut counts = StateCounts {
        ignorant: n - 1,
        active: 1,
        indifferent: 0,
        quiet: 0,
    };
    let mut trace = vec![counts];
    let mut new_active = vec![1usize];
    let mut next_active: Vec<u32> = Vec::new();

    while !active.is_empty() {
        // Active-neighbor counts g for ignorant vertices, from the current state.
        for &u in &active {
            for &v in graph.neighbors(u as usize) {
                if state[v as usize] == VertexState::Ignorant {
                    if exposure[v as usize] == 0 {
                        touched.push(v);
                    }
                    exposure[v as usize] += 1;
                }
            }
        }
        // Vertices are visited in ascending id so the draw order is fixed.
        touched.sort_unstable();
        next_active.clear();
        let mut fresh = 0;
        for &v in &touched {
            let g = exposure[v as usize];
            exposure[v as usize] = 0;
            let p_stay = stay.powi(g as i32);
            if rng.gen::<f64>() >= p_stay {
                counts.ignorant -= 1;
                if rng.gen::<f64>() < alpha {
                    state[v as usize] = VertexState::Active;
                    counts.active += 1;
                    fresh += 1;
                    next_active.push(v);
                } else {
                    state[v as usize] = VertexState::Indifferent;
                    counts.indifferent += 1;
                }
            }
        }
        touched.clear();
        for &u in &active {
            if rng.gen::<f64>() < quit {
                state[u as usize] = VertexState::Quiet;
                counts.active -= 1;
                counts.quiet += 1;
            } else {
                next_active.push(u);
            }
        }
        std::mem::swap(&mut active, &mut next_active);
        active.sort_unstable();
        trace.push(counts);
        new_active.push(fresh);
    }
    Ok(SimTrace {
        counts: trace,
        new_active,
        seed,
        dt,
        n,
        final_states: state,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub mean: f64,
    /// Standard error of the mean (zero for a single run).
    pub stderr: f64,
    pub runs: usize,
}

/// Mean final prevalence over `runs` runs, each seeded at a uniformly random
/// vertex. Run `j` draws everything from `seed.stream(j)`.
pub fn ensemble_prevalence(
    graph: &Graph,
    params: ModelParams,
    dt: f64,
    runs: usize,
    seed: RngSeed,
) -> Result<EnsembleSummary> {
    if runs == 0 {
        return Err(invalid("runs must be at least 1"));
    }
    if graph.n() == 0 {
        return Err(invalid("empty graph"));
    }
    check_probabilities(params, dt)?;
    let values: Vec<f64> = (0..runs as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng = seed.stream(j);
            let start = rng.gen_range(0..graph.n());
            run(graph, params, dt, seed, start, &mut rng).map(|t| t.prevalence())
        })
        .collect::<Result<_>>()?;
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let stderr = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt() / m.sqrt()
    } else {
        0.0
    };
    Ok(EnsembleSummary { mean, stderr, runs })
}

/// Convolution with a normalized Gaussian of width `sigma` samples, truncated
/// at `4σ`, with half-sample symmetric reflection at both ends.
pub fn gaussian_smooth(series: &TimeSeries, sigma: f64) -> Result<TimeSeries> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("sigma must be positive, got {sigma}")));
    }
    let x = series.values();
    let n = x.len();
    if n == 0 {
        return Err(invalid("empty series"));
    }
    let radius = (4.0 * sigma).ceil() as i64;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|j| (-(j as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= total);
    let reflect = |i: i64| -> usize {
        let period = 2 * n as i64;
        let m = i.rem_euclid(period);
        if m < n as i64 {
            m as usize
        } else {
            (period - 1 - m) as usize
        }
    };
    let out = (0..n as i64)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(j, w)| w * x[reflect(i + j as i64 - radius)])
                .sum()
        })
        .collect();
    TimeSeries::new(out, series.bin_width())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_vertex_chain_is_deterministic() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let p = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let t = simulate(&g, p, 1.0, RngSeed(0), 0).unwrap();
        assert_eq!(t.counts[0].active, 1);
        assert_eq!(t.counts[1].active, 1);
        assert_eq!(t.counts[1].quiet, 1);
        assert_eq!(t.counts[2].quiet, 2);
        assert_eq!(t.counts.len(), 3);
        assert_eq!(t.new_active, vec![1, 1, 0]);
    }

    #[test]
    fn isolated_vertex_never_notices() {
        let g = Graph::from_edges(3, &[(0, 1)]).unwrap();
        let p = ModelParams::new(1.0, 1.0, 0.2).unwrap();
        for s in 0..20 {
            let t = simulate(&g, p, 1.0, RngSeed(s), 0).unwrap();
            assert_eq!(t.final_states[2], VertexState::Ignorant);
        }
    }

    #[test]
    fn rejects_bad_step() {
        let g = Graph::empty(2);
        let p = ModelParams::new(0.5, 0.5, 0.5).unwrap();
        assert!(simulate(&g, p, 3.0, RngSeed(0), 0).is_err());
        assert!(simulate(&g, p, 1.0, RngSeed(0), 2).is_err());
    }

    #[test]
    fn smoothing_constant_and_impulse() {
        let c = TimeSeries::new(vec![3.0; 17], 0.5).unwrap();
        let s = gaussian_smooth(&c, 2.0).unwrap();
        assert!(s.values().iter().all(|v| (v - 3.0).abs() < 1e-12));
        let mut imp = vec![0.0; 41];
        imp[20] = 1.0;
        let s = gaussian_smooth(&TimeSeries::new(imp, 0.5).unwrap(), 2.0).unwrap();
        assert!((s.values().iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!(gaussian_smooth(&c, 0.0).is_err());
    }

    #[test]
    fn smoothing_short_series_reflects_repeatedly() {
        let c = TimeSeries::new(vec![1.0, 2.0], 0.5).unwrap();
        let s = gaussian_smooth(&c, 3.0).unwrap();
        assert!((s.values().iter().sum::<f64>() - 3.0).abs() < 1e-9);
    }
}
