//! Degree distributions, degree-degree correlation kernels and the matrices
//! derived from them (connectivity `C_kk' = k P(k'|k)` and the linearized
//! Jacobian `L = αλC − βI`).
//!
//! All sums run exactly over the occupied degree set; continuum formulas only
//! appear in [`continuum_threshold`] as an asymptotic reference.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::meanfield::ModelParams;
use crate::numeric::{self, PowerIterationOptions};

/// First two moments of a degree law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean_k: f64,
    pub mean_k2: f64,
    pub heterogeneity: f64,
}

/// Degree law over an occupied set of degrees. Usually a truncated discrete
/// power law `P(k) ∝ k^-γ` on `[m, k_cut]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    gamma: Option<f64>,
    degrees: Vec<u32>,
    probs: Vec<f64>,
    moments: Moments,
}

impl DegreeDistribution {
    /// Discretely normalized power law on `[m, k_cut]`.
    pub fn power_law(gamma: f64, m: u32, k_cut: u32) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 2.0) {
            return Err(invalid(format!("power-law exponent must exceed 2, got {gamma}")));
        }
        if m < 1 || k_cut < m {
            return Err(invalid(format!("need 1 <= m <= k_cut, got m={m}, k_cut={k_cut}")));
        }
        let degrees: Vec<u32> = (m..=k_cut).collect();
        // Sum smallest terms first.
        let z = numeric::sum(degrees.iter().rev().map(|&k| (k as f64).powf(-gamma)));
        let probs = degrees.iter().map(|&k| (k as f64).powf(-gamma) / z).collect();
        Ok(Self::build(Some(gamma), degrees, probs))
    }

    /// All mass on a single degree.
    pub fn point_mass(k: u32) -> Result<Self> {
        if k < 1 {
            return Err(invalid("point mass needs degree >= 1"));
        }
        Ok(Self::build(None, vec![k], vec![1.0]))
    }

    /// Arbitrary law from `(degree, weight)` pairs; weights are normalized and
    /// zero-weight degrees dropped.
    pub fn from_weights(pairs: &[(u32, f64)]) -> Result<Self> {
        let mut pairs: Vec<(u32, f64)> = pairs.iter().copied().filter(|p| p.1 != 0.0).collect();
        if pairs.is_empty() {
            return Err(invalid("degree law needs at least one positive weight"));
        }
        if pairs.iter().any(|&(k, w)| k < 1 || !(w.is_finite() && w > 0.0)) {
            return Err(invalid("degrees must be >= 1 and weights finite and nonnegative"));
        }
        pairs.sort_by_key(|p| p.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(invalid("duplicate degree in weight list"));
        }
        let z = numeric::sum(pairs.iter().map(|p| p.1));
        let degrees = pairs.iter().map(|p| p.0).collect();
        let probs = pairs.iter().map(|p| p.1 / z).collect();
        Ok(Self::build(None, degrees, probs))
    }

    /// Empirical law of a degree sequence. Isolated vertices are left out;
    /// the returned fraction says how many there were.
    pub fn empirical(sequence: &[u32]) -> Result<(Self, f64)> {
        let mut counts = std::collections::BTreeMap::new();
        for &k in sequence.iter().filter(|&&k| k > 0) {
            *counts.entry(k).or_insert(0usize) += 1;
        }
        let isolated = sequence.iter().filter(|&&k| k == 0).count();
        let pairs: Vec<(u32, f64)> = counts.into_iter().map(|(k, c)| (k, c as f64)).collect();
        let dist = Self::from_weights(&pairs)?;
        Ok((dist, isolated as f64 / sequence.len() as f64))
    }

    fn build(gamma: Option<f64>, degrees: Vec<u32>, probs: Vec<f64>) -> Self {
        let mean_k = numeric::sum(degrees.iter().zip(&probs).map(|(&k, p)| k as f64 * p));
        let mean_k2 =
            numeric::sum(degrees.iter().zip(&probs).map(|(&k, p)| (k as f64).powi(2) * p));
        Self {
            gamma,
            degrees,
            probs,
            moments: Moments {
                mean_k,
                mean_k2,
                heterogeneity: mean_k2 / mean_k,
            },
        }
    }

    /// Power-law exponent, if the law was built as one.
    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }
    pub fn m(&self) -> u32 {
        self.degrees[0]
    }
    pub fn k_cut(&self) -> u32 {
        *self.degrees.last().unwrap()
    }
    /// Occupied degrees, ascending.
    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }
    /// `P(k)` aligned with [`degrees`](Self::degrees).
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
    /// Number of occupied degree classes.
    pub fn len(&self) -> usize {
        self.degrees.len()
    }
    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }
    pub fn index_of(&self, k: u32) -> Option<usize> {
        self.degrees.binary_search(&k).ok()
    }
    /// `P(k)`, zero for unoccupied degrees.
    pub fn prob(&self, k: u32) -> f64 {
        self.index_of(k).map_or(0.0, |i| self.probs[i])
    }
    pub fn moments(&self) -> Moments {
        self.moments
    }
    pub fn mean(&self) -> f64 {
        self.moments.mean_k
    }

    fn checked_index(&self, k: u32) -> Result<usize> {
        if k < self.m() || k > self.k_cut() {
            return Err(Error::DegreeOutOfRange {
                k,
                min: self.m(),
                max: self.k_cut(),
            });
        }
        Ok(self.index_of(k).unwrap_or(usize::MAX))
    }

    /// Excess degree `q(k) = k P(k) / ⟨k⟩`.
    pub fn excess_degree(&self, k: u32) -> Result<f64> {
        let i = self.checked_index(k)?;
        if i == usize::MAX {
            return Ok(0.0);
        }
        Ok(k as f64 * self.probs[i] / self.moments.mean_k)
    }

    /// `q(k)` over the occupied degrees.
    pub fn excess_vector(&self) -> Vec<f64> {
        self.degrees
            .iter()
            .zip(&self.probs)
            .map(|(&k, p)| k as f64 * p / self.moments.mean_k)
            .collect()
    }

    /// Spreading threshold `⟨k⟩/⟨k²⟩` of the uncorrelated network.
    pub fn threshold_uncorrelated(&self) -> f64 {
        self.moments.mean_k / self.moments.mean_k2
    }
}

/// Natural cutoff `3·⌈n^{1/(γ−1)}⌉` for a graph of `n` vertices.
pub fn natural_cutoff(n: usize, gamma: f64) -> u32 {
    3 * (n as f64).powf(1.0 / (gamma - 1.0)).ceil() as u32
}

/// `k_cut → ∞` limit of the uncorrelated threshold with continuum
/// normalization: `(γ−3)/(γ−2)` for γ > 3, zero otherwise.
pub fn continuum_threshold(gamma: f64) -> f64 {
    if gamma > 3.0 {
        (gamma - 3.0) / (gamma - 2.0)
    } else {
        0.0
    }
}

/// The θ-mixing approximation `⟨k⟩ / (⟨k²⟩(1−θ))` of the correlated
/// threshold. It ignores the self term `θ δ_kk'`, which dominates the spectrum
/// once `θ k_cut` exceeds `(1−θ)⟨k²⟩/⟨k⟩`.
pub fn threshold_mixing_approx(dist: &DegreeDistribution, theta: f64) -> f64 {
    dist.threshold_uncorrelated() / (1.0 - theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelKind {
    Uncorrelated,
    /// `P(k'|k) = (1−θ) q(k') + θ δ_kk'`.
    ThetaMix { theta: f64 },
}

/// Conditional degree law `P(k'|k)` over the occupied degrees of `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationKernel {
    kind: KernelKind,
    base: DegreeDistribution,
    excess: Vec<f64>,
}

impl CorrelationKernel {
    pub fn uncorrelated(base: DegreeDistribution) -> Self {
        let excess = base.excess_vector();
        Self {
            kind: KernelKind::Uncorrelated,
            base,
            excess,
        }
    }

    pub fn theta_mix(base: DegreeDistribution, theta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&theta) {
            return Err(invalid(format!("theta must lie in [0, 1), got {theta}")));
        }
        let excess = base.excess_vector();
        Ok(Self {
            kind: KernelKind::ThetaMix { theta },
            base,
            excess,
        })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }
    pub fn base(&self) -> &DegreeDistribution {
        &self.base
    }
    /// `q(k)` over the occupied degrees.
    pub fn excess(&self) -> &[f64] {
        &self.excess
    }
    /// Correlation strength; zero for the uncorrelated kernel.
    pub fn theta(&self) -> f64 {
        match self.kind {
            KernelKind::Uncorrelated => 0.0,
            KernelKind::ThetaMix { theta } => theta,
        }
    }
    pub fn len(&self) -> usize {
        self.base.len()
    }
    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    /// `P(k_j | k_i)` by class index.
    pub fn conditional_idx(&self, i: usize, j: usize) -> f64 {
        let theta = self.theta();
        let self_term = if i == j { theta } else { 0.0 };
        (1.0 - theta) * self.excess[j] + self_term
    }

    /// `P(k' | k)` by degree value; zero for unoccupied `k'`.
    pub fn conditional(&self, k: u32, k_prime: u32) -> Result<f64> {
        let i = self.base.checked_index(k)?;
        let j = self.base.checked_index(k_prime)?;
        if i == usize::MAX || j == usize::MAX {
            return Ok(0.0);
        }
        Ok(self.conditional_idx(i, j))
    }

    /// `out_k = Σ_k' P(k'|k) x_k'` in O(K).
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let theta = self.theta();
        let mixed = (1.0 - theta) * numeric::dot(&self.excess, x);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = mixed + theta * xi;
        }
    }

    /// Average nearest-neighbor degree `Σ_k' k' P(k'|k)`.
    pub fn annd(&self, k: u32) -> Result<f64> {
        self.base.checked_index(k)?;
        let theta = self.theta();
        Ok((1.0 - theta) * self.base.moments.heterogeneity + theta * k as f64)
    }

    /// Dense connectivity matrix over the occupied degrees.
    pub fn connectivity(&self) -> ConnectivityMatrix {
        let n = self.len();
        let degrees = self.base.degrees.clone();
        let entries =
            DMatrix::from_fn(n, n, |i, j| degrees[i] as f64 * self.conditional_idx(i, j));
        ConnectivityMatrix {
            degrees,
            weights: self.base.probs.clone(),
            entries,
        }
    }

    /// Λ_m of the connectivity matrix using an O(K) matrix-vector product,
    /// suitable for large `k_cut` where the dense matrix is impractical.
    pub fn largest_eigenvalue(&self) -> Result<f64> {
        self.largest_eigenvalue_with(PowerIterationOptions::default())
    }

    pub fn largest_eigenvalue_with(&self, opts: PowerIterationOptions) -> Result<f64> {
        // Work with S = D^{1/2} C D^{-1/2}, D = diag(P(k)), symmetric by detailed balance.
        let k: Vec<f64> = self.base.degrees.iter().map(|&d| d as f64).collect();
        let sq: Vec<f64> = self.base.probs.iter().map(|p| p.sqrt()).collect();
        let n = self.len();
        let mut tmp = vec![0.0; n];
        let mut tmp2 = vec![0.0; n];
        numeric::power_iteration(
            n,
            |v, out| {
                for i in 0..n {
                    tmp[i] = v[i] / sq[i];
                }
                self.apply(&tmp, &mut tmp2);
                for i in 0..n {
                    out[i] = sq[i] * k[i] * tmp2[i];
                }
            },
            opts,
        )
    }

    pub fn jacobian(&self, params: ModelParams) -> JacobianMatrix {
        JacobianMatrix::new(self.connectivity(), params)
    }
}

/// `C_kk' = k P(k'|k)` over the occupied degree set, with the degree weights
/// `P(k)` kept for the detailed-balance symmetrization.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMatrix {
    degrees: Vec<u32>,
    weights: Vec<f64>,
    entries: DMatrix<f64>,
}

impl ConnectivityMatrix {
    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }
    pub fn side(&self) -> usize {
        self.degrees.len()
    }

    /// `D^{1/2} C D^{-1/2}`; symmetric when the kernel obeys detailed balance.
    pub fn symmetrized(&self) -> DMatrix<f64> {
        let n = self.side();
        DMatrix::from_fn(n, n, |i, j| {
            self.entries[(i, j)] * (self.weights[i] / self.weights[j]).sqrt()
        })
    }

    /// Λ_m by power iteration on the symmetrized matrix (relative residual 1e-10).
    pub fn largest_eigenvalue(&self) -> Result<f64> {
        self.largest_eigenvalue_with(PowerIterationOptions::default())
    }

    pub fn largest_eigenvalue_with(&self, opts: PowerIterationOptions) -> Result<f64> {
        let s = self.symmetrized();
        numeric::power_iteration(
            self.side(),
            |v, out| {
                let sv = &s * nalgebra::DVector::from_column_slice(v);
                out.copy_from_slice(sv.as_slice());
            },
            opts,
        )
    }

    /// ANND per class recovered from the matrix: `Σ_k' k' C_kk' / k`.
    pub fn annd_vector(&self) -> Vec<f64> {
        let n = self.side();
        (0..n)
            .map(|i| {
                let k = self.degrees[i] as f64;
                (0..n)
                    .map(|j| self.degrees[j] as f64 * self.entries[(i, j)])
                    .sum::<f64>()
                    / k
            })
            .collect()
    }
}

/// Correlated spreading threshold `1/Λ_m`.
pub fn threshold_correlated(c: &ConnectivityMatrix) -> Result<f64> {
    let lm = c.largest_eigenvalue()?;
    if lm <= 0.0 {
        return Err(Error::InvalidMatrix(format!(
            "largest eigenvalue {lm} is not positive"
        )));
    }
    Ok(1.0 / lm)
}

/// Linearized dynamics of the active fractions, `L = αλC − βI`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianMatrix {
    connectivity: ConnectivityMatrix,
    params: ModelParams,
    entries: DMatrix<f64>,
}

impl JacobianMatrix {
    pub fn new(connectivity: ConnectivityMatrix, params: ModelParams) -> Self {
        let n = connectivity.side();
        let al = params.alpha() * params.lambda();
        let entries = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { params.beta() } else { 0.0 };
            al * connectivity.entries[(i, j)] - diag
        });
        Self {
            connectivity,
            params,
            entries,
        }
    }
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }
    pub fn params(&self) -> ModelParams {
        self.params
    }
    pub fn connectivity(&self) -> &ConnectivityMatrix {
        &self.connectivity
    }

    /// Largest eigenvalue `αλΛ_m − β`.
    pub fn largest_eigenvalue(&self) -> Result<f64> {
        let lm = self.connectivity.largest_eigenvalue()?;
        Ok(self.params.alpha() * self.params.lambda() * lm - self.params.beta())
    }

    /// `min_k β²((ρ²⟨k_nn⟩_min − 2ρ)⟨k_nn⟩(k) + 1)`, a lower bound on λ_m²
    /// whenever it is nonnegative. Diagnostic only.
    pub fn eigen_lower_bound(&self) -> f64 {
        let annd = self.connectivity.annd_vector();
        let rho = self.params.rho();
        let beta = self.params.beta();
        let annd_min = annd.iter().copied().fold(f64::INFINITY, f64::min);
        annd.iter()
            .map(|a| beta * beta * ((rho * rho * annd_min - 2.0 * rho) * a + 1.0))
            .fold(f64::INFINITY, f64::min)
    }
}
