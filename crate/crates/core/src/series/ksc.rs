//! K-Spectral Centroid clustering under the scale- and shift-invariant
//! distance `d̂(x, y) = min_{ν,h} ‖x − ν y_(h)‖ / ‖x‖` with
//! `y_(h)[t] = y[t + h]` and zero padding.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TimeSeries;
use crate::error::{invalid, Error, Result};
use crate::graph::RngSeed;

pub const HARTIGAN_THRESHOLD: f64 = 200.0;
pub const HARTIGAN_RESTARTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KscDistance {
    pub d: f64,
    pub nu: f64,
    pub h: i64,
}

fn dot_shifted(x: &[f64], y: &[f64], h: i64) -> (f64, f64) {
    // ⟨x, y_(h)⟩ and ‖y_(h)‖²
    let n = x.len() as i64;
    let (lo, hi) = ((-h).max(0), (n - h).min(n));
    let (mut xy, mut yy) = (0.0, 0.0);
    for t in lo..hi {
        let v = y[(t + h) as usize];
        xy += x[t as usize] * v;
        yy += v * v;
    }
    (xy, yy)
}

fn residual_norm(x: &[f64], y: &[f64], nu: f64, h: i64) -> f64 {
    let n = x.len() as i64;
    (0..n)
        .map(|t| {
            let s = t + h;
            let v = if (0..n).contains(&s) { y[s as usize] } else { 0.0 };
            (x[t as usize] - nu * v).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Shifts in search order `0, 1, −1, 2, −2, …`, so ties go to small `|h|`.
fn shift_order(max_shift: usize) -> impl Iterator<Item = i64> {
    std::iter::once(0).chain((1..=max_shift as i64).flat_map(|s| [s, -s]))
}

fn default_shift(len: usize) -> usize {
    len / 4
}

fn distance_raw(x: &[f64], y: &[f64], x_norm: f64, max_shift: usize) -> KscDistance {
    let mut best = KscDistance {
        d: f64::INFINITY,
        nu: 0.0,
        h: 0,
    };
    // Compare on squared residuals; take the root once at the end.
    let mut best_sq = f64::INFINITY;
    let xx = x_norm * x_norm;
    for h in shift_order(max_shift) {
        let (xy, yy) = dot_shifted(x, y, h);
        let (nu, sq) = if yy > 0.0 {
            (xy / yy, (xx - xy * xy / yy).max(0.0))
        } else {
            (0.0, xx)
        };
        if sq < best_sq {
            best_sq = sq;
            best = KscDistance { d: 0.0, nu, h };
        }
    }
    // Recompute the winner directly; the expanded form loses digits near 0.
    best.d = (residual_norm(x, y, best.nu, best.h) / x_norm).min(1.0);
    best
}

/// `d̂(x, y)` with the minimizing scale `ν` and shift `h`, searching
/// `|h| ≤ max_shift` (default `len/4`).
pub fn ksc_distance(x: &TimeSeries, y: &TimeSeries, max_shift: Option<usize>) -> Result<KscDistance> {
    if x.len() != y.len() {
        return Err(invalid(format!("series lengths differ: {} vs {}", x.len(), y.len())));
    }
    let norm = x.norm();
    if norm == 0.0 {
        return Err(Error::UndefinedMetric("distance from an all-zero series".into()));
    }
    let h = max_shift.unwrap_or_else(|| default_shift(x.len())).min(x.len() - 1);
    Ok(distance_raw(x.values(), y.values(), norm, h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KscOptions {
    pub max_iter: usize,
    /// Shift search range; `None` uses a quarter of the series length.
    pub max_shift: Option<usize>,
}

impl Default for KscOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            max_shift: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterModel {
    pub k: usize,
    /// Unit-norm centroids.
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Per cluster `Σ d̂²` of its members.
    pub within_cost: Vec<f64>,
    /// Total cost after every assignment pass.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub max_shift: usize,
}

impl ClusterModel {
    pub fn total_cost(&self) -> f64 {
        self.within_cost.iter().sum()
    }
}

struct Prepared {
    values: Vec<Vec<f64>>,
    max_shift: usize,
}

fn prepare(series: &[TimeSeries], max_shift: Option<usize>) -> Result<Prepared> {
    let first = series.first().ok_or_else(|| invalid("no series"))?;
    let len = first.len();
    if series.iter().any(|s| s.len() != len) {
        return Err(invalid("all series must have the same length"));
    }
    if let Some(i) = series.iter().position(|s| s.norm() == 0.0) {
        return Err(invalid(format!("series {i} is all zero")));
    }
    Ok(Prepared {
        values: series.iter().map(|s| s.values().to_vec()).collect(),
        max_shift: max_shift.unwrap_or_else(|| default_shift(len)).min(len - 1),
    })
}

/// Member-to-centroid cost: `d̂(μ, x)` with the shift and scale applied to
/// the member, so the centroid update below is an exact minimizer.
fn member_distance(centroid: &[f64], x: &[f64], max_shift: usize) -> KscDistance {
    distance_raw(centroid, x, 1.0, max_shift)
}

fn aligned_unit(x: &[f64], h: i64) -> Vec<f64> {
    let n = x.len() as i64;
    let mut v: Vec<f64> = (0..n)
        .map(|t| {
            let s = t + h;
            if (0..n).contains(&s) {
                x[s as usize]
            } else {
                0.0
            }
        })
        .collect();
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|a| *a /= norm);
    }
    v
}

fn unit(x: &[f64]) -> Vec<f64> {
    aligned_unit(x, 0)
}

/// Leading eigenvector of `Σ x̂ x̂ᵀ` through the small Gram matrix.
fn spectral_centroid(members: &[Vec<f64>]) -> Vec<f64> {
    let m = members.len();
    let len = members[0].len();
    let gram = DMatrix::<f64>::from_fn(m, m, |i, j| {
        members[i].iter().zip(&members[j]).map(|(a, b)| a * b).sum::<f64>()
    });
    let eig = SymmetricEigen::new(gram);
    let top = eig.eigenvalues.imax();
    let v = eig.eigenvectors.column(top);
    let mut mu = vec![0.0; len];
    for (i, x) in members.iter().enumerate() {
        for t in 0..len {
            mu[t] += v[i] * x[t];
        }
    }
    let mut mu = unit(&mu);
    if mu.iter().sum::<f64>() < 0.0 {
        mu.iter_mut().for_each(|a| *a = -*a);
    }
    mu
}

fn assign(p: &Prepared, centroids: &[Vec<f64>]) -> Vec<(usize, KscDistance)> {
    p.values
        .par_iter()
        .map(|x| {
            let mut best = (0, member_distance(&centroids[0], x, p.max_shift));
            for (j, c) in centroids.iter().enumerate().skip(1) {
                let d = member_distance(c, x, p.max_shift);
                if d.d < best.1.d {
                    best = (j, d);
                }
            }
            best
        })
        .collect()
}

fn farthest_point_init(p: &Prepared, k: usize, start: usize) -> Vec<Vec<f64>> {
    let mut centroids = vec![unit(&p.values[start])];
    let mut nearest: Vec<f64> = p
        .values
        .iter()
        .map(|x| member_distance(&centroids[0], x, p.max_shift).d)
        .collect();
    while centroids.len() < k {
        // Ties go to the lowest index.
        let (far, _) = nearest
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, &d)| if d > b.1 { (i, d) } else { b });
        let c = unit(&p.values[far]);
        for (i, x) in p.values.iter().enumerate() {
            nearest[i] = nearest[i].min(member_distance(&c, x, p.max_shift).d);
        }
        centroids.push(c);
    }
    centroids
}

fn cluster_prepared(p: &Prepared, k: usize, start: usize, opts: &KscOptions) -> ClusterModel {
    let n = p.values.len();
    let mut centroids = farthest_point_init(p, k, start);
    let mut previous: Option<Vec<usize>> = None;
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let found = assign(p, &centroids);
        let labels: Vec<usize> = found.iter().map(|f| f.0).collect();
        let mut within = vec![0.0; k];
        for (j, d) in &found {
            within[*j] += d.d * d.d;
        }
        history.push(within.iter().sum());
        let stable = previous.as_ref() == Some(&labels);
        if stable || iterations >= opts.max_iter {
            return ClusterModel {
                k,
                centroids,
                assignments: labels,
                within_cost: within,
                cost_history: history,
                iterations,
                max_shift: p.max_shift,
            };
        }
        iterations += 1;
        for (j, c) in centroids.iter_mut().enumerate() {
            let members: Vec<Vec<f64>> = (0..n)
                .filter(|&i| labels[i] == j)
                .map(|i| aligned_unit(&p.values[i], found[i].1.h))
                .collect();
            if !members.is_empty() {
                *c = spectral_centroid(&members);
            }
        }
        // Empty clusters restart from the series worst served so far.
        for j in 0..k {
            if labels.iter().all(|&l| l != j) {
                let far = (0..n)
                    .max_by(|&a, &b| found[a].1.d.total_cmp(&found[b].1.d).then(b.cmp(&a)))
                    .unwrap();
                centroids[j] = unit(&p.values[far]);
            }
        }
        previous = Some(labels);
    }
}

/// K-SC clustering with farthest-point initialization started from a
/// series drawn with `seed`.
pub fn ksc_cluster(series: &[TimeSeries], k: usize, seed: RngSeed, opts: &KscOptions) -> Result<ClusterModel> {
    if k == 0 || k > series.len() {
        return Err(invalid(format!("k = {k} with {} series", series.len())));
    }
    let p = prepare(series, opts.max_shift)?;
    let start = seed.rng().gen_range(0..series.len());
    Ok(cluster_prepared(&p, k, start, opts))
}

fn best_of_restarts(p: &Prepared, k: usize, seed: RngSeed, opts: &KscOptions) -> ClusterModel {
    (0..HARTIGAN_RESTARTS as u64)
        .map(|r| {
            let start = seed.stream(r).gen_range(0..p.values.len());
            cluster_prepared(p, k, start, opts)
        })
        .min_by(|a, b| a.total_cost().total_cmp(&b.total_cost()))
        .unwrap()
}

/// Mean silhouette with `(d̂(x,y) + d̂(y,x)) / 2` as the pairwise distance.
/// Members of singleton clusters score 0, as does `a = b = 0`.
pub fn silhouette(model: &ClusterModel, series: &[TimeSeries]) -> Result<f64> {
    if model.k < 2 {
        return Err(invalid("silhouette needs at least two clusters"));
    }
    if model.assignments.len() != series.len() {
        return Err(invalid("model and series disagree in size"));
    }
    let p = prepare(series, Some(model.max_shift))?;
    let n = series.len();
    let norms: Vec<f64> = series.iter().map(|s| s.norm()).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| distance_raw(&p.values[i], &p.values[j], norms[i], p.max_shift).d)
                .collect()
        })
        .collect();
    let sym = |i: usize, j: usize| 0.5 * (rows[i][j] + rows[j][i]);
    let labels = &model.assignments;
    let mut sizes = vec![0usize; model.k];
    labels.iter().for_each(|&l| sizes[l] += 1);
    let mut total = 0.0;
    for i in 0..n {
        let own = labels[i];
        if sizes[own] < 2 {
            continue;
        }
        let mut sums = vec![0.0; model.k];
        for j in 0..n {
            if j != i {
                sums[labels[j]] += sym(i, j);
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..model.k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 && b.is_finite() {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

/// `(W(k)/W(k+1) − 1)(n − k − 1)`; infinite when `W(k+1) = 0 < W(k)`.
pub fn hartigan_from_costs(w_k: f64, w_next: f64, n: usize, k: usize) -> f64 {
    if w_next == 0.0 {
        return if w_k == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (w_k / w_next - 1.0) * (n as f64 - k as f64 - 1.0)
}

/// Hartigan's index at `k` from the best of a fixed number of restarts at
/// `k` and `k + 1`.
pub fn hartigan_index(series: &[TimeSeries], k: usize, seed: RngSeed, opts: &KscOptions) -> Result<f64> {
    if k == 0 || k + 1 > series.len() {
        return Err(invalid(format!("k = {k} with {} series", series.len())));
    }
    let p = prepare(series, opts.max_shift)?;
    let w_k = best_of_restarts(&p, k, seed, opts).total_cost();
    let w_next = best_of_restarts(&p, k + 1, seed, opts).total_cost();
    Ok(hartigan_from_costs(w_k, w_next, series.len(), k))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HartiganRow {
    pub k: usize,
    pub within_cost: f64,
    /// `None` on the last row.
    pub index: Option<f64>,
    /// `None` for `k = 1`.
    pub silhouette: Option<f64>,
}

/// Table over `k = 1..=k_max + 1` and the smallest `k ≤ k_max` whose index
/// falls below `threshold` (if any).
pub fn select_k_hartigan(
    series: &[TimeSeries],
    k_max: usize,
    seed: RngSeed,
    threshold: f64,
    opts: &KscOptions,
) -> Result<(Vec<HartiganRow>, Option<usize>)> {
    if k_max == 0 || k_max + 1 > series.len() {
        return Err(invalid(format!("k_max = {k_max} with {} series", series.len())));
    }
    let p = prepare(series, opts.max_shift)?;
    let models: Vec<ClusterModel> = (1..=k_max + 1)
        .map(|k| best_of_restarts(&p, k, seed, opts))
        .collect();
    let mut rows = Vec::new();
    for (idx, m) in models.iter().enumerate() {
        let index = models
            .get(idx + 1)
            .map(|next| hartigan_from_costs(m.total_cost(), next.total_cost(), series.len(), m.k));
        let silhouette = if m.k >= 2 { Some(silhouette(m, series)?) } else { None };
        rows.push(HartiganRow {
            k: m.k,
            within_cost: m.total_cost(),
            index,
            silhouette,
        });
    }
    let chosen = rows
        .iter()
        .find(|r| r.index.is_some_and(|h| h < threshold))
        .map(|r| r.k);
    Ok((rows, chosen))
}

/// Per cluster, the member closest to the centroid (lowest index on ties).
pub fn representatives(model: &ClusterModel, series: &[TimeSeries]) -> Result<Vec<Option<usize>>> {
    let p = prepare(series, Some(model.max_shift))?;
    let mut best: Vec<Option<(usize, f64)>> = vec![None; model.k];
    for (i, x) in p.values.iter().enumerate() {
        let j = model.assignments[i];
        let c = TimeSeries::new(model.centroids[j].clone(), 1.0)?;
        let d = distance_raw(x, c.values(), x.iter().map(|v| v * v).sum::<f64>().sqrt(), p.max_shift).d;
        if best[j].map_or(true, |(_, b)| d < b) {
            best[j] = Some((i, d));
        }
    }
    Ok(best.into_iter().map(|b| b.map(|x| x.0)).collect())
}
