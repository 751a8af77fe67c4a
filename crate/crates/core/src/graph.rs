//! Random graph generators: Barabási–Albert preferential attachment and the
//! configuration model on sampled power-law degree sequences.
//!
//! Every generator draws from a single `ChaCha8Rng` seeded with the given
//! [`RngSeed`], so identical inputs give identical graphs on any platform.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ensemble::DegreeDistribution;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent generator for sub-task `index`: the master-seeded ChaCha8
    /// generator moved to stream `index + 1` (stream 0 is the master itself).
    pub fn stream(self, index: u64) -> ChaCha8Rng {
        let mut rng = self.rng();
        rng.set_stream(index + 1);
        rng
    }
}

/// Simple undirected graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<u32>>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self {
            adjacency: vec![Vec::new(); n],
        }
    }

    /// Builds from an edge list; self-loops and repeated edges are rejected.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(invalid(format!("edge ({u}, {v}) outside {n} vertices")));
            }
            if u == v {
                return Err(invalid(format!("self-loop at {u}")));
            }
            adjacency[u as usize].push(v);
            adjacency[v as usize].push(u);
        }
        for (v, list) in adjacency.iter_mut().enumerate() {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                return Err(invalid(format!("repeated edge at vertex {v}")));
            }
        }
        Ok(Self { adjacency })
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adjacency[v]
    }
    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }
    pub fn degree_sequence(&self) -> Vec<u32> {
        self.adjacency.iter().map(|l| l.len() as u32).collect()
    }
    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (u, list) in self.adjacency.iter().enumerate() {
            for &v in list {
                if (u as u32) < v {
                    out.push((u as u32, v));
                }
            }
        }
        out
    }

    /// Full scan of symmetry, loops and duplicates.
    pub fn is_simple_undirected(&self) -> bool {
        for (u, list) in self.adjacency.iter().enumerate() {
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return false;
            }
            for &v in list {
                if v as usize == u || self.adjacency[v as usize].binary_search(&(u as u32)).is_err() {
                    return false;
                }
            }
        }
        true
    }

    /// One `u v` line per edge, sorted by `(u, v)`.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (u, v) in self.edges() {
            writeln!(w, "{u} {v}")?;
        }
        Ok(())
    }

    /// Reads `u v` lines; blank lines and `#` comments are skipped. The vertex
    /// count is `n` if given, else one more than the largest id.
    pub fn read_edge_list<R: BufRead>(r: R, n: Option<usize>) -> Result<Self> {
        let mut edges = Vec::new();
        let mut max_id = None::<u32>;
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |s: Option<&str>| -> Result<u32> {
                s.ok_or_else(|| Error::Parse(format!("line {}: expected two ids", lineno + 1)))?
                    .parse()
                    .map_err(|_| Error::Parse(format!("line {}: bad vertex id", lineno + 1)))
            };
            let u = parse(it.next())?;
            let v = parse(it.next())?;
            if it.next().is_some() {
                return Err(Error::Parse(format!("line {}: trailing fields", lineno + 1)));
            }
            max_id = Some(max_id.map_or(u.max(v), |m| m.max(u).max(v)));
            edges.push((u, v));
        }
        let inferred = max_id.map_or(0, |m| m as usize + 1);
        let n = match n {
            Some(n) if n < inferred => {
                return Err(invalid(format!("edge list uses ids beyond n = {n}")));
            }
            Some(n) => n,
            None => inferred,
        };
        Self::from_edges(n, &edges)
    }
}

/// Barabási–Albert graph: vertex 0 alone, vertex 1 attaches to it, and each
/// later vertex attaches to `min(m_edges, existing)` distinct earlier
/// vertices chosen with probability proportional to degree.
pub fn generate_ba(n: usize, m_edges: usize, seed: RngSeed) -> Result<Graph> {
    if m_edges < 1 || n <= m_edges {
        return Err(invalid(format!("need n > m_edges >= 1, got n={n}, m_edges={m_edges}")));
    }
    let mut rng = seed.rng();
    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); n];
    // Each edge contributes both endpoints; uniform picks are degree-proportional.
    let mut ends: Vec<u32> = Vec::with_capacity(2 * n * m_edges);
    let mut chosen: Vec<u32> = Vec::with_capacity(m_edges);
    for v in 1..n {
        chosen.clear();
        let want = m_edges.min(v);
        if ends.is_empty() {
            chosen.push(0);
        } else if want == v {
            chosen.extend(0..v as u32);
        } else {
            while chosen.len() < want {
                let t = ends[rng.gen_range(0..ends.len())];
                if !chosen.contains(&t) {
                    chosen.push(t);
                }
            }
        }
        for &t in &chosen {
            adjacency[v].push(t);
            adjacency[t as usize].push(v as u32);
            ends.push(t);
            ends.push(v as u32);
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }
    Ok(Graph { adjacency })
}

/// Index drawn from a cumulative distribution ending at 1.
pub(crate) fn sample_index<R: Rng>(cdf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// `n` i.i.d. degrees from `dist`. If the sum is odd, one uniformly chosen
/// entry is redrawn until it becomes even.
pub fn sample_powerlaw_sequence(
    dist: &DegreeDistribution,
    n: usize,
    seed: RngSeed,
) -> Result<Vec<u32>> {
    if n < 2 {
        return Err(invalid("degree sequence needs n >= 2"));
    }
    let all_odd = dist.degrees().iter().all(|k| k % 2 == 1);
    if all_odd && n % 2 == 1 {
        return Err(invalid("odd n with only odd degrees cannot have an even sum"));
    }
    let mut rng = seed.rng();
    let cdf = crate::numeric::cumulative(dist.probs());
    let degrees = dist.degrees();
    let mut seq: Vec<u32> = (0..n).map(|_| degrees[sample_index(&cdf, &mut rng)]).collect();
    let mut total: u64 = seq.iter().map(|&k| k as u64).sum();
    while total % 2 == 1 {
        let j = rng.gen_range(0..n);
        total -= seq[j] as u64;
        seq[j] = degrees[sample_index(&cdf, &mut rng)];
        total += seq[j] as u64;
    }
    Ok(seq)
}

/// What stub matching had to delete.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CleanupReport {
    pub self_loops_removed: usize,
    pub multi_edges_removed: usize,
    /// `Σ_v |target_v − realized_v|`.
    pub degree_l1_gap: u64,
}

/// Configuration model by uniform stub matching. Self-loops and repeated
/// edges are deleted, so realized degrees can fall below the targets.
pub fn configuration_model(degrees: &[u32], seed: RngSeed) -> Result<(Graph, CleanupReport)> {
    let total: u64 = degrees.iter().map(|&k| k as u64).sum();
    if total % 2 == 1 {
        return Err(invalid(format!("degree sum {total} is odd")));
    }
    let mut rng = seed.rng();
    let mut stubs: Vec<u32> = Vec::with_capacity(total as usize);
    for (v, &k) in degrees.iter().enumerate() {
        stubs.extend(std::iter::repeat(v as u32).take(k as usize));
    }
    stubs.shuffle(&mut rng);
    let mut self_loops = 0;
    let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(stubs.len() / 2);
    for pair in stubs.chunks_exact(2) {
        let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
        if u == v {
            self_loops += 1;
        } else {
            pairs.push((u, v));
        }
    }
    pairs.sort_unstable();
    let before = pairs.len();
    pairs.dedup();
    let multi = before - pairs.len();
    let graph = Graph::from_edges(degrees.len(), &pairs)?;
    let gap = degrees
        .iter()
        .enumerate()
        .map(|(v, &k)| (k as i64 - graph.degree(v) as i64).unsigned_abs())
        .sum();
    Ok((
        graph,
        CleanupReport {
            self_loops_removed: self_loops,
            multi_edges_removed: multi,
            degree_l1_gap: gap,
        },
    ))
}
