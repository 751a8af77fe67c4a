//! One function per subcommand. Each returns the bytes of its primary output.

use rand::Rng;
use serde::Serialize;

use infospread::ensemble::{continuum_threshold, threshold_mixing_approx, Moments};
use infospread::fit::{fit_theta, FitProblem};
use infospread::graph::{configuration_model, generate_ba, sample_powerlaw_sequence, Graph, RngSeed};
use infospread::meanfield::{solve, sweep_alpha, sweep_theta, DegreeStateField, ModelParams, SweepPoint};
use infospread::montecarlo::{ensemble_prevalence, gaussian_smooth, simulate};
use infospread::series::{
    ksc_cluster, predict_experiment, representatives, select_k_hartigan, silhouette, HartiganRow,
    TimeSeries,
};
use infospread::timevarying::{activity_rate, TimeGrid};

use crate::config::*;
use crate::error::{CliError, CliResult};
use crate::io;

fn json<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::config(format!("cannot serialize report: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

#[derive(Serialize)]
struct AnndRow {
    k: u32,
    annd: f64,
}

#[derive(Serialize)]
struct EnsembleReport {
    kernel: KernelSpec,
    moments: Moments,
    /// `⟨k⟩/⟨k²⟩` of the base law.
    rho_c_uncorrelated: f64,
    /// `1/Λ_m` of the kernel.
    rho_c_correlated: f64,
    rho_c_mixing_approx: f64,
    rho_c_continuum: f64,
    lambda_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    annd: Option<Vec<AnndRow>>,
}

pub fn ensemble(cfg: &EnsembleConfig) -> CliResult<Vec<u8>> {
    let kernel = cfg.kernel.kernel()?;
    let dist = kernel.base();
    let lambda_max = kernel.largest_eigenvalue()?;
    let annd = if cfg.annd {
        Some(
            dist.degrees()
                .iter()
                .map(|&k| Ok(AnndRow { k, annd: kernel.annd(k)? }))
                .collect::<CliResult<_>>()?,
        )
    } else {
        None
    };
    json(&EnsembleReport {
        kernel: cfg.kernel,
        moments: dist.moments(),
        rho_c_uncorrelated: dist.threshold_uncorrelated(),
        rho_c_correlated: 1.0 / lambda_max,
        rho_c_mixing_approx: threshold_mixing_approx(dist, cfg.kernel.theta),
        rho_c_continuum: continuum_threshold(cfg.kernel.gamma),
        lambda_max,
        annd,
    })
}

fn sweep_rows(out: &mut String, theta: f64, alpha: Option<f64>, points: &[SweepPoint]) {
    for p in points {
        let (th, al) = match alpha {
            Some(a) => (p.x, a),
            None => (theta, p.x),
        };
        out.push_str(&format!(
            "{th},{al},{},{},{},{},{}\n",
            p.prevalence, p.iterations, p.efficiency, p.seed_mass, p.dt
        ));
    }
}

pub fn sweep(cfg: &SweepConfig) -> CliResult<Vec<u8>> {
    let grid = cfg.grid.values()?;
    let mut out = String::from("theta,alpha,prevalence,iterations,efficiency,seed_mass,dt\n");
    match cfg.axis {
        Axis::Alpha => {
            if cfg.alpha.is_some() {
                return Err(CliError::config("alpha is swept; drop the fixed alpha"));
            }
            let params = ModelParams::new(grid[0], cfg.lambda, cfg.beta)?;
            let thetas = cfg.thetas.clone().unwrap_or_else(|| vec![cfg.kernel.theta]);
            if thetas.is_empty() {
                return Err(CliError::config("empty theta list"));
            }
            for theta in thetas {
                let kernel = cfg.kernel.kernel_at(theta)?;
                let points = sweep_alpha(&kernel, params, &grid, &cfg.options)?;
                sweep_rows(&mut out, theta, None, &points);
            }
        }
        Axis::Theta => {
            let alpha = cfg
                .alpha
                .ok_or_else(|| CliError::config("theta sweeps need a fixed alpha"))?;
            if cfg.thetas.is_some() {
                return Err(CliError::config("theta is swept; drop the theta list"));
            }
            let params = ModelParams::new(alpha, cfg.lambda, cfg.beta)?;
            let points = sweep_theta(&cfg.kernel.distribution()?, params, &grid, &cfg.options)?;
            sweep_rows(&mut out, 0.0, Some(alpha), &points);
        }
    }
    Ok(out.into_bytes())
}

pub fn solve_cmd(cfg: &SolveConfig) -> CliResult<Vec<u8>> {
    let kernel = cfg.kernel.kernel()?;
    let dist = kernel.base();
    let init = match cfg.init {
        SolveInit::Uniform => DegreeStateField::uniform_seed(dist, cfg.population)?,
        SolveInit::Degree(k) => {
            let class = dist
                .index_of(k)
                .ok_or_else(|| CliError::config(format!("degree {k} not in the kernel support")))?;
            DegreeStateField::class_seed(dist, class, cfg.population)?
        }
    };
    let report = solve(&kernel, cfg.params, &init, &cfg.options)?;
    match cfg.format {
        Format::Json => json(&report),
        Format::Csv => {
            let mut out = String::from("t,i,a,r,q\n");
            for s in &report.trajectory {
                out.push_str(&format!("{},{},{},{},{}\n", s.t, s.i, s.a, s.r, s.q));
            }
            Ok(out.into_bytes())
        }
    }
}

pub fn gen_graph(cfg: &GenGraphConfig, seed: u64) -> CliResult<Vec<u8>> {
    let graph = match *cfg {
        GenGraphConfig::Ba { n, m } => generate_ba(n, m, RngSeed(seed))?,
        GenGraphConfig::Configuration { n, gamma, m, k_cut } => {
            let k_cut = k_cut.ok_or_else(|| CliError::config("k_cut unresolved"))?;
            let dist = infospread::ensemble::DegreeDistribution::power_law(gamma, m, k_cut)?;
            // Sequence and wiring draw from separate streams of the seed.
            let seq = sample_powerlaw_sequence(&dist, n, RngSeed(seed))?;
            let (g, report) = configuration_model(&seq, RngSeed(seed.wrapping_add(1)))?;
            eprintln!(
                "configuration model: removed {} self-loops and {} repeated edges",
                report.self_loops_removed, report.multi_edges_removed
            );
            g
        }
    };
    let mut out = format!("# n = {}\n", graph.n()).into_bytes();
    graph
        .write_edge_list(&mut out)
        .map_err(|e| CliError::io("<buffer>", e))?;
    Ok(out)
}

/// Vertex count from a leading `# n = N` comment.
fn header_n(text: &str) -> Option<usize> {
    let first = text.lines().next()?.trim();
    let rest = first.strip_prefix('#')?.trim().strip_prefix('n')?.trim();
    rest.strip_prefix('=')?.trim().parse().ok()
}

#[derive(Serialize)]
struct EnsembleOut {
    mean: f64,
    stderr: f64,
    runs: usize,
    n: usize,
}

pub fn simulate_cmd(cfg: &SimulateConfig, seed: u64) -> CliResult<Vec<u8>> {
    let text = io::read_text(&cfg.input)?;
    let n = cfg.n.or_else(|| header_n(&text));
    let graph = Graph::read_edge_list(text.as_bytes(), n)?;
    if cfg.runs == 0 {
        return Err(CliError::config("runs must be at least 1"));
    }
    if cfg.runs > 1 {
        if cfg.initial_active.is_some() {
            return Err(CliError::config("initial_active applies to single runs only"));
        }
        let s = ensemble_prevalence(&graph, cfg.params, cfg.dt, cfg.runs, RngSeed(seed))?;
        return json(&EnsembleOut {
            mean: s.mean,
            stderr: s.stderr,
            runs: s.runs,
            n: graph.n(),
        });
    }
    if graph.n() == 0 {
        return Err(CliError::config("empty graph"));
    }
    let start = match cfg.initial_active {
        Some(v) => v,
        None => RngSeed(seed).stream(0).gen_range(0..graph.n()),
    };
    let trace = simulate(&graph, cfg.params, cfg.dt, RngSeed(seed), start)?;
    let mut out = String::from("t,ignorant,active,indifferent,quiet,new_active\n");
    for (step, (c, fresh)) in trace.counts.iter().zip(&trace.new_active).enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            step as f64 * trace.dt,
            c.ignorant,
            c.active,
            c.indifferent,
            c.quiet,
            fresh
        ));
    }
    Ok(out.into_bytes())
}

pub fn tv_series(cfg: &TvSeriesConfig) -> CliResult<Vec<u8>> {
    let grid = TimeGrid::observation(cfg.len, cfg.bin_hours, cfg.time_scale)?;
    let curve = activity_rate(&cfg.theta, &grid);
    let mut out = String::from("t,rate\n");
    for (t, r) in curve.times.iter().zip(&curve.values) {
        out.push_str(&format!("{t},{r}\n"));
    }
    Ok(out.into_bytes())
}

pub fn fit(cfg: &FitConfig) -> CliResult<Vec<u8>> {
    let series = io::read_series(&cfg.input, cfg.column.as_deref(), cfg.bin_width)?;
    let mut problem = FitProblem::new(series);
    problem.time_scale = cfg.time_scale;
    problem.initial_theta = cfg.initial_theta;
    json(&fit_theta(&problem, &cfg.options)?)
}

pub fn predict(cfg: &PredictConfig) -> CliResult<Vec<u8>> {
    let series = io::read_series(&cfg.input, cfg.column.as_deref(), cfg.bin_width)?;
    let mut report = predict_experiment(&series, cfg.train_fraction, cfg.time_scale, &cfg.options)?;
    if !cfg.forecasts {
        report.arms.iter_mut().for_each(|a| a.forecast = None);
    }
    json(&report)
}

#[derive(Serialize)]
struct ClusterReport {
    names: Vec<String>,
    k: usize,
    /// "config" or "hartigan"; "k_max" when no k met the threshold.
    k_source: &'static str,
    assignments: Vec<usize>,
    centroids: Vec<Vec<f64>>,
    silhouette: Option<f64>,
    /// Member closest to each centroid.
    representatives: Vec<Option<String>>,
    total_cost: f64,
    iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    hartigan: Option<Vec<HartiganRow>>,
}

pub fn cluster(cfg: &ClusterConfig, seed: u64) -> CliResult<Vec<u8>> {
    let corpus = io::read_corpus(&cfg.input, cfg.column.as_deref(), cfg.bin_width)?;
    if corpus.len() < 2 {
        return Err(CliError::config("clustering needs at least two series"));
    }
    let (names, series): (Vec<String>, Vec<TimeSeries>) = corpus.into_iter().unzip();
    let (k, k_source, table) = match cfg.k {
        Some(k) => (k, "config", None),
        None => {
            let k_max = cfg.k_max.min(series.len() - 1);
            let (rows, chosen) =
                select_k_hartigan(&series, k_max, RngSeed(seed), cfg.threshold, &cfg.options)?;
            match chosen {
                Some(k) => (k, "hartigan", Some(rows)),
                None => (k_max, "k_max", Some(rows)),
            }
        }
    };
    let model = ksc_cluster(&series, k, RngSeed(seed), &cfg.options)?;
    let sil = if k >= 2 { Some(silhouette(&model, &series)?) } else { None };
    let reps = representatives(&model, &series)?
        .into_iter()
        .map(|r| r.map(|i| names[i].clone()))
        .collect();
    json(&ClusterReport {
        names,
        k,
        k_source,
        assignments: model.assignments.clone(),
        centroids: model.centroids.clone(),
        silhouette: sil,
        representatives: reps,
        total_cost: model.total_cost(),
        iterations: model.iterations,
        hartigan: table,
    })
}

pub fn smooth(cfg: &SmoothConfig) -> CliResult<Vec<u8>> {
    let series = io::read_series(&cfg.input, cfg.column.as_deref(), cfg.bin_width)?;
    let s = gaussian_smooth(&series, cfg.sigma)?;
    Ok(io::series_csv(&s, "count").into_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_list_header() {
        assert_eq!(header_n("# n = 12\n0 1\n"), Some(12));
        assert_eq!(header_n("#n=3\n"), Some(3));
        assert_eq!(header_n("0 1\n"), None);
    }
}
