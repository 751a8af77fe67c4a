use infospread::ensemble::{CorrelationKernel, DegreeDistribution};
use infospread::graph::{configuration_model, generate_ba, sample_powerlaw_sequence, Graph, RngSeed};
use infospread::meanfield::*;
use infospread::montecarlo::{simulate, VertexState};
use infospread::ode::{dopri45, OdeTolerance};
use proptest::prelude::*;

fn toy_kernel(theta: f64) -> CorrelationKernel {
    let dist = DegreeDistribution::from_weights(&[(1, 0.6), (4, 0.3), (12, 0.1)]).unwrap();
    if theta == 0.0 {
        CorrelationKernel::uncorrelated(dist)
    } else {
        CorrelationKernel::theta_mix(dist, theta).unwrap()
    }
}

/// The degree-class system written out directly, state `[i, a, r, q]` per class.
fn rhs(kernel: &CorrelationKernel, p: ModelParams) -> impl FnMut(f64, &[f64], &mut [f64]) + '_ {
    let n = kernel.len();
    move |_, y, dy| {
        let a = &y[n..2 * n];
        for k in 0..n {
            let theta_k: f64 = (0..n).map(|j| kernel.conditional_idx(k, j) * a[j]).sum();
            let deg = kernel.base().degrees()[k] as f64;
            let noticed = p.lambda() * deg * y[k] * theta_k;
            dy[k] = -noticed;
            dy[n + k] = p.alpha() * noticed - p.beta() * a[k];
            dy[2 * n + k] = (1.0 - p.alpha()) * noticed;
            dy[3 * n + k] = p.beta() * a[k];
        }
    }
}

#[test]
fn solver_matches_adaptive_integrator_on_toy_kernel() {
    for theta in [0.0, 0.5] {
        let kernel = toy_kernel(theta);
        let dist = kernel.base().clone();
        let p = ModelParams::new(0.8, 0.9, 0.3).unwrap();
        let init = DegreeStateField::from_active(vec![0.01; 3]);
        let opts = SolveOptions {
            dt: 1e-4,
            tol: 1e-6,
            sample_every: 5000,
            ..Default::default()
        };
        let rep = solve(&kernel, p, &init, &opts).unwrap();
        let mut y0 = vec![0.0; 12];
        for k in 0..3 {
            y0[k] = init.i[k];
            y0[3 + k] = init.a[k];
        }
        let mut worst = 0.0_f64;
        for s in rep.trajectory.iter().skip(1) {
            let y = dopri45(rhs(&kernel, p), 0.0, s.t, &y0, OdeTolerance::default()).unwrap();
            let agg = |off: usize| (0..3).map(|k| dist.probs()[k] * y[off + k]).sum::<f64>();
            for (mine, theirs) in [(s.i, agg(0)), (s.a, agg(3)), (s.r, agg(6)), (s.q, agg(9))] {
                worst = worst.max((mine - theirs).abs());
            }
        }
        assert!(worst < 1e-4, "θ={theta}: sup error {worst}");
    }
}

#[test]
fn zero_theta_solvers_agree_exactly() {
    let dist = DegreeDistribution::power_law(2.5, 1, 60).unwrap();
    let p = ModelParams::new(0.6, 1.0, 0.3).unwrap();
    let init = DegreeStateField::uniform_seed(&dist, 1e4).unwrap();
    let opts = SolveOptions::default();
    let a = solve_naive(&CorrelationKernel::uncorrelated(dist.clone()), p, &init, &opts).unwrap();
    let b = solve_correlated(&CorrelationKernel::theta_mix(dist, 0.0).unwrap(), p, &init, &opts).unwrap();
    assert_eq!(a.iterations, b.iterations);
    assert!((a.prevalence - b.prevalence).abs() < 1e-12);
}

#[test]
fn early_growth_matches_linearization() {
    let dist = DegreeDistribution::power_law(3.0, 1, 100).unwrap();
    let p = ModelParams::new(0.9, 1.0, 0.2).unwrap();
    let rho_c = dist.threshold_uncorrelated();
    let tau = predict_tau(p, rho_c).unwrap();
    let a0 = 1e-5;
    let init = DegreeStateField::from_active(vec![a0; dist.len()]);
    let opts = SolveOptions {
        dt: 1e-3,
        sample_every: 1,
        ..Default::default()
    };
    let rep = solve_naive(&CorrelationKernel::uncorrelated(dist.clone()), p, &init, &opts).unwrap();
    for s in rep.trajectory.iter().filter(|s| s.t > 0.0 && s.t <= tau / 4.0) {
        let lin = early_growth(&dist, p, a0, s.t);
        assert!((s.a - lin).abs() < 0.1 * lin, "t={}: {} vs {}", s.t, s.a, lin);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conservation_and_monotonicity(
        alpha in 0.0f64..1.0,
        lambda in 0.05f64..1.0,
        beta in 0.05f64..1.0,
        theta in 0.0f64..0.9,
    ) {
        let kernel = toy_kernel(theta);
        let p = ModelParams::new(alpha, lambda, beta).unwrap();
        let init = DegreeStateField::from_active(vec![0.001; 3]);
        let opts = SolveOptions { dt: 0.01, sample_every: 1, ..Default::default() };
        let rep = solve(&kernel, p, &init, &opts).unwrap();
        let mut prev = rep.trajectory[0];
        for s in &rep.trajectory {
            prop_assert!((s.i + s.a + s.r + s.q - 1.0).abs() < 1e-9);
            prop_assert!(s.i <= prev.i + 1e-15);
            prop_assert!(s.r >= prev.r - 1e-15 && s.q >= prev.q - 1e-15);
            prev = *s;
        }
        let f = &rep.final_state;
        for k in 0..3 {
            prop_assert!((f.i[k] + f.a[k] + f.r[k] + f.q[k] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn configuration_graphs_are_simple(seed in 0u64..1000, n in 20usize..400) {
        let dist = DegreeDistribution::power_law(2.5, 1, 30).unwrap();
        let seq = sample_powerlaw_sequence(&dist, n, RngSeed(seed)).unwrap();
        let (g, _) = configuration_model(&seq, RngSeed(seed + 1)).unwrap();
        prop_assert!(g.is_simple_undirected());
        let total: usize = g.degree_sequence().iter().map(|&d| d as usize).sum();
        prop_assert_eq!(total, 2 * g.edge_count());
        let (h, _) = configuration_model(&seq, RngSeed(seed + 1)).unwrap();
        prop_assert_eq!(g, h);
    }

    #[test]
    fn monte_carlo_trace_invariants(
        seed in 0u64..1000,
        alpha in 0.0f64..1.0,
        lambda in 0.1f64..1.0,
        beta in 0.1f64..1.0,
    ) {
        let g: Graph = generate_ba(300, 2, RngSeed(seed)).unwrap();
        prop_assert!(g.is_simple_undirected());
        let p = ModelParams::new(alpha, lambda, beta).unwrap();
        let start = (seed % 300) as usize;
        let t = simulate(&g, p, 1.0, RngSeed(seed), start).unwrap();
        let again = simulate(&g, p, 1.0, RngSeed(seed), start).unwrap();
        prop_assert_eq!(&t, &again);
        let mut prev = t.counts[0];
        for c in &t.counts {
            prop_assert_eq!(c.ignorant + c.active + c.indifferent + c.quiet, 300);
            // Absorbing states only gain; awareness never shrinks.
            prop_assert!(c.indifferent >= prev.indifferent && c.quiet >= prev.quiet);
            prop_assert!(c.ignorant <= prev.ignorant);
            prev = *c;
        }
        prop_assert_eq!(t.counts.last().unwrap().active, 0);
        prop_assert!(t.final_states.iter().all(|s| *s != VertexState::Active));
        let aware = t.final_states.iter().filter(|s| **s != VertexState::Ignorant).count();
        prop_assert_eq!(aware, 300 - t.counts.last().unwrap().ignorant);
    }
}
