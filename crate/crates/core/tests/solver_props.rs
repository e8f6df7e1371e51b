use hyperlap::geometry::{LabelConstraints, PointCloud};
use hyperlap::hypergraph::{
    build_eps_ball, build_knn, build_pair_graph, Hyperedge, Hypergraph, HypergraphKind, PairRule, PairWeights,
    WeightScheme,
};
use hyperlap::prox::{prox_g_star, ProxParams};
use hyperlap::solver::{
    apply_edge_op, apply_edge_op_adjoint, default_steps, run_from, run_with_picks, sample_edges, SaddleProblem,
    SaddleState, SolverConfig, DEFAULT_SAFETY,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_instance(seed: u64, n: usize) -> (Hypergraph, LabelConstraints) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cloud = PointCloud::new(2, (0..2 * n).map(|_| rng.random::<f64>()).collect()).unwrap();
    let scheme = if seed % 2 == 0 { WeightScheme::Homogeneous } else { WeightScheme::SelfTuning { k0: 4 } };
    let hg = build_knn(&cloud, 6, scheme).unwrap();
    let labels = LabelConstraints::new(vec![(0, -1.0), (n / 2, 0.5), (n - 1, 2.0)], n).unwrap();
    (hg, labels)
}

fn path3() -> Hypergraph {
    let c = PointCloud::from_scalars(&[0.0, 0.5, 1.0]).unwrap();
    build_pair_graph(&c, PairRule::Eps(0.6), WeightScheme::Homogeneous).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn edge_operator_and_adjoint_are_adjoint(
        m in 1usize..9,
        seed in 0u64..10_000,
        p in prop::sample::select(vec![1.0, 1.5, 2.0, 3.0]),
        weighted in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = m + 3;
        let mut members: Vec<usize> = rand::seq::index::sample(&mut rng, n, m).into_vec();
        members.sort_unstable();
        let pairs = m * (m - 1) / 2;
        let weights = if weighted {
            PairWeights::Explicit((0..pairs).map(|_| rng.random::<f64>() * 2.0).collect())
        } else {
            PairWeights::Uniform
        };
        let e = Hyperedge::new(members[0], members, weights).unwrap();
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let alpha: Vec<f64> = (0..pairs).map(|_| rng.random_range(-1.0..1.0)).collect();
        let au = apply_edge_op(&u, &e, p).unwrap();
        let mut ata = vec![0.0; n];
        apply_edge_op_adjoint(&alpha, &e, p, &mut ata, 1.0).unwrap();
        let lhs: f64 = au.iter().zip(&alpha).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.iter().zip(&ata).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn labels_hold_and_z_stays_in_sync(seed in 0u64..10_000, p in prop::sample::select(vec![1.0, 1.5, 2.0, 3.0])) {
        let (hg, labels) = random_instance(seed, 30);
        let problem = SaddleProblem::new(&hg, labels.clone(), p).unwrap();
        let (tau, sigma) = default_steps(&hg, p, DEFAULT_SAFETY, 0.1).unwrap();
        let config = SolverConfig::for_hypergraph(&hg, p, 0.1).unwrap().with_seed(seed);
        let picks = sample_edges(&config, hg.n_edges(), 400).unwrap();
        let prob = 1.0 / hg.n_edges() as f64;
        let mut state = SaddleState::new(&problem, Some(&vec![0.3; 30])).unwrap();
        for (t, &k) in picks.iter().enumerate() {
            state.step(&problem, tau, sigma, k, prob).unwrap();
            let u = state.u();
            for &(i, y) in labels.entries() {
                prop_assert_eq!(u[i], y, "label {} after step {}", i, t);
            }
        }
        prop_assert!(state.audit_z(&problem) < 1e-10);
    }

    #[test]
    fn oversized_steps_are_rejected(seed in 0u64..10_000, factor in 1.01f64..100.0) {
        let (hg, labels) = random_instance(seed, 20);
        let problem = SaddleProblem::new(&hg, labels, 2.0).unwrap();
        let mut config = SolverConfig::for_hypergraph(&hg, 2.0, 1.0).unwrap();
        prop_assert!(config.validate(&problem).is_ok());
        config.sigma *= factor;
        prop_assert!(config.validate(&problem).is_err());
    }
}

#[test]
fn best_objective_so_far_never_rises_after_burn_in() {
    for seed in 0..6 {
        let (hg, labels) = random_instance(seed, 40);
        let problem = SaddleProblem::new(&hg, labels, 2.0).unwrap();
        let config = SolverConfig::for_hypergraph(&hg, 2.0, 0.1).unwrap().with_epochs(300).with_tol(0.0).with_seed(seed);
        let (_, diag) = run_from(&problem, &config, None).unwrap();
        let mut best = f64::INFINITY;
        let mut prev_best = f64::INFINITY;
        for (e, &obj) in diag.objective_history.iter().enumerate() {
            best = best.min(obj);
            if e >= 5 {
                assert!(best <= prev_best + 1e-8, "seed {seed} epoch {e}");
            }
            prev_best = best;
        }
        // the run settles: the last checkpoint is close to the best seen
        assert!(diag.final_objective <= best * (1.0 + 1e-4) + 1e-12, "seed {seed}: {} vs {best}", diag.final_objective);
    }
}

/// Plain PDHG with dense matrices, written independently of the solver.
fn dense_pdhg(a: &[Vec<f64>], labels: &[(usize, f64)], tau: f64, sigma: f64, p: f64, steps: usize) -> Vec<Vec<f64>> {
    let (rows, n) = (a.len(), a[0].len());
    let mut u = vec![0.0; n];
    let (mut alpha, mut bar) = (vec![0.0; rows], vec![0.0; rows]);
    let params = ProxParams::new(sigma, p).unwrap();
    let mut trace = Vec::new();
    for _ in 0..steps {
        for j in 0..n {
            let atb: f64 = (0..rows).map(|r| a[r][j] * bar[r]).sum();
            u[j] -= tau * atb;
        }
        for &(i, y) in labels {
            u[i] = y;
        }
        let beta: Vec<f64> = (0..rows).map(|r| alpha[r] + sigma * (0..n).map(|j| a[r][j] * u[j]).sum::<f64>()).collect();
        let next = prox_g_star(&beta, params);
        bar = next.iter().zip(&alpha).map(|(x, y)| 2.0 * x - y).collect();
        alpha = next;
        trace.push(u.clone());
    }
    trace
}

#[test]
fn single_edge_iteration_is_classical_pdhg() {
    let weights = PairWeights::Explicit(vec![1.0, 0.5, 2.0]);
    let e = Hyperedge::new(1, vec![0, 1, 2], weights).unwrap();
    let hg = Hypergraph::new(3, vec![e.clone()], HypergraphKind::EpsBall { eps: 0.5 }, WeightScheme::Homogeneous).unwrap();
    let labels = vec![(0, 0.0), (2, 1.0)];
    for p in [1.0, 2.0, 3.0] {
        let a: Vec<Vec<f64>> = e
            .pairs()
            .map(|(i, j, w)| {
                let mut row = vec![0.0; 3];
                row[i] = w.powf(1.0 / p);
                row[j] = -w.powf(1.0 / p);
                row
            })
            .collect();
        let (tau, sigma) = default_steps(&hg, p, DEFAULT_SAFETY, 1.0).unwrap();
        let problem = SaddleProblem::new(&hg, LabelConstraints::new(labels.clone(), 3).unwrap(), p).unwrap();
        let reference = dense_pdhg(&a, &labels, tau, sigma, p, 200);
        let mut state = SaddleState::new(&problem, None).unwrap();
        for (t, want) in reference.iter().enumerate() {
            state.step(&problem, tau, sigma, 0, 1.0).unwrap();
            let got = state.u();
            for j in 0..3 {
                assert!((got[j] - want[j]).abs() <= 1e-12, "p={p} step {t} vertex {j}: {} vs {}", got[j], want[j]);
            }
        }
    }
}

#[test]
fn duality_gap_closes_on_the_path() {
    let hg = path3();
    let labels = LabelConstraints::new(vec![(0, 0.0), (2, 1.0)], 3).unwrap();
    for p in [1.5, 2.0, 3.0] {
        let problem = SaddleProblem::new(&hg, labels.clone(), p).unwrap();
        let config = SolverConfig::for_hypergraph(&hg, p, 1.0).unwrap().with_seed(3);
        let picks = sample_edges(&config, 2, 20_000).unwrap();
        let state = run_with_picks(&problem, config.tau, config.sigma, &picks, &[0.5, 0.5], None).unwrap();
        let u = state.u();
        let primal = hyperlap::energy::objective(&u, &hg, p).unwrap();
        let (dual, infeasible) = state.dual_value(&problem);
        assert!((u[1] - 0.5).abs() < 1e-6, "p={p}: u1={}", u[1]);
        assert!(infeasible < 1e-6, "p={p}: infeasibility {infeasible}");
        assert!(primal - dual <= 1e-4 && primal - dual >= -1e-6, "p={p}: gap {}", primal - dual);
    }
}

#[test]
fn warm_start_at_the_solution_stays_there() {
    let c = PointCloud::from_scalars(&[0.0, 0.2, 0.4, 0.6, 0.8, 1.0]).unwrap();
    let hg = build_eps_ball(&c, 0.25, WeightScheme::Homogeneous).unwrap();
    let labels = LabelConstraints::new(vec![(0, 0.0), (5, 1.0)], 6).unwrap();
    let problem = SaddleProblem::new(&hg, labels, 2.0).unwrap();
    let config = SolverConfig::for_hypergraph(&hg, 2.0, 1.0).unwrap().with_epochs(4000).with_tol(1e-12);
    let (u, first) = run_from(&problem, &config, None).unwrap();
    let (again, second) = run_from(&problem, &config.clone().with_seed(9), Some(&u)).unwrap();
    for (a, b) in u.iter().zip(&again) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
    assert!((first.final_objective - second.final_objective).abs() < 1e-9);
    // the profile is monotone between the labels
    assert!(u.windows(2).all(|w| w[0] <= w[1] + 1e-9), "{u:?}");
}
