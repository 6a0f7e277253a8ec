mod common;

use std::collections::HashSet;

use gmm_core::clustering::{self, DeadClusterRule};
use gmm_core::engine::{run_observed, Greedy, RandomWalk, Selector};
use gmm_core::lssvm::StochasticSubset;
use gmm_core::rng::{stream, Stream};
use gmm_core::{
    check_theorem_diagnostics, run, Centers, Dataset, GmmConfig, Initializer, KMeansProblem, LatentConfig, Problem,
    Start,
};
use rand::Rng;
use rand_distr::StandardNormal;

fn toy() -> Dataset {
    Dataset::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0], vec![10.0, 0.0], vec![12.0, 1.0]]).unwrap()
}

fn random_data(n: usize, dim: usize, seed: u64) -> Dataset {
    let mut rng = stream(seed, Stream::Data);
    let values: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-5.0..5.0)).collect();
    Dataset::new(values, dim).unwrap()
}

fn rows(centers: &Centers) -> Vec<Vec<f64>> {
    (0..centers.k).map(|j| centers.center(j).to_vec()).collect()
}

fn cfg(eta: f64, seed: u64) -> GmmConfig {
    GmmConfig {
        seed,
        ..GmmConfig::with_eta(eta)
    }
}

#[test]
fn greedy_with_full_progress_is_lloyd() {
    for (seed, init) in [
        (1, Initializer::Forgy),
        (2, Initializer::RandomPartition),
        (3, Initializer::KMeansPlusPlus),
    ] {
        let data = random_data(60, 2, seed);
        let problem = KMeansProblem::new(&data, 4);
        let (centers, z) = init.initialize(&data, 4, &mut stream(seed, Stream::Init)).unwrap();
        let expected = common::lloyd(&data, rows(&centers), 500);
        let mut seen = Vec::new();
        run_observed(
            &problem,
            &Start::point_with_latent(centers.to_solution(), z),
            &cfg(1.0, seed),
            &mut Greedy,
            |view| seen.push(rows(&Centers::from_solution(view.w, 4))),
        )
        .unwrap();
        assert_eq!(seen, expected, "seed {seed}, {}", init.name());
    }
}

#[test]
fn single_cluster_converges_to_the_mean_in_one_step() {
    let data = random_data(30, 3, 5);
    let problem = KMeansProblem::new(&data, 1);
    let trace = run(
        &problem,
        &Start::point(vec![7.0, -3.0, 2.0].into()),
        &cfg(1.0, 0),
        &mut Greedy,
    )
    .unwrap();
    assert_eq!(trace.iterations(), 1);
    assert_eq!(trace.records[1].d, 0.0);
    for (a, b) in trace.solution.iter().zip(data.mean()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn toy_runs_end_between_start_and_global_optimum() {
    let data = toy();
    let problem = KMeansProblem::new(&data, 2);
    let global = common::kmeans_global_min(&data, 2);
    for seed in 0..10 {
        let (centers, z) = Initializer::Forgy
            .initialize(&data, 2, &mut stream(seed, Stream::Init))
            .unwrap();
        let start = Start::point_with_latent(centers.to_solution(), z);
        for eta in [0.02, 0.5, 1.0] {
            let selectors: Vec<Box<dyn Selector<KMeansProblem>>> = vec![
                Box::new(Greedy),
                Box::new(RandomWalk::default()),
                Box::new(StochasticSubset::default()),
            ];
            for mut selector in selectors {
                let trace = run(&problem, &start, &cfg(eta, seed), &mut selector).unwrap();
                let f0 = trace.initial_objective();
                let last = trace.final_record();
                assert!(last.objective <= f0 + trace.tol);
                assert!(last.objective >= global - 1e-9);
                assert!(last.d < trace.epsilon);
            }
        }
    }
}

#[test]
fn toy_gap_sums_never_exceed_distance_to_global_optimum() {
    let data = toy();
    let problem = KMeansProblem::new(&data, 2);
    let global = common::kmeans_global_min(&data, 2);
    let start = Start::point(vec![0.0, 0.0, 2.0, 0.0].into());
    let config = GmmConfig {
        max_iters: 20,
        ..cfg(0.02, 4)
    };
    let trace = run(&problem, &start, &config, &mut RandomWalk::default()).unwrap();
    let f0 = trace.initial_objective();
    let mut sum = 0.0;
    for r in &trace.records[1..] {
        sum += trace.eta * r.d;
        assert!(sum <= f0 - global + trace.tol, "t={}: {sum} > {}", r.t, f0 - global);
    }
    assert!(check_theorem_diagnostics(&trace, global).is_ok());
}

#[test]
fn small_instances_never_beat_the_enumerated_optimum() {
    for seed in 0..8 {
        let n = 6 + seed as usize % 5;
        let k = 2 + seed as usize % 2;
        let data = random_data(n, 2, 100 + seed);
        let problem = KMeansProblem::new(&data, k);
        let global = common::kmeans_global_min(&data, k);
        let (centers, z) = Initializer::RandomPartition
            .initialize(&data, k, &mut stream(seed, Stream::Init))
            .unwrap();
        let trace = run(
            &problem,
            &Start::point_with_latent(centers.to_solution(), z),
            &cfg(0.1, seed),
            &mut RandomWalk::default(),
        )
        .unwrap();
        assert!(trace.final_objective() >= global - 1e-9);
        assert!(trace.final_objective() <= trace.initial_objective() + trace.tol);
    }
}

#[test]
fn coordinate_delta_matches_full_recomputation() {
    let mut rng = stream(11, Stream::Init);
    for seed in 0..20 {
        let data = random_data(25, 3, seed);
        let k = 4;
        let problem = KMeansProblem::new(&data, k);
        let w: Vec<f64> = (0..k * 3).map(|_| rng.random_range(-5.0..5.0)).collect();
        let z = LatentConfig((0..25).map(|_| rng.random_range(0..k)).collect());
        for _ in 0..50 {
            let i = rng.random_range(0..25);
            let value = rng.random_range(0..k);
            let mut moved = z.clone();
            moved[i] = value;
            let full = problem.bound_value(&w, &moved) - problem.bound_value(&w, &z);
            let x = data.point(i);
            let by_hand =
                common::sq_dist(x, &w[value * 3..value * 3 + 3]) - common::sq_dist(x, &w[z[i] * 3..z[i] * 3 + 3]);
            let delta = problem.coordinate_delta(&w, &z, i, value);
            let scale = problem.bound_value(&w, &z).max(1.0);
            assert!((delta - full).abs() <= 1e-9 * scale);
            assert!((delta - by_hand).abs() <= 1e-12 * scale);
        }
    }
}

#[test]
fn bound_minimizer_beats_random_perturbations() {
    let data = random_data(10, 2, 21);
    let z = LatentConfig(vec![0, 1, 2, 0, 1, 2, 0, 1, 2, 0]);
    let problem = KMeansProblem::new(&data, 3);
    let best = problem.optimize_bound(&z, &[]).unwrap();
    let value = problem.bound_value(&best, &z);
    let mut rng = stream(2, Stream::Init);
    for _ in 0..1000 {
        let perturbed: Vec<f64> = best
            .iter()
            .map(|&m| m + 0.5 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        assert!(value <= problem.bound_value(&perturbed, &z));
    }
}

#[test]
fn minimizer_of_two_point_cluster_is_their_midpoint() {
    let data = Dataset::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0], vec![9.0, 9.0]]).unwrap();
    let c = clustering::optimize_bound(&data, &LatentConfig(vec![0, 0, 1]), 2);
    assert_eq!(c.center(0), &[1.0, 0.0]);
}

#[test]
fn every_valid_configuration_is_reachable_by_the_walk() {
    let data = toy();
    let problem = KMeansProblem::new(&data, 2);
    let w = [4.0, 0.0, 9.0, 0.5];
    let f = problem.objective(&w);
    let previous = LatentConfig(vec![1, 1, 0, 0]);
    let b_prev = problem.bound_value(&w, &previous);
    let threshold = b_prev - 0.02 * (b_prev - f);

    let mut valid = HashSet::new();
    common::for_each_config(4, 2, |z| {
        if problem.bound_value(&w, &LatentConfig(z.to_vec())) <= threshold {
            valid.insert(z.to_vec());
        }
    });
    assert!(
        valid.len() >= 4,
        "toy should admit several valid bounds, got {}",
        valid.len()
    );

    let mut seen = HashSet::new();
    for walk in 0..10_000 {
        let out = RandomWalk::walk(&problem, &w, threshold, 40, &mut stream(walk, Stream::Iteration(1)));
        assert!(valid.contains(&out.config.0), "walk returned an invalid configuration");
        seen.insert(out.config.0);
    }
    assert_eq!(seen, valid);
}

#[test]
fn kmeanspp_seeds_both_clumps() {
    let data = Dataset::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![100.0, 0.0], vec![100.0, 1.0]]).unwrap();
    let mut both = 0;
    for seed in 0..10_000 {
        let (centers, _) = Initializer::KMeansPlusPlus
            .initialize(&data, 2, &mut stream(seed, Stream::Init))
            .unwrap();
        let left = (0..2).filter(|&j| centers.center(j)[0] < 50.0).count();
        if left == 1 {
            both += 1;
        }
    }
    assert!(both as f64 >= 0.99 * 10_000.0, "{both}");
}

#[test]
fn cluster_means_zero_the_center_gradient() {
    for seed in 0..5 {
        let data = random_data(200, 3, seed);
        let problem = KMeansProblem::new(&data, 6).with_dead_rule(DeadClusterRule::RespawnFarthest);
        let (centers, z) = Initializer::KMeansPlusPlus
            .initialize(&data, 6, &mut stream(seed, Stream::Init))
            .unwrap();
        let trace = run(
            &problem,
            &Start::point_with_latent(centers.to_solution(), z),
            &cfg(0.1, seed),
            &mut RandomWalk::default(),
        )
        .unwrap();
        let centers = Centers::from_solution(&trace.solution, 6);
        for j in 0..6 {
            let members: Vec<&[f64]> = data
                .points()
                .zip(trace.latent.iter())
                .filter(|(_, &zj)| zj == j)
                .map(|(x, _)| x)
                .collect();
            if members.is_empty() {
                continue;
            }
            let scale: f64 = members
                .iter()
                .flat_map(|x| x.iter())
                .map(|v| v.abs())
                .sum::<f64>()
                .max(1.0);
            for d in 0..3 {
                let grad: f64 = members.iter().map(|x| 2.0 * (centers.center(j)[d] - x[d])).sum();
                assert!(grad.abs() <= 1e-9 * scale, "cluster {j}: gradient {grad}");
            }
        }
    }
}
