mod common;

use gmm_core::data::gen_latent_shift_task;
use gmm_core::engine::{Biased, Greedy, RandomWalk, SelectContext, Selector};
use gmm_core::lssvm::{solve_bound, MultifoldBias, StochasticSubset};
use gmm_core::rng::{stream, Stream};
use gmm_core::{run, GmmConfig, LatentConfig, LssvmProblem, Problem, Solution, Start, StructuredExample};
use rand::Rng;
use rand_distr::StandardNormal;

const HAND_SET_W: [f64; 8] = [0.3, -0.2, -0.5, 0.1, -0.4, 0.25, -0.3, 0.2];

fn toy(seed: u64) -> LssvmProblem {
    gen_latent_shift_task(8, 2, 1.0, 0.3, seed)
        .unwrap()
        .problem(0.4)
        .unwrap()
}

fn tau(p: &LssvmProblem, value: f64) -> f64 {
    p.solver.tau_rel * (1.0 + value.abs())
}

/// Two labels, one latent value, scalar inputs placed in the label's slot.
fn separable_four() -> LssvmProblem {
    let examples = [(-2.0, 0), (-1.0, 0), (1.0, 1), (2.0, 1)]
        .into_iter()
        .map(|(x, label)| {
            StructuredExample::tabulate(label, 2, 1, 2, |y, _| {
                let mut f = vec![0.0; 2];
                f[y] = x;
                f
            })
            .unwrap()
        })
        .collect();
    LssvmProblem::new(examples, 2, 0.1, LssvmProblem::zero_one_loss(2)).unwrap()
}

fn context<'a>(t: usize, eta: f64, w: &'a Solution, z_prev: &'a LatentConfig, v_prev: f64) -> SelectContext<'a> {
    SelectContext {
        t,
        run_seed: 7,
        eta,
        w_prev: w,
        z_prev: Some(z_prev),
        v_prev,
        objective_prev: f64::NAN,
        tol: 1e-9,
    }
}

#[test]
fn objective_matches_enumeration_on_eight_examples() {
    for seed in 0..5 {
        let p = toy(seed);
        let value = p.objective(&HAND_SET_W);
        let expected = common::lssvm_objective(&p, &HAND_SET_W);
        assert!((value - expected).abs() <= 1e-12, "{value} vs {expected}");
    }
}

#[test]
fn single_latent_value_reduces_to_structural_svm() {
    let p = separable_four();
    let w = [0.7, -0.3];
    let hinge: f64 = p
        .examples
        .iter()
        .map(|ex| {
            let own = common::dot(&w, ex.phi(ex.label, 0));
            (0..2)
                .map(|y| common::dot(&w, ex.phi(y, 0)) + if y == ex.label { 0.0 } else { 1.0 })
                .fold(f64::NEG_INFINITY, f64::max)
                - own
        })
        .sum::<f64>()
        / 4.0;
    let expected = 0.5 * 0.1 * common::dot(&w, &w) + hinge;
    assert!((p.objective(&w) - expected).abs() <= 1e-12);
}

#[test]
fn coordinate_delta_matches_full_recomputation() {
    let p = toy(3);
    let mut rng = stream(1, Stream::Init);
    for _ in 0..200 {
        let w: Vec<f64> = (0..p.dim).map(|_| rng.sample(StandardNormal)).collect();
        let z = LatentConfig((0..8).map(|_| rng.random_range(0..3)).collect());
        let i = rng.random_range(0..8);
        let value = rng.random_range(0..3);
        let mut moved = z.clone();
        moved[i] = value;
        let full = p.bound_value(&w, &moved) - p.bound_value(&w, &z);
        let ex = &p.examples[i];
        let by_hand = (common::dot(&w, ex.phi(ex.label, z[i])) - common::dot(&w, ex.phi(ex.label, value))) / 8.0;
        let delta = p.coordinate_delta(&w, &z, i, value);
        assert!((delta - full).abs() <= 1e-12);
        assert!((delta - by_hand).abs() <= 1e-15);
        assert!((p.bound_value(&w, &z) - common::lssvm_bound(&p, &w, &z)).abs() <= 1e-12);
    }
}

#[test]
fn huge_regularizer_drives_weights_to_zero() {
    let mut p = toy(1);
    p.lambda = 1e6;
    let z = LatentConfig(vec![1; 8]);
    let sol = solve_bound(&p, &p.all_indices(), &z, &[], &p.solver).unwrap();
    assert!(sol.w.iter().all(|v| v.abs() < 1e-5));
    assert!((p.bound_value(&sol.w, &z) - 1.0).abs() < 1e-4);
}

#[test]
fn bound_minimizer_matches_grid_search() {
    let p = separable_four();
    let z = LatentConfig(vec![0; 4]);
    let sol = solve_bound(&p, &p.all_indices(), &z, &[], &p.solver).unwrap();
    let value = |w: &[f64]| common::lssvm_bound(&p, w, &z);
    let solved = value(&sol.w);

    // Coarse grid, then successively finer grids around the best cell.
    let (mut center, mut half, mut best) = ([0.0, 0.0], 4.0, f64::INFINITY);
    for _ in 0..8 {
        let steps = 200;
        let h = 2.0 * half / steps as f64;
        let mut arg = center;
        for a in 0..=steps {
            for b in 0..=steps {
                let w = [center[0] - half + a as f64 * h, center[1] - half + b as f64 * h];
                let v = value(&w);
                if v < best {
                    best = v;
                    arg = w;
                }
            }
        }
        center = arg;
        half = 4.0 * h;
    }
    assert!(solved <= best + tau(&p, best), "solver {solved} vs grid {best}");
    assert!(best <= solved + 1e-9, "grid {best} beats solver {solved}");
}

#[test]
fn bound_solver_is_deterministic() {
    let p = toy(2);
    let z = LatentConfig(vec![0, 1, 2, 0, 1, 2, 0, 1]);
    let a = solve_bound(&p, &p.all_indices(), &z, &[], &p.solver).unwrap();
    let b = solve_bound(&p, &p.all_indices(), &z, &[], &p.solver).unwrap();
    assert_eq!(a.w, b.w);
}

#[test]
fn greedy_with_full_progress_is_cccp() {
    for seed in 0..3 {
        let task = gen_latent_shift_task(8, 2, 1.0, 0.3, seed).unwrap();
        let p = task.problem(0.4).unwrap();
        let z0 = task.adversarial_latent();
        let trace = run(&p, &Start::bound(z0.clone()), &GmmConfig::default(), &mut Greedy).unwrap();
        let (w, steps) = common::cccp(&p, &z0, trace.epsilon, 500);
        assert_eq!(trace.iterations(), steps.len());
        if let Some(last) = steps.last() {
            assert_eq!(trace.latent.0, last.latent);
        }
        let ours = trace.final_objective();
        let oracle = common::lssvm_objective(&p, &w);
        assert!((ours - oracle).abs() <= 10.0 * tau(&p, oracle));
    }
}

#[test]
fn full_subset_is_the_touching_configuration() {
    let p = toy(4);
    let w: Solution = HAND_SET_W.to_vec().into();
    let z_prev = LatentConfig(vec![0; 8]);
    let v = p.bound_value(&w, &z_prev);
    let mut selector = StochasticSubset::default();
    let ctx = context(selector.ramp, 1.0, &w, &z_prev, v);
    let z = selector.select(&p, &ctx, &mut stream(0, Stream::Iteration(1))).unwrap();
    assert_eq!(z, p.touching_config(&w));
}

#[test]
fn empty_subset_keeps_a_tight_previous_configuration() {
    let p = toy(4);
    let w: Solution = HAND_SET_W.to_vec().into();
    let z_prev = LatentConfig(vec![2, 0, 1, 2, 0, 1, 2, 0]);
    let v = p.bound_value(&w, &z_prev);
    let mut selector = StochasticSubset::default();
    assert_eq!(selector.subset_size(8, 0), 0);
    let ctx = context(0, 0.5, &w, &z_prev, v);
    let z = selector.select(&p, &ctx, &mut stream(0, Stream::Iteration(1))).unwrap();
    assert_eq!(z, z_prev);
}

#[test]
fn every_selector_returns_valid_bounds() {
    let p = toy(5);
    let mut rng = stream(9, Stream::Init);
    let mut selectors: Vec<(Box<dyn Selector<LssvmProblem>>, usize)> = vec![
        (Box::new(Greedy), 1000),
        (Box::new(RandomWalk::default()), 1000),
        (Box::new(StochasticSubset::default()), 1000),
        (Box::new(Biased::new(MultifoldBias::new(4))), 100),
    ];
    for (selector, rounds) in selectors.iter_mut() {
        for round in 0..*rounds {
            let w: Solution = (0..p.dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect::<Vec<_>>()
                .into();
            let z_prev = LatentConfig((0..8).map(|_| rng.random_range(0..3)).collect());
            let b = p.bound_value(&w, &z_prev);
            let v = b - 0.1 * (b - p.objective(&w));
            let ctx = context(1 + round % 12, 0.1, &w, &z_prev, v);
            let z = selector
                .select(&p, &ctx, &mut stream(round as u64, Stream::Iteration(ctx.t)))
                .unwrap();
            assert!(p.bound_value(&w, &z) <= v + ctx.tol);
        }
    }
}

#[test]
fn multifold_choice_is_optimal_under_the_exact_bias() {
    for seed in 0..5 {
        let task = gen_latent_shift_task(8, 2, 1.0, 0.3, seed).unwrap();
        let p = task.problem(0.4).unwrap();
        let z_prev = task.adversarial_latent();
        let w = p.optimize_bound(&z_prev, &[]).unwrap();
        let b = p.bound_value(&w, &z_prev);
        let v = b - 0.5 * (b - p.objective(&w));
        let mut selector = Biased::new(MultifoldBias::new(2));
        selector.record_path = true;
        let ctx = context(1, 0.5, &w, &z_prev, v);
        let chosen = selector
            .select(&p, &ctx, &mut stream(seed, Stream::Iteration(1)))
            .unwrap();

        let models: Vec<Vec<f64>> = selector.bias.models().iter().map(|m| m.0.clone()).collect();
        let fold_of = selector.bias.fold_of().to_vec();
        let bias = |z: &[usize]| common::multifold_bias(&p, &models, &fold_of, z);

        let mut best_overall = f64::NEG_INFINITY;
        common::for_each_config(8, 3, |z| best_overall = best_overall.max(bias(z)));
        let proposal = &selector.last_path[0];
        assert!(
            bias(proposal) >= best_overall - 1e-12,
            "proposal is not the bias maximizer"
        );

        let valid_considered = selector
            .last_path
            .iter()
            .filter(|z| common::lssvm_bound(&p, &w, z) <= v + ctx.tol)
            .map(|z| bias(z))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(common::lssvm_bound(&p, &w, &chosen) <= v + ctx.tol);
        assert!(bias(&chosen) >= valid_considered - 1e-12);

        let touching = p.touching_config(&w);
        if chosen != touching {
            assert!(bias(&chosen) >= bias(&touching) - 1e-12);
        }
    }
}

#[test]
fn trained_model_beats_zero_weights_on_training_error() {
    let task = gen_latent_shift_task(40, 2, 1.0, 0.3, 1).unwrap();
    let p = task.problem(0.4).unwrap();
    let trace = run(
        &p,
        &Start::bound(task.adversarial_latent()),
        &GmmConfig::default(),
        &mut Greedy,
    )
    .unwrap();
    let zero = vec![0.0; p.dim];
    assert!(p.training_error(&trace.solution) <= p.training_error(&zero));
}

#[test]
fn without_shifts_cccp_and_gmm_agree() {
    let task = gen_latent_shift_task(16, 2, 0.0, 0.3, 2).unwrap();
    let p = task.problem(0.4).unwrap();
    let start = Start::bound(task.adversarial_latent());
    let cccp = run(&p, &start, &GmmConfig::default(), &mut Greedy).unwrap();
    let gmm = run(
        &p,
        &start,
        &GmmConfig::with_eta(0.1),
        &mut Biased::new(MultifoldBias::new(4)),
    )
    .unwrap();
    let (a, b) = (cccp.final_objective(), gmm.final_objective());
    assert!((a - b).abs() <= 10.0 * tau(&p, a), "{a} vs {b}");
}
