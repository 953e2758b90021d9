mod common;

use common::*;
use fqaoa::ansatz::{Ansatz, AnsatzParams, Variant};
use fqaoa::hf::{calibrate_t_hop, hf_iterate, hopping_range, HfSettings};
use fqaoa::optimizer::{
    central_gradient, minimize_bfgs, optimize_level, optimize_levels, BfgsOptions, FnObjective,
    OptimizerSettings,
};
use fqaoa::portfolio::{brute_force_solve, build_cost_diagonal, OracleResult};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Toy {
    oracle: OracleResult,
    hop_range: f64,
    ansatz: Vec<Ansatz>,
}

fn toy(seed: u64, l: usize, m: usize) -> Toy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = random_model(&mut rng, l);
    let inst = random_instance(&mut rng, l, m);
    let b = basis(l, m);
    let cost = build_cost_diagonal(&inst, &model, &b).unwrap();
    let oracle = brute_force_solve(&inst, &model, &b).unwrap();
    let t_hop = calibrate_t_hop(&inst, &model, &b).unwrap();
    let hf = hf_iterate(&inst, &model, t_hop, &HfSettings::default()).unwrap();
    let ansatz = Variant::ALL
        .iter()
        .map(|&v| Ansatz::new(v, b.clone(), cost.clone(), t_hop, Some(&hf)).unwrap())
        .collect();
    Toy {
        oracle,
        hop_range: t_hop * hopping_range(l, m).unwrap(),
        ansatz,
    }
}

fn quick() -> OptimizerSettings {
    OptimizerSettings {
        restarts: 3,
        ..Default::default()
    }
}

#[test]
fn adjoint_gradient_matches_finite_differences() {
    let t = toy(21, 6, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for a in &t.ansatz {
        for p in [1, 2, 4] {
            let params = random_params(&mut rng, p, 1.0);
            let (value, grad) = a.value_and_gradient(&params);
            assert_eq!(value, a.objective(&params));
            let f = |x: &[f64]| a.objective(&AnsatzParams::from_slice(x).unwrap());
            let fd = central_gradient(f, &params.to_vec(), 1e-6);
            let scale = grad.iter().fold(1.0f64, |m, g| m.max(g.abs()));
            for (g, d) in grad.iter().zip(&fd) {
                assert!((g - d).abs() <= 1e-6 * scale, "{} p={p}: {g} vs {d}", a.variant());
            }
        }
    }
}

#[test]
fn central_difference_agrees_with_richardson() {
    let t = toy(23, 5, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for a in &t.ansatz {
        let params = random_params(&mut rng, 2, 1.0);
        let x = params.to_vec();
        let f = |y: &[f64]| a.objective(&AnsatzParams::from_slice(y).unwrap());
        let fd = central_gradient(f, &x, 1e-6);
        let h1 = central_gradient(f, &x, 1e-2);
        let h2 = central_gradient(f, &x, 5e-3);
        for k in 0..x.len() {
            let rich = (4.0 * h2[k] - h1[k]) / 3.0;
            let scale = rich.abs().max(1e-3);
            assert!((fd[k] - rich).abs() <= 1e-4 * scale, "{k}: {} vs {rich}", fd[k]);
        }
    }
}

#[test]
fn level_one_beats_a_grid_scan() {
    let t = toy(25, 4, 2);
    let a = &t.ansatz[1];
    let w = t.oracle.width;
    let n = 100;
    let (mut best, mut worst_step) = (f64::INFINITY, 0.0f64);
    let mut grid = vec![vec![0.0; n]; n];
    for (i, row) in grid.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let g = -std::f64::consts::PI / w + 2.0 * std::f64::consts::PI / w * i as f64 / n as f64;
            let b = -std::f64::consts::PI / t.hop_range
                + 2.0 * std::f64::consts::PI / t.hop_range * j as f64 / n as f64;
            *cell = a.objective(&AnsatzParams::new(vec![g], vec![b]).unwrap());
            best = best.min(*cell);
        }
    }
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            worst_step = worst_step
                .max((grid[i + 1][j] - grid[i][j]).abs())
                .max((grid[i][j + 1] - grid[i][j]).abs());
        }
    }
    let r = optimize_level(a, &t.oracle, t.hop_range, 1, &quick(), 1, 0, None).unwrap();
    assert!(r.energy <= best + 1e-9, "{} vs grid {best}", r.energy);
    assert!(r.energy >= best - worst_step, "{} vs grid {best}", r.energy);
}

#[test]
fn warm_started_levels_never_get_worse() {
    let t = toy(26, 6, 2);
    for a in &t.ansatz {
        let levels = optimize_levels(a, &t.oracle, t.hop_range, 4, &quick(), 5, 3).unwrap();
        assert_eq!(levels.len(), 5);
        for w in levels.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-9, "{}: {:?}", a.variant(), w);
        }
        for r in &levels {
            assert!(r.energy >= t.oracle.e_min - 1e-9);
            assert_eq!(r.energy, a.objective(&r.params));
            assert_eq!(r.params.level(), r.level);
        }
    }
}

#[test]
fn more_restarts_never_hurt() {
    let t = toy(27, 6, 3);
    let a = &t.ansatz[0];
    for p in 1..=3 {
        let one = OptimizerSettings {
            restarts: 1,
            ..Default::default()
        };
        let three = OptimizerSettings {
            restarts: 3,
            ..Default::default()
        };
        let r1 = optimize_level(a, &t.oracle, t.hop_range, p, &one, 9, 2, None).unwrap();
        let r3 = optimize_level(a, &t.oracle, t.hop_range, p, &three, 9, 2, None).unwrap();
        assert!(r3.energy <= r1.energy, "p={p}");
        assert_eq!(r3.restart_ratios[0], r1.restart_ratios[0]);
    }
}

#[test]
fn runs_are_bit_identical() {
    let t = toy(28, 6, 2);
    let a = &t.ansatz[2];
    let x = optimize_levels(a, &t.oracle, t.hop_range, 3, &quick(), 4, 1).unwrap();
    let y = optimize_levels(a, &t.oracle, t.hop_range, 3, &quick(), 4, 1).unwrap();
    assert_eq!(x, y);
    let z = optimize_level(a, &t.oracle, t.hop_range, 0, &quick(), 4, 1, None).unwrap();
    assert_eq!(z.energy, x[0].energy);
}

#[test]
fn zero_width_instances_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let model = random_model(&mut rng, 3);
    let inst = random_instance(&mut rng, 3, 3);
    let b = basis(3, 3);
    let cost = build_cost_diagonal(&inst, &model, &b).unwrap();
    let oracle = brute_force_solve(&inst, &model, &b).unwrap();
    let a = Ansatz::new(Variant::XyQaoa, b, cost, 0.0, None).unwrap();
    assert!(optimize_level(&a, &oracle, 1.0, 1, &quick(), 0, 0, None).is_err());
}

#[test]
fn bfgs_on_a_shifted_bowl_in_many_dimensions() {
    let c: Vec<f64> = (0..12).map(|k| (k as f64 * 0.7).sin()).collect();
    let f = FnObjective(|x: &[f64]| {
        x.iter()
            .zip(&c)
            .enumerate()
            .map(|(k, (a, b))| (k + 1) as f64 * (a - b).powi(2))
            .sum::<f64>()
    });
    let r = minimize_bfgs(&f, &vec![0.0; 12], &BfgsOptions::default());
    for (a, b) in r.x.iter().zip(&c) {
        assert!((a - b).abs() < 1e-6);
    }
}
