mod common;

use std::time::Instant;

use common::*;
use fqaoa::basis::{OccupationBasis, StateVector};
use fqaoa::metrics::{cost_histogram, expected_excess, negawatt_std, total_negawatt};
use fqaoa::portfolio::{
    brute_force_solve, build_cost_diagonal, cost_of_bitstring, estimate_model, read_usage,
    synth_usage, write_usage, DemandModel, InstanceConfig, SynthProfile,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn cost_matches_expanded_quadratic_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for (l, m) in [(6, 2), (8, 3), (10, 5)] {
        let model = random_model(&mut rng, l);
        let inst = random_instance(&mut rng, l, m);
        let b = OccupationBasis::new(l, m).unwrap();
        let diag = build_cost_diagonal(&inst, &model, &b).unwrap();
        let n = inst.n_times() as f64;
        let cov = inst.period_cov(&model);
        for (k, &x) in b.states().iter().enumerate() {
            let bit = |a: usize| (x >> a & 1) as f64;
            let mut want = 0.0;
            for (&t, &target) in inst.times.iter().zip(&inst.target) {
                let mean = model.mean(t);
                for a in 0..l {
                    for c in 0..l {
                        want += (cov[(a, c)] / n + mean[a] * mean[c] / n) * bit(a) * bit(c);
                    }
                    want -= 2.0 * target * mean[a] * bit(a) / n;
                }
                want += target * target / n;
            }
            assert!((diag[k] - want).abs() < 1e-12, "L={l} x={x:b}");
            assert_eq!(diag[k], cost_of_bitstring(&inst, &model, x).unwrap());
        }
    }
}

#[test]
fn estimated_covariance_matches_two_pass() {
    let recs = synth_usage(32, 5, 17, &SynthProfile::default()).unwrap();
    let model = estimate_model(&recs).unwrap();
    let d = recs.days() as f64;
    for t in [0, 7, 19] {
        let mean: Vec<f64> = (0..5)
            .map(|l| (0..recs.days()).map(|k| recs.usage(k, t, l)).sum::<f64>() / d)
            .collect();
        for a in 0..5 {
            assert!((model.mean(t)[a] - mean[a]).abs() < 1e-14);
            for b in 0..5 {
                let s: f64 = (0..recs.days())
                    .map(|k| (recs.usage(k, t, a) - mean[a]) * (recs.usage(k, t, b) - mean[b]))
                    .sum();
                assert!((model.cov(t)[(a, b)] - s / (d - 1.0)).abs() < 1e-14);
            }
        }
    }
}

fn permuted(model: &DemandModel, perm: &[usize]) -> DemandModel {
    let l = perm.len();
    let means = (0..model.hours())
        .map(|t| (0..l).map(|k| model.mean(t)[perm[k]]).collect())
        .collect();
    let covs = (0..model.hours())
        .map(|t| DMatrix::from_fn(l, l, |i, j| model.cov(t)[(perm[i], perm[j])]))
        .collect();
    DemandModel::new(means, covs).unwrap()
}

#[test]
fn cost_is_invariant_under_relabelling() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let (l, m) = (7, 3);
    let model = random_model(&mut rng, l);
    let inst = random_instance(&mut rng, l, m);
    let perm = [3, 0, 6, 1, 5, 2, 4];
    let other = permuted(&model, &perm);
    let b = OccupationBasis::new(l, m).unwrap();
    for &x in b.states() {
        // site k of the permuted model is site perm[k] of the original
        let y = (0..l).fold(0u32, |acc, k| acc | ((x >> perm[k] & 1) << k));
        let a = cost_of_bitstring(&inst, &model, x).unwrap();
        let c = cost_of_bitstring(&inst, &other, y).unwrap();
        assert!((a - c).abs() < 1e-12);
    }
    let o1 = brute_force_solve(&inst, &model, &b).unwrap();
    let o2 = brute_force_solve(&inst, &other, &b).unwrap();
    assert!((o1.e_min - o2.e_min).abs() < 1e-12);
    assert!((o1.width - o2.width).abs() < 1e-12);
}

#[test]
fn penalty_only_argmin_hits_the_target() {
    // with zero covariance the unique pair summing to P' wins
    let means = vec![0.1, 0.35, 0.2, 0.9, 0.55, 0.05];
    let model = DemandModel::new(vec![means; 24], vec![DMatrix::zeros(6, 6); 24]).unwrap();
    let inst = InstanceConfig::period(6, 2, 3, 3, 1.45);
    let b = OccupationBasis::new(6, 2).unwrap();
    let o = brute_force_solve(&inst, &model, &b).unwrap();
    assert_eq!(o.argmin, vec![0b011000]);
    assert!(o.e_min.abs() < 1e-24);
}

#[test]
fn dicke_expectations_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let (l, m) = (8, 3);
    let model = random_model(&mut rng, l);
    let inst = random_instance(&mut rng, l, m);
    let b = basis(l, m);
    let diag = build_cost_diagonal(&inst, &model, &b).unwrap();
    let o = brute_force_solve(&inst, &model, &b).unwrap();
    let s = StateVector::dicke(b.clone());
    let excess = expected_excess(&s, &diag, o.e_min).unwrap();
    assert!((excess - o.random_sampling_excess()).abs() < 1e-12);
    let t = inst.times[0];
    let sum: f64 = model.mean(t).iter().sum();
    assert!((total_negawatt(&s, &model, t) - m as f64 / l as f64 * sum).abs() < 1e-12);
    // brute force over outcomes for the spread
    let n = b.dim() as f64;
    let (mut first, mut second) = (0.0, 0.0);
    for &x in b.states() {
        let sites: Vec<usize> = (0..l).filter(|k| x >> k & 1 == 1).collect();
        let p: f64 = sites.iter().map(|&k| model.mean(t)[k]).sum();
        let v: f64 = sites
            .iter()
            .flat_map(|&i| sites.iter().map(move |&j| (i, j)))
            .map(|(i, j)| model.cov(t)[(i, j)])
            .sum();
        first += p / n;
        second += (v + p * p) / n;
    }
    assert!((negawatt_std(&s, &model, t) - (second - first * first).sqrt()).abs() < 1e-12);
    // the histogram of the uniform state is the normalised cost histogram
    let h = cost_histogram(&s, &diag, o.e_min, o.width, 10).unwrap();
    let mut counts = [0.0; 10];
    for &e in &diag {
        let k = (((e - o.e_min) / o.width * 10.0).floor() as usize).min(9);
        counts[k] += 1.0 / n;
    }
    for k in 0..10 {
        assert!((h.masses[k] - counts[k]).abs() < 1e-12);
    }
    let weighted: f64 = b
        .states()
        .iter()
        .zip(&diag)
        .map(|(_, e)| (e - o.e_min) / n)
        .sum();
    assert!((weighted - excess).abs() < 1e-12);
}

#[test]
fn histogram_of_a_point_mass() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let model = random_model(&mut rng, 6);
    let inst = random_instance(&mut rng, 6, 3);
    let b = basis(6, 3);
    let diag = build_cost_diagonal(&inst, &model, &b).unwrap();
    let o = brute_force_solve(&inst, &model, &b).unwrap();
    let k = rng.random_range(0..b.dim());
    let s = StateVector::basis_state(b, k);
    let h = cost_histogram(&s, &diag, o.e_min, o.width, 10).unwrap();
    assert_eq!(h.masses.iter().filter(|&&m| m == 1.0).count(), 1);
    assert_eq!(h.masses.iter().sum::<f64>(), 1.0);
}

#[test]
fn evening_variance_exceeds_night() {
    let recs = synth_usage(36, 20, 60, &SynthProfile::default()).unwrap();
    let model = estimate_model(&recs).unwrap();
    let total_var = |t: usize| model.cov(t).sum();
    let night: f64 = (0..3).map(total_var).sum();
    let evening: f64 = (18..21).map(total_var).sum();
    assert!(evening > 5.0 * night, "evening {evening} night {night}");
    for t in 0..24 {
        if t != 19 {
            assert!(total_var(19) >= total_var(t) || (18..=21).contains(&t));
        }
    }
}

#[test]
fn full_size_brute_force_is_fast() {
    let recs = synth_usage(37, 20, 60, &SynthProfile::default()).unwrap();
    let model = estimate_model(&recs).unwrap();
    let b = OccupationBasis::new(20, 5).unwrap();
    assert_eq!(b.dim(), 15504);
    let inst = InstanceConfig::period(20, 5, 18, 3, 1.5);
    let start = Instant::now();
    let o = brute_force_solve(&inst, &model, &b).unwrap();
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "{elapsed:?}");
    assert!(o.width > 0.0);
    for &x in &o.argmin {
        assert!((cost_of_bitstring(&inst, &model, x).unwrap() - o.e_min).abs() < 1e-12);
    }
}

#[test]
fn usage_csv_round_trip_preserves_the_model() {
    let recs = synth_usage(38, 6, 9, &SynthProfile::default()).unwrap();
    let mut buf = Vec::new();
    write_usage(&recs, &mut buf).unwrap();
    let back = read_usage(buf.as_slice()).unwrap();
    assert_eq!(back, recs);
    assert_eq!(estimate_model(&back).unwrap(), estimate_model(&recs).unwrap());
}

#[test]
fn constant_usage_gives_zero_covariance() {
    let profile = SynthProfile {
        noise: 0.0,
        ..Default::default()
    };
    let recs = synth_usage(39, 4, 5, &profile).unwrap();
    let model = estimate_model(&recs).unwrap();
    for t in 0..24 {
        assert!(model.cov(t).amax() < 1e-15);
    }
}
