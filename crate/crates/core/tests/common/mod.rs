#![allow(dead_code)]

use std::sync::Arc;

use fqaoa::ansatz::{AnsatzParams, Variant};
use fqaoa::basis::{boundary_sign, OccupationBasis};
use fqaoa::dense::{dense_reference_apply, DenseMatrix, DenseState, DenseTerm, FermionOps};
use fqaoa::hf::{bare_orbitals, HfSolution};
use fqaoa::portfolio::{DemandModel, InstanceConfig};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn cplx(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Random means in `[0.2, 1.0)` and covariances `0.02 A A^T` for 24 hours.
pub fn random_model(rng: &mut ChaCha8Rng, sites: usize) -> DemandModel {
    let mut means = Vec::new();
    let mut covs = Vec::new();
    for _ in 0..24 {
        means.push((0..sites).map(|_| rng.random_range(0.2..1.0)).collect());
        let a = DMatrix::from_fn(sites, sites, |_, _| rng.random_range(-1.0..1.0));
        let c = &a * a.transpose() * 0.02;
        covs.push((&c + c.transpose()) * 0.5);
    }
    DemandModel::new(means, covs).unwrap()
}

/// A random period of 1 to 3 hours with per-hour targets near `M/2`.
pub fn random_instance(rng: &mut ChaCha8Rng, sites: usize, particles: usize) -> InstanceConfig {
    let len = rng.random_range(1..=3);
    let start = rng.random_range(0..=24 - len);
    let mut inst = InstanceConfig::period(sites, particles, start, len, 0.0);
    inst.target = (0..len)
        .map(|_| rng.random_range(0.3..0.7) * particles as f64)
        .collect();
    inst
}

pub fn random_params(rng: &mut ChaCha8Rng, p: usize, scale: f64) -> AnsatzParams {
    AnsatzParams::new(
        (0..p).map(|_| rng.random_range(-scale..scale)).collect(),
        (0..p).map(|_| rng.random_range(-scale..scale)).collect(),
    )
    .unwrap()
}

/// The cost operator in expanded form,
/// `sum_ll' (sigma_T + (1/N) sum_t m_tl m_tl') n_l n_l' - (2/N) sum_t P'_t m_tl n_l + (1/N) sum_t P'_t^2`.
pub fn dense_cost(ops: &FermionOps, inst: &InstanceConfig, model: &DemandModel) -> DenseMatrix {
    let l = inst.participants;
    let n = inst.n_times() as f64;
    let mut q = inst.period_cov(model);
    let mut v = vec![0.0; l];
    let mut constant = 0.0;
    for (&t, &target) in inst.times.iter().zip(&inst.target) {
        let m = model.mean(t);
        for a in 0..l {
            for b in 0..l {
                q[(a, b)] += m[a] * m[b] / n;
            }
            v[a] -= 2.0 * target * m[a] / n;
        }
        constant += target * target / n;
    }
    let dim = ops.full_dim();
    ops.quadratic_number_form(&q, &v) + DenseMatrix::identity(dim, dim) * cplx(constant)
}

/// Uniform superposition over the weight-`M` masks of the full space.
pub fn dense_dicke(sites: usize, particles: usize) -> DenseState {
    let dim = 1usize << sites;
    let count = (0..dim)
        .filter(|x| x.count_ones() as usize == particles)
        .count() as f64;
    DVector::from_fn(dim, |x, _| {
        if x.count_ones() as usize == particles {
            cplx(1.0 / count.sqrt())
        } else {
            cplx(0.0)
        }
    })
}

/// One mixing step as exponentials of explicit Jordan–Wigner operators,
/// ordered even-labelled bonds, odd-labelled bonds, ring closure, fields.
pub fn dense_mixer_terms(
    ops: &FermionOps,
    particles: usize,
    t_hop: f64,
    fields: Option<&[f64]>,
    beta: f64,
) -> Vec<DenseTerm> {
    let l = ops.sites();
    let mut terms = Vec::new();
    for first in [1, 0] {
        for s in (first..l.saturating_sub(1)).step_by(2) {
            terms.push(DenseTerm::new(ops.hop(s, s + 1), -beta * t_hop));
        }
    }
    if l >= 3 {
        terms.push(DenseTerm::new(
            ops.hop(l - 1, 0) * cplx(boundary_sign(particles)),
            -beta * t_hop,
        ));
    }
    if let Some(f) = fields {
        let zero = DMatrix::zeros(l, l);
        terms.push(DenseTerm::new(ops.quadratic_number_form(&zero, f), beta));
    }
    terms
}

/// Full-space initial state of a variant, built independently of the subspace code.
pub fn dense_initial(
    ops: &FermionOps,
    variant: Variant,
    particles: usize,
    hf: Option<&HfSolution>,
) -> DenseState {
    match variant {
        Variant::XyQaoa => dense_dicke(ops.sites(), particles),
        Variant::Fqaoa => ops.slater(&bare_orbitals(ops.sites(), particles).unwrap()),
        Variant::FqaoaSclfm => ops.slater(&hf.unwrap().orbitals),
    }
}

/// The whole ansatz in the full `2^L` space.
pub fn dense_ansatz(
    variant: Variant,
    inst: &InstanceConfig,
    model: &DemandModel,
    t_hop: f64,
    hf: Option<&HfSolution>,
    params: &AnsatzParams,
) -> DenseState {
    let ops = FermionOps::new(inst.participants).unwrap();
    let cost = dense_cost(&ops, inst, model);
    let fields = if variant.uses_fields() {
        hf.map(|h| h.fields.as_slice())
    } else {
        None
    };
    let mut terms = Vec::new();
    for (&g, &b) in params.gamma.iter().zip(&params.beta) {
        terms.push(DenseTerm::new(cost.clone(), g));
        terms.extend(dense_mixer_terms(&ops, inst.requests, t_hop, fields, b));
    }
    let initial = dense_initial(&ops, variant, inst.requests, hf);
    dense_reference_apply(inst.participants, &terms, &initial).unwrap()
}

pub fn basis(sites: usize, particles: usize) -> Arc<OccupationBasis> {
    Arc::new(OccupationBasis::new(sites, particles).unwrap())
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Largest elementwise gap between a subspace state and a full-space state,
/// including any weight the full state places outside the subspace.
pub fn embedded_gap(sub: &fqaoa::basis::StateVector, full: &DenseState) -> f64 {
    let emb = fqaoa::dense::embed(sub);
    emb.iter()
        .zip(full.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
