//! Ring driver Hamiltonians and the self-consistent local-field iteration.
//!
//! The one-body matrix is `-t_hop` on every ring bond, with the closing bond
//! `(L-1, 0)` multiplied by `(-1)^(M-1)`, plus the local fields `I_l` on the
//! diagonal. The fields come from the linearised procurement penalty and are
//! iterated to self-consistency with linear density mixing.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{boundary_sign, OccupationBasis};
use crate::error::{Error, Result};
use crate::linalg::sp_eigensolve;
use crate::portfolio::{risk_diagonal, DemandModel, InstanceConfig};

const FERMI_DEGENERACY_TOL: f64 = 1e-12;

/// One-body matrix of the (local-field modulated) ring driver.
#[derive(Debug, Clone, PartialEq)]
pub struct HopMatrix {
    pub matrix: DMatrix<f64>,
    pub t_hop: f64,
    /// `(-1)^(M-1)` on the ring-closing bond.
    pub bc_sign: f64,
}

/// Ring hopping `-t_hop (c†_{l+1} c_l + h.c.)` with parity-dependent closure.
///
/// Two sites share a single bond; one site has none.
pub fn ring_hopping(sites: usize, particles: usize, t_hop: f64) -> HopMatrix {
    let bc_sign = boundary_sign(particles);
    let mut matrix = DMatrix::zeros(sites, sites);
    for l in 0..sites.saturating_sub(1) {
        matrix[(l, l + 1)] = -t_hop;
        matrix[(l + 1, l)] = -t_hop;
    }
    if sites >= 3 {
        matrix[(0, sites - 1)] = -t_hop * bc_sign;
        matrix[(sites - 1, 0)] = -t_hop * bc_sign;
    }
    HopMatrix {
        matrix,
        t_hop,
        bc_sign,
    }
}

/// Ring hopping plus the local fields on the diagonal.
pub fn build_one_body(t_hop: f64, fields: &[f64], particles: usize) -> HopMatrix {
    let mut h = ring_hopping(fields.len(), particles, t_hop);
    for (l, &f) in fields.iter().enumerate() {
        h.matrix[(l, l)] = f;
    }
    h
}

/// Many-body spectral range of the unit ring at filling `M`:
/// sum of the `M` largest minus the `M` smallest single-particle levels.
pub fn hopping_range(sites: usize, particles: usize) -> Result<f64> {
    let e = sp_eigensolve(&ring_hopping(sites, particles, 1.0).matrix)?;
    let v = e.values.as_slice();
    let low: f64 = v[..particles].iter().sum();
    let high: f64 = v[sites - particles..].iter().sum();
    Ok(high - low)
}

/// `t_hop` such that the hopping range equals the risk-term range over the
/// feasible set.
pub fn calibrate_t_hop(
    instance: &InstanceConfig,
    model: &DemandModel,
    basis: &OccupationBasis,
) -> Result<f64> {
    let risk = risk_diagonal(instance, model, basis)?;
    let lo = risk.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = risk.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let r_hop = hopping_range(instance.participants, instance.requests)?;
    if r_hop <= 0.0 {
        return Err(Error::Degenerate(format!(
            "hopping range vanishes for L={} M={}",
            instance.participants, instance.requests
        )));
    }
    Ok((hi - lo) / r_hop)
}

/// `P^HF_t = sum_l E[p_tl] n_l` for each member time.
pub fn total_from_density(instance: &InstanceConfig, model: &DemandModel, density: &[f64]) -> Vec<f64> {
    instance
        .times
        .iter()
        .map(|&t| model.mean(t).iter().zip(density).map(|(m, n)| m * n).sum())
        .collect()
}

/// `I_l = (2/N_T) sum_t (P^HF_t - P'_t) E[p_tl]`.
pub fn local_fields(instance: &InstanceConfig, model: &DemandModel, p_tot_hf: &[f64]) -> Vec<f64> {
    let n_t = instance.n_times() as f64;
    let mut fields = vec![0.0; instance.participants];
    for ((&t, &p), &target) in instance.times.iter().zip(p_tot_hf).zip(&instance.target) {
        let w = 2.0 / n_t * (p - target);
        for (f, &m) in fields.iter_mut().zip(model.mean(t)) {
            *f += w * m;
        }
    }
    fields
}

/// Site occupations `sum_k phi_lk^2` of the occupied orbitals.
pub fn orbital_density(orbitals: &DMatrix<f64>) -> Vec<f64> {
    orbitals
        .row_iter()
        .map(|r| r.iter().map(|x| x * x).sum())
        .collect()
}

/// `<Slater(orbitals)| H^HF[density] |Slater(orbitals)>`, with `P^HF` taken
/// from `density`; includes the constant term.
pub fn hf_energy(
    instance: &InstanceConfig,
    model: &DemandModel,
    density: &[f64],
    orbitals: &DMatrix<f64>,
    t_hop: f64,
) -> f64 {
    let hop = ring_hopping(instance.participants, instance.requests, t_hop).matrix;
    let hopping: f64 = orbitals
        .column_iter()
        .map(|phi| (phi.transpose() * &hop * phi)[(0, 0)])
        .sum();
    let p_hf = total_from_density(instance, model, density);
    let fields = local_fields(instance, model, &p_hf);
    let occ = orbital_density(orbitals);
    let field_term: f64 = fields.iter().zip(&occ).map(|(f, n)| f * n).sum();
    let n_t = instance.n_times() as f64;
    let constant: f64 = p_hf
        .iter()
        .zip(&instance.target)
        .map(|(p, q)| p * p - q * q)
        .sum::<f64>()
        / n_t;
    hopping + field_term - constant
}

/// Ground-state orbitals of the bare unit ring (no fields).
pub fn bare_orbitals(sites: usize, particles: usize) -> Result<DMatrix<f64>> {
    let e = sp_eigensolve(&ring_hopping(sites, particles, 1.0).matrix)?;
    Ok(e.vectors.columns(0, particles).into_owned())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialDensity {
    /// `n_l = M/L`, the density of the Dicke and bare-ring states.
    Uniform,
    /// `n_l = 1/M`, written literally in some derivations; does not sum to `M`
    /// unless `L = M^2`.
    InverseRequests,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HfSettings {
    /// Mixing weight of the output density, in `(0, 1]`.
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub initial: InitialDensity,
}

impl Default for HfSettings {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            tol: 1e-10,
            max_iter: 500,
            initial: InitialDensity::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HfTraceRow {
    pub iteration: usize,
    pub energy: f64,
    /// `P^HF_T`: the Slater state's total negawatt averaged over the period.
    pub mean_p_tot: f64,
    pub max_density_delta: f64,
}

/// Self-consistent solution and the iteration history.
#[derive(Debug, Clone)]
pub struct HfSolution {
    pub density: Vec<f64>,
    /// `L x M`, lowest orbitals of the final one-body matrix.
    pub orbitals: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
    pub fields: Vec<f64>,
    pub p_tot: Vec<f64>,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub degenerate_fermi: bool,
    pub trace: Vec<HfTraceRow>,
}

/// Runs the density-mixing fixed-point iteration.
///
/// Each step builds `P^HF` and the fields from the current density,
/// diagonalises the one-body matrix, fills the `M` lowest orbitals and mixes
/// `n <- (1 - alpha) n + alpha n_out`. Stops when `max |n_out - n| <= tol`.
/// Non-convergence is reported through `converged = false`.
pub fn hf_iterate(
    instance: &InstanceConfig,
    model: &DemandModel,
    t_hop: f64,
    settings: &HfSettings,
) -> Result<HfSolution> {
    instance.validate(model)?;
    if !(settings.alpha > 0.0 && settings.alpha <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "mixing parameter must lie in (0, 1], got {}",
            settings.alpha
        )));
    }
    let (l, m) = (instance.participants, instance.requests);
    let mut density = match settings.initial {
        InitialDensity::Uniform => vec![m as f64 / l as f64; l],
        InitialDensity::InverseRequests => vec![1.0 / m as f64; l],
    };

    let mean_of = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let bare = bare_orbitals(l, m)?;
    let bare_density = orbital_density(&bare);
    let mut trace = vec![HfTraceRow {
        iteration: 0,
        energy: hf_energy(instance, model, &density, &bare, t_hop),
        mean_p_tot: mean_of(&total_from_density(instance, model, &bare_density)),
        max_density_delta: max_abs_diff(&bare_density, &density),
    }];

    let mut iterations = 0;
    let mut converged = false;
    let (orbitals, eigenvalues) = loop {
        iterations += 1;
        let p_hf = total_from_density(instance, model, &density);
        let fields = local_fields(instance, model, &p_hf);
        let eig = sp_eigensolve(&build_one_body(t_hop, &fields, m).matrix)?;
        let orbitals = eig.vectors.columns(0, m).into_owned();
        let out = orbital_density(&orbitals);
        let delta = max_abs_diff(&out, &density);
        trace.push(HfTraceRow {
            iteration: iterations,
            energy: hf_energy(instance, model, &density, &orbitals, t_hop),
            mean_p_tot: mean_of(&total_from_density(instance, model, &out)),
            max_density_delta: delta,
        });
        if delta <= settings.tol {
            converged = true;
            break (orbitals, eig.values);
        }
        if iterations >= settings.max_iter {
            break (orbitals, eig.values);
        }
        for (n, o) in density.iter_mut().zip(&out) {
            *n = (1.0 - settings.alpha) * *n + settings.alpha * o;
        }
    };

    let p_tot = total_from_density(instance, model, &density);
    let fields = local_fields(instance, model, &p_tot);
    let degenerate_fermi =
        m < l && (eigenvalues[m] - eigenvalues[m - 1]).abs() <= FERMI_DEGENERACY_TOL;
    let energy = hf_energy(instance, model, &density, &orbitals, t_hop);
    Ok(HfSolution {
        density,
        orbitals,
        eigenvalues,
        fields,
        p_tot,
        energy,
        iterations,
        converged,
        degenerate_fermi,
        trace,
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub const TRACE_HEADER: &str = "iteration,E_HF,mean_P_tot,max_density_delta";

pub fn write_trace(trace: &[HfTraceRow], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in trace {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e}",
            r.iteration, r.energy, r.mean_p_tot, r.max_density_delta
        )?;
    }
    Ok(())
}

pub fn write_trace_csv(trace: &[HfTraceRow], path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_trace(trace, &mut f)?;
    f.flush()?;
    Ok(())
}
