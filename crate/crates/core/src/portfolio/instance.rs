use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::model::DemandModel;
use crate::basis::OccupationBasis;
use crate::error::{Error, Result};

/// Largest basis dimension [`brute_force_solve`] will enumerate.
pub const MAX_ORACLE_DIM: usize = 10_000_000;

/// One period `T`: which hours it spans, how many requests go out and the
/// per-hour procurement midpoint `P'_t = P_t + delta/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceConfig {
    pub participants: usize,
    pub requests: usize,
    pub period_start: usize,
    pub times: Vec<usize>,
    /// `P'_t` for each entry of `times` (kWh).
    pub target: Vec<f64>,
    /// Balance margin `delta` (kWh), used only for reporting.
    pub margin: f64,
}

impl InstanceConfig {
    /// Period starting at `start` with `len` consecutive hours and a flat target.
    pub fn period(participants: usize, requests: usize, start: usize, len: usize, target: f64) -> Self {
        Self {
            participants,
            requests,
            period_start: start,
            times: (start..start + len).collect(),
            target: vec![target; len],
            margin: 0.2,
        }
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    /// Lower edge of the balance condition, `P_t = P'_t - delta/2`.
    pub fn procurement(&self, k: usize) -> f64 {
        self.target[k] - self.margin / 2.0
    }

    pub fn validate(&self, model: &DemandModel) -> Result<()> {
        if self.requests == 0 || self.requests > self.participants {
            return Err(Error::InvalidParams(format!(
                "requests must satisfy 0 < M <= L, got M={} L={}",
                self.requests, self.participants
            )));
        }
        if self.times.is_empty() {
            return Err(Error::InvalidParams("period has no member times".into()));
        }
        if self.target.len() != self.times.len() {
            return Err(Error::LengthMismatch {
                expected: self.times.len(),
                got: self.target.len(),
            });
        }
        if model.participants() != self.participants {
            return Err(Error::InvalidParams(format!(
                "model has {} participants, instance has {}",
                model.participants(),
                self.participants
            )));
        }
        if let Some(&t) = self.times.iter().find(|&&t| t >= model.hours()) {
            return Err(Error::InvalidParams(format!(
                "time {t} is not covered by the model ({} hours)",
                model.hours()
            )));
        }
        Ok(())
    }

    /// `sigma_{T,l,l'}`: covariance averaged over the member times.
    pub fn period_cov(&self, model: &DemandModel) -> DMatrix<f64> {
        let l = self.participants;
        let mut acc = DMatrix::zeros(l, l);
        for &t in &self.times {
            acc += model.cov(t);
        }
        acc / self.n_times() as f64
    }

    fn check_basis(&self, basis: &OccupationBasis) -> Result<()> {
        if basis.sites() != self.participants || basis.particles() != self.requests {
            return Err(Error::BasisMismatch(format!(
                "basis is (L={}, M={}), instance is (L={}, M={})",
                basis.sites(),
                basis.particles(),
                self.participants,
                self.requests
            )));
        }
        Ok(())
    }
}

/// Precomputed pieces of `E_{T,x}`.
struct CostTerms {
    cov: DMatrix<f64>,
    means: Vec<Vec<f64>>,
    target: Vec<f64>,
}

impl CostTerms {
    fn new(instance: &InstanceConfig, model: &DemandModel) -> Result<Self> {
        instance.validate(model)?;
        Ok(Self {
            cov: instance.period_cov(model),
            means: instance.times.iter().map(|&t| model.mean(t).to_vec()).collect(),
            target: instance.target.clone(),
        })
    }

    fn risk(&self, sites: &[usize]) -> f64 {
        let mut acc = 0.0;
        for &a in sites {
            for &b in sites {
                acc += self.cov[(a, b)];
            }
        }
        acc
    }

    fn cost(&self, sites: &[usize]) -> f64 {
        let penalty: f64 = self
            .means
            .iter()
            .zip(&self.target)
            .map(|(mean, &p)| {
                let total: f64 = sites.iter().map(|&l| mean[l]).sum();
                (total - p) * (total - p)
            })
            .sum();
        self.risk(sites) + penalty / self.means.len() as f64
    }
}

fn occupied(mask: u32, out: &mut Vec<usize>) {
    out.clear();
    let mut rest = mask;
    while rest != 0 {
        out.push(rest.trailing_zeros() as usize);
        rest &= rest - 1;
    }
}

/// `E_{T,x} = sum_ll' sigma_T x_l x_l' + (1/N_T) sum_t (sum_l E[p_tl] x_l - P'_t)^2`.
pub fn cost_of_bitstring(instance: &InstanceConfig, model: &DemandModel, mask: u32) -> Result<f64> {
    if mask.count_ones() as usize != instance.requests
        || (mask as u64) >> instance.participants != 0
    {
        return Err(Error::Infeasible {
            mask,
            expected: instance.requests,
        });
    }
    let terms = CostTerms::new(instance, model)?;
    let mut sites = Vec::new();
    occupied(mask, &mut sites);
    Ok(terms.cost(&sites))
}

/// Eigenvalues of the diagonal cost Hamiltonian in basis order.
pub fn build_cost_diagonal(
    instance: &InstanceConfig,
    model: &DemandModel,
    basis: &OccupationBasis,
) -> Result<Vec<f64>> {
    instance.check_basis(basis)?;
    let terms = CostTerms::new(instance, model)?;
    let mut sites = Vec::with_capacity(instance.requests);
    Ok(basis
        .states()
        .iter()
        .map(|&x| {
            occupied(x, &mut sites);
            terms.cost(&sites)
        })
        .collect())
}

/// Risk term `sum_ll' sigma_T x_l x_l'` alone, in basis order.
pub fn risk_diagonal(
    instance: &InstanceConfig,
    model: &DemandModel,
    basis: &OccupationBasis,
) -> Result<Vec<f64>> {
    instance.check_basis(basis)?;
    let terms = CostTerms::new(instance, model)?;
    let mut sites = Vec::with_capacity(instance.requests);
    Ok(basis
        .states()
        .iter()
        .map(|&x| {
            occupied(x, &mut sites);
            terms.risk(&sites)
        })
        .collect())
}

/// Exact extremes of the feasible cost landscape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub e_min: f64,
    pub e_max: f64,
    /// `W_T = E_max - E_min`.
    pub width: f64,
    pub argmin: Vec<u32>,
    /// Mean cost over the feasible set (uniform random sampling).
    pub mean: f64,
}

impl OracleResult {
    pub fn from_diagonal(basis: &OccupationBasis, diag: &[f64]) -> Self {
        let e_min = diag.iter().copied().fold(f64::INFINITY, f64::min);
        let e_max = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let argmin = basis
            .states()
            .iter()
            .zip(diag)
            .filter(|(_, &e)| e == e_min)
            .map(|(&x, _)| x)
            .collect();
        let mean = diag.iter().sum::<f64>() / diag.len() as f64;
        Self {
            e_min,
            e_max,
            width: e_max - e_min,
            argmin,
            mean,
        }
    }

    /// `Delta E` of uniform sampling over the feasible set.
    pub fn random_sampling_excess(&self) -> f64 {
        self.mean - self.e_min
    }
}

pub fn brute_force_solve(
    instance: &InstanceConfig,
    model: &DemandModel,
    basis: &OccupationBasis,
) -> Result<OracleResult> {
    if basis.dim() > MAX_ORACLE_DIM {
        return Err(Error::InvalidParams(format!(
            "basis dimension {} exceeds the brute-force limit {MAX_ORACLE_DIM}",
            basis.dim()
        )));
    }
    let diag = build_cost_diagonal(instance, model, basis)?;
    Ok(OracleResult::from_diagonal(basis, &diag))
}
