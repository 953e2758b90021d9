//! BFGS outer loop over the ansatz angles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{Ansatz, AnsatzParams, Variant};
use crate::error::{Error, Result};
use crate::portfolio::OracleResult;

/// Central-difference step used by [`Objective::gradient`].
pub const FD_STEP: f64 = 1e-6;

/// A smooth function to minimise.
pub trait Objective {
    fn value(&self, x: &[f64]) -> f64;

    /// Value and gradient. Defaults to central differences with step [`FD_STEP`].
    fn gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let f = self.value(x);
        (f, central_gradient(|y| self.value(y), x, FD_STEP))
    }

    /// Objective evaluations charged for one `gradient` call.
    fn gradient_cost(&self, n: usize) -> usize {
        2 * n + 1
    }
}

/// Plain closures are objectives with finite-difference gradients.
pub struct FnObjective<F>(pub F);

impl<F: Fn(&[f64]) -> f64> Objective for FnObjective<F> {
    fn value(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|k| {
            y[k] = x[k] + h;
            let up = f(&y);
            y[k] = x[k] - h;
            let down = f(&y);
            y[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BfgsOptions {
    /// Stop once `max_k |g_k| <= grad_tol`.
    pub grad_tol: f64,
    pub max_evals: usize,
    pub max_iter: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Curvature constant; a step is lengthened until the directional
    /// derivative has risen to this fraction of its starting value.
    pub curvature: f64,
    /// Largest coordinate move tried by the line search.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-6,
            max_evals: 20_000,
            max_iter: 500,
            armijo: 1e-4,
            curvature: 0.9,
            max_step: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BfgsStatus {
    Converged,
    MaxEvals,
    MaxIter,
    LineSearchFailed,
    /// No free parameters (level 0).
    NotRun,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_max: f64,
    pub iterations: usize,
    pub evals: usize,
    pub status: BfgsStatus,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Quasi-Newton minimisation with an inverse-Hessian BFGS update.
///
/// The line search backtracks until the Armijo condition holds and doubles
/// the step while the curvature condition fails, so negatively curved
/// stretches are crossed in few iterations. Every accepted step strictly
/// decreases `f`, so the returned point is the best one visited.
pub fn minimize_bfgs(obj: &impl Objective, x0: &[f64], opts: &BfgsOptions) -> BfgsResult {
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut f, mut g) = obj.gradient(&x);
    let mut evals = obj.gradient_cost(n);
    if n == 0 {
        return BfgsResult {
            x,
            f,
            grad_max: 0.0,
            iterations: 0,
            evals,
            status: BfgsStatus::NotRun,
        };
    }
    // row-major inverse Hessian approximation
    let mut h = identity(n);
    let mut iterations = 0;
    let status = loop {
        if max_abs(&g) <= opts.grad_tol {
            break BfgsStatus::Converged;
        }
        if iterations >= opts.max_iter {
            break BfgsStatus::MaxIter;
        }
        if evals >= opts.max_evals {
            break BfgsStatus::MaxEvals;
        }
        let mut d: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            h = identity(n);
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let cap = opts.max_step / max_abs(&d);
        let mut step = cap.min(1.0);
        let mut shrunk = false;
        let mut accepted: Option<(Vec<f64>, f64, Vec<f64>)> = None;
        loop {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let (ft, gt) = obj.gradient(&trial);
            evals += obj.gradient_cost(n);
            let sufficient = ft.is_finite() && ft <= f + opts.armijo * step * slope;
            let improves = accepted.as_ref().is_none_or(|a| ft < a.1);
            if sufficient && improves {
                let flat = dot(&gt, &d) >= opts.curvature * slope;
                accepted = Some((trial, ft, gt));
                if flat || shrunk || step >= cap || evals >= opts.max_evals {
                    break;
                }
                step = (2.0 * step).min(cap);
            } else if accepted.is_some() {
                break;
            } else {
                step *= 0.5;
                shrunk = true;
                if step * max_abs(&d) < 1e-14 || evals >= opts.max_evals {
                    break;
                }
            }
        }
        let Some((trial, f_new, g_new)) = accepted else {
            break if evals >= opts.max_evals {
                BfgsStatus::MaxEvals
            } else {
                BfgsStatus::LineSearchFailed
            };
        };
        let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if iterations == 0 {
                let scale = sy / dot(&y, &y);
                h.iter_mut().for_each(|v| *v *= scale);
            }
            bfgs_update(&mut h, &s, &y, 1.0 / sy);
        }
        x = trial;
        f = f_new;
        g = g_new;
        iterations += 1;
    };
    BfgsResult {
        grad_max: max_abs(&g),
        x,
        f,
        iterations,
        evals,
        status,
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

/// `H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], rho: f64) {
    let n = s.len();
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j])
                + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Linear ramp: `gamma_j = dg j/p`, `beta_j = db (1 - (j - 1/2)/p)`.
pub fn init_schedule(p: usize, d_gamma: f64, d_beta: f64) -> AnsatzParams {
    let pf = p as f64;
    let gamma = (1..=p).map(|j| d_gamma * j as f64 / pf).collect();
    let beta = (1..=p)
        .map(|j| d_beta * (1.0 - (j as f64 - 0.5) / pf))
        .collect();
    AnsatzParams { gamma, beta }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    pub restarts: usize,
    /// Ramp heights in normalised units (`gamma W_T` and `beta t_hop R_hop`).
    pub gamma_ramp: f64,
    pub beta_ramp: f64,
    /// Std-dev of the Gaussian kick applied to the ramp for extra restarts,
    /// in normalised units.
    pub perturbation: f64,
    pub bfgs: BfgsOptions,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            restarts: 5,
            gamma_ramp: 1.0,
            beta_ramp: 1.0,
            perturbation: 0.5,
            bfgs: BfgsOptions::default(),
        }
    }
}

/// Best parameters found for one (variant, period, level).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub variant: Variant,
    pub level: usize,
    pub params: AnsatzParams,
    pub energy: f64,
    /// `Delta E_T / W_T` of the optimum.
    pub excess_ratio: f64,
    /// Index of the winning start: ramp 0, kicks `1..restarts`, warm start `restarts`.
    pub restart: usize,
    pub evals: usize,
    pub status: BfgsStatus,
    /// Final `Delta E_T / W_T` of every start, in start order.
    pub restart_ratios: Vec<f64>,
}

/// Objective on normalised coordinates, `(E - E_min) / W_T`.
struct ScaledObjective<'a> {
    ansatz: &'a Ansatz,
    e_min: f64,
    width: f64,
    beta_unit: f64,
}

impl ScaledObjective<'_> {
    fn params(&self, x: &[f64]) -> AnsatzParams {
        let p = x.len() / 2;
        AnsatzParams {
            gamma: x[..p].iter().map(|v| v / self.width).collect(),
            beta: x[p..].iter().map(|v| v / self.beta_unit).collect(),
        }
    }

    fn coords(&self, params: &AnsatzParams) -> Vec<f64> {
        params
            .gamma
            .iter()
            .map(|g| g * self.width)
            .chain(params.beta.iter().map(|b| b * self.beta_unit))
            .collect()
    }
}

impl Objective for ScaledObjective<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        (self.ansatz.objective(&self.params(x)) - self.e_min) / self.width
    }

    fn gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let p = x.len() / 2;
        let (e, mut g) = self.ansatz.value_and_gradient(&self.params(x));
        for (k, gk) in g.iter_mut().enumerate() {
            let unit = if k < p { self.width } else { self.beta_unit };
            *gk /= unit * self.width;
        }
        ((e - self.e_min) / self.width, g)
    }

    fn gradient_cost(&self, _n: usize) -> usize {
        3
    }
}

/// Optimises one level.
///
/// Level 0 evaluates the initial state. Otherwise BFGS runs from the ramp,
/// from `restarts - 1` seeded kicks of the ramp, and, when `warm` is given,
/// from the previous level's optimum with a zero final layer appended.
/// `beta_unit` is the many-body hopping range `t_hop R_hop` used to
/// normalise the mixer angles.
pub fn optimize_level(
    ansatz: &Ansatz,
    oracle: &OracleResult,
    beta_unit: f64,
    level: usize,
    settings: &OptimizerSettings,
    seed: u64,
    stream: u64,
    warm: Option<&OptimResult>,
) -> Result<OptimResult> {
    if oracle.width <= 0.0 {
        return Err(Error::Degenerate("cost range W_T is zero".into()));
    }
    let excess = |e: f64| (e - oracle.e_min) / oracle.width;
    if level == 0 {
        let params = AnsatzParams::zeros(0);
        let energy = ansatz.objective(&params);
        return Ok(OptimResult {
            variant: ansatz.variant(),
            level,
            params,
            energy,
            excess_ratio: excess(energy),
            restart: 0,
            evals: 1,
            status: BfgsStatus::NotRun,
            restart_ratios: vec![excess(energy)],
        });
    }
    if let Some(w) = warm {
        if w.level + 1 != level {
            return Err(Error::InvalidParams(format!(
                "warm start from level {} cannot seed level {level}",
                w.level
            )));
        }
    }
    let obj = ScaledObjective {
        ansatz,
        e_min: oracle.e_min,
        width: oracle.width,
        beta_unit: if beta_unit > 0.0 { beta_unit } else { 1.0 },
    };
    let ramp = obj.coords(&{
        let unit = init_schedule(level, settings.gamma_ramp, settings.beta_ramp);
        AnsatzParams {
            gamma: unit.gamma.iter().map(|g| g / obj.width).collect(),
            beta: unit.beta.iter().map(|b| b / obj.beta_unit).collect(),
        }
    });
    let mut starts = vec![ramp.clone()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    for _ in 1..settings.restarts.max(1) {
        starts.push(
            ramp.iter()
                .map(|v| v + settings.perturbation * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        );
    }
    if let Some(w) = warm {
        let mut params = w.params.clone();
        params.gamma.push(0.0);
        params.beta.push(0.0);
        starts.push(obj.coords(&params));
    }
    let runs: Vec<BfgsResult> = starts
        .par_iter()
        .map(|x0| minimize_bfgs(&obj, x0, &settings.bfgs))
        .collect();
    let (best, run) = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.f.total_cmp(&b.1.f))
        .expect("at least one start");
    let params = obj.params(&run.x);
    let energy = ansatz.objective(&params);
    Ok(OptimResult {
        variant: ansatz.variant(),
        level,
        params,
        energy,
        excess_ratio: excess(energy),
        restart: if warm.is_some() && best == starts.len() - 1 {
            settings.restarts.max(1)
        } else {
            best
        },
        evals: runs.iter().map(|r| r.evals).sum(),
        status: run.status,
        restart_ratios: runs.iter().map(|r| r.f).collect(),
    })
}

/// Levels `0..=max_level`, each warm-started from the one below.
pub fn optimize_levels(
    ansatz: &Ansatz,
    oracle: &OracleResult,
    beta_unit: f64,
    max_level: usize,
    settings: &OptimizerSettings,
    seed: u64,
    stream: u64,
) -> Result<Vec<OptimResult>> {
    let mut out: Vec<OptimResult> = Vec::with_capacity(max_level + 1);
    for level in 0..=max_level {
        let warm = if level >= 2 { out.last() } else { None };
        let r = optimize_level(
            ansatz,
            oracle,
            beta_unit,
            level,
            settings,
            seed,
            stream.wrapping_mul(64).wrapping_add(level as u64),
            warm,
        )?;
        out.push(r);
    }
    Ok(out)
}
