//! Initial states, the layered mixer and the QAOA ansatz for the three variants.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{site_sums, HopPair, OccupationBasis, StateVector};
use crate::error::{Error, Result};
use crate::hf::{bare_orbitals, HfSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Dicke initial state with the ring mixer.
    XyQaoa,
    /// Bare-ring Slater initial state with the ring mixer.
    Fqaoa,
    /// Hartree–Fock Slater initial state, ring mixer plus local fields.
    FqaoaSclfm,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::XyQaoa, Variant::Fqaoa, Variant::FqaoaSclfm];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::XyQaoa => "xy-qaoa",
            Variant::Fqaoa => "fqaoa",
            Variant::FqaoaSclfm => "fqaoa-sclfm",
        }
    }

    pub fn uses_fields(self) -> bool {
        matches!(self, Variant::FqaoaSclfm)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown variant `{s}`")))
    }
}

/// Layer angles; `gamma[j]` drives the cost phase and `beta[j]` the mixer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl AnsatzParams {
    pub fn new(gamma: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if gamma.len() != beta.len() {
            return Err(Error::InvalidParams(format!(
                "gamma has {} layers, beta has {}",
                gamma.len(),
                beta.len()
            )));
        }
        Ok(Self { gamma, beta })
    }

    pub fn zeros(level: usize) -> Self {
        Self {
            gamma: vec![0.0; level],
            beta: vec![0.0; level],
        }
    }

    pub fn level(&self) -> usize {
        self.gamma.len()
    }

    /// `[gamma_1..gamma_p, beta_1..beta_p]`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.gamma.iter().chain(&self.beta).copied().collect()
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        if x.len() % 2 != 0 {
            return Err(Error::InvalidParams(format!(
                "parameter vector has odd length {}",
                x.len()
            )));
        }
        let p = x.len() / 2;
        Ok(Self {
            gamma: x[..p].to_vec(),
            beta: x[p..].to_vec(),
        })
    }
}

/// Initial state of each variant.
pub fn prepare_initial(
    variant: Variant,
    basis: Arc<OccupationBasis>,
    hf: Option<&HfSolution>,
) -> Result<StateVector> {
    match variant {
        Variant::XyQaoa => Ok(StateVector::dicke(basis)),
        Variant::Fqaoa => {
            let orb = bare_orbitals(basis.sites(), basis.particles())?;
            StateVector::slater(basis, &orb)
        }
        Variant::FqaoaSclfm => {
            let hf = hf.ok_or_else(|| {
                Error::InvalidParams("fqaoa-sclfm needs a Hartree-Fock solution".into())
            })?;
            StateVector::slater(basis, &hf.orbitals)
        }
    }
}

/// Pair tables of one mixing step `U_I U_BC U_odd U_even`.
///
/// With 1-based site labels, `U_even` holds the bonds `(l, l+1)` with `l`
/// even and `U_odd` those with `l` odd; `U_BC` is the ring-closing bond whose
/// `(-1)^(M-1)` prefactor is folded into the pair signs.
#[derive(Debug, Clone)]
pub struct Mixer {
    t_hop: f64,
    layers: Vec<Vec<HopPair>>,
    field_diag: Option<Vec<f64>>,
}

impl Mixer {
    pub fn new(basis: &OccupationBasis, t_hop: f64, fields: Option<&[f64]>) -> Result<Self> {
        let l = basis.sites();
        if let Some(f) = fields {
            if f.len() != l {
                return Err(Error::LengthMismatch {
                    expected: l,
                    got: f.len(),
                });
            }
        }
        let bonds = |first: usize| -> Vec<HopPair> {
            (first..l.saturating_sub(1))
                .step_by(2)
                .flat_map(|s| basis.hop_pairs(s, s + 1))
                .collect()
        };
        // 0-based site s is 1-based label s+1
        let mut layers = vec![bonds(1), bonds(0)];
        if l >= 3 {
            let prefactor = basis.boundary_sign();
            let boundary = basis
                .hop_pairs(l - 1, 0)
                .into_iter()
                .map(|p| HopPair {
                    sign: p.sign * prefactor,
                    ..p
                })
                .collect();
            layers.push(boundary);
        }
        Ok(Self {
            t_hop,
            layers,
            field_diag: fields.map(|f| site_sums(basis, f)),
        })
    }

    pub fn t_hop(&self) -> f64 {
        self.t_hop
    }

    pub fn apply(&self, state: &mut StateVector, beta: f64) {
        self.rotate(state, beta);
        if let Some(diag) = &self.field_diag {
            state
                .apply_diagonal_phase(diag, beta)
                .expect("field diagonal matches basis");
        }
    }

    /// The hopping part `U_BC U_odd U_even` alone.
    fn rotate(&self, state: &mut StateVector, beta: f64) {
        let theta = beta * self.t_hop;
        for layer in &self.layers {
            state.rotate_pairs(layer, theta, 1.0);
        }
    }
}

/// One mixing step on `state`. The fields are ignored unless the variant
/// modulates them.
pub fn apply_mixer(
    variant: Variant,
    state: &mut StateVector,
    beta: f64,
    t_hop: f64,
    fields: &[f64],
) -> Result<()> {
    let fields = variant.uses_fields().then_some(fields);
    Mixer::new(state.basis(), t_hop, fields)?.apply(state, beta);
    Ok(())
}

/// Precomputed ansatz for one (variant, instance).
#[derive(Debug, Clone)]
pub struct Ansatz {
    variant: Variant,
    cost: Vec<f64>,
    mixer: Mixer,
    initial: StateVector,
}

impl Ansatz {
    pub fn new(
        variant: Variant,
        basis: Arc<OccupationBasis>,
        cost: Vec<f64>,
        t_hop: f64,
        hf: Option<&HfSolution>,
    ) -> Result<Self> {
        if cost.len() != basis.dim() {
            return Err(Error::LengthMismatch {
                expected: basis.dim(),
                got: cost.len(),
            });
        }
        let initial = prepare_initial(variant, basis.clone(), hf)?;
        let fields = match (variant.uses_fields(), hf) {
            (true, Some(hf)) => Some(hf.fields.as_slice()),
            _ => None,
        };
        let mixer = Mixer::new(&basis, t_hop, fields)?;
        Ok(Self {
            variant,
            cost,
            mixer,
            initial,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn initial(&self) -> &StateVector {
        &self.initial
    }

    pub fn mixer(&self) -> &Mixer {
        &self.mixer
    }

    /// `prod_j U_m(beta_j) U_p(gamma_j)` applied to the initial state.
    ///
    /// The field phase of one layer and the cost phase of the next are both
    /// diagonal, so they are applied in a single pass.
    pub fn run(&self, params: &AnsatzParams) -> StateVector {
        let mut state = self.initial.clone();
        let mut pending = 0.0;
        for (&g, &b) in params.gamma.iter().zip(&params.beta) {
            self.phase(&mut state, g, pending);
            self.mixer.rotate(&mut state, b);
            pending = b;
        }
        self.phase(&mut state, 0.0, pending);
        state
    }

    /// `exp[-i (gamma H_p + beta sum_l I_l n_l)]`, the second term only when
    /// the mixer carries fields.
    fn phase(&self, state: &mut StateVector, gamma: f64, beta: f64) {
        match &self.mixer.field_diag {
            Some(f) if beta != 0.0 => {
                for ((a, &c), &d) in state.amplitudes_mut().iter_mut().zip(&self.cost).zip(f) {
                    let (s, co) = (-(gamma * c + beta * d)).sin_cos();
                    *a *= Complex64::new(co, s);
                }
            }
            _ => state
                .apply_diagonal_phase(&self.cost, gamma)
                .expect("cost diagonal matches basis"),
        }
    }

    /// `<psi(gamma, beta)| H_p |psi(gamma, beta)>`.
    pub fn objective(&self, params: &AnsatzParams) -> f64 {
        self.run(params)
            .expectation_diagonal(&self.cost)
            .expect("cost diagonal matches basis")
    }

    /// Objective and its exact gradient `[d/dgamma..., d/dbeta...]`.
    ///
    /// Reverse sweep: the final state and the co-state `H_p |psi>` are walked
    /// back through every factor, and each factor `exp(-i theta A)`
    /// contributes `2 Re <lambda| -i A |psi>` at its position.
    pub fn value_and_gradient(&self, params: &AnsatzParams) -> (f64, Vec<f64>) {
        let p = params.level();
        let mut psi = self.run(params);
        let value = psi
            .expectation_diagonal(&self.cost)
            .expect("cost diagonal matches basis");
        let mut lambda = psi.clone();
        for (a, &d) in lambda.amplitudes_mut().iter_mut().zip(&self.cost) {
            *a *= d;
        }
        let mut grad = vec![0.0; 2 * p];
        let t = self.mixer.t_hop;
        let field = self.mixer.field_diag.as_deref();
        if let (Some(diag), Some(&b)) = (field, params.beta.last()) {
            grad[2 * p - 1] = 2.0 * diag_overlap(&lambda, &psi, diag).im;
            self.phase(&mut psi, 0.0, -b);
            self.phase(&mut lambda, 0.0, -b);
        }
        for j in (0..p).rev() {
            let (g, b) = (params.gamma[j], params.beta[j]);
            for layer in self.mixer.layers.iter().rev() {
                grad[p + j] -= 2.0 * t * pair_overlap(&lambda, &psi, layer).im;
                psi.rotate_pairs(layer, -b * t, 1.0);
                lambda.rotate_pairs(layer, -b * t, 1.0);
            }
            grad[j] = 2.0 * diag_overlap(&lambda, &psi, &self.cost).im;
            // diagonal overlaps are unchanged by diagonal phases, so the
            // previous layer's field term can be read off before undoing both
            let prev = match (field, j) {
                (Some(diag), 1..) => {
                    grad[p + j - 1] = 2.0 * diag_overlap(&lambda, &psi, diag).im;
                    params.beta[j - 1]
                }
                _ => 0.0,
            };
            self.phase(&mut psi, -g, -prev);
            self.phase(&mut lambda, -g, -prev);
        }
        (value, grad)
    }
}

/// `<lambda| D |psi>` for diagonal `D`.
fn diag_overlap(lambda: &StateVector, psi: &StateVector, diag: &[f64]) -> Complex64 {
    lambda
        .amplitudes()
        .iter()
        .zip(psi.amplitudes())
        .zip(diag)
        .map(|((l, s), &d)| l.conj() * s * d)
        .sum()
}

/// `<lambda| K |psi>` for the signed pair-exchange operator `K`.
fn pair_overlap(lambda: &StateVector, psi: &StateVector, pairs: &[HopPair]) -> Complex64 {
    let (l, s) = (lambda.amplitudes(), psi.amplitudes());
    pairs
        .iter()
        .map(|p| {
            let (i, j) = (p.from as usize, p.to as usize);
            (l[i].conj() * s[j] + l[j].conj() * s[i]) * p.sign
        })
        .sum()
}

/// Builds the ansatz and returns the final state.
pub fn run_ansatz(
    variant: Variant,
    params: &AnsatzParams,
    basis: Arc<OccupationBasis>,
    cost: &[f64],
    t_hop: f64,
    hf: Option<&HfSolution>,
) -> Result<StateVector> {
    Ok(Ansatz::new(variant, basis, cost.to_vec(), t_hop, hf)?.run(params))
}

pub fn objective(
    variant: Variant,
    params: &AnsatzParams,
    basis: Arc<OccupationBasis>,
    cost: &[f64],
    t_hop: f64,
    hf: Option<&HfSolution>,
) -> Result<f64> {
    Ok(Ansatz::new(variant, basis, cost.to_vec(), t_hop, hf)?.objective(params))
}
