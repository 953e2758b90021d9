//! Full `2^L` reference simulator used to validate the subspace kernels.
//!
//! Fermion operators are assembled from explicit Pauli strings,
//! `c_j = Z_0 ... Z_{j-1} sigma^-_j`, and every term is exponentiated by a
//! scaled Taylor series acting on the state. Nothing here reuses the
//! subspace pair tables or sign rules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::basis::{OccupationBasis, StateVector};
use crate::error::{Error, Result};

pub const MAX_DENSE_SITES: usize = 10;

pub type DenseState = DVector<Complex64>;
pub type DenseMatrix = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn pauli_z() -> DenseMatrix {
    DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)])
}

// |1> (occupied) -> |0>
fn lowering() -> DenseMatrix {
    DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)])
}

/// `a * b`, skipping the zeros of `a`. Jordan–Wigner operators have at most
/// one entry per column, so this is quadratic rather than cubic in the
/// dimension.
fn sparse_mul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let mut out = DMatrix::<Complex64>::zeros(a.nrows(), b.ncols());
    for k in 0..a.ncols() {
        for i in 0..a.nrows() {
            let w = a[(i, k)];
            if w != c(0.0) {
                for j in 0..b.ncols() {
                    out[(i, j)] += w * b[(k, j)];
                }
            }
        }
    }
    out
}

/// Kronecker product with site `L-1` leftmost so the full-space index equals
/// the occupation mask.
fn site_product(sites: usize, factor: impl Fn(usize) -> DenseMatrix) -> DenseMatrix {
    let mut acc = factor(sites - 1);
    for site in (0..sites - 1).rev() {
        acc = acc.kronecker(&factor(site));
    }
    acc
}

/// Jordan–Wigner fermion operators on `L` sites.
#[derive(Debug, Clone)]
pub struct FermionOps {
    sites: usize,
    annihilators: Vec<DenseMatrix>,
}

impl FermionOps {
    pub fn new(sites: usize) -> Result<Self> {
        if sites == 0 || sites > MAX_DENSE_SITES {
            return Err(Error::DimensionGuard {
                sites,
                max_sites: MAX_DENSE_SITES,
            });
        }
        let identity = DMatrix::<Complex64>::identity(2, 2);
        let annihilators = (0..sites)
            .map(|j| {
                site_product(sites, |k| {
                    if k < j {
                        pauli_z()
                    } else if k == j {
                        lowering()
                    } else {
                        identity.clone()
                    }
                })
            })
            .collect();
        Ok(Self {
            sites,
            annihilators,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn full_dim(&self) -> usize {
        1 << self.sites
    }

    pub fn annihilate(&self, j: usize) -> &DenseMatrix {
        &self.annihilators[j]
    }

    pub fn create(&self, j: usize) -> DenseMatrix {
        self.annihilators[j].adjoint()
    }

    pub fn number(&self, j: usize) -> DenseMatrix {
        sparse_mul(&self.create(j), &self.annihilators[j])
    }

    /// `c†_a c_b + c†_b c_a`.
    pub fn hop(&self, a: usize, b: usize) -> DenseMatrix {
        let t = sparse_mul(&self.create(a), &self.annihilators[b]);
        let h = t.adjoint();
        t + h
    }

    /// `sum_ll' q[l][l'] n_l n_l' + sum_l v[l] n_l`.
    pub fn quadratic_number_form(&self, q: &DMatrix<f64>, v: &[f64]) -> DenseMatrix {
        let n: Vec<DenseMatrix> = (0..self.sites).map(|l| self.number(l)).collect();
        let dim = self.full_dim();
        let mut h = DMatrix::<Complex64>::zeros(dim, dim);
        for l in 0..self.sites {
            h += &n[l] * c(v[l]);
            for k in 0..self.sites {
                if q[(l, k)] != 0.0 {
                    h += sparse_mul(&n[l], &n[k]) * c(q[(l, k)]);
                }
            }
        }
        h
    }

    /// Applies the creation operators of each orbital column to the vacuum:
    /// `b†_0 b†_1 ... b†_{M-1} |vac>` with `b†_k = sum_l orbitals[l][k] c†_l`.
    pub fn slater(&self, orbitals: &DMatrix<f64>) -> DenseState {
        let mut state = DVector::<Complex64>::zeros(self.full_dim());
        state[0] = c(1.0);
        for k in (0..orbitals.ncols()).rev() {
            let mut next = DVector::<Complex64>::zeros(self.full_dim());
            for l in 0..self.sites {
                let w = orbitals[(l, k)];
                if w != 0.0 {
                    next += (self.create(l) * &state) * c(w);
                }
            }
            state = next;
        }
        state
    }
}

/// One factor `exp(-i angle H)` of an ordered product.
#[derive(Debug, Clone)]
pub struct DenseTerm {
    pub generator: DenseMatrix,
    pub angle: f64,
}

impl DenseTerm {
    pub fn new(generator: DenseMatrix, angle: f64) -> Self {
        Self { generator, angle }
    }
}

/// `exp(-i angle H) v` by Taylor series, split into steps of norm <= 1/2.
pub fn expm_apply(generator: &DenseMatrix, angle: f64, v: &DenseState) -> DenseState {
    let scale = one_norm(generator) * angle.abs();
    let steps = ((scale / 0.5).ceil() as usize).max(1);
    let a = generator * Complex64::new(0.0, -angle / steps as f64);
    let mut out = v.clone();
    for _ in 0..steps {
        let mut term = out.clone();
        let mut acc = out.clone();
        for k in 1..80 {
            term = (&a * &term) / c(k as f64);
            acc += &term;
            if term.norm() < 1e-20 {
                break;
            }
        }
        out = acc;
    }
    out
}

fn one_norm(m: &DenseMatrix) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Applies `terms` in order (first term acts first) to a full `2^L` state.
pub fn dense_reference_apply(
    sites: usize,
    terms: &[DenseTerm],
    state: &DenseState,
) -> Result<DenseState> {
    if sites > MAX_DENSE_SITES {
        return Err(Error::DimensionGuard {
            sites,
            max_sites: MAX_DENSE_SITES,
        });
    }
    if state.len() != 1 << sites {
        return Err(Error::LengthMismatch {
            expected: 1 << sites,
            got: state.len(),
        });
    }
    let mut out = state.clone();
    for t in terms {
        out = expm_apply(&t.generator, t.angle, &out);
    }
    Ok(out)
}

pub fn embed(state: &StateVector) -> DenseState {
    let basis = state.basis();
    let mut full = DVector::<Complex64>::zeros(1 << basis.sites());
    for (&x, a) in basis.states().iter().zip(state.amplitudes()) {
        full[x as usize] = *a;
    }
    full
}

/// Amplitudes of `full` on the masks of `basis`.
pub fn restrict(full: &DenseState, basis: &OccupationBasis) -> Vec<Complex64> {
    basis.states().iter().map(|&x| full[x as usize]).collect()
}

/// Norm of the part of `full` lying outside the fixed-weight subspace.
pub fn leakage(full: &DenseState, particles: usize) -> f64 {
    full.iter()
        .enumerate()
        .filter(|(x, _)| (*x as u32).count_ones() as usize != particles)
        .map(|(_, a)| a.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn expectation(h: &DenseMatrix, state: &DenseState) -> f64 {
    (state.adjoint() * (h * state))[(0, 0)].re
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anticommutation() {
        let ops = FermionOps::new(3).unwrap();
        let id = DMatrix::<Complex64>::identity(8, 8);
        for i in 0..3 {
            for j in 0..3 {
                let ac = ops.annihilate(i) * ops.create(j) + ops.create(j) * ops.annihilate(i);
                let want = if i == j { id.clone() } else { id.clone() * c(0.0) };
                assert!((ac - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_angle_hop_is_identity() {
        let ops = FermionOps::new(4).unwrap();
        let v = DVector::from_fn(16, |i, _| Complex64::new(i as f64, 1.0));
        let out = dense_reference_apply(4, &[DenseTerm::new(ops.hop(0, 1), 0.0)], &v).unwrap();
        assert!((out - v).norm() < 1e-14);
    }

    #[test]
    fn number_exponential_is_phase() {
        let ops = FermionOps::new(3).unwrap();
        let x = 0b101usize;
        let mut v = DVector::<Complex64>::zeros(8);
        v[x] = c(1.0);
        let beta = 0.37;
        for l in 0..3 {
            let out = expm_apply(&ops.number(l), beta, &v);
            let occ = ((x >> l) & 1) as f64;
            assert!((out[x] - Complex64::from_polar(1.0, -beta * occ)).norm() < 1e-14);
        }
    }

    #[test]
    fn slater_vacuum_ordering() {
        // c†_0 c†_1 |vac> is the mask 0b11 with sign +1
        let ops = FermionOps::new(2).unwrap();
        let orb = DMatrix::<f64>::identity(2, 2);
        let s = ops.slater(&orb);
        assert!((s[3] - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn guards() {
        assert!(FermionOps::new(11).is_err());
        let v = DVector::<Complex64>::zeros(8);
        assert!(dense_reference_apply(4, &[], &v).is_err());
        assert!(dense_reference_apply(11, &[], &v).is_err());
    }
}
