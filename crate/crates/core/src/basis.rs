//! Statevector simulation restricted to the fixed-particle-number subspace.
//!
//! Site `k` (0-based) is bit `k` of a mask, and the Jordan–Wigner ordering
//! follows the site index. A mask `x` stands for the occupation state
//! `c†_0^{x_0} c†_1^{x_1} ... |vac>`, which carries no extra sign relative to
//! the computational basis state with the same bits.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest site count accepted by [`OccupationBasis::new`].
pub const DEFAULT_MAX_SITES: usize = 28;

const ORTHONORMAL_TOL: f64 = 1e-10;

/// All `L`-bit masks with exactly `M` set bits, in increasing integer order.
#[derive(Debug, Clone)]
pub struct OccupationBasis {
    sites: usize,
    particles: usize,
    states: Vec<u32>,
    // binom[n][k] for n <= sites, k <= particles
    binom: Vec<Vec<usize>>,
}

impl OccupationBasis {
    pub fn new(sites: usize, particles: usize) -> Result<Self> {
        Self::with_max_sites(sites, particles, DEFAULT_MAX_SITES)
    }

    pub fn with_max_sites(sites: usize, particles: usize, max_sites: usize) -> Result<Self> {
        if sites == 0 || particles > sites {
            return Err(Error::ParticleCount { sites, particles });
        }
        if sites > max_sites.min(31) {
            return Err(Error::DimensionGuard { sites, max_sites });
        }
        let mut binom = vec![vec![0usize; particles + 1]; sites + 1];
        for n in 0..=sites {
            binom[n][0] = 1;
            for k in 1..=particles.min(n) {
                binom[n][k] = binom[n - 1][k - 1] + if k < n { binom[n - 1][k] } else { 0 };
            }
        }
        let dim = binom[sites][particles];
        let mut states = Vec::with_capacity(dim);
        if particles == 0 {
            states.push(0);
        } else {
            // Gosper's hack walks same-weight masks in increasing order.
            let limit = 1u64 << sites;
            let mut x: u64 = (1u64 << particles) - 1;
            while x < limit {
                states.push(x as u32);
                let c = x & x.wrapping_neg();
                let r = x + c;
                x = (((r ^ x) >> 2) / c) | r;
            }
        }
        debug_assert_eq!(states.len(), dim);
        Ok(Self {
            sites,
            particles,
            states,
            binom,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[u32] {
        &self.states
    }

    pub fn state(&self, index: usize) -> u32 {
        self.states[index]
    }

    /// Dense index of `mask`, or `None` if it is not in the basis.
    ///
    /// Uses the combinatorial number system: for set bits at positions
    /// `p_1 < ... < p_M` the rank is `sum_k C(p_k, k)`.
    pub fn index_of(&self, mask: u32) -> Option<usize> {
        if (mask as u64) >> self.sites != 0 || mask.count_ones() as usize != self.particles {
            return None;
        }
        let mut rank = 0;
        let mut rest = mask;
        let mut k = 1;
        while rest != 0 {
            let pos = rest.trailing_zeros() as usize;
            if k <= pos {
                rank += self.binom[pos][k];
            }
            rest &= rest - 1;
            k += 1;
        }
        Some(rank)
    }

    /// Coupled pairs of the hop `c†_a c_b + c†_b c_a`.
    ///
    /// Each entry holds the index with `a` occupied and `b` empty, its partner
    /// with the two bits exchanged, and the Jordan–Wigner sign
    /// `(-1)^(occupied sites strictly between a and b)`.
    pub fn hop_pairs(&self, a: usize, b: usize) -> Vec<HopPair> {
        assert!(a < self.sites && b < self.sites && a != b);
        let (lo, hi) = (a.min(b), a.max(b));
        let between: u32 = if hi - lo > 1 {
            ((1u32 << (hi - lo - 1)) - 1) << (lo + 1)
        } else {
            0
        };
        let (bit_a, bit_b) = (1u32 << a, 1u32 << b);
        self.states
            .iter()
            .enumerate()
            .filter(|(_, &x)| x & bit_a != 0 && x & bit_b == 0)
            .map(|(i, &x)| {
                let y = x ^ bit_a ^ bit_b;
                let j = self.index_of(y).expect("hop stays in the subspace");
                let sign = if (x & between).count_ones() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                HopPair {
                    from: i as u32,
                    to: j as u32,
                    sign,
                }
            })
            .collect()
    }

    /// `(-1)^(M-1)`: periodic boundary for odd fermion number, anti-periodic for even.
    pub fn boundary_sign(&self) -> f64 {
        boundary_sign(self.particles)
    }
}

pub fn boundary_sign(particles: usize) -> f64 {
    if particles % 2 == 1 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopPair {
    pub from: u32,
    pub to: u32,
    pub sign: f64,
}

/// Unit-norm amplitudes over an [`OccupationBasis`].
#[derive(Debug, Clone)]
pub struct StateVector {
    basis: Arc<OccupationBasis>,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Wraps raw amplitudes; the caller is responsible for normalization.
    pub fn from_amplitudes(basis: Arc<OccupationBasis>, amps: Vec<Complex64>) -> Result<Self> {
        check_len(basis.dim(), amps.len())?;
        Ok(Self { basis, amps })
    }

    /// Point mass on a single basis state.
    pub fn basis_state(basis: Arc<OccupationBasis>, index: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); basis.dim()];
        amps[index] = Complex64::new(1.0, 0.0);
        Self { basis, amps }
    }

    /// Uniform superposition over every feasible mask.
    pub fn dicke(basis: Arc<OccupationBasis>) -> Self {
        let dim = basis.dim();
        let a = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Self {
            basis,
            amps: vec![a; dim],
        }
    }

    /// Slater determinant of the columns of `orbitals` (an `L x M` matrix).
    ///
    /// The amplitude of mask `x` is the determinant of the rows of `orbitals`
    /// at the occupied sites of `x`, taken in increasing site order.
    pub fn slater(basis: Arc<OccupationBasis>, orbitals: &DMatrix<f64>) -> Result<Self> {
        let (l, m) = (basis.sites(), basis.particles());
        if orbitals.nrows() != l {
            return Err(Error::LengthMismatch {
                expected: l,
                got: orbitals.nrows(),
            });
        }
        if orbitals.ncols() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                got: orbitals.ncols(),
            });
        }
        let gram = orbitals.transpose() * orbitals;
        let deviation = (gram - DMatrix::<f64>::identity(m, m)).amax();
        if deviation > ORTHONORMAL_TOL {
            return Err(Error::NonOrthonormal(deviation));
        }
        let mut sub = DMatrix::<f64>::zeros(m, m);
        let amps = basis
            .states()
            .iter()
            .map(|&x| {
                if m == 0 {
                    return Complex64::new(1.0, 0.0);
                }
                let mut rest = x;
                let mut row = 0;
                while rest != 0 {
                    let site = rest.trailing_zeros() as usize;
                    for k in 0..m {
                        sub[(row, k)] = orbitals[(site, k)];
                    }
                    row += 1;
                    rest &= rest - 1;
                }
                Complex64::new(sub.clone().determinant(), 0.0)
            })
            .collect();
        Ok(Self { basis, amps })
    }

    pub fn basis(&self) -> &Arc<OccupationBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Observation probabilities `|<x|psi>|^2` in basis order.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `amps[i] *= exp(-i * gamma * diag[i])`.
    pub fn apply_diagonal_phase(&mut self, diag: &[f64], gamma: f64) -> Result<()> {
        check_len(self.amps.len(), diag.len())?;
        if gamma == 0.0 {
            return Ok(());
        }
        for (a, &d) in self.amps.iter_mut().zip(diag) {
            let (s, c) = (-gamma * d).sin_cos();
            *a *= Complex64::new(c, s);
        }
        Ok(())
    }

    /// `exp[i theta (c†_site c_next + h.c.)]` for adjacent sites.
    pub fn apply_hop_pair(&mut self, site: usize, next: usize, theta: f64) -> Result<()> {
        if next != site + 1 || next >= self.basis.sites() {
            return Err(Error::NotAdjacent(site, next));
        }
        let pairs = self.basis.hop_pairs(site, next);
        self.rotate_pairs(&pairs, theta, 1.0);
        Ok(())
    }

    /// `exp[i theta (-1)^(M-1) (c†_{L-1} c_0 + h.c.)]`, the ring-closing hop.
    pub fn apply_boundary_hop(&mut self, theta: f64) -> Result<()> {
        let l = self.basis.sites();
        if l < 3 {
            return Err(Error::BoundaryTooSmall(l));
        }
        let pairs = self.basis.hop_pairs(l - 1, 0);
        let prefactor = self.basis.boundary_sign();
        self.rotate_pairs(&pairs, theta, prefactor);
        Ok(())
    }

    /// `amps[x] *= exp(-i beta sum_l fields[l] x_l)`.
    pub fn apply_local_phase(&mut self, fields: &[f64], beta: f64) -> Result<()> {
        check_len(self.basis.sites(), fields.len())?;
        let diag = site_sums(&self.basis, fields);
        self.apply_diagonal_phase(&diag, beta)
    }

    /// Applies `exp[i theta prefactor K]` where `K` couples each pair with its
    /// Jordan–Wigner sign.
    pub fn rotate_pairs(&mut self, pairs: &[HopPair], theta: f64, prefactor: f64) {
        if theta == 0.0 {
            return;
        }
        let (s, c) = theta.sin_cos();
        for p in pairs {
            let (i, j) = (p.from as usize, p.to as usize);
            let is = Complex64::new(0.0, s * p.sign * prefactor);
            let (ax, ay) = (self.amps[i], self.amps[j]);
            self.amps[i] = ax * c + is * ay;
            self.amps[j] = is * ax + ay * c;
        }
    }

    /// `sum_x |a_x|^2 diag[x]`.
    pub fn expectation_diagonal(&self, diag: &[f64]) -> Result<f64> {
        check_len(self.amps.len(), diag.len())?;
        Ok(self
            .amps
            .iter()
            .zip(diag)
            .map(|(a, &d)| a.norm_sqr() * d)
            .sum())
    }
}

/// `sum_l values[l] x_l` for every mask of the basis.
pub fn site_sums(basis: &OccupationBasis, values: &[f64]) -> Vec<f64> {
    basis
        .states()
        .iter()
        .map(|&x| {
            let mut rest = x;
            let mut acc = 0.0;
            while rest != 0 {
                acc += values[rest.trailing_zeros() as usize];
                rest &= rest - 1;
            }
            acc
        })
        .collect()
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}
