//! Quantum master equation for N coherently driven two-level atoms with
//! dipole–dipole interactions.
//!
//! Basis states are bit strings: bit j is atom j (0 = ground, 1 = excited),
//! atom 0 least significant. Density matrices are stored row-major.

mod liouvillian;
mod metrics;
mod steady;

use faer::{Mat, Side};
use num_complex::Complex64 as C64;

use crate::coupling::CouplingMatrices;
use crate::error::{invalid, Error, Result};

pub use liouvillian::{apply_liouvillian, dense_liouvillian};
pub use metrics::{
    binary_entropy, concurrence, entanglement_of_formation, expectations, pair_metrics, reduced_pair,
    Expectations, OneBodyExpectations, PairMetrics,
};
pub use steady::{steady_state, time_evolve, SteadyStateOptions};

/// Largest register the solvers accept.
pub const MAX_ATOMS: usize = 12;

/// Drive, detuning and couplings; shared by the quantum and semiclassical solvers.
#[derive(Debug, Clone)]
pub struct LiouvillianProblem {
    /// Δ = ω − ω_eg in units of γ.
    pub detuning: f64,
    /// Rabi frequencies R_j.
    pub drive: Vec<C64>,
    pub coupling: CouplingMatrices,
}

impl LiouvillianProblem {
    pub fn new(detuning: f64, drive: Vec<C64>, coupling: CouplingMatrices) -> Result<Self> {
        if drive.len() != coupling.len() {
            return Err(Error::InvalidState(format!(
                "{} drive amplitudes for {} atoms",
                drive.len(),
                coupling.len()
            )));
        }
        if drive.is_empty() {
            return Err(invalid("atoms", "at least one atom is required"));
        }
        if !detuning.is_finite() || drive.iter().any(|r| !r.is_finite()) {
            return Err(invalid("drive", "detuning and Rabi frequencies must be finite"));
        }
        Ok(Self { detuning, drive, coupling })
    }

    pub fn n_atoms(&self) -> usize {
        self.drive.len()
    }

    pub fn dim(&self) -> usize {
        1 << self.n_atoms()
    }

    pub(crate) fn check_size(&self) -> Result<()> {
        if self.n_atoms() > MAX_ATOMS {
            return Err(Error::DimensionOverflow { atoms: self.n_atoms(), limit: MAX_ATOMS, what: "master equation" });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_atoms: usize,
    data: Vec<C64>,
}

impl DensityMatrix {
    pub const HERMITICITY_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-10;
    pub const POSITIVITY_TOL: f64 = 1e-8;

    /// All atoms in the ground state.
    pub fn ground(n_atoms: usize) -> Self {
        let dim = 1 << n_atoms;
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        data[0] = C64::new(1.0, 0.0);
        Self { n_atoms, data }
    }

    /// |ψ⟩⟨ψ| for a normalized state vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let n_atoms = psi.len().trailing_zeros() as usize;
        if psi.len() != 1 << n_atoms {
            return Err(Error::InvalidState(format!("state length {} is not a power of two", psi.len())));
        }
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let d = psi.len();
        let mut data = vec![C64::new(0.0, 0.0); d * d];
        for a in 0..d {
            for b in 0..d {
                data[a * d + b] = psi[a] * psi[b].conj() / norm;
            }
        }
        Ok(Self { n_atoms, data })
    }

    /// Wraps row-major data without checking physicality.
    pub fn from_raw(n_atoms: usize, data: Vec<C64>) -> Result<Self> {
        let dim = 1usize << n_atoms;
        if data.len() != dim * dim {
            return Err(Error::InvalidState(format!("expected {} entries, got {}", dim * dim, data.len())));
        }
        Ok(Self { n_atoms, data })
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn dim(&self) -> usize {
        1 << self.n_atoms
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn get(&self, a: usize, b: usize) -> C64 {
        self.data[a * self.dim() + b]
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|a| self.get(a, a)).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for a in 0..d {
            for b in a..d {
                worst = worst.max((self.get(a, b) - self.get(b, a).conj()).norm());
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let d = self.dim();
        Mat::from_fn(d, d, |a, b| 0.5 * (self.get(a, b) + self.get(b, a).conj()))
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Eigen(format!("{e:?}")))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// Frobenius distance.
    pub fn distance(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }

    /// Checks Hermiticity, unit trace and positivity.
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > Self::HERMITICITY_TOL {
            return Err(Error::InvalidState(format!("density matrix not Hermitian (error {herm:.2e})")));
        }
        let tr = self.trace();
        if (tr - 1.0).norm() > Self::TRACE_TOL {
            return Err(Error::InvalidState(format!("density matrix trace {tr}")));
        }
        let min = self.min_eigenvalue()?;
        if min < -Self::POSITIVITY_TOL {
            return Err(Error::Unphysical { value: min });
        }
        Ok(())
    }

    /// Replaces ρ with (ρ + ρ†)/2.
    pub(crate) fn symmetrize(&mut self) {
        let d = self.dim();
        for a in 0..d {
            for b in a..d {
                let m = 0.5 * (self.data[a * d + b] + self.data[b * d + a].conj());
                self.data[a * d + b] = m;
                self.data[b * d + a] = m.conj();
            }
        }
    }

    /// Same state with atoms relabeled: new atom k is old atom `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let d = self.dim();
        let map = |x: usize| -> usize {
            perm.iter().enumerate().fold(0, |acc, (k, &old)| acc | (((x >> old) & 1) << k))
        };
        let idx: Vec<usize> = (0..d).map(map).collect();
        let mut data = vec![C64::new(0.0, 0.0); d * d];
        for a in 0..d {
            for b in 0..d {
                data[idx[a] * d + idx[b]] = self.data[a * d + b];
            }
        }
        Self { n_atoms: self.n_atoms, data }
    }
}
