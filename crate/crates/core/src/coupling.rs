//! Light-mediated dipole–dipole couplings and collective eigenmodes.
//!
//! The kernel K(r) is the radiated field of a unit dipole, scaled so that
//! Im[d̂*·K(r→0)d̂] = 1. The contact term at r = 0 is dropped.

use faer::Mat;
use nalgebra::Vector3;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::incident_field::WAVENUMBER;

/// K(r)·d for separation `r` (in λ) and dipole vector `d`.
pub fn green_kernel(r: &Vector3<f64>, d: &Vector3<C64>) -> Vector3<C64> {
    let dist = r.norm();
    let x = WAVENUMBER * dist;
    let n = r.map(|c| C64::new(c / dist, 0.0));
    let n_dot_d = n.dot(d);
    let transverse = d - n * n_dot_d;
    let longitudinal = n * (3.0 * n_dot_d) - d;
    let phase = C64::from_polar(1.0, x);
    let near = C64::new(1.0 / (x * x * x), -1.0 / (x * x));
    (transverse * (phase / x) + longitudinal * (near * phase)) * C64::new(1.5, 0.0)
}

/// d̂*·K(r)d̂, whose real and imaginary parts are the coupling Ω and γ.
pub fn pair_coupling(r: &Vector3<f64>, dipole: &Vector3<C64>) -> C64 {
    dipole.dotc(&green_kernel(r, dipole))
}

/// Symmetric coupling matrices with Ω_jj = 0 and γ_jj = 1.
#[derive(Debug, Clone)]
pub struct CouplingMatrices {
    n: usize,
    omega: Vec<f64>,
    gamma: Vec<f64>,
}

impl CouplingMatrices {
    pub fn new(positions: &[Vector3<f64>], dipole: &Vector3<C64>) -> Result<Self> {
        let n = positions.len();
        let mut omega = vec![0.0; n * n];
        let mut gamma = vec![0.0; n * n];
        for j in 0..n {
            gamma[j * n + j] = 1.0;
            for l in (j + 1)..n {
                let sep = positions[j] - positions[l];
                let dist = sep.norm();
                if !(dist > 0.0) {
                    return Err(Error::SeparationTooSmall { separation: dist, min_separation: 0.0 });
                }
                let c = pair_coupling(&sep, dipole);
                omega[j * n + l] = c.re;
                omega[l * n + j] = c.re;
                gamma[j * n + l] = c.im;
                gamma[l * n + j] = c.im;
            }
        }
        Ok(Self { n, omega, gamma })
    }

    /// Non-interacting atoms.
    pub fn independent(n: usize) -> Self {
        let mut gamma = vec![0.0; n * n];
        (0..n).for_each(|j| gamma[j * n + j] = 1.0);
        Self { n, omega: vec![0.0; n * n], gamma }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn omega(&self, j: usize, l: usize) -> f64 {
        self.omega[j * self.n + l]
    }

    pub fn gamma(&self, j: usize, l: usize) -> f64 {
        self.gamma[j * self.n + l]
    }

    /// Ω_jℓ + iγ_jℓ.
    pub fn complex(&self, j: usize, l: usize) -> C64 {
        C64::new(self.omega(j, l), self.gamma(j, l))
    }

    /// The complex symmetric matrix Ω + iΓ.
    pub fn matrix(&self) -> Mat<C64> {
        Mat::from_fn(self.n, self.n, |j, l| self.complex(j, l))
    }
}

#[derive(Debug, Clone)]
pub struct Eigenmode {
    /// Line shift ν (in γ).
    pub nu: f64,
    /// Collective half-width υ (in γ).
    pub upsilon: f64,
    /// Unit-norm eigenvector, phase fixed so its largest component is real and positive.
    pub vector: Vec<C64>,
    /// (vᵀ·drive)/(vᵀv).
    pub overlap: C64,
}

impl Eigenmode {
    pub fn is_superradiant(&self) -> bool {
        self.upsilon > 1.0
    }

    pub fn is_subradiant(&self) -> bool {
        self.upsilon < 1.0
    }
}

/// Eigenmodes sorted by increasing width.
#[derive(Debug, Clone)]
pub struct EigenmodeSet {
    pub modes: Vec<Eigenmode>,
}

impl EigenmodeSet {
    pub fn width_sum(&self) -> f64 {
        self.modes.iter().map(|m| m.upsilon).sum()
    }

    /// Mode with the largest |overlap|.
    pub fn dominant(&self) -> Option<&Eigenmode> {
        self.modes.iter().max_by(|a, b| a.overlap.norm().total_cmp(&b.overlap.norm()))
    }
}

/// Diagonalizes Ω + iΓ and projects `drive` (one entry per atom) on each mode.
pub fn eigenmodes(coupling: &CouplingMatrices, drive: &[C64]) -> Result<EigenmodeSet> {
    let n = coupling.len();
    if drive.len() != n {
        return Err(Error::InvalidState(format!("drive has {} entries for {n} atoms", drive.len())));
    }
    let evd = coupling.matrix().eigen().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let (u, s) = (evd.U(), evd.S());
    let mut modes = Vec::with_capacity(n);
    for m in 0..n {
        let lambda = s.column_vector()[m];
        let mut v: Vec<C64> = (0..n).map(|i| u[(i, m)]).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let big = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(C64::new(1.0, 0.0));
        let fix = big.conj() / (big.norm() * norm);
        v.iter_mut().for_each(|z| *z *= fix);
        let vtv: C64 = v.iter().map(|z| z * z).sum();
        let vtb: C64 = v.iter().zip(drive).map(|(a, b)| a * b).sum();
        let overlap = if vtv.norm() > 1e-14 { vtb / vtv } else { C64::new(f64::NAN, f64::NAN) };
        modes.push(Eigenmode { nu: lambda.re, upsilon: lambda.im, vector: v, overlap });
    }
    modes.sort_by(|a, b| a.upsilon.total_cmp(&b.upsilon).then(a.nu.total_cmp(&b.nu)));
    Ok(EigenmodeSet { modes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn real(v: [f64; 3]) -> Vector3<C64> {
        Vector3::new(C64::new(v[0], 0.0), C64::new(v[1], 0.0), C64::new(v[2], 0.0))
    }

    // Independent route: the dyadic Green's function written with explicit
    // spherical Hankel-type radial functions, G = A(x) I + B(x) n nᵀ.
    fn dyadic_oracle(r: [f64; 3], d: [C64; 3]) -> [C64; 3] {
        let dist = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        let x = 2.0 * PI * dist;
        let i = C64::new(0.0, 1.0);
        let e = (i * x).exp();
        let a = e / x * (1.0 + i / x - 1.0 / (x * x));
        let b = e / x * (-1.0 - 3.0 * i / x + 3.0 / (x * x));
        let n = [r[0] / dist, r[1] / dist, r[2] / dist];
        let nd = n[0] * d[0] + n[1] * d[1] + n[2] * d[2];
        std::array::from_fn(|k| 1.5 * (a * d[k] + b * n[k] * nd))
    }

    #[test]
    fn matches_dyadic_form() {
        let d = [C64::new(0.3, 0.1), C64::new(-0.5, 0.7), C64::new(0.2, -0.4)];
        for r in [[0.1, 0.0, 0.0], [0.3, -0.2, 0.05], [1.7, 2.2, -0.4], [0.0, 0.0, 0.25]] {
            let k = green_kernel(&Vector3::from(r), &Vector3::from(d));
            let o = dyadic_oracle(r, d);
            for c in 0..3 {
                assert!((k[c] - o[c]).norm() < 1e-12 * o[c].norm().max(1.0), "{r:?}");
            }
        }
    }

    #[test]
    fn dissipative_limit_at_contact() {
        for d in [real([1.0, 0.0, 0.0]), real([FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0])] {
            for dir in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.6, 0.0, 0.8]] {
                let r = Vector3::from(dir) * 1e-4;
                // Im = 1 − O(x²); x² ≈ 4e-7 here.
                assert!((pair_coupling(&r, &d).im - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn near_field_limit() {
        // Static dipole coupling: Re d·K d → (3/2)(3cos²θ − 1)/x³.
        let d = real([1.0, 0.0, 0.0]);
        let r = Vector3::new(0.0, 1e-3, 0.0);
        let x = WAVENUMBER * 1e-3;
        let c = pair_coupling(&r, &d);
        // Corrections are O(x²) ≈ 4e-5.
        assert!((c.re * x.powi(3) / -1.5 - 1.0).abs() < 2e-4);
    }

    #[test]
    fn far_field_transverse_only() {
        let d = real([1.0, 0.0, 0.0]);
        let r = Vector3::new(0.0, 0.0, 1e5);
        let k = green_kernel(&r, &d);
        let x = WAVENUMBER * 1e5;
        let expected = C64::from_polar(1.5 / x, x);
        assert!((k.x - expected).norm() < 1e-5 * expected.norm());
        assert!(k.z.norm() < 1e-10 * expected.norm());
    }

    #[test]
    fn single_atom_mode() {
        let c = CouplingMatrices::new(&[Vector3::zeros()], &real([1.0, 0.0, 0.0])).unwrap();
        let modes = eigenmodes(&c, &[C64::new(0.5, 0.0)]).unwrap();
        assert_eq!(modes.modes.len(), 1);
        assert!((modes.modes[0].upsilon - 1.0).abs() < 1e-14);
        assert!(modes.modes[0].nu.abs() < 1e-14);
        assert!((modes.modes[0].overlap - C64::new(0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn pair_modes_analytic() {
        let d = real([0.0, 1.0, 0.0]);
        let pos = [Vector3::new(0.0, 0.0, 0.0), Vector3::new(0.0, 0.25, 0.0)];
        let c = CouplingMatrices::new(&pos, &d).unwrap();
        let g12 = c.complex(0, 1);
        let set = eigenmodes(&c, &[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).unwrap();
        let expected = [g12 + C64::new(0.0, 1.0), -g12 + C64::new(0.0, 1.0)];
        for m in &set.modes {
            let lambda = C64::new(m.nu, m.upsilon);
            let hit = expected.iter().any(|e| (lambda - e).norm() < 1e-12);
            assert!(hit, "{lambda}");
            let ratio = m.vector[1] / m.vector[0];
            assert!((ratio.norm() - 1.0).abs() < 1e-12);
            assert!((m.vector[0].norm() - FRAC_1_SQRT_2).abs() < 1e-12);
        }
        // Symmetric drive couples only to the symmetric mode.
        let sym = set.modes.iter().find(|m| (m.vector[1] / m.vector[0] - 1.0).norm() < 1e-9).unwrap();
        let anti = set.modes.iter().find(|m| (m.vector[1] / m.vector[0] + 1.0).norm() < 1e-9).unwrap();
        assert!(anti.overlap.norm() < 1e-12);
        assert!((sym.overlap.norm() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_has_sub_and_superradiant() {
        let d = real([FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0]);
        let pos: Vec<_> = [(0.0, 0.0), (0.25, 0.0), (0.0, 0.25), (0.25, 0.25)]
            .iter()
            .map(|&(x, y)| Vector3::new(x, y, 0.0))
            .collect();
        let c = CouplingMatrices::new(&pos, &d).unwrap();
        let set = eigenmodes(&c, &[C64::new(1.0, 0.0); 4]).unwrap();
        assert!(set.modes.iter().any(Eigenmode::is_subradiant));
        assert!(set.modes.iter().any(Eigenmode::is_superradiant));
        assert!((set.width_sum() - 4.0).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn width_sum_rule(coords in proptest::collection::vec(-1.0f64..1.0, 3..24)) {
            let pos: Vec<Vector3<f64>> = coords
                .chunks_exact(3)
                .enumerate()
                .map(|(i, c)| Vector3::new(c[0] + 3.0 * i as f64, c[1], c[2]))
                .collect();
            let d = real([FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0]);
            let c = CouplingMatrices::new(&pos, &d).unwrap();
            let set = eigenmodes(&c, &vec![C64::new(1.0, 0.0); pos.len()]).unwrap();
            prop_assert!((set.width_sum() - pos.len() as f64).abs() < 1e-9);
        }

        #[test]
        fn couplings_symmetric(x in -2.0f64..2.0, y in -2.0f64..2.0, z in 0.05f64..1.0) {
            let d = real([0.0, 1.0, 0.0]);
            let a = pair_coupling(&Vector3::new(x, y, z), &d);
            let b = pair_coupling(&Vector3::new(-x, -y, -z), &d);
            prop_assert!((a - b).norm() < 1e-12 * a.norm().max(1.0));
            prop_assert!(a.im <= 1.0 + 1e-12);
        }
    }
}
