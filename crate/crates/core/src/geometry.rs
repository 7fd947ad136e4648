//! Stochastic atomic configurations: square arrays with Gaussian site
//! fluctuations and uniform-density disks.
//!
//! All lengths are in units of the resonant wavelength λ. A configuration is a
//! pure function of its spec and a 64-bit seed.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Minimum pair separation accepted in a sampled configuration, in λ.
pub const MIN_SEPARATION: f64 = 1e-3;
/// Whole-configuration resampling attempts before giving up.
pub const MAX_ATTEMPTS: usize = 10_000;

/// Square `nx × ny` array in the xy plane with one atom per site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
    /// Standard deviations of the site fluctuations along x, y, z.
    #[serde(default)]
    pub sigma: [f64; 3],
    #[serde(default)]
    pub center: [f64; 3],
}

impl LatticeSpec {
    pub fn fixed(nx: usize, ny: usize, spacing: f64) -> Self {
        Self { nx, ny, spacing, sigma: [0.0; 3], center: [0.0; 3] }
    }

    pub fn n_atoms(&self) -> usize {
        self.nx * self.ny
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(invalid("geometry.nx/ny", "must be positive"));
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(invalid("geometry.spacing", "must be a positive length"));
        }
        for (axis, s) in ["sigma_x", "sigma_y", "sigma_z"].iter().zip(self.sigma) {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(invalid(format!("geometry.{axis}"), "must be >= 0"));
            }
        }
        Ok(())
    }

    /// Site centers, x index fastest.
    pub fn sites(&self) -> Vec<Vector3<f64>> {
        let c = Vector3::from(self.center);
        let x0 = 0.5 * (self.nx as f64 - 1.0);
        let y0 = 0.5 * (self.ny as f64 - 1.0);
        let mut out = Vec::with_capacity(self.n_atoms());
        for j in 0..self.ny {
            for i in 0..self.nx {
                out.push(
                    c + Vector3::new(
                        (i as f64 - x0) * self.spacing,
                        (j as f64 - y0) * self.spacing,
                        0.0,
                    ),
                );
            }
        }
        out
    }

    pub fn is_deterministic(&self) -> bool {
        self.sigma.iter().all(|&s| s == 0.0)
    }
}

/// Atoms uniformly distributed over a disk of radius `radius` in the xy plane,
/// with Gaussian thickness `sigma_z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskSpec {
    pub n_atoms: usize,
    pub radius: f64,
    #[serde(default)]
    pub sigma_z: f64,
}

impl DiskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(invalid("geometry.n_atoms", "must be positive"));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(invalid("geometry.radius", "must be a positive length"));
        }
        if !(self.sigma_z >= 0.0) || !self.sigma_z.is_finite() {
            return Err(invalid("geometry.sigma_z", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    Lattice(LatticeSpec),
    Disk(DiskSpec),
}

impl Geometry {
    pub fn n_atoms(&self) -> usize {
        match self {
            Geometry::Lattice(l) => l.n_atoms(),
            Geometry::Disk(d) => d.n_atoms,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Geometry::Lattice(l) => l.validate(),
            Geometry::Disk(d) => d.validate(),
        }
    }

    /// True when every sample is the same configuration.
    pub fn is_deterministic(&self) -> bool {
        match self {
            Geometry::Lattice(l) => l.is_deterministic(),
            Geometry::Disk(_) => false,
        }
    }

    pub fn sample(&self, seed: u64) -> Result<AtomConfiguration> {
        match self {
            Geometry::Lattice(l) => sample_lattice(l, seed),
            Geometry::Disk(d) => sample_disk(d, seed),
        }
    }
}

/// One stochastic realization of atomic positions.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomConfiguration {
    pub positions: Vec<Vector3<f64>>,
    pub realization_seed: u64,
}

impl AtomConfiguration {
    pub fn new(positions: Vec<Vector3<f64>>) -> Self {
        Self { positions, realization_seed: 0 }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.positions.iter().enumerate() {
            for b in &self.positions[i + 1..] {
                best = best.min((a - b).norm());
            }
        }
        best
    }

    /// Same configuration with atoms reordered: `perm[new] = old`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            positions: perm.iter().map(|&i| self.positions[i]).collect(),
            realization_seed: self.realization_seed,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of realization `index` under `master_seed`.
///
/// Counter based: `splitmix64(splitmix64(master) ^ index)`, so any realization
/// can be generated independently of the others and of evaluation order.
pub fn realization_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ index)
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn accept(positions: &[Vector3<f64>]) -> bool {
    let r2 = MIN_SEPARATION * MIN_SEPARATION;
    for (i, a) in positions.iter().enumerate() {
        for b in &positions[i + 1..] {
            if (a - b).norm_squared() < r2 {
                return false;
            }
        }
    }
    true
}

pub fn sample_lattice(spec: &LatticeSpec, seed: u64) -> Result<AtomConfiguration> {
    spec.validate()?;
    let sites = spec.sites();
    if spec.is_deterministic() {
        if !accept(&sites) {
            return Err(Error::RejectionLimit { min_separation: MIN_SEPARATION, attempts: 1 });
        }
        return Ok(AtomConfiguration { positions: sites, realization_seed: seed });
    }
    let mut rng = rng_for(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    for _ in 0..MAX_ATTEMPTS {
        let positions: Vec<_> = sites
            .iter()
            .map(|s| {
                s + Vector3::new(
                    spec.sigma[0] * normal.sample(&mut rng),
                    spec.sigma[1] * normal.sample(&mut rng),
                    spec.sigma[2] * normal.sample(&mut rng),
                )
            })
            .collect();
        if accept(&positions) {
            return Ok(AtomConfiguration { positions, realization_seed: seed });
        }
    }
    Err(Error::RejectionLimit { min_separation: MIN_SEPARATION, attempts: MAX_ATTEMPTS })
}

pub fn sample_disk(spec: &DiskSpec, seed: u64) -> Result<AtomConfiguration> {
    spec.validate()?;
    let mut rng = rng_for(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    for _ in 0..MAX_ATTEMPTS {
        let positions: Vec<_> = (0..spec.n_atoms)
            .map(|_| {
                let r = spec.radius * rng.gen::<f64>().sqrt();
                let phi = 2.0 * PI * rng.gen::<f64>();
                Vector3::new(r * phi.cos(), r * phi.sin(), spec.sigma_z * normal.sample(&mut rng))
            })
            .collect();
        if accept(&positions) {
            return Ok(AtomConfiguration { positions, realization_seed: seed });
        }
    }
    Err(Error::RejectionLimit { min_separation: MIN_SEPARATION, attempts: MAX_ATTEMPTS })
}

/// Peak atom density of a disk, N / (π R² √(2π) σ_z), in units of k³.
///
/// Returns infinity for an infinitely thin disk.
pub fn peak_density(spec: &DiskSpec) -> f64 {
    let k = 2.0 * PI;
    let per_lambda3 =
        spec.n_atoms as f64 / (PI * spec.radius * spec.radius * (2.0 * PI).sqrt() * spec.sigma_z);
    per_lambda3 / k.powi(3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_two_by_two() {
        let spec = LatticeSpec::fixed(2, 2, 0.25);
        let c = sample_lattice(&spec, 3).unwrap();
        let expected = [(-0.125, -0.125), (0.125, -0.125), (-0.125, 0.125), (0.125, 0.125)];
        for (p, (x, y)) in c.positions.iter().zip(expected) {
            assert_eq!(p.x, x);
            assert_eq!(p.y, y);
            assert_eq!(p.z, 0.0);
        }
    }

    #[test]
    fn ten_by_ten_extent() {
        let c = sample_lattice(&LatticeSpec::fixed(10, 10, 0.8), 0).unwrap();
        assert_eq!(c.len(), 100);
        let xs: Vec<f64> = c.positions.iter().map(|p| p.x).collect();
        let span = xs.iter().cloned().fold(f64::MIN, f64::max) - xs.iter().cloned().fold(f64::MAX, f64::min);
        assert!((span - 7.2).abs() < 1e-12);
    }

    #[test]
    fn lattice_statistics() {
        let spec = LatticeSpec { sigma: [0.05, 0.05, 0.025], ..LatticeSpec::fixed(2, 2, 0.25) };
        let sites = spec.sites();
        let m = 20_000;
        let mut sum = [0.0; 3];
        let mut sum2 = [0.0; 3];
        for i in 0..m {
            let c = sample_lattice(&spec, realization_seed(11, i)).unwrap();
            let d = c.positions[0] - sites[0];
            for a in 0..3 {
                sum[a] += d[a];
                sum2[a] += d[a] * d[a];
            }
        }
        for a in 0..3 {
            let mean = sum[a] / m as f64;
            let sd = (sum2[a] / m as f64 - mean * mean).sqrt();
            let sigma = spec.sigma[a];
            assert!(mean.abs() < 3.0 * sigma / (m as f64).sqrt(), "axis {a} mean {mean}");
            assert!((sd - sigma).abs() < 0.05 * sigma, "axis {a} sd {sd}");
        }
    }

    #[test]
    fn disk_inside_radius_and_flat() {
        let spec = DiskSpec { n_atoms: 4, radius: 0.28, sigma_z: 0.025 };
        let mut counts = [0usize; 4];
        let m = 5_000;
        for i in 0..m {
            let c = sample_disk(&spec, realization_seed(5, i)).unwrap();
            for p in &c.positions {
                let r = (p.x * p.x + p.y * p.y).sqrt();
                assert!(r <= spec.radius);
                // Equal-area annuli.
                let bin = ((r / spec.radius).powi(2) * 4.0).floor().min(3.0) as usize;
                counts[bin] += 1;
            }
        }
        let expected = (4 * m) as f64 / 4.0;
        for c in counts {
            assert!((c as f64 - expected).abs() < 4.0 * expected.sqrt(), "{counts:?}");
        }
    }

    #[test]
    fn large_disk_is_valid() {
        let spec = DiskSpec { n_atoms: 100, radius: 1.4, sigma_z: 0.025 };
        let c = sample_disk(&spec, 1).unwrap();
        assert_eq!(c.len(), 100);
        assert!(c.min_separation() >= MIN_SEPARATION);
    }

    #[test]
    fn peak_density_values() {
        let small = DiskSpec { n_atoms: 4, radius: 0.28, sigma_z: 0.025 };
        let large = DiskSpec { n_atoms: 100, radius: 1.4, sigma_z: 0.025 };
        assert!((peak_density(&small) - 1.0).abs() < 0.06);
        assert!((peak_density(&large) - 1.0).abs() < 0.06);
        let doubled = DiskSpec { n_atoms: 8, ..small.clone() };
        assert!((peak_density(&doubled) / peak_density(&small) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = LatticeSpec { sigma: [0.05, 0.05, 0.025], ..LatticeSpec::fixed(3, 3, 0.3) };
        assert_eq!(sample_lattice(&spec, 42).unwrap(), sample_lattice(&spec, 42).unwrap());
        assert_ne!(sample_lattice(&spec, 42).unwrap(), sample_lattice(&spec, 43).unwrap());
    }

    #[test]
    fn rejects_overlapping_sites() {
        let spec = LatticeSpec::fixed(2, 1, 1e-4);
        assert!(matches!(sample_lattice(&spec, 0), Err(Error::RejectionLimit { .. })));
    }

    #[test]
    fn rejects_negative_sigma() {
        let spec = LatticeSpec { sigma: [-0.1, 0.0, 0.0], ..LatticeSpec::fixed(2, 2, 0.25) };
        assert!(spec.validate().is_err());
    }
}
