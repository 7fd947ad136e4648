//! Incident probe fields and the Rabi frequencies they induce.
//!
//! Lengths are in units of λ and rates in units of γ (the single-atom
//! coherence decay rate). Fields are normalized to unit amplitude at focus.

mod paraxial;
mod vector;

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::Vector3;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use paraxial::ParaxialBeam;
pub use vector::{
    vector_beam_coefficients, ModeCoefficients, VectorBeam, VectorBeamSpec, DEFAULT_FRESNEL_NUMBER,
    LENS_TRUNCATION, REFINEMENT_TOLERANCE,
};

/// Optical wavenumber 2π/λ with λ = 1.
pub const WAVENUMBER: f64 = 2.0 * PI;

/// Transverse polarization of the probe at focus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    /// (x̂ + ŷ)/√2
    XyDiag,
    /// −(x̂ + iŷ)/√2
    SigmaPlus,
    /// (x̂ − iŷ)/√2
    SigmaMinus,
    X,
    Y,
}

impl Polarization {
    pub fn vector(self) -> Vector3<C64> {
        let z = C64::new(0.0, 0.0);
        let r = |v: f64| C64::new(v, 0.0);
        match self {
            Self::XyDiag => Vector3::new(r(FRAC_1_SQRT_2), r(FRAC_1_SQRT_2), z),
            Self::SigmaPlus => vector::circular_plus(),
            Self::SigmaMinus => vector::circular_minus(),
            Self::X => Vector3::new(r(1.0), z, z),
            Self::Y => Vector3::new(z, r(1.0), z),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::XyDiag => "xy_diag",
            Self::SigmaPlus => "sigma_plus",
            Self::SigmaMinus => "sigma_minus",
            Self::X => "x",
            Self::Y => "y",
        }
    }
}

/// J₀, J₁, J₂ at one argument.
pub(crate) fn bessel_j012(x: f64) -> (f64, f64, f64) {
    let j0 = puruspe::Jn(0, x);
    let j1 = puruspe::Jn(1, x);
    let j2 = if x > 2.0 { 2.0 * j1 / x - j0 } else { puruspe::Jn(2, x) };
    (j0, j1, j2)
}

#[derive(Debug, Clone)]
pub enum Beam {
    Paraxial(ParaxialBeam),
    Vector(Box<VectorBeam>),
}

impl Beam {
    pub fn polarization(&self) -> Polarization {
        match self {
            Self::Paraxial(b) => b.polarization,
            Self::Vector(b) => b.polarization,
        }
    }

    /// Normalized mode function u(r).
    pub fn field(&self, r: &Vector3<f64>) -> Vector3<C64> {
        match self {
            Self::Paraxial(b) => b.field(r),
            Self::Vector(b) => b.field(r),
        }
    }

    /// u on a ring of radius `rho` in the plane `z`, at each azimuth in `phis`.
    pub fn field_ring(&self, rho: f64, z: f64, phis: &[f64]) -> Vec<Vector3<C64>> {
        match self {
            Self::Paraxial(b) => phis
                .iter()
                .map(|&phi| b.field(&Vector3::new(rho * phi.cos(), rho * phi.sin(), z)))
                .collect(),
            Self::Vector(b) => b.field_ring(rho, z, phis),
        }
    }

    /// Waist of the focused spot.
    pub fn waist(&self) -> f64 {
        match self {
            Self::Paraxial(b) => b.waist,
            Self::Vector(b) => b.spec.focal_waist(),
        }
    }
}

/// Probe strength as a saturation ratio I/I_sat at focus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveStrength {
    intensity_ratio: f64,
}

impl DriveStrength {
    pub fn new(intensity_ratio: f64) -> Result<Self> {
        if !(intensity_ratio >= 0.0) || !intensity_ratio.is_finite() {
            return Err(invalid("intensity_ratio", "must be finite and non-negative"));
        }
        Ok(Self { intensity_ratio })
    }

    pub fn intensity_ratio(&self) -> f64 {
        self.intensity_ratio
    }

    /// Peak Rabi frequency γ√(I/2I_sat); at saturation a resonant atom has ρ_ee = 1/4.
    pub fn peak_rabi(&self) -> f64 {
        (self.intensity_ratio / 2.0).sqrt()
    }
}

/// Rabi frequency R = R_peak d̂*·u(r) at one position.
pub fn rabi_at(beam: &Beam, drive: DriveStrength, dipole: &Vector3<C64>, r: &Vector3<f64>) -> C64 {
    dipole.dotc(&beam.field(r)) * drive.peak_rabi()
}

/// Rabi frequencies for every atom.
pub fn rabi_frequencies(
    beam: &Beam,
    drive: DriveStrength,
    dipole: &Vector3<C64>,
    positions: &[Vector3<f64>],
) -> Vec<C64> {
    positions.iter().map(|r| rabi_at(beam, drive, dipole, r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polarizations_are_unit_and_transverse() {
        for p in [
            Polarization::XyDiag,
            Polarization::SigmaPlus,
            Polarization::SigmaMinus,
            Polarization::X,
            Polarization::Y,
        ] {
            let v = p.vector();
            assert!((v.norm() - 1.0).abs() < 1e-15);
            assert_eq!(v.z, C64::new(0.0, 0.0));
        }
        let cross = Polarization::SigmaPlus.vector().dotc(&Polarization::SigmaMinus.vector());
        assert!(cross.norm() < 1e-15);
    }

    #[test]
    fn bessel_reference_values() {
        // Tabulated values.
        let (j0, j1, j2) = bessel_j012(1.0);
        assert!((j0 - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((j1 - 0.440_050_585_744_933_5).abs() < 1e-14);
        assert!((j2 - 0.114_903_484_931_900_5).abs() < 1e-14);
        let (_, _, j2) = bessel_j012(10.0);
        assert!((j2 - 0.254_630_313_685_120_6).abs() < 1e-13);
        let (j0, j1, j2) = bessel_j012(0.0);
        assert!((j0 - 1.0).abs() < 1e-15 && j1 == 0.0 && j2 == 0.0);
    }

    #[test]
    fn saturation_rabi() {
        let d = DriveStrength::new(1.0).unwrap();
        assert!((d.peak_rabi() - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(DriveStrength::new(-1.0).is_err());
        assert!(DriveStrength::new(f64::NAN).is_err());
    }

    #[test]
    fn rabi_projection() {
        let beam = Beam::Paraxial(ParaxialBeam::new(3.0, Polarization::XyDiag));
        let drive = DriveStrength::new(2.0).unwrap();
        let r = rabi_at(&beam, drive, &Polarization::XyDiag.vector(), &Vector3::zeros());
        assert!((r - C64::new(1.0, 0.0)).norm() < 1e-15);
        let r = rabi_at(&beam, drive, &Polarization::X.vector(), &Vector3::zeros());
        assert!((r - C64::new(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
    }
}
