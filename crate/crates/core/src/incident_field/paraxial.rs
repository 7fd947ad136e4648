use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64 as C64;

use super::{Polarization, WAVENUMBER};

/// Paraxial Gaussian beam focused at the origin and propagating along +z.
#[derive(Debug, Clone)]
pub struct ParaxialBeam {
    pub waist: f64,
    pub polarization: Polarization,
}

impl ParaxialBeam {
    pub fn new(waist: f64, polarization: Polarization) -> Self {
        Self { waist, polarization }
    }

    pub fn rayleigh_range(&self) -> f64 {
        PI * self.waist * self.waist
    }

    /// Beam radius at axial position `z`.
    pub fn radius(&self, z: f64) -> f64 {
        let zr = self.rayleigh_range();
        self.waist * (1.0 + (z / zr).powi(2)).sqrt()
    }

    /// Scalar envelope; unit amplitude and zero phase at the focus.
    pub fn envelope(&self, r: &Vector3<f64>) -> C64 {
        let zr = self.rayleigh_range();
        let z = r.z;
        let rho2 = r.x * r.x + r.y * r.y;
        let w = self.radius(z);
        // 1/R_c = z / (z² + z_R²) is regular at the focus.
        let inv_rc = z / (z * z + zr * zr);
        let gouy = (z / zr).atan();
        let phase = WAVENUMBER * z + WAVENUMBER * rho2 * inv_rc / 2.0 - gouy;
        C64::from_polar(self.waist / w * (-rho2 / (w * w)).exp(), phase)
    }

    pub fn field(&self, r: &Vector3<f64>) -> Vector3<C64> {
        self.polarization.vector() * self.envelope(r)
    }
}
