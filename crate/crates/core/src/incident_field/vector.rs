//! Non-paraxial focused beam: a circularly polarized Gaussian incident on an
//! ideal lens, expanded in cylindrical modes of fixed helicity and propagated
//! exactly.
//!
//! Conventions: ε± = ∓(x̂ ± iŷ)/√2, lens at z = −f, focus at the origin. The
//! mode coefficients κ(k_t, s) for m = 1 are tabulated once on a Gauss–Legendre
//! k_t grid; the field is then three Hankel-type k_t integrals with Bessel
//! orders 0, 2 and 1 for the ε₊, ε₋ and ẑ components.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use nalgebra::Vector3;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{bessel_j012, Polarization, WAVENUMBER};
use crate::error::{invalid, Error, Result};
use crate::quadrature::Rule;

/// Lens radius of the incident Gaussian is integrated out to this many lens waists.
pub const LENS_TRUNCATION: f64 = 4.0;
/// Fresnel number w_L²/(λ f) used when mapping a focal waist to lens parameters.
pub const DEFAULT_FRESNEL_NUMBER: f64 = 5.0;
/// Allowed relative disagreement between κ at n_ρ and n_ρ/2.
pub const REFINEMENT_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VectorBeamSpec {
    pub lens_waist: f64,
    pub focal_length: f64,
    pub n_rho: usize,
    pub n_kt: usize,
}

impl VectorBeamSpec {
    pub const DEFAULT_N_RHO: usize = 2048;
    pub const DEFAULT_N_KT: usize = 2048;

    /// Lens parameters giving focal waist `w0` through the paraxial lens
    /// relation w0 = f λ / (π w_L), at a fixed Fresnel number.
    pub fn from_focal_waist(w0: f64) -> Self {
        let focal_length = DEFAULT_FRESNEL_NUMBER * PI * PI * w0 * w0;
        Self {
            lens_waist: focal_length / (PI * w0),
            focal_length,
            n_rho: Self::DEFAULT_N_RHO,
            n_kt: Self::DEFAULT_N_KT,
        }
    }

    pub fn focal_waist(&self) -> f64 {
        self.focal_length / (PI * self.lens_waist)
    }

    pub fn with_resolution(mut self, n_rho: usize, n_kt: usize) -> Self {
        self.n_rho = n_rho;
        self.n_kt = n_kt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lens_waist > 0.0) || !(self.focal_length > 0.0) {
            return Err(invalid("beam", "lens waist and focal length must be positive"));
        }
        if self.n_rho < 16 || self.n_kt < 16 {
            return Err(invalid("beam.n_rho/n_kt", "quadrature resolution must be >= 16"));
        }
        Ok(())
    }

    fn kt_max(&self) -> f64 {
        let edge = (LENS_TRUNCATION * self.lens_waist / self.focal_length).atan().sin();
        (1.5 * WAVENUMBER * edge).min(WAVENUMBER)
    }
}

/// κ(k_t, s) for both helicities on the k_t grid.
#[derive(Debug, Clone)]
pub struct ModeCoefficients {
    pub kt: Vec<f64>,
    pub weights: Vec<f64>,
    /// κ for s = +1.
    pub plus: Vec<C64>,
    /// κ for s = −1.
    pub minus: Vec<C64>,
}

struct LensSamples {
    rho: Vec<f64>,
    amp: Vec<C64>,
    c0: Vec<f64>,
    s1: Vec<f64>,
    c2: Vec<f64>,
}

impl LensSamples {
    fn new(spec: &VectorBeamSpec, n_rho: usize) -> Self {
        let k = WAVENUMBER;
        let f = spec.focal_length;
        let rule = Rule::composite(0.0, LENS_TRUNCATION * spec.lens_waist, n_rho);
        let mut out = Self {
            rho: Vec::with_capacity(rule.len()),
            amp: Vec::with_capacity(rule.len()),
            c0: Vec::with_capacity(rule.len()),
            s1: Vec::with_capacity(rule.len()),
            c2: Vec::with_capacity(rule.len()),
        };
        for (&rho, &w) in rule.nodes.iter().zip(&rule.weights) {
            let theta = (rho / f).atan();
            let (sin_t, cos_t) = theta.sin_cos();
            let phase = -(k * (rho * rho + f * f).sqrt() - PI / 2.0);
            let mag = w * rho / cos_t.sqrt() * (-(rho / spec.lens_waist).powi(2)).exp();
            out.rho.push(rho);
            out.amp.push(C64::from_polar(mag, phase));
            out.c0.push(0.5 * (1.0 + cos_t));
            out.s1.push(sin_t);
            out.c2.push(0.5 * (cos_t - 1.0));
        }
        out
    }

    /// (κ₊, κ₋) at one transverse wavenumber.
    fn kappa(&self, kt: f64) -> (C64, C64) {
        let k = WAVENUMBER;
        let kz = (k * k - kt * kt).max(0.0).sqrt();
        let mut i0 = C64::new(0.0, 0.0);
        let mut i1 = C64::new(0.0, 0.0);
        let mut i2 = C64::new(0.0, 0.0);
        for i in 0..self.rho.len() {
            let (j0, j1, j2) = bessel_j012(kt * self.rho[i]);
            let a = self.amp[i];
            i0 += a * (self.c0[i] * j0);
            i1 += a * (self.s1[i] * j1);
            i2 += a * (self.c2[i] * j2);
        }
        let transverse = C64::new(0.0, kt / k) * i1;
        let pre = PI * kt;
        let plus = pre * ((k + kz) / k * i0 + transverse + (k - kz) / k * i2);
        let minus = pre * ((-k + kz) / k * i0 + transverse + (-k - kz) / k * i2);
        (plus, minus)
    }
}

/// Tabulates κ(k_t, s) by radial quadrature over the lens plane.
pub fn vector_beam_coefficients(spec: &VectorBeamSpec) -> Result<ModeCoefficients> {
    spec.validate()?;
    let lens = LensSamples::new(spec, spec.n_rho);
    let rule = Rule::composite(0.0, spec.kt_max(), spec.n_kt);
    let (plus, minus): (Vec<_>, Vec<_>) = rule.nodes.iter().map(|&kt| lens.kappa(kt)).unzip();

    // Successive refinement on a subsample of the k_t grid.
    let coarse = LensSamples::new(spec, spec.n_rho / 2);
    let scale = plus.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let mut worst: f64 = 0.0;
    for idx in (0..rule.len()).step_by(8) {
        let (p, _) = coarse.kappa(rule.nodes[idx]);
        worst = worst.max((p - plus[idx]).norm() / scale);
    }
    if worst > REFINEMENT_TOLERANCE {
        return Err(Error::QuadratureNotConverged { difference: worst, tolerance: REFINEMENT_TOLERANCE });
    }

    Ok(ModeCoefficients { kt: rule.nodes, weights: rule.weights, plus, minus })
}

/// Focused vector beam, normalized to unit amplitude and zero phase at the focus.
#[derive(Debug, Clone)]
pub struct VectorBeam {
    pub spec: VectorBeamSpec,
    pub polarization: Polarization,
    coefficients: ModeCoefficients,
    // Per-node integrand factors including weights, 1/(4πk) and normalization.
    s_plus: Vec<C64>,
    s_minus: Vec<C64>,
    s_z: Vec<C64>,
    kz: Vec<f64>,
    amp_plus: C64,
    amp_minus: C64,
}

impl VectorBeam {
    pub fn new(spec: VectorBeamSpec, polarization: Polarization) -> Result<Self> {
        let coefficients = vector_beam_coefficients(&spec)?;
        let k = WAVENUMBER;
        let mut s_plus = Vec::with_capacity(coefficients.kt.len());
        let mut s_minus = Vec::with_capacity(coefficients.kt.len());
        let mut s_z = Vec::with_capacity(coefficients.kt.len());
        let mut kz = Vec::with_capacity(coefficients.kt.len());
        for i in 0..coefficients.kt.len() {
            let kt = coefficients.kt[i];
            let kzi = (k * k - kt * kt).max(0.0).sqrt();
            let (kp, km) = (coefficients.plus[i], coefficients.minus[i]);
            let w = coefficients.weights[i] / (4.0 * PI * k);
            s_plus.push(w * ((k + kzi) * kp + (-k + kzi) * km));
            s_minus.push(w * ((k - kzi) * kp + (-k - kzi) * km));
            s_z.push(w * SQRT_2 * kt * (kp + km));
            kz.push(kzi);
        }
        let pol = polarization.vector();
        let (ep, em) = (circular_plus(), circular_minus());
        let amp_plus = ep.dotc(&pol);
        let amp_minus = em.dotc(&pol);
        let mut beam = Self {
            spec,
            polarization,
            coefficients,
            s_plus,
            s_minus,
            s_z,
            kz,
            amp_plus,
            amp_minus,
        };
        let [e0, _, _] = beam.helical_profile(0.0, 0.0);
        if e0.norm() == 0.0 {
            return Err(invalid("beam", "vector beam has zero amplitude at the focus"));
        }
        let inv = e0.inv();
        for v in beam.s_plus.iter_mut().chain(beam.s_minus.iter_mut()).chain(beam.s_z.iter_mut()) {
            *v *= inv;
        }
        Ok(beam)
    }

    pub fn coefficients(&self) -> &ModeCoefficients {
        &self.coefficients
    }

    /// Radial parts (E₊, E₋, E_z) of the field for ε₊ input, without the
    /// azimuthal factors 1, e^{2iφ}, e^{iφ}.
    pub fn helical_profile(&self, rho: f64, z: f64) -> [C64; 3] {
        let f = self.spec.focal_length;
        let mut ep = C64::new(0.0, 0.0);
        let mut em = C64::new(0.0, 0.0);
        let mut ez = C64::new(0.0, 0.0);
        for i in 0..self.kz.len() {
            let kt = self.coefficients.kt[i];
            let (j0, j1, j2) = bessel_j012(kt * rho);
            let prop = C64::from_polar(1.0, self.kz[i] * (z + f));
            ep += self.s_plus[i] * prop * j0;
            em += self.s_minus[i] * prop * j2;
            ez += self.s_z[i] * prop * j1;
        }
        [ep, em, C64::new(0.0, -1.0) * ez]
    }

    fn assemble_helical(profile: &[C64; 3], phi: f64) -> Vector3<C64> {
        let [ep, em, ez] = *profile;
        circular_plus() * ep
            + circular_minus() * (em * C64::from_polar(1.0, 2.0 * phi))
            + Vector3::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0), ez * C64::from_polar(1.0, phi))
    }

    /// Field on a ring of radius `rho` at height `z`, one value per azimuth.
    pub fn field_ring(&self, rho: f64, z: f64, phis: &[f64]) -> Vec<Vector3<C64>> {
        let profile = self.helical_profile(rho, z);
        phis.iter().map(|&phi| self.combine(&profile, phi)).collect()
    }

    fn combine(&self, profile: &[C64; 3], phi: f64) -> Vector3<C64> {
        let mut out = Vector3::zeros();
        if self.amp_plus.norm() > 0.0 {
            out += Self::assemble_helical(profile, phi) * self.amp_plus;
        }
        if self.amp_minus.norm() > 0.0 {
            // Mirror image y → −y of the ε₊ solution is −ε₋ input.
            let mirrored = Self::assemble_helical(profile, -phi);
            let m = Vector3::new(mirrored.x, -mirrored.y, mirrored.z);
            out -= m * self.amp_minus;
        }
        out
    }

    pub fn field(&self, r: &Vector3<f64>) -> Vector3<C64> {
        let rho = r.x.hypot(r.y);
        let phi = r.y.atan2(r.x);
        let profile = self.helical_profile(rho, r.z);
        self.combine(&profile, phi)
    }
}

pub(crate) fn circular_plus() -> Vector3<C64> {
    Vector3::new(C64::new(-FRAC_1_SQRT_2, 0.0), C64::new(0.0, -FRAC_1_SQRT_2), C64::new(0.0, 0.0))
}

pub(crate) fn circular_minus() -> Vector3<C64> {
    Vector3::new(C64::new(FRAC_1_SQRT_2, 0.0), C64::new(0.0, -FRAC_1_SQRT_2), C64::new(0.0, 0.0))
}
