//! Projection of the transmitted light onto the incident mode over a finite
//! detection disk, and the transmission observables built from it.
//!
//! The scattered field of atom j is K(r − r_j)d̂ ⟨σ₋^j⟩ / R_peak in units of
//! the incident focal amplitude, so with g_j = ∫ u*·K(r − r_j)d̂ dS and
//! 𝒩 = ∫ |u|² dS the mode amplitude is 𝒩 + Σ_j g_j ⟨σ₋^j⟩ / R_peak.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::coupling::green_kernel;
use crate::error::{invalid, Error, Result};
use crate::incident_field::Beam;
use crate::qme::Expectations;
use crate::quadrature::Rule;
use crate::sce::SpinState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionGeometry {
    /// Distance of the detection plane downstream of the focus (λ).
    pub f: f64,
    pub sin_theta_max: f64,
    pub n_radial: usize,
    pub n_angular: usize,
}

impl Default for DetectionGeometry {
    fn default() -> Self {
        Self { f: 500.0, sin_theta_max: 0.24, n_radial: 64, n_angular: 64 }
    }
}

impl DetectionGeometry {
    pub fn radius(&self) -> f64 {
        self.f * self.sin_theta_max.asin().tan()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f > 0.0) {
            return Err(invalid("detection.f", "must be positive"));
        }
        if !(self.sin_theta_max > 0.0 && self.sin_theta_max < 1.0) {
            return Err(invalid("detection.sin_theta_max", "must lie in (0, 1)"));
        }
        if self.n_radial == 0 || self.n_angular == 0 {
            return Err(invalid("detection.n_radial/n_angular", "must be positive"));
        }
        Ok(())
    }

    pub fn refined(&self) -> Self {
        Self { n_radial: 2 * self.n_radial, n_angular: 2 * self.n_angular, ..*self }
    }
}

/// Quadrature nodes on the detection disk with the conjugated incident mode.
#[derive(Debug, Clone)]
pub struct DetectionGrid {
    pub geometry: DetectionGeometry,
    points: Vec<Vector3<f64>>,
    /// Area weight times u*(r).
    weighted_mode: Vec<Vector3<C64>>,
    norm: f64,
}

impl DetectionGrid {
    pub fn new(beam: &Beam, geometry: DetectionGeometry) -> Result<Self> {
        geometry.validate()?;
        let radial = Rule::composite(0.0, geometry.radius(), geometry.n_radial);
        let dphi = TAU / geometry.n_angular as f64;
        let phis: Vec<f64> = (0..geometry.n_angular).map(|k| (k as f64 + 0.5) * dphi).collect();
        let mut points = Vec::with_capacity(radial.len() * phis.len());
        let mut weighted_mode = Vec::with_capacity(points.capacity());
        let mut norm = 0.0;
        for (&rho, &w) in radial.nodes.iter().zip(&radial.weights) {
            let ring = beam.field_ring(rho, geometry.f, &phis);
            let area = w * rho * dphi;
            for (u, &phi) in ring.iter().zip(&phis) {
                points.push(Vector3::new(rho * phi.cos(), rho * phi.sin(), geometry.f));
                weighted_mode.push(u.map(|c| c.conj() * area));
                norm += area * u.norm_squared();
            }
        }
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(invalid("beam", "incident mode has no power on the detection disk"));
        }
        Ok(Self { geometry, points, weighted_mode, norm })
    }

    /// 𝒩 = ∫ |u|² dS over the disk.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// g_j = ∫ u*(r)·K(r − r_j)d̂ dS for each atom.
    pub fn mode_coeffs(&self, positions: &[Vector3<f64>], dipole: &Vector3<C64>) -> Vec<C64> {
        positions
            .iter()
            .map(|rj| {
                self.points
                    .iter()
                    .zip(&self.weighted_mode)
                    .map(|(r, wu)| wu.dot(&green_kernel(&(r - rj), dipole)))
                    .sum()
            })
            .collect()
    }
}

/// Per-realization mode amplitude α and projected intensity β for one model,
/// both already divided by R_peak (resp. R_peak²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeTerms {
    pub alpha: C64,
    pub beta: f64,
}

impl ModeTerms {
    pub const ZERO: Self = Self { alpha: C64 { re: 0.0, im: 0.0 }, beta: 0.0 };
}

fn inverse_rabi(peak_rabi: f64) -> Option<f64> {
    (peak_rabi > 0.0).then(|| 1.0 / peak_rabi)
}

/// Quantum terms: α = c Σ g_j ⟨σ₋^j⟩, β = c² Σ_jℓ g_j* g_ℓ ⟨σ₊^j σ₋^ℓ⟩.
pub fn quantum_terms(g: &[C64], peak_rabi: f64, exp: &Expectations) -> ModeTerms {
    let Some(c) = inverse_rabi(peak_rabi) else { return ModeTerms::ZERO };
    let n = g.len();
    let alpha: C64 = g.iter().zip(&exp.one_body.rho_ge).map(|(g, r)| g * r).sum();
    let mut beta = C64::new(0.0, 0.0);
    for j in 0..n {
        for l in 0..n {
            beta += g[j].conj() * g[l] * exp.sp_sm(j, l);
        }
    }
    ModeTerms { alpha: alpha * c, beta: beta.re * c * c }
}

/// Semiclassical terms (β = |α|², no same-atom quantum noise) and the SAQ
/// terms, which add each atom's incoherent emission Σ|g_j|²(ρ_ee − |ρ_ge|²).
pub fn semiclassical_terms(g: &[C64], peak_rabi: f64, state: &SpinState) -> (ModeTerms, ModeTerms) {
    let Some(c) = inverse_rabi(peak_rabi) else { return (ModeTerms::ZERO, ModeTerms::ZERO) };
    let alpha: C64 = g.iter().zip(&state.rho_ge).map(|(g, r)| g * r).sum::<C64>() * c;
    let sc = ModeTerms { alpha, beta: alpha.norm_sqr() };
    let single: f64 = g
        .iter()
        .zip(state.rho_ge.iter().zip(&state.rho_ee))
        .map(|(g, (r, ee))| g.norm_sqr() * (ee - r.norm_sqr()))
        .sum();
    (sc, ModeTerms { alpha, beta: sc.beta + single * c * c })
}

/// T_coh = |𝒩 + ⟨α⟩|² / 𝒩².
pub fn coherent_transmission(mean_alpha: C64, norm: f64) -> f64 {
    (mean_alpha + norm).norm_sqr() / (norm * norm)
}

/// T_inc = (⟨β⟩ − |⟨α⟩|²) / 𝒩².
pub fn incoherent_transmission(mean_beta: f64, mean_alpha: C64, norm: f64) -> f64 {
    (mean_beta - mean_alpha.norm_sqr()) / (norm * norm)
}

pub fn optical_depth(t_coh: f64) -> f64 {
    -t_coh.ln()
}

/// Points with |S_QM| below this fraction of max |S_QM| are excluded from [`diff_metric`].
pub const DIFF_GUARD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffMetric {
    pub value: f64,
    /// Index of the point attaining the maximum.
    pub argmax: Option<usize>,
    pub excluded: usize,
}

/// max |S_SC − S_QM| / |S_QM| over aligned series.
pub fn diff_metric(sc: &[f64], qm: &[f64]) -> Result<DiffMetric> {
    if sc.len() != qm.len() || sc.is_empty() {
        return Err(Error::InvalidState("diff metric needs two nonempty series of equal length".into()));
    }
    let scale = qm.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = DiffMetric { value: 0.0, argmax: None, excluded: 0 };
    for (i, (s, q)) in sc.iter().zip(qm).enumerate() {
        if q.abs() <= DIFF_GUARD * scale || !q.is_finite() || !s.is_finite() {
            out.excluded += 1;
            continue;
        }
        let d = (s - q).abs() / q.abs();
        if out.argmax.is_none() || d > out.value {
            out.value = d;
            out.argmax = Some(i);
        }
    }
    Ok(out)
}

/// y ≈ A w² / ((x − x₀)² + w²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianFit {
    pub amplitude: f64,
    pub center: f64,
    pub hwhm: f64,
    /// RMS residual divided by max |y|.
    pub relative_rms: f64,
}

impl LorentzianFit {
    pub fn eval(&self, x: f64) -> f64 {
        let w2 = self.hwhm * self.hwhm;
        self.amplitude * w2 / ((x - self.center).powi(2) + w2)
    }
}

/// Levenberg–Marquardt least-squares Lorentzian fit.
pub fn fit_lorentzian(x: &[f64], y: &[f64]) -> Result<LorentzianFit> {
    if x.len() != y.len() || x.len() < 4 {
        return Err(Error::InvalidState("Lorentzian fit needs at least 4 aligned points".into()));
    }
    let (imax, &ymax) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let half = ymax / 2.0;
    let left = (0..imax).rev().find(|&i| y[i] < half).map_or(x[0], |i| x[i]);
    let right = (imax..x.len()).find(|&i| y[i] < half).map_or(x[x.len() - 1], |i| x[i]);
    let mut p = [ymax, x[imax], (0.5 * (right - left)).max(1e-6)];
    let cost = |p: &[f64; 3]| -> f64 {
        x.iter()
            .zip(y)
            .map(|(&xi, &yi)| {
                let w2 = p[2] * p[2];
                (yi - p[0] * w2 / ((xi - p[1]).powi(2) + w2)).powi(2)
            })
            .sum()
    };
    let mut c = cost(&p);
    let mut mu = 1e-3;
    for _ in 0..200 {
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for (&xi, &yi) in x.iter().zip(y) {
            let (a, x0, w) = (p[0], p[1], p[2]);
            let dx = xi - x0;
            let d = dx * dx + w * w;
            let f = a * w * w / d;
            let jac = Vector3::new(w * w / d, 2.0 * a * w * w * dx / (d * d), 2.0 * a * w * dx * dx / (d * d));
            jtj += jac * jac.transpose();
            jtr += jac * (yi - f);
        }
        let mut improved = false;
        for _ in 0..20 {
            let mut m = jtj;
            for k in 0..3 {
                m[(k, k)] *= 1.0 + mu;
            }
            let Some(step) = m.lu().solve(&jtr) else { break };
            let trial = [p[0] + step[0], p[1] + step[1], (p[2] + step[2]).abs()];
            let ct = cost(&trial);
            if ct < c {
                let rel = (c - ct) / c.max(1e-300);
                p = trial;
                c = ct;
                mu = (mu / 3.0).max(1e-12);
                improved = true;
                if rel < 1e-15 {
                    improved = false;
                }
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            break;
        }
    }
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let relative_rms = (c / x.len() as f64).sqrt() / scale;
    Ok(LorentzianFit { amplitude: p[0], center: p[1], hwhm: p[2], relative_rms })
}

/// Indices of strict interior local maxima.
pub fn local_maxima(y: &[f64]) -> Vec<usize> {
    (1..y.len().saturating_sub(1)).filter(|&i| y[i] > y[i - 1] && y[i] > y[i + 1]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::incident_field::{ParaxialBeam, Polarization, WAVENUMBER};
    use crate::qme::{expectations, steady_state, LiouvillianProblem};
    use crate::coupling::CouplingMatrices;
    use crate::sce::{sce_steady_state, SceSettings};

    fn paraxial(w0: f64) -> Beam {
        Beam::Paraxial(ParaxialBeam::new(w0, Polarization::XyDiag))
    }

    #[test]
    fn disk_radius() {
        let g = DetectionGeometry::default();
        assert!((g.radius() - 500.0 * 0.24 / (1.0 - 0.0576f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn norm_matches_gaussian_power() {
        // Whole beam fits inside the disk: ∫|u|² = π w0²/2.
        let w0 = 10.0;
        let grid = DetectionGrid::new(&paraxial(w0), DetectionGeometry::default()).unwrap();
        let expected = std::f64::consts::PI * w0 * w0 / 2.0;
        assert!((grid.norm() / expected - 1.0).abs() < 1e-6);
    }

    #[test]
    fn refinement_changes_coefficients_little() {
        let beam = paraxial(10.0);
        let geom = DetectionGeometry::default();
        let coarse = DetectionGrid::new(&beam, geom).unwrap();
        let fine = DetectionGrid::new(&beam, geom.refined()).unwrap();
        let pos = [Vector3::zeros(), Vector3::new(0.25, 0.0, 0.0), Vector3::new(1.3, -2.0, 0.2)];
        let d = Polarization::XyDiag.vector();
        for (a, b) in coarse.mode_coeffs(&pos, &d).iter().zip(fine.mode_coeffs(&pos, &d)) {
            assert!((a - b).norm() / b.norm() < 1e-3);
        }
    }

    #[test]
    fn displaced_atom_decouples() {
        let grid = DetectionGrid::new(&paraxial(1.0), DetectionGeometry::default()).unwrap();
        let d = Polarization::XyDiag.vector();
        let g = grid.mode_coeffs(&[Vector3::zeros(), Vector3::new(5.0, 0.0, 0.0)], &d);
        assert!(g[1].norm() < 0.1 * g[0].norm());
    }

    #[test]
    fn single_atom_far_field_coupling() {
        // Far-field, full-capture limit: g/𝒩 = 3i / (k z_R).
        let w0 = 10.0;
        let grid = DetectionGrid::new(&paraxial(w0), DetectionGeometry::default()).unwrap();
        let g = grid.mode_coeffs(&[Vector3::zeros()], &Polarization::XyDiag.vector())[0];
        let zr = std::f64::consts::PI * w0 * w0;
        let expected = C64::new(0.0, 3.0 / (WAVENUMBER * zr));
        assert!((g / grid.norm() - expected).norm() / expected.norm() < 0.01);
    }

    #[test]
    fn single_atom_low_intensity_extinction() {
        let w0 = 10.0;
        let grid = DetectionGrid::new(&paraxial(w0), DetectionGeometry::default()).unwrap();
        let d = Polarization::XyDiag.vector();
        let g = grid.mode_coeffs(&[Vector3::zeros()], &d);
        let rabi = 1e-3;
        let p = LiouvillianProblem::new(0.0, vec![C64::new(rabi, 0.0)], CouplingMatrices::independent(1)).unwrap();
        let rho = steady_state(&p, &Default::default()).unwrap();
        let terms = quantum_terms(&g, rabi, &expectations(&rho));
        let t = coherent_transmission(terms.alpha, grid.norm());
        let eps = 3.0 / (WAVENUMBER * std::f64::consts::PI * w0 * w0);
        assert!(t < 1.0);
        assert!(((1.0 - t) / (1.0 - (1.0 - eps).powi(2)) - 1.0).abs() < 0.01);
    }

    #[test]
    fn zero_drive_is_transparent() {
        let state = SpinState::ground(2);
        let (sc, saq) = semiclassical_terms(&[C64::new(1.0, 1.0); 2], 0.0, &state);
        assert_eq!(sc, ModeTerms::ZERO);
        assert_eq!(saq, ModeTerms::ZERO);
        assert_eq!(coherent_transmission(sc.alpha, 3.0), 1.0);
        assert_eq!(incoherent_transmission(sc.beta, sc.alpha, 3.0), 0.0);
    }

    #[test]
    fn saq_minus_sc_is_single_atom_term() {
        let pos = [Vector3::zeros(), Vector3::new(0.25, 0.0, 0.0), Vector3::new(0.0, 0.25, 0.0)];
        let d = Polarization::XyDiag.vector();
        let c = CouplingMatrices::new(&pos, &d).unwrap();
        let rabi = 0.7;
        let p = LiouvillianProblem::new(0.2, vec![C64::new(rabi, 0.0); 3], c).unwrap();
        let s = sce_steady_state(&p, &SceSettings::default()).unwrap().state;
        let grid = DetectionGrid::new(&paraxial(3.0), DetectionGeometry::default()).unwrap();
        let g = grid.mode_coeffs(&pos, &d);
        let (sc, saq) = semiclassical_terms(&g, rabi, &s);
        let single: f64 = (0..3).map(|j| g[j].norm_sqr() * (s.rho_ee[j] - s.rho_ge[j].norm_sqr())).sum();
        assert!((saq.beta - sc.beta - single / (rabi * rabi)).abs() < 1e-12 * saq.beta.abs().max(1.0));
        assert_eq!(incoherent_transmission(sc.beta, sc.alpha, grid.norm()), 0.0);
    }

    #[test]
    fn diff_metric_examples() {
        let q = [1.0, 2.0, -3.0, 0.5];
        assert_eq!(diff_metric(&q, &q).unwrap().value, 0.0);
        let s: Vec<f64> = q.iter().map(|v| v * 1.1).collect();
        assert!((diff_metric(&s, &q).unwrap().value - 0.1).abs() < 1e-12);
        let guarded = diff_metric(&[1.0, 0.5], &[1.0, 1e-9]).unwrap();
        assert_eq!(guarded.excluded, 1);
        assert_eq!(guarded.value, 0.0);
        assert!(diff_metric(&[1.0], &[]).is_err());
    }

    #[test]
    fn lorentzian_fit_recovers_parameters() {
        let x: Vec<f64> = (0..81).map(|i| -4.0 + 0.1 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| 0.3 * 1.7f64.powi(2) / ((v - 0.2).powi(2) + 1.7f64.powi(2))).collect();
        let fit = fit_lorentzian(&x, &y).unwrap();
        assert!((fit.hwhm - 1.7).abs() < 1e-8);
        assert!((fit.center - 0.2).abs() < 1e-8);
        assert!((fit.amplitude - 0.3).abs() < 1e-8);
        assert!(fit.relative_rms < 1e-10);
    }

    #[test]
    fn lorentzian_fit_flags_double_peak() {
        let x: Vec<f64> = (0..81).map(|i| -4.0 + 0.1 * i as f64).collect();
        let lor = |v: f64, c: f64| 1.0 / ((v - c).powi(2) + 0.25);
        let y: Vec<f64> = x.iter().map(|&v| lor(v, -1.0) + lor(v, 1.0)).collect();
        assert!(fit_lorentzian(&x, &y).unwrap().relative_rms > 0.05);
        assert_eq!(local_maxima(&y).len(), 2);
    }
}
