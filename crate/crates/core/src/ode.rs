//! Dormand–Prince 5(4) integrator with adaptive step size.
//!
//! State is a flat `f64` slice; complex systems pack real and imaginary parts.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { abs: 1e-10, rel: 1e-8, initial_step: 1e-3, min_step: 1e-12, max_step: 1.0 }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b* (5th minus 4th order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Reusable integrator workspace. Keeps the last accepted step size so that
/// integrating in consecutive chunks does not restart from a tiny step.
pub struct Dopri5 {
    tol: Tolerances,
    h: f64,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    fsal_valid: bool,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

impl Dopri5 {
    pub fn new(dim: usize, tol: Tolerances) -> Self {
        Self {
            tol,
            h: tol.initial_step,
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
            y_new: vec![0.0; dim],
            fsal_valid: false,
            steps_accepted: 0,
            steps_rejected: 0,
        }
    }

    /// Integrates `y` in place from `t` to `t_end`. `rhs(t, y, dy)` writes the derivative.
    pub fn integrate<F>(&mut self, rhs: &mut F, t: &mut f64, y: &mut [f64], t_end: f64) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y.len();
        if !self.fsal_valid {
            rhs(*t, y, &mut self.k[0]);
            self.fsal_valid = true;
        }
        while *t < t_end {
            let remaining = t_end - *t;
            let mut clipped = self.h.min(self.tol.max_step) > remaining;
            let mut h = self.h.min(self.tol.max_step).min(remaining);
            loop {
                let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
                for i in 0..n {
                    self.tmp[i] = y[i] + h * A21 * k1[i];
                }
                rhs(*t + C2 * h, &self.tmp, k2);
                for i in 0..n {
                    self.tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
                }
                rhs(*t + C3 * h, &self.tmp, k3);
                for i in 0..n {
                    self.tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
                }
                rhs(*t + C4 * h, &self.tmp, k4);
                for i in 0..n {
                    self.tmp[i] =
                        y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
                }
                rhs(*t + C5 * h, &self.tmp, k5);
                for i in 0..n {
                    self.tmp[i] = y[i]
                        + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
                }
                rhs(*t + h, &self.tmp, k6);
                for i in 0..n {
                    self.y_new[i] = y[i]
                        + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
                }
                rhs(*t + h, &self.y_new, k7);

                let mut err = 0.0;
                for i in 0..n {
                    let e = h
                        * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                            + E7 * k7[i]);
                    let sc = self.tol.abs + self.tol.rel * y[i].abs().max(self.y_new[i].abs());
                    err += (e / sc).powi(2);
                }
                let err = (err / n.max(1) as f64).sqrt();

                if err <= 1.0 {
                    let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    if clipped {
                        *t = t_end;
                    } else {
                        *t += h;
                        self.h = h * factor;
                    }
                    y.copy_from_slice(&self.y_new);
                    self.k.swap(0, 6);
                    self.steps_accepted += 1;
                    break;
                }
                self.steps_rejected += 1;
                let factor = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 1.0) } else { 0.1 };
                h *= factor;
                self.h = h;
                clipped = false;
                if h < self.tol.min_step {
                    return Err(Error::StepUnderflow { t: *t, step: h });
                }
            }
        }
        Ok(())
    }

    /// Forget the cached derivative; call after modifying the state externally.
    pub fn reset(&mut self) {
        self.fsal_valid = false;
    }

    /// Derivative at the current state (valid after at least one `integrate` call).
    pub fn last_derivative(&self) -> Option<&[f64]> {
        self.fsal_valid.then_some(self.k[0].as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut ode = Dopri5::new(1, Tolerances::default());
        let mut y = [1.0];
        let mut t = 0.0;
        ode.integrate(&mut |_, y: &[f64], dy: &mut [f64]| dy[0] = -2.0 * y[0], &mut t, &mut y, 3.0)
            .unwrap();
        assert!((y[0] - (-6.0f64).exp()).abs() < 1e-9);
        assert_eq!(t, 3.0);
    }

    #[test]
    fn harmonic_oscillator_in_chunks() {
        let mut ode = Dopri5::new(2, Tolerances::default());
        let mut y = [1.0, 0.0];
        let mut t = 0.0;
        let mut f = |_: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        };
        for chunk in 1..=10 {
            ode.integrate(&mut f, &mut t, &mut y, chunk as f64).unwrap();
        }
        assert!((y[0] - 10f64.cos()).abs() < 1e-7);
        assert!((y[1] + 10f64.sin()).abs() < 1e-7);
    }
}
