use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64 as C64;

use super::liouvillian::{apply_with, jump_terms, EffectiveHamiltonian};
use super::{dense_liouvillian, DensityMatrix, LiouvillianProblem};
use crate::error::{Error, Result};
use crate::ode::{Dopri5, Tolerances};

#[derive(Debug, Clone, Copy)]
pub struct SteadyStateOptions {
    /// Largest N solved by the direct 4^N linear system.
    pub direct_max_atoms: usize,
    /// Required max-norm of L(ρ).
    pub residual_tol: f64,
    /// Give up time evolution after this time (1/γ).
    pub t_max: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self { direct_max_atoms: 6, residual_tol: 1e-9, t_max: 5000.0 }
    }
}

struct Action {
    n_atoms: usize,
    heff: EffectiveHamiltonian,
    jumps: Vec<(usize, usize, f64)>,
    buf_in: Vec<C64>,
    buf_out: Vec<C64>,
}

impl Action {
    fn new(problem: &LiouvillianProblem) -> Self {
        let size = problem.dim() * problem.dim();
        Self {
            n_atoms: problem.n_atoms(),
            heff: EffectiveHamiltonian::new(problem),
            jumps: jump_terms(problem),
            buf_in: vec![C64::new(0.0, 0.0); size],
            buf_out: vec![C64::new(0.0, 0.0); size],
        }
    }

    fn apply(&mut self, rho: &[C64]) -> &[C64] {
        apply_with(self.n_atoms, &self.heff, &self.jumps, rho, &mut self.buf_out);
        &self.buf_out
    }

    // Real-packed interface for the ODE solver.
    fn apply_packed(&mut self, y: &[f64], dy: &mut [f64]) {
        for (z, p) in self.buf_in.iter_mut().zip(y.chunks_exact(2)) {
            *z = C64::new(p[0], p[1]);
        }
        apply_with(self.n_atoms, &self.heff, &self.jumps, &self.buf_in, &mut self.buf_out);
        for (z, p) in self.buf_out.iter().zip(dy.chunks_exact_mut(2)) {
            p[0] = z.re;
            p[1] = z.im;
        }
    }
}

fn residual(action: &mut Action, rho: &[C64]) -> f64 {
    action.apply(rho).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn pack(data: &[C64]) -> Vec<f64> {
    data.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn unpack(y: &[f64]) -> Vec<C64> {
    y.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect()
}

/// Unique steady state of the master equation.
pub fn steady_state(problem: &LiouvillianProblem, opts: &SteadyStateOptions) -> Result<DensityMatrix> {
    problem.check_size()?;
    let n = problem.n_atoms();
    let mut rho = if n <= opts.direct_max_atoms {
        direct_solve(problem, opts)?
    } else {
        evolve_to_steady(problem, opts)?
    };
    rho.validate()?;
    rho.symmetrize();
    Ok(rho)
}

fn direct_solve(problem: &LiouvillianProblem, opts: &SteadyStateOptions) -> Result<DensityMatrix> {
    let dim = problem.dim();
    let size = dim * dim;
    let mut l = dense_liouvillian(problem)?;
    // Replace the first equation (the ground-state population balance) by Tr ρ = 1.
    for k in 0..size {
        l[(0, k)] = C64::new(0.0, 0.0);
    }
    for a in 0..dim {
        l[(0, a * dim + a)] = C64::new(1.0, 0.0);
    }
    let mut rhs = Mat::<C64>::zeros(size, 1);
    rhs[(0, 0)] = C64::new(1.0, 0.0);
    let lu = l.partial_piv_lu();
    lu.solve_in_place(rhs.as_mut());
    let data: Vec<C64> = (0..size).map(|k| rhs[(k, 0)]).collect();
    if data.iter().any(|z| !z.is_finite()) {
        return Err(Error::SteadyState { residual: f64::INFINITY, reason: "singular Liouvillian".into() });
    }
    let mut action = Action::new(problem);
    let res = residual(&mut action, &data);
    if res > opts.residual_tol {
        return Err(Error::SteadyState { residual: res, reason: "direct solve residual too large".into() });
    }
    DensityMatrix::from_raw(problem.n_atoms(), data)
}

fn evolve_to_steady(problem: &LiouvillianProblem, opts: &SteadyStateOptions) -> Result<DensityMatrix> {
    let mut action = Action::new(problem);
    let size = problem.dim() * problem.dim();
    let tol = Tolerances { abs: 1e-12, rel: 1e-10, max_step: 0.5, ..Tolerances::default() };
    let mut ode = Dopri5::new(2 * size, tol);
    let mut y = pack(DensityMatrix::ground(problem.n_atoms()).data());
    let mut t = 0.0;
    let mut rhs = |_: f64, y: &[f64], dy: &mut [f64]| action.apply_packed(y, dy);
    let mut res = f64::INFINITY;
    while t < opts.t_max {
        let t_end = (t + 5.0).min(opts.t_max);
        ode.integrate(&mut rhs, &mut t, &mut y, t_end)?;
        res = ode.last_derivative().map_or(f64::INFINITY, |d| d.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        if res < opts.residual_tol {
            return DensityMatrix::from_raw(problem.n_atoms(), unpack(&y));
        }
    }
    Err(Error::NotConverged { t_max: opts.t_max, residuals: vec![res] })
}

/// Integrates the master equation from `rho0` over `[0, t_final]`.
pub fn time_evolve(
    problem: &LiouvillianProblem,
    rho0: &DensityMatrix,
    t_final: f64,
    tol: Tolerances,
) -> Result<DensityMatrix> {
    problem.check_size()?;
    if rho0.n_atoms() != problem.n_atoms() {
        return Err(Error::InvalidState("initial state size does not match the problem".into()));
    }
    let mut action = Action::new(problem);
    let mut ode = Dopri5::new(2 * rho0.data().len(), tol);
    let mut y = pack(rho0.data());
    let mut t = 0.0;
    ode.integrate(&mut |_, y: &[f64], dy: &mut [f64]| action.apply_packed(y, dy), &mut t, &mut y, t_final)?;
    DensityMatrix::from_raw(problem.n_atoms(), unpack(&y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::CouplingMatrices;
    use crate::incident_field::Polarization;
    use crate::qme::expectations;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single(detuning: f64, rabi: C64) -> LiouvillianProblem {
        LiouvillianProblem::new(detuning, vec![rabi], CouplingMatrices::independent(1)).unwrap()
    }

    // Optical Bloch equation steady state in closed form.
    fn bloch(detuning: f64, rabi: C64) -> (f64, C64) {
        let den = detuning * detuning + 1.0 + 2.0 * rabi.norm_sqr();
        (rabi.norm_sqr() / den, rabi * C64::new(-detuning, 1.0) / den)
    }

    fn pair(a: f64) -> LiouvillianProblem {
        let d = Polarization::Y.vector();
        let pos = [Vector3::zeros(), Vector3::new(0.0, a, 0.0)];
        let c = CouplingMatrices::new(&pos, &d).unwrap();
        LiouvillianProblem::new(0.3, vec![C64::new(0.8, 0.0), C64::new(0.5, 0.3)], c).unwrap()
    }

    fn random_state(n: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
        let d = 1 << n;
        let g: Vec<C64> = (0..d * d).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let mut data = vec![C64::new(0.0, 0.0); d * d];
        for a in 0..d {
            for b in 0..d {
                data[a * d + b] = (0..d).map(|k| g[a * d + k] * g[b * d + k].conj()).sum();
            }
        }
        let tr: C64 = (0..d).map(|a| data[a * d + a]).sum();
        data.iter_mut().for_each(|z| *z /= tr);
        DensityMatrix::from_raw(n, data).unwrap()
    }

    #[test]
    fn single_atom_saturation_point() {
        let rho = steady_state(&single(0.0, C64::new(0.5f64.sqrt(), 0.0)), &Default::default()).unwrap();
        let e = expectations(&rho);
        assert!((e.one_body.rho_ee[0] - 0.25).abs() < 1e-12);
        assert!((e.one_body.rho_ge[0] - C64::new(0.0, 1.0 / (2.0 * 2f64.sqrt()))).norm() < 1e-12);
    }

    #[test]
    fn single_atom_closed_form() {
        for (d, r) in [(0.0, C64::new(0.1, 0.0)), (1.3, C64::new(0.4, -0.9)), (-7.0, C64::new(5.0, 2.0))] {
            let rho = steady_state(&single(d, r), &Default::default()).unwrap();
            let e = expectations(&rho);
            let (ee, ge) = bloch(d, r);
            assert!((e.one_body.rho_ee[0] - ee).abs() < 1e-12);
            assert!((e.one_body.rho_ge[0] - ge).norm() < 1e-12);
        }
    }

    #[test]
    fn saturation_limit() {
        let rho = steady_state(&single(0.0, C64::new(300.0, 0.0)), &Default::default()).unwrap();
        assert!((expectations(&rho).one_body.rho_ee[0] - 0.5).abs() < 1e-5);
    }

    #[test]
    fn free_decay_rate() {
        let p = single(0.4, C64::new(0.0, 0.0));
        let excited = DensityMatrix::pure(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]).unwrap();
        for t in [0.5, 1.0, 3.0] {
            let tol = Tolerances { abs: 1e-13, rel: 1e-12, ..Tolerances::default() };
            let rho = time_evolve(&p, &excited, t, tol).unwrap();
            assert!((rho.get(1, 1).re - (-2.0 * t).exp()).abs() < 1e-9, "{}", rho.get(1, 1).re - (-2.0 * t).exp());
        }
    }

    #[test]
    fn ground_state_is_dark() {
        let mut p = pair(0.25);
        p.drive = vec![C64::new(0.0, 0.0); 2];
        let g = DensityMatrix::ground(2);
        let rho = time_evolve(&p, &g, 10.0, Tolerances::default()).unwrap();
        assert!(rho.distance(&g) < 1e-14);
    }

    #[test]
    fn evolution_reaches_steady_state() {
        let p = pair(0.25);
        let direct = steady_state(&p, &Default::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..3 {
            let rho0 = random_state(2, &mut rng);
            let rho = time_evolve(&p, &rho0, 40.0, Tolerances::default()).unwrap();
            assert!((rho.trace() - 1.0).norm() < 1e-9);
            assert!(rho.distance(&direct) < 1e-6, "{}", rho.distance(&direct));
        }
    }

    #[test]
    fn evolution_fallback_matches_direct() {
        let p = pair(0.3);
        let direct = steady_state(&p, &Default::default()).unwrap();
        let opts = SteadyStateOptions { direct_max_atoms: 0, ..Default::default() };
        let evolved = steady_state(&p, &opts).unwrap();
        assert!(evolved.distance(&direct) < 1e-8);
    }

    #[test]
    fn steady_state_is_physical() {
        let p = pair(0.2);
        let rho = steady_state(&p, &Default::default()).unwrap();
        assert!(rho.hermiticity_error() < 1e-10);
        assert!((rho.trace() - 1.0).norm() < 1e-10);
        assert!(rho.min_eigenvalue().unwrap() > -1e-8);
    }

    #[test]
    fn permutation_covariance() {
        let d = Polarization::XyDiag.vector();
        let pos = vec![Vector3::new(0.0, 0.0, 0.0), Vector3::new(0.27, 0.05, 0.0), Vector3::new(0.1, 0.31, 0.02)];
        let drive = vec![C64::new(0.4, 0.1), C64::new(0.3, -0.2), C64::new(0.6, 0.0)];
        let c = CouplingMatrices::new(&pos, &d).unwrap();
        let rho = steady_state(&LiouvillianProblem::new(-0.5, drive.clone(), c).unwrap(), &Default::default()).unwrap();
        let perm = [2, 0, 1];
        let pos_p: Vec<_> = perm.iter().map(|&k| pos[k]).collect();
        let drive_p: Vec<_> = perm.iter().map(|&k| drive[k]).collect();
        let c = CouplingMatrices::new(&pos_p, &d).unwrap();
        let rho_p = steady_state(&LiouvillianProblem::new(-0.5, drive_p, c).unwrap(), &Default::default()).unwrap();
        assert!(rho.permuted(&perm).distance(&rho_p) < 1e-10);
    }
}
