//! Semiclassical (mean-field) equations: each atom is a classical Bloch
//! vector driven by the laser and by the mean dipoles of all other atoms.
//!
//! State layout for the solvers: `[Re ρ_ge (N), Im ρ_ge (N), ρ_ee (N)]`.

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::ode::{Dopri5, Tolerances};
use crate::qme::LiouvillianProblem;

#[derive(Debug, Clone, PartialEq)]
pub struct SpinState {
    pub rho_ge: Vec<C64>,
    pub rho_ee: Vec<f64>,
}

impl SpinState {
    pub fn ground(n: usize) -> Self {
        Self { rho_ge: vec![C64::new(0.0, 0.0); n], rho_ee: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.rho_ee.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho_ee.is_empty()
    }

    pub fn pack(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(3 * self.len());
        y.extend(self.rho_ge.iter().map(|z| z.re));
        y.extend(self.rho_ge.iter().map(|z| z.im));
        y.extend_from_slice(&self.rho_ee);
        y
    }

    pub fn unpack(y: &[f64]) -> Self {
        let n = y.len() / 3;
        Self {
            rho_ge: (0..n).map(|j| C64::new(y[j], y[n + j])).collect(),
            rho_ee: y[2 * n..].to_vec(),
        }
    }

    /// Largest distance between two states (max-norm over all components).
    pub fn distance(&self, other: &Self) -> f64 {
        self.pack().iter().zip(other.pack()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SceSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Required ‖rhs‖∞ at the returned state.
    pub residual_tol: f64,
    /// Maximum integration time in 1/γ.
    pub t_max: f64,
    /// Try Newton polishing once the residual drops below this (0 disables).
    pub newton_start: f64,
    /// Reject Newton fixed points with unstable linearization.
    pub check_stability: bool,
    /// Also start from perturbed initial conditions and compare.
    pub probe_multistability: bool,
}

impl Default for SceSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            residual_tol: 1e-9,
            t_max: 200.0,
            newton_start: 1e-2,
            check_stability: true,
            probe_multistability: false,
        }
    }
}

impl SceSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0 && self.residual_tol > 0.0 && self.t_max > 0.0) {
            return Err(invalid("solver", "tolerances and t_max must be positive"));
        }
        Ok(())
    }
}

/// Tolerance on populations leaving [0, 1] during a trajectory.
pub const POPULATION_SLACK: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct SceSolution {
    pub state: SpinState,
    pub residual: f64,
    /// Integration time used before convergence.
    pub time: f64,
    /// False when the dynamics never settled (for instance on a limit cycle)
    /// and the state is an unstable fixed point.
    pub stable: bool,
    /// Distinct steady states found from perturbed starts, if probing was enabled.
    pub alternates: Vec<SpinState>,
}

impl SceSolution {
    pub fn is_multistable(&self) -> bool {
        !self.alternates.is_empty()
    }
}

/// Mean field F_j = Σ_{ℓ≠j} (Ω + iγ)_jℓ ρ_ℓ plus the drive.
fn local_fields(problem: &LiouvillianProblem, rho: &[C64], out: &mut [C64]) {
    let n = rho.len();
    for j in 0..n {
        let mut g = problem.drive[j];
        for (l, r) in rho.iter().enumerate() {
            if l != j {
                g += problem.coupling.complex(j, l) * r;
            }
        }
        out[j] = g;
    }
}

/// Writes d/dt of the packed state.
pub fn sce_rhs(problem: &LiouvillianProblem, y: &[f64], dy: &mut [f64]) {
    let n = problem.n_atoms();
    let rho: Vec<C64> = (0..n).map(|j| C64::new(y[j], y[n + j])).collect();
    let mut g = vec![C64::new(0.0, 0.0); n];
    local_fields(problem, &rho, &mut g);
    for j in 0..n {
        let ee = y[2 * n + j];
        let gjj = problem.coupling.gamma(j, j);
        let d = C64::new(-gjj, problem.detuning) * rho[j] - C64::new(0.0, 2.0 * ee - 1.0) * g[j];
        dy[j] = d.re;
        dy[n + j] = d.im;
        dy[2 * n + j] = -2.0 * gjj * ee + 2.0 * (rho[j] * g[j].conj()).im;
    }
}

/// Dense row-major Jacobian of [`sce_rhs`].
pub fn sce_jacobian(problem: &LiouvillianProblem, y: &[f64]) -> Vec<f64> {
    let n = problem.n_atoms();
    let m = 3 * n;
    let rho: Vec<C64> = (0..n).map(|j| C64::new(y[j], y[n + j])).collect();
    let mut g = vec![C64::new(0.0, 0.0); n];
    local_fields(problem, &rho, &mut g);
    let mut jac = vec![0.0; m * m];
    let set_complex = |jac: &mut [f64], row: usize, col: usize, a: C64| {
        jac[row * m + col] += a.re;
        jac[row * m + n + col] -= a.im;
        jac[(n + row) * m + col] += a.im;
        jac[(n + row) * m + n + col] += a.re;
    };
    for j in 0..n {
        let s = 2.0 * y[2 * n + j] - 1.0;
        let gjj = problem.coupling.gamma(j, j);
        set_complex(&mut jac, j, j, C64::new(-gjj, problem.detuning));
        for l in (0..n).filter(|&l| l != j) {
            set_complex(&mut jac, j, l, C64::new(0.0, -s) * problem.coupling.complex(j, l));
        }
        let dn = C64::new(0.0, -2.0) * g[j];
        jac[j * m + 2 * n + j] += dn.re;
        jac[(n + j) * m + 2 * n + j] += dn.im;

        let row = (2 * n + j) * m;
        jac[row + j] += -2.0 * g[j].im;
        jac[row + n + j] += 2.0 * g[j].re;
        jac[row + 2 * n + j] += -2.0 * gjj;
        for l in (0..n).filter(|&l| l != j) {
            let w = rho[j] * problem.coupling.complex(j, l).conj();
            jac[row + l] += 2.0 * w.im;
            jac[row + n + l] += -2.0 * w.re;
        }
    }
    jac
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn populations_ok(y: &[f64], n: usize, slack: f64) -> bool {
    y[2 * n..].iter().all(|&p| p >= -slack && p <= 1.0 + slack)
}

/// Damped Newton iteration; returns the polished state if it converges.
fn newton(problem: &LiouvillianProblem, y0: &[f64], settings: &SceSettings, max_iter: usize) -> Option<Vec<f64>> {
    let m = y0.len();
    let mut y = y0.to_vec();
    let mut f = vec![0.0; m];
    sce_rhs(problem, &y, &mut f);
    let mut res = max_norm(&f);
    for _ in 0..max_iter {
        if res < settings.residual_tol {
            break;
        }
        let jac = sce_jacobian(problem, &y);
        let j = Mat::from_fn(m, m, |r, c| jac[r * m + c]);
        let mut step = Mat::from_fn(m, 1, |r, _| -f[r]);
        j.partial_piv_lu().solve_in_place(step.as_mut());
        if (0..m).any(|r| !step[(r, 0)].is_finite()) {
            return None;
        }
        let mut lambda = 1.0;
        let mut trial = vec![0.0; m];
        let mut f_trial = vec![0.0; m];
        loop {
            for r in 0..m {
                trial[r] = y[r] + lambda * step[(r, 0)];
            }
            sce_rhs(problem, &trial, &mut f_trial);
            let r_trial = max_norm(&f_trial);
            if r_trial < res || lambda < 1e-4 {
                break;
            }
            lambda *= 0.5;
        }
        if lambda < 1e-4 {
            return None;
        }
        std::mem::swap(&mut y, &mut trial);
        std::mem::swap(&mut f, &mut f_trial);
        res = max_norm(&f);
    }
    (res < settings.residual_tol).then_some(y)
}

/// True if every eigenvalue of the Jacobian has negative real part.
pub fn is_linearly_stable(problem: &LiouvillianProblem, y: &[f64]) -> Result<bool> {
    let m = y.len();
    let jac = sce_jacobian(problem, y);
    let eig = Mat::from_fn(m, m, |r, c| jac[r * m + c])
        .eigenvalues()
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    Ok(eig.iter().all(|z| z.re < 0.0))
}

enum Trajectory {
    Settled { y: Vec<f64>, residual: f64, time: f64 },
    /// Still moving at t_max: final state, its time average over the second
    /// half of the run, and the residual history.
    Unsettled { last: Vec<f64>, average: Vec<f64>, history: Vec<f64> },
}

fn integrate_from(problem: &LiouvillianProblem, start: Vec<f64>, settings: &SceSettings) -> Result<Trajectory> {
    let n = problem.n_atoms();
    let tol = Tolerances { abs: settings.abs_tol, rel: settings.rel_tol, ..Tolerances::default() };
    let mut ode = Dopri5::new(3 * n, tol);
    let mut y = start;
    let mut f = vec![0.0; 3 * n];
    sce_rhs(problem, &y, &mut f);
    let mut res = max_norm(&f);
    let mut t = 0.0;
    let mut history = Vec::new();
    let mut sum = vec![0.0; 3 * n];
    let mut samples = 0usize;
    let mut rhs = |_: f64, y: &[f64], dy: &mut [f64]| sce_rhs(problem, y, dy);
    loop {
        if res < settings.residual_tol {
            return Ok(Trajectory::Settled { y, residual: res, time: t });
        }
        if settings.newton_start > 0.0 && res < settings.newton_start {
            if let Some(fixed) = newton(problem, &y, settings, 30) {
                let stable = !settings.check_stability || is_linearly_stable(problem, &fixed)?;
                if stable && populations_ok(&fixed, n, 1e-8) {
                    sce_rhs(problem, &fixed, &mut f);
                    return Ok(Trajectory::Settled { y: fixed, residual: max_norm(&f), time: t });
                }
            }
        }
        if t >= settings.t_max {
            let average = sum.iter().map(|v| v / samples.max(1) as f64).collect();
            return Ok(Trajectory::Unsettled { last: y, average, history });
        }
        let t_end = (t + 1.0).min(settings.t_max);
        ode.integrate(&mut rhs, &mut t, &mut y, t_end)?;
        if !populations_ok(&y, n, POPULATION_SLACK) {
            let worst = y[2 * n..].iter().copied().fold(0.5, |w: f64, p| if (p - 0.5).abs() > (w - 0.5).abs() { p } else { w });
            return Err(Error::Unphysical { value: worst });
        }
        if t > 0.5 * settings.t_max {
            sum.iter_mut().zip(&y).for_each(|(s, v)| *s += v);
            samples += 1;
        }
        res = ode.last_derivative().map_or(f64::INFINITY, max_norm);
        history.push(res);
    }
}

/// Fixed point near a trajectory that never settled, e.g. on a limit cycle.
fn unsettled_fixed_point(
    problem: &LiouvillianProblem,
    last: Vec<f64>,
    average: Vec<f64>,
    history: Vec<f64>,
    settings: &SceSettings,
) -> Result<(Vec<f64>, f64)> {
    let n = problem.n_atoms();
    let mut starts = vec![average];
    if let Ok(lin) = linear_response(problem) {
        let ee: Vec<f64> = lin.iter().map(|z| z.norm_sqr().min(0.5)).collect();
        starts.push(SpinState { rho_ge: lin, rho_ee: ee }.pack());
    }
    starts.push(last);
    let mut f = vec![0.0; 3 * n];
    for start in starts {
        if let Some(fixed) = newton(problem, &start, settings, 100) {
            if populations_ok(&fixed, n, 1e-8) {
                sce_rhs(problem, &fixed, &mut f);
                return Ok((fixed, max_norm(&f)));
            }
        }
    }
    Err(Error::NotConverged { t_max: settings.t_max, residuals: history })
}

fn settle(problem: &LiouvillianProblem, start: Vec<f64>, settings: &SceSettings) -> Result<(Vec<f64>, f64, f64, bool)> {
    match integrate_from(problem, start, settings)? {
        Trajectory::Settled { y, residual, time } => Ok((y, residual, time, true)),
        Trajectory::Unsettled { last, average, history } => {
            let (y, residual) = unsettled_fixed_point(problem, last, average, history, settings)?;
            let stable = is_linearly_stable(problem, &y)?;
            Ok((y, residual, settings.t_max, stable))
        }
    }
}

/// Steady state reached from the all-ground initial condition.
pub fn sce_steady_state(problem: &LiouvillianProblem, settings: &SceSettings) -> Result<SceSolution> {
    settings.validate()?;
    let n = problem.n_atoms();
    let (y, residual, time, stable) = settle(problem, SpinState::ground(n).pack(), settings)?;
    let state = SpinState::unpack(&y);
    let mut alternates: Vec<SpinState> = Vec::new();
    if settings.probe_multistability {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5ce);
        for _ in 0..3 {
            let mut start = Vec::with_capacity(3 * n);
            let mut ee = Vec::with_capacity(n);
            let mut ge = Vec::with_capacity(n);
            for _ in 0..n {
                // Uniform point in the Bloch ball.
                let p: f64 = rng.gen_range(0.0..1.0);
                let r = (p * (1.0 - p)).sqrt() * rng.gen_range(0.0f64..1.0).sqrt();
                ge.push(C64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU)));
                ee.push(p);
            }
            start.extend(ge.iter().map(|z| z.re));
            start.extend(ge.iter().map(|z| z.im));
            start.extend(ee);
            if let Ok((alt, _, _, _)) = settle(problem, start, settings) {
                let alt = SpinState::unpack(&alt);
                let seen = std::iter::once(&state).chain(&alternates).any(|s| s.distance(&alt) < 1e-6);
                if !seen {
                    alternates.push(alt);
                }
            }
        }
    }
    Ok(SceSolution { state, residual, time, stable, alternates })
}

/// Low-intensity limit: solves (iΔ − 1)ρ_j + i Σ_{ℓ≠j} (Ω + iγ)_jℓ ρ_ℓ = −iR_j.
pub fn linear_response(problem: &LiouvillianProblem) -> Result<Vec<C64>> {
    let n = problem.n_atoms();
    let a = Mat::from_fn(n, n, |j, l| {
        if j == l {
            C64::new(-problem.coupling.gamma(j, j), problem.detuning)
        } else {
            C64::new(0.0, 1.0) * problem.coupling.complex(j, l)
        }
    });
    let mut b = Mat::from_fn(n, 1, |j, _| C64::new(0.0, -1.0) * problem.drive[j]);
    a.partial_piv_lu().solve_in_place(b.as_mut());
    let out: Vec<C64> = (0..n).map(|j| b[(j, 0)]).collect();
    if out.iter().any(|z| !z.is_finite()) {
        return Err(Error::SteadyState { residual: f64::INFINITY, reason: "singular coupled-dipole system".into() });
    }
    Ok(out)
}
