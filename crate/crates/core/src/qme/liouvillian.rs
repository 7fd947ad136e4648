use faer::Mat;
use num_complex::Complex64 as C64;

use super::LiouvillianProblem;
use crate::error::Result;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Sparse non-Hermitian Hamiltonian H_eff = H − iA stored as (row, col, value).
#[derive(Debug, Clone)]
pub(crate) struct EffectiveHamiltonian {
    pub entries: Vec<(usize, usize, C64)>,
}

/// Nonzero decay couplings γ_jℓ as (j, ℓ, 2γ_jℓ).
pub(crate) fn jump_terms(problem: &LiouvillianProblem) -> Vec<(usize, usize, f64)> {
    let n = problem.n_atoms();
    let mut out = Vec::new();
    for j in 0..n {
        for l in 0..n {
            let g = problem.coupling.gamma(j, l);
            if g != 0.0 {
                out.push((j, l, 2.0 * g));
            }
        }
    }
    out
}

impl EffectiveHamiltonian {
    pub fn new(problem: &LiouvillianProblem) -> Self {
        let n = problem.n_atoms();
        let dim = 1usize << n;
        let mut entries = Vec::with_capacity(dim * (1 + n * n));
        for c in 0..dim {
            let mut diag = C64::new(0.0, 0.0);
            for j in 0..n {
                let bit = 1 << j;
                if c & bit != 0 {
                    diag += C64::new(-problem.detuning, -problem.coupling.gamma(j, j));
                    // σ₋ column c → row c − 2^j with amplitude −R*.
                    entries.push((c ^ bit, c, -problem.drive[j].conj()));
                } else {
                    entries.push((c | bit, c, -problem.drive[j]));
                }
            }
            if diag != C64::new(0.0, 0.0) {
                entries.push((c, c, diag));
            }
            // −(Ω + iγ)_jℓ σ₊^j σ₋^ℓ, j ≠ ℓ.
            for l in 0..n {
                if c & (1 << l) == 0 {
                    continue;
                }
                for j in 0..n {
                    if j == l || c & (1 << j) != 0 {
                        continue;
                    }
                    let v = problem.coupling.complex(j, l);
                    if v != C64::new(0.0, 0.0) {
                        entries.push((c ^ (1 << l) | (1 << j), c, -v));
                    }
                }
            }
        }
        entries.retain(|e| e.2 != C64::new(0.0, 0.0));
        Self { entries }
    }
}

/// Matrix-free Liouvillian action, `rho` and `out` row-major dim × dim.
pub fn apply_liouvillian(problem: &LiouvillianProblem, rho: &[C64], out: &mut [C64]) {
    let heff = EffectiveHamiltonian::new(problem);
    let jumps = jump_terms(problem);
    apply_with(problem.n_atoms(), &heff, &jumps, rho, out);
}

pub(crate) fn apply_with(
    n_atoms: usize,
    heff: &EffectiveHamiltonian,
    jumps: &[(usize, usize, f64)],
    rho: &[C64],
    out: &mut [C64],
) {
    let dim = 1usize << n_atoms;
    out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
    for &(r, c, v) in &heff.entries {
        // −i H ρ : row r gets v·ρ[c, :]
        let mv = -I * v;
        let (src, dst) = (c * dim, r * dim);
        for b in 0..dim {
            out[dst + b] += mv * rho[src + b];
        }
        // +i ρ H† : column r gets ρ[:, c]·conj(v)
        let pv = I * v.conj();
        for a in 0..dim {
            out[a * dim + r] += pv * rho[a * dim + c];
        }
    }
    for &(j, l, g2) in jumps {
        let (bj, bl) = (1usize << j, 1usize << l);
        for a in (0..dim).filter(|a| a & bj == 0) {
            let src = (a | bj) * dim;
            for b in (0..dim).filter(|b| b & bl == 0) {
                out[a * dim + b] += g2 * rho[src + (b | bl)];
            }
        }
    }
}

/// Dense superoperator with vec index a·dim + b.
pub fn dense_liouvillian(problem: &LiouvillianProblem) -> Result<Mat<C64>> {
    problem.check_size()?;
    let dim = problem.dim();
    let size = dim * dim;
    let heff = EffectiveHamiltonian::new(problem);
    let mut l = Mat::<C64>::zeros(size, size);
    for &(r, c, v) in &heff.entries {
        let mv = -I * v;
        let pv = I * v.conj();
        for b in 0..dim {
            l[(r * dim + b, c * dim + b)] += mv;
        }
        for a in 0..dim {
            l[(a * dim + r, a * dim + c)] += pv;
        }
    }
    for (j, lj, g2) in jump_terms(problem) {
        let (bj, bl) = (1usize << j, 1usize << lj);
        for a in (0..dim).filter(|a| a & bj == 0) {
            for b in (0..dim).filter(|b| b & bl == 0) {
                l[(a * dim + b, (a | bj) * dim + (b | bl))] += C64::new(g2, 0.0);
            }
        }
    }
    Ok(l)
}
