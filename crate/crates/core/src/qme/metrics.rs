use faer::{Mat, Side};
use num_complex::Complex64 as C64;

use super::DensityMatrix;
use crate::error::{Error, Result};

/// ⟨σ₋⟩ and ⟨σ_ee⟩ per atom.
#[derive(Debug, Clone, PartialEq)]
pub struct OneBodyExpectations {
    pub rho_ge: Vec<C64>,
    pub rho_ee: Vec<f64>,
}

impl OneBodyExpectations {
    pub fn len(&self) -> usize {
        self.rho_ee.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho_ee.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Expectations {
    pub one_body: OneBodyExpectations,
    /// ⟨σ₊^j σ₋^ℓ⟩, row-major N × N; the diagonal equals ρ_ee.
    pub sp_sm: Vec<C64>,
    /// ⟨σ_ee^j σ_ee^ℓ⟩, row-major N × N.
    pub ee_ee: Vec<f64>,
}

impl Expectations {
    pub fn sp_sm(&self, j: usize, l: usize) -> C64 {
        self.sp_sm[j * self.one_body.len() + l]
    }

    pub fn ee_ee(&self, j: usize, l: usize) -> f64 {
        self.ee_ee[j * self.one_body.len() + l]
    }
}

pub fn expectations(rho: &DensityMatrix) -> Expectations {
    let n = rho.n_atoms();
    let dim = rho.dim();
    let mut rho_ge = vec![C64::new(0.0, 0.0); n];
    let mut rho_ee = vec![0.0; n];
    for j in 0..n {
        let bit = 1 << j;
        for a in (0..dim).filter(|a| a & bit == 0) {
            rho_ge[j] += rho.get(a | bit, a);
            rho_ee[j] += rho.get(a | bit, a | bit).re;
        }
    }
    let mut sp_sm = vec![C64::new(0.0, 0.0); n * n];
    let mut ee_ee = vec![0.0; n * n];
    for j in 0..n {
        for l in 0..n {
            if j == l {
                sp_sm[j * n + j] = C64::new(rho_ee[j], 0.0);
                ee_ee[j * n + j] = rho_ee[j];
                continue;
            }
            let (bj, bl) = (1 << j, 1 << l);
            let mut s = C64::new(0.0, 0.0);
            let mut e = 0.0;
            for c in 0..dim {
                if c & bl != 0 && c & bj == 0 {
                    // Tr(σ₊^j σ₋^ℓ ρ) = Σ_c ρ[c, c − 2^ℓ + 2^j]
                    s += rho.get(c, (c ^ bl) | bj);
                }
                if c & bl != 0 && c & bj != 0 {
                    e += rho.get(c, c).re;
                }
            }
            sp_sm[j * n + l] = s;
            ee_ee[j * n + l] = e;
        }
    }
    Expectations { one_body: OneBodyExpectations { rho_ge, rho_ee }, sp_sm, ee_ee }
}

/// Two-atom reduced state in the basis bit 0 = atom j, bit 1 = atom ℓ.
pub fn reduced_pair(rho: &DensityMatrix, j: usize, l: usize) -> Result<[[C64; 4]; 4]> {
    let n = rho.n_atoms();
    if j == l || j >= n || l >= n {
        return Err(Error::InvalidPair(j, l));
    }
    let dim = rho.dim();
    let (bj, bl) = (1 << j, 1 << l);
    let embed = |p: usize, rest: usize| rest | if p & 1 != 0 { bj } else { 0 } | if p & 2 != 0 { bl } else { 0 };
    let mut out = [[C64::new(0.0, 0.0); 4]; 4];
    for rest in (0..dim).filter(|r| r & (bj | bl) == 0) {
        for p in 0..4 {
            for q in 0..4 {
                out[p][q] += rho.get(embed(p, rest), embed(q, rest));
            }
        }
    }
    Ok(out)
}

fn to_mat(m: &[[C64; 4]; 4]) -> Mat<C64> {
    Mat::from_fn(4, 4, |i, j| m[i][j])
}

/// Wootters concurrence of a two-qubit density matrix.
pub fn concurrence(pair: &[[C64; 4]; 4]) -> Result<f64> {
    let rho = to_mat(pair);
    let herm = Mat::from_fn(4, 4, |i, j| 0.5 * (rho[(i, j)] + rho[(j, i)].conj()));
    let evd = herm.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let (u, s) = (evd.U(), evd.S());
    let sqrt_diag: Vec<f64> = (0..4).map(|k| s.column_vector()[k].re.max(0.0).sqrt()).collect();
    let sqrt_rho = Mat::from_fn(4, 4, |i, j| (0..4).map(|k| u[(i, k)] * sqrt_diag[k] * u[(j, k)].conj()).sum::<C64>());
    // σ_y ⊗ σ_y is the anti-diagonal (−1, 1, 1, −1).
    let flip = [(3usize, -1.0), (2, 1.0), (1, 1.0), (0, -1.0)];
    let tilde = Mat::from_fn(4, 4, |i, j| {
        let (pi, si) = flip[i];
        let (pj, sj) = flip[j];
        herm[(pi, pj)].conj() * (si * sj)
    });
    let r = &sqrt_rho * &tilde * &sqrt_rho;
    let r = Mat::from_fn(4, 4, |i, j| 0.5 * (r[(i, j)] + r[(j, i)].conj()));
    let mut lambdas: Vec<f64> = r
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?
        .into_iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).clamp(0.0, 1.0))
}

/// h(x) = −x log₂x − (1−x) log₂(1−x).
pub fn binary_entropy(x: f64) -> f64 {
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    term(x) + term(1.0 - x)
}

pub fn entanglement_of_formation(concurrence: f64) -> f64 {
    let c = concurrence.clamp(0.0, 1.0);
    binary_entropy(0.5 * (1.0 + (1.0 - c * c).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMetrics {
    /// ⟨σ₊^j σ₋^ℓ⟩ − ⟨σ₊^j⟩⟨σ₋^ℓ⟩
    pub c_pm: C64,
    /// ⟨σ_ee^j σ_ee^ℓ⟩ − ⟨σ_ee^j⟩⟨σ_ee^ℓ⟩
    pub c_ee: f64,
    pub concurrence: f64,
    pub entanglement: f64,
    pub purity: f64,
}

pub fn pair_metrics(rho: &DensityMatrix, j: usize, l: usize) -> Result<PairMetrics> {
    let pair = reduced_pair(rho, j, l)?;
    let e = expectations(rho);
    let (gj, gl) = (e.one_body.rho_ge[j], e.one_body.rho_ge[l]);
    let c_pm = e.sp_sm(j, l) - gj.conj() * gl;
    let c_ee = e.ee_ee(j, l) - e.one_body.rho_ee[j] * e.one_body.rho_ee[l];
    let purity = pair.iter().flatten().map(|z| z.norm_sqr()).sum();
    let concurrence = concurrence(&pair)?;
    Ok(PairMetrics { c_pm, c_ee, concurrence, entanglement: entanglement_of_formation(concurrence), purity })
}
