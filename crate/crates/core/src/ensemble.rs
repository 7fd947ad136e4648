//! Ensemble averages over stochastic atomic configurations.
//!
//! Each realization samples positions once and reuses them for every (Δ, I)
//! point of a sweep. Realizations run in parallel; their results are reduced
//! sequentially in realization order, so output does not depend on the
//! number of worker threads.

use nalgebra::Vector3;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{eigenmodes, CouplingMatrices, EigenmodeSet};
use crate::detection::{
    coherent_transmission, incoherent_transmission, optical_depth, quantum_terms, semiclassical_terms,
    DetectionGeometry, DetectionGrid, ModeTerms,
};
use crate::error::{invalid, Error, Result};
use crate::geometry::{realization_seed, AtomConfiguration, Geometry};
use crate::incident_field::{Beam, DriveStrength};
use crate::qme::{expectations, pair_metrics, steady_state, LiouvillianProblem, PairMetrics, SteadyStateOptions};
use crate::sce::{sce_steady_state, SceSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverSet {
    Qme,
    Sce,
    #[default]
    Both,
}

impl SolverSet {
    pub fn qme(self) -> bool {
        matches!(self, Self::Qme | Self::Both)
    }

    pub fn sce(self) -> bool {
        matches!(self, Self::Sce | Self::Both)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Qme => "qme",
            Self::Sce => "sce",
            Self::Both => "both",
        }
    }
}

/// Realizations used when a fluctuating scenario does not specify a count.
pub const DEFAULT_REALIZATIONS: usize = 1024;

#[derive(Debug, Clone)]
pub struct EnsembleSettings {
    pub realizations: usize,
    pub master_seed: u64,
    pub solvers: SolverSet,
    /// The master equation is skipped above this many atoms.
    pub qme_max_atoms: usize,
    /// Largest tolerated fraction of failed realizations at any point.
    pub failure_budget: f64,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
    /// Atom pair for correlation and entanglement metrics.
    pub pair: Option<(usize, usize)>,
    pub qme: SteadyStateOptions,
    pub sce: SceSettings,
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        Self {
            realizations: DEFAULT_REALIZATIONS,
            master_seed: 0,
            solvers: SolverSet::Both,
            qme_max_atoms: 10,
            failure_budget: 0.01,
            threads: None,
            pair: None,
            qme: SteadyStateOptions::default(),
            sce: SceSettings::default(),
        }
    }
}

impl EnsembleSettings {
    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(invalid("ensemble.realizations", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.failure_budget) {
            return Err(invalid("ensemble.failure_budget", "must lie in [0, 1)"));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads", "must be at least 1"));
        }
        self.sce.validate()
    }
}

/// Atoms, probe beam and detector: everything fixed during a run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub geometry: Geometry,
    pub beam: Beam,
    pub dipole: Vector3<C64>,
    pub detection: DetectionGrid,
}

impl Experiment {
    pub fn new(geometry: Geometry, beam: Beam, dipole: Vector3<C64>, detection: DetectionGeometry) -> Result<Self> {
        geometry.validate()?;
        let detection = DetectionGrid::new(&beam, detection)?;
        Ok(Self { geometry, beam, dipole, detection })
    }

    pub fn n_atoms(&self) -> usize {
        self.geometry.n_atoms()
    }

    /// Realizations actually run: one for fixed positions.
    pub fn effective_realizations(&self, requested: usize) -> usize {
        if self.geometry.is_deterministic() {
            1
        } else {
            requested
        }
    }

    /// Positions, couplings, drive pattern and mode coefficients for one seed.
    pub fn realize(&self, seed: u64) -> Result<Realization> {
        let config = self.geometry.sample(seed)?;
        let coupling = CouplingMatrices::new(&config.positions, &self.dipole)?;
        let drive_shape = config.positions.iter().map(|r| self.dipole.dotc(&self.beam.field(r))).collect();
        let g = self.detection.mode_coeffs(&config.positions, &self.dipole);
        Ok(Realization { config, coupling, drive_shape, g })
    }
}

#[derive(Debug, Clone)]
pub struct Realization {
    pub config: AtomConfiguration,
    pub coupling: CouplingMatrices,
    /// d̂*·u(r_j); the Rabi frequency is this times R_peak.
    pub drive_shape: Vec<C64>,
    pub g: Vec<C64>,
}

impl Realization {
    pub fn problem(&self, detuning: f64, drive: DriveStrength) -> Result<LiouvillianProblem> {
        let rabi = drive.peak_rabi();
        LiouvillianProblem::new(detuning, self.drive_shape.iter().map(|u| u * rabi).collect(), self.coupling.clone())
    }

    /// Collective modes with overlaps against the drive pattern.
    pub fn eigenmodes(&self) -> Result<EigenmodeSet> {
        eigenmodes(&self.coupling, &self.drive_shape)
    }
}

/// Outcome of both solvers for one realization at one (Δ, I).
#[derive(Debug, Clone)]
pub struct PointSample {
    pub qm: Option<std::result::Result<(ModeTerms, Option<PairMetrics>), String>>,
    /// SC and SAQ terms, and whether the semiclassical state is dynamically stable.
    pub sc: Option<std::result::Result<(ModeTerms, ModeTerms, bool), String>>,
}

pub fn solve_point(
    real: &Realization,
    detuning: f64,
    drive: DriveStrength,
    settings: &EnsembleSettings,
    run_qme: bool,
) -> PointSample {
    let rabi = drive.peak_rabi();
    let problem = real.problem(detuning, drive);
    let qm = run_qme.then(|| {
        let problem = problem.as_ref().map_err(|e| e.to_string())?;
        let rho = steady_state(problem, &settings.qme).map_err(|e| e.to_string())?;
        let terms = quantum_terms(&real.g, rabi, &expectations(&rho));
        let pair = match settings.pair {
            Some((j, l)) => Some(pair_metrics(&rho, j, l).map_err(|e| e.to_string())?),
            None => None,
        };
        Ok((terms, pair))
    });
    let sc = settings.solvers.sce().then(|| {
        let problem = problem.as_ref().map_err(|e| e.to_string())?;
        let sol = sce_steady_state(problem, &settings.sce).map_err(|e| e.to_string())?;
        let (sc, saq) = semiclassical_terms(&real.g, rabi, &sol.state);
        Ok((sc, saq, sol.stable))
    });
    PointSample { qm, sc }
}

/// Running mean and co-moments of (β, Re α, Im α).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Accumulator {
    pub count: u64,
    mean: [f64; 3],
    comoment: [[f64; 3]; 3],
}

impl Accumulator {
    pub fn push(&mut self, terms: ModeTerms) {
        let x = [terms.beta, terms.alpha.re, terms.alpha.im];
        self.count += 1;
        let n = self.count as f64;
        let before: [f64; 3] = std::array::from_fn(|i| x[i] - self.mean[i]);
        for i in 0..3 {
            self.mean[i] += before[i] / n;
        }
        for i in 0..3 {
            for k in 0..3 {
                self.comoment[i][k] += before[i] * (x[k] - self.mean[k]);
            }
        }
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta: [f64; 3] = std::array::from_fn(|i| other.mean[i] - self.mean[i]);
        for i in 0..3 {
            for k in 0..3 {
                self.comoment[i][k] += other.comoment[i][k] + delta[i] * delta[k] * na * nb / n;
            }
        }
        for i in 0..3 {
            self.mean[i] += delta[i] * nb / n;
        }
        self.count += other.count;
    }

    pub fn mean_alpha(&self) -> C64 {
        C64::new(self.mean[1], self.mean[2])
    }

    pub fn mean_beta(&self) -> f64 {
        self.mean[0]
    }

    /// Sample covariance (n − 1 normalization).
    pub fn covariance(&self) -> [[f64; 3]; 3] {
        let d = (self.count as f64 - 1.0).max(1.0);
        self.comoment.map(|row| row.map(|c| c / d))
    }

    /// Transmission observables with delta-method standard errors.
    pub fn stats(&self, norm: f64, deterministic: bool) -> ModelStats {
        let a = self.mean_alpha();
        let t_coh = coherent_transmission(a, norm);
        let t_inc = incoherent_transmission(self.mean_beta(), a, norm);
        let cov = self.covariance();
        let n = self.count as f64;
        let quad = |u: [f64; 3]| -> f64 {
            let mut s = 0.0;
            for i in 0..3 {
                for k in 0..3 {
                    s += u[i] * cov[i][k] * u[k];
                }
            }
            (s.max(0.0) / n).sqrt()
        };
        let (se_coh, se_inc) = if deterministic {
            (0.0, 0.0)
        } else if self.count < 2 {
            (f64::NAN, f64::NAN)
        } else {
            let n2 = norm * norm;
            let z = a + norm;
            (quad([0.0, 2.0 * z.re / n2, 2.0 * z.im / n2]), quad([1.0 / n2, -2.0 * a.re / n2, -2.0 * a.im / n2]))
        };
        ModelStats {
            t_coh,
            od_coh: optical_depth(t_coh),
            t_inc,
            stderr_t_coh: se_coh,
            stderr_od_coh: se_coh / t_coh,
            stderr_t_inc: se_inc,
            count: self.count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelStats {
    pub t_coh: f64,
    pub od_coh: f64,
    pub t_inc: f64,
    pub stderr_t_coh: f64,
    pub stderr_od_coh: f64,
    pub stderr_t_inc: f64,
    pub count: u64,
}

/// Realization means of the pair metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairMeans {
    pub c_pm: C64,
    pub c_ee: f64,
    pub concurrence: f64,
    pub entanglement: f64,
    pub purity: f64,
    pub count: u64,
}

impl PairMeans {
    fn push(&mut self, m: &PairMetrics) {
        self.count += 1;
        let w = 1.0 / self.count as f64;
        self.c_pm += (m.c_pm - self.c_pm) * w;
        self.c_ee += (m.c_ee - self.c_ee) * w;
        self.concurrence += (m.concurrence - self.concurrence) * w;
        self.entanglement += (m.entanglement - self.entanglement) * w;
        self.purity += (m.purity - self.purity) * w;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionRecord {
    pub detuning: f64,
    pub intensity_ratio: f64,
    pub qm: Option<ModelStats>,
    pub sc: Option<ModelStats>,
    pub saq: Option<ModelStats>,
    pub pair: Option<PairMeans>,
    pub realizations: usize,
    pub failed_qm: usize,
    pub failed_sc: usize,
    /// Semiclassical solutions that are unstable fixed points.
    pub unstable_sc: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Intensity-major, detuning-minor.
    pub records: Vec<TransmissionRecord>,
    pub realizations: usize,
    pub master_seed: u64,
    /// Set when the master equation was requested but the array is too large.
    pub qme_skipped: bool,
    /// First failure message seen, if any.
    pub first_failure: Option<String>,
}

impl SweepResult {
    pub fn at_intensity(&self, intensity_ratio: f64) -> Vec<&TransmissionRecord> {
        self.records.iter().filter(|r| r.intensity_ratio == intensity_ratio).collect()
    }
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t);
    }
    b.build().map_err(|e| invalid("threads", e.to_string()))
}

/// Transmission over a (Δ, I) grid.
pub fn run_sweep(
    exp: &Experiment,
    settings: &EnsembleSettings,
    detunings: &[f64],
    intensities: &[f64],
) -> Result<SweepResult> {
    settings.validate()?;
    if detunings.is_empty() || intensities.is_empty() {
        return Err(invalid("sweep", "detuning and intensity grids must be nonempty"));
    }
    let drives = intensities.iter().map(|&i| DriveStrength::new(i)).collect::<Result<Vec<_>>>()?;
    if let Some((j, l)) = settings.pair {
        if j == l || j >= exp.n_atoms() || l >= exp.n_atoms() {
            return Err(Error::InvalidPair(j, l));
        }
    }
    let run_qme = settings.solvers.qme() && exp.n_atoms() <= settings.qme_max_atoms;
    let n_real = exp.effective_realizations(settings.realizations);
    let n_points = detunings.len() * drives.len();

    let per_realization = |i: usize| -> Vec<PointSample> {
        let seed = realization_seed(settings.master_seed, i as u64);
        match exp.realize(seed) {
            Ok(real) => drives
                .iter()
                .flat_map(|&d| detunings.iter().map(move |&delta| (delta, d)))
                .map(|(delta, d)| solve_point(&real, delta, d, settings, run_qme))
                .collect(),
            Err(e) => {
                let msg = e.to_string();
                let fail = PointSample {
                    qm: run_qme.then(|| Err(msg.clone())),
                    sc: settings.solvers.sce().then(|| Err(msg.clone())),
                };
                vec![fail; n_points]
            }
        }
    };
    let samples: Vec<Vec<PointSample>> =
        thread_pool(settings.threads)?.install(|| (0..n_real).into_par_iter().map(per_realization).collect());

    let norm = exp.detection.norm();
    let deterministic = exp.geometry.is_deterministic();
    let mut records = Vec::with_capacity(n_points);
    let mut first_failure = None;
    for (p, (delta, drive)) in drives.iter().flat_map(|&d| detunings.iter().map(move |&x| (x, d))).enumerate() {
        let (mut qm, mut sc, mut saq) = (Accumulator::default(), Accumulator::default(), Accumulator::default());
        let mut pair = PairMeans::default();
        let (mut failed_qm, mut failed_sc, mut unstable_sc) = (0, 0, 0);
        for s in samples.iter().map(|v| &v[p]) {
            match &s.qm {
                Some(Ok((t, m))) => {
                    qm.push(*t);
                    if let Some(m) = m {
                        pair.push(m);
                    }
                }
                Some(Err(e)) => {
                    failed_qm += 1;
                    first_failure.get_or_insert_with(|| e.clone());
                }
                None => {}
            }
            match &s.sc {
                Some(Ok((a, b, stable))) => {
                    sc.push(*a);
                    saq.push(*b);
                    unstable_sc += usize::from(!stable);
                }
                Some(Err(e)) => {
                    failed_sc += 1;
                    first_failure.get_or_insert_with(|| e.clone());
                }
                None => {}
            }
        }
        let failed = failed_qm.max(failed_sc);
        if failed as f64 > settings.failure_budget * n_real as f64 {
            return Err(Error::FailureBudget {
                failed,
                total: n_real,
                budget: settings.failure_budget,
                first: first_failure.unwrap_or_default(),
            });
        }
        records.push(TransmissionRecord {
            detuning: delta,
            intensity_ratio: drive.intensity_ratio(),
            qm: run_qme.then(|| qm.stats(norm, deterministic)),
            sc: settings.solvers.sce().then(|| sc.stats(norm, deterministic)),
            saq: settings.solvers.sce().then(|| saq.stats(norm, deterministic)),
            pair: (run_qme && settings.pair.is_some()).then_some(pair),
            realizations: n_real,
            failed_qm,
            failed_sc,
            unstable_sc,
        });
    }
    Ok(SweepResult {
        records,
        realizations: n_real,
        master_seed: settings.master_seed,
        qme_skipped: settings.solvers.qme() && !run_qme,
        first_failure,
    })
}

/// Transmission at a single (Δ, I).
pub fn run_point(exp: &Experiment, settings: &EnsembleSettings, detuning: f64, intensity_ratio: f64) -> Result<TransmissionRecord> {
    Ok(run_sweep(exp, settings, &[detuning], &[intensity_ratio])?.records.remove(0))
}

/// Collective eigenmodes of every realization, in realization order.
pub fn realization_modes(exp: &Experiment, settings: &EnsembleSettings) -> Result<Vec<EigenmodeSet>> {
    settings.validate()?;
    let n_real = exp.effective_realizations(settings.realizations);
    thread_pool(settings.threads)?.install(|| {
        (0..n_real)
            .into_par_iter()
            .map(|i| exp.realize(realization_seed(settings.master_seed, i as u64))?.eigenmodes())
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LatticeSpec;
    use crate::incident_field::{ParaxialBeam, Polarization};
    use proptest::prelude::*;

    fn pair_experiment(sigma: f64) -> Experiment {
        let mut lattice = LatticeSpec::fixed(2, 1, 0.3);
        lattice.sigma = [sigma, sigma, 0.0];
        let pol = Polarization::XyDiag;
        Experiment::new(
            Geometry::Lattice(lattice),
            Beam::Paraxial(ParaxialBeam::new(3.0, pol)),
            pol.vector(),
            DetectionGeometry::default(),
        )
        .unwrap()
    }

    fn terms(b: f64, re: f64, im: f64) -> ModeTerms {
        ModeTerms { alpha: C64::new(re, im), beta: b }
    }

    #[test]
    fn accumulator_matches_two_pass() {
        let xs = [terms(1.0, 0.5, -0.2), terms(2.5, -0.1, 0.3), terms(0.7, 0.2, 0.9), terms(1.1, 0.0, 0.0)];
        let mut acc = Accumulator::default();
        xs.iter().for_each(|&t| acc.push(t));
        let n = xs.len() as f64;
        let mb = xs.iter().map(|t| t.beta).sum::<f64>() / n;
        let mr = xs.iter().map(|t| t.alpha.re).sum::<f64>() / n;
        let cov = xs.iter().map(|t| (t.beta - mb) * (t.alpha.re - mr)).sum::<f64>() / (n - 1.0);
        assert!((acc.mean_beta() - mb).abs() < 1e-15);
        assert!((acc.covariance()[0][1] - cov).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn merge_equals_sequential(
            xs in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64), 2..40),
            cut in 0usize..40,
        ) {
            let cut = cut.min(xs.len());
            let mut seq = Accumulator::default();
            let (mut a, mut b) = (Accumulator::default(), Accumulator::default());
            for (i, &(x, y, z)) in xs.iter().enumerate() {
                seq.push(terms(x, y, z));
                if i < cut { a.push(terms(x, y, z)) } else { b.push(terms(x, y, z)) }
            }
            a.merge(&b);
            prop_assert_eq!(a.count, seq.count);
            for i in 0..3 {
                prop_assert!((a.mean[i] - seq.mean[i]).abs() < 1e-12);
                for k in 0..3 {
                    prop_assert!((a.comoment[i][k] - seq.comoment[i][k]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn fixed_positions_force_single_realization() {
        let exp = pair_experiment(0.0);
        let res = run_sweep(&exp, &EnsembleSettings::default(), &[0.0], &[1.0]).unwrap();
        assert_eq!(res.realizations, 1);
        let r = &res.records[0];
        assert_eq!(r.sc.unwrap().t_inc, 0.0);
        assert_eq!(r.qm.unwrap().stderr_t_coh, 0.0);
        assert!(r.qm.unwrap().t_inc > 0.0);
    }

    #[test]
    fn sweep_point_equals_run_point() {
        let exp = pair_experiment(0.05);
        let settings = EnsembleSettings { realizations: 8, ..Default::default() };
        let sweep = run_sweep(&exp, &settings, &[-1.0, 0.5], &[0.3, 2.0]).unwrap();
        let point = run_point(&exp, &settings, 0.5, 2.0).unwrap();
        assert_eq!(sweep.records[3], point);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let exp = pair_experiment(0.05);
        let run = |threads| {
            let settings = EnsembleSettings { realizations: 12, threads: Some(threads), ..Default::default() };
            run_sweep(&exp, &settings, &[0.0, 1.0], &[1.0]).unwrap().records
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn oversized_qme_is_skipped() {
        let exp = pair_experiment(0.0);
        let settings = EnsembleSettings { qme_max_atoms: 1, ..Default::default() };
        let res = run_sweep(&exp, &settings, &[0.0], &[1.0]).unwrap();
        assert!(res.qme_skipped);
        assert!(res.records[0].qm.is_none());
        assert!(res.records[0].sc.is_some());
    }

    #[test]
    fn failures_beyond_budget_abort() {
        let exp = pair_experiment(0.0);
        let mut settings = EnsembleSettings { solvers: SolverSet::Qme, ..Default::default() };
        settings.qme.direct_max_atoms = 0;
        settings.qme.t_max = 1e-3;
        match run_sweep(&exp, &settings, &[0.0], &[1.0]) {
            Err(Error::FailureBudget { failed: 1, total: 1, .. }) => {}
            other => panic!("expected failure budget error, got {other:?}"),
        }
    }

    #[test]
    fn pair_metrics_are_reported() {
        let exp = pair_experiment(0.0);
        let settings = EnsembleSettings { pair: Some((0, 1)), solvers: SolverSet::Qme, ..Default::default() };
        let res = run_sweep(&exp, &settings, &[0.0], &[1.0]).unwrap();
        let p = res.records[0].pair.unwrap();
        assert_eq!(p.count, 1);
        assert!(p.purity > 0.25 && p.purity < 1.0);
        assert!(res.records[0].sc.is_none());
        let bad = EnsembleSettings { pair: Some((0, 2)), ..settings };
        assert!(run_sweep(&exp, &bad, &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn modes_satisfy_sum_rule() {
        let exp = pair_experiment(0.05);
        let settings = EnsembleSettings { realizations: 3, ..Default::default() };
        let sets = realization_modes(&exp, &settings).unwrap();
        assert_eq!(sets.len(), 3);
        for s in sets {
            assert!((s.width_sum() - 2.0).abs() < 1e-10);
        }
    }
}
