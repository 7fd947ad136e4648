//! Single driven atom: steady state from both solvers and the power-broadened
//! coherent lineshape seen through a Gaussian beam.

use arraytrans::coupling::CouplingMatrices;
use arraytrans::detection::{fit_lorentzian, DetectionGeometry};
use arraytrans::ensemble::{run_sweep, EnsembleSettings, Experiment};
use arraytrans::geometry::{Geometry, LatticeSpec};
use arraytrans::incident_field::{Beam, DriveStrength, ParaxialBeam, Polarization};
use arraytrans::qme::{expectations, steady_state, LiouvillianProblem};
use arraytrans::sce::{sce_steady_state, SceSettings};
use num_complex::Complex64 as C64;

fn main() -> arraytrans::Result<()> {
    let rabi = DriveStrength::new(1.0)?.peak_rabi();
    let problem = LiouvillianProblem::new(0.5, vec![C64::new(rabi, 0.0)], CouplingMatrices::independent(1))?;
    let q = expectations(&steady_state(&problem, &Default::default())?).one_body;
    let s = sce_steady_state(&problem, &SceSettings::default())?.state;
    println!("QME: rho_ee = {:.6}, rho_ge = {:.6}", q.rho_ee[0], q.rho_ge[0]);
    println!("SCE: rho_ee = {:.6}, rho_ge = {:.6}", s.rho_ee[0], s.rho_ge[0]);

    let pol = Polarization::XyDiag;
    let exp = Experiment::new(
        Geometry::Lattice(LatticeSpec::fixed(1, 1, 1.0)),
        Beam::Paraxial(ParaxialBeam::new(10.0, pol)),
        pol.vector(),
        DetectionGeometry::default(),
    )?;
    let detunings: Vec<f64> = (-120..=120).map(|k| 0.1 * k as f64).collect();
    for intensity in [0.1, 1.0, 10.0] {
        let res = run_sweep(&exp, &EnsembleSettings::default(), &detunings, &[intensity])?;
        let od: Vec<f64> = res.records.iter().map(|r| r.qm.unwrap().od_coh).collect();
        let fit = fit_lorentzian(&detunings, &od)?;
        println!(
            "I/Isat = {intensity:>5}: peak OD {:.5}, HWHM {:.4} (sqrt(1+I) = {:.4})",
            fit.amplitude,
            fit.hwhm,
            (1.0 + intensity).sqrt()
        );
    }
    Ok(())
}
