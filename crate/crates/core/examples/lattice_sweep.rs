//! 2x2 lattice at quarter-wavelength spacing: quantum and semiclassical
//! coherent transmission side by side, and the maximum relative difference.

use arraytrans::detection::{diff_metric, DetectionGeometry};
use arraytrans::ensemble::{run_sweep, EnsembleSettings, Experiment};
use arraytrans::geometry::{Geometry, LatticeSpec};
use arraytrans::incident_field::{Beam, ParaxialBeam, Polarization};

fn main() -> arraytrans::Result<()> {
    let pol = Polarization::XyDiag;
    let exp = Experiment::new(
        Geometry::Lattice(LatticeSpec::fixed(2, 2, 0.25)),
        Beam::Paraxial(ParaxialBeam::new(10.0, pol)),
        pol.vector(),
        DetectionGeometry::default(),
    )?;
    let detunings: Vec<f64> = (-40..=40).map(|k| 0.1 * k as f64).collect();
    let res = run_sweep(&exp, &EnsembleSettings::default(), &detunings, &[1e-4, 1.0, 100.0])?;

    for intensity in [1e-4, 1.0, 100.0] {
        let recs = res.at_intensity(intensity);
        let qm: Vec<f64> = recs.iter().map(|r| r.qm.unwrap().od_coh).collect();
        let sc: Vec<f64> = recs.iter().map(|r| r.sc.unwrap().od_coh).collect();
        let d = diff_metric(&sc, &qm)?;
        println!("I/Isat = {intensity:e}: diff(OD) = {:.4} at delta = {:.1}", d.value, detunings[d.argmax.unwrap()]);
    }

    println!("\n delta    T_coh QM   T_coh SC   T_inc QM   T_inc SAQ   (I = Isat)");
    for r in res.at_intensity(1.0).iter().step_by(5) {
        let (q, s, saq) = (r.qm.unwrap(), r.sc.unwrap(), r.saq.unwrap());
        println!("{:6.1} {:10.6} {:10.6} {:10.2e} {:10.2e}", r.detuning, q.t_coh, s.t_coh, q.t_inc, saq.t_inc);
    }
    Ok(())
}
