//! Tightly focused circularly polarized beam on a 10x10 lattice: peak
//! semiclassical extinction falls as the array saturates.

use arraytrans::detection::DetectionGeometry;
use arraytrans::ensemble::{run_sweep, EnsembleSettings, Experiment, SolverSet};
use arraytrans::geometry::{Geometry, LatticeSpec};
use arraytrans::incident_field::{Beam, Polarization, VectorBeam, VectorBeamSpec};

fn main() -> arraytrans::Result<()> {
    let pol = Polarization::SigmaPlus;
    let beam = VectorBeam::new(VectorBeamSpec::from_focal_waist(3.0), pol)?;
    let detection = DetectionGeometry { sin_theta_max: 0.37, ..Default::default() };
    let exp = Experiment::new(Geometry::Lattice(LatticeSpec::fixed(10, 10, 0.8)), Beam::Vector(Box::new(beam)), pol.vector(), detection)?;
    let settings = EnsembleSettings { solvers: SolverSet::Sce, ..Default::default() };
    let detunings: Vec<f64> = (-12..=12).map(|k| 0.25 * k as f64).collect();
    let intensities = [0.01, 0.1, 1.0, 10.0, 100.0];
    let res = run_sweep(&exp, &settings, &detunings, &intensities)?;
    for i in intensities {
        let (ext, at) = res
            .at_intensity(i)
            .iter()
            .map(|r| (1.0 - r.sc.unwrap().t_coh, r.detuning))
            .fold((f64::MIN, 0.0), |b, x| if x.0 > b.0 { x } else { b });
        println!("I/Isat = {i:>6}: peak extinction {ext:.4} at delta = {at:+.2}");
    }
    Ok(())
}
