//! Two atoms a quarter wavelength apart: pair entanglement and purity on
//! resonance as the drive intensity grows.

use arraytrans::detection::DetectionGeometry;
use arraytrans::ensemble::{run_sweep, EnsembleSettings, Experiment, SolverSet};
use arraytrans::geometry::{Geometry, LatticeSpec};
use arraytrans::incident_field::{Beam, ParaxialBeam, Polarization};

fn main() -> arraytrans::Result<()> {
    let pol = Polarization::Y;
    let exp = Experiment::new(
        Geometry::Lattice(LatticeSpec::fixed(1, 2, 0.25)),
        Beam::Paraxial(ParaxialBeam::new(10.0, pol)),
        pol.vector(),
        DetectionGeometry::default(),
    )?;
    let settings = EnsembleSettings { solvers: SolverSet::Qme, pair: Some((0, 1)), ..Default::default() };
    let intensities: Vec<f64> = (0..=16).map(|k| 10f64.powf(-4.0 + 0.5 * k as f64)).collect();
    let res = run_sweep(&exp, &settings, &[0.0], &intensities)?;
    println!("   I/Isat   concurrence  entanglement  purity    |C+-|");
    for r in &res.records {
        let p = r.pair.unwrap();
        println!(
            "{:9.1e} {:12.5} {:13.5} {:8.4} {:9.2e}",
            r.intensity_ratio,
            p.concurrence,
            p.entanglement,
            p.purity,
            p.c_pm.norm()
        );
    }
    Ok(())
}
