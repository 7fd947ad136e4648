//! Position fluctuations: averages over stochastic realizations of a 2x2
//! lattice with Gaussian site spread and of a disk trap, with standard errors.

use arraytrans::detection::DetectionGeometry;
use arraytrans::ensemble::{run_sweep, EnsembleSettings, Experiment};
use arraytrans::geometry::{DiskSpec, Geometry, LatticeSpec};
use arraytrans::incident_field::{Beam, ParaxialBeam, Polarization};

fn main() -> arraytrans::Result<()> {
    let pol = Polarization::XyDiag;
    let mut lattice = LatticeSpec::fixed(2, 2, 0.25);
    lattice.sigma = [0.05, 0.05, 0.025];
    let cases = [
        ("lattice, sigma = 0.2a", Geometry::Lattice(lattice)),
        ("disk, N = 4", Geometry::Disk(DiskSpec { n_atoms: 4, radius: 0.28, sigma_z: 0.025 })),
    ];
    let settings = EnsembleSettings { realizations: 128, master_seed: 42, ..Default::default() };
    for (name, geometry) in cases {
        let exp = Experiment::new(geometry, Beam::Paraxial(ParaxialBeam::new(10.0, pol)), pol.vector(), DetectionGeometry::default())?;
        let res = run_sweep(&exp, &settings, &[-1.0, 0.0, 1.0], &[1.0])?;
        println!("{name}, {} realizations", res.realizations);
        for r in &res.records {
            let (q, s) = (r.qm.unwrap(), r.sc.unwrap());
            println!(
                "  delta {:4.1}: OD QM {:.5} +- {:.5}, OD SC {:.5} +- {:.5}, T_inc SC {:.2e}",
                r.detuning, q.od_coh, q.stderr_od_coh, s.od_coh, s.stderr_od_coh, s.t_inc
            );
        }
    }
    Ok(())
}
