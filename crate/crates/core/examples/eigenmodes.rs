//! Collective eigenmodes of a 10x10 lattice: line shifts, widths and the
//! modes most strongly driven by a Gaussian beam.

use arraytrans::coupling::eigenmodes;
use arraytrans::detection::DetectionGeometry;
use arraytrans::ensemble::Experiment;
use arraytrans::geometry::{Geometry, LatticeSpec};
use arraytrans::incident_field::{Beam, ParaxialBeam, Polarization};

fn main() -> arraytrans::Result<()> {
    let pol = Polarization::XyDiag;
    let exp = Experiment::new(
        Geometry::Lattice(LatticeSpec::fixed(10, 10, 0.25)),
        Beam::Paraxial(ParaxialBeam::new(3.0, pol)),
        pol.vector(),
        DetectionGeometry::default(),
    )?;
    let real = exp.realize(0)?;
    let set = eigenmodes(&real.coupling, &real.drive_shape)?;
    let sub = set.modes.iter().filter(|m| m.is_subradiant()).count();
    println!("{} modes, {sub} subradiant, width sum {:.10}", set.modes.len(), set.width_sum());
    println!("narrowest: nu {:+.4}, upsilon {:.2e}", set.modes[0].nu, set.modes[0].upsilon);
    println!("broadest:  nu {:+.4}, upsilon {:.3}", set.modes[99].nu, set.modes[99].upsilon);

    let mut driven: Vec<_> = set.modes.iter().collect();
    driven.sort_by(|a, b| b.overlap.norm().total_cmp(&a.overlap.norm()));
    println!("most strongly driven:");
    for m in driven.iter().take(5) {
        println!("  nu {:+.4}  upsilon {:.4}  |overlap| {:.4}", m.nu, m.upsilon, m.overlap.norm());
    }
    Ok(())
}
