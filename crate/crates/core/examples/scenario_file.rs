//! Scenario files: parse a TOML description, resolve it and write the
//! transmission table to stdout.

use arraytrans::ensemble::run_sweep;
use arraytrans::output::{begin_table, write_transmission_rows, TRANSMISSION_COLUMNS};
use arraytrans::scenario::parse_scenarios;

const SCENARIO: &str = r#"
name = "pair"

[geometry]
kind = "lattice"
nx = 1
ny = 2
spacing = 0.3

[beam]
kind = "paraxial"
waist = 5.0
polarization = "y"

[sweep]
detuning = { start = -2.0, stop = 2.0, points = 5 }
intensity = { values = [0.1, 10.0] }
"#;

fn main() -> arraytrans::Result<()> {
    let cases = parse_scenarios(SCENARIO)?;
    let mut out = std::io::stdout().lock();
    begin_table(&mut out, "example", &cases, TRANSMISSION_COLUMNS)?;
    for case in &cases {
        let r = case.resolve()?;
        let res = run_sweep(&r.experiment, &r.settings, &r.detunings, &r.intensities)?;
        write_transmission_rows(&mut out, &case.name, &res)?;
    }
    Ok(())
}
