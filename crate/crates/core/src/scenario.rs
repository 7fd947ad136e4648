//! TOML scenario files and built-in presets for the standard figures.
//!
//! A file holds either one scenario or several under `[[case]]`. Unknown keys
//! are rejected and every value is validated before any computation starts.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detection::DetectionGeometry;
use crate::ensemble::{EnsembleSettings, Experiment, SolverSet, DEFAULT_REALIZATIONS};
use crate::error::{invalid, Error, Result};
use crate::geometry::{DiskSpec, Geometry, LatticeSpec};
use crate::incident_field::{Beam, ParaxialBeam, Polarization, VectorBeam, VectorBeamSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BeamConfig {
    Paraxial {
        waist: f64,
        polarization: Polarization,
    },
    /// Nonparaxial beam from a lens focusing a collimated Gaussian.
    Vector {
        waist: f64,
        polarization: Polarization,
        #[serde(default = "default_n_rho")]
        n_rho: usize,
        #[serde(default = "default_n_kt")]
        n_kt: usize,
    },
}

fn default_n_rho() -> usize {
    VectorBeamSpec::DEFAULT_N_RHO
}

fn default_n_kt() -> usize {
    VectorBeamSpec::DEFAULT_N_KT
}

impl BeamConfig {
    pub fn polarization(&self) -> Polarization {
        match self {
            Self::Paraxial { polarization, .. } | Self::Vector { polarization, .. } => *polarization,
        }
    }

    pub fn build(&self) -> Result<Beam> {
        match *self {
            Self::Paraxial { waist, polarization } => {
                if !(waist > 0.0) || !waist.is_finite() {
                    return Err(invalid("beam.waist", "must be a positive length"));
                }
                Ok(Beam::Paraxial(ParaxialBeam::new(waist, polarization)))
            }
            Self::Vector { waist, polarization, n_rho, n_kt } => {
                if !(waist > 0.0) || !waist.is_finite() {
                    return Err(invalid("beam.waist", "must be a positive length"));
                }
                let spec = VectorBeamSpec::from_focal_waist(waist).with_resolution(n_rho, n_kt);
                Ok(Beam::Vector(Box::new(VectorBeam::new(spec, polarization)?)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridScale {
    #[default]
    Linear,
    Log,
}

/// Either explicit `values` or `points` samples from `start` to `stop`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default)]
    pub scale: GridScale,
}

impl Grid {
    pub fn values(values: &[f64]) -> Self {
        Self { values: Some(values.to_vec()), ..Default::default() }
    }

    pub fn linear(start: f64, stop: f64, points: usize) -> Self {
        Self { start: Some(start), stop: Some(stop), points: Some(points), scale: GridScale::Linear, values: None }
    }

    pub fn log(start: f64, stop: f64, points: usize) -> Self {
        Self { scale: GridScale::Log, ..Self::linear(start, stop, points) }
    }

    pub fn resolve(&self, field: &str) -> Result<Vec<f64>> {
        let out = match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) => {
                if n == 0 {
                    return Err(invalid(format!("{field}.points"), "must be positive"));
                }
                let t = |k: usize| if n == 1 { 0.0 } else { k as f64 / (n - 1) as f64 };
                match self.scale {
                    GridScale::Linear => (0..n).map(|k| a + (b - a) * t(k)).collect(),
                    GridScale::Log => {
                        if !(a > 0.0 && b > 0.0) {
                            return Err(invalid(format!("{field}.start/stop"), "log grids need positive bounds"));
                        }
                        (0..n).map(|k| (a.ln() + (b.ln() - a.ln()) * t(k)).exp()).collect()
                    }
                }
            }
            _ => return Err(invalid(field, "give either `values` or all of `start`, `stop`, `points`")),
        };
        if out.is_empty() {
            return Err(invalid(field, "grid is empty"));
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(invalid(field, "grid values must be finite"));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Δ/γ.
    pub detuning: Grid,
    /// I/I_sat.
    pub intensity: Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    /// Omitted: one for fixed positions, otherwise the default count.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realizations: Option<usize>,
    pub seed: u64,
    pub solver: SolverSet,
    pub qme_max_atoms: usize,
    pub failure_budget: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        let d = EnsembleSettings::default();
        Self {
            realizations: None,
            seed: d.master_seed,
            solver: d.solvers,
            qme_max_atoms: d.qme_max_atoms,
            failure_budget: d.failure_budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Atom pair for correlators, concurrence, entanglement and purity.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    /// Atomic dipole orientation; defaults to the beam polarization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dipole: Option<Polarization>,
    pub geometry: Geometry,
    pub beam: BeamConfig,
    #[serde(default)]
    pub detection: DetectionGeometry,
    pub sweep: SweepConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

fn default_name() -> String {
    "case".into()
}

/// Inputs for one run, resolved from a scenario.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub experiment: Experiment,
    pub settings: EnsembleSettings,
    pub detunings: Vec<f64>,
    pub intensities: Vec<f64>,
}

impl Scenario {
    pub fn dipole(&self) -> Polarization {
        self.dipole.unwrap_or_else(|| self.beam.polarization())
    }

    /// Checks everything that does not require building the beam.
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.detection.validate()?;
        self.sweep.detuning.resolve("sweep.detuning")?;
        let intensities = self.sweep.intensity.resolve("sweep.intensity")?;
        if intensities.iter().any(|&i| i < 0.0) {
            return Err(invalid("sweep.intensity", "intensities must be >= 0"));
        }
        if self.ensemble.realizations == Some(0) {
            return Err(invalid("ensemble.realizations", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.ensemble.failure_budget) {
            return Err(invalid("ensemble.failure_budget", "must lie in [0, 1)"));
        }
        if let Some([j, l]) = self.metrics.pair {
            if j == l || j >= self.geometry.n_atoms() || l >= self.geometry.n_atoms() {
                return Err(Error::InvalidPair(j, l));
            }
            if !self.ensemble.solver.qme() {
                return Err(invalid("metrics.pair", "pair metrics need the qme solver"));
            }
        }
        let n = self.geometry.n_atoms();
        if self.ensemble.solver == SolverSet::Qme && n > self.ensemble.qme_max_atoms {
            return Err(invalid(
                "ensemble.solver",
                format!("{n} atoms exceed qme_max_atoms = {}", self.ensemble.qme_max_atoms),
            ));
        }
        if self.ensemble.qme_max_atoms > crate::qme::MAX_ATOMS {
            return Err(invalid("ensemble.qme_max_atoms", format!("at most {}", crate::qme::MAX_ATOMS)));
        }
        Ok(())
    }

    pub fn realizations(&self) -> usize {
        match (self.geometry.is_deterministic(), self.ensemble.realizations) {
            (true, _) => 1,
            (false, Some(n)) => n,
            (false, None) => DEFAULT_REALIZATIONS,
        }
    }

    pub fn resolve(&self) -> Result<ResolvedScenario> {
        self.validate()?;
        let beam = self.beam.build()?;
        let experiment = Experiment::new(self.geometry.clone(), beam, self.dipole().vector(), self.detection)?;
        let settings = EnsembleSettings {
            realizations: self.realizations(),
            master_seed: self.ensemble.seed,
            solvers: self.ensemble.solver,
            qme_max_atoms: self.ensemble.qme_max_atoms,
            failure_budget: self.ensemble.failure_budget,
            pair: self.metrics.pair.map(|[j, l]| (j, l)),
            ..Default::default()
        };
        Ok(ResolvedScenario {
            experiment,
            settings,
            detunings: self.sweep.detuning.resolve("sweep.detuning")?,
            intensities: self.sweep.intensity.resolve("sweep.intensity")?,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}

fn scenario_error(case: Option<usize>, e: impl std::fmt::Display) -> Error {
    let msg = e.to_string();
    let msg = msg.trim();
    Error::Scenario(match case {
        Some(k) => format!("case {k}: {msg}"),
        None => msg.to_string(),
    })
}

/// Parses and validates scenario text.
pub fn parse_scenarios(text: &str) -> Result<Vec<Scenario>> {
    let table: toml::Table = text.parse().map_err(|e| scenario_error(None, e))?;
    let scenarios: Vec<Scenario> = match table.get("case") {
        Some(toml::Value::Array(cases)) => {
            if table.len() > 1 {
                let extra: Vec<_> = table.keys().filter(|k| *k != "case").cloned().collect();
                return Err(Error::Scenario(format!("keys {extra:?} are not allowed next to [[case]]")));
            }
            if cases.is_empty() {
                return Err(Error::Scenario("no cases given".into()));
            }
            cases
                .iter()
                .enumerate()
                .map(|(k, c)| c.clone().try_into().map_err(|e| scenario_error(Some(k), e)))
                .collect::<Result<_>>()?
        }
        Some(_) => return Err(Error::Scenario("`case` must be an array of tables ([[case]])".into())),
        None => vec![toml::Value::Table(table).try_into().map_err(|e| scenario_error(None, e))?],
    };
    for (k, s) in scenarios.iter().enumerate() {
        s.validate().map_err(|e| if scenarios.len() > 1 { scenario_error(Some(k), e) } else { e })?;
    }
    Ok(scenarios)
}

pub fn load_scenarios(path: &Path) -> Result<Vec<Scenario>> {
    parse_scenarios(&std::fs::read_to_string(path)?)
}

/// Serializes scenarios in the `[[case]]` layout accepted by [`parse_scenarios`].
pub fn scenarios_to_toml(scenarios: &[Scenario]) -> String {
    #[derive(Serialize)]
    struct File<'a> {
        case: &'a [Scenario],
    }
    toml::to_string(&File { case: scenarios }).expect("scenarios serialize")
}

pub const PRESETS: &[&str] =
    &["fig2", "fig3a", "fig3b", "fig3c", "fig4", "fig5", "fig6a", "fig6b", "fig6c", "figS1", "figS2"];

const SMALL_SPACING: f64 = 0.25;
const SIGMA_Z: f64 = 0.025;

fn paraxial(polarization: Polarization) -> BeamConfig {
    BeamConfig::Paraxial { waist: 10.0, polarization }
}

fn lattice(n: usize, spacing: f64, sigma_xy: f64) -> Geometry {
    let mut l = LatticeSpec::fixed(n, n, spacing);
    if sigma_xy > 0.0 {
        l.sigma = [sigma_xy, sigma_xy, SIGMA_Z];
    }
    Geometry::Lattice(l)
}

fn disk(n_atoms: usize, radius: f64) -> Geometry {
    Geometry::Disk(DiskSpec { n_atoms, radius, sigma_z: SIGMA_Z })
}

fn case(name: &str, geometry: Geometry, beam: BeamConfig, sweep: SweepConfig, solver: SolverSet) -> Scenario {
    Scenario {
        name: name.into(),
        dipole: None,
        geometry,
        beam,
        detection: DetectionGeometry::default(),
        sweep,
        ensemble: EnsembleConfig { solver, ..Default::default() },
        metrics: MetricsConfig::default(),
    }
}

/// Fixed, σ/a = 0.1 and 0.2 arrays plus a disk of matching peak density.
fn fluctuation_rows(n: usize, disk_radius: f64) -> Vec<(String, Geometry)> {
    let a = SMALL_SPACING;
    vec![
        ("fixed".into(), lattice(n, a, 0.0)),
        ("sigma0.1a".into(), lattice(n, a, 0.1 * a)),
        ("sigma0.2a".into(), lattice(n, a, 0.2 * a)),
        ("disk".into(), disk(n * n, disk_radius)),
    ]
}

fn sqrt_intensities(s: &[f64]) -> Grid {
    Grid::values(&s.iter().map(|x| x * x).collect::<Vec<_>>())
}

pub fn preset(name: &str) -> Result<Vec<Scenario>> {
    let xy = Polarization::XyDiag;
    let narrow = Grid::linear(-4.0, 4.0, 81);
    let fig3_intensities = sqrt_intensities(&[0.25, 0.5, 1.0, 2.0, 4.0, 8.0]);
    let rows = |n, r, sweep: SweepConfig, solver| -> Vec<Scenario> {
        fluctuation_rows(n, r).into_iter().map(|(k, g)| case(&k, g, paraxial(xy), sweep.clone(), solver)).collect()
    };
    let out = match name {
        "fig2" => rows(
            2,
            0.28,
            SweepConfig { detuning: narrow, intensity: Grid::values(&[1e-4, 4.0, 100.0]) },
            SolverSet::Both,
        ),
        "fig3a" | "fig3b" => {
            rows(2, 0.28, SweepConfig { detuning: narrow, intensity: fig3_intensities }, SolverSet::Both)
        }
        "fig3c" => [0.25, 0.3, 0.35, 0.4, 0.5, 0.6]
            .iter()
            .map(|&a| {
                let sweep = SweepConfig { detuning: Grid::linear(-20.0, 20.0, 401), intensity: fig3_intensities.clone() };
                case(&format!("a{a}"), lattice(2, a, 0.0), paraxial(xy), sweep, SolverSet::Both)
            })
            .collect(),
        "fig4" => {
            let mut lineshape = case(
                "lineshape",
                lattice(2, SMALL_SPACING, 0.0),
                paraxial(xy),
                SweepConfig { detuning: Grid::linear(-8.0, 8.0, 161), intensity: sqrt_intensities(&[1.0, 2.0, 5.0]) },
                SolverSet::Both,
            );
            lineshape.metrics.pair = Some([0, 1]);
            let mut scan = lineshape.clone();
            scan.name = "intensity".into();
            scan.sweep = SweepConfig { detuning: Grid::values(&[0.0]), intensity: Grid::log(1e-4, 1e4, 41) };
            vec![lineshape, scan]
        }
        "fig5" => {
            let y = Polarization::Y;
            let pair = |a: f64| Geometry::Lattice(LatticeSpec::fixed(1, 2, a));
            let mut out = Vec::new();
            let mut lineshape = case(
                "a0.25-detuning",
                pair(SMALL_SPACING),
                paraxial(y),
                SweepConfig {
                    detuning: Grid::linear(-4.0, 4.0, 161),
                    intensity: sqrt_intensities(&[0.25, 0.5, 1.0, 1.5, 2.0, 4.0]),
                },
                SolverSet::Qme,
            );
            lineshape.metrics.pair = Some([0, 1]);
            out.push(lineshape.clone());
            for a in [0.25, 0.3, 0.35] {
                let mut s = lineshape.clone();
                s.name = format!("a{a}-intensity");
                s.geometry = pair(a);
                s.sweep = SweepConfig { detuning: Grid::values(&[0.0]), intensity: Grid::log(1e-4, 1e4, 41) };
                out.push(s);
            }
            out
        }
        "fig6a" | "fig6b" => {
            let i = if name == "fig6a" { 4.0 } else { 100.0 };
            let sweep = SweepConfig { detuning: Grid::linear(-10.0, 10.0, 81), intensity: Grid::values(&[i]) };
            let mut out = rows(10, 1.4, sweep, SolverSet::Sce);
            out.truncate(3);
            out.push(case("disk", disk(100, 1.4), paraxial(xy), out[0].sweep.clone(), SolverSet::Sce));
            out
        }
        "fig6c" => {
            let sp = Polarization::SigmaPlus;
            [(0.8, 3.0), (1.1, 3.0), (0.4, 1.5)]
                .iter()
                .map(|&(a, w0)| {
                    let mut s = case(
                        &format!("a{a}-w{w0}"),
                        lattice(10, a, 0.0),
                        BeamConfig::Vector { waist: w0, polarization: sp, n_rho: default_n_rho(), n_kt: default_n_kt() },
                        SweepConfig { detuning: Grid::linear(-3.0, 3.0, 25), intensity: Grid::log(1e-2, 1e2, 9) },
                        SolverSet::Sce,
                    );
                    s.detection.sin_theta_max = 0.37;
                    s
                })
                .collect()
        }
        "figS1" => {
            let sweep = SweepConfig { detuning: narrow, intensity: Grid::values(&[1.0]) };
            let mut out = rows(2, 0.28, sweep, SolverSet::Both);
            out.remove(1);
            out
        }
        "figS2" => {
            let sweep = SweepConfig { detuning: narrow.clone(), intensity: Grid::values(&[1e-4, 4.0, 100.0]) };
            let single = Geometry::Lattice(LatticeSpec::fixed(1, 1, 1.0));
            vec![
                case("array2x2", lattice(2, SMALL_SPACING, 0.0), paraxial(xy), sweep.clone(), SolverSet::Both),
                case("array10x10", lattice(10, SMALL_SPACING, 0.0), paraxial(xy), sweep.clone(), SolverSet::Sce),
                case("single", single, paraxial(xy), sweep, SolverSet::Both),
            ]
        }
        _ => {
            return Err(invalid("preset", format!("unknown preset `{name}`; available: {}", PRESETS.join(", "))));
        }
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        name = "pair"
        [geometry]
        kind = "lattice"
        nx = 2
        ny = 1
        spacing = 0.3
        [beam]
        kind = "paraxial"
        waist = 3.0
        polarization = "y"
        [sweep]
        detuning = { start = -1.0, stop = 1.0, points = 3 }
        intensity = { values = [1.0] }
    "#;

    #[test]
    fn parses_minimal_file() {
        let s = parse_scenarios(MINIMAL).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].dipole(), Polarization::Y);
        assert_eq!(s[0].sweep.detuning.resolve("d").unwrap(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(s[0].realizations(), 1);
        assert_eq!(s[0].detection, DetectionGeometry::default());
    }

    #[test]
    fn round_trips_through_toml() {
        for name in PRESETS {
            let cases = preset(name).unwrap();
            assert_eq!(parse_scenarios(&scenarios_to_toml(&cases)).unwrap(), cases, "{name}");
        }
        let one = parse_scenarios(MINIMAL).unwrap();
        assert_eq!(parse_scenarios(&one[0].to_toml()).unwrap(), one);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = MINIMAL.replace("spacing = 0.3", "spacing = 0.3\nspaceing = 1");
        let err = parse_scenarios(&bad).unwrap_err().to_string();
        assert!(err.contains("spaceing"), "{err}");
        let bad = MINIMAL.replace("waist = 3.0", "waist = 3.0\ncolor = 1");
        assert!(parse_scenarios(&bad).is_err());
    }

    #[test]
    fn missing_section_is_named() {
        let start = MINIMAL.find("[geometry]").unwrap();
        let end = MINIMAL.find("[beam]").unwrap();
        let bad = format!("{}{}", &MINIMAL[..start], &MINIMAL[end..]);
        let err = parse_scenarios(&bad).unwrap_err().to_string();
        assert!(err.contains("geometry"), "{err}");
    }

    #[test]
    fn rejects_invalid_values() {
        let neg = MINIMAL.replace("spacing = 0.3", "spacing = 0.3\nsigma = [-0.1, 0.0, 0.0]");
        assert!(parse_scenarios(&neg).unwrap_err().to_string().contains("sigma_x"));
        let big = MINIMAL.replace("nx = 2", "nx = 20").replace("[sweep]", "[ensemble]\nsolver = \"qme\"\n[sweep]");
        assert!(parse_scenarios(&big).unwrap_err().to_string().contains("qme_max_atoms"));
        let grid = MINIMAL.replace("values = [1.0]", "values = [1.0], start = 0.0");
        assert!(parse_scenarios(&grid).unwrap_err().to_string().contains("sweep.intensity"));
        assert!(parse_scenarios("geometry = [").is_err());
    }

    #[test]
    fn multiple_cases() {
        let text = format!("[[case]]\n{}\n", MINIMAL.replace("[geometry]", "[case.geometry]").replace("[beam]", "[case.beam]").replace("[sweep]", "[case.sweep]"));
        let s = parse_scenarios(&text).unwrap();
        assert_eq!(s[0].name, "pair");
    }

    #[test]
    fn fig2_preset_parameters() {
        let cases = preset("fig2").unwrap();
        assert_eq!(cases.len(), 4);
        match &cases[0].geometry {
            Geometry::Lattice(l) => {
                assert_eq!((l.nx, l.ny, l.spacing), (2, 2, 0.25));
                assert!(l.is_deterministic());
            }
            g => panic!("unexpected {g:?}"),
        }
        assert_eq!(cases[0].beam, BeamConfig::Paraxial { waist: 10.0, polarization: Polarization::XyDiag });
        assert_eq!(cases[2].realizations(), DEFAULT_REALIZATIONS);
    }

    #[test]
    fn fig5_pair_is_y_separated_and_polarized() {
        let s = &preset("fig5").unwrap()[0];
        assert_eq!(s.dipole(), Polarization::Y);
        let sites = match &s.geometry {
            Geometry::Lattice(l) => l.sites(),
            g => panic!("unexpected {g:?}"),
        };
        let d = sites[1] - sites[0];
        assert!(d.x.abs() < 1e-15 && (d.y - 0.25).abs() < 1e-15);
    }

    #[test]
    fn fig6c_uses_wide_collection() {
        for s in preset("fig6c").unwrap() {
            assert_eq!(s.detection.sin_theta_max, 0.37);
            assert_eq!(s.dipole(), Polarization::SigmaPlus);
        }
        assert!(preset("fig7").is_err());
    }
}
