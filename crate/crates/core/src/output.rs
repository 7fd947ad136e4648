//! CSV tables. Every file starts with `# ` lines holding the program version
//! and the fully resolved scenario, so a table can be regenerated from itself.

use std::io::Write;

use crate::coupling::EigenmodeSet;
use crate::detection::{diff_metric, fit_lorentzian, DiffMetric};
use crate::ensemble::{ModelStats, SweepResult};
use crate::error::Result;
use crate::geometry::realization_seed;
use crate::scenario::{scenarios_to_toml, Scenario};

pub const TRANSMISSION_COLUMNS: &[&str] = &[
    "delta_over_gamma",
    "intensity_ratio",
    "T_coh_qm",
    "T_coh_sc",
    "od_coh_qm",
    "od_coh_sc",
    "T_inc_qm",
    "T_inc_sc",
    "T_inc_saq",
    "stderr_T_coh_qm",
    "stderr_T_coh_sc",
    "stderr_od_coh_qm",
    "stderr_od_coh_sc",
    "stderr_T_inc_qm",
    "stderr_T_inc_sc",
    "stderr_T_inc_saq",
    "n_realizations",
    "failed_qm",
    "failed_sc",
    "unstable_sc",
    "seed",
    "case",
];

pub const SUMMARY_COLUMNS: &[&str] = &[
    "case",
    "intensity_ratio",
    "diff_od_coh",
    "diff_od_coh_detuning",
    "diff_od_coh_excluded",
    "diff_T_inc_saq",
    "diff_T_inc_saq_detuning",
    "diff_T_inc_saq_excluded",
    "peak_extinction_qm",
    "peak_extinction_sc",
    "peak_extinction_sc_detuning",
    "lorentzian_hwhm_sc",
    "lorentzian_rms_sc",
];

pub const METRICS_COLUMNS: &[&str] = &[
    "delta_over_gamma",
    "intensity_ratio",
    "c_pm_re",
    "c_pm_im",
    "c_pm_abs",
    "c_ee",
    "concurrence",
    "entanglement",
    "purity",
    "n_realizations",
    "case",
];

pub const MODES_COLUMNS: &[&str] =
    &["realization", "mode", "nu", "upsilon", "overlap_re", "overlap_im", "realization_seed", "case"];

/// `# `-prefixed provenance block.
pub fn provenance(command: &str, scenarios: &[Scenario]) -> String {
    let mut out = format!("# {} {}\n# command: {command}\n", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
    for line in scenarios_to_toml(scenarios).lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Writes the provenance block and the header row.
pub fn begin_table<W: Write>(w: &mut W, command: &str, scenarios: &[Scenario], columns: &[&str]) -> Result<()> {
    w.write_all(provenance(command, scenarios).as_bytes())?;
    writeln!(w, "{}", columns.join(","))?;
    Ok(())
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

pub fn write_transmission_rows<W: Write>(w: &mut W, case: &str, result: &SweepResult) -> Result<()> {
    let mut csv = writer(w);
    for r in &result.records {
        let f = |m: Option<ModelStats>, g: fn(&ModelStats) -> f64| opt(m.as_ref().map(g));
        csv.write_record([
            num(r.detuning),
            num(r.intensity_ratio),
            f(r.qm, |m| m.t_coh),
            f(r.sc, |m| m.t_coh),
            f(r.qm, |m| m.od_coh),
            f(r.sc, |m| m.od_coh),
            f(r.qm, |m| m.t_inc),
            f(r.sc, |m| m.t_inc),
            f(r.saq, |m| m.t_inc),
            f(r.qm, |m| m.stderr_t_coh),
            f(r.sc, |m| m.stderr_t_coh),
            f(r.qm, |m| m.stderr_od_coh),
            f(r.sc, |m| m.stderr_od_coh),
            f(r.qm, |m| m.stderr_t_inc),
            f(r.sc, |m| m.stderr_t_inc),
            f(r.saq, |m| m.stderr_t_inc),
            r.realizations.to_string(),
            r.failed_qm.to_string(),
            r.failed_sc.to_string(),
            r.unstable_sc.to_string(),
            result.master_seed.to_string(),
            case.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Per-intensity model comparison and lineshape summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub intensity_ratio: f64,
    pub diff_od_coh: Option<(DiffMetric, f64)>,
    pub diff_t_inc_saq: Option<(DiffMetric, f64)>,
    pub peak_extinction_qm: Option<f64>,
    /// Peak 1 − T_coh^SC and the detuning where it occurs.
    pub peak_extinction_sc: Option<(f64, f64)>,
    /// Lorentzian fit of OD_coh^SC: HWHM and relative RMS residual.
    pub lorentzian_sc: Option<(f64, f64)>,
}

fn series(recs: &[&crate::ensemble::TransmissionRecord], f: impl Fn(&crate::ensemble::TransmissionRecord) -> Option<f64>) -> Option<Vec<f64>> {
    recs.iter().map(|r| f(r)).collect()
}

pub fn summarize(result: &SweepResult) -> Vec<SummaryRow> {
    let mut intensities: Vec<f64> = Vec::new();
    for r in &result.records {
        if !intensities.contains(&r.intensity_ratio) {
            intensities.push(r.intensity_ratio);
        }
    }
    intensities
        .into_iter()
        .map(|i| {
            let recs = result.at_intensity(i);
            let delta: Vec<f64> = recs.iter().map(|r| r.detuning).collect();
            let diff = |sc: Option<Vec<f64>>, qm: Option<Vec<f64>>| {
                let m = diff_metric(&sc?, &qm?).ok()?;
                Some((m, m.argmax.map_or(f64::NAN, |k| delta[k])))
            };
            let od_qm = series(&recs, |r| r.qm.map(|m| m.od_coh));
            let od_sc = series(&recs, |r| r.sc.map(|m| m.od_coh));
            let inc_qm = series(&recs, |r| r.qm.map(|m| m.t_inc));
            let inc_saq = series(&recs, |r| r.saq.map(|m| m.t_inc));
            let ext = |v: &Option<Vec<f64>>| {
                v.as_ref().map(|v| {
                    v.iter().enumerate().map(|(k, od)| (1.0 - (-od).exp(), delta[k])).fold((f64::MIN, f64::NAN), |b, x| {
                        if x.0 > b.0 {
                            x
                        } else {
                            b
                        }
                    })
                })
            };
            let lorentzian_sc = od_sc
                .as_ref()
                .filter(|v| v.len() >= 4)
                .and_then(|v| fit_lorentzian(&delta, v).ok())
                .map(|f| (f.hwhm, f.relative_rms));
            SummaryRow {
                intensity_ratio: i,
                diff_od_coh: diff(od_sc.clone(), od_qm.clone()),
                diff_t_inc_saq: diff(inc_saq, inc_qm),
                peak_extinction_qm: ext(&od_qm).map(|e| e.0),
                peak_extinction_sc: ext(&od_sc),
                lorentzian_sc,
            }
        })
        .collect()
}

pub fn write_summary_rows<W: Write>(w: &mut W, case: &str, rows: &[SummaryRow]) -> Result<()> {
    let mut csv = writer(w);
    for r in rows {
        let d = |x: &Option<(DiffMetric, f64)>| {
            [opt(x.map(|m| m.0.value)), opt(x.map(|m| m.1)), x.map(|m| m.0.excluded.to_string()).unwrap_or_default()]
        };
        let [a, b, c] = d(&r.diff_od_coh);
        let [e, f, g] = d(&r.diff_t_inc_saq);
        csv.write_record([
            case.to_string(),
            num(r.intensity_ratio),
            a,
            b,
            c,
            e,
            f,
            g,
            opt(r.peak_extinction_qm),
            opt(r.peak_extinction_sc.map(|p| p.0)),
            opt(r.peak_extinction_sc.map(|p| p.1)),
            opt(r.lorentzian_sc.map(|p| p.0)),
            opt(r.lorentzian_sc.map(|p| p.1)),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_metrics_rows<W: Write>(w: &mut W, case: &str, result: &SweepResult) -> Result<()> {
    let mut csv = writer(w);
    for r in &result.records {
        let Some(p) = r.pair else { continue };
        csv.write_record([
            num(r.detuning),
            num(r.intensity_ratio),
            num(p.c_pm.re),
            num(p.c_pm.im),
            num(p.c_pm.norm()),
            num(p.c_ee),
            num(p.concurrence),
            num(p.entanglement),
            num(p.purity),
            p.count.to_string(),
            case.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_mode_rows<W: Write>(w: &mut W, case: &str, master_seed: u64, sets: &[EigenmodeSet]) -> Result<()> {
    let mut csv = writer(w);
    for (i, set) in sets.iter().enumerate() {
        let seed = realization_seed(master_seed, i as u64);
        for (k, m) in set.modes.iter().enumerate() {
            csv.write_record([
                i.to_string(),
                k.to_string(),
                num(m.nu),
                num(m.upsilon),
                num(m.overlap.re),
                num(m.overlap.im),
                seed.to_string(),
                case.to_string(),
            ])?;
        }
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::run_sweep;
    use crate::scenario::preset;

    #[test]
    fn provenance_reparses() {
        let cases = preset("fig2").unwrap();
        let text = provenance("run", &cases);
        assert!(text.lines().all(|l| l.starts_with("# ")));
        let toml: String = text.lines().skip(2).map(|l| format!("{}\n", &l[2..])).collect();
        assert_eq!(crate::scenario::parse_scenarios(&toml).unwrap(), cases);
    }

    #[test]
    fn transmission_table_shape() {
        let mut s = preset("fig2").unwrap().remove(0);
        s.sweep.detuning = crate::scenario::Grid::values(&[-1.0, 0.0, 1.0]);
        s.sweep.intensity = crate::scenario::Grid::values(&[1.0]);
        let r = s.resolve().unwrap();
        let res = run_sweep(&r.experiment, &r.settings, &r.detunings, &r.intensities).unwrap();
        let mut buf = Vec::new();
        begin_table(&mut buf, "run", std::slice::from_ref(&s), TRANSMISSION_COLUMNS).unwrap();
        write_transmission_rows(&mut buf, &s.name, &res).unwrap();
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(buf.as_slice());
        assert_eq!(rdr.headers().unwrap().len(), TRANSMISSION_COLUMNS.len());
        let rows: Vec<_> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 3);
        assert_eq!(&rows[1][0], "0.0");
        assert_eq!(&rows[1][7], "0.0");
        assert_eq!(&rows[1][21], "fixed");
        let summary = summarize(&res);
        assert_eq!(summary.len(), 1);
        assert!(summary[0].diff_od_coh.unwrap().0.value > 0.0);
    }
}
