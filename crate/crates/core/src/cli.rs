//! Command-line front end: `run` computes transmission tables, `modes` lists
//! collective eigenmodes.
//!
//! Exit codes: 0 success, 1 invalid input or I/O error, 2 solver failures
//! beyond the failure budget.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::ensemble::{realization_modes, run_sweep, SolverSet};
use crate::error::{Error, Result};
use crate::output::{
    begin_table, summarize, write_metrics_rows, write_mode_rows, write_summary_rows, write_transmission_rows,
    METRICS_COLUMNS, MODES_COLUMNS, SUMMARY_COLUMNS, TRANSMISSION_COLUMNS,
};
use crate::scenario::{load_scenarios, preset, Scenario, PRESETS};

#[derive(Debug, Parser)]
#[command(name = "arraytrans", version, about = "Light transmission through small atomic arrays")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transmission sweep over detuning and intensity.
    Run(RunArgs),
    /// Collective eigenmodes of each realization.
    Modes(ModesArgs),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Scenario TOML file.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Built-in scenario.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    pub preset: Option<String>,
}

#[derive(Debug, Args)]
pub struct Common {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Ignored for fixed positions, which always use one realization.
    #[arg(long)]
    pub realizations: Option<usize>,
    #[arg(long, env = "ARRAYTRANS_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub solver: Option<SolverArg>,
    /// Pair correlations, concurrence, entanglement and purity.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Model differences and peak extinction per intensity; defaults to
    /// OUTPUT with a `.summary.csv` suffix.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModesArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum SolverArg {
    Qme,
    Sce,
    Both,
}

impl From<SolverArg> for SolverSet {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Qme => SolverSet::Qme,
            SolverArg::Sce => SolverSet::Sce,
            SolverArg::Both => SolverSet::Both,
        }
    }
}

fn load(common: &Common, solver: Option<SolverArg>) -> Result<Vec<Scenario>> {
    let mut cases = match (&common.source.scenario, &common.source.preset) {
        (Some(path), _) => load_scenarios(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => return Err(Error::Scenario("give --scenario or --preset".into())),
    };
    for c in &mut cases {
        if let Some(seed) = common.seed {
            c.ensemble.seed = seed;
        }
        if let Some(n) = common.realizations {
            c.ensemble.realizations = Some(n);
        }
        if let Some(s) = solver {
            c.ensemble.solver = s.into();
        }
        c.validate().map_err(|e| Error::Scenario(format!("case `{}`: {e}", c.name)))?;
    }
    Ok(cases)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn summary_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    output.with_file_name(format!("{stem}.summary.csv"))
}

pub fn run(args: &RunArgs) -> Result<()> {
    let cases = load(&args.common, args.solver)?;
    let resolved = cases.iter().map(|c| c.resolve()).collect::<Result<Vec<_>>>()?;
    let mut out = create(&args.common.output)?;
    let summary_file = args.summary.clone().unwrap_or_else(|| summary_path(&args.common.output));
    let mut summary = create(&summary_file)?;
    let mut metrics = args.metrics.as_deref().map(create).transpose()?;
    begin_table(&mut out, "run", &cases, TRANSMISSION_COLUMNS)?;
    begin_table(&mut summary, "run", &cases, SUMMARY_COLUMNS)?;
    if let Some(m) = metrics.as_mut() {
        begin_table(m, "run", &cases, METRICS_COLUMNS)?;
    }
    for (case, r) in cases.iter().zip(resolved) {
        let mut settings = r.settings;
        settings.threads = args.common.threads;
        eprintln!(
            "case {}: {} atoms, {} realizations, {} points, solver {}",
            case.name,
            r.experiment.n_atoms(),
            settings.realizations,
            r.detunings.len() * r.intensities.len(),
            settings.solvers.name(),
        );
        let start = Instant::now();
        let result = run_sweep(&r.experiment, &settings, &r.detunings, &r.intensities)?;
        if result.qme_skipped {
            eprintln!(
                "case {}: master equation skipped ({} atoms > qme_max_atoms = {})",
                case.name,
                r.experiment.n_atoms(),
                settings.qme_max_atoms
            );
        }
        let failed: usize = result.records.iter().map(|x| x.failed_qm + x.failed_sc).sum();
        eprintln!("case {}: done in {:.1?}, {failed} failed solves", case.name, start.elapsed());
        if let Some(msg) = &result.first_failure {
            eprintln!("case {}: first failure: {msg}", case.name);
        }
        write_transmission_rows(&mut out, &case.name, &result)?;
        write_summary_rows(&mut summary, &case.name, &summarize(&result))?;
        if let Some(m) = metrics.as_mut() {
            write_metrics_rows(m, &case.name, &result)?;
        }
    }
    out.flush()?;
    summary.flush()?;
    if let Some(mut m) = metrics {
        m.flush()?;
    }
    Ok(())
}

pub fn modes(args: &ModesArgs) -> Result<()> {
    let cases = load(&args.common, None)?;
    let mut out = create(&args.common.output)?;
    begin_table(&mut out, "modes", &cases, MODES_COLUMNS)?;
    for case in &cases {
        let r = case.resolve()?;
        let mut settings = r.settings;
        settings.threads = args.common.threads;
        let sets = realization_modes(&r.experiment, &settings)?;
        write_mode_rows(&mut out, &case.name, settings.master_seed, &sets)?;
    }
    out.flush()?;
    Ok(())
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::FailureBudget { .. } => 2,
        _ => 1,
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Modes(a) => modes(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
