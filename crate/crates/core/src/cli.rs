//! Command-line front end: `generate`, `estimate` and `mc`.
//!
//! Exit codes: 0 success, 2 usage or parse error, 3 infeasible margins or
//! randomization scheme, 4 every requested estimate failed. Progress and
//! diagnostics go to stderr; results go to `--out` or stdout.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::causal::{generate_world, observe, CausalError};
use crate::config::{ConfigError, ConfigFile};
use crate::estimators::{Contrast, EffectKind, EmptyPolicy, Estimator};
use crate::io::{self, EstimateReport, IoError, ReportEntry, Scale};
use crate::margins::{calibrate, synthesize, MarginError, PanelTargets};
use crate::mc::{run_mc_regenerating, run_mc_with, McError, McOptions};
use crate::randomization::{
    assign_labeled, balanced_strata, RandomizationError, RandomizationScheme, SchemeKind,
};

#[derive(Debug, Parser)]
#[command(
    name = "crt-effects",
    version,
    about = "Overall, indirect and total effects in cluster-randomized trials"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset.
    Generate {
        #[command(subcommand)]
        source: GenerateSource,
    },
    /// Estimate effects from a dataset file.
    Estimate(EstimateArgs),
    /// Monte Carlo bias and coverage study on a simulated world.
    Mc(McArgs),
}

#[derive(Debug, Subcommand)]
pub enum GenerateSource {
    /// Individual-level data matching the [margins] section.
    Margins {
        #[command(flatten)]
        common: GenerateArgs,
        /// Search [calibration] seeds and concentrations first and use the best.
        #[arg(long)]
        calibrate: bool,
    },
    /// One observed trial from the [causal] world, plus its counterfactuals.
    Causal {
        #[command(flatten)]
        common: GenerateArgs,
        /// Counterfactual table path (default: OUT with `.counterfactual.csv`).
        #[arg(long)]
        counterfactuals: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ContrastArg {
    Rd,
    Rr,
}

impl From<ContrastArg> for Contrast {
    fn from(c: ContrastArg) -> Self {
        match c {
            ContrastArg::Rd => Contrast::RiskDifference,
            ContrastArg::Rr => Contrast::RiskRatio,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Error,
    Drop,
}

impl From<PolicyArg> for EmptyPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Error => EmptyPolicy::Error,
            PolicyArg::Drop => EmptyPolicy::Drop,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    Per1000,
    Raw,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Per1000 => Scale::Per1000,
            ScaleArg::Raw => Scale::Raw,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    /// Half the clusters (rounded down) treated.
    Complete,
    /// Half of every stratum (rounded down) treated.
    Stratified,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    pub dataset: PathBuf,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "overall,indirect,total,naive-direct,control-contrast",
        value_parser = parse_effect
    )]
    pub effects: Vec<EffectKind>,
    #[arg(long, value_enum, default_value = "rd")]
    pub contrast: ContrastArg,
    #[arg(long, value_enum, default_value = "error")]
    pub empty_policy: PolicyArg,
    #[arg(long, value_enum, default_value = "per1000")]
    pub scale: ScaleArg,
    /// JSON report path; a text table goes to stdout either way.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_effect(s: &str) -> Result<EffectKind, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides [randomization] in the config.
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Overrides [mc] replicates.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Overrides [mc] seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub empty_policy: Option<PolicyArg>,
    /// JSON report path (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write one CSV row per effect here.
    #[arg(long)]
    pub rows: Option<PathBuf>,
    /// Draw a new world for every replicate.
    #[arg(long)]
    pub regenerate: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("config {0} is empty")]
    EmptyConfig(String),
    #[error("{0}")]
    Input(IoError),
    #[error("cannot write {path}: {source}")]
    Output { path: String, source: IoError },
    #[error(transparent)]
    Margins(#[from] MarginError),
    #[error(transparent)]
    Randomization(#[from] RandomizationError),
    #[error(transparent)]
    Causal(#[from] CausalError),
    #[error(transparent)]
    Mc(#[from] McError),
    #[error("every requested effect failed")]
    AllEffectsFailed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Margins(MarginError::InfeasibleMargins { .. })
            | CliError::Randomization(_)
            | CliError::Mc(McError::Randomization(_)) => 3,
            CliError::AllEffectsFailed => 4,
            CliError::Output { .. } => 1,
            _ => 2,
        }
    }
}

fn load_config(path: &Path) -> Result<ConfigFile, CliError> {
    let cfg = ConfigFile::load(path)?;
    if cfg.is_empty() {
        return Err(CliError::EmptyConfig(path.display().to_string()));
    }
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Output { path: path.display().to_string(), source: e.into() })
}

fn output_error(path: &Path) -> impl FnOnce(IoError) -> CliError + '_ {
    move |source| CliError::Output { path: path.display().to_string(), source }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_all(bytes).and_then(|_| w.flush()).map_err(|e| output_error(path)(e.into()))
}

fn generate_margins(args: &GenerateArgs, run_calibration: bool) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    let section = cfg.margins()?;
    let mut spec = section.spec.clone();
    let mut seed = args.seed.unwrap_or(section.seed);
    if run_calibration {
        let cal = cfg.calibration()?;
        let targets = PanelTargets::from_per_1000(&cal.targets);
        eprintln!(
            "calibrating over {} seeds x {} concentrations",
            cal.seeds,
            cal.candidate_concentrations().len()
        );
        let best = calibrate(&spec, &targets, 0..cal.seeds, &cal.candidate_concentrations())?;
        eprintln!(
            "best: seed = {}, concentration = {}, loss = {:.4}",
            best.seed,
            best.concentration.map_or("none (multinomial)".to_string(), |c| c.to_string()),
            best.loss
        );
        seed = best.seed;
        spec.allocation.concentration = best.concentration;
    }
    let dataset = synthesize(&spec, seed)?;
    let bytes = io::dataset_to_bytes(&dataset);
    write_bytes(&args.out, &bytes)?;
    eprintln!(
        "wrote {} clusters, {} people to {} (sha256 {})",
        dataset.n(),
        dataset.n_individuals(),
        args.out.display(),
        io::sha256_hex(&bytes)
    );
    Ok(())
}

fn default_scheme(labels: &[Option<&str>], which: SchemeArg) -> SchemeKind {
    match which {
        SchemeArg::Complete => SchemeKind::CompletelyRandomized { n_treated: labels.len() / 2 },
        SchemeArg::Stratified => {
            SchemeKind::StratifiedBlocked { treated: balanced_strata(labels.iter().copied()) }
        }
    }
}

fn counterfactual_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.counterfactual.csv"))
}

fn generate_causal(args: &GenerateArgs, counterfactuals: Option<&Path>) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    let mut gen = cfg.causal()?.clone();
    if let Some(seed) = args.seed {
        gen.seed = seed;
    }
    let world = generate_world(&gen)?;
    let labels = world.stratum_labels();
    let scheme = cfg.randomization.clone().unwrap_or_else(|| RandomizationScheme {
        kind: default_scheme(&labels, SchemeArg::Complete),
        seed: gen.seed,
    });
    let ids = world.cluster_ids();
    let id_refs: Vec<_> = ids.iter().collect();
    let assignment = assign_labeled(&id_refs, &labels, &scheme)?;
    let dataset = observe(&world, &assignment)?;
    let bytes = io::dataset_to_bytes(&dataset);
    write_bytes(&args.out, &bytes)?;

    let side = counterfactuals.map(Path::to_path_buf).unwrap_or_else(|| counterfactual_path(&args.out));
    let mut w = create(&side)?;
    io::write_counterfactuals(&world, &mut w).map_err(output_error(&side))?;
    w.flush().map_err(|e| output_error(&side)(e.into()))?;
    eprintln!(
        "wrote {} clusters, {} people to {} (sha256 {}); counterfactuals in {}",
        dataset.n(),
        dataset.n_individuals(),
        args.out.display(),
        io::sha256_hex(&bytes),
        side.display()
    );
    Ok(())
}

/// Runs the requested estimators on the file's bytes.
pub fn estimate_report(
    bytes: &[u8],
    effects: &[EffectKind],
    contrast: Contrast,
    policy: EmptyPolicy,
    scale: Scale,
) -> Result<EstimateReport, IoError> {
    let dataset = io::read_dataset(bytes)?;
    let est = Estimator::new(policy);
    let entries = effects
        .iter()
        .map(|&kind| ReportEntry::new(kind, &est.estimate(&dataset, kind, contrast), scale))
        .collect();
    Ok(EstimateReport {
        dataset_sha256: Some(io::sha256_hex(bytes)),
        n_clusters: dataset.n(),
        n_individuals: dataset.n_individuals(),
        effects: entries,
    })
}

fn estimate(args: &EstimateArgs) -> Result<(), CliError> {
    let bytes = std::fs::read(&args.dataset).map_err(|e| CliError::Input(e.into()))?;
    let report = estimate_report(
        &bytes,
        &args.effects,
        args.contrast.into(),
        args.empty_policy.into(),
        args.scale.into(),
    )
    .map_err(CliError::Input)?;
    print!("{}", report.to_text());
    if let Some(path) = &args.out {
        let mut w = create(path)?;
        io::write_json(&report, &mut w).map_err(output_error(path))?;
        w.flush().map_err(|e| output_error(path)(e.into()))?;
    }
    if report.all_failed() {
        return Err(CliError::AllEffectsFailed);
    }
    Ok(())
}

fn mc(args: &McArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    let gen = cfg.causal()?.clone();
    let section = cfg.mc.clone().unwrap_or_default();
    let mut options =
        McOptions::new(args.replicates.unwrap_or(section.replicates), args.seed.unwrap_or(section.seed));
    options.empty_policy = args.empty_policy.map_or(section.empty_policy, Into::into);

    eprintln!("generating world ({} clusters, seed {})", gen.n_clusters, gen.seed);
    let world = generate_world(&gen)?;
    let labels = world.stratum_labels();
    let scheme = match (args.scheme, &cfg.randomization) {
        (Some(which), _) => default_scheme(&labels, which),
        (None, Some(r)) => r.kind.clone(),
        (None, None) => default_scheme(&labels, SchemeArg::Complete),
    };
    eprintln!("running {} replicates (seed {})", options.n_replicates, options.seed);
    let report = if args.regenerate {
        run_mc_regenerating(&gen, &scheme, &options)?
    } else {
        run_mc_with(&world, &scheme, &options)?
    };
    eprintln!("done");

    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            io::write_json(&report, &mut w).map_err(output_error(path))?;
            w.flush().map_err(|e| output_error(path)(e.into()))?;
        }
        None => io::write_json(&report, std::io::stdout().lock()).map_err(CliError::Input)?,
    }
    if let Some(path) = &args.rows {
        let mut w = create(path)?;
        io::write_mc_rows(&report, &mut w).map_err(output_error(path))?;
        w.flush().map_err(|e| output_error(path)(e.into()))?;
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate { source: GenerateSource::Margins { common, calibrate } } => {
            generate_margins(common, *calibrate)
        }
        Command::Generate { source: GenerateSource::Causal { common, counterfactuals } } => {
            generate_causal(common, counterfactuals.as_deref())
        }
        Command::Estimate(args) => estimate(args),
        Command::Mc(args) => mc(args),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
