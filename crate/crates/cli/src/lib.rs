//! Command implementations behind the `entdetect` binary.
//!
//! Structured results are JSON objects of the form
//! `{"version", "config", <payload>}`; sweeps are CSV with `#` comment lines
//! carrying the version and config.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use entdetect::detector::{self, BackendChoice, DetectConfig, DetectionReport, EofBounds, Mode};
use entdetect::linalg::DEFAULT_DENSE_CAP;
use entdetect::posmap::{self, BuiltinMap, PositiveMapSpec};
use entdetect::qstate::{self, fmt_f64, DensityOperator};
use entdetect::spectrum::{SpectrumEstimate, SpectrumOptions};
use entdetect::sweep::{self, Family, SweepRow};

pub const VERSION: &str = env!("ENTDETECT_VERSION");

/// Sweep CSV columns, in order.
pub const SWEEP_HEADER: [&str; 9] = [
    "param",
    "verdict",
    "lambda_min",
    "std_error",
    "threshold",
    "rescale",
    "lambda_prime",
    "eof_lower",
    "eof_upper",
];

#[derive(Debug, Parser)]
#[command(name = "entdetect", version = VERSION, about = "Direct entanglement detection simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a state file.
    Gen(GenArgs),
    /// Show the structural physical approximation of a map.
    SpaInfo(SpaInfoArgs),
    /// Run the detection pipeline on one state.
    Detect(DetectArgs),
    /// Run detection across a one-parameter family, as CSV.
    Sweep(SweepArgs),
    /// Reconstruct a spectrum from (estimated) power sums.
    Spectrum(SpectrumArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    Bell,
    Werner,
    Isotropic,
    MaxEntangled,
    Random,
    RandomSeparable,
    MaximallyMixed,
}

/// Parameters of a generated state. `dim` is the local dimension of each
/// of the two parties.
#[derive(Debug, Clone, Args, Serialize)]
pub struct FamilyArgs {
    #[arg(long, value_enum)]
    pub family: Option<FamilyName>,
    /// Bell state index: 0 Φ+, 1 Φ−, 2 Ψ+, 3 Ψ−.
    #[arg(long, default_value_t = 0)]
    pub which: u8,
    /// Werner mixing weight.
    #[arg(long)]
    pub q: Option<f64>,
    /// Isotropic fidelity.
    #[arg(long)]
    pub f: Option<f64>,
    #[arg(long = "dim", short = 'd', default_value_t = 2)]
    pub dim: usize,
    /// Rank of a random state; full rank when omitted.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Number of product terms of a random separable state.
    #[arg(long, default_value_t = 4)]
    pub terms: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenArgs {
    #[command(flatten)]
    pub state: FamilyArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

/// Map selection: a builtin by name or a map file.
#[derive(Debug, Clone, Args, Serialize)]
pub struct MapArgs {
    #[arg(long, default_value = "transpose")]
    pub map: String,
    #[arg(long, conflicts_with = "map")]
    pub map_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SpaInfoArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendArg {
    Auto,
    Circuit,
    Analytic,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RunArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    pub mode: ModeArg,
    /// Shots per power sum in sampled mode.
    #[arg(long, default_value_t = 1_000_000)]
    pub shots: u64,
    #[arg(long, value_enum, default_value_t = BackendArg::Auto)]
    pub backend: BackendArg,
    /// Decision band half-width in standard errors.
    #[arg(long, default_value_t = detector::DEFAULT_DECISION_SIGMA)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest dense dimension any step may build.
    #[arg(long, default_value_t = DEFAULT_DENSE_CAP)]
    pub dense_cap: usize,
}

impl RunArgs {
    pub fn detect_config(&self) -> DetectConfig {
        DetectConfig {
            mode: match self.mode {
                ModeArg::Exact => Mode::Exact,
                ModeArg::Sampled => Mode::Sampled,
            },
            shots: self.shots,
            backend: match self.backend {
                BackendArg::Auto => BackendChoice::Auto,
                BackendArg::Circuit => BackendChoice::Circuit,
                BackendArg::Analytic => BackendChoice::Analytic,
            },
            decision_sigma: self.sigma,
            seed: self.seed,
            dense_cap: self.dense_cap,
        }
    }
}

/// A state file or a generated family member.
#[derive(Debug, Clone, Args, Serialize)]
pub struct StateSource {
    #[arg(long, conflicts_with = "family")]
    pub state: Option<PathBuf>,
    #[command(flatten)]
    pub family: FamilyArgs,
    /// Seed for generated random states.
    #[arg(long, default_value_t = 0)]
    pub state_seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DetectArgs {
    #[command(flatten)]
    pub source: StateSource,
    #[command(flatten)]
    pub map: MapArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepFamily {
    Werner,
    Isotropic,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub family: SweepFamily,
    /// Local dimension for the isotropic family.
    #[arg(long = "dim", short = 'd', default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.0)]
    pub from: f64,
    #[arg(long, default_value_t = 1.0)]
    pub to: f64,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    #[command(flatten)]
    pub map: MapArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub source: StateSource,
    /// Apply the approximation of the selected map before measuring.
    #[arg(long)]
    pub spa: bool,
    #[command(flatten)]
    pub map: MapArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Also report the projection onto the probability simplex.
    #[arg(long)]
    pub project: bool,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(entdetect::Error),
    Io(PathBuf, io::Error),
}

impl CliError {
    /// 3 for capacity errors, 2 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_capacity() => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(path, e) => write!(f, "{}: {e}", path.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<entdetect::Error> for CliError {
    fn from(e: entdetect::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Io(path.to_path_buf(), e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(PathBuf::from("<stdout>"), e)),
    }
}

fn require(value: Option<f64>, flag: &str, family: &str) -> CliResult<f64> {
    value.ok_or_else(|| CliError::Usage(format!("--family {family} needs --{flag}")))
}

pub fn generate(args: &FamilyArgs, seed: u64) -> CliResult<DensityOperator> {
    let family = args
        .family
        .ok_or_else(|| CliError::Usage("either --state or --family is required".into()))?;
    let d = args.dim;
    let rho = match family {
        FamilyName::Bell => qstate::make_bell(args.which)?.to_density(),
        FamilyName::Werner => qstate::make_werner(require(args.q, "q", "werner")?)?,
        FamilyName::Isotropic => qstate::make_isotropic(require(args.f, "f", "isotropic")?, d)?,
        FamilyName::MaxEntangled => qstate::make_max_entangled(d)?.to_density(),
        FamilyName::Random => qstate::random_density(&[d, d], args.rank.unwrap_or(d * d), seed)?,
        FamilyName::RandomSeparable => qstate::random_separable(d, args.terms, seed)?,
        FamilyName::MaximallyMixed => DensityOperator::maximally_mixed(vec![d, d]),
    };
    Ok(rho)
}

pub fn load_state(source: &StateSource) -> CliResult<DensityOperator> {
    match &source.state {
        Some(path) => Ok(qstate::read_state_json(&read_file(path)?)?),
        None => generate(&source.family, source.state_seed),
    }
}

pub fn load_map(args: &MapArgs, d: usize) -> CliResult<PositiveMapSpec> {
    match &args.map_file {
        Some(path) => {
            let name = path.file_stem().map_or("map".into(), |s| s.to_string_lossy().into_owned());
            let map = PositiveMapSpec::from_json(name, &read_file(path)?)?;
            if map.d() != d {
                return Err(CliError::Usage(format!(
                    "map file acts on d = {}, the state needs d = {d}",
                    map.d()
                )));
            }
            Ok(map)
        }
        None => {
            let kind = BuiltinMap::from_name(&args.map).ok_or_else(|| {
                let names: Vec<&str> = BuiltinMap::ALL.iter().map(|b| b.name()).collect();
                CliError::Usage(format!("unknown map '{}', expected one of {}", args.map, names.join(", ")))
            })?;
            Ok(PositiveMapSpec::builtin(kind, d)?)
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, P: Serialize> {
    version: &'a str,
    config: &'a C,
    #[serde(flatten)]
    payload: P,
}

fn envelope_json<C: Serialize, P: Serialize>(config: &C, payload: P) -> String {
    let env = Envelope {
        version: VERSION,
        config,
        payload,
    };
    let mut text = serde_json::to_string_pretty(&env).expect("serializable output");
    text.push('\n');
    text
}

/// The state file text with the version and config appended as extra keys.
pub fn gen_text(args: &GenArgs) -> CliResult<String> {
    let rho = generate(&args.state, args.seed)?;
    let body = qstate::write_state_json(&rho);
    let body = body.trim_end().strip_suffix('}').expect("state file is a JSON object");
    Ok(format!(
        "{body},\n \"version\": {},\n \"config\": {}}}\n",
        serde_json::to_string(VERSION).expect("string"),
        serde_json::to_string(args).expect("serializable config")
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct SpaInfo {
    pub map: String,
    pub d: usize,
    pub lambda: f64,
    pub p_star: f64,
    pub threshold: f64,
    pub identity_coefficient: f64,
    pub map_coefficient: f64,
    pub trace_preserving: bool,
    pub choi_min_eigenvalue: f64,
}

pub fn spa_info(args: &SpaInfoArgs) -> CliResult<SpaInfo> {
    let map = load_map(&args.map, args.d)?;
    let spa = posmap::build_spa(&map)?;
    Ok(SpaInfo {
        map: map.name().to_string(),
        d: spa.d(),
        lambda: spa.lambda_neg(),
        p_star: spa.p_star(),
        threshold: spa.threshold(),
        identity_coefficient: spa.identity_coefficient(),
        map_coefficient: spa.map_coefficient(),
        trace_preserving: spa.trace_preserving(),
        choi_min_eigenvalue: spa.choi_min_eigenvalue(),
    })
}

pub fn detect(args: &DetectArgs) -> CliResult<(DetectConfig, DetectionReport)> {
    let rho = load_state(&args.source)?;
    let d = rho.equal_bipartite_dim()?;
    let map = load_map(&args.map, d)?;
    let config = args.run.detect_config();
    let report = detector::detect(&rho, &map, &config)?;
    Ok((config, report))
}

pub fn sweep_rows(args: &SweepArgs) -> CliResult<Vec<SweepRow>> {
    let family = match args.family {
        SweepFamily::Werner => Family::Werner,
        SweepFamily::Isotropic => Family::Isotropic { d: args.dim },
    };
    let map = load_map(&args.map, family.local_dim())?;
    let params = sweep::grid(args.from, args.to, args.points)?;
    Ok(sweep::sweep(family, &params, &map, &args.run.detect_config())?)
}

fn verdict_name(row: &SweepRow) -> String {
    serde_json::to_value(row.verdict)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

pub fn sweep_csv(args: &SweepArgs, rows: &[SweepRow]) -> CliResult<String> {
    let mut buf = format!(
        "# version: {VERSION}\n# config: {}\n",
        serde_json::to_string(args).expect("serializable config")
    );
    let mut writer = csv::Writer::from_writer(Vec::new());
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    let csv_err = |e: csv::Error| CliError::Io(PathBuf::from("<csv>"), io::Error::other(e));
    writer.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for row in rows {
        writer
            .write_record([
                fmt_f64(row.param),
                verdict_name(row),
                fmt_f64(row.lambda_min),
                fmt_f64(row.std_error),
                fmt_f64(row.threshold),
                fmt_f64(row.rescale),
                opt(row.lambda_prime),
                opt(row.eof_lower),
                opt(row.eof_upper),
            ])
            .map_err(csv_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| CliError::Io(PathBuf::from("<csv>"), e.into_error()))?;
    buf.push_str(&String::from_utf8(bytes).expect("csv output is UTF-8"));
    Ok(buf)
}

pub fn spectrum(args: &SpectrumArgs) -> CliResult<(DetectConfig, SpectrumEstimate, u64)> {
    let mut rho = load_state(&args.source)?;
    if args.spa {
        let d = rho.equal_bipartite_dim()?;
        let map = load_map(&args.map, d)?;
        let spa = posmap::build_spa_with_cap(&map, args.run.dense_cap)?;
        let sigma = spa.apply_unnormalized(&rho)?;
        rho = if map.trace_preserving() {
            DensityOperator::new(rho.dims().to_vec(), sigma)?
        } else {
            posmap::postselect_normalize(&sigma, rho.dims())?.0
        };
    }
    let config = args.run.detect_config();
    let options = SpectrumOptions {
        project_to_simplex: args.project,
    };
    let measured = detector::measure_spectrum(&rho, &config, options)?;
    Ok((config, measured.spectrum, measured.copies_consumed))
}

#[derive(Serialize)]
struct DetectPayload<'a> {
    resolved: &'a DetectConfig,
    report: &'a DetectionReport,
    eof_bounds: Option<EofBounds>,
}

#[derive(Serialize)]
struct SpaInfoPayload<'a> {
    spa: &'a SpaInfo,
}

#[derive(Serialize)]
struct SpectrumPayload<'a> {
    resolved: &'a DetectConfig,
    copies_consumed: u64,
    spectrum: &'a SpectrumEstimate,
}

/// Runs one command, writing its output to `--out` or `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Gen(args) => emit(args.out.as_deref(), &gen_text(args)?, stdout),
        Command::SpaInfo(args) => {
            let info = spa_info(args)?;
            emit(args.out.as_deref(), &envelope_json(args, SpaInfoPayload { spa: &info }), stdout)
        }
        Command::Detect(args) => {
            let (config, report) = detect(args)?;
            let payload = DetectPayload {
                resolved: &config,
                eof_bounds: report.eof_bounds(),
                report: &report,
            };
            emit(args.out.as_deref(), &envelope_json(args, payload), stdout)
        }
        Command::Sweep(args) => {
            let rows = sweep_rows(args)?;
            emit(args.out.as_deref(), &sweep_csv(args, &rows)?, stdout)
        }
        Command::Spectrum(args) => {
            let (config, spectrum, copies) = spectrum(args)?;
            let payload = SpectrumPayload {
                resolved: &config,
                copies_consumed: copies,
                spectrum: &spectrum,
            };
            emit(args.out.as_deref(), &envelope_json(args, payload), stdout)
        }
    }
}
