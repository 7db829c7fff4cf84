//! `wordcover` command line.
//!
//! Exit codes: 0 all checks pass, 1 configuration or usage error, 2 check
//! failure or partial results, 3 budget exceeded.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use wordcover::cloud::PointCloud;
use wordcover::cover::{enumerate_cloud, generate_alphabet, r_target, Domain, FormulaVariant};
use wordcover::pipeline::{
    self, error_exit_code, merge_reports, parse_config, report::unix_timestamp, resolve_params,
    ConfigError, Conventions, PersistCheck, RunConfig, Sweep, W1Check, W1Method, EXIT_CONFIG,
};
use wordcover::{make_space, ConstantOverrides, SpaceId};

#[derive(Parser)]
#[command(name = "wordcover", version, about = "Word-orbit covers of spheres and SO(3)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cover construction.
    #[command(subcommand)]
    Cover(CoverCommand),
    /// Check a cloud against one threshold.
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Run the pipeline described by a TOML config.
    Run(RunArgs),
    /// Run a config over several word lengths and/or seeds.
    Sweep(SweepArgs),
    /// Report utilities.
    #[command(subcommand)]
    Report(ReportCommand),
}

#[derive(Subcommand)]
enum CoverCommand {
    /// Enumerate the word orbit of the base point.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainArg {
    Strict,
    Exploratory,
}

impl From<DomainArg> for Domain {
    fn from(d: DomainArg) -> Domain {
        match d {
            DomainArg::Strict => Domain::Strict,
            DomainArg::Exploratory => Domain::Exploratory,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Main,
    Overview,
}

impl From<VariantArg> for FormulaVariant {
    fn from(v: VariantArg) -> FormulaVariant {
        match v {
            VariantArg::Main => FormulaVariant::Main,
            VariantArg::Overview => FormulaVariant::Overview,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    space: SpaceId,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    seed: u64,
    /// Alphabet size; defaults to the calculator value.
    #[arg(long)]
    k: Option<usize>,
    /// Word length; defaults to the calculator value.
    #[arg(long)]
    ell: Option<usize>,
    #[arg(long)]
    cap: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    dedup: f64,
    #[arg(long, value_enum, default_value = "strict")]
    domain: DomainArg,
    #[arg(long, value_enum, default_value = "main")]
    variant: VariantArg,
    /// Output CSV; the header goes next to it with a `.json` extension.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Covering radius against a uniform reference sample.
    Cover(VerifyCoverArgs),
    /// Wasserstein-1 distance to a uniform reference sample.
    W1(VerifyW1Args),
    /// Design discrepancy on the band-limited eigenspace.
    Design(VerifyDesignArgs),
    /// Spectral gap of the averaging operator over random alphabets.
    Gap(VerifyGapArgs),
    /// Coupled persistence-diagram experiment.
    Persist(VerifyPersistArgs),
}

#[derive(Args)]
struct CloudArgs {
    /// Cloud CSV with its `.json` header alongside.
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyCoverArgs {
    #[command(flatten)]
    io: CloudArgs,
    /// Epsilon of the construction; sets the target radius.
    #[arg(long, required_unless_present = "r_target")]
    epsilon: Option<f64>,
    #[arg(long)]
    r_target: Option<f64>,
    #[arg(long, default_value_t = 20_000)]
    reference_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Exact,
    Sinkhorn,
}

#[derive(Args)]
struct VerifyW1Args {
    #[command(flatten)]
    io: CloudArgs,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, value_enum, default_value = "auto")]
    method: MethodArg,
    #[arg(long, default_value_t = 0.02)]
    reg: f64,
    #[arg(long, default_value_t = 5000)]
    reference_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct VerifyDesignArgs {
    #[command(flatten)]
    io: CloudArgs,
    #[arg(long)]
    lambda_r: f64,
    #[arg(long, default_value_t = 0.1)]
    upsilon: f64,
}

#[derive(Args)]
struct VerifyGapArgs {
    #[arg(long)]
    space: SpaceId,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    lambda_max: f64,
    /// Number of alphabets, drawn from seeds `seed, seed + 1, ...`.
    #[arg(long, default_value_t = 1)]
    seeds: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyPersistArgs {
    #[command(flatten)]
    io: CloudArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    q: usize,
    #[arg(long)]
    trials: usize,
    /// W1 estimate of the cloud; computed against a uniform reference when absent.
    #[arg(long)]
    w1: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated word lengths.
    #[arg(long, value_delimiter = ',')]
    ells: Vec<usize>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ReportCommand {
    /// Tally several report.json files.
    Merge {
        reports: Vec<PathBuf>,
        /// Merged JSON; a CSV table is written next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A failure with its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl From<wordcover::Error> for Failure {
    fn from(e: wordcover::Error) -> Self {
        Failure {
            code: error_exit_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: e.to_string(),
        }
    }
}

fn config_failure(message: String) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message,
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: format!("{}: {e}", path.display()),
    }
}

type Outcome = Result<i32, Failure>;

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("WORDCOVER_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| config_failure(format!("WORDCOVER_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| config_failure(e.to_string()))
}

fn read_cloud(path: &Path) -> Result<PointCloud, Failure> {
    PointCloud::read_with_header(path).map_err(|e| config_failure(format!("{}: {e}", path.display())))
}

/// Writes a single-check result to `out` or stdout.
fn emit_verify(check: &str, result: serde_json::Value, pass: bool, out: Option<&Path>) -> Outcome {
    let doc = json!({
        "schema": "wordcover.verify/1",
        "timestamp": unix_timestamp(),
        "conventions": Conventions::default(),
        "check": check,
        "pass": pass,
        "result": result,
    });
    let text = serde_json::to_string_pretty(&doc).expect("json values serialize") + "\n";
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| io_failure(path, e))?,
        None => print!("{text}"),
    }
    eprintln!("{check}: {}", if pass { "pass" } else { "fail" });
    Ok(if pass { 0 } else { 2 })
}

fn to_json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn cover_generate(a: GenerateArgs) -> Outcome {
    let mut config = RunConfig::minimal(a.space, a.epsilon, a.delta, a.seed);
    config.domain = a.domain.into();
    config.variant = a.variant.into();
    config.overrides.k = a.k;
    config.overrides.ell = a.ell;
    if let Some(cap) = a.cap {
        config.budgets.cap = cap;
    }
    config.budgets.dedup = a.dedup;
    let errors = config.validate();
    if !errors.is_empty() {
        return Err(ConfigError::Validation(errors).into());
    }
    let params = resolve_params(&config)?;
    let alphabet = generate_alphabet(&params.space, params.k, a.seed);
    let cloud = enumerate_cloud(
        &alphabet,
        params.ell,
        &params.space.base_point(),
        wordcover::cover::EnumerateOptions {
            cap: Some(config.budgets.cap),
            dedup_tol: a.dedup,
        },
    )?;
    cloud.write_csv(&a.out)?;
    cloud.write_header(&a.out.with_extension("json"))?;
    eprintln!(
        "k={} ell={} r_target={:.6} points={}{}",
        params.k,
        params.ell,
        params.r_target,
        cloud.len(),
        if cloud.provenance.capped { " (capped)" } else { "" }
    );
    Ok(0)
}

fn verify(cmd: VerifyCommand) -> Outcome {
    match cmd {
        VerifyCommand::Cover(a) => {
            let cloud = read_cloud(&a.io.cloud)?;
            let target = match (a.r_target, a.epsilon) {
                (Some(r), _) => r,
                (None, Some(eps)) => r_target(eps, cloud.space())?,
                (None, None) => unreachable!("clap requires one of them"),
            };
            let o = pipeline::verify_cover(&cloud, target, a.reference_size, a.seed)?;
            emit_verify("cover", to_json(&o), o.covering_radius.pass, a.io.out.as_deref())
        }
        VerifyCommand::W1(a) => {
            let cloud = read_cloud(&a.io.cloud)?;
            let check = W1Check {
                method: match a.method {
                    MethodArg::Auto => W1Method::Auto,
                    MethodArg::Exact => W1Method::Exact,
                    MethodArg::Sinkhorn => W1Method::Sinkhorn,
                },
                reg: a.reg,
                reference_size: a.reference_size,
            };
            let o = pipeline::verify_w1(&cloud, a.epsilon, &check, a.seed)?;
            emit_verify("w1", to_json(&o), o.w1.pass && o.duality.pass, a.io.out.as_deref())
        }
        VerifyCommand::Design(a) => {
            let cloud = read_cloud(&a.io.cloud)?;
            let o = pipeline::verify_design(&cloud, a.lambda_r, a.upsilon)?;
            emit_verify("design", to_json(&o), o.worst.pass, a.io.out.as_deref())
        }
        VerifyCommand::Gap(a) => {
            if a.k == 0 || a.seeds == 0 {
                return Err(config_failure("--k and --seeds must be at least 1".into()));
            }
            let spec = make_space(a.space, &ConstantOverrides::default())?;
            let o = pipeline::verify_gap(&spec, a.k, a.lambda_max, a.seed, a.seeds, a.delta)?;
            emit_verify("gap", to_json(&o), o.pass_fraction.pass, a.out.as_deref())
        }
        VerifyCommand::Persist(a) => {
            let cloud = read_cloud(&a.io.cloud)?;
            let w1 = match a.w1 {
                Some(w) => w,
                None => {
                    // epsilon only enters the thresholds, which are unused here
                    pipeline::verify_w1(&cloud, 0.1, &W1Check::default(), a.seed)?.w1.value
                }
            };
            let check = PersistCheck {
                n: a.n,
                q: a.q,
                trials: a.trials,
            };
            let o = pipeline::verify_persist(&cloud, &check, a.seed, w1)?;
            emit_verify("persist", to_json(&o), o.violation_frequency.pass, a.io.out.as_deref())
        }
    }
}

fn load_config(path: &Path, out: Option<PathBuf>) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let mut config = parse_config(&text)?;
    if let Some(out) = out {
        config.output_dir = out;
    }
    Ok(config)
}

fn run_config(config: &RunConfig) -> Outcome {
    let bundle = pipeline::run_pipeline(config)?;
    for f in &bundle.files {
        eprintln!("wrote {}", f.display());
    }
    if let Some(s) = &bundle.sweep {
        print!("{}", s.table());
    }
    if let Some(r) = &bundle.report {
        for (name, pass) in r.checks.verdicts() {
            println!("{name}: {}", if pass { "pass" } else { "fail" });
        }
        for e in &r.errors {
            println!("{}: error: {}", e.stage, e.message);
        }
    }
    for b in &bundle.replicas {
        println!("{}: exit {}", b.dir.display(), b.exit_code);
        if let Some(s) = &b.sweep {
            print!("{}", s.table());
        }
    }
    Ok(bundle.exit_code)
}

fn sweep(a: SweepArgs) -> Outcome {
    let mut config = load_config(&a.config, a.out)?;
    let sweep = config.sweep.get_or_insert_with(Sweep::default);
    if !a.ells.is_empty() {
        sweep.ells = a.ells;
    }
    if !a.seeds.is_empty() {
        sweep.seeds = a.seeds;
    }
    let errors = config.validate();
    if !errors.is_empty() {
        return Err(ConfigError::Validation(errors).into());
    }
    run_config(&config)
}

fn report(cmd: ReportCommand) -> Outcome {
    match cmd {
        ReportCommand::Merge { reports, out } => {
            if reports.is_empty() {
                return Err(config_failure("no reports given".into()));
            }
            let merged = merge_reports(&reports).map_err(|e| config_failure(e.to_string()))?;
            let text = serde_json::to_string_pretty(&merged).expect("json values serialize") + "\n";
            match out {
                Some(path) => {
                    std::fs::write(&path, text).map_err(|e| io_failure(&path, e))?;
                    let csv = path.with_extension("csv");
                    std::fs::write(&csv, merged.to_csv()).map_err(|e| io_failure(&csv, e))?;
                }
                None => print!("{text}"),
            }
            for t in &merged.tallies {
                eprintln!("{}: {}/{} pass", t.check, t.passed, t.runs);
            }
            Ok(merged.exit_code)
        }
    }
}

fn dispatch(cli: Cli) -> Outcome {
    configure_threads()?;
    match cli.command {
        Command::Cover(CoverCommand::Generate(a)) => cover_generate(a),
        Command::Verify(v) => verify(v),
        Command::Run(a) => run_config(&load_config(&a.config, a.out)?),
        Command::Sweep(a) => sweep(a),
        Command::Report(r) => report(r),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
