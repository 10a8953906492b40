//! Command-line front end for the nmvm-risk library.
//!
//! Subcommands: `tm` (tail moments), `tcm` (tail central moments),
//! `allocate` (capital allocation at one level), `sweep` (allocation over a
//! confidence-level grid), `losses` (log losses from prices), `stats`
//! (descriptive statistics of losses), and `validate` (Monte Carlo
//! cross-check of the analytic results).
//!
//! Exit codes: 0 on success; 1 for usage errors and unreadable or
//! unparseable inputs; 2 for model or data invariant violations and for a
//! failed Monte Carlo agreement gate; 3 for numeric failures (non-finite
//! moments, degenerate aggregates, non-positive central moments, tail
//! underflow, quadrature or root-finding breakdowns, domain violations).

use clap::{Args, Parser, Subcommand};
use nmvm_risk::allocation::AllocationMethod;
use nmvm_risk::model_file::{load_model, LoadedModel};
use nmvm_risk::oracle::{validation_report, z_score};
use nmvm_risk::series::{descriptive_stats, log_losses, read_prices_csv, LossSeries};
use nmvm_risk::sweep::{
    format_numeric, run_sweep, sweep_csv_string, validation_csv_string, write_text_atomic,
    AlphaGrid, SweepConfig,
};
use nmvm_risk::tail_moments::{tail_moment_table, warn_if_ill_conditioned};
use nmvm_risk::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "nmvm-risk",
    version,
    about = "Tail moments, tail central moments, and capital allocation for \
             normal mean-variance mixture portfolios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tail moments E[S^k | S > q_alpha] of the weighted aggregate loss
    Tm(MomentArgs),
    /// Tail central moments E[(S - CTE)^k | S > q_alpha]
    Tcm(MomentArgs),
    /// Per-component capital allocation at one confidence level
    Allocate(AllocateArgs),
    /// Per-component capital allocation over a confidence-level grid
    Sweep(SweepArgs),
    /// Log-loss series L_t = -ln(P_t / P_{t-1}) from a price CSV
    Losses(SeriesArgs),
    /// Descriptive statistics of the log-loss series
    Stats(SeriesArgs),
    /// Monte Carlo cross-check of every analytic tail quantity
    Validate(ValidateArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// JSON model file
    #[arg(long, value_name = "FILE")]
    model: PathBuf,

    /// Comma-separated portfolio weights (default: all ones)
    #[arg(
        long,
        value_name = "W1,W2,...",
        value_delimiter = ',',
        allow_hyphen_values = true
    )]
    weights: Option<Vec<f64>>,
}

impl ModelArgs {
    fn load(&self) -> Result<(LoadedModel, Vec<f64>), Error> {
        let loaded = load_model(&self.model)?;
        let weights = match &self.weights {
            Some(w) => w.clone(),
            None => vec![1.0; loaded.model.dimension()],
        };
        Ok((loaded, weights))
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Write the CSV to this file (atomically) instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Print numbers with full round-trip precision instead of six
    /// significant digits
    #[arg(long)]
    full_precision: bool,
}

impl OutputArgs {
    fn emit(&self, csv: &str) -> Result<(), Error> {
        match &self.out {
            Some(path) => write_text_atomic(path, csv),
            None => {
                print!("{csv}");
                Ok(())
            }
        }
    }
}

#[derive(Args)]
struct MomentArgs {
    #[command(flatten)]
    model: ModelArgs,

    /// Confidence level in (0, 1)
    #[arg(long)]
    alpha: f64,

    /// Highest moment order to report
    #[arg(long, default_value_t = 4)]
    order: u32,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct AllocateArgs {
    #[command(flatten)]
    model: ModelArgs,

    /// Confidence level in (0, 1)
    #[arg(long)]
    alpha: f64,

    /// Allocation methods to run: cte, tv, tcm, combined, euler_rooted
    /// (comma separated; default: all)
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    method: Vec<AllocationMethod>,

    /// Central-moment order for the tcm and euler_rooted methods
    #[arg(long, default_value_t = 3)]
    order: u32,

    /// Weight of the CTE term in the combined method
    #[arg(long, default_value_t = 1.0)]
    m1: f64,

    /// Weight of the tail-variance term in the combined method
    #[arg(long, default_value_t = 1.0)]
    m2: f64,

    /// Weight of the third central moment term in the combined method
    #[arg(long, default_value_t = 1.0)]
    m3: f64,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,

    /// Confidence-level grid START:STOP:POINTS, e.g. 0.95:0.99:5
    #[arg(long, value_name = "START:STOP:POINTS")]
    alpha_grid: String,

    /// Allocation methods to run: cte, tv, tcm, combined, euler_rooted
    /// (comma separated; default: all)
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    method: Vec<AllocationMethod>,

    /// Central-moment order for the tcm and euler_rooted methods
    #[arg(long, default_value_t = 3)]
    order: u32,

    /// Weight of the CTE term in the combined method
    #[arg(long, default_value_t = 1.0)]
    m1: f64,

    /// Weight of the tail-variance term in the combined method
    #[arg(long, default_value_t = 1.0)]
    m2: f64,

    /// Weight of the third central moment term in the combined method
    #[arg(long, default_value_t = 1.0)]
    m3: f64,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SeriesArgs {
    /// Price CSV with header `date,<label>,...` and ascending ISO dates
    #[arg(value_name = "PRICES")]
    prices: PathBuf,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    model: ModelArgs,

    /// Confidence levels to check (comma separated)
    #[arg(
        long,
        value_name = "A1,A2,...",
        value_delimiter = ',',
        default_values_t = vec![0.95, 0.99]
    )]
    alpha: Vec<f64>,

    /// Highest tail-moment order to check
    #[arg(long, default_value_t = 3)]
    order: u32,

    /// Monte Carlo sample count
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,

    /// Seed for the deterministic sampler
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Corrupt the first analytic value by this relative amount (test hook
    /// proving the agreement gate can fail)
    #[arg(long, hide = true, value_name = "REL", allow_hyphen_values = true)]
    perturb_analytic: Option<f64>,

    #[command(flatten)]
    output: OutputArgs,
}

fn parse_method(s: &str) -> Result<AllocationMethod, String> {
    s.parse::<AllocationMethod>().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version arrive here with use_stderr() == false
            // and must exit 0; genuine usage errors exit 1.
            let usage_error = e.use_stderr();
            let _ = e.print();
            return if usage_error {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Parse(_) => 1,
        Error::InvalidModel(_)
        | Error::InsufficientData(_)
        | Error::NonPositivePrice { .. }
        | Error::FactorisationFailure(_) => 2,
        Error::Domain(_)
        | Error::MomentNotFinite { .. }
        | Error::TailUnderflow { .. }
        | Error::DegenerateAggregate { .. }
        | Error::NonPositiveTcm { .. }
        | Error::EmptyTail
        | Error::QuadratureFailure(_)
        | Error::RootFindingFailure(_) => 3,
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Tm(args) => run_moments(args, MomentKind::Raw),
        Command::Tcm(args) => run_moments(args, MomentKind::Central),
        Command::Allocate(args) => run_allocate(args),
        Command::Sweep(args) => run_grid_sweep(args),
        Command::Losses(args) => run_losses(args),
        Command::Stats(args) => run_stats(args),
        Command::Validate(args) => run_validate(args),
    }
}

enum MomentKind {
    Raw,
    Central,
}

fn run_moments(args: MomentArgs, kind: MomentKind) -> Result<ExitCode, Error> {
    if args.order == 0 {
        return Err(Error::Domain("--order must be at least 1".into()));
    }
    let (loaded, weights) = args.model.load()?;
    let aggregate = loaded.model.aggregate(&weights)?;
    let table = tail_moment_table(&aggregate, args.alpha, args.order)?;
    let fp = args.output.full_precision;
    let (header, what) = match kind {
        MomentKind::Raw => ("alpha,k,tail_moment", "tail moment"),
        MomentKind::Central => ("alpha,k,tail_central_moment", "tail central moment"),
    };
    let mut csv = format!("{header}\n");
    for k in 1..=args.order {
        let value = match kind {
            MomentKind::Raw => table.value(0, k),
            MomentKind::Central => {
                let (value, condition) = table.central_moment_with_condition(k);
                warn_if_ill_conditioned(what, k, condition);
                value
            }
        };
        csv.push_str(&format!(
            "{},{k},{}\n",
            format_numeric(args.alpha, fp),
            format_numeric(value, fp)
        ));
    }
    args.output.emit(&csv)?;
    Ok(ExitCode::SUCCESS)
}

fn run_allocate(args: AllocateArgs) -> Result<ExitCode, Error> {
    let (loaded, weights) = args.model.load()?;
    let config = SweepConfig {
        alpha_grid: AlphaGrid::single(args.alpha)?,
        methods: resolve_methods(args.method),
        order: args.order,
        mixture_weights: (args.m1, args.m2, args.m3),
        weights,
    };
    let rows = run_sweep(&loaded.model, &loaded.labels, &config)?;
    args.output
        .emit(&sweep_csv_string(&rows, args.output.full_precision))?;
    Ok(ExitCode::SUCCESS)
}

fn run_grid_sweep(args: SweepArgs) -> Result<ExitCode, Error> {
    let (loaded, weights) = args.model.load()?;
    let config = SweepConfig {
        alpha_grid: parse_alpha_grid(&args.alpha_grid)?,
        methods: resolve_methods(args.method),
        order: args.order,
        mixture_weights: (args.m1, args.m2, args.m3),
        weights,
    };
    let rows = run_sweep(&loaded.model, &loaded.labels, &config)?;
    args.output
        .emit(&sweep_csv_string(&rows, args.output.full_precision))?;
    Ok(ExitCode::SUCCESS)
}

fn resolve_methods(requested: Vec<AllocationMethod>) -> Vec<AllocationMethod> {
    if requested.is_empty() {
        AllocationMethod::ALL.to_vec()
    } else {
        requested
    }
}

fn parse_alpha_grid(text: &str) -> Result<AlphaGrid, Error> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Parse(format!(
            "--alpha-grid expects START:STOP:POINTS, got {text:?}"
        )));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|_| Error::Parse(format!("--alpha-grid start {:?} is not a number", parts[0])))?;
    let stop: f64 = parts[1]
        .parse()
        .map_err(|_| Error::Parse(format!("--alpha-grid stop {:?} is not a number", parts[1])))?;
    let points: usize = parts[2].parse().map_err(|_| {
        Error::Parse(format!(
            "--alpha-grid points {:?} is not a positive integer",
            parts[2]
        ))
    })?;
    AlphaGrid::new(start, stop, points)
}

fn run_losses(args: SeriesArgs) -> Result<ExitCode, Error> {
    let losses = load_losses(&args.prices)?;
    let fp = args.output.full_precision;
    let mut csv = format!("date,{}\n", losses.labels.join(","));
    for (date, row) in losses.dates.iter().zip(&losses.rows) {
        csv.push_str(date);
        for &value in row {
            csv.push(',');
            csv.push_str(&format_numeric(value, fp));
        }
        csv.push('\n');
    }
    args.output.emit(&csv)?;
    Ok(ExitCode::SUCCESS)
}

fn run_stats(args: SeriesArgs) -> Result<ExitCode, Error> {
    let losses = load_losses(&args.prices)?;
    let fp = args.output.full_precision;
    let mut csv =
        String::from("component,count,mean,median,min,max,std_dev,skewness,kurtosis\n");
    for (i, label) in losses.labels.iter().enumerate() {
        let stats = descriptive_stats(&losses.column(i))?;
        let shape = |v: Option<f64>| match v {
            Some(v) => format_numeric(v, fp),
            None => "NA".to_string(),
        };
        csv.push_str(&format!(
            "{label},{},{},{},{},{},{},{},{}\n",
            stats.count,
            format_numeric(stats.mean, fp),
            format_numeric(stats.median, fp),
            format_numeric(stats.min, fp),
            format_numeric(stats.max, fp),
            format_numeric(stats.std_dev, fp),
            shape(stats.skewness),
            shape(stats.kurtosis),
        ));
    }
    args.output.emit(&csv)?;
    Ok(ExitCode::SUCCESS)
}

fn load_losses(prices: &std::path::Path) -> Result<LossSeries, Error> {
    log_losses(&read_prices_csv(prices)?)
}

fn run_validate(args: ValidateArgs) -> Result<ExitCode, Error> {
    let (loaded, weights) = args.model.load()?;
    let model = loaded.model.reweight(&weights)?;
    let mut rows = validation_report(&model, &args.alpha, args.order, args.samples, args.seed)?;
    if let Some(eps) = args.perturb_analytic {
        if let Some(row) = rows.first_mut() {
            row.analytic = if row.analytic == 0.0 {
                eps
            } else {
                row.analytic * (1.0 + eps)
            };
            row.z_score = z_score(row.analytic, row.empirical, row.std_error);
        }
    }
    args.output
        .emit(&validation_csv_string(&rows, args.output.full_precision))?;
    let flagged = rows.iter().filter(|r| r.flagged()).count();
    if flagged > 0 {
        eprintln!(
            "validation failed: {flagged} of {} quantities disagree with the \
             Monte Carlo oracle beyond 4 standard errors",
            rows.len()
        );
        return Ok(ExitCode::from(2));
    }
    eprintln!(
        "validation passed: {} quantities within 4 standard errors",
        rows.len()
    );
    Ok(ExitCode::SUCCESS)
}
