//! `lagspec`: analytic spectra, Monte-Carlo ensembles and their comparison.
//!
//! Exit codes: 0 success, 2 usage, 3 numerical failure, 4 I/O.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lagspec::io::{
    self, analytic_file, compare, mc_file, parse_beta, radius_file, records_from_samples, AnalyticParams, GridSpec,
    Method, RecordsFile,
};
use lagspec::mc::{EnsembleSpec, Field, Variant};
use lagspec::Error;

#[derive(Parser)]
#[command(name = "lagspec", version, about = "Spectra of large time-lagged correlation matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate an analytic law on a grid.
    Analytic(AnalyticArgs),
    /// Sample an ensemble and write eigenvalue records plus the binned curve.
    Mc(McArgs),
    /// Outer spectral radius against the lag depth.
    Radius(RadiusArgs),
    /// Compare an analytic curve with a Monte-Carlo curve.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct AnalyticArgs {
    #[arg(long, value_parser = parse_method)]
    method: Method,
    /// N/T (N/(T - tau) for whiten).
    #[arg(long)]
    r: f64,
    /// Lag depth p/q, required by deep.
    #[arg(long)]
    beta: Option<String>,
    /// `A` matrix file (`T=<n>` header, `re+imj` entries), required by sandwich.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Prefactor of X A X†, default 1/T.
    #[arg(long)]
    scale: Option<f64>,
    /// start:stop:count, in s (radial laws) or lambda (sym, whiten).
    #[arg(long, allow_hyphen_values = true)]
    grid: String,
    #[arg(long)]
    out: PathBuf,
    /// csv also writes a .json mirror next to the output.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct McArgs {
    #[arg(long, value_parser = parse_variant)]
    variant: Variant,
    #[arg(long)]
    n: usize,
    /// Series length; alternatively give --r.
    #[arg(long, conflicts_with = "r")]
    t: Option<usize>,
    /// N/T; T = N/r must be an integer.
    #[arg(long)]
    r: Option<f64>,
    #[arg(long, default_value_t = 1)]
    tau: usize,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = parse_field, default_value = "complex")]
    field: Field,
    /// Number of equal-width bins over the expected support.
    #[arg(long)]
    bins: Option<usize>,
    /// Output prefix: writes <out>.records.csv, <out>.curve.csv and <out>.curve.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RadiusArgs {
    #[arg(long)]
    r: f64,
    /// start:stop:count in beta, inside (0, 1).
    #[arg(long)]
    grid: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    analytic: PathBuf,
    #[arg(long)]
    mc: PathBuf,
    /// Eigenvalue records of the same run, for an exact CDF distance.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Report path (JSON); printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| {
        format!(
            "unknown variant {s:?}; expected lagged_nilpotent, lagged_cyclic, symmetrized, whitened_square or independent_product"
        )
    })
}

fn parse_field(s: &str) -> Result<Field, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| format!("unknown field {s:?}; expected complex or real"))
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidInput(_) | Error::Incompatible(_) => 2,
            Error::Io(_) | Error::Json(_) | Error::Parse(_) => 4,
            _ if e.is_numerical() => 3,
            _ => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn write(path: &Path, text: &str) -> CliResult {
    io::write_atomic(path, text.as_bytes()).map_err(|e| Failure {
        code: 4,
        message: format!("{}: {e}", path.display()),
    })
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| Failure {
        code: 4,
        message: format!("{}: {e}", path.display()),
    })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn run_analytic(args: AnalyticArgs) -> CliResult {
    let grid: GridSpec = args.grid.parse()?;
    let mut params = AnalyticParams::new(args.method, args.r);
    params.beta = args.beta.as_deref().map(parse_beta).transpose()?;
    params.matrix = args.matrix.as_ref().map(|p| p.display().to_string());
    params.scale = args.scale;
    params.validate()?;
    let matrix = match &args.matrix {
        Some(p) => Some(io::parse_matrix(&read(p)?).map_err(|e| Failure {
            code: 4,
            message: format!("{}: {e}", p.display()),
        })?),
        None => None,
    };
    let file = analytic_file(&params, &grid.points(), matrix.as_ref())?;
    match args.format {
        Format::Csv => {
            write(&args.out, &io::write_analytic_csv(&file)?)?;
            write(&args.out.with_extension("json"), &io::to_json(&file)?)?;
        }
        Format::Json => write(&args.out, &io::to_json(&file)?)?,
    }
    eprintln!("wrote {} points to {}", file.curve.len(), args.out.display());
    Ok(())
}

fn run_mc(args: McArgs) -> CliResult {
    let t = match (args.t, args.r) {
        (Some(t), None) => t,
        (None, Some(r)) => {
            if !(r > 0.0) {
                return Err(usage("--r must be positive"));
            }
            let t = args.n as f64 / r;
            if (t - t.round()).abs() > 1e-9 * t {
                return Err(usage(format!("N/r = {t} is not an integer; pass --t")));
            }
            t.round() as usize
        }
        _ => return Err(usage("give either --t or --r")),
    };
    let spec = EnsembleSpec {
        n: args.n,
        t,
        tau: args.tau,
        field: args.field,
        variant: args.variant,
        samples: args.samples,
        seed: args.seed,
    };
    spec.validate()?;
    let edges = match args.bins {
        Some(0) => return Err(usage("--bins must be positive")),
        Some(bins) => {
            let default = io::default_mc_edges(&spec)?;
            let (lo, hi) = (default[0], default[default.len() - 1]);
            Some((0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect())
        }
        None => None,
    };
    let (file, samples) = mc_file(&spec, edges)?;
    let records = RecordsFile {
        schema: io::SCHEMA,
        version: io::VERSION.into(),
        params: spec,
        records: records_from_samples(&samples),
    };
    write(&with_suffix(&args.out, ".records.csv"), &io::write_records_csv(&records)?)?;
    write(&with_suffix(&args.out, ".curve.csv"), &io::write_mc_csv(&file)?)?;
    write(&with_suffix(&args.out, ".curve.json"), &io::to_json(&file)?)?;
    eprintln!(
        "{} samples accepted, {} rejected; wrote {}.{{records.csv,curve.csv,curve.json}}",
        samples.len(),
        file.rejected.len(),
        args.out.display()
    );
    for r in &file.rejected {
        eprintln!("rejected sample {}: {}", r.sample_index, r.reason);
    }
    Ok(())
}

fn run_radius(args: RadiusArgs) -> CliResult {
    let grid: GridSpec = args.grid.parse()?;
    let file = radius_file(args.r, &grid.points())?;
    match args.format {
        Format::Csv => {
            write(&args.out, &io::write_radius_csv(&file)?)?;
            write(&args.out.with_extension("json"), &io::to_json(&file)?)?;
        }
        Format::Json => write(&args.out, &io::to_json(&file)?)?,
    }
    Ok(())
}

fn run_compare(args: CompareArgs) -> CliResult {
    let analytic = io::read_analytic(&args.analytic).map_err(|e| located(e, &args.analytic))?;
    let mc = io::read_mc(&args.mc).map_err(|e| located(e, &args.mc))?;
    let records = match &args.records {
        Some(p) => Some(
            io::parse_records_csv(&read(p)?)
                .map_err(|e| located(e, p))?
                .records,
        ),
        None => None,
    };
    let report = compare(&analytic, &mc, records.as_deref())?;
    let json = io::to_json(&report)?;
    match &args.out {
        Some(p) => write(p, &json)?,
        None => print!("{json}"),
    }
    Ok(())
}

/// Prefixes file errors with the offending path.
fn located(e: Error, path: &Path) -> Failure {
    let mut f = Failure::from(e);
    f.message = format!("{}: {}", path.display(), f.message);
    f
}

/// Caps the rayon pool at `LAGSPEC_THREADS` when set.
fn configure_threads() -> CliResult {
    let Ok(value) = std::env::var("LAGSPEC_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("LAGSPEC_THREADS={value:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| usage(format!("cannot size the worker pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = configure_threads().and_then(|()| match cli.command {
        Command::Analytic(a) => run_analytic(a),
        Command::Mc(a) => run_mc(a),
        Command::Radius(a) => run_radius(a),
        Command::Compare(a) => run_compare(a),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
