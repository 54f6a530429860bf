use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use lshaped::aggregation::{scheme_stats, uniform_partition, AggregationScheme};
use lshaped::bench::{self, Sweep, DEFAULT_REPEATS};
use lshaped::bounds;
use lshaped::engine::{solve_lshaped, EngineConfig, SolveStatus};
use lshaped::generate::{random_problem, GeneratorConfig};
use lshaped::parse::native::{parse_native, write_problem, NativeDocument};
use lshaped::parse::smps::parse_smps_bytes;
use lshaped::parse::render;
use lshaped::problem::{enumerate_scenarios, sample_instance, scenario_count, validate_problem, StochasticTemplate, TwoStageProblem, DEFAULT_SCENARIO_CAP};

const EXIT_USAGE: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(name = "lshaped", version, about = "Two-stage stochastic LP solver with cut aggregation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and print the report as JSON.
    Solve(SolveArgs),
    /// Sweep a scheme parameter against the multi-cut and single-cut baselines.
    Bench(BenchArgs),
    /// Evaluate worst-case iteration bounds.
    Bounds(BoundsArgs),
    /// Check an instance and report diagnostics.
    Validate(InputArgs),
    /// Write a random complete-recourse instance in native JSON.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Native JSON problem or template.
    #[arg(long, conflicts_with_all = ["core", "time", "stoch"])]
    input: Option<PathBuf>,
    #[arg(long, requires_all = ["time", "stoch"])]
    core: Option<PathBuf>,
    #[arg(long, requires_all = ["core", "stoch"])]
    time: Option<PathBuf>,
    #[arg(long, requires_all = ["core", "time"])]
    stoch: Option<PathBuf>,
    /// Draw this many equally weighted scenarios from a template.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long, default_value = "multi")]
    scheme: String,
    #[arg(long, default_value_t = 1e-2)]
    tol: f64,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    /// Subproblem threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    engine: EngineArgs,
    /// Include every added optimality cut in the report.
    #[arg(long)]
    record_cuts: bool,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    engine: EngineArgs,
    /// `NAME=START:END:STEP` or `NAME=V1,V2,...`, inserted into the scheme.
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    repeats: usize,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("kind").required(true).args(["single", "multi", "aggregated", "dynamic", "compare"]))]
struct BoundsArgs {
    #[arg(long)]
    single: bool,
    #[arg(long)]
    multi: bool,
    /// Needs `--sizes`, or `--upper` with `--A` and `--AL`.
    #[arg(long)]
    aggregated: bool,
    #[arg(long)]
    dynamic: bool,
    #[arg(long)]
    compare: bool,
    #[arg(long = "N")]
    n: usize,
    #[arg(long)]
    b: usize,
    #[arg(long)]
    m: usize,
    /// Partition sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    upper: bool,
    #[arg(long = "A")]
    a: Option<usize>,
    #[arg(long = "AL")]
    a_l: Option<usize>,
    #[arg(long = "A0")]
    a0: Option<usize>,
    #[arg(long)]
    lo: Option<usize>,
    #[arg(long)]
    hi: Option<usize>,
}

#[derive(Args)]
struct GenerateArgs {
    /// First-stage columns.
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Recourse rows.
    #[arg(long, default_value_t = 2)]
    rows: usize,
    /// Extra recourse columns beyond the shortage and surplus pairs.
    #[arg(long, default_value_t = 1)]
    extra: usize,
    #[arg(long, default_value_t = 20)]
    scenarios: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// An error that maps to a specific exit code.
#[derive(Debug)]
struct Exit(u8, String);

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.1)
    }
}

impl std::error::Error for Exit {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LSHAPED_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Solve(a) => run_solve(a),
        Command::Bench(a) => run_bench(a),
        Command::Bounds(a) => run_bounds(a),
        Command::Validate(a) => run_validate(a),
        Command::Generate(a) => run_generate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<Exit>().map_or(EXIT_USAGE, |x| x.0);
            ExitCode::from(code)
        }
    }
}

enum Loaded {
    Problem(TwoStageProblem),
    Template(StochasticTemplate),
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load(args: &InputArgs) -> Result<Loaded> {
    let loaded = match (&args.input, &args.core, &args.time, &args.stoch) {
        (Some(path), ..) => {
            let bytes = read(path)?;
            let text = String::from_utf8(bytes).map_err(|_| anyhow!("{}: invalid UTF-8", path.display()))?;
            match parse_native(&text) {
                Ok(NativeDocument::Problem(p)) => Loaded::Problem(p),
                Ok(NativeDocument::Template(t)) => Loaded::Template(t),
                Err(d) => bail!("{}:\n{}", path.display(), render(&d)),
            }
        }
        (None, Some(c), Some(t), Some(s)) => match parse_smps_bytes(&read(c)?, &read(t)?, &read(s)?) {
            Ok(t) => Loaded::Template(t),
            Err(d) => bail!("{}", render(&d)),
        },
        _ => bail!("provide --input or all of --core, --time, --stoch"),
    };
    Ok(loaded)
}

fn instance(args: &InputArgs) -> Result<TwoStageProblem> {
    match (load(args)?, args.samples) {
        (Loaded::Problem(_), Some(_)) => bail!("--samples needs a template input, not an explicit scenario list"),
        (Loaded::Problem(p), None) => Ok(p),
        (Loaded::Template(t), Some(count)) => Ok(sample_instance(&t, count, args.seed)?),
        (Loaded::Template(t), None) => Ok(enumerate_scenarios(&t, DEFAULT_SCENARIO_CAP)?),
    }
}

fn engine_config(args: &EngineArgs, scheme: AggregationScheme) -> EngineConfig {
    let mut cfg = EngineConfig { rel_tol: args.tol, max_iterations: args.max_iters, ..EngineConfig::with_scheme(scheme) };
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    cfg
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

fn run_solve(args: SolveArgs) -> Result<u8> {
    if matches!(args.format, Format::Csv) {
        bail!("solve writes JSON only");
    }
    let p = instance(&args.input)?;
    let scheme: AggregationScheme = args.engine.scheme.parse()?;
    let cfg = EngineConfig { record_cuts: args.record_cuts, ..engine_config(&args.engine, scheme) };
    let report = solve_lshaped(&p, &cfg)?;
    emit(args.output.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(match report.status {
        SolveStatus::Converged => 0,
        SolveStatus::IterationLimit => {
            eprintln!("iteration limit reached");
            EXIT_NOT_CONVERGED
        }
        SolveStatus::MasterInfeasible => {
            eprintln!("first-stage problem is infeasible");
            EXIT_INFEASIBLE
        }
    })
}

fn run_bench(args: BenchArgs) -> Result<u8> {
    let p = instance(&args.input)?;
    let sweep = args.sweep.as_deref().map(Sweep::parse).transpose()?;
    let cfg = engine_config(&args.engine, AggregationScheme::MultiCut);
    let rows = match bench::run_sweep(&p, &cfg, &args.engine.scheme, sweep.as_ref(), args.repeats) {
        Err(e @ bench::BenchError::Baseline(_)) => return Err(Exit(EXIT_NOT_CONVERGED, e.to_string()).into()),
        other => other?,
    };
    let text = match args.format {
        Format::Csv => {
            let mut buf = Vec::new();
            bench::write_csv(&rows, &mut buf)?;
            String::from_utf8(buf)?
        }
        Format::Json => serde_json::to_string_pretty(&rows)? + "\n",
    };
    emit(args.output.as_deref(), &text)?;
    Ok(0)
}

fn run_bounds(a: BoundsArgs) -> Result<u8> {
    let (n, b, m) = (a.n, a.b, a.m);
    let aggregated = || -> Result<String> {
        if a.upper {
            let (Some(parts), Some(largest)) = (a.a, a.a_l) else { bail!("--upper needs --A and --AL") };
            return Ok(bounds::bound_aggregated_upper(parts, largest, b, m)?.to_string());
        }
        let sizes = match (&a.sizes, a.a) {
            (Some(s), _) => s.clone(),
            (None, Some(parts)) if parts >= 1 && parts <= n => {
                let part = uniform_partition(n, n.div_ceil(parts))?;
                part.parts.iter().map(|s| s.len()).collect()
            }
            (None, Some(parts)) => bail!("--A = {parts} outside 1..={n}"),
            (None, None) => bail!("--aggregated needs --sizes, --A, or --upper with --A and --AL"),
        };
        if sizes.iter().sum::<usize>() != n {
            bail!("sizes sum to {}, expected N = {n}", sizes.iter().sum::<usize>());
        }
        Ok(bounds::bound_aggregated(&sizes, b, m)?.to_string())
    };
    let dynamic = || -> Result<String> {
        let a0 = a.a0.ok_or_else(|| anyhow!("--dynamic needs --A0"))?;
        let (lo, hi) = (a.lo.unwrap_or(1), a.hi.unwrap_or(n));
        Ok(bounds::bound_dynamic_restricted(n, b, m, a0, lo, hi)?.to_string())
    };
    let text = if a.compare {
        let mut lines = vec![
            format!("single      {}", bounds::bound_single_cut(n, b, m)?),
            format!("multi       {}", bounds::bound_multi_cut(n, b, m)?),
        ];
        if a.sizes.is_some() || a.a.is_some() {
            let label = match (&a.sizes, a.upper) {
                (_, true) => "aggregated (upper)".to_string(),
                (Some(_), _) => "aggregated".to_string(),
                (None, _) => {
                    let s = scheme_stats(&uniform_partition(n, n.div_ceil(a.a.unwrap_or(1).clamp(1, n)))?);
                    format!("aggregated (A={}, A_L={})", s.a, s.a_l)
                }
            };
            lines.push(format!("{label:<11} {}", aggregated()?));
        }
        if a.a0.is_some() {
            lines.push(format!("dynamic     {}", dynamic()?));
        }
        lines.join("\n")
    } else if a.single {
        bounds::bound_single_cut(n, b, m)?.to_string()
    } else if a.multi {
        bounds::bound_multi_cut(n, b, m)?.to_string()
    } else if a.aggregated {
        aggregated()?
    } else {
        dynamic()?
    };
    println!("{text}");
    Ok(0)
}

fn run_validate(args: InputArgs) -> Result<u8> {
    let summary = match load(&args)? {
        Loaded::Problem(p) => {
            let v = validate_problem(&p);
            if !v.is_empty() {
                bail!("{}", v.join("\n"));
            }
            format!("ok: problem '{}', n = {}, m = {}, N = {}", p.name, p.n(), p.m(), p.num_scenarios())
        }
        Loaded::Template(t) => {
            let v = t.validate();
            if !v.is_empty() {
                bail!("{}", v.join("\n"));
            }
            format!(
                "ok: template '{}', n = {}, m = {}, {} random entries, {} scenarios",
                t.name,
                t.first.n(),
                t.recourse.cols(),
                t.random.len(),
                scenario_count(&t)
            )
        }
    };
    println!("{summary}");
    Ok(0)
}

fn run_generate(a: GenerateArgs) -> Result<u8> {
    if a.n == 0 || a.rows == 0 || a.scenarios == 0 {
        bail!("--n, --rows and --scenarios must be at least 1");
    }
    let cfg = GeneratorConfig { extra: a.extra, ..GeneratorConfig::new(a.n, a.rows, a.scenarios) };
    emit(a.output.as_deref(), &(write_problem(&random_problem(&cfg, a.seed)) + "\n"))?;
    Ok(0)
}
