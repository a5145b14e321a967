use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use envyot::lab::{
    assign_batch, load_dual, run_sample_complexity, run_tradeoff, save_dual, write_complexity_csv,
    write_complexity_json, write_plotdata, write_sweep_csv, write_sweep_json, SampleComplexityConfig, SweepConfig,
};
use envyot::problem::UNCONSTRAINED;
use envyot::sources::from_csv;
use envyot::{solve_sgd, uniform_budget, ProblemSpec, SgdConfig, SourceSpec, TargetDistribution};

#[derive(Parser)]
#[command(name = "envyot", version, about = "Envy-constrained allocation via semi-discrete optimal transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a dual (allocation policy) by projected SGD and save it.
    Solve(SolveArgs),
    /// Envy/welfare trade-off over a list of budgets.
    Sweep(SweepArgs),
    /// Dual gap of the empirical maximizer as the sample size grows.
    #[command(name = "samplecomplexity")]
    SampleComplexity(ComplexityArgs),
    /// Assign every row of a CSV file with a saved dual.
    Assign(AssignArgs),
    /// Sample items and emit (x, recipient) rows for a scatter plot.
    Plotdata(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug)]
struct Floats(Vec<f64>);

fn parse_floats(s: &str) -> Result<Floats, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("not a number: {t:?}")))
        .collect::<Result<Vec<_>, _>>()
        .map(Floats)
}

fn parse_epsilon(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(e) if e >= 0.0 => Ok(e),
        _ => Err(format!("expected a non-negative number or `inf`, got {s:?}")),
    }
}

#[derive(Clone, Debug)]
struct Sizes(Vec<usize>);

fn parse_sizes(s: &str) -> Result<Sizes, String> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| format!("not a size: {t:?}")))
        .collect::<Result<Vec<_>, _>>()
        .map(Sizes)
}

#[derive(Args)]
struct SourceArgs {
    /// `uniform`, `affine` or `csv:<path>`.
    #[arg(long, default_value = "uniform")]
    source: String,
    /// Offset `b` of the affine source (defaults to the two-recipient example).
    #[arg(long, value_parser = parse_floats, allow_hyphen_values = true)]
    affine_b: Option<Floats>,
    /// Mixing matrix of the affine source, row-major 2 x n.
    #[arg(long, value_parser = parse_floats, allow_hyphen_values = true)]
    affine_m: Option<Floats>,
    /// Cycle through a CSV source instead of failing once it runs out.
    #[arg(long)]
    replay: bool,
    /// Number of recipients for the uniform source when no target is given.
    #[arg(long, default_value_t = 2)]
    recipients: usize,
    /// Target matching distribution `p1,...,pn` (default uniform).
    #[arg(long, value_parser = parse_floats)]
    target: Option<Floats>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Uniform envy budget; omit for the unconstrained problem.
    #[arg(long, value_parser = parse_epsilon)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 200_000)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rows drawn after training to report residuals.
    #[arg(long, default_value_t = 100_000)]
    eval_size: usize,
    /// Where to write the dual.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Budget to sweep; repeat for several. `inf` is always included.
    #[arg(long = "epsilon", value_parser = parse_epsilon, required = true)]
    epsilons: Vec<f64>,
    #[arg(long, default_value_t = 200_000)]
    iterations: usize,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    eval_size: usize,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct ComplexityArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Uniform envy budget of the studied problem.
    #[arg(long, value_parser = parse_epsilon, default_value = "0.1")]
    epsilon: f64,
    /// Sample sizes, strictly increasing.
    #[arg(long, value_parser = parse_sizes, default_value = "64,128,256,512,1024,2048,4096,8192")]
    sizes: Sizes,
    #[arg(long, default_value_t = 16)]
    trials: usize,
    /// SGD steps of the reference dual.
    #[arg(long = "iterations", default_value_t = 2_000_000)]
    reference_iterations: usize,
    #[arg(long, default_value_t = 500_000)]
    eval_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draw every sample size from its own stream instead of nested prefixes.
    #[arg(long)]
    independent: bool,
    /// Use the raw SGD reference without refining it on the evaluation set.
    #[arg(long)]
    raw_reference: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct AssignArgs {
    /// Saved dual file.
    #[arg(long)]
    dual: PathBuf,
    /// Items to assign (header x1,...,xn).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Target the dual was trained for; required when it has envy multipliers.
    #[arg(long, value_parser = parse_floats)]
    target: Option<Floats>,
}

#[derive(Args)]
struct PlotArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    dual: PathBuf,
    #[arg(long, default_value_t = 6000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Lib(envyot::Error),
}

impl From<envyot::Error> for Failure {
    fn from(e: envyot::Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

type Outcome<T> = Result<T, Failure>;

fn build_source(args: &SourceArgs) -> Outcome<SourceSpec> {
    let source = match args.source.as_str() {
        "uniform" => {
            let n = args.target.as_ref().map_or(args.recipients, |t| t.0.len());
            if n < 2 {
                return Err(Failure::Config("need at least two recipients".into()));
            }
            SourceSpec::uniform_box(n)
        }
        "affine" => match (&args.affine_b, &args.affine_m) {
            (None, None) => SourceSpec::artificial(),
            (Some(b), Some(m)) => {
                let n = b.0.len();
                if m.0.len() != 2 * n {
                    return Err(Failure::Config(format!(
                        "--affine-m needs 2 x {n} = {} values, got {}",
                        2 * n,
                        m.0.len()
                    )));
                }
                SourceSpec::affine_uniform(b.0.clone(), [m.0[..n].to_vec(), m.0[n..].to_vec()])?
            }
            _ => return Err(Failure::Config("--affine-b and --affine-m go together".into())),
        },
        other => match other.strip_prefix("csv:") {
            Some(path) => SourceSpec::csv(from_csv(path, None)?, args.replay),
            None => return Err(Failure::Config(format!("unknown source {other:?}"))),
        },
    };
    Ok(source)
}

fn build_target(target: Option<&Floats>, n: usize) -> Outcome<TargetDistribution> {
    let target = match target {
        Some(t) => TargetDistribution::new(t.0.clone())?,
        None => TargetDistribution::uniform(n)?,
    };
    if target.len() != n {
        return Err(Failure::Config(format!(
            "target has {} entries but the source has {n} columns",
            target.len()
        )));
    }
    Ok(target)
}

fn emit(out: Option<&PathBuf>, bytes: &[u8]) -> Outcome<()> {
    match out {
        Some(path) => std::fs::write(path, bytes)?,
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn solve(args: SolveArgs) -> Outcome<()> {
    let source = build_source(&args.source)?;
    let target = build_target(args.source.target.as_ref(), source.n())?;
    let budget = uniform_budget(args.epsilon.unwrap_or(UNCONSTRAINED), &target)?;
    let spec = ProblemSpec::new(target, budget, source.value_bound())?;
    let cfg = SgdConfig {
        iterations: args.iterations,
        seed: args.seed,
        eval_set_size: args.eval_size,
        ..SgdConfig::default()
    };
    let (dual, report) = solve_sgd(&source, &spec, &cfg)?;
    save_dual(&args.out, &dual)?;
    let mut json = serde_json::to_vec_pretty(&report).map_err(envyot::Error::from)?;
    json.push(b'\n');
    emit(None, &json)
}

fn sweep(args: SweepArgs) -> Outcome<()> {
    let source = build_source(&args.source)?;
    let target = build_target(args.source.target.as_ref(), source.n())?;
    let cfg = SweepConfig {
        iterations: args.iterations,
        trials: args.trials,
        master_seed: args.seed,
        eval_size: args.eval_size,
        ..SweepConfig::new(source, target, args.epsilons)
    };
    let records = run_tradeoff(&cfg)?;
    let mut buf = Vec::new();
    match args.format {
        Format::Csv => write_sweep_csv(&mut buf, &records)?,
        Format::Json => write_sweep_json(&mut buf, &records)?,
    }
    emit(args.out.as_ref(), &buf)
}

fn sample_complexity(args: ComplexityArgs) -> Outcome<()> {
    let source = build_source(&args.source)?;
    let target = build_target(args.source.target.as_ref(), source.n())?;
    let defaults = SampleComplexityConfig::new(source, target);
    let cfg = SampleComplexityConfig {
        epsilon: args.epsilon,
        sizes: args.sizes.0,
        trials: args.trials,
        reference_iterations: args.reference_iterations,
        eval_size: args.eval_size,
        master_seed: args.seed,
        nested: !args.independent,
        refine_reference: if args.raw_reference { None } else { defaults.refine_reference.clone() },
        ..defaults
    };
    let table = run_sample_complexity(&cfg)?;
    let mut buf = Vec::new();
    match args.format {
        Format::Csv => write_complexity_csv(&mut buf, &table)?,
        Format::Json => write_complexity_json(&mut buf, &table)?,
    }
    emit(args.out.as_ref(), &buf)
}

fn assign(args: AssignArgs) -> Outcome<()> {
    let target = args
        .target
        .map(|t| TargetDistribution::new(t.0))
        .transpose()?;
    let rows = assign_batch(&args.dual, &args.input, &args.out, target.as_ref())?;
    eprintln!("assigned {rows} rows");
    Ok(())
}

fn plotdata(args: PlotArgs) -> Outcome<()> {
    let source = build_source(&args.source)?;
    let dual = load_dual(&args.dual)?;
    let target = args
        .source
        .target
        .as_ref()
        .map(|t| build_target(Some(t), source.n()))
        .transpose()?;
    let mut buf = Vec::new();
    write_plotdata(&mut buf, &source, &dual, target.as_ref(), args.samples, args.seed)?;
    emit(args.out.as_ref(), &buf)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => sweep(a),
        Command::SampleComplexity(a) => sample_complexity(a),
        Command::Assign(a) => assign(a),
        Command::Plotdata(a) => plotdata(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 3 } else { 2 })
        }
    }
}
