use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hmclp::geometry::NormSpec;
use hmclp::io::{
    aggregate, emit_solution, emit_svg, generate_instance, parse_solution, read_instance, read_points_csv,
    run_benchmark, write_csv, BenchmarkGrid, DiscreteSpec, GeneratorSpec, InstanceDoc,
};
use hmclp::milp::{BnBStatus, SolveLimits};
use hmclp::model::{ContinuousType, DiscreteType, Instance};
use hmclp::solvers::{solve, Method, SolveOptions, StageMethod, StageOrder};
use hmclp::Error;

#[derive(Parser)]
#[command(name = "hmclp", version, about = "Exact solvers for hybrid discrete-continuous maximal covering location")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance.
    Solve(SolveArgs),
    /// Write a random instance document.
    Generate(GenerateArgs),
    /// Run methods over a set of instances and write CSV tables.
    Bench(BenchArgs),
    /// Draw a solved instance as SVG.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Bnc,
    Bips,
    Seq,
    Brute,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

/// `RADIUS:COUNT`, with the demand points as candidate sites.
#[derive(Clone, Debug)]
struct DiscreteArg(DiscreteSpec);

impl FromStr for DiscreteArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (r, c) = s.split_once(':').ok_or_else(|| format!("expected RADIUS:COUNT, got `{s}`"))?;
        let radius = r.parse().map_err(|_| format!("bad radius in `{s}`"))?;
        let count = c.parse().map_err(|_| format!("bad count in `{s}`"))?;
        Ok(DiscreteArg(DiscreteSpec { radius, count }))
    }
}

/// `NORM:RADIUS:COUNT`, for example `l2:0.1:2` or `l3:0.1:1`.
#[derive(Clone, Debug)]
struct ContinuousArg(ContinuousType);

impl FromStr for ContinuousArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [norm, r, c] = parts.as_slice() else {
            return Err(format!("expected NORM:RADIUS:COUNT, got `{s}`"));
        };
        let norm = NormSpec::from_str(norm).map_err(|e| e.to_string())?;
        let radius = r.parse().map_err(|_| format!("bad radius in `{s}`"))?;
        let count = c.parse().map_err(|_| format!("bad count in `{s}`"))?;
        Ok(ContinuousArg(ContinuousType::new(norm, radius, count)))
    }
}

/// `DISCRETE:CONTINUOUS` radius pair.
#[derive(Clone, Debug)]
struct RadiusPair(f64, f64);

impl FromStr for RadiusPair {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("expected R1:R2, got `{s}`"))?;
        Ok(RadiusPair(
            a.parse().map_err(|_| format!("bad radius in `{s}`"))?,
            b.parse().map_err(|_| format!("bad radius in `{s}`"))?,
        ))
    }
}

/// Facility types for sources that carry only points.
#[derive(Args)]
struct TypeArgs {
    /// Discrete type over the demand points, as RADIUS:COUNT (repeatable).
    #[arg(long = "discrete")]
    discrete: Vec<DiscreteArg>,
    /// Continuous type as NORM:RADIUS:COUNT (repeatable).
    #[arg(long = "continuous")]
    continuous: Vec<ContinuousArg>,
}

#[derive(Args)]
struct SolverArgs {
    /// Seconds before the search stops with its incumbent.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Relative optimality gap at which the search stops.
    #[arg(long, default_value_t = 1e-6)]
    gap: f64,
    /// Symmetry-breaking chain over identical continuous slots.
    #[arg(long, value_enum, default_value_t = Toggle::On)]
    symmetry: Toggle,
    /// Initial cut pool thresholds as multiples of each radius; pass an empty string to disable.
    #[arg(long, value_delimiter = ',', default_value = "0.75,1,1.25")]
    pool_eps: Vec<String>,
    /// Clique rows over pairwise incompatibilities.
    #[arg(long, value_enum, default_value_t = Toggle::On)]
    cliques: Toggle,
}

impl SolverArgs {
    fn options(&self) -> anyhow::Result<SolveOptions> {
        let mut limits = SolveLimits { gap: self.gap, ..SolveLimits::unlimited() };
        if let Some(t) = self.time_limit {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::Input(format!("time limit must be positive, got {t}")).into());
            }
            limits = limits.with_time_limit(t);
        }
        limits.validate()?;
        let pool_eps = self
            .pool_eps
            .iter()
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Input(format!("bad pool threshold `{s}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SolveOptions {
            limits,
            symmetry: self.symmetry == Toggle::On,
            pool_eps,
            cliques: self.cliques == Toggle::On,
            ..SolveOptions::default()
        })
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Instance document (JSON).
    #[arg(long, conflicts_with_all = ["points", "random"])]
    instance: Option<PathBuf>,
    /// CSV of `x, y[, weight]` rows; facility types come from --discrete/--continuous.
    #[arg(long, conflicts_with = "random")]
    points: Option<PathBuf>,
    /// Solve a random unit-square instance with this many points (see --seed).
    #[arg(long)]
    random: Option<usize>,
    /// Seed for --random.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    types: TypeArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Bnc)]
    method: MethodArg,
    /// Stage order for --method seq, e.g. `d0>c0+c1`; discrete types first by default.
    #[arg(long)]
    order: Option<String>,
    /// Exact method used inside each sequential stage.
    #[arg(long, value_enum, default_value_t = StageArg::Bnc)]
    stage_method: StageArg,
    #[command(flatten)]
    solver: SolverArgs,
    /// Where to write the solution document.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write an SVG drawing of the solution.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Bnc,
    Bips,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    n: usize,
    /// Dimension of the box [lo, hi]^dim.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    lo: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    hi: f64,
    #[command(flatten)]
    types: TypeArgs,
    /// Name stored in the document.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Instance documents to run; when absent a random grid is generated.
    #[arg(long, num_args = 1..)]
    instances: Vec<PathBuf>,
    /// Grid: numbers of demand points.
    #[arg(long, value_delimiter = ',', default_value = "50,100")]
    n: Vec<usize>,
    /// Grid: radius pairs as R1:R2 (discrete:continuous).
    #[arg(long, value_delimiter = ',', default_value = "0.3:0.2,0.4:0.25")]
    radii: Vec<RadiusPair>,
    /// Grid: discrete facility counts.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    p1: Vec<usize>,
    /// Grid: continuous facility counts.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    p2: Vec<usize>,
    /// Grid: number of seeded instances per cell (seeds 0..k).
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Methods to compare.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "bnc,bips")]
    methods: Vec<MethodArg>,
    /// Concurrent runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    solver: SolverArgs,
    /// Per-run CSV.
    #[arg(long)]
    rows: PathBuf,
    /// Aggregated CSV.
    #[arg(long)]
    summary: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn method_of(m: MethodArg, order: Option<&str>, instance: Option<&Instance>) -> anyhow::Result<Method> {
    Ok(match m {
        MethodArg::Bnc => Method::Bnc,
        MethodArg::Bips => Method::Bips,
        MethodArg::Brute => Method::Brute,
        MethodArg::Seq => Method::Sequential(match (order, instance) {
            (Some(o), _) => o.parse::<StageOrder>()?,
            (None, Some(i)) => StageOrder::discrete_first(i),
            (None, None) => bail!(Error::Input("--method seq needs --order here".into())),
        }),
    })
}

fn points_instance(demand: Vec<hmclp::model::DemandPoint>, types: &TypeArgs) -> hmclp::Result<Instance> {
    let sites: Vec<_> = demand.iter().map(|d| d.point.clone()).collect();
    let discrete = types
        .discrete
        .iter()
        .map(|d| DiscreteType::new(sites.clone(), vec![d.0.radius; sites.len()], d.0.count))
        .collect();
    let continuous = types.continuous.iter().map(|c| c.0.clone()).collect();
    Instance::new(2, demand, discrete, continuous)
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).map_err(Error::from).with_context(|| format!("writing {}", path.display()))
}

fn run_solve(args: SolveArgs) -> anyhow::Result<ExitCode> {
    let instance = if let Some(p) = &args.instance {
        read_instance(p)?
    } else if let Some(p) = &args.points {
        let file = fs::File::open(p).map_err(Error::from).with_context(|| format!("opening {}", p.display()))?;
        points_instance(read_points_csv(file)?, &args.types)?
    } else if let Some(n) = args.random {
        let spec = GeneratorSpec {
            discrete: args.types.discrete.iter().map(|d| d.0.clone()).collect(),
            continuous: args.types.continuous.iter().map(|c| c.0.clone()).collect(),
            ..GeneratorSpec::unit_square(args.seed, n)
        };
        generate_instance(&spec)?
    } else {
        bail!(Error::Input("one of --instance, --points or --random is required".into()));
    };
    let method = method_of(args.method, args.order.as_deref(), Some(&instance))?;
    let mut options = args.solver.options()?;
    options.stage_method = match args.stage_method {
        StageArg::Bnc => StageMethod::Bnc,
        StageArg::Bips => StageMethod::Bips,
    };
    let report = solve(&instance, &method, &options)?;
    let s = &report.stats;
    println!(
        "method={} status={} objective={} bound={} gap={:.3e} total={:.3}s nodes={} constraints={} lazy_cuts={}",
        report.method,
        report.status,
        report.objective(),
        report.bound,
        report.gap,
        s.total.as_secs_f64(),
        s.nodes,
        s.constraints,
        s.lazy_cuts
    );
    if let Some(p) = &args.out {
        write(p, &emit_solution(&instance, &report))?;
    }
    if let Some(p) = &args.svg {
        write(p, &emit_svg(&instance, &report.solution)?)?;
    }
    Ok(match report.status {
        BnBStatus::Optimal => ExitCode::SUCCESS,
        BnBStatus::Feasible | BnBStatus::Limit => ExitCode::from(2),
        BnBStatus::Infeasible => ExitCode::FAILURE,
    })
}

fn run_generate(args: GenerateArgs) -> anyhow::Result<ExitCode> {
    let spec = GeneratorSpec {
        seed: args.seed,
        n: args.n,
        lo: vec![args.lo; args.dim],
        hi: vec![args.hi; args.dim],
        discrete: args.types.discrete.iter().map(|d| d.0.clone()).collect(),
        continuous: args.types.continuous.iter().map(|c| c.0.clone()).collect(),
    };
    let mut instance = generate_instance(&spec)?;
    if let Some(name) = args.name {
        instance = instance.with_name(name);
    }
    let mut doc = InstanceDoc::from_instance(&instance);
    doc.seed = Some(args.seed);
    write(&args.out, &doc.to_json())?;
    Ok(ExitCode::SUCCESS)
}

fn run_bench(args: BenchArgs) -> anyhow::Result<ExitCode> {
    let instances = if args.instances.is_empty() {
        BenchmarkGrid {
            ns: args.n.clone(),
            radii: args.radii.iter().map(|r| (r.0, r.1)).collect(),
            p_discrete: args.p1.clone(),
            p_continuous: args.p2.clone(),
            seeds: (0..args.seeds).collect(),
        }
        .instances()?
    } else {
        args.instances
            .iter()
            .map(|p| {
                let inst = read_instance(p)?;
                let name = inst.name().map(str::to_string).unwrap_or_else(|| p.display().to_string());
                Ok((name, inst))
            })
            .collect::<hmclp::Result<Vec<_>>>()?
    };
    let methods = args.methods.iter().map(|&m| method_of(m, None, None)).collect::<anyhow::Result<Vec<_>>>()?;
    let options = args.solver.options()?;
    let rows = run_benchmark(&instances, &methods, &options, args.jobs)?;
    let create =
        |p: &Path| fs::File::create(p).map_err(Error::from).with_context(|| format!("creating {}", p.display()));
    write_csv(&rows, create(&args.rows)?)?;
    write_csv(&aggregate(&rows), create(&args.summary)?)?;
    let failed = rows.iter().filter(|r| r.status == "error").count();
    let unsolved = rows.iter().filter(|r| !r.solved()).count();
    println!("runs={} unsolved={unsolved} failed={failed}", rows.len());
    Ok(ExitCode::SUCCESS)
}

fn run_plot(args: PlotArgs) -> anyhow::Result<ExitCode> {
    let instance = read_instance(&args.instance)?;
    let text = fs::read_to_string(&args.solution)
        .map_err(Error::from)
        .with_context(|| format!("reading {}", args.solution.display()))?;
    let solution = parse_solution(&text, &instance)?;
    write(&args.out, &emit_svg(&instance, &solution)?)?;
    Ok(ExitCode::SUCCESS)
}

/// 3 for bad input, 4 for unsupported norm or dimension, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> ExitCode {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::Input(_) | Error::Validation(_) | Error::Parse { .. } | Error::Io(_) | Error::Csv(_)) => {
            ExitCode::from(3)
        }
        Some(Error::Capability(_)) => ExitCode::from(4),
        _ => ExitCode::FAILURE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Solve(a) => run_solve(a),
        Command::Generate(a) => run_generate(a),
        Command::Bench(a) => run_bench(a),
        Command::Plot(a) => run_plot(a),
    };
    result.unwrap_or_else(|e| {
        log::debug!("{e:?}");
        eprintln!("error: {e:#}");
        exit_code(&e)
    })
}
