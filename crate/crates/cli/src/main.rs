use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use matfun_probing::coloring::{
    banded_coloring, banded_coloring_ordered, greedy_coloring, lattice_coloring, Coloring, LatticeSpec,
};
use matfun_probing::graph::{cuthill_mckee, pattern_graph};
use matfun_probing::harness::{
    generate_matrix, run_experiment, run_single, write_csv, ErrorNorm, ExperimentConfig, MatrixSpec, ModelConfig,
    PreparedMatrix, SweepConfig,
};
use matfun_probing::mtx::{read_matrix_market, write_matrix_market};
use matfun_probing::sparse::SparseMatrix;
use matfun_probing::{Error, Result};

#[derive(Parser)]
#[command(name = "mfprobe", version, about = "Probing estimates of matrix-function traces and sparse approximations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Color the sparsity graph and print `node,color` rows.
    Color(ColorArgs),
    /// Estimate tr(f(A)) and print one CSV row.
    Trace(RunArgs),
    /// Build the sparse approximation f(A)^[d] and print one CSV row.
    SparseApprox {
        #[command(flatten)]
        run: RunArgs,
        /// Matrix Market file receiving f(A)^[d].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a TOML-configured sweep and print CSV.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Matrix Market file.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Generated family, e.g. `tridiag:1000`, `laplace2d:32`, `gmrf:2000:20`.
    #[arg(long)]
    family: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Greedy,
    Banded,
    Lattice,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Order {
    Natural,
    Rcm,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Directed,
    Undirected,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Explicit,
    InverseHpd,
    InverseSqrtPreset,
    Fit,
    FitEnvelope,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NormArg {
    Frobenius,
    One,
    Two,
    Max,
}

#[derive(Args)]
struct ColoringArgs {
    #[arg(long, value_enum, default_value = "greedy")]
    method: Method,
    /// Bandwidth for the banded coloring; defaults to the semi-bandwidth.
    #[arg(long)]
    beta: Option<usize>,
    /// Lattice extents, e.g. `32x32`.
    #[arg(long, value_parser = parse_dims)]
    dims: Option<Dims>,
    #[arg(long, value_enum, default_value = "natural")]
    order: Order,
}

#[derive(Args)]
struct ColorArgs {
    #[command(flatten)]
    source: Source,
    /// Coloring distance.
    #[arg(long)]
    distance: usize,
    #[command(flatten)]
    coloring: ColoringArgs,
    /// Graph whose distances the coloring respects.
    #[arg(long, value_enum, default_value = "undirected")]
    mode: Mode,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// inv | invsqrt | log | exp
    #[arg(long)]
    function: String,
    /// Probing distance d.
    #[arg(long)]
    distance: usize,
    /// `exact`, `auto` or a Krylov step count.
    #[arg(long, default_value = "auto")]
    steps: String,
    #[command(flatten)]
    coloring: ColoringArgs,
    /// Bound kind: generic | banded | lattice | poly | krylov, or a full kind name.
    #[arg(long)]
    bound: Option<String>,
    #[arg(long, value_enum, default_value = "explicit")]
    model: ModelKind,
    /// Decay constant C of the explicit model
    #[arg(long = "C")]
    c: Option<f64>,
    /// Decay rate q in [0, 1) of the explicit model
    #[arg(long)]
    q: Option<f64>,
    /// Crouzeix constant: 1 for normal matrices, 1 + √2 otherwise
    #[arg(long = "K")]
    k: Option<f64>,
    /// Spectrum lower end for the `inverse-hpd` model.
    #[arg(long)]
    a: Option<f64>,
    /// Spectrum upper end for the `inverse-hpd` model.
    #[arg(long)]
    b: Option<f64>,
    /// The explicit decay model stems from a polynomial approximation property.
    #[arg(long)]
    polynomial: bool,
    /// Error norm for sparse approximations.
    #[arg(long, value_enum)]
    norm: Option<NormArg>,
    /// Override Hermitian detection.
    #[arg(long)]
    hermitian: Option<bool>,
    /// Largest n for which the dense reference f(A) is computed
    #[arg(long)]
    oracle_cap: Option<usize>,
    /// Fill the `seconds` column.
    #[arg(long)]
    timing: bool,
}

#[derive(Clone)]
struct Dims(Vec<usize>);

fn parse_dims(s: &str) -> std::result::Result<Dims, String> {
    s.split(['x', 'X', ','])
        .map(|t| t.trim().parse::<usize>().map_err(|_| format!("bad extent '{t}' in '{s}'")))
        .collect::<std::result::Result<_, _>>()
        .map(Dims)
}

/// Label, matrix, Hermitian hint and lattice extents.
type Loaded = (String, SparseMatrix, Option<bool>, Option<Vec<usize>>);

fn load(source: &Source) -> Result<Loaded> {
    if let Some(path) = &source.matrix {
        let a = read_matrix_market(path)?;
        let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        return Ok((label, a, None, None));
    }
    let family = source.family.as_deref().expect("clap enforces one source");
    let spec: MatrixSpec = family.parse()?;
    let a = generate_matrix(&spec)?;
    Ok((spec.to_string(), a, Some(spec.is_hermitian()), spec.lattice_dims()))
}

fn color(args: &ColorArgs) -> Result<()> {
    let (_, a, _, family_dims) = load(&args.source)?;
    let d = args.distance;
    let opts = &args.coloring;
    let g = pattern_graph(&a, args.mode == Mode::Directed)?;
    let col: Coloring = match (opts.method, opts.order) {
        (Method::Greedy, Order::Natural) => greedy_coloring(&g, d, None)?,
        (Method::Greedy, Order::Rcm) => {
            let order = cuthill_mckee(&pattern_graph(&a, false)?).order;
            greedy_coloring(&g, d, Some(&order))?
        }
        (Method::Banded, Order::Natural) => {
            let bw = a.semi_bandwidth();
            let beta = opts.beta.unwrap_or(bw).max(1);
            if beta < bw {
                return Err(Error::InvalidArgument(format!(
                    "bandwidth {beta} is below the matrix semi-bandwidth {bw}"
                )));
            }
            banded_coloring(a.n_rows(), beta, d)?
        }
        (Method::Banded, Order::Rcm) => {
            let r = cuthill_mckee(&pattern_graph(&a, false)?);
            let beta = opts.beta.unwrap_or(r.bandwidth_after).max(1);
            if beta < r.bandwidth_after {
                return Err(Error::InvalidArgument(format!(
                    "bandwidth {beta} is below the reordered bandwidth {}",
                    r.bandwidth_after
                )));
            }
            banded_coloring_ordered(&r.order, beta, d)?
        }
        (Method::Lattice, Order::Natural) => {
            let dims = opts
                .dims
                .clone()
                .map(|d| d.0)
                .or(family_dims)
                .ok_or_else(|| Error::InvalidArgument("lattice coloring needs --dims".into()))?;
            let spec = LatticeSpec::new(dims)?;
            if spec.num_nodes() != a.n_rows() {
                return Err(Error::DimensionMismatch(format!(
                    "lattice has {} nodes, matrix has {}",
                    spec.num_nodes(),
                    a.n_rows()
                )));
            }
            lattice_coloring(&spec, d)?
        }
        (Method::Lattice, Order::Rcm) => {
            return Err(Error::InvalidArgument("lattice coloring uses the natural grid order".into()))
        }
    };
    let mut out = io::stdout().lock();
    writeln!(out, "# colors={} distance={} n={}", col.num_colors(), d, col.n())?;
    writeln!(out, "node,color")?;
    for (i, c) in col.color_of().iter().enumerate() {
        writeln!(out, "{i},{}", c + 1)?;
    }
    Ok(())
}

fn coloring_name(opts: &ColoringArgs) -> Result<&'static str> {
    Ok(match (opts.method, opts.order) {
        (Method::Greedy, Order::Natural) => "greedy",
        (Method::Greedy, Order::Rcm) => "greedy-rcm",
        (Method::Banded, Order::Natural) => "banded",
        (Method::Banded, Order::Rcm) => {
            if opts.beta.is_some() {
                log::warn!("--beta is ignored with --order rcm; the reordered bandwidth is used");
            }
            "rcm-banded"
        }
        (Method::Lattice, Order::Natural) => "lattice",
        (Method::Lattice, Order::Rcm) => {
            return Err(Error::InvalidArgument("lattice coloring uses the natural grid order".into()))
        }
    })
}

fn model_config(args: &RunArgs) -> Option<ModelConfig> {
    let explicit = args.c.is_some() || args.q.is_some();
    if args.bound.is_none() && !explicit && args.model == ModelKind::Explicit {
        return None;
    }
    let kind = match args.model {
        ModelKind::Explicit => "explicit",
        ModelKind::InverseHpd => "inverse_hpd",
        ModelKind::InverseSqrtPreset => "inverse_sqrt_preset",
        ModelKind::Fit => "fit",
        ModelKind::FitEnvelope => "fit_envelope",
    };
    Some(ModelConfig {
        kind: kind.into(),
        a: args.a,
        b: args.b,
        c: args.c,
        q: args.q,
        k: args.k,
        polynomial: args.polynomial,
        normal: args.k.is_none_or(|k| k <= 1.0),
        column: None,
    })
}

fn run(args: &RunArgs, task: &str, out: Option<&PathBuf>) -> Result<()> {
    let (label, a, hermitian, dims) = load(&args.source)?;
    let cfg = ExperimentConfig {
        family: label.clone(),
        function: args.function.clone(),
        task: task.into(),
        n: Some(a.n_rows()),
        d: args.distance,
        steps: args.steps.clone(),
        coloring: coloring_name(&args.coloring)?.into(),
        beta: args.coloring.beta,
        dims: args.coloring.dims.clone().map(|d| d.0),
        bound: args.bound.clone(),
        model: model_config(args),
        norm: args.norm.map(|n| match n {
            NormArg::Frobenius => ErrorNorm::Frobenius,
            NormArg::One => ErrorNorm::One,
            NormArg::Two => ErrorNorm::Two,
            NormArg::Max => ErrorNorm::Max,
        }),
        hermitian: args.hermitian,
        record_timing: args.timing,
        oracle_cap: args.oracle_cap,
        sweep: SweepConfig { variable: "d".into(), values: vec![args.distance] },
    };
    let f = cfg.function.parse()?;
    let prep = PreparedMatrix::new(label, a, hermitian, dims, &cfg, &f)?;
    let point = run_single(&cfg, &prep)?;
    if let (Some(path), Some(m)) = (out, &point.approximation) {
        write_matrix_market(m, path)?;
    }
    write_csv(&[point.record], &mut io::stdout().lock())
}

fn experiment(path: &PathBuf) -> Result<()> {
    let text = fs::read_to_string(path)?;
    let cfg = ExperimentConfig::from_toml_str(&text)?;
    let records = run_experiment(&cfg)?;
    write_csv(&records, &mut io::stdout().lock())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Color(args) => color(args),
        Command::Trace(args) => run(args, "trace", None),
        Command::SparseApprox { run: args, out } => run(args, "sparse", out.as_ref()),
        Command::Experiment { config } => experiment(config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_argument_error() { 2 } else { 3 })
        }
    }
}
