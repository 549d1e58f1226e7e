use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dpsynth::bounds::{BoundInputs, BoundTable};
use dpsynth::estimators::{EstimatorKind, PreparedEstimator, Projection};
use dpsynth::graph::{answer_cut, cut_value, release_graph, CutQuery, EdgeConvention, Graph, VertexBase};
use dpsynth::harness::{
    ingest_csv, read_database, run_experiment, write_bounds_rows, write_database, BoundsRow, CsvSchema,
    ExperimentConfig,
};
use dpsynth::oracle::run_suite;
use dpsynth::queries::QuerySpec;
use dpsynth::{sample_synthetic, Database, Error, MechanismParams, RandomSource, Result};

#[derive(Parser)]
#[command(name = "dpsynth", version, about = "Differentially private synthetic database release")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Release a synthetic database.
    Release(ReleaseArgs),
    /// Answer a query from a synthetic database.
    Estimate(EstimateArgs),
    /// Print every bound for one parameter point as CSV.
    Bounds(BoundsArgs),
    /// Run an experiment configuration and write its results CSV.
    Experiment(ExperimentArgs),
    /// Release a graph and answer a cut query from the release.
    GraphCut(GraphCutArgs),
    /// Run the exact enumeration checks.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct DatabaseInput {
    /// Database file: the text format, or CSV when --schema is given.
    #[arg(long)]
    input: PathBuf,
    /// JSON CSV schema describing the input columns.
    #[arg(long)]
    schema: Option<PathBuf>,
}

impl DatabaseInput {
    fn load(&self) -> Result<Database> {
        match &self.schema {
            Some(schema) => {
                let schema: CsvSchema = serde_json::from_str(&read_text(schema)?)
                    .map_err(|e| Error::Config(format!("invalid schema: {e}")))?;
                ingest_csv(&self.input, &schema)
            }
            None => read_database(File::open(&self.input)?),
        }
    }
}

#[derive(Args)]
struct ReleaseArgs {
    #[command(flatten)]
    database: DatabaseInput,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Synthetic database in the text format.
    #[arg(long)]
    synthetic: PathBuf,
    /// JSON query specification.
    #[arg(long)]
    query: PathBuf,
    #[arg(long)]
    epsilon: f64,
    /// Project the estimate into the query's range.
    #[arg(long)]
    proper: bool,
    /// With --proper, project onto the exact achievable set.
    #[arg(long, requires = "proper")]
    exact_range: bool,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    n: f64,
    #[arg(long)]
    l: u32,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.0)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Lipschitz constant; adds the continuous bound.
    #[arg(long)]
    lipschitz: Option<f64>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment configuration.
    config: PathBuf,
    /// Overrides the configuration's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configuration's output path; stdout when neither is set.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GraphCutArgs {
    /// Edge list, one `i j` pair per line.
    #[arg(long)]
    edges: PathBuf,
    /// Cut file: vertex ids of S on one line, T on the next.
    #[arg(long)]
    cut: PathBuf,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Vertex count; defaults to one past the largest id.
    #[arg(long)]
    vertices: Option<usize>,
    /// Vertex ids start at 1.
    #[arg(long)]
    one_based: bool,
    /// Each line is a single directed pair.
    #[arg(long)]
    directed: bool,
    /// Also print the true cut value.
    #[arg(long)]
    show_truth: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn read_text(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)?.read_to_string(&mut s)?;
    Ok(s)
}

fn output_writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn release(args: ReleaseArgs) -> Result<bool> {
    let x = args.database.load()?;
    let params = MechanismParams::new(args.epsilon, x.universe())?;
    let y = sample_synthetic(&x, &params, &RandomSource::from_seed(args.seed))?;
    let mut w = output_writer(args.output.as_deref())?;
    write_database(&mut w, &y)?;
    w.flush()?;
    Ok(true)
}

fn estimate(args: EstimateArgs) -> Result<bool> {
    let y = read_database(File::open(&args.synthetic)?)?;
    let spec = QuerySpec::from_json(&read_text(&args.query)?)?;
    let q = spec.build(y.universe(), y.len())?;
    let params = MechanismParams::new(args.epsilon, y.universe())?;
    let kind = match (args.proper, args.exact_range) {
        (false, _) => EstimatorKind::Unbiased,
        (true, false) => EstimatorKind::Proper(Projection::IntervalClamp),
        (true, true) => EstimatorKind::Proper(Projection::ExactRange),
    };
    let value = PreparedEstimator::new(&q, &params, kind)?.estimate(&y)?;
    println!("{value}");
    Ok(true)
}

fn bounds(args: BoundsArgs) -> Result<bool> {
    let mut inputs = BoundInputs::new(args.n, args.l, args.epsilon, args.a, args.b, args.c)?;
    if let Some(lip) = args.lipschitz {
        inputs = inputs.with_lipschitz(lip)?;
    }
    let row = BoundsRow {
        table: BoundTable::evaluate(&inputs),
        inputs,
    };
    write_bounds_rows(io::stdout().lock(), &[row])?;
    Ok(true)
}

fn experiment(args: ExperimentArgs) -> Result<bool> {
    let mut config = ExperimentConfig::from_json(&read_text(&args.config)?)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.output.is_some() {
        config.output = args.output;
    }
    let out = run_experiment(&config)?;
    let mut w = output_writer(config.output.as_deref())?;
    out.write_csv(&mut w)?;
    w.flush()?;
    let summary = out.summary();
    if !summary.is_empty() {
        eprintln!("{summary}");
    }
    Ok(true)
}

fn graph_cut(args: GraphCutArgs) -> Result<bool> {
    let base = if args.one_based { VertexBase::One } else { VertexBase::Zero };
    let convention = if args.directed {
        EdgeConvention::Directed
    } else {
        EdgeConvention::Symmetric
    };
    let g = Graph::from_edge_list(File::open(&args.edges)?, base, convention, args.vertices)?;
    let q = CutQuery::from_text(&read_text(&args.cut)?, g.vertex_count(), base)?;
    let y = release_graph(&g, args.epsilon, &RandomSource::from_seed(args.seed))?;
    let answer = answer_cut(&y, &q, args.epsilon)?;
    if args.show_truth {
        println!("{answer},{}", cut_value(&g, &q)?);
    } else {
        println!("{answer}");
    }
    Ok(true)
}

fn verify(args: VerifyArgs) -> Result<bool> {
    let results = run_suite(args.seed)?;
    let mut all = true;
    for r in &results {
        all &= r.passed;
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    Ok(all)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Release(a) => release(a),
        Command::Estimate(a) => estimate(a),
        Command::Bounds(a) => bounds(a),
        Command::Experiment(a) => experiment(a),
        Command::GraphCut(a) => graph_cut(a),
        Command::Verify(a) => verify(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
