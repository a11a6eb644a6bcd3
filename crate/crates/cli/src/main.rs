//! `fwdsc`: dominant set clustering from the command line.

mod manifest;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use fwdsc_core::data::{self, FeatureMatrix, GaussData};
use fwdsc_core::diagnostics::{self, BoundReport, ProgressReport};
use fwdsc_core::io as csvio;
use fwdsc_core::metrics::{self, Unassigned};
use fwdsc_core::multistart::{self, OverlapMeasure, SamplePlan, Sampler};
use fwdsc_core::solvers::DEFAULT_EPSILON;
use fwdsc_core::{
    driver, Error, ErrorClass, InitKind, PeelConfig, SimilarityMatrix, SolverKind, SolverVariant, StepRecord,
    SyntheticSpec,
};

use manifest::Manifest;

#[derive(Debug, Parser)]
#[command(name = "fwdsc", version, about = "Frank-Wolfe dominant set clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Peel-off clustering with one solver.
    Cluster(ClusterArgs),
    /// Multi-start clustering with sampled seeds.
    Multistart(MultistartArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Compare predicted labels against ground truth.
    Eval(EvalArgs),
    /// Check progress identities and gap bounds on a saved trace.
    TraceCheck(TraceCheckArgs),
    /// Build a similarity matrix from features and write it as CSV.
    Similarity(SimilarityArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SimilarityKind {
    Cosine,
    EuclideanMax,
    Minimax,
}

#[derive(Debug, Args, Serialize)]
struct InputArgs {
    /// Similarity matrix CSV.
    #[arg(long, conflicts_with = "features")]
    input: Option<PathBuf>,
    /// Feature CSV, one object per row.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Treat the feature file as `h,s,v` pixels.
    #[arg(long, requires = "features")]
    hsv: bool,
    #[arg(long, value_enum, default_value = "euclidean-max")]
    similarity: SimilarityKind,
    /// Added to cosine similarities when building them from features.
    #[arg(long, default_value_t = 1.0)]
    cosine_shift: f64,
}

#[derive(Debug, Args, Serialize)]
struct SolverArgs {
    /// fw, pfw-b, pfw-v, afw-b, afw-v or rd.
    #[arg(long, default_value = "fw")]
    solver: String,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = driver::DEFAULT_CUTOFF)]
    cutoff: f64,
    #[arg(long, default_value_t = 5)]
    max_clusters: usize,
    /// Override the solver's starting point.
    #[arg(long, value_enum)]
    init: Option<InitArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum InitArg {
    Barycenter,
    Vertex,
}

#[derive(Debug, Args, Serialize)]
struct OutputArgs {
    /// Labels file; `.csv` writes `object,label`, anything else JSON. Default: stdout JSON.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Run manifest JSON. Default: one line on stderr.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ClusterArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Added to the off-diagonal entries before each peel round.
    #[arg(long, default_value_t = 0.0)]
    shift: f64,
    #[arg(long)]
    post_assign: bool,
    /// Write the per-iteration trace CSV of every round.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SamplerArg {
    Uni,
    Dpp,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum OverlapArg {
    Candidate,
    Jaccard,
}

#[derive(Debug, Args, Serialize)]
struct MultistartArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Seeds per pass.
    #[arg(long, default_value_t = 4)]
    samples: usize,
    #[arg(long, value_enum, default_value = "uni")]
    sampler: SamplerArg,
    #[arg(long, default_value_t = 0.1)]
    overlap_threshold: f64,
    #[arg(long, value_enum, default_value = "candidate")]
    overlap: OverlapArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SynthKind {
    Block,
    Gauss,
}

#[derive(Debug, Args, Serialize)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "block")]
    kind: SynthKind,
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Clusters; the Gaussian mixture supports at most 4.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for `matrix.csv` or `features.csv`, plus `truth.csv`.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum UnassignedArg {
    Exclude,
    AsCluster,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, value_enum, default_value = "exclude")]
    unassigned: UnassignedArg,
    /// Drop objects with this truth label before scoring (e.g. background).
    #[arg(long)]
    ignore_truth: Option<usize>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct TraceCheckArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Similarity matrix the trace was produced on.
    #[arg(long)]
    matrix: PathBuf,
    /// Solver that produced the trace: fw, pfw or afw.
    #[arg(long, default_value = "fw")]
    solver: String,
    /// Starting support size; defaults to the first record's.
    #[arg(long)]
    support0: Option<usize>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SimilarityArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

/// Error with the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match (&e, e.class()) {
            (Error::InvalidConfig(_), _) => 1,
            (_, ErrorClass::Data) => 2,
            (_, ErrorClass::Numeric) => 3,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: 2, message: e.to_string() }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure { code: 2, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure { code: 2, message: format!("{}: {e}", path.display()) })
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure { code: 2, message: format!("{}: {e}", path.display()) })
}

fn load_similarity(args: &InputArgs, m: &mut Manifest) -> Result<SimilarityMatrix, Failure> {
    let started = Instant::now();
    let a = match (&args.input, &args.features) {
        (Some(path), _) => {
            m.digest(path)?;
            csvio::read_matrix(open(path)?)?
        }
        (None, Some(path)) => {
            m.digest(path)?;
            let features = if args.hsv {
                data::hsv_features(&csvio::read_pixels(open(path)?)?)?
            } else {
                csvio::read_features(open(path)?)?
            };
            similarity_from(&features, args)?
        }
        (None, None) => return Err(usage("one of --input or --features is required")),
    };
    m.phase("load", started);
    Ok(a)
}

fn similarity_from(f: &FeatureMatrix, args: &InputArgs) -> Result<SimilarityMatrix, Failure> {
    Ok(match args.similarity {
        SimilarityKind::Cosine => data::cosine_similarity(f, args.cosine_shift)?,
        SimilarityKind::EuclideanMax => data::max_transform(&data::pairwise_euclidean(f)),
        SimilarityKind::Minimax => {
            data::max_transform(&data::minimax_distances(&data::pairwise_euclidean(f)))
        }
    })
}

fn solver_config(args: &SolverArgs) -> Result<fwdsc_core::SolverConfig, Failure> {
    let variant: SolverVariant = args.solver.parse().map_err(|e: Error| usage(e.to_string()))?;
    let mut config = variant.config(args.max_iters).with_epsilon(args.epsilon);
    match args.init {
        Some(InitArg::Barycenter) => config.init = InitKind::Barycenter,
        Some(InitArg::Vertex) => config.init = InitKind::Vertex,
        None => {}
    }
    Ok(config)
}

#[derive(Serialize)]
struct LabelsOut<'a, E: Serialize> {
    labels: &'a [usize],
    k_found: usize,
    assignment_rate: f64,
    #[serde(flatten)]
    extra: E,
}

fn write_labels<E: Serialize>(out: &OutputArgs, labels: &[usize], k: usize, extra: E) -> Result<(), Failure> {
    let doc = LabelsOut { labels, k_found: k, assignment_rate: metrics::assignment_rate(labels), extra };
    match &out.output {
        Some(path) if path.extension().is_some_and(|e| e == "csv") => {
            csvio::write_labels(create(path)?, labels)?;
        }
        Some(path) => {
            let mut w = create(path)?;
            serde_json::to_writer_pretty(&mut w, &doc)?;
            writeln!(w)?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            serde_json::to_writer_pretty(&mut w, &doc)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

fn cmd_cluster(args: &ClusterArgs, m: &mut Manifest) -> Result<(), Failure> {
    m.seed(args.seed);
    let solver = solver_config(&args.solver)?;
    let a = load_similarity(&args.input, m)?;
    let mut config = PeelConfig::new(args.solver.max_clusters, solver);
    config.cutoff = args.solver.cutoff;
    config.shift = args.shift;
    config.post_assign = args.post_assign;

    let started = Instant::now();
    let result = driver::peel(&a, &config)?;
    m.phase("cluster", started);
    for r in &result.rounds {
        m.iterations(r.round, r.iterations, r.seconds);
    }

    if let Some(path) = &args.trace {
        csvio::write_trace(create(path)?, result.rounds.iter().map(|r| r.trace.as_slice()))?;
    }
    #[derive(Serialize)]
    struct Extra<'a> {
        rounds: &'a [driver::RoundInfo],
    }
    write_labels(&args.output, &result.labels, result.k_found(), Extra { rounds: &result.rounds })
}

fn cmd_multistart(args: &MultistartArgs, m: &mut Manifest) -> Result<(), Failure> {
    m.seed(args.seed);
    let solver = solver_config(&args.solver)?;
    let a = load_similarity(&args.input, m)?;
    let sampler = match args.sampler {
        SamplerArg::Uni => Sampler::Uni,
        SamplerArg::Dpp => Sampler::Dpp,
    };
    let mut plan = SamplePlan::new(args.samples, sampler, args.seed);
    plan.overlap_threshold = args.overlap_threshold;
    plan.overlap = match args.overlap {
        OverlapArg::Candidate => OverlapMeasure::Candidate,
        OverlapArg::Jaccard => OverlapMeasure::Jaccard,
    };

    let started = Instant::now();
    let out = multistart::multistart_cluster(&a, &plan, &solver, args.solver.max_clusters, args.solver.cutoff)?;
    m.phase("multistart", started);

    #[derive(Serialize)]
    struct Extra<'a> {
        passes: usize,
        log: &'a [multistart::PassInfo],
    }
    write_labels(
        &args.output,
        &out.result.labels,
        out.result.k_found(),
        Extra { passes: out.passes, log: &out.log },
    )
}

fn cmd_synth(args: &SynthArgs, m: &mut Manifest) -> Result<(), Failure> {
    m.seed(args.seed);
    std::fs::create_dir_all(&args.out_dir)?;
    let started = Instant::now();
    let truth_path = args.out_dir.join("truth.csv");
    match args.kind {
        SynthKind::Block => {
            let spec = SyntheticSpec::block(args.n, args.k.unwrap_or(5), args.noise, args.seed);
            let (a, truth) = data::block_noise_matrix(&spec)?;
            csvio::write_matrix(create(&args.out_dir.join("matrix.csv"))?, &a)?;
            csvio::write_labels(create(&truth_path)?, &truth)?;
        }
        SynthKind::Gauss => {
            let mut spec = SyntheticSpec::gauss(args.n, args.noise, args.seed);
            if let Some(k) = args.k {
                spec.k = k;
            }
            let GaussData { features, truth, .. } = data::gauss_dataset(&spec)?;
            csvio::write_features(create(&args.out_dir.join("features.csv"))?, &features)?;
            csvio::write_labels(create(&truth_path)?, &truth)?;
        }
    }
    m.phase("synth", started);
    Ok(())
}

fn cmd_eval(args: &EvalArgs, m: &mut Manifest) -> Result<(), Failure> {
    m.digest(&args.pred)?;
    m.digest(&args.truth)?;
    let mut pred = csvio::read_labels(open(&args.pred)?)?;
    let mut truth = csvio::read_labels(open(&args.truth)?)?;
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch { pred: pred.len(), truth: truth.len() }.into());
    }
    if let Some(skip) = args.ignore_truth {
        (pred, truth) = pred.iter().zip(&truth).filter(|(_, &t)| t != skip).unzip();
    }
    let mode = match args.unassigned {
        UnassignedArg::Exclude => Unassigned::Exclude,
        UnassignedArg::AsCluster => Unassigned::AsCluster,
    };
    let ari = metrics::ari_with(&pred, &truth, mode)?;
    let (homogeneity, completeness) = metrics::homogeneity_completeness(&pred, &truth, mode)?;
    let v = metrics::v_measure_with(&pred, &truth, mode)?;
    let doc = json!({
        "n": pred.len(),
        "assignment_rate": metrics::assignment_rate(&pred),
        "ari": ari,
        "v_measure": v,
        "homogeneity": homogeneity,
        "completeness": completeness,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}

#[derive(Serialize)]
struct RoundCheck {
    round: usize,
    steps: usize,
    progress: Option<ProgressReport>,
    identity_error: Option<String>,
    bound: Option<BoundReport>,
}

fn cmd_trace_check(args: &TraceCheckArgs, m: &mut Manifest) -> Result<(), Failure> {
    let kind = match args.solver.to_ascii_lowercase().as_str() {
        "fw" => SolverKind::Fw,
        "pfw" | "pfw-b" | "pfw-v" => SolverKind::Pfw,
        "afw" | "afw-b" | "afw-v" => SolverKind::Afw,
        "rd" => SolverKind::Rd,
        other => return Err(usage(format!("unknown solver '{other}'"))),
    };
    m.digest(&args.trace)?;
    m.digest(&args.matrix)?;
    let a = csvio::read_matrix(open(&args.matrix)?)?;
    let traces = csvio::read_trace(open(&args.trace)?)?;
    let (m_min, m_max) = a.offdiag_extremes()?;

    let started = Instant::now();
    let mut failed = false;
    let checks: Vec<RoundCheck> = traces
        .iter()
        .enumerate()
        .map(|(k, trace)| check_round(k + 1, trace, kind, &a, m_min, m_max, args.support0))
        .inspect(|c| failed |= c.identity_error.is_some())
        .collect();
    m.phase("check", started);
    println!("{}", serde_json::to_string_pretty(&checks)?);
    if failed {
        return Err(Failure { code: 3, message: "progress identity violated".into() });
    }
    Ok(())
}

fn check_round(
    round: usize,
    trace: &[StepRecord],
    kind: SolverKind,
    a: &SimilarityMatrix,
    m_min: f64,
    m_max: f64,
    support0: Option<usize>,
) -> RoundCheck {
    let (progress, identity_error) = match diagnostics::check_progress(trace, m_max) {
        Ok(p) => (Some(p), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let support0 = support0.or_else(|| trace.first().map(|r| r.support_before)).unwrap_or(1);
    let bound = diagnostics::theorem_bound(trace, kind, m_max, m_min, a.n(), support0).ok();
    RoundCheck { round, steps: trace.len(), progress, identity_error, bound }
}

fn cmd_similarity(args: &SimilarityArgs, m: &mut Manifest) -> Result<(), Failure> {
    let a = load_similarity(&args.input, m)?;
    csvio::write_matrix(create(&args.output)?, &a)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let (name, flags, manifest_path) = match &cli.command {
        Command::Cluster(a) => ("cluster", serde_json::to_value(a)?, a.output.manifest.as_deref()),
        Command::Multistart(a) => ("multistart", serde_json::to_value(a)?, a.output.manifest.as_deref()),
        Command::Synth(a) => ("synth", serde_json::to_value(a)?, a.manifest.as_deref()),
        Command::Eval(a) => ("eval", serde_json::to_value(a)?, a.manifest.as_deref()),
        Command::TraceCheck(a) => ("trace-check", serde_json::to_value(a)?, a.manifest.as_deref()),
        Command::Similarity(a) => ("similarity", serde_json::to_value(a)?, a.manifest.as_deref()),
    };
    let mut m = Manifest::new(name, flags);
    let outcome = match &cli.command {
        Command::Cluster(a) => cmd_cluster(a, &mut m),
        Command::Multistart(a) => cmd_multistart(a, &mut m),
        Command::Synth(a) => cmd_synth(a, &mut m),
        Command::Eval(a) => cmd_eval(a, &mut m),
        Command::TraceCheck(a) => cmd_trace_check(a, &mut m),
        Command::Similarity(a) => cmd_similarity(a, &mut m),
    };
    m.finish(outcome.as_ref().err().map(|f| f.message.as_str()));
    m.emit(manifest_path)?;
    outcome
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
