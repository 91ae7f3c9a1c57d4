//! Command-line front end. [`run`] parses arguments, executes one command and
//! returns the process exit code: 0 success, 1 input error, 2 configuration
//! error, 3 enumeration cap hit.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;

use crate::analysis::{
    bins_around, correlation_experiment, gram_from_vectors, gram_matrix, norm_drift_experiment,
    orthogonality_experiment, synthetic_pairs, timing_benchmark, AnalysisError, BenchConfig, CorrelationConfig,
    ExperimentReport, GramMatrix, KernelChoice, SynthConfig, TreeGenerator,
};
use crate::config::{ConfigError, DtFile, DtHeader, DtRecord, RunConfig, DEFAULT_SEED};
use crate::dtk::{DtkError, WeightConvention, DEFAULT_FRAGMENT_CAP, DEFAULT_LAMBDA};
use crate::embedding::{dot, CompositionKind, CompositionSpec, EmbeddingError, DEFAULT_DIM};
use crate::format::format_sig;
use crate::tk::{tk_exact, tk_fast, tk_oracle};
use crate::tree::{parse_corpus, parse_tree, Tree};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Guard(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Config(_) => 2,
            CliError::Guard(_) => 3,
        }
    }
}

impl From<DtkError> for CliError {
    fn from(e: DtkError) -> Self {
        match e {
            DtkError::FragmentCapExceeded { .. } => CliError::Guard(e.to_string()),
            DtkError::InvalidLambda(_)
            | DtkError::ProvenanceMismatch { .. }
            | DtkError::Embedding(EmbeddingError::ZeroDimension | EmbeddingError::UnsupportedDimension(_)) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Dtk(inner) => inner.into(),
            AnalysisError::InvalidParameter(_) => CliError::Config(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Malformed(_) => CliError::Input(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dtk", version, about = "Distributed tree kernels: encode parse trees as vectors and compare them")]
pub struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Vector dimension d; powers of two use FFT convolution
    #[arg(long, global = true, default_value_t = DEFAULT_DIM)]
    dim: usize,
    /// Decay factor λ, in (0, 1]
    #[arg(long, global = true, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    /// Composition operator
    #[arg(long, global = true, value_enum, default_value_t = CompositionArg::Conv)]
    composition: CompositionArg,
    /// Master seed for the lexicon, permutations and γ
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Fragment weighting convention
    #[arg(long, global = true, value_enum, default_value_t = WeightsArg::Recursion)]
    weights: WeightsArg,
    /// Report λ·DTK, on the exact kernel's scale
    #[arg(long, global = true)]
    cd_compatible: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let cfg = RunConfig {
            dim: self.dim,
            lambda: self.lambda,
            composition: self.composition.into(),
            seed: self.seed,
            weights: self.weights.into(),
            cd_compatible: self.cd_compatible,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CompositionArg {
    /// Shuffled circular convolution
    Conv,
    /// Shuffled γ-scaled element-wise product
    Prod,
}

impl From<CompositionArg> for CompositionKind {
    fn from(c: CompositionArg) -> Self {
        match c {
            CompositionArg::Conv => CompositionKind::ShuffledConvolution,
            CompositionArg::Prod => CompositionKind::ShuffledProduct,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WeightsArg {
    /// λ^((P-1)/2) for P productions; linear-time encoding
    Recursion,
    /// λ^((N-1)/2) for N fragment nodes; encodes by enumeration
    NodeCount,
}

impl From<WeightsArg> for WeightConvention {
    fn from(w: WeightsArg) -> Self {
        match w {
            WeightsArg::Recursion => WeightConvention::Recursion,
            WeightsArg::NodeCount => WeightConvention::NodeCount,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    /// Dot product of distributed trees
    Dtk,
    /// Exact kernel, full quadratic table
    Tk,
    /// Exact kernel over matching productions only
    TkFast,
    /// Explicit fragment enumeration
    Oracle,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KernelArg {
    Dtk,
    Tk,
    DtkNormalized,
    TkNormalized,
}

impl From<KernelArg> for KernelChoice {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Dtk => KernelChoice::Dtk,
            KernelArg::Tk => KernelChoice::Tk,
            KernelArg::DtkNormalized => KernelChoice::DtkNormalized,
            KernelArg::TkNormalized => KernelChoice::TkNormalized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct CorpusArgs {
    /// Corpus file, one bracketed tree per line ('#' starts a comment line)
    input: Option<PathBuf>,
    /// Use N generated trees (10 to 15 nodes, seeded by --seed) instead of a file
    #[arg(long, value_name = "N")]
    synthetic: Option<usize>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Write here (plus a <FILE>.config.json sidecar) instead of standard output
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check that every line of a corpus file parses
    Parse {
        input: PathBuf,
    },
    /// Encode a corpus into a distributed-tree file
    Dt {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Destination file (JSON lines: header, then one record per tree)
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Evaluate a kernel on two trees
    Kernel {
        tree1: String,
        tree2: String,
        #[arg(long, value_enum, default_value_t = MethodArg::Dtk)]
        method: MethodArg,
    },
    /// Pairwise kernel matrix of a corpus (CSV by default)
    Gram {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, value_enum, default_value_t = KernelArg::Dtk)]
        kernel: KernelArg,
        /// Read DTK vectors from a file written by `dt` under the same config
        #[arg(long, value_name = "FILE")]
        from_dt: Option<PathBuf>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Spearman correlation between DTK and the exact kernel, per λ (JSON by default)
    Correlate {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// λ values to evaluate
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6,0.8,1.0")]
        lambdas: Vec<f64>,
        /// Pairs sampled when the corpus has more
        #[arg(long, default_value_t = 500)]
        max_pairs: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Norm drift and near-orthogonality of the composition operator (JSON by default)
    Props {
        /// Longest composition chain
        #[arg(long, default_value_t = 20)]
        max_k: usize,
        /// Random draws per chain length
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Time DTK against the exact kernels by pair size (JSON by default)
    Bench {
        /// Pair file: consecutive lines form a pair
        #[arg(conflicts_with = "pairs_per_bin")]
        input: Option<PathBuf>,
        /// Generated pairs per size bin
        #[arg(long, default_value_t = 5)]
        pairs_per_bin: usize,
        /// Target total node counts of the generated bins
        #[arg(long, value_delimiter = ',', default_value = "20,40,100,200,400")]
        totals: Vec<usize>,
        #[arg(long, default_value_t = 30)]
        repetitions: usize,
        #[arg(long, default_value_t = 5)]
        warmup: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let cfg = cli.config.resolve()?;
    match cli.command {
        Command::Parse { input } => cmd_parse(&input),
        Command::Dt { corpus, output } => cmd_dt(&cfg, &corpus, &output),
        Command::Kernel { tree1, tree2, method } => cmd_kernel(&cfg, &tree1, &tree2, method),
        Command::Gram { corpus, kernel, from_dt, out } => cmd_gram(&cfg, &corpus, kernel.into(), from_dt.as_deref(), &out),
        Command::Correlate { corpus, lambdas, max_pairs, out } => cmd_correlate(&cfg, &corpus, lambdas, max_pairs, &out),
        Command::Props { max_k, samples, out } => cmd_props(&cfg, max_k, samples, &out),
        Command::Bench { input, pairs_per_bin, totals, repetitions, warmup, out } => {
            let bench = BenchConfig { warmup, repetitions, ..BenchConfig::default() };
            cmd_bench(&cfg, input.as_deref(), pairs_per_bin, &totals, &bench, &out)
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

/// Trees with their 1-based source lines.
fn load_corpus(cfg: &RunConfig, corpus: &CorpusArgs) -> Result<(Vec<usize>, Vec<Tree>), CliError> {
    if let Some(n) = corpus.synthetic {
        let generator = TreeGenerator::new(SynthConfig { seed: cfg.seed, ..SynthConfig::default() });
        return Ok(((1..=n).collect(), generator.generate(n)));
    }
    let path = corpus.input.as_deref().expect("clap requires an input or --synthetic");
    let (trees, errors) = parse_corpus(&read_file(path)?);
    if !errors.is_empty() {
        let lines: Vec<String> = errors.iter().map(|e| format!("line {}: {}", e.line, e.error)).collect();
        return Err(CliError::Input(format!("{} unparsable line(s)\n{}", errors.len(), lines.join("\n"))));
    }
    Ok(trees.into_iter().unzip())
}

/// Writes `content` to `--output` with a config sidecar, or to stdout.
fn emit(cfg: &RunConfig, out: Option<&Path>, command: &str, params: serde_json::Value, content: &str) -> Result<(), CliError> {
    match out {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => {
            write_file(path, content)?;
            let sidecar = json!({
                "command": command,
                "config": cfg,
                "config_hash": cfg.config_hash(),
                "params": params,
            });
            let mut side = path.as_os_str().to_owned();
            side.push(".config.json");
            write_file(Path::new(&side), &(serde_json::to_string_pretty(&sidecar).expect("sidecar serializes") + "\n"))
        }
    }
}

fn reports_to(format: FormatArg, reports: &[ExperimentReport]) -> String {
    match format {
        FormatArg::Json => {
            if let [one] = reports {
                one.to_json() + "\n"
            } else {
                serde_json::to_string_pretty(reports).expect("reports serialize") + "\n"
            }
        }
        FormatArg::Csv => {
            let mut out = String::new();
            for (i, r) in reports.iter().enumerate() {
                let csv = r.to_csv();
                // One header for the whole file.
                out.push_str(if i == 0 { &csv } else { csv.split_once('\n').map_or("", |(_, rest)| rest) });
            }
            out
        }
    }
}

fn cmd_parse(input: &Path) -> Result<(), CliError> {
    let (trees, errors) = parse_corpus(&read_file(input)?);
    for e in &errors {
        eprintln!("line {}: {}", e.line, e.error);
    }
    println!("{} trees, {} errors", trees.len(), errors.len());
    if errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::Input(format!("{} unparsable line(s) in {}", errors.len(), input.display())))
    }
}

fn cmd_dt(cfg: &RunConfig, corpus: &CorpusArgs, output: &Path) -> Result<(), CliError> {
    let (lines, trees) = load_corpus(cfg, corpus)?;
    let encoder = cfg.encoder()?;
    let vectors = cfg.encode_corpus(&encoder, &trees)?;
    let records = vectors
        .into_iter()
        .zip(lines)
        .enumerate()
        .map(|(index, (vector, line))| DtRecord { index, line, vector })
        .collect();
    let file = DtFile { header: DtHeader::new(cfg), records };
    emit(cfg, Some(output), "dt", json!({ "trees": trees.len() }), &file.to_json_lines())
}

fn cmd_kernel(cfg: &RunConfig, a: &str, b: &str, method: MethodArg) -> Result<(), CliError> {
    let parse = |s: &str| parse_tree(s).map_err(|e| CliError::Input(format!("cannot parse {s:?}: {e}")));
    let (t1, t2) = (parse(a)?, parse(b)?);
    let value = match method {
        MethodArg::Dtk => {
            let encoder = cfg.encoder()?;
            let v1 = cfg.encode(&encoder, &t1)?;
            let v2 = cfg.encode(&encoder, &t2)?;
            cfg.dtk_scale() * dot(v1.as_slice(), v2.as_slice())
        }
        MethodArg::Tk => tk_exact(&t1, &t2, cfg.lambda)?,
        MethodArg::TkFast => tk_fast(&t1, &t2, cfg.lambda)?,
        MethodArg::Oracle => tk_oracle(&t1, &t2, cfg.lambda, DEFAULT_FRAGMENT_CAP)?,
    };
    println!("{}", format_sig(value));
    Ok(())
}

fn cmd_gram(
    cfg: &RunConfig,
    corpus: &CorpusArgs,
    kernel: KernelChoice,
    from_dt: Option<&Path>,
    out: &OutputArgs,
) -> Result<(), CliError> {
    let (lines, trees) = load_corpus(cfg, corpus)?;
    let gram_config = json!({ "kernel": kernel, "run": cfg, "config_hash": cfg.config_hash() });
    let gram: GramMatrix = match kernel {
        KernelChoice::Dtk | KernelChoice::DtkNormalized => {
            let vectors = match from_dt {
                Some(path) => {
                    let file = DtFile::parse(&read_file(path)?, Some(cfg))?;
                    if file.records.len() != trees.len() {
                        return Err(CliError::Input(format!(
                            "{} holds {} vectors for {} trees",
                            path.display(),
                            file.records.len(),
                            trees.len()
                        )));
                    }
                    file.records.into_iter().map(|r| r.vector).collect()
                }
                None => cfg.encode_corpus(&cfg.encoder()?, &trees)?,
            };
            let g = gram_from_vectors(&vectors, kernel, gram_config)?;
            if kernel == KernelChoice::Dtk {
                g.scaled(cfg.dtk_scale())
            } else {
                g
            }
        }
        KernelChoice::Tk | KernelChoice::TkNormalized => {
            if from_dt.is_some() {
                return Err(CliError::Config(format!("--from-dt only applies to DTK kernels, not {kernel}")));
            }
            let mut g = gram_matrix(&trees, kernel, &cfg.encoder()?)?;
            g.config = gram_config;
            g
        }
    };
    let gram = gram.with_ids(lines.iter().map(|l| format!("line{l}")).collect());
    let content = match out.format.unwrap_or(FormatArg::Csv) {
        FormatArg::Csv => gram.to_csv(),
        FormatArg::Json => serde_json::to_string_pretty(&gram).expect("gram serializes") + "\n",
    };
    emit(cfg, out.output.as_deref(), "gram", json!({ "kernel": kernel, "trees": trees.len() }), &content)
}

fn cmd_correlate(
    cfg: &RunConfig,
    corpus: &CorpusArgs,
    lambdas: Vec<f64>,
    max_pairs: usize,
    out: &OutputArgs,
) -> Result<(), CliError> {
    for &l in &lambdas {
        RunConfig { lambda: l, ..cfg.clone() }.validate()?;
    }
    let (_, trees) = load_corpus(cfg, corpus)?;
    let cc = CorrelationConfig { lambdas, composition: cfg.composition, dim: cfg.dim, seed: cfg.seed, max_pairs };
    let report = correlation_experiment(&trees, &cc)?;
    let params = json!({ "lambdas": cc.lambdas, "max_pairs": max_pairs, "trees": trees.len() });
    emit(cfg, out.output.as_deref(), "correlate", params, &reports_to(out.format.unwrap_or(FormatArg::Json), &[report]))
}

fn cmd_props(cfg: &RunConfig, max_k: usize, samples: usize, out: &OutputArgs) -> Result<(), CliError> {
    let spec = CompositionSpec::new(cfg.composition, cfg.dim, cfg.seed).map_err(DtkError::from)?;
    let reports = [
        norm_drift_experiment(max_k, samples, &spec)?,
        orthogonality_experiment(max_k, samples, &spec)?,
    ];
    let params = json!({ "max_k": max_k, "samples": samples });
    emit(cfg, out.output.as_deref(), "props", params, &reports_to(out.format.unwrap_or(FormatArg::Json), &reports))
}

fn cmd_bench(
    cfg: &RunConfig,
    input: Option<&Path>,
    pairs_per_bin: usize,
    totals: &[usize],
    bench: &BenchConfig,
    out: &OutputArgs,
) -> Result<(), CliError> {
    let (pairs, bench) = match input {
        Some(path) => {
            let (trees, errors) = parse_corpus(&read_file(path)?);
            if let Some(e) = errors.first() {
                return Err(CliError::Input(format!("line {}: {}", e.line, e.error)));
            }
            let trees: Vec<Tree> = trees.into_iter().map(|(_, t)| t).collect();
            let pairs: Vec<(Tree, Tree)> = trees.chunks_exact(2).map(|c| (c[0].clone(), c[1].clone())).collect();
            (pairs, bench.clone())
        }
        None => {
            let generator = TreeGenerator::new(SynthConfig { seed: cfg.seed, ..SynthConfig::default() });
            let bins = bins_around(totals);
            (synthetic_pairs(&generator, &bins, pairs_per_bin), BenchConfig { bins, ..bench.clone() })
        }
    };
    let report = timing_benchmark(&pairs, &cfg.encoder()?, &bench)?;
    let params = json!({ "pairs": pairs.len(), "bench": bench });
    emit(cfg, out.output.as_deref(), "bench", params, &reports_to(out.format.unwrap_or(FormatArg::Json), &[report]))
}
