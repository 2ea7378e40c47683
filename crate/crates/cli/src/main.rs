use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mrbp_core::dataset::{for_each_labeled, CodewordSource, DatasetKind, DatasetWriter, GenerationConfig, LabelPolicy, TrainingRecord};
use mrbp_core::nn::Preset;
use mrbp_core::sim::{parse_snr_list, DecoderKind, OutputFormat, SimConfig, Simulator};
use mrbp_core::{load_weights, CheckRule, ModelWeights, ParityCheckCode, RuleKind, SnrSpec, StreamRng};

#[derive(Parser)]
#[command(name = "mrbp", version, about = "Multi-round BP decoding of short LDPC codes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print code dimensions and degree profile.
    Info {
        #[arg(long)]
        code: PathBuf,
    },
    /// Monte-Carlo FER/BER sweep.
    Simulate(SimulateArgs),
    /// Collect labeled BP failures into a training dataset.
    GenDataset(GenDatasetArgs),
    /// Write a randomly initialized (or zero) weight file for a model preset.
    InitWeights(InitWeightsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Decoder {
    Bp,
    Mrbp,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Chmag,
    Appmag,
    Nsmea,
    Nn,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    D1,
    D2,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    /// Re-decode must return the transmitted codeword.
    Transmitted,
    /// Any converged re-decode counts.
    Any,
}

#[derive(Clone, Copy, ValueEnum)]
enum Arch {
    MlpaD1,
    MlpaD2,
    MlpbD2,
    GruD2,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    code: PathBuf,
    #[arg(long, value_enum, default_value = "mrbp")]
    decoder: Decoder,
    #[arg(long, value_enum, default_value = "nsmea")]
    rule: Rule,
    /// Perturbation rounds.
    #[arg(long = "T", default_value_t = 5)]
    rounds: usize,
    #[arg(long, default_value_t = 20)]
    l0: usize,
    #[arg(long, default_value_t = 20)]
    l1: usize,
    #[arg(long, default_value_t = mrbp_core::mrbp::DEFAULT_SAT)]
    sat: f64,
    /// Eb/N0 points in dB: `a:b:step`, a comma list, or a single value.
    #[arg(long, default_value = "1.0:4.0:0.5")]
    snr: String,
    #[arg(long, default_value_t = 100)]
    target_errors: u64,
    #[arg(long, default_value_t = 10_000_000)]
    max_frames: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    /// Output file; `.json` selects JSON, anything else CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Weight file for `--rule nn`.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Transmit uniformly random codewords instead of the all-zero word.
    #[arg(long)]
    random_codewords: bool,
    #[arg(long)]
    min_sum: bool,
    /// Count frames where the list held the transmitted word but a closer one was chosen.
    #[arg(long)]
    genie_check: bool,
}

#[derive(Args)]
struct GenDatasetArgs {
    #[arg(long)]
    code: PathBuf,
    #[arg(long)]
    snr_db: f64,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 20)]
    l0: usize,
    #[arg(long, default_value_t = 20)]
    l1: usize,
    #[arg(long, default_value_t = mrbp_core::mrbp::DEFAULT_SAT)]
    sat: f64,
    #[arg(long, value_enum, default_value = "d2")]
    kind: Kind,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "transmitted")]
    label_policy: Policy,
    #[arg(long)]
    random_codewords: bool,
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InitWeightsArgs {
    #[arg(long, value_enum)]
    arch: Arch,
    #[arg(long)]
    code: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    scale: f32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// All-zero weights instead of uniform noise.
    #[arg(long)]
    zero: bool,
    #[arg(long)]
    out: PathBuf,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn load_code(path: &Path) -> Result<ParityCheckCode> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ParityCheckCode::parse_alist(&text).with_context(|| format!("parsing {}", path.display()))
}

fn info(code: &Path) -> Result<()> {
    let c = load_code(code)?;
    let (vn, cn) = c.degree_profile();
    let fmt = |h: &std::collections::BTreeMap<usize, usize>| {
        h.iter().map(|(d, k)| format!("{d}:{k}")).collect::<Vec<_>>().join(" ")
    };
    println!("n      {}", c.n());
    println!("m      {}", c.m());
    println!("rank   {}", c.rank());
    println!("k      {}", c.k());
    println!("rate   {:.4}", c.rate());
    println!("edges  {}", c.num_edges());
    println!("vn deg {}", fmt(&vn));
    println!("cn deg {}", fmt(&cn));
    println!("hash   {}", c.identity_hash());
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let code = load_code(&a.code)?;
    let rule = match a.rule {
        Rule::Chmag => RuleKind::Chmag,
        Rule::Appmag => RuleKind::Appmag,
        Rule::Nsmea => RuleKind::Nsmea,
        Rule::Nn => RuleKind::Nn,
    };
    let decoder = match a.decoder {
        Decoder::Bp => DecoderKind::Bp,
        Decoder::Mrbp => DecoderKind::Mrbp,
    };
    let weights = match &a.weights {
        Some(p) => Some(Arc::new(load_weights(p).with_context(|| format!("loading {}", p.display()))?)),
        None if decoder == DecoderKind::Mrbp && rule == RuleKind::Nn => bail!("--rule nn needs --weights"),
        None => None,
    };
    let config = SimConfig {
        code_path: a.code.display().to_string(),
        decoder,
        rule,
        rounds: a.rounds,
        l0: a.l0,
        l1: a.l1,
        sat: a.sat,
        snr_db: parse_snr_list(&a.snr)?,
        max_frames: a.max_frames,
        target_errors: a.target_errors,
        seed: a.seed,
        workers: a.workers,
        weights_path: a.weights.as_ref().map(|p| p.display().to_string()),
        source: if a.random_codewords { CodewordSource::Random } else { CodewordSource::AllZero },
        check_rule: if a.min_sum { CheckRule::MinSum } else { CheckRule::SumProduct },
        genie_check: a.genie_check,
        ..SimConfig::default()
    };
    let result = Simulator::new(&code, config, weights)?.run_sweep()?;
    for p in &result.points {
        eprintln!(
            "{:>5.2} dB  frames {:>9}  errors {:>5}  fer {:.3e} [{:.2e}, {:.2e}]  ber {:.3e}  {:.1}s",
            p.snr_db, p.frames, p.frame_errors, p.fer, p.fer_ci95.0, p.fer_ci95.1, p.ber, p.wall_time_s
        );
    }
    match &a.out {
        Some(path) => result.emit(OutputFormat::from_path(path), path)?,
        None => print!("{}", result.to_csv()),
    }
    Ok(())
}

fn gen_dataset(a: GenDatasetArgs) -> Result<()> {
    let code = load_code(&a.code)?;
    let kind = match a.kind {
        Kind::D1 => DatasetKind::D1,
        Kind::D2 => DatasetKind::D2,
    };
    let config = GenerationConfig {
        l0: a.l0,
        l1: a.l1,
        sat: a.sat,
        kind,
        label_policy: match a.label_policy {
            Policy::Transmitted => LabelPolicy::TransmittedCodeword,
            Policy::Any => LabelPolicy::AnyCodeword,
        },
        source: if a.random_codewords { CodewordSource::Random } else { CodewordSource::AllZero },
        ..GenerationConfig::new(SnrSpec::for_code(a.snr_db, &code)?, a.count, a.seed)
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.workers).build()?;
    let mut writer = DatasetWriter::create(&a.out, config.header(&code, 0))?;
    let mut positives = 0usize;
    pool.install(|| {
        for_each_labeled(&code, &config, |lf| {
            positives += lf.labels.weight();
            writer.write(&TrainingRecord::from_frame(&lf.sample.frame, lf.labels, kind))
        })
    })?;
    let header = writer.finish()?;
    eprintln!(
        "wrote {} records to {} (mean label weight {:.2})",
        header.record_count,
        a.out.display(),
        positives as f64 / header.record_count.max(1) as f64
    );
    Ok(())
}

fn init_weights(a: InitWeightsArgs) -> Result<()> {
    let code = load_code(&a.code)?;
    let preset = match a.arch {
        Arch::MlpaD1 => Preset::MlpaD1,
        Arch::MlpaD2 => Preset::MlpaD2,
        Arch::MlpbD2 => Preset::MlpbD2,
        Arch::GruD2 => Preset::GruD2,
    };
    let meta = preset.meta(code.n(), code.m());
    let weights = if a.zero {
        ModelWeights::zeros(meta)?
    } else {
        ModelWeights::random(meta, a.scale, &mut StreamRng::new(a.seed, 0))?
    };
    weights.save(&a.out)?;
    eprintln!("{}: {} parameters -> {}", preset.name(), weights.count_parameters(), a.out.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Info { code } => info(&code),
        Command::Simulate(a) => simulate(a),
        Command::GenDataset(a) => gen_dataset(a),
        Command::InitWeights(a) => init_weights(a),
    }
}
