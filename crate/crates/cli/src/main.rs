use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use aescpa::aes::Block;
use aescpa::cpa::{attack, evolution, realign};
use aescpa::power_model::PowerModelSpec;
use aescpa::report::{summarize_top, DEFAULT_TOP};
use aescpa::sim::{acquire_campaign, LeakageConfig};
use aescpa::trace_io::{
    export_evolution_file, read_header, read_traceset_file, write_traceset_file, ExportFormat,
};

const DEFAULT_SEED: u64 = 1;
const DEFAULT_CHECKPOINTS: [usize; 7] = [50, 100, 200, 300, 400, 500, 600];

/// Exit code for errors (bad input, unreadable files); 0 and 1 are verdicts.
const EXIT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(
    name = "aescpa",
    version,
    about = "Correlation power analysis of first-round AES-128"
)]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    XorHw,
    SboxHw,
}

impl From<Model> for PowerModelSpec {
    fn from(m: Model) -> Self {
        match m {
            Model::XorHw => PowerModelSpec::xor_hw(),
            Model::SboxHw => PowerModelSpec::sbox_hw(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an acquisition campaign and write a trace file.
    Simulate(SimulateArgs),
    /// Recover the key from a trace file.
    Attack(AttackArgs),
    /// Export peak correlations as traces accumulate.
    Evolve(EvolveArgs),
    /// Print trace file metadata and sample statistics.
    Inspect {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// 32 hex digits, or "random" (derived from the seed).
    #[arg(long)]
    key: String,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    plaintexts: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    jitter_max: Option<usize>,
    #[arg(long)]
    drift_sigma: Option<f64>,
    #[arg(long)]
    drop_prob: Option<f64>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Disable interrupts during capture (no jitter).
    #[arg(long)]
    no_interrupts: bool,
    /// Wait before each capture (no dropped captures).
    #[arg(long)]
    acq_delay: bool,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    leak_coeff: Option<f64>,
    /// Store the key in the file header as ground truth.
    #[arg(long)]
    embed_key: bool,
}

#[derive(clap::Args)]
struct AttackArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "sbox-hw")]
    model: Model,
    #[arg(long, default_value_t = DEFAULT_TOP)]
    top: usize,
    #[arg(long)]
    json: bool,
    /// Realign traces to the first one first, searching shifts up to this many samples.
    #[arg(long, value_name = "MAXSHIFT")]
    realign: Option<usize>,
}

#[derive(clap::Args)]
struct EvolveArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "sbox-hw")]
    model: Model,
    #[arg(long, value_delimiter = ',')]
    checkpoints: Option<Vec<usize>>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn parse_key(s: &str, seed: u64) -> Result<Block> {
    if s.eq_ignore_ascii_case("random") {
        // a stream the simulator never uses for plaintexts or captures
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b65_795f_7365_6564);
        return Ok(Block(rng.random()));
    }
    let bytes = hex::decode(s).with_context(|| format!("malformed key {s:?}"))?;
    Block::from_slice(&bytes)
        .with_context(|| format!("key must be 16 bytes (32 hex digits), got {}", bytes.len()))
}

fn simulate(args: SimulateArgs) -> Result<u8> {
    let key = parse_key(&args.key, args.seed)?;
    let mut config = LeakageConfig::default();
    if let Some(v) = args.noise_sigma {
        config.noise_sigma = v;
    }
    if let Some(v) = args.jitter_max {
        config.jitter_max = v;
    }
    if let Some(v) = args.drift_sigma {
        config.drift_sigma = v;
    }
    if let Some(v) = args.drop_prob {
        config.drop_probability = v;
    }
    if let Some(v) = args.repeats {
        config.repeats = v;
    }
    if let Some(v) = args.samples {
        config.samples_per_trace = v;
    }
    if let Some(v) = args.leak_coeff {
        config.leak_coefficient = v;
    }
    config.interrupts_disabled = args.no_interrupts;
    config.acquisition_delay = args.acq_delay;

    let mut traces = acquire_campaign(&key, args.plaintexts as usize, &config, args.seed)?;
    if !args.embed_key {
        traces.key_under_test = None;
    }
    write_traceset_file(&traces, &args.out)?;
    println!("key: {key}");
    println!(
        "wrote {} traces x {} samples to {}",
        traces.len(),
        traces.samples_per_trace(),
        args.out.display()
    );
    Ok(0)
}

fn run_attack(args: AttackArgs) -> Result<u8> {
    let mut traces = read_traceset_file(&args.input)?;
    if let Some(max_shift) = args.realign {
        traces = realign(&traces, 0, max_shift)?;
        info!("realigned {} traces (max shift {max_shift})", traces.len());
    }
    let spec = PowerModelSpec::from(args.model);
    let result = attack(&traces, &spec)?;
    let summary = summarize_top(&result, traces.key_under_test.as_ref(), args.top);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        print!("{summary}");
    }
    Ok(match summary.success {
        Some(s) if s.fully_recovered() => 0,
        Some(_) => 1,
        None => {
            eprintln!(
                "no ground-truth key in {}; no verdict",
                args.input.display()
            );
            0
        }
    })
}

/// Clips requested checkpoints to the trace count and drops duplicates.
fn clip_checkpoints(requested: &[usize], available: usize) -> Result<Vec<usize>> {
    if requested.is_empty() {
        bail!("no checkpoints given");
    }
    if requested.contains(&0) {
        bail!("checkpoints must be positive");
    }
    if requested.windows(2).any(|w| w[0] >= w[1]) {
        bail!("checkpoints must be strictly ascending: {requested:?}");
    }
    let mut out: Vec<usize> = requested.iter().map(|&c| c.min(available)).collect();
    out.dedup();
    if requested.last() > out.last() {
        warn!("only {available} traces available; checkpoints {requested:?} clipped to {out:?}");
    }
    Ok(out)
}

fn evolve(args: EvolveArgs) -> Result<u8> {
    let traces = read_traceset_file(&args.input)?;
    let requested = args
        .checkpoints
        .unwrap_or_else(|| DEFAULT_CHECKPOINTS.to_vec());
    let checkpoints = clip_checkpoints(&requested, traces.len())?;
    let series = evolution(&traces, &args.model.into(), &checkpoints)?;
    let format = match args.format {
        Format::Csv => ExportFormat::Csv,
        Format::Json => ExportFormat::Json,
    };
    export_evolution_file(&series, &args.out, format)?;
    println!(
        "wrote {} rows ({} bytes x {} checkpoints x 256 candidates) to {}",
        series.bytes.len() * checkpoints.len() * 256,
        series.bytes.len(),
        checkpoints.len(),
        args.out.display()
    );
    Ok(0)
}

fn inspect(path: PathBuf) -> Result<u8> {
    let mut file =
        std::fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let header = read_header(&mut file)?;
    let traces = read_traceset_file(&path)?;
    println!("file:              {}", path.display());
    println!("format version:    {}", header.version);
    println!("flags:             {:#06x}", header.flags);
    println!("records:           {}", traces.len());
    println!("samples per trace: {}", traces.samples_per_trace());
    println!("sample rate:       {} Hz", header.sample_rate_hz);
    match traces.key_under_test {
        Some(k) => println!("ground truth key:  {k}"),
        None => println!("ground truth key:  absent"),
    }

    let m = traces.to_matrix();
    if m.is_empty() {
        return Ok(0);
    }
    let mean = m.mean().unwrap_or(0.0);
    let std = m.std(0.0);
    let per_sample_std = m.std_axis(ndarray::Axis(0), 0.0).mean().unwrap_or(0.0);
    println!("sample mean:       {mean:.6}");
    println!("sample std:        {std:.6}");
    println!("mean per-sample std across traces: {per_sample_std:.6}");
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Attack(a) => run_attack(a),
        Command::Evolve(a) => evolve(a),
        Command::Inspect { input } => inspect(input),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
