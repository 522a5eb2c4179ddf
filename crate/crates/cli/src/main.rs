//! `lgimap`: scene generation, LGI maps, masks, metrics and losses from the shell.

mod commands;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "lgimap", version, about = "Light-geometry interaction maps from depth")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Threads {
    /// Worker threads (0 = all cores). LGIMAP_THREADS takes precedence.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scenes with exact depth maps and oracle shadow masks.
    GenScene(GenSceneArgs),
    /// Render exact depth (and optionally radiance and the oracle mask) for a scene config.
    RenderDepth(RenderDepthArgs),
    /// Compute LGI maps and shadow masks from a depth map.
    Lgi(LgiArgs),
    /// Compare a predicted mask against ground truth.
    Eval(EvalArgs),
    /// Sum per-light linear radiance images.
    Compose(ComposeArgs),
    /// Measure LGI throughput and check digests across thread counts.
    Bench(BenchArgs),
    /// Evaluate training losses on serialized inputs.
    #[command(subcommand)]
    Losses(LossCommand),
}

#[derive(Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
enum SuiteKind {
    Suite,
    Ambiguous,
    Sphere,
}

#[derive(Args)]
struct GenSceneArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = lgimap_core::synth::DEFAULT_SUITE_SIZE)]
    count: usize,
    #[arg(long, default_value_t = lgimap_core::synth::DEFAULT_SUITE_RESOLUTION)]
    resolution: usize,
    /// Scene family: the front-lit suite, the back-lit diagnostic set, or the single reference sphere scene.
    #[arg(long, value_enum, default_value = "suite")]
    kind: SuiteKind,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    threads: Threads,
}

#[derive(Args)]
struct RenderDepthArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Depth output (PFM, NaN where nothing is hit).
    #[arg(long)]
    out: PathBuf,
    /// Oracle shadow mask for the selected light (PNG).
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Direct-lighting radiance for the selected light, or all lights without --light (PFM).
    #[arg(long)]
    radiance: Option<PathBuf>,
    #[arg(long)]
    light: Option<usize>,
    #[command(flatten)]
    threads: Threads,
}

#[derive(Clone, Copy, ValueEnum)]
enum InterpArg {
    Nearest,
    Bilinear,
}

#[derive(Args)]
struct LgiArgs {
    #[arg(long)]
    depth: PathBuf,
    #[arg(long)]
    scene: PathBuf,
    /// Output prefix; writes <prefix>_lgi.pfm, _valid.png, _hard.png and optionally _soft.png.
    #[arg(long)]
    out: PathBuf,
    /// Samples per ray (default from the scene config).
    #[arg(long)]
    n: Option<usize>,
    /// Hard-mask threshold in degrees (default from the scene config).
    #[arg(long)]
    eta: Option<f64>,
    /// Treat the light as directional along this direction (x,y,z, pointing toward the light).
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    sunlight: Option<[f64; 3]>,
    /// Write a soft mask with this temperature in degrees.
    #[arg(long)]
    soft: Option<f64>,
    #[arg(long, value_enum)]
    interp: Option<InterpArg>,
    /// Index into the config's light list.
    #[arg(long, default_value_t = 0)]
    light: usize,
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    threads: Threads,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = lgimap_core::metrics::DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Two images (PFM) compared by RMSE overall and inside the ground-truth shadow.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    region_rmse: Option<Vec<PathBuf>>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ComposeArgs {
    #[arg(long, num_args = 1.., required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write an 8-bit display PNG clamped to [0, 1].
    #[arg(long)]
    clamp: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 512)]
    size: usize,
    #[arg(long, default_value_t = lgimap_core::lgi::DEFAULT_N_SAMPLES)]
    n: usize,
    /// Thread counts to compare. LGIMAP_THREADS replaces the list.
    #[arg(long, value_delimiter = ',', default_value = "1,8")]
    threads: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    repeat: usize,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum LossCommand {
    /// Latent matching loss and target retrieval on a JSON batch.
    Latent {
        #[arg(long)]
        input: PathBuf,
    },
    /// Change-weighted L1 between predicted and target images (PFM).
    Image {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        source: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        tau: f64,
        #[arg(long, default_value_t = 17)]
        kernel: usize,
        /// Latent loss to combine with the image loss.
        #[arg(long)]
        lz: Option<f64>,
        #[arg(long, default_value_t = lgimap_core::bridgemath::DEFAULT_LAMBDA)]
        lambda: f64,
    },
    /// Mask BCE, IoU loss and their sum over the dilated ground truth (PNG).
    Mask {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 17)]
        dilation: usize,
    },
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected x,y,z, got {} values", v.len()))
}

/// `LGIMAP_THREADS` overrides the flag.
fn thread_override() -> CliResult<Option<usize>> {
    match std::env::var("LGIMAP_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::input(format!("LGIMAP_THREADS must be a non-negative integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn with_threads<T: Send>(flag: usize, f: impl FnOnce() -> CliResult<T> + Send) -> CliResult<T> {
    let n = thread_override()?.unwrap_or(flag);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError {
            code: 1,
            message: format!("thread pool: {e}"),
        })?;
    pool.install(f)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::GenScene(a) => with_threads(a.threads.threads, || commands::gen_scene(&a)),
        Command::RenderDepth(a) => with_threads(a.threads.threads, || commands::render_depth(&a)),
        Command::Lgi(a) => with_threads(a.threads.threads, || commands::lgi(&a)),
        Command::Eval(a) => commands::eval(&a),
        Command::Compose(a) => commands::compose(&a),
        Command::Bench(a) => {
            let threads = match thread_override()? {
                Some(n) => vec![n],
                None => a.threads.clone(),
            };
            commands::bench(&a, &threads)
        }
        Command::Losses(c) => commands::losses(&c),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
