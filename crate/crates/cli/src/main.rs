mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "warpframe", version, about = "Warped time-frequency frames: warps, transforms, coverings, kernel diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Warp: a preset name or a path to a JSON descriptor.
    #[arg(long)]
    warp: Option<String>,
    /// Preset name (gabor[:d], wavelet1d, alpha[:d[:p]], exotic2d, radial-log[:d], log).
    #[arg(long, conflicts_with = "warp")]
    preset: Option<String>,
    /// Window: gauss or bump:r.
    #[arg(long, default_value = "bump:1")]
    theta: String,
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    /// Comma-separated, strictly decreasing.
    #[arg(long, value_delimiter = ',')]
    delta_list: Option<Vec<f64>>,
    /// Frequency box lo:hi, one per axis or one for all axes.
    #[arg(long = "box", allow_hyphen_values = true)]
    freq_box: Option<String>,
    /// Frequency samples per axis.
    #[arg(long)]
    n: Option<usize>,
    /// Time extent lo:hi, one per axis or one for all axes.
    #[arg(long, allow_hyphen_values = true)]
    time_extent: Option<String>,
    /// Inner (time) exponent; a number or inf.
    #[arg(long, default_value = "2")]
    p: String,
    /// Outer (channel) exponent; a number or inf.
    #[arg(long, default_value = "2")]
    q: String,
    /// Coefficient weight: 1 or poly:s for (1+|ω|)^s.
    #[arg(long, default_value = "1")]
    kappa: String,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; falls back to WARPFRAME_THREADS.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Warp metadata, weights and round-trip residuals at probe points.
    WarpInfo {
        #[command(flatten)]
        common: Common,
    },
    /// Sampled admissibility checks; exit code 1 if any fails.
    Check {
        #[command(flatten)]
        common: Common,
        /// Override the control weight: const:c, poly:c:a or exp:c.
        #[arg(long)]
        v0: Option<String>,
        /// Derivative order for the φ_τ bound.
        #[arg(long, default_value_t = warpframe::presets::FIT_ORDER)]
        k: usize,
    },
    /// Writes a test signal (zero, impulse, chirp[:rate], random).
    GenSignal {
        #[command(flatten)]
        common: Common,
        #[arg(default_value = "random")]
        kind: String,
    },
    /// Signal file to coefficient file.
    Analyze {
        #[command(flatten)]
        common: Common,
        input: PathBuf,
    },
    /// Coefficient file to signal file, by frame inversion or plain adjoint.
    Synthesize {
        #[command(flatten)]
        common: Common,
        input: PathBuf,
        #[arg(long)]
        adjoint: bool,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
    },
    /// Analysis followed by reconstruction; reports the relative error.
    Roundtrip {
        #[command(flatten)]
        common: Common,
        input: PathBuf,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
    },
    /// Mixed ℓ^{p,q}_κ norm of a coefficient file.
    Norms {
        #[command(flatten)]
        common: Common,
        input: PathBuf,
    },
    /// Covering cells as CSV plus a JSON record file.
    CoveringExport {
        #[command(flatten)]
        common: Common,
        /// Also count neighbors per cell.
        #[arg(long)]
        neighbors: bool,
    },
    /// Frame-bound estimates over a δ-list.
    FrameBounds {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 300)]
        iterations: usize,
    },
    /// Oscillation and Gram kernel norms over a δ-list.
    KernelDecay {
        #[command(flatten)]
        common: Common,
        /// Time samples of the truncated grid.
        #[arg(long)]
        n_time: Option<usize>,
        /// Frequency samples of the truncated grid.
        #[arg(long)]
        n_freq: Option<usize>,
    },
}

/// Failure classes, mapped to exit codes 1, 2 and 3.
#[derive(Debug)]
pub enum Failure {
    Check(String),
    Usage(String),
    Io(String),
}

impl From<warpframe::Error> for Failure {
    fn from(e: warpframe::Error) -> Self {
        use warpframe::Error as E;
        match e {
            E::Io(_) => Failure::Io(e.to_string()),
            E::CgStagnation { .. } | E::NotIncreasing(_) | E::NonPositive { .. } | E::OrthogonalPrototypes => Failure::Check(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn init_threads(common: &Common) -> Result<(), Failure> {
    let n = match common.threads {
        Some(n) => Some(n),
        None => match std::env::var("WARPFRAME_THREADS") {
            Ok(s) => Some(s.trim().parse::<usize>().map_err(|_| Failure::Usage(format!("WARPFRAME_THREADS='{s}' is not a count")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Failure::Usage("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    use commands as c;
    match cli.command {
        Command::WarpInfo { common } => {
            init_threads(&common)?;
            c::warp_info(&common)
        }
        Command::Check { common, v0, k } => {
            init_threads(&common)?;
            c::check(&common, v0.as_deref(), k)
        }
        Command::GenSignal { common, kind } => {
            init_threads(&common)?;
            c::gen_signal(&common, &kind)
        }
        Command::Analyze { common, input } => {
            init_threads(&common)?;
            c::analyze(&common, &input)
        }
        Command::Synthesize { common, input, adjoint, max_iter } => {
            init_threads(&common)?;
            c::synthesize(&common, &input, adjoint, max_iter)
        }
        Command::Roundtrip { common, input, max_iter } => {
            init_threads(&common)?;
            c::roundtrip(&common, &input, max_iter)
        }
        Command::Norms { common, input } => {
            init_threads(&common)?;
            c::norms(&common, &input)
        }
        Command::CoveringExport { common, neighbors } => {
            init_threads(&common)?;
            c::covering_export(&common, neighbors)
        }
        Command::FrameBounds { common, iterations } => {
            init_threads(&common)?;
            c::frame_bounds(&common, iterations)
        }
        Command::KernelDecay { common, n_time, n_freq } => {
            init_threads(&common)?;
            c::kernel_decay(&common, n_time, n_freq)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(m)) => {
            eprintln!("check failed: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Io(m)) => {
            eprintln!("i/o error: {m}");
            ExitCode::from(3)
        }
    }
}
