//! `ssu`: command-line front end of the sparse state update pipeline.
//!
//! Machine output is JSON on stdout or in files; diagnostics go to stderr.
//! Exit codes: 0 success, 1 invalid stream (`validate`), 2 input or parse
//! error, 3 scorer or service unavailable.

mod backend;
mod commands;
mod config;
mod exit;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use crate::config::{parse_pair, GlobalOpts, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "ssu", version, about = "Sparse state update codec for SVG animations")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

/// Stream input: an encoded directory, or a `.ssu` file (`-` for stdin)
/// together with `--s0`.
#[derive(clap::Args, Debug)]
struct StreamArgs {
    input: PathBuf,
    /// Initial document; defaults to the one in the encoded directory.
    #[arg(long)]
    s0: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Canonicalize one SVG document.
    Canonicalize {
        /// SVG file, or `-` for stdin.
        input: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Encode frames directories into a stream, initial document and stats.
    Encode {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output directory; one subdirectory per input when several are given.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Rebuild a frames directory from an encoded stream.
    Decode {
        #[command(flatten)]
        stream: StreamArgs,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Check a stream; exits 1 when it is invalid.
    Validate {
        #[command(flatten)]
        stream: StreamArgs,
        /// Also require the first update frame to rasterize.
        #[arg(long)]
        strict: bool,
    },
    /// Check the node ids mentioned in a reasoning text.
    Cot {
        /// Text file, or `-` for stdin.
        input: PathBuf,
        #[arg(long)]
        s0: PathBuf,
    },
    /// Token statistics of a frames directory.
    Stats { input: PathBuf },
    /// Rasterize a frames or encoded directory to PNG files.
    Render {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Pixel size; defaults to the viewport.
        #[arg(long, value_parser = parse_pair, value_name = "WxH")]
        size: Option<[f64; 2]>,
        /// Background color.
        #[arg(long)]
        background: Option<String>,
    },
    /// Hybrid reward of one stream.
    Score {
        #[command(flatten)]
        stream: StreamArgs,
        #[arg(long)]
        prompt: String,
        /// Motion description for the stub scorer; defaults to the manifest's.
        #[arg(long)]
        description: Option<String>,
    },
    /// Rewards, advantages and loss for a group of candidate streams.
    GrpoSim {
        /// Directory of `*.ssu` candidates with `.lp.new` / `.lp.old` sidecars.
        candidates: PathBuf,
        #[arg(long)]
        s0: PathBuf,
        #[arg(long)]
        prompt: String,
        #[arg(long)]
        description: Option<String>,
        /// JSON lines file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write a seeded synthetic corpus of frames directories.
    GenCorpus {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the codec service.
    Serve {
        #[arg(long, env = "SSU_ADDR", default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let cfg = RunConfig::resolve(&cli.global)?;
    if let Some(jobs) = cfg.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    use commands as c;
    match cli.command {
        Command::Canonicalize { input, output } => c::canonicalize(&cfg, &input, output.as_deref()),
        Command::Encode { inputs, output } => c::encode(&cfg, &inputs, &output),
        Command::Decode { stream, output } => c::decode(&cfg, &stream.input, stream.s0.as_deref(), &output),
        Command::Validate { stream, strict } => c::validate(&cfg, &stream.input, stream.s0.as_deref(), strict),
        Command::Cot { input, s0 } => c::cot(&cfg, &input, &s0),
        Command::Stats { input } => c::stats(&cfg, &input),
        Command::Render {
            input,
            output,
            size,
            background,
        } => c::render(&cfg, &input, &output, size, background),
        Command::Score {
            stream,
            prompt,
            description,
        } => c::score(&cfg, &stream.input, stream.s0.as_deref(), prompt, description),
        Command::GrpoSim {
            candidates,
            s0,
            prompt,
            description,
            output,
        } => c::grpo_sim(&cfg, &candidates, &s0, prompt, description, output.as_deref()),
        Command::GenCorpus { seed, count, output } => c::gen_corpus(&cfg, seed, count, &output),
        Command::Serve { addr } => c::serve(&cfg, addr),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("SSU_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::code_of(&e))
        }
    }
}
