//! `lzap compress | decompress | verify | stats`.
//!
//! Exit codes: 0 success, 1 data or I/O error, 2 verification still failing
//! after all retries, 64 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::codec;
use crate::error::Error;
use crate::fingerprint::MERSENNE_61;
use crate::iomodel::{FileSource, IoConfig, Source, DEFAULT_BLOCK_SIZE};
use crate::oracle::{exact_lz77, Lz77Variant, DEFAULT_ORACLE_LIMIT};
use crate::parse_core::{parse, Params, ParseOptions, RunStats, ShortTableConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "lzap", version, about = "LZ77-like parsing with sequential passes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a file and write the serialized parse.
    Compress {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        run: RunFlags,
        /// Write a JSON run report here.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Decode a serialized parse.
    Decompress {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Check a serialized parse against its source file.
    Verify {
        #[arg(long)]
        parse: PathBuf,
        #[arg(long)]
        source: PathBuf,
    },
    /// Parse a file and print a JSON run report, with the exact LZ77 phrase
    /// count when the input is small enough.
    Stats {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        run: RunFlags,
        #[arg(long, default_value_t = DEFAULT_ORACLE_LIMIT)]
        oracle_limit: usize,
        #[arg(long, default_value_t = Lz77Variant::Classic)]
        oracle_variant: Lz77Variant,
    },
}

#[derive(Debug, Args)]
struct RunFlags {
    /// In (0, 1].
    #[arg(long, value_parser = parse_epsilon)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fingerprint modulus; must be prime.
    #[arg(long, default_value_t = MERSENNE_61)]
    modulus: u64,
    #[arg(long, default_value_t = DEFAULT_BLOCK_SIZE as u64, value_parser = clap::value_parser!(u64).range(1..))]
    block_size: u64,
    /// Memory for the short-substring table, in bytes; 0 disables it.
    #[arg(long, default_value_t = 0)]
    short_table_mem: usize,
    /// Total parse attempts before giving up.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    max_retries: u32,
    #[arg(long)]
    halve_epsilon: bool,
}

fn parse_epsilon(s: &str) -> Result<f64, String> {
    let e: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if e > 0.0 && e <= 1.0 {
        Ok(e)
    } else {
        Err(format!("epsilon must be in (0, 1], got {s}"))
    }
}

impl RunFlags {
    fn options(&self) -> ParseOptions {
        ParseOptions {
            modulus: self.modulus,
            io: IoConfig::with_block_size(self.block_size as usize),
            short_table: (self.short_table_mem > 0)
                .then(|| ShortTableConfig::new(self.short_table_mem)),
            max_retries: self.max_retries,
        }
    }
}

/// Summary of one run, written as JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub n: usize,
    /// Epsilon the driver ran with.
    pub epsilon: f64,
    pub phrases: usize,
    pub z: Option<usize>,
    pub ratio: Option<f64>,
    pub schedule_length: usize,
    pub passes: u64,
    pub bytes_read: u64,
    pub blocks_read: u64,
    pub candidates_max: usize,
    pub retries: u32,
    pub seed: u64,
    pub elapsed_ms: u128,
}

impl RunReport {
    fn new(
        params: &Params,
        phrases: usize,
        stats: &RunStats,
        z: Option<usize>,
        started: Instant,
    ) -> Self {
        RunReport {
            n: params.n,
            epsilon: params.effective_epsilon(),
            phrases,
            z,
            ratio: z.filter(|&z| z > 0).map(|z| phrases as f64 / z as f64),
            schedule_length: stats.schedule_length,
            passes: stats.io.passes,
            bytes_read: stats.io.bytes_read,
            blocks_read: stats.io.blocks_read,
            candidates_max: stats.candidates_max,
            retries: stats.attempts.saturating_sub(1),
            seed: params.seed,
            elapsed_ms: started.elapsed().as_millis(),
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn data(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::RetriesExhausted { .. } => EXIT_VERIFY,
            Error::InvalidConfig(_) | Error::InvalidParams(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn open_source(path: &Path) -> Result<FileSource, Failure> {
    FileSource::open(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn run_parse(
    source: &FileSource,
    run: &RunFlags,
) -> Result<(Params, crate::parse_core::Parse, RunStats), Failure> {
    let params = Params::new(source.len(), run.epsilon, run.halve_epsilon, run.seed)?;
    let (parsed, stats) = parse(source, &params, &run.options())?;
    Ok((params, parsed, stats))
}

fn to_json(report: &RunReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

fn execute(command: Command, stdout: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Compress {
            input,
            output,
            run,
            stats,
        } => {
            let started = Instant::now();
            let source = open_source(&input)?;
            let (params, parsed, run_stats) = run_parse(&source, &run)?;
            write_file(&output, &codec::encode(&parsed))?;
            if let Some(path) = stats {
                let report = RunReport::new(&params, parsed.len(), &run_stats, None, started);
                write_file(&path, to_json(&report).as_bytes())?;
            }
            Ok(())
        }
        Command::Decompress { input, output } => {
            let stream = read_file(&input)?;
            let bytes = codec::decode(&stream)
                .map_err(|e| Failure::data(format!("{}: {e}", input.display())))?;
            write_file(&output, &bytes)
        }
        Command::Verify { parse, source } => {
            let stream = read_file(&parse)?;
            let parsed = codec::deserialize(&stream)
                .map_err(|e| Failure::data(format!("{}: {e}", parse.display())))?;
            let src = open_source(&source)?;
            match codec::verify(&parsed, &src)? {
                None => Ok(()),
                Some(m) => Err(Failure::data(format!("verification failed: {m}"))),
            }
        }
        Command::Stats {
            input,
            run,
            oracle_limit,
            oracle_variant,
        } => {
            let started = Instant::now();
            let source = open_source(&input)?;
            let (params, parsed, run_stats) = run_parse(&source, &run)?;
            let z = if source.len() <= oracle_limit {
                let bytes = read_file(&input)?;
                Some(exact_lz77(&bytes, oracle_variant, oracle_limit)?.stats.z)
            } else {
                None
            };
            let report = RunReport::new(&params, parsed.len(), &run_stats, z, started);
            writeln!(stdout, "{}", to_json(&report)).map_err(|e| Failure::data(e.to_string()))
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "lzap: {}", f.message);
            f.code
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}
